#include "sdc/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sdc::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'S', 'D', 'C', 'K'};
constexpr std::uint8_t kFloat32 = 1;

template <typename U>
void put(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename U>
U get(std::istream& is, const std::string& path) {
  U v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("checkpoint: truncated file " + path);
  return v;
}

std::string get_bytes(std::istream& is, std::size_t n, const std::string& path) {
  std::string s(n, '\0');
  if (n && !is.read(s.data(), std::streamsize(n))) throw IoError("checkpoint: truncated file " + path);
  return s;
}

}  // namespace

const Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ostringstream meta;
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw ConfigError("checkpoint: metadata key/value contains a reserved character: " + k);
    meta << k << '=' << v << '\n';
  }
  const std::string meta_text = meta.str();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, std::uint32_t(meta_text.size()));
  os.write(meta_text.data(), std::streamsize(meta_text.size()));
  put<std::uint32_t>(os, std::uint32_t(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint16_t>(os, std::uint16_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    put<std::uint8_t>(os, kFloat32);
    put<std::uint8_t>(os, std::uint8_t(t.rank()));
    for (int d : t.shape()) put<std::int32_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data()), std::streamsize(t.size() * sizeof(float)));
  }
  if (!os) throw IoError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + p);
  if (get_bytes(is, 4, p) != std::string(kMagic, 4)) throw IoError("checkpoint: bad magic in " + p);
  const auto version = get<std::uint32_t>(is, p);
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version) + " in " + p);

  Checkpoint ck;
  std::istringstream meta(get_bytes(is, get<std::uint32_t>(is, p), p));
  for (std::string line; std::getline(meta, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("checkpoint: malformed metadata line in " + p);
    ck.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }

  const auto count = get<std::uint32_t>(is, p);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = get_bytes(is, get<std::uint16_t>(is, p), p);
    if (get<std::uint8_t>(is, p) != kFloat32) throw IoError("checkpoint: unsupported dtype for " + name);
    const auto rank = get<std::uint8_t>(is, p);
    Shape shape;
    for (int d = 0; d < rank; ++d) {
      const auto dim = get<std::int32_t>(is, p);
      if (dim < 0) throw IoError("checkpoint: negative dimension for " + name);
      shape.push_back(dim);
    }
    Tensor<float> t(shape);
    if (t.size() && !is.read(reinterpret_cast<char*>(t.data()), std::streamsize(t.size() * sizeof(float))))
      throw IoError("checkpoint: truncated tensor " + name + " in " + p);
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

void store_params(Checkpoint& ckpt, const ParamList<float>& params, const std::string& prefix) {
  for (const auto& p : params) ckpt.tensors.emplace_back(prefix + p.name, p.var.value());
}

void restore_params(const Checkpoint& ckpt, const ParamList<float>& params, const std::string& prefix) {
  for (const auto& p : params) {
    const Tensor<float>* t = ckpt.find(prefix + p.name);
    if (!t) throw IoError("checkpoint: missing tensor " + prefix + p.name);
    if (t->shape() != p.var.shape())
      throw IoError("checkpoint: shape mismatch for " + prefix + p.name + ": " + shape_str(t->shape()) +
                    " vs " + shape_str(p.var.shape()));
    p.var.node()->value = *t;
  }
}

}  // namespace sdc::nn

#include "sdc/harness/data.hpp"

#include <exception>

namespace sdc::harness {

std::vector<synth::Sample> load_split(const std::filesystem::path& root, synth::Split split,
                                      const prep::PreprocessConfig& prep) {
  const synth::DatasetManifest manifest = synth::DatasetManifest::load(root);
  const std::vector<synth::ManifestEntry> entries = manifest.split(split);
  std::vector<synth::Sample> out(entries.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < entries.size(); ++i) {
    try {
      synth::Sample s = synth::load_sample(root, entries[i]);
      Rng unused(0);
      if (s.gray.height != prep.train_size || s.gray.width != prep.train_size)
        s = prep::crop_resize(s, prep.train_size, prep::ResizeMode::Resize, unused);
      prep::attach_pseudo_dense(s, prep);
      out[i] = std::move(s);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

DataSplits load_dataset(const std::filesystem::path& root, const prep::PreprocessConfig& prep) {
  prep.validate();
  return {load_split(root, synth::Split::Train, prep), load_split(root, synth::Split::Val, prep),
          load_split(root, synth::Split::Test, prep)};
}

Batch make_batch(const std::vector<const synth::Sample*>& samples) {
  if (samples.empty()) throw ShapeError("make_batch: empty batch");
  const int n = static_cast<int>(samples.size());
  const int h = samples[0]->gray.height, w = samples[0]->gray.width;
  const std::size_t plane = std::size_t(h) * w;
  Batch b;
  for (auto* t : {&b.gray, &b.sparse, &b.pseudo, &b.depth, &b.mask}) *t = nn::Tensor<float>({n, 1, h, w});
  for (int i = 0; i < n; ++i) {
    const synth::Sample& s = *samples[i];
    if (s.gray.height != h || s.gray.width != w) throw ShapeError("make_batch: samples differ in size");
    if (s.pseudo_dense.size() != plane) throw ShapeError("make_batch: pseudo-dense depth missing for " + s.id);
    std::copy(s.gray.pixels.begin(), s.gray.pixels.end(), b.gray.data() + i * plane);
    std::copy(s.sparse_depth.pixels.begin(), s.sparse_depth.pixels.end(), b.sparse.data() + i * plane);
    std::copy(s.pseudo_dense.pixels.begin(), s.pseudo_dense.pixels.end(), b.pseudo.data() + i * plane);
    std::copy(s.dense_depth_gt.pixels.begin(), s.dense_depth_gt.pixels.end(), b.depth.data() + i * plane);
    for (std::size_t p = 0; p < plane; ++p) b.mask[i * plane + p] = s.fg_mask_gt.pixels[p] ? 1.0f : 0.0f;
    b.ids.push_back(s.id);
  }
  return b;
}

ImageF image_of(const nn::Tensor<float>& t, int n) {
  const int h = t.dim(2), w = t.dim(3);
  ImageF img(h, w);
  std::copy_n(t.data() + std::size_t(n) * h * w, std::size_t(h) * w, img.pixels.begin());
  return img;
}

Mask mask_of(const nn::Tensor<float>& t, int n) {
  const int h = t.dim(2), w = t.dim(3);
  Mask m(h, w);
  for (std::size_t p = 0; p < m.size(); ++p) m.pixels[p] = t[std::size_t(n) * h * w + p] != 0.0f ? 1 : 0;
  return m;
}

}  // namespace sdc::harness

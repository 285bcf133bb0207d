#include "sdc/harness/config.hpp"

#include <fstream>
#include <sstream>

namespace sdc::harness {

using nlohmann::json;

namespace {

template <typename T>
void get_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("train: lr must be positive");
  if (weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
  if (epochs_fsnet <= 0 || epochs_full <= 0) throw ConfigError("train: epoch counts must be positive");
  if (batch_size <= 0) throw ConfigError("train: batch_size must be positive");
  if (lr_step < 0 || !(lr_decay > 0)) throw ConfigError("train: invalid lr schedule");
}

void HarnessConfig::validate() const {
  preprocess.validate();
  fdcnet.validate();
  train.validate();
  if (!(eval.alpha > 0)) throw ConfigError("eval: alpha must be positive");
  if (!(eval.tau > 0 && eval.tau < 1)) throw ConfigError("eval: tau must lie in (0, 1)");
  if (fdcnet.height != preprocess.train_size || fdcnet.width != preprocess.train_size)
    throw ConfigError("fdcnet input size must equal preprocess.train_size");
}

json fsnet_to_json(const net::FSNetConfig& c) { return json{{"skips", c.skips}, {"depth_scale", c.depth_scale}}; }

void fsnet_from_json(const json& j, net::FSNetConfig& c) {
  get_opt(j, "skips", c.skips);
  get_opt(j, "depth_scale", c.depth_scale);
}

json fdcnet_to_json(const net::FDCNetConfig& c) {
  return json{{"widths", c.widths},
           {"height", c.height},
           {"width", c.width},
           {"region", c.region},
           {"heads", c.heads},
           {"fusion", std::string(c.fusion == net::FusionKind::Attention ? "attention" : "guided")},
           {"use_cca", c.use_cca},
           {"use_sa", c.use_sa},
           {"depth_scale", c.depth_scale},
           {"softplus_beta", c.softplus_beta}};
}

void fdcnet_from_json(const json& j, net::FDCNetConfig& c) {
  get_opt(j, "widths", c.widths);
  get_opt(j, "height", c.height);
  get_opt(j, "width", c.width);
  get_opt(j, "region", c.region);
  get_opt(j, "heads", c.heads);
  if (j.contains("fusion")) {
    const std::string f = j.at("fusion").get<std::string>();
    if (f == "attention")
      c.fusion = net::FusionKind::Attention;
    else if (f == "guided")
      c.fusion = net::FusionKind::Guided;
    else
      throw ConfigError("fdcnet.fusion must be 'attention' or 'guided', got '" + f + "'");
  }
  get_opt(j, "use_cca", c.use_cca);
  get_opt(j, "use_sa", c.use_sa);
  get_opt(j, "depth_scale", c.depth_scale);
  get_opt(j, "softplus_beta", c.softplus_beta);
}

void to_json(json& j, const HarnessConfig& c) {
  const auto& p = c.preprocess;
  const auto& t = c.train;
  j = json{{"dataset", c.dataset},
           {"output", c.output},
           {"seed", c.seed},
           {"preprocess",
            {{"densify_kernel", p.densify_kernel},
             {"densify_iterations", p.densify_iterations},
             {"train_size", p.train_size},
             {"downsampling_levels", p.downsampling_levels},
             {"flip_prob", p.flip_prob},
             {"jitter_brightness", p.jitter_brightness},
             {"jitter_contrast", p.jitter_contrast}}},
           {"fsnet", fsnet_to_json(c.fsnet)},
           {"fdcnet", fdcnet_to_json(c.fdcnet)},
           {"train",
            {{"lr", t.lr},
             {"weight_decay", t.weight_decay},
             {"epochs_fsnet", t.epochs_fsnet},
             {"epochs_full", t.epochs_full},
             {"batch_size", t.batch_size},
             {"augment", t.augment},
             {"lr_step", t.lr_step},
             {"lr_decay", t.lr_decay}}},
           {"eval",
            {{"alpha", c.eval.alpha},
             {"tau", c.eval.tau},
             {"ioi_denominator", std::string(c.eval.ioi_denominator == metrics::IoiDenominator::Predicted
                                                  ? "predicted"
                                                  : "ground_truth")},
             {"averaging", std::string(c.averaging == metrics::Averaging::Macro ? "macro" : "micro")}}}};
}

void from_json(const json& j, HarnessConfig& c) {
  get_opt(j, "dataset", c.dataset);
  get_opt(j, "output", c.output);
  get_opt(j, "seed", c.seed);
  if (j.contains("preprocess")) {
    const json& p = j.at("preprocess");
    get_opt(p, "densify_kernel", c.preprocess.densify_kernel);
    get_opt(p, "densify_iterations", c.preprocess.densify_iterations);
    get_opt(p, "train_size", c.preprocess.train_size);
    get_opt(p, "downsampling_levels", c.preprocess.downsampling_levels);
    get_opt(p, "flip_prob", c.preprocess.flip_prob);
    get_opt(p, "jitter_brightness", c.preprocess.jitter_brightness);
    get_opt(p, "jitter_contrast", c.preprocess.jitter_contrast);
  }
  if (j.contains("fsnet")) fsnet_from_json(j.at("fsnet"), c.fsnet);
  c.fdcnet.height = c.fdcnet.width = c.preprocess.train_size;
  if (j.contains("fdcnet")) fdcnet_from_json(j.at("fdcnet"), c.fdcnet);
  if (j.contains("train")) {
    const json& t = j.at("train");
    get_opt(t, "lr", c.train.lr);
    get_opt(t, "weight_decay", c.train.weight_decay);
    get_opt(t, "epochs_fsnet", c.train.epochs_fsnet);
    get_opt(t, "epochs_full", c.train.epochs_full);
    get_opt(t, "batch_size", c.train.batch_size);
    get_opt(t, "augment", c.train.augment);
    get_opt(t, "lr_step", c.train.lr_step);
    get_opt(t, "lr_decay", c.train.lr_decay);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    get_opt(e, "alpha", c.eval.alpha);
    get_opt(e, "tau", c.eval.tau);
    if (e.contains("ioi_denominator")) {
      const std::string d = e.at("ioi_denominator").get<std::string>();
      if (d == "predicted")
        c.eval.ioi_denominator = metrics::IoiDenominator::Predicted;
      else if (d == "ground_truth")
        c.eval.ioi_denominator = metrics::IoiDenominator::GroundTruth;
      else
        throw ConfigError("eval.ioi_denominator must be 'predicted' or 'ground_truth'");
    }
    if (e.contains("averaging")) {
      const std::string a = e.at("averaging").get<std::string>();
      if (a == "macro")
        c.averaging = metrics::Averaging::Macro;
      else if (a == "micro")
        c.averaging = metrics::Averaging::Micro;
      else
        throw ConfigError("eval.averaging must be 'macro' or 'micro'");
    }
  }
}

HarnessConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  HarnessConfig c;
  try {
    json::parse(is).get_to(c);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

void save_config(const std::filesystem::path& path, const HarnessConfig& c) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << json(c).dump(2) << '\n';
}

std::uint64_t config_hash(const HarnessConfig& c) {
  const std::string s = json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sdc::harness

#include "sdc/harness/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "sdc/nn/checkpoint.hpp"
#include "sdc/nn/optim.hpp"

namespace sdc::harness {

using nn::Tensor;
using nn::Var;

namespace {

// Seed streams.
constexpr std::uint64_t kFsnetInit = 11, kFsnetShuffle = 12, kFullInit = 21, kFullShuffle = 22;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch)
    out.emplace_back(order.begin() + i, order.begin() + std::min(n, i + batch));
  return out;
}

Batch training_batch(const std::vector<synth::Sample>& samples, const std::vector<std::size_t>& idx,
                     const HarnessConfig& cfg, Rng& rng) {
  std::vector<synth::Sample> copies;
  copies.reserve(idx.size());
  for (std::size_t i : idx) {
    copies.push_back(samples[i]);
    if (cfg.train.augment) prep::augment(copies.back(), rng, cfg.preprocess);
  }
  std::vector<const synth::Sample*> ptrs;
  for (const auto& s : copies) ptrs.push_back(&s);
  return make_batch(ptrs);
}

std::vector<Batch> fixed_batches(const std::vector<synth::Sample>& samples, int batch) {
  std::vector<Batch> out;
  for (std::size_t i = 0; i < samples.size(); i += batch) {
    std::vector<const synth::Sample*> ptrs;
    for (std::size_t j = i; j < std::min(samples.size(), i + batch); ++j) ptrs.push_back(&samples[j]);
    out.push_back(make_batch(ptrs));
  }
  return out;
}

void check_finite(double loss, const char* what, int epoch, std::size_t batch) {
  if (!std::isfinite(loss))
    throw std::runtime_error(std::string(what) + ": non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch));
}

double lr_at(const TrainConfig& t, int epoch) {
  return t.lr_step > 0 ? t.lr * std::pow(t.lr_decay, double((epoch - 1) / t.lr_step)) : t.lr;
}

void require_nonempty(const DataSplits& d) {
  if (d.train.empty()) throw ConfigError("training split is empty");
  if (d.val.empty()) throw ConfigError("validation split is empty");
}

// Foreground mask used to restrict the loss: the segmenter output, or all
// pixels without a segmenter.
Tensor<float> loss_mask(const Batch& b, const net::FSNet<float>* fsnet, double tau) {
  if (!fsnet) return Tensor<float>(b.gray.shape(), 1.0f);
  nn::NoGradGuard guard;
  const Var<float> prob = net::fsnet_forward(nn::constant(b.gray), nn::constant(b.sparse), *fsnet);
  return net::segment(prob.value(), tau);
}

// Copies of a model share parameter nodes with it; snapshots do not.
template <typename T>
nn::Conv2d<T> detach(const nn::Conv2d<T>& c) {
  nn::Conv2d<T> out = c;
  out.weight = Var<T>(c.weight.value(), false);
  if (c.bias) out.bias = Var<T>(c.bias.value(), false);
  return out;
}

net::FDCNet<float> snapshot(const net::FDCNet<float>& m) {
  net::FDCNet<float> s = m;
  for (auto* enc : {&s.gray_enc, &s.depth_enc})
    for (auto& e : *enc) e = {detach(e.a), detach(e.b)};
  for (auto* dec : {&s.gray_dec, &s.depth_dec})
    for (auto& d : *dec) d = detach(d);
  for (auto& f : s.attention) {
    f.score_s = detach(f.score_s);
    f.score_g = detach(f.score_g);
    for (auto* ws : {&f.w_q, &f.w_k})
      for (auto& w : *ws) w = Var<float>(w.value(), false);
    f.combine = detach(f.combine);
    f.spatial = detach(f.spatial);
  }
  for (auto& g : s.guided) g = {detach(g.kernel_gen), detach(g.mix)};
  s.head = detach(s.head);
  return s;
}

net::FSNet<float> snapshot(const net::FSNet<float>& m) {
  net::FSNet<float> s = m;
  for (auto& c : s.convs) c = detach(c);
  return s;
}

}  // namespace

FsnetRun train_fsnet(const HarnessConfig& cfg, const DataSplits& data, std::ostream* log) {
  cfg.validate();
  require_nonempty(data);
  Rng init(derive_seed(cfg.seed, kFsnetInit));
  FsnetRun run;
  net::FSNet<float> model(cfg.fsnet, init);
  nn::ParamList<float> params;
  model.collect(params);
  nn::AdamW<float> opt(params, {cfg.train.lr, 0.9, 0.999, 1e-8, cfg.train.weight_decay});
  const std::vector<Batch> val = fixed_batches(data.val, cfg.train.batch_size);

  run.best_val_iou = -1;
  for (int epoch = 1; epoch <= cfg.train.epochs_fsnet; ++epoch) {
    const auto t0 = Clock::now();
    opt.set_lr(lr_at(cfg.train, epoch));
    Rng rng(derive_seed(cfg.seed, kFsnetShuffle, epoch));
    const auto batches = epoch_batches(data.train.size(), cfg.train.batch_size, rng);
    EpochStats st;
    st.epoch = epoch;
    double loss_sum = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch b = training_batch(data.train, batches[bi], cfg, rng);
      const Var<float> prob = net::fsnet_forward(nn::constant(b.gray), nn::constant(b.sparse), model);
      const Var<float> loss = net::bce_loss(prob, b.mask);
      check_finite(loss.value()[0], "train_fsnet", epoch, bi);
      loss_sum += loss.value()[0] * batches[bi].size();
      opt.zero_grad();
      nn::backward(loss);
      opt.step();
    }
    st.train_loss = loss_sum / data.train.size();

    nn::NoGradGuard guard;
    metrics::MetricsTable table;
    double vloss = 0;
    for (const Batch& b : val) {
      const Var<float> prob = net::fsnet_forward(nn::constant(b.gray), nn::constant(b.sparse), model);
      vloss += net::bce_loss(prob, b.mask).value()[0] * b.ids.size();
      const Tensor<float> seg = net::segment(prob.value(), cfg.eval.tau);
      for (int i = 0; i < b.gray.dim(0); ++i) {
        const ImageF zero(b.gray.dim(2), b.gray.dim(3));
        table.rows.push_back(metrics::evaluate_masked(zero, mask_of(seg, i), mask_of(b.mask, i), zero, cfg.eval));
      }
    }
    const metrics::Summary s = table.summary(metrics::Averaging::Macro);
    st.val_loss = vloss / data.val.size();
    st.val_iou = std::isfinite(s.iou) ? s.iou : 0.0;
    st.val_ioi = std::isfinite(s.ioi) ? s.ioi : 0.0;
    st.seconds = seconds_since(t0);
    if (st.val_iou > run.best_val_iou) {
      run.best_val_iou = st.val_iou;
      run.best_epoch = epoch;
      run.model = snapshot(model);
    }
    run.history.push_back(st);
    if (log) {
      char line[200];
      std::snprintf(line, sizeof line, "fsnet epoch %3d  train_bce %.5f  val_bce %.5f  val_iou %.4f  val_ioi %.4f  %.1fs\n",
                    epoch, st.train_loss, st.val_loss, st.val_iou, st.val_ioi, st.seconds);
      *log << line << std::flush;
    }
  }
  return run;
}


FullRun train_full(const HarnessConfig& cfg, const DataSplits& data, const net::FSNet<float>* fsnet,
                   std::ostream* log) {
  cfg.validate();
  require_nonempty(data);
  FullRun run;
  nn::ParamList<float> fs_params;
  if (fsnet) fsnet->collect(fs_params);
  run.fsnet_hash_before = nn::parameter_hash(fs_params);

  Rng init(derive_seed(cfg.seed, kFullInit));
  net::FDCNet<float> model(cfg.fdcnet, init);
  nn::ParamList<float> params;
  model.collect(params);
  nn::AdamW<float> opt(params, {cfg.train.lr, 0.9, 0.999, 1e-8, cfg.train.weight_decay});

  run.best_val_maei = std::numeric_limits<double>::infinity();
  run.model = snapshot(model);
  for (int epoch = 1; epoch <= cfg.train.epochs_full; ++epoch) {
    const auto t0 = Clock::now();
    opt.set_lr(lr_at(cfg.train, epoch));
    Rng rng(derive_seed(cfg.seed, kFullShuffle, epoch));
    const auto batches = epoch_batches(data.train.size(), cfg.train.batch_size, rng);
    EpochStats st;
    st.epoch = epoch;
    double loss_sum = 0;
    std::size_t counted = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch b = training_batch(data.train, batches[bi], cfg, rng);
      const Tensor<float> mask = loss_mask(b, fsnet, cfg.eval.tau);
      const Var<float> pred = net::fdcnet_forward(nn::constant(b.gray), nn::constant(b.pseudo), model);
      Var<float> loss;
      try {
        loss = net::masked_l1_loss(pred, b.depth, mask);
      } catch (const nn::EmptyMaskError&) {
        ++st.skipped_batches;
        if (log) *log << "warning: epoch " << epoch << " batch " << bi << " has no predicted foreground, skipped\n";
        continue;
      }
      check_finite(loss.value()[0], "train_full", epoch, bi);
      loss_sum += loss.value()[0] * batches[bi].size();
      counted += batches[bi].size();
      opt.zero_grad();
      nn::backward(loss);
      opt.step();
    }
    st.train_loss = counted ? loss_sum / counted : 0.0;
    run.skipped_batches += st.skipped_batches;

    const metrics::MetricsTable val = evaluate_model(cfg, data.val, fsnet, &model);
    const metrics::Summary s = val.summary(cfg.averaging);
    st.val_maei = s.maei;
    st.val_iou = s.iou;
    st.val_ioi = s.ioi;
    st.seconds = seconds_since(t0);
    if (std::isfinite(s.maei) && s.maei < run.best_val_maei) {
      run.best_val_maei = s.maei;
      run.best_epoch = epoch;
      run.model = snapshot(model);
    }
    run.history.push_back(st);
    if (log) {
      char line[200];
      std::snprintf(line, sizeof line, "full  epoch %3d  train_l1 %.4f  val_maei %.4f  val_mate %.4f  skipped %ld  %.1fs\n",
                    epoch, st.train_loss, st.val_maei, s.mate, st.skipped_batches, st.seconds);
      *log << line << std::flush;
    }
  }
  run.fsnet_hash_after = nn::parameter_hash(fs_params);
  return run;
}

Predictions predict(const HarnessConfig& cfg, const std::vector<synth::Sample>& samples,
                    const net::FSNet<float>* fsnet, const net::FDCNet<float>* fdcnet) {
  nn::NoGradGuard guard;
  Predictions out;
  for (const Batch& b : fixed_batches(samples, cfg.train.batch_size)) {
    Tensor<float> depth = fdcnet ? net::fdcnet_forward(nn::constant(b.gray), nn::constant(b.pseudo), *fdcnet).value()
                                 : b.pseudo;
    Tensor<float> prob;
    if (fsnet) {
      prob = net::fsnet_forward(nn::constant(b.gray), nn::constant(b.sparse), *fsnet).value();
    } else {
      prob = Tensor<float>(depth.shape());
      for (std::size_t i = 0; i < depth.size(); ++i) prob[i] = depth[i] >= kNoFsnetMinDepth ? 1.0f : 0.0f;
    }
    const Tensor<float> seg = net::segment(prob, cfg.eval.tau);
    for (int i = 0; i < b.gray.dim(0); ++i) {
      out.depth.push_back(image_of(depth, i));
      out.prob.push_back(image_of(prob, i));
      out.a_hat.push_back(mask_of(seg, i));
    }
  }
  return out;
}

metrics::MetricsTable evaluate_model(const HarnessConfig& cfg, const std::vector<synth::Sample>& samples,
                                     const net::FSNet<float>* fsnet, const net::FDCNet<float>* fdcnet) {
  const Predictions p = predict(cfg, samples, fsnet, fdcnet);
  metrics::MetricsTable t;
  t.ioi_denominator = cfg.eval.ioi_denominator;
  for (std::size_t i = 0; i < samples.size(); ++i)
    t.rows.push_back(metrics::evaluate_masked(p.depth[i], p.a_hat[i], samples[i].fg_mask_gt,
                                              samples[i].dense_depth_gt, cfg.eval, samples[i].id));
  return t;
}

void save_model(const std::filesystem::path& path, const HarnessConfig& cfg, const net::FSNet<float>* fsnet,
                const net::FDCNet<float>* fdcnet, int epoch) {
  nn::Checkpoint ck;
  ck.metadata["config_hash"] = std::to_string(config_hash(cfg));
  ck.metadata["epoch"] = std::to_string(epoch);
  ck.metadata["seed"] = std::to_string(cfg.seed);
  if (fsnet) {
    ck.metadata["fsnet_config"] = fsnet_to_json(fsnet->cfg).dump();
    nn::ParamList<float> p;
    fsnet->collect(p);
    nn::store_params(ck, p);
  }
  if (fdcnet) {
    ck.metadata["fdcnet_config"] = fdcnet_to_json(fdcnet->cfg).dump();
    nn::ParamList<float> p;
    fdcnet->collect(p);
    nn::store_params(ck, p);
  }
  nn::save_checkpoint(path, ck);
}

SdcModel load_model(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  SdcModel m;
  m.metadata = ck.metadata;
  Rng unused(0);
  try {
    if (auto it = ck.metadata.find("fsnet_config"); it != ck.metadata.end()) {
      net::FSNetConfig c;
      fsnet_from_json(nlohmann::json::parse(it->second), c);
      net::FSNet<float> f(c, unused);
      nn::ParamList<float> p;
      f.collect(p);
      nn::restore_params(ck, p);
      m.fsnet = std::move(f);
    }
    if (auto it = ck.metadata.find("fdcnet_config"); it != ck.metadata.end()) {
      net::FDCNetConfig c;
      fdcnet_from_json(nlohmann::json::parse(it->second), c);
      net::FDCNet<float> f(c, unused);
      nn::ParamList<float> p;
      f.collect(p);
      nn::restore_params(ck, p);
      m.fdcnet = std::move(f);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint " + path.string() + ": bad model metadata: " + e.what());
  }
  return m;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::GuidedNoFsnet: return "guided";
    case Variant::GuidedFsnet: return "guided+fsnet";
    case Variant::FsnetCca: return "fsnet+cca";
    case Variant::FsnetCcaSa: return "fsnet+cca+sa";
  }
  return "?";
}

bool variant_uses_fsnet(Variant v) { return v != Variant::GuidedNoFsnet; }

net::FDCNetConfig variant_config(net::FDCNetConfig c, Variant v) {
  const bool guided = v == Variant::GuidedNoFsnet || v == Variant::GuidedFsnet;
  c.fusion = guided ? net::FusionKind::Guided : net::FusionKind::Attention;
  c.use_cca = !guided;
  c.use_sa = v == Variant::FsnetCcaSa;
  return c;
}

metrics::Summary AblationReport::median(Variant v) const {
  std::vector<metrics::Summary> s;
  for (const auto& r : rows)
    if (r.variant == v) s.push_back(r.summary);
  metrics::Summary out;
  if (s.empty()) return out;
  auto med = [&s](double metrics::Summary::*f) {
    std::vector<double> x;
    for (const auto& e : s) x.push_back(e.*f);
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
  };
  out.iou = med(&metrics::Summary::iou);
  out.ioi = med(&metrics::Summary::ioi);
  out.maei = med(&metrics::Summary::maei);
  out.rmsei = med(&metrics::Summary::rmsei);
  out.mate = med(&metrics::Summary::mate);
  out.rmste = med(&metrics::Summary::rmste);
  return out;
}

void AblationReport::write_text(std::ostream& os) const {
  char line[200];
  std::snprintf(line, sizeof line, "%-14s %6s %8s %8s %8s %8s\n", "variant", "seeds", "MAEI", "MATE", "RMSEI", "RMSTE");
  os << line;
  for (Variant v : kAllVariants) {
    int n = 0;
    for (const auto& r : rows) n += r.variant == v;
    if (!n) continue;
    const metrics::Summary m = median(v);
    std::snprintf(line, sizeof line, "%-14s %6d %8.4f %8.4f %8.4f %8.4f\n", variant_name(v).c_str(), n, m.maei,
                  m.mate, m.rmsei, m.rmste);
    os << line;
  }
}

void AblationReport::write_csv(std::ostream& os) const {
  os << "variant,seed,maei,mate,rmsei,rmste,iou,ioi\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s,%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", variant_name(r.variant).c_str(),
                  static_cast<unsigned long long>(r.seed), r.summary.maei, r.summary.mate, r.summary.rmsei,
                  r.summary.rmste, r.summary.iou, r.summary.ioi);
    os << line;
  }
}

AblationReport run_ablation(const HarnessConfig& base, const DataSplits& data, const std::vector<std::uint64_t>& seeds,
                            const std::vector<Variant>& variants, std::ostream* log) {
  AblationReport report;
  const bool need_fsnet = std::any_of(variants.begin(), variants.end(), variant_uses_fsnet);
  for (std::uint64_t seed : seeds) {
    HarnessConfig cfg = base;
    cfg.seed = seed;
    std::optional<net::FSNet<float>> fsnet;
    if (need_fsnet) {
      if (log) *log << "[ablation] seed " << seed << ": segmenter\n";
      fsnet = train_fsnet(cfg, data, log).model;
    }
    for (Variant v : variants) {
      HarnessConfig vc = cfg;
      vc.fdcnet = variant_config(cfg.fdcnet, v);
      if (log) *log << "[ablation] seed " << seed << ": " << variant_name(v) << "\n";
      const net::FSNet<float>* fs = variant_uses_fsnet(v) ? &*fsnet : nullptr;
      const FullRun run = train_full(vc, data, fs, log);
      const metrics::MetricsTable t = evaluate_model(vc, data.test, fs, &run.model);
      report.rows.push_back({v, seed, t.summary(vc.averaging)});
    }
  }
  return report;
}

}  // namespace sdc::harness

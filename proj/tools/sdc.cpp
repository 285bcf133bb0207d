#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sdc/harness/pipeline.hpp"
#include "sdc/harness/pointcloud.hpp"
#include "sdc/synthgen/dataset.hpp"

namespace fs = std::filesystem;
using namespace sdc;

namespace {

synth::DatasetConfig load_dataset_config(const std::string& path) {
  synth::DatasetConfig c;
  if (path.empty()) return c;
  std::ifstream is(path);
  if (!is) throw IoError("cannot open dataset config " + path);
  try {
    nlohmann::json::parse(is).get_to(c);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("dataset config " + path + ": " + e.what());
  }
  return c;
}

int run_generate(const std::string& config, const std::string& out, const std::optional<std::uint64_t>& seed) {
  synth::DatasetConfig c = load_dataset_config(config);
  if (seed) c.seed = *seed;
  const synth::DatasetManifest m = synth::generate_dataset(c, out);
  std::cout << "wrote " << m.entries.size() << " samples to " << out << "\n";
  return 0;
}

int run_train_fsnet(const harness::HarnessConfig& cfg, fs::path out) {
  fs::create_directories(cfg.output);
  if (out.empty()) out = fs::path(cfg.output) / "fsnet.sdck";
  harness::save_config(fs::path(cfg.output) / "fsnet_config.json", cfg);
  const harness::DataSplits data = harness::load_dataset(cfg.dataset, cfg.preprocess);
  const harness::FsnetRun run = harness::train_fsnet(cfg, data, &std::cout);
  harness::save_model(out, cfg, &run.model, nullptr, run.best_epoch);
  std::cout << "best epoch " << run.best_epoch << ", val IOU " << run.best_val_iou << " -> " << out.string() << "\n";
  return 0;
}

int run_train(const harness::HarnessConfig& cfg, const std::string& fsnet_ckpt, fs::path out) {
  fs::create_directories(cfg.output);
  if (out.empty()) out = fs::path(cfg.output) / "sdcnet.sdck";
  harness::save_config(fs::path(cfg.output) / "train_config.json", cfg);
  std::optional<net::FSNet<float>> fsnet;
  if (!fsnet_ckpt.empty()) {
    harness::SdcModel m = harness::load_model(fsnet_ckpt);
    if (!m.fsnet) throw IoError("checkpoint " + fsnet_ckpt + " holds no segmenter");
    fsnet = std::move(m.fsnet);
  }
  const harness::DataSplits data = harness::load_dataset(cfg.dataset, cfg.preprocess);
  const harness::FullRun run = harness::train_full(cfg, data, fsnet ? &*fsnet : nullptr, &std::cout);
  if (run.fsnet_hash_before != run.fsnet_hash_after) throw std::logic_error("segmenter weights changed in training");
  harness::save_model(out, cfg, fsnet ? &*fsnet : nullptr, &run.model, run.best_epoch);
  std::cout << "best epoch " << run.best_epoch << ", val MAEI " << run.best_val_maei << ", skipped batches "
            << run.skipped_batches << " -> " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spacecraft depth completion: data generation, training, evaluation"};
  app.require_subcommand(1);

  std::string config, out, data, ckpt, fsnet_ckpt, split = "test", csv, sample_id;
  std::optional<std::uint64_t> seed;
  double alpha = 10.0, tau = 0.5, std_ratio = 2.0;
  int k = 20, sample_index = 0;
  bool micro = false, ioi_gt = false, baseline = false, no_sor = false, use_gt_mask = false;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<std::string> variants;

  auto* gen = app.add_subcommand("generate", "Render a synthetic dataset");
  gen->add_option("--config", config, "Dataset config (JSON); defaults when omitted")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--seed", seed, "Override the dataset seed");

  auto* tfs = app.add_subcommand("train-fsnet", "Train the foreground segmenter");
  tfs->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  tfs->add_option("--out", out, "Checkpoint path (default <output>/fsnet.sdck)");

  auto* tr = app.add_subcommand("train", "Train the depth network with a frozen segmenter");
  tr->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  tr->add_option("--fsnet", fsnet_ckpt, "Segmenter checkpoint; omit to train without one")->check(CLI::ExistingFile);
  tr->add_option("--out", out, "Checkpoint path (default <output>/sdcnet.sdck)");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  ev->add_option("--ckpt", ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "Dataset directory (default: dataset from --config)")->check(CLI::ExistingDirectory);
  ev->add_option("--config", config, "Run config for preprocessing/batching")->check(CLI::ExistingFile);
  ev->add_option("--alpha", alpha, "Truncation threshold in meters")->check(CLI::PositiveNumber);
  ev->add_option("--tau", tau, "Foreground probability threshold")->check(CLI::Range(0.0, 1.0));
  ev->add_option("--split", split, "train, val or test");
  ev->add_option("--csv", csv, "Also write per-sample rows to this CSV file");
  ev->add_flag("--micro", micro, "Pool pixels over the split instead of averaging per image");
  ev->add_flag("--ioi-gt-denominator", ioi_gt, "Divide IOI by N(A) instead of N(A_hat)");
  ev->add_flag("--baseline", baseline, "Score the pseudo-dense input instead of the depth network");

  auto* ab = app.add_subcommand("ablate", "Train and test the four fusion variants");
  ab->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  ab->add_option("--seeds", seeds, "Seeds (median is reported)")->delimiter(',');
  ab->add_option("--variants", variants, "Subset of guided, guided+fsnet, fsnet+cca, fsnet+cca+sa")->delimiter(',');
  ab->add_option("--csv", csv, "Per-seed CSV output");

  auto* pc = app.add_subcommand("export-pc", "Export a predicted depth map as an ASCII point cloud");
  pc->add_option("--ckpt", ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  pc->add_option("--data", data, "Dataset directory (default: dataset from --config)")->check(CLI::ExistingDirectory);
  pc->add_option("--config", config, "Run config for preprocessing")->check(CLI::ExistingFile);
  pc->add_option("--split", split, "train, val or test");
  pc->add_option("--index", sample_index, "Sample index within the split")->check(CLI::NonNegativeNumber);
  pc->add_option("--sample", sample_id, "Sample id (overrides --index)");
  pc->add_option("--out", out, "Output .xyz file")->required();
  pc->add_option("--k", k, "Neighbours for outlier removal")->check(CLI::PositiveNumber);
  pc->add_option("--std-ratio", std_ratio, "Outlier threshold in standard deviations")->check(CLI::NonNegativeNumber);
  pc->add_option("--tau", tau, "Foreground probability threshold")->check(CLI::Range(0.0, 1.0));
  pc->add_flag("--no-sor", no_sor, "Skip statistical outlier removal");
  pc->add_flag("--gt-mask", use_gt_mask, "Use the ground-truth foreground instead of the segmenter's");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_generate(config, out, seed);

    harness::HarnessConfig cfg;
    if (!config.empty()) cfg = harness::load_config(config);

    if (tfs->parsed()) return run_train_fsnet(cfg, out);
    if (tr->parsed()) return run_train(cfg, fsnet_ckpt, out);

    if (ab->parsed()) {
      std::vector<harness::Variant> vs;
      for (const std::string& name : variants) {
        bool found = false;
        for (harness::Variant v : harness::kAllVariants)
          if (harness::variant_name(v) == name) vs.push_back(v), found = true;
        if (!found) throw ConfigError("unknown variant '" + name + "'");
      }
      if (vs.empty()) vs.assign(std::begin(harness::kAllVariants), std::end(harness::kAllVariants));
      fs::create_directories(cfg.output);
      harness::save_config(fs::path(cfg.output) / "ablation_config.json", cfg);
      const harness::DataSplits d = harness::load_dataset(cfg.dataset, cfg.preprocess);
      const harness::AblationReport r = harness::run_ablation(cfg, d, seeds, vs, &std::cout);
      r.write_text(std::cout);
      if (!csv.empty()) {
        std::ofstream os(csv);
        if (!os) throw IoError("cannot open for writing: " + csv);
        r.write_csv(os);
      }
      return 0;
    }

    cfg.eval.alpha = alpha;
    cfg.eval.tau = tau;
    if (ioi_gt) cfg.eval.ioi_denominator = metrics::IoiDenominator::GroundTruth;
    if (micro) cfg.averaging = metrics::Averaging::Micro;
    const harness::SdcModel model = harness::load_model(ckpt);
    if (model.fdcnet) cfg.preprocess.train_size = model.fdcnet->cfg.height;
    if (data.empty()) data = cfg.dataset;
    const std::vector<synth::Sample> samples =
        harness::load_split(data, synth::split_from_string(split), cfg.preprocess);
    const net::FSNet<float>* fsnet = model.fsnet ? &*model.fsnet : nullptr;
    const net::FDCNet<float>* fdcnet = baseline || !model.fdcnet ? nullptr : &*model.fdcnet;

    if (ev->parsed()) {
      const metrics::MetricsTable t = harness::evaluate_model(cfg, samples, fsnet, fdcnet);
      metrics::write_text_table(std::cout, t, cfg.averaging);
      if (!csv.empty()) {
        std::ofstream os(csv);
        if (!os) throw IoError("cannot open for writing: " + csv);
        metrics::write_csv(os, t);
      }
      return 0;
    }

    if (pc->parsed()) {
      std::size_t idx = sample_index;
      if (!sample_id.empty()) {
        idx = samples.size();
        for (std::size_t i = 0; i < samples.size(); ++i)
          if (samples[i].id == sample_id) idx = i;
      }
      if (idx >= samples.size()) throw ConfigError("sample not found in split " + split);
      const std::vector<synth::Sample> one{samples[idx]};
      const harness::Predictions p = harness::predict(cfg, one, fsnet, fdcnet);
      const Mask& mask = use_gt_mask ? one[0].fg_mask_gt : p.a_hat[0];
      harness::PointCloud cloud = harness::depth_to_pointcloud(p.depth[0], mask, one[0].intrinsics, &one[0].gray);
      std::size_t removed = 0;
      if (!no_sor) {
        auto r = harness::statistical_outlier_removal(cloud, k, std_ratio);
        removed = r.removed;
        cloud = std::move(r.cloud);
      }
      harness::write_xyz(out, cloud);
      std::cout << "wrote " << cloud.size() << " points (" << removed << " outliers removed) to " << out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdc/harness/config.hpp"
#include "sdc/harness/data.hpp"
#include "sdc/metrics/metrics.hpp"
#include "sdc/networks/networks.hpp"

namespace sdc::harness {

/// Without a segmenter the predicted foreground is {depth >= this}.
inline constexpr double kNoFsnetMinDepth = 1.0;

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_iou = 0;   // FSNet runs
  double val_ioi = 0;   // FSNet runs
  double val_maei = 0;  // depth runs
  long skipped_batches = 0;
  double seconds = 0;
};

struct FsnetRun {
  net::FSNet<float> model;  // best validation IOU
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_iou = 0;
};

/// Binary cross-entropy training of the segmenter. `log` may be null.
FsnetRun train_fsnet(const HarnessConfig& cfg, const DataSplits& data, std::ostream* log = nullptr);

struct FullRun {
  net::FDCNet<float> model;  // best validation MAEI
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_maei = 0;
  std::uint64_t fsnet_hash_before = 0, fsnet_hash_after = 0;
  long skipped_batches = 0;
};

/// Trains the depth network with the segmenter frozen. The L1 loss is
/// restricted to the segmenter's foreground; with `fsnet` null every
/// pixel counts.
FullRun train_full(const HarnessConfig& cfg, const DataSplits& data, const net::FSNet<float>* fsnet,
                   std::ostream* log = nullptr);

/// Predicted depth and foreground for a set of samples. `fdcnet` null
/// evaluates the pseudo-dense input as the prediction.
struct Predictions {
  std::vector<ImageF> depth, prob;
  std::vector<Mask> a_hat;
};
Predictions predict(const HarnessConfig& cfg, const std::vector<synth::Sample>& samples,
                    const net::FSNet<float>* fsnet, const net::FDCNet<float>* fdcnet);

metrics::MetricsTable evaluate_model(const HarnessConfig& cfg, const std::vector<synth::Sample>& samples,
                                     const net::FSNet<float>* fsnet, const net::FDCNet<float>* fdcnet);

// Checkpoints holding either network or both.
struct SdcModel {
  std::optional<net::FSNet<float>> fsnet;
  std::optional<net::FDCNet<float>> fdcnet;
  std::map<std::string, std::string> metadata;
};
void save_model(const std::filesystem::path& path, const HarnessConfig& cfg, const net::FSNet<float>* fsnet,
                const net::FDCNet<float>* fdcnet, int epoch);
SdcModel load_model(const std::filesystem::path& path);

enum class Variant { GuidedNoFsnet, GuidedFsnet, FsnetCca, FsnetCcaSa };
inline constexpr Variant kAllVariants[] = {Variant::GuidedNoFsnet, Variant::GuidedFsnet, Variant::FsnetCca,
                                           Variant::FsnetCcaSa};
std::string variant_name(Variant v);
bool variant_uses_fsnet(Variant v);
net::FDCNetConfig variant_config(net::FDCNetConfig base, Variant v);

struct AblationRow {
  Variant variant;
  std::uint64_t seed = 0;
  metrics::Summary summary;
};

struct AblationReport {
  std::vector<AblationRow> rows;

  /// Median over seeds of each metric for one variant.
  metrics::Summary median(Variant v) const;
  void write_text(std::ostream& os) const;
  void write_csv(std::ostream& os) const;
};

/// Trains and tests each variant once per seed. The segmenter is trained
/// once per seed and shared by the variants that use it.
AblationReport run_ablation(const HarnessConfig& cfg, const DataSplits& data, const std::vector<std::uint64_t>& seeds,
                            const std::vector<Variant>& variants, std::ostream* log = nullptr);

}  // namespace sdc::harness

#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>

#include "sdc/metrics/metrics.hpp"
#include "sdc/networks/networks.hpp"
#include "sdc/preprocess/preprocess.hpp"

namespace sdc::harness {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-3;
  int epochs_fsnet = 30;
  int epochs_full = 50;
  int batch_size = 8;
  bool augment = true;
  // Multiply lr by lr_decay every lr_step epochs; 0 keeps it constant.
  int lr_step = 0;
  double lr_decay = 0.5;

  void validate() const;
};

/// Everything a training or evaluation run needs; snapshotted next to
/// every checkpoint.
struct HarnessConfig {
  std::string dataset = "data/desk";
  std::string output = "runs/desk";
  std::uint64_t seed = 1;
  prep::PreprocessConfig preprocess;
  net::FSNetConfig fsnet;
  net::FDCNetConfig fdcnet;
  TrainConfig train;
  metrics::EvalOptions eval;
  metrics::Averaging averaging = metrics::Averaging::Macro;

  void validate() const;
};

void to_json(nlohmann::json& j, const HarnessConfig& c);
void from_json(const nlohmann::json& j, HarnessConfig& c);
nlohmann::json fdcnet_to_json(const net::FDCNetConfig& c);
/// Keys absent from `j` keep the value in `c`.
void fdcnet_from_json(const nlohmann::json& j, net::FDCNetConfig& c);
nlohmann::json fsnet_to_json(const net::FSNetConfig& c);
void fsnet_from_json(const nlohmann::json& j, net::FSNetConfig& c);

HarnessConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const HarnessConfig& c);
/// FNV-1a of the canonical JSON dump.
std::uint64_t config_hash(const HarnessConfig& c);

}  // namespace sdc::harness

#pragma once

#include <array>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "sdc/common.hpp"
#include "sdc/synthgen/camera.hpp"
#include "sdc/synthgen/render.hpp"
#include "sdc/synthgen/scene.hpp"

namespace sdc::synth {

/// One training record.
struct Sample {
  std::string id;            // "<split>/<model>/<view>"
  ImageF gray;               // [0, 1]
  ImageF sparse_depth;       // m, 0 = no return
  ImageF pseudo_dense;       // filled by preprocessing; empty until then
  ImageF dense_depth_gt;     // m, 0 = background
  Mask fg_mask_gt;
  CameraModel intrinsics;
  SceneSpec scene;
};

enum class Split { Train, Val, Test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct DatasetConfig {
  int models = 10;
  int views = 4;
  int train_models = 6, val_models = 2, test_models = 2;
  // Optional explicit model id lists; when non-empty they override the
  // counts above and must be pairwise disjoint.
  std::vector<int> train_ids, val_ids, test_ids;
  int resolution = 128;
  double focal_length = 0.050;
  double sensor_size = 0.006449;
  std::uint64_t seed = 0;
  SceneConfig scene;
  LidarModel lidar;
  RenderOptions render;

  CameraModel camera() const { return CameraModel::with_resolution(resolution, focal_length, sensor_size); }
  void validate() const;
  /// Model ids per split (train, val, test), deterministic in `seed`.
  std::array<std::vector<int>, 3> split_models() const;
};

void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);

struct ManifestEntry {
  Split split = Split::Train;
  int model_id = 0;
  int view_id = 0;
  std::uint64_t seed = 0;
  std::string path;  // relative to the dataset root
};

/// Line-oriented text index of a generated dataset.
struct DatasetManifest {
  std::uint64_t seed = 0;
  int resolution = 0;
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split(Split s) const;
  std::string to_text() const;
  static DatasetManifest parse(const std::string& text);
  static DatasetManifest load(const std::filesystem::path& root);
};

inline constexpr const char* kManifestFile = "manifest.txt";

/// Geometry for a model id; independent of view ids.
SatelliteModel model_for(const DatasetConfig& cfg, int model_id);
/// Renders one sample; a pure function of (cfg, model_id, view_id).
Sample generate_sample(const DatasetConfig& cfg, int model_id, int view_id, Split split = Split::Train);

/// Writes every sample of every split plus `manifest.txt` and a config
/// snapshot under `out_dir`. On I/O failure, output created by this call
/// is removed before the error is rethrown.
DatasetManifest generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir);

void write_sample(const std::filesystem::path& dir, const Sample& s);
Sample load_sample(const std::filesystem::path& root, const ManifestEntry& e);

}  // namespace sdc::synth

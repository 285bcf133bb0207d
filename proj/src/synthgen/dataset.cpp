#include "sdc/synthgen/dataset.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "sdc/synthgen/io.hpp"

namespace sdc::synth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kModelStream = 0x6d6f64656cULL;
constexpr std::uint64_t kStarStream = 0x73746172ULL;
constexpr const char* kManifestHeader = "# sdc dataset manifest v1";

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }
Eigen::Vector3d vec3_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
json quat_json(const Eigen::Quaterniond& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }
Eigen::Quaterniond quat_from(const json& j) {
  return Eigen::Quaterniond(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>());
}

json scene_json(const SceneSpec& s) {
  json parts = json::array();
  for (const Box& b : s.model.parts)
    parts.push_back({{"center", vec3_json(b.center)},
                     {"half_extents", vec3_json(b.half_extents)},
                     {"orientation", quat_json(b.orientation)},
                     {"albedo", b.albedo}});
  return {{"model_id", s.model.model_id},
          {"body_half_extents", vec3_json(s.model.body_half_extents)},
          {"panel_spans", s.model.panel_spans},
          {"has_antenna", s.model.has_antenna},
          {"parts", parts},
          {"attitude", quat_json(s.attitude)},
          {"distance", s.distance},
          {"sun_direction", vec3_json(s.sun_direction)}};
}

SceneSpec scene_from(const json& j) {
  SceneSpec s;
  s.model.model_id = j.at("model_id").get<int>();
  s.model.body_half_extents = vec3_from(j.at("body_half_extents"));
  s.model.panel_spans = j.at("panel_spans").get<std::vector<double>>();
  s.model.has_antenna = j.at("has_antenna").get<bool>();
  for (const json& p : j.at("parts")) {
    Box b;
    b.center = vec3_from(p.at("center"));
    b.half_extents = vec3_from(p.at("half_extents"));
    b.orientation = quat_from(p.at("orientation"));
    b.albedo = p.at("albedo").get<double>();
    s.model.parts.push_back(b);
  }
  s.attitude = quat_from(j.at("attitude"));
  s.distance = j.at("distance").get<double>();
  s.sun_direction = vec3_from(j.at("sun_direction"));
  return s;
}

template <typename T>
void get_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + p.string());
  os << text;
  os.flush();
  if (!os) throw IoError("write failed: " + p.string());
}

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split '" + s + "'");
}

void DatasetConfig::validate() const {
  if (models <= 0 || views <= 0) throw ConfigError("dataset: models and views must be positive");
  if (resolution < 8) throw ConfigError("dataset: resolution too small");
  camera().validate();
  lidar.validate();
  scene.validate();
  (void)split_models();
}

std::array<std::vector<int>, 3> DatasetConfig::split_models() const {
  std::array<std::vector<int>, 3> out;
  const bool explicit_ids = !train_ids.empty() || !val_ids.empty() || !test_ids.empty();
  if (explicit_ids) {
    out = {train_ids, val_ids, test_ids};
    std::set<int> seen;
    for (const auto& ids : out)
      for (int id : ids) {
        if (id < 0 || id >= models) throw ConfigError("dataset: model id " + std::to_string(id) + " out of range");
        if (!seen.insert(id).second)
          throw ConfigError("dataset: model id " + std::to_string(id) + " appears in more than one split");
      }
    return out;
  }
  if (train_models < 0 || val_models < 0 || test_models < 0)
    throw ConfigError("dataset: split counts must be >= 0");
  if (train_models + val_models + test_models > models)
    throw ConfigError("dataset: split counts exceed the number of models");
  int next = 0;
  const int counts[3] = {train_models, val_models, test_models};
  for (int s = 0; s < 3; ++s)
    for (int i = 0; i < counts[s]; ++i) out[s].push_back(next++);
  return out;
}

void to_json(json& j, const DatasetConfig& c) {
  j = json{{"models", c.models},
           {"views", c.views},
           {"train_models", c.train_models},
           {"val_models", c.val_models},
           {"test_models", c.test_models},
           {"resolution", c.resolution},
           {"focal_length", c.focal_length},
           {"sensor_size", c.sensor_size},
           {"seed", c.seed},
           {"scene",
            {{"distance_min", c.scene.distance_min},
             {"distance_max", c.scene.distance_max},
             {"body_half_min", c.scene.body_half_min},
             {"body_half_max", c.scene.body_half_max},
             {"panel_span_min", c.scene.panel_span_min},
             {"panel_span_max", c.scene.panel_span_max},
             {"sun_max_angle_deg", c.scene.sun_max_angle_deg},
             {"antenna_probability", c.scene.antenna_probability}}},
           {"lidar",
            {{"max_range", c.lidar.max_range},
             {"range_error_sigma", c.lidar.range_error_sigma},
             {"vertical_res_deg", c.lidar.vertical_res_deg},
             {"horizontal_res_deg", c.lidar.horizontal_res_deg}}},
           {"render",
            {{"ambient", c.render.ambient},
             {"cast_shadows", c.render.cast_shadows},
             {"star_density", c.render.star_density}}}};
  if (!c.train_ids.empty() || !c.val_ids.empty() || !c.test_ids.empty()) {
    j["train_ids"] = c.train_ids;
    j["val_ids"] = c.val_ids;
    j["test_ids"] = c.test_ids;
  }
}

void from_json(const json& j, DatasetConfig& c) {
  get_opt(j, "models", c.models);
  get_opt(j, "views", c.views);
  get_opt(j, "train_models", c.train_models);
  get_opt(j, "val_models", c.val_models);
  get_opt(j, "test_models", c.test_models);
  get_opt(j, "train_ids", c.train_ids);
  get_opt(j, "val_ids", c.val_ids);
  get_opt(j, "test_ids", c.test_ids);
  get_opt(j, "resolution", c.resolution);
  get_opt(j, "focal_length", c.focal_length);
  get_opt(j, "sensor_size", c.sensor_size);
  get_opt(j, "seed", c.seed);
  if (j.contains("scene")) {
    const json& s = j.at("scene");
    get_opt(s, "distance_min", c.scene.distance_min);
    get_opt(s, "distance_max", c.scene.distance_max);
    get_opt(s, "body_half_min", c.scene.body_half_min);
    get_opt(s, "body_half_max", c.scene.body_half_max);
    get_opt(s, "panel_span_min", c.scene.panel_span_min);
    get_opt(s, "panel_span_max", c.scene.panel_span_max);
    get_opt(s, "sun_max_angle_deg", c.scene.sun_max_angle_deg);
    get_opt(s, "antenna_probability", c.scene.antenna_probability);
  }
  if (j.contains("lidar")) {
    const json& l = j.at("lidar");
    get_opt(l, "max_range", c.lidar.max_range);
    get_opt(l, "range_error_sigma", c.lidar.range_error_sigma);
    get_opt(l, "vertical_res_deg", c.lidar.vertical_res_deg);
    get_opt(l, "horizontal_res_deg", c.lidar.horizontal_res_deg);
  }
  if (j.contains("render")) {
    const json& r = j.at("render");
    get_opt(r, "ambient", c.render.ambient);
    get_opt(r, "cast_shadows", c.render.cast_shadows);
    get_opt(r, "star_density", c.render.star_density);
  }
}

std::vector<ManifestEntry> DatasetManifest::split(Split s) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [s](const ManifestEntry& e) { return e.split == s; });
  return out;
}

std::string DatasetManifest::to_text() const {
  std::ostringstream os;
  os << kManifestHeader << '\n';
  os << "# seed " << seed << " resolution " << resolution << " samples " << entries.size() << '\n';
  os << "# split model_id view_id sample_seed path\n";
  for (const ManifestEntry& e : entries)
    os << to_string(e.split) << ' ' << e.model_id << ' ' << e.view_id << ' ' << e.seed << ' ' << e.path << '\n';
  return os.str();
}

DatasetManifest DatasetManifest::parse(const std::string& text) {
  DatasetManifest m;
  std::istringstream is(text);
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line == kManifestHeader) header = true;
      std::istringstream hs(line.substr(1));
      std::string key;
      while (hs >> key) {
        if (key == "seed") hs >> m.seed;
        else if (key == "resolution") hs >> m.resolution;
      }
      continue;
    }
    std::istringstream ls(line);
    ManifestEntry e;
    std::string split;
    if (!(ls >> split >> e.model_id >> e.view_id >> e.seed >> e.path))
      throw IoError("malformed manifest line: " + line);
    e.split = split_from_string(split);
    m.entries.push_back(e);
  }
  if (!header) throw IoError("manifest header missing");
  return m;
}

DatasetManifest DatasetManifest::load(const fs::path& root) {
  const fs::path p = root / kManifestFile;
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot open manifest: " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

SatelliteModel model_for(const DatasetConfig& cfg, int model_id) {
  Rng rng(derive_seed(cfg.seed, kModelStream, static_cast<std::uint64_t>(model_id)));
  return sample_model(rng, cfg.scene, model_id);
}

Sample generate_sample(const DatasetConfig& cfg, int model_id, int view_id, Split split) {
  const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(model_id),
                                         static_cast<std::uint64_t>(view_id));
  Rng rng(seed);
  Sample s;
  s.id = to_string(split) + "/" + std::to_string(model_id) + "/" + std::to_string(view_id);
  s.intrinsics = cfg.camera();
  s.scene = sample_view(rng, cfg.scene, model_for(cfg, model_id));
  RenderOptions ropt = cfg.render;
  ropt.star_seed = derive_seed(seed, kStarStream);
  RenderResult r = render_scene(s.scene, s.intrinsics, ropt);
  s.gray = io::quantize8(r.gray);
  s.dense_depth_gt = std::move(r.depth);
  s.fg_mask_gt = std::move(r.mask);
  s.sparse_depth = sample_lidar(s.scene, s.intrinsics, cfg.lidar, rng);
  return s;
}

void write_sample(const fs::path& dir, const Sample& s) {
  fs::create_directories(dir);
  io::write_gray_png(dir / "gray.png", s.gray);
  io::write_mask_png(dir / "mask.png", s.fg_mask_gt);
  io::write_depth(dir / "sparse.f32", s.sparse_depth);
  io::write_depth(dir / "dense.f32", s.dense_depth_gt);
  const CameraModel& c = s.intrinsics;
  json meta{{"id", s.id},
            {"camera",
             {{"focal_length", c.focal_length},
              {"sensor_size", c.sensor_size},
              {"resolution", c.resolution},
              {"cu", c.cu},
              {"cv", c.cv}}},
            {"scene", scene_json(s.scene)}};
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

Sample load_sample(const fs::path& root, const ManifestEntry& e) {
  const fs::path dir = root / e.path;
  Sample s;
  s.id = e.path;
  s.gray = io::read_gray_png(dir / "gray.png");
  s.fg_mask_gt = io::read_mask_png(dir / "mask.png");
  s.sparse_depth = io::read_depth(dir / "sparse.f32");
  s.dense_depth_gt = io::read_depth(dir / "dense.f32");
  std::ifstream is(dir / "meta.json");
  if (!is) throw IoError("cannot open: " + (dir / "meta.json").string());
  json meta;
  try {
    is >> meta;
    const json& c = meta.at("camera");
    s.intrinsics.focal_length = c.at("focal_length").get<double>();
    s.intrinsics.sensor_size = c.at("sensor_size").get<double>();
    s.intrinsics.resolution = c.at("resolution").get<int>();
    s.intrinsics.cu = c.at("cu").get<double>();
    s.intrinsics.cv = c.at("cv").get<double>();
    s.scene = scene_from(meta.at("scene"));
  } catch (const json::exception& ex) {
    throw IoError("corrupt meta.json in " + dir.string() + ": " + ex.what());
  }
  if (!s.gray.same_shape(s.fg_mask_gt) || !s.gray.same_shape(s.sparse_depth) ||
      !s.gray.same_shape(s.dense_depth_gt))
    throw IoError("inconsistent plane sizes in " + dir.string());
  return s;
}

DatasetManifest generate_dataset(const DatasetConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const auto splits = cfg.split_models();

  DatasetManifest manifest;
  manifest.seed = cfg.seed;
  manifest.resolution = cfg.resolution;
  const Split order[3] = {Split::Train, Split::Val, Split::Test};
  for (int s = 0; s < 3; ++s)
    for (int model : splits[s])
      for (int view = 0; view < cfg.views; ++view) {
        ManifestEntry e;
        e.split = order[s];
        e.model_id = model;
        e.view_id = view;
        e.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(model), static_cast<std::uint64_t>(view));
        e.path = to_string(order[s]) + "/" + std::to_string(model) + "/" + std::to_string(view);
        manifest.entries.push_back(e);
      }

  const bool root_existed = fs::exists(out_dir);
  std::vector<fs::path> created;
  auto cleanup = [&] {
    std::error_code ec;
    if (!root_existed) {
      fs::remove_all(out_dir, ec);
      return;
    }
    for (const fs::path& p : created) fs::remove_all(p, ec);
  };

  try {
    fs::create_directories(out_dir);
    for (int s = 0; s < 3; ++s) {
      const fs::path p = out_dir / to_string(order[s]);
      if (!splits[s].empty() && !fs::exists(p)) created.push_back(p);
    }
    created.push_back(out_dir / kManifestFile);
    created.push_back(out_dir / "config.json");

    std::exception_ptr failure;
    std::mutex failure_mu;
    const int n = static_cast<int>(manifest.entries.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < n; ++i) {
      {
        std::lock_guard lock(failure_mu);
        if (failure) continue;
      }
      try {
        const ManifestEntry& e = manifest.entries[i];
        const Sample smp = generate_sample(cfg, e.model_id, e.view_id, e.split);
        write_sample(out_dir / e.path, smp);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);

    write_text(out_dir / "config.json", json(cfg).dump(2) + "\n");
    write_text(out_dir / kManifestFile, manifest.to_text());
  } catch (const fs::filesystem_error& ex) {
    cleanup();
    throw IoError(std::string("dataset generation failed: ") + ex.what());
  } catch (const IoError&) {
    cleanup();
    throw;
  }
  return manifest;
}

}  // namespace sdc::synth

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "sdc/harness/config.hpp"
#include "sdc/harness/data.hpp"
#include "sdc/harness/pipeline.hpp"
#include "sdc/harness/pointcloud.hpp"
#include "sdc/nn/checkpoint.hpp"
#include "sdc/nn/optim.hpp"

using namespace sdc;
using namespace sdc::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sdc_test_harness_" + name);
  fs::remove_all(p);
  return p;
}

PointCloud cloud_of(const std::vector<std::array<double, 3>>& pts) {
  PointCloud c;
  for (const auto& p : pts) c.points.push_back({p[0], p[1], p[2], 0.f});
  return c;
}

HarnessConfig tiny_config(const fs::path& data) {
  HarnessConfig c;
  c.dataset = data.string();
  c.output = (data / "runs").string();
  c.preprocess.train_size = 32;
  c.preprocess.downsampling_levels = 1;
  c.fdcnet.widths = {4, 8};
  c.fdcnet.height = c.fdcnet.width = 32;
  c.train.epochs_fsnet = 1;
  c.train.epochs_full = 1;
  c.train.batch_size = 4;
  return c;
}

}  // namespace

TEST(PointCloud, PrincipalPointLiesOnAxis) {
  const auto cam = synth::CameraModel::with_resolution(5);
  ImageF depth(5, 5);
  Mask mask(5, 5);
  depth(2, 2) = 100.f;
  mask(2, 2) = 1;
  const PointCloud pc = depth_to_pointcloud(depth, mask, cam);
  ASSERT_EQ(pc.size(), 1u);
  EXPECT_NEAR(pc.points[0].x, 0, 1e-12);
  EXPECT_NEAR(pc.points[0].y, 0, 1e-12);
  EXPECT_DOUBLE_EQ(pc.points[0].z, 100);
}

TEST(PointCloud, ProjectsBackToItsPixel) {
  const auto cam = synth::CameraModel::with_resolution(16);
  ImageF depth(16, 16), gray(16, 16, 0.25f);
  Mask mask(16, 16);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(50, 250);
  for (int i = 0; i < 256; i += 3) depth.pixels[i] = float(d(rng)), mask.pixels[i] = 1;
  depth.pixels[6] = 0;  // masked but no depth: skipped
  const PointCloud pc = depth_to_pointcloud(depth, mask, cam, &gray);
  EXPECT_TRUE(pc.has_intensity);
  EXPECT_EQ(pc.size(), 85u);
  std::size_t k = 0;
  for (int i = 0; i < 256; i += 3) {
    if (i == 6) continue;
    const auto& p = pc.points[k++];
    const Eigen::Vector2d uv = cam.project({p.x, p.y, p.z});
    EXPECT_NEAR(uv.x(), i % 16, 1e-9);
    EXPECT_NEAR(uv.y(), i / 16, 1e-9);
    EXPECT_FLOAT_EQ(p.intensity, 0.25f);
  }
}

TEST(PointCloud, EmptyMaskGivesEmptyCloud) {
  const auto cam = synth::CameraModel::with_resolution(8);
  EXPECT_EQ(depth_to_pointcloud(ImageF(8, 8, 100.f), Mask(8, 8), cam).size(), 0u);
  EXPECT_THROW(depth_to_pointcloud(ImageF(8, 8), Mask(8, 7), cam), ShapeError);
}

TEST(OutlierRemoval, DropsIsolatedPoint) {
  std::vector<std::array<double, 3>> pts;
  for (int x = 0; x < 5; ++x)
    for (int y = 0; y < 5; ++y)
      for (int z = 0; z < 2; ++z) pts.push_back({x * 0.1, y * 0.1, 100 + z * 0.1});
  pts.push_back({5, 5, 110});
  const auto r = statistical_outlier_removal(cloud_of(pts), 8, 2.0);
  EXPECT_FALSE(r.skipped);
  EXPECT_EQ(r.removed, 1u);
  EXPECT_EQ(r.cloud.size(), 50u);
  for (const auto& p : r.cloud.points) EXPECT_LT(p.z, 101);
}

TEST(OutlierRemoval, UniformGridKeepsEverything) {
  std::vector<std::array<double, 3>> pts;
  for (int x = 0; x < 6; ++x)
    for (int y = 0; y < 6; ++y) pts.push_back({double(x), double(y), 0});
  // interior and border points differ slightly; ratio 3 keeps all
  const auto r = statistical_outlier_removal(cloud_of(pts), 4, 3.0);
  EXPECT_EQ(r.removed, 0u);
}

TEST(OutlierRemoval, MatchesThresholdOracle) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  std::vector<std::array<double, 3>> pts;
  for (int i = 0; i < 300; ++i) pts.push_back({n(rng), n(rng), n(rng)});
  for (int i = 0; i < 5; ++i) pts.push_back({20.0 + i, 0, 0});
  const int k = 10;
  // brute-force mean distance to the k nearest others
  std::vector<double> stat;
  for (const auto& p : pts) {
    std::vector<double> d;
    for (const auto& q : pts)
      if (&p != &q) d.push_back(std::hypot(p[0] - q[0], p[1] - q[1], p[2] - q[2]));
    std::sort(d.begin(), d.end());
    stat.push_back(std::accumulate(d.begin(), d.begin() + k, 0.0) / k);
  }
  const double mean = std::accumulate(stat.begin(), stat.end(), 0.0) / stat.size();
  double var = 0;
  for (double s : stat) var += (s - mean) * (s - mean);
  const double thresh = mean + 2.0 * std::sqrt(var / stat.size());
  std::size_t expect_removed = 0;
  for (double s : stat) expect_removed += s > thresh;
  const auto r = statistical_outlier_removal(cloud_of(pts), k, 2.0);
  EXPECT_EQ(r.removed, expect_removed);
  EXPECT_GE(r.removed, 5u);
  for (const auto& p : r.cloud.points) EXPECT_LT(p.x, 19.0);
}

TEST(OutlierRemoval, SmallCloudIsSkipped) {
  const auto r = statistical_outlier_removal(cloud_of({{0, 0, 0}, {1, 1, 1}}), 20);
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(r.cloud.size(), 2u);
}

TEST(PointCloud, XyzFormat) {
  PointCloud c = cloud_of({{1, 2, 3}});
  std::ostringstream os;
  write_xyz(os, c);
  std::istringstream is(os.str());
  std::string header;
  double x, y, z;
  std::getline(is, header);
  EXPECT_EQ(header.rfind("#", 0), 0u);
  is >> x >> y >> z;
  EXPECT_EQ(x, 1);
  EXPECT_EQ(z, 3);
}

TEST(Checkpoint, RoundTrip) {
  nn::Checkpoint ck;
  ck.metadata["seed"] = "3";
  ck.metadata["note"] = "a b=c";
  ck.tensors.emplace_back("w", nn::Tensor<float>({2, 3}, std::vector<float>{1, -2, 3.5f, 0, 1e-7f, 9}));
  ck.tensors.emplace_back("b", nn::Tensor<float>({1}, 0.25f));
  const fs::path p = scratch("ck.sdck");
  nn::save_checkpoint(p, ck);
  const nn::Checkpoint back = nn::load_checkpoint(p);
  EXPECT_EQ(back.metadata, ck.metadata);
  ASSERT_EQ(back.tensors.size(), 2u);
  EXPECT_EQ(back.tensors[0].second, ck.tensors[0].second);
  ASSERT_NE(back.find("b"), nullptr);
  EXPECT_EQ(back.find("missing"), nullptr);
  std::ifstream is(p, std::ios::binary);
  char magic[4];
  is.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "SDCK");
  fs::remove(p);
}

TEST(Checkpoint, CorruptOrTruncatedIsIoError) {
  const fs::path p = scratch("bad.sdck");
  std::ofstream(p, std::ios::binary) << "SDCQ....";
  EXPECT_THROW(nn::load_checkpoint(p), IoError);
  nn::Checkpoint ck;
  ck.tensors.emplace_back("w", nn::Tensor<float>({64}, 1.f));
  nn::save_checkpoint(p, ck);
  fs::resize_file(p, fs::file_size(p) - 10);
  EXPECT_THROW(nn::load_checkpoint(p), IoError);
  EXPECT_THROW(nn::load_checkpoint(scratch("absent.sdck")), IoError);
  fs::remove(p);
}

TEST(Checkpoint, RestoreChecksNamesAndShapes) {
  Rng rng(1);
  net::FSNet<float> a(net::FSNetConfig{}, rng), b(net::FSNetConfig{}, rng);
  nn::ParamList<float> pa, pb;
  a.collect(pa);
  b.collect(pb);
  EXPECT_NE(nn::parameter_hash(pa), nn::parameter_hash(pb));
  nn::Checkpoint ck;
  nn::store_params(ck, pa);
  nn::restore_params(ck, pb);
  EXPECT_EQ(nn::parameter_hash(pa), nn::parameter_hash(pb));
  ck.tensors[0].second.reshape({static_cast<int>(ck.tensors[0].second.size())});
  EXPECT_THROW(nn::restore_params(ck, pb), IoError);
  EXPECT_THROW(nn::restore_params(nn::Checkpoint{}, pb), IoError);
}

TEST(Config, JsonRoundTripAndHash) {
  HarnessConfig c;
  c.seed = 42;
  c.fdcnet.widths = {8, 16, 32, 32};
  c.fdcnet.fusion = net::FusionKind::Guided;
  c.train.epochs_full = 7;
  c.eval.ioi_denominator = metrics::IoiDenominator::GroundTruth;
  c.averaging = metrics::Averaging::Micro;
  const fs::path p = scratch("cfg.json");
  save_config(p, c);
  const HarnessConfig back = load_config(p);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.fdcnet.widths, c.fdcnet.widths);
  EXPECT_EQ(back.fdcnet.fusion, net::FusionKind::Guided);
  EXPECT_EQ(back.train.epochs_full, 7);
  EXPECT_EQ(back.eval.ioi_denominator, metrics::IoiDenominator::GroundTruth);
  EXPECT_EQ(back.averaging, metrics::Averaging::Micro);
  EXPECT_EQ(config_hash(back), config_hash(c));
  c.seed = 43;
  EXPECT_NE(config_hash(back), config_hash(c));
  fs::remove(p);
}

TEST(Config, BadFilesAreConfigErrors) {
  const fs::path p = scratch("bad.json");
  std::ofstream(p) << "{ not json";
  EXPECT_THROW(load_config(p), ConfigError);
  std::ofstream(p) << R"({"train": {"batch_size": 0}})";
  EXPECT_THROW(load_config(p), ConfigError);
  std::ofstream(p) << R"({"fdcnet": {"height": 64}})";
  EXPECT_THROW(load_config(p), ConfigError);
  fs::remove(p);
}

TEST(AdamW, MinimisesQuadratic) {
  nn::Var<double> x(nn::Tensor<double>({2}, std::vector<double>{3, -4}), true);
  nn::AdamW<double> opt({{"x", x}}, {.lr = 0.1, .weight_decay = 0});
  // gradient of sum(x^2) is 2x; drive it directly
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    auto& g = x.grad_buffer();
    for (int j = 0; j < 2; ++j) g[j] = 2 * x.value()[j];
    opt.step();
  }
  EXPECT_NEAR(x.value()[0], 0, 1e-2);
  EXPECT_NEAR(x.value()[1], 0, 1e-2);
  EXPECT_EQ(opt.steps(), 500);
}

TEST(AdamW, FirstStepMovesByLr) {
  nn::Var<double> x(nn::Tensor<double>({1}, 1.0), true);
  nn::AdamW<double> opt({{"x", x}}, {.lr = 0.01, .weight_decay = 0.5});
  x.grad_buffer()[0] = 123.0;
  opt.step();
  // bias-corrected Adam step is lr * sign(g); decay adds lr * wd * x
  EXPECT_NEAR(x.value()[0], 1.0 - 0.01 - 0.01 * 0.5 * 1.0, 1e-6);
}

TEST(Pipeline, VariantsMapToConfigs) {
  const net::FDCNetConfig base;
  EXPECT_EQ(variant_config(base, Variant::GuidedNoFsnet).fusion, net::FusionKind::Guided);
  EXPECT_FALSE(variant_uses_fsnet(Variant::GuidedNoFsnet));
  EXPECT_TRUE(variant_uses_fsnet(Variant::GuidedFsnet));
  const auto cca = variant_config(base, Variant::FsnetCca);
  EXPECT_TRUE(cca.use_cca);
  EXPECT_FALSE(cca.use_sa);
  const auto full = variant_config(base, Variant::FsnetCcaSa);
  EXPECT_TRUE(full.use_cca && full.use_sa);
  EXPECT_EQ(variant_name(Variant::FsnetCcaSa), "fsnet+cca+sa");
}

TEST(Pipeline, TinyEndToEnd) {
  const fs::path root = scratch("e2e");
  synth::DatasetConfig dc;
  dc.models = 4;
  dc.views = 3;
  dc.train_models = 2;
  dc.val_models = 1;
  dc.test_models = 1;
  dc.resolution = 32;
  dc.seed = 3;
  synth::generate_dataset(dc, root);
  const HarnessConfig cfg = tiny_config(root);
  const DataSplits data = load_dataset(root, cfg.preprocess);
  ASSERT_EQ(data.train.size(), 6u);
  ASSERT_EQ(data.test.size(), 3u);
  for (const auto& s : data.train) EXPECT_EQ(s.pseudo_dense.height, 32);

  const FsnetRun fs_run = train_fsnet(cfg, data);
  EXPECT_EQ(fs_run.history.size(), 1u);
  const FullRun full = train_full(cfg, data, &fs_run.model);
  EXPECT_EQ(full.fsnet_hash_before, full.fsnet_hash_after);
  nn::ParamList<float> p;
  fs_run.model.collect(p);
  EXPECT_EQ(nn::parameter_hash(p), full.fsnet_hash_before);

  const Predictions pr = predict(cfg, data.test, &fs_run.model, &full.model);
  ASSERT_EQ(pr.depth.size(), 3u);
  for (const auto& d : pr.depth)
    for (float v : d.pixels) EXPECT_TRUE(std::isfinite(v) && v >= 0);

  const fs::path ck = root / "model.sdck";
  save_model(ck, cfg, &fs_run.model, &full.model, 1);
  const SdcModel loaded = load_model(ck);
  ASSERT_TRUE(loaded.fsnet && loaded.fdcnet);
  EXPECT_EQ(loaded.metadata.at("epoch"), "1");
  const auto t0 = evaluate_model(cfg, data.test, &fs_run.model, &full.model);
  const auto t1 = evaluate_model(cfg, data.test, &*loaded.fsnet, &*loaded.fdcnet);
  std::ostringstream a, b;
  metrics::write_csv(a, t0);
  metrics::write_csv(b, t1);
  EXPECT_EQ(a.str(), b.str());

  const FullRun no_fs = train_full(cfg, data, nullptr);
  const Predictions pn = predict(cfg, data.test, nullptr, &no_fs.model);
  for (std::size_t i = 0; i < pn.depth.size(); ++i)
    for (std::size_t j = 0; j < pn.depth[i].size(); ++j)
      EXPECT_EQ(pn.a_hat[i].pixels[j] != 0, pn.depth[i].pixels[j] >= kNoFsnetMinDepth);
  fs::remove_all(root);
}

TEST(Data, BatchLayout) {
  synth::Sample a, b;
  for (auto* s : {&a, &b}) {
    s->gray = ImageF(4, 4, 0.5f);
    s->sparse_depth = s->pseudo_dense = s->dense_depth_gt = ImageF(4, 4, 100.f);
    s->fg_mask_gt = Mask(4, 4, 1);
  }
  b.gray(1, 2) = 0.75f;
  b.id = "x";
  const Batch batch = make_batch({&a, &b});
  EXPECT_EQ(batch.gray.shape(), (nn::Shape{2, 1, 4, 4}));
  EXPECT_EQ(batch.gray.at(1, 0, 1, 2), 0.75f);
  EXPECT_EQ(image_of(batch.gray, 1), b.gray);
  EXPECT_EQ(mask_of(batch.mask, 0), a.fg_mask_gt);
  EXPECT_EQ(batch.ids[1], "x");
}

#pragma once

#include <filesystem>
#include <vector>

#include "sdc/nn/tensor.hpp"
#include "sdc/preprocess/preprocess.hpp"
#include "sdc/synthgen/dataset.hpp"

namespace sdc::harness {

struct DataSplits {
  std::vector<synth::Sample> train, val, test;
};

/// Loads every split of a generated dataset, brings each sample to
/// `prep.train_size` (deterministic resize) and attaches pseudo-dense depth.
DataSplits load_dataset(const std::filesystem::path& root, const prep::PreprocessConfig& prep);
std::vector<synth::Sample> load_split(const std::filesystem::path& root, synth::Split split,
                                      const prep::PreprocessConfig& prep);

/// N x 1 x H x W planes of a batch.
struct Batch {
  nn::Tensor<float> gray, sparse, pseudo, depth, mask;
  std::vector<std::string> ids;
};

Batch make_batch(const std::vector<const synth::Sample*>& samples);

/// Plane n of an N x 1 x H x W tensor.
ImageF image_of(const nn::Tensor<float>& t, int n);
Mask mask_of(const nn::Tensor<float>& t, int n);

}  // namespace sdc::harness

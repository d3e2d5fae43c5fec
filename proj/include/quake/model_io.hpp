#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "quake/dsp.hpp"
#include "quake/nn.hpp"

namespace quake {

// Everything needed to run inference on raw samples: architecture, the
// feature chain parameters, the training-split standardization statistics,
// and the learned tensors. Serialized as a little-endian "QFM1" container
// with a CRC-32 trailer.
struct ModelFile {
  nn::ModelSpec spec;
  FeatureConfig feat_config;
  FeatureKind feat_kind = FeatureKind::mfcc;
  double window_s = 0.2;  // analysis window the model was trained on
  nn::Normalizer norm;
  nn::ParamSet params;

  bool operator==(const ModelFile&) const = default;
};

std::vector<std::uint8_t> save_model(const ModelFile& m);
ModelFile load_model(std::span<const std::uint8_t> bytes);

ModelFile load_model_file(const std::string& path);
void save_model_file(const std::string& path, const ModelFile& m);

}  // namespace quake

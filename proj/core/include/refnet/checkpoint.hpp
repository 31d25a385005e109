#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "refnet/model.hpp"
#include "refnet/param.hpp"

namespace refnet {

// Versioned container: JSON metadata plus named parameter blobs stored as
// base64 of little-endian 64-bit reals, so save -> load -> forward is
// bitwise identical to the pre-save forward.
struct Checkpoint {
  int version = 1;
  uint64_t vocab_hash = 0;
  nlohmann::json config;  // model + training snapshot
  int epoch = 0;
  double val_bleu4 = 0.0;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

Checkpoint snapshot_params(const ParameterStore& params);
// Shapes and names must match the store exactly; otherwise DataError.
void restore_params(ParameterStore& params, const Checkpoint& ckpt);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace refnet

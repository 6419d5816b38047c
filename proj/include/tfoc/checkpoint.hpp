#pragma once

// Checkpoint file layout (all integers little-endian):
//
//   "TFOC"            4 bytes
//   version           u32 (= 1)
//   header_len        u32
//   header            UTF-8 JSON, header_len bytes
//   per parameter:    u16 name_len, name, u8 ndim, u32 dims[ndim], float32 data
//
// The header holds the input dims, layer list, training config, best epoch,
// validation accuracy and the feature pipeline that produced the inputs.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "tfoc/network.hpp"

namespace tfoc {

struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  InputDims input;
  Architecture arch;
  nlohmann::json train_config = nlohmann::json::object();
  nlohmann::json pipeline = nlohmann::json::object();
  int best_epoch{0};
  double val_accuracy{0.0};
  std::vector<Param<float>> params;

  // Rebuilds the network; throws CheckpointError if parameters do not match
  // the architecture.
  Network network() const;
};

Checkpoint make_checkpoint(const Network& net);

std::vector<uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct Prediction {
  std::vector<int> labels;
  Tensor probs;  // N x 2
};

// Infer mode; argmax with ties to the lowest class index.
Prediction predict(const Checkpoint& ckpt, const Tensor& inputs);
Prediction predict(const Network& net, const Tensor& inputs);

}  // namespace tfoc

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "tfoc/batching.hpp"
#include "tfoc/checkpoint.hpp"
#include "tfoc/network.hpp"

namespace tfoc {

struct BatchingConfig {
  bool balanced{true};
  int per_subject{4};
  int batch_size{32};  // unbalanced batching only
};

struct TrainConfig {
  int epochs{200};
  int patience{20};
  double val_frac{0.1};
  uint64_t seed{1};
  BatchingConfig batching;
  double lr{0.001};
  double rho{0.9};
  double eps{1e-7};

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochRecord {
  int epoch{0};  // 1-based
  double train_loss{0.0};  // mean mini-batch loss, dropout active
  double val_loss{0.0};
  double val_accuracy{0.0};
  bool improved{false};
};

// Produces the batches of one epoch (0-based).
using BatchSource = std::function<std::vector<Batch>(std::span<const Example>, int epoch)>;

// Balanced or unbalanced batches per cfg.batching, reseeded with seed + epoch.
BatchSource make_batch_source(const TrainConfig& cfg);

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
  bool stopped_early{false};
  // Every trial id that reached the trainer: training, validation and batch members.
  std::vector<TrialId> seen;
};

using EpochCallback = std::function<void(const EpochRecord&, const Network&)>;

// Trains a fresh network on `train`, keeping the parameters from the epoch
// with the best validation accuracy (earliest on ties) and stopping after
// cfg.patience epochs without improvement. Deterministic for a given seed.
TrainResult train_fold(std::span<const Example> train, std::span<const Example> validation, const InputDims& dims,
                       const TrainConfig& cfg, const BatchSource& source,
                       const Architecture& arch = Architecture::table1(), const EpochCallback& on_epoch = {});

struct Evaluation {
  double loss{0.0};
  double accuracy{0.0};
  std::vector<int> predictions;
};

// Infer-mode loss and accuracy, evaluated in chunks.
Evaluation evaluate(const Network& net, std::span<const Example> examples);

}  // namespace tfoc

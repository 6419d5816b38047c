#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tfoc/dsp.hpp"
#include "tfoc/trainer.hpp"

namespace tfoc {

enum class Representation { stft_direct, image32 };

std::string to_string(Representation r);
Representation parse_representation(std::string_view s);

struct FilterSettings {
  int order{6};
  double low_hz{8.0};
  double high_hz{30.0};
  dsp::FilterMode mode{dsp::FilterMode::causal};
};

enum class OverlapRule { half, minimal, samples };

struct StftSettings {
  // 0 selects by sampling rate: 256 when fs >= 200 Hz, else 128.
  int window_len{0};
  OverlapRule overlap_rule{OverlapRule::half};
  int overlap{0};  // used when overlap_rule == samples
  dsp::WindowFn window_fn{dsp::WindowFn::hann};
  std::optional<std::pair<double, double>> crop_band;
};

struct InputSettings {
  Representation representation{Representation::stft_direct};
  // Per-input z-scoring of the assembled magnitudes.
  bool standardize{false};
};

// JSON layout:
//   { "name", "seed", "threads",
//     "filter":   { "order", "low_hz", "high_hz", "mode": "causal" | "zero_phase" },
//     "stft":     { "window_len": int | "auto", "overlap": int | "half" | "minimal",
//                   "window_fn": "hann" | "rectangular", "crop_band": [lo, hi] | null },
//     "input":    { "representation": "stft_direct" | "image32", "standardize" },
//     "training": { "epochs", "patience", "val_frac", "lr", "rho", "eps" },
//     "batching": { "balanced", "per_subject", "batch_size" },
//     "segments": [ "full4", "first3", ... ] }
// Every key is optional; unknown keys are rejected.
struct ExperimentConfig {
  std::string name{"tfoc"};
  uint64_t seed{1};
  int threads{1};
  FilterSettings filter;
  StftSettings stft;
  InputSettings input;
  TrainConfig training;  // training.seed mirrors `seed`
  std::vector<dsp::SegmentId> segments = dsp::all_segments();

  // Throws ConfigError.
  void validate() const;
  dsp::StftConfig stft_for(double fs) const;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig parse_experiment_config_text(const std::string& text);
// Throws IoError when the file cannot be read.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Fully resolved form; parse_experiment_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace tfoc

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "json.hpp"
#include "tfoc/config.hpp"
#include "tfoc/dataset.hpp"
#include "tfoc/dsp.hpp"
#include "tfoc/network.hpp"

namespace tfoc {

// Channels fed to the network, in assembly order.
inline const std::array<std::string, 3> kModelChannels = {"C3", "Cz", "C4"};

// Per-trial network inputs: bandpass filter -> optional segment slice ->
// (symmetric zero pad to one window if short) -> |STFT| per model channel ->
// optional band crop -> concatenation along time -> optional 32x32 resize ->
// optional standardisation. Each input is row-major F x W.
struct FeatureSet {
  InputDims dims;
  dsp::StftConfig stft;
  std::vector<std::vector<double>> inputs;  // aligned with Dataset::trials
};

std::vector<double> trial_features(const TrialRecord& trial, const ExperimentConfig& cfg,
                                   const dsp::IirFilterSos& filter, const dsp::StftConfig& stft,
                                   const std::optional<dsp::SegmentSpec>& segment, InputDims& dims);

// Throws InputError if a model channel is missing or the trials disagree on
// the resulting input shape.
FeatureSet compute_features(const Dataset& ds, const ExperimentConfig& cfg,
                            const std::optional<dsp::SegmentSpec>& segment = std::nullopt);

// Everything needed to recompute features for a checkpoint.
nlohmann::json pipeline_json(const ExperimentConfig& cfg, double fs, const std::optional<dsp::SegmentSpec>& segment);

struct Pipeline {
  ExperimentConfig config;
  double fs{0.0};
  std::optional<dsp::SegmentSpec> segment;
};
Pipeline parse_pipeline_json(const nlohmann::json& j);

}  // namespace tfoc

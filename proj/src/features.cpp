#include "tfoc/features.hpp"

#include <cmath>
#include <map>

namespace tfoc {

using nlohmann::json;

namespace {

constexpr std::size_t kImageSide = 32;

void standardize(std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size()));
  for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : x - mean;
}

}  // namespace

std::vector<double> trial_features(const TrialRecord& trial, const ExperimentConfig& cfg,
                                   const dsp::IirFilterSos& filter, const dsp::StftConfig& stft,
                                   const std::optional<dsp::SegmentSpec>& segment, InputDims& dims) {
  std::size_t begin = 0, end = trial.n_samples();
  if (segment) {
    if (segment->start_s + segment->dur_s > trial.duration_s() + 1e-9)
      throw RangeError("segment " + dsp::to_string(segment->id) + " exceeds the " +
                       std::to_string(trial.duration_s()) + " s trial");
    std::tie(begin, end) = dsp::segment_range(*segment, trial.fs);
  }

  std::vector<dsp::Spectrogram> specs;
  for (const auto& name : kModelChannels) {
    const int ch = trial.channel_index(name);
    if (ch < 0) throw InputError("trial of subject " + trial.subject_id + " has no channel " + name);
    dsp::SampleBuffer raw{trial.data[static_cast<std::size_t>(ch)], trial.fs};
    auto filtered = dsp::apply_filter(filter, raw, cfg.filter.mode);
    dsp::SampleBuffer piece{std::vector<double>(filtered.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                                filtered.samples.begin() + static_cast<std::ptrdiff_t>(end)),
                            trial.fs};
    if (piece.samples.size() < static_cast<std::size_t>(stft.window_len))
      piece = dsp::pad_to_length(piece, static_cast<std::size_t>(stft.window_len));
    auto spec = dsp::spectrogram(piece, stft);
    if (cfg.stft.crop_band) spec = dsp::crop_band(spec, cfg.stft.crop_band->first, cfg.stft.crop_band->second);
    specs.push_back(std::move(spec));
  }

  auto input = dsp::assemble_model_input(specs);
  dsp::Matrix values = cfg.input.representation == Representation::image32
                           ? dsp::resize_bilinear(input.values, kImageSide, kImageSide)
                           : std::move(input.values);
  dims = {values.rows, values.cols, 1};
  if (cfg.input.standardize) standardize(values.data);
  return std::move(values.data);
}

FeatureSet compute_features(const Dataset& ds, const ExperimentConfig& cfg,
                            const std::optional<dsp::SegmentSpec>& segment) {
  if (ds.trials.empty()) throw InputError("dataset has no trials");
  FeatureSet out;
  std::map<double, dsp::IirFilterSos> filters;
  bool first = true;
  out.inputs.reserve(ds.trials.size());
  for (const auto& trial : ds.trials) {
    auto it = filters.find(trial.fs);
    if (it == filters.end())
      it = filters
               .emplace(trial.fs, dsp::design_butterworth_bandpass(cfg.filter.order, cfg.filter.low_hz,
                                                                   cfg.filter.high_hz, trial.fs))
               .first;
    const auto stft = cfg.stft_for(trial.fs);
    InputDims dims;
    out.inputs.push_back(trial_features(trial, cfg, it->second, stft, segment, dims));
    if (first) {
      out.dims = dims;
      out.stft = stft;
      first = false;
    } else if (!(dims == out.dims)) {
      throw InputError("trial inputs disagree in shape: " + std::to_string(dims.height) + "x" +
                       std::to_string(dims.width) + " vs " + std::to_string(out.dims.height) + "x" +
                       std::to_string(out.dims.width));
    }
  }
  return out;
}

json pipeline_json(const ExperimentConfig& cfg, double fs, const std::optional<dsp::SegmentSpec>& segment) {
  return {{"config", to_json(cfg)},
          {"sampling_rate_hz", fs},
          {"segment", segment ? json(dsp::to_string(segment->id)) : json(nullptr)}};
}

Pipeline parse_pipeline_json(const json& j) {
  Pipeline p;
  try {
    p.config = parse_experiment_config(j.at("config"));
    p.fs = j.at("sampling_rate_hz").get<double>();
    const auto& seg = j.at("segment");
    if (!seg.is_null()) p.segment = dsp::segment_spec(dsp::parse_segment_id(seg.get<std::string>()));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint pipeline metadata: ") + e.what());
  }
  return p;
}

}  // namespace tfoc

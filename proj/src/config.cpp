#include "tfoc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace tfoc {

using nlohmann::json;
using json_util::check_keys;
using json_util::read;

namespace {

// Wraps parse helpers from other modules so every schema failure is a ConfigError.
template <class F>
auto as_config_error(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

std::string read_string(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

void parse_filter(const json& j, FilterSettings& f) {
  const std::string where = "filter";
  check_keys(j, {"order", "low_hz", "high_hz", "mode"}, where);
  read(j, "order", f.order, where);
  read(j, "low_hz", f.low_hz, where);
  read(j, "high_hz", f.high_hz, where);
  if (j.contains("mode"))
    f.mode = as_config_error(where + ".mode", [&] { return dsp::parse_filter_mode(read_string(j, "mode", where)); });
}

void parse_stft(const json& j, StftSettings& s) {
  const std::string where = "stft";
  check_keys(j, {"window_len", "overlap", "window_fn", "crop_band"}, where);
  if (j.contains("window_len")) {
    const auto& w = j["window_len"];
    if (w.is_string() && w.get<std::string>() == "auto")
      s.window_len = 0;
    else if (w.is_number_integer())
      s.window_len = w.get<int>();
    else
      throw ConfigError("stft.window_len: expected an integer or \"auto\"");
  }
  if (j.contains("overlap")) {
    const auto& o = j["overlap"];
    if (o.is_string() && o.get<std::string>() == "half") {
      s.overlap_rule = OverlapRule::half;
    } else if (o.is_string() && o.get<std::string>() == "minimal") {
      s.overlap_rule = OverlapRule::minimal;
    } else if (o.is_number_integer()) {
      s.overlap_rule = OverlapRule::samples;
      s.overlap = o.get<int>();
    } else {
      throw ConfigError("stft.overlap: expected an integer, \"half\" or \"minimal\"");
    }
  }
  if (j.contains("window_fn"))
    s.window_fn =
        as_config_error(where + ".window_fn", [&] { return dsp::parse_window_fn(read_string(j, "window_fn", where)); });
  if (j.contains("crop_band")) {
    const auto& c = j["crop_band"];
    if (c.is_null()) {
      s.crop_band.reset();
    } else if (c.is_array() && c.size() == 2 && c[0].is_number() && c[1].is_number()) {
      s.crop_band = std::make_pair(c[0].get<double>(), c[1].get<double>());
    } else {
      throw ConfigError("stft.crop_band: expected [low_hz, high_hz] or null");
    }
  }
}

void parse_input(const json& j, InputSettings& in) {
  const std::string where = "input";
  check_keys(j, {"representation", "standardize"}, where);
  if (j.contains("representation"))
    in.representation = parse_representation(read_string(j, "representation", where));
  read(j, "standardize", in.standardize, where);
}

void parse_training(const json& j, TrainConfig& t) {
  const std::string where = "training";
  check_keys(j, {"epochs", "patience", "val_frac", "lr", "rho", "eps"}, where);
  read(j, "epochs", t.epochs, where);
  read(j, "patience", t.patience, where);
  read(j, "val_frac", t.val_frac, where);
  read(j, "lr", t.lr, where);
  read(j, "rho", t.rho, where);
  read(j, "eps", t.eps, where);
}

void parse_batching(const json& j, BatchingConfig& b) {
  const std::string where = "batching";
  check_keys(j, {"balanced", "per_subject", "batch_size"}, where);
  read(j, "balanced", b.balanced, where);
  read(j, "per_subject", b.per_subject, where);
  read(j, "batch_size", b.batch_size, where);
}

}  // namespace

std::string to_string(Representation r) { return r == Representation::image32 ? "image32" : "stft_direct"; }

Representation parse_representation(std::string_view s) {
  if (s == "stft_direct") return Representation::stft_direct;
  if (s == "image32") return Representation::image32;
  throw ConfigError("input.representation: unknown value '" + std::string(s) + "'");
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("name must not be empty");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (filter.order < 2 || filter.order % 2 != 0) throw ConfigError("filter.order must be even and >= 2");
  if (!(filter.low_hz > 0.0 && filter.low_hz < filter.high_hz))
    throw ConfigError("filter band must satisfy 0 < low_hz < high_hz");
  if (stft.window_len != 0 && stft.window_len < 2) throw ConfigError("stft.window_len must be >= 2");
  if (stft.overlap_rule == OverlapRule::samples) {
    if (stft.overlap < 1) throw ConfigError("stft.overlap must be >= 1");
    if (stft.window_len != 0 && stft.overlap >= stft.window_len)
      throw ConfigError("stft.overlap must be smaller than stft.window_len");
  }
  if (stft.crop_band && !(stft.crop_band->first >= 0.0 && stft.crop_band->first < stft.crop_band->second))
    throw ConfigError("stft.crop_band must satisfy 0 <= low < high");
  if (segments.empty()) throw ConfigError("segments must not be empty");
  for (std::size_t i = 0; i < segments.size(); ++i)
    for (std::size_t k = i + 1; k < segments.size(); ++k)
      if (segments[i] == segments[k]) throw ConfigError("segment " + dsp::to_string(segments[i]) + " listed twice");
  training.validate();
}

dsp::StftConfig ExperimentConfig::stft_for(double fs) const {
  dsp::StftConfig c;
  c.window_len = stft.window_len != 0 ? stft.window_len : (fs >= 200.0 ? 256 : 128);
  switch (stft.overlap_rule) {
    case OverlapRule::half: c.overlap = dsp::half_overlap(c.window_len); break;
    case OverlapRule::minimal: c.overlap = dsp::minimal_overlap(c.window_len); break;
    case OverlapRule::samples: c.overlap = stft.overlap; break;
  }
  c.window_fn = stft.window_fn;
  as_config_error("stft", [&] {
    c.validate();
    return 0;
  });
  return c;
}

ExperimentConfig parse_experiment_config(const json& j) {
  check_keys(j, {"name", "seed", "threads", "filter", "stft", "input", "training", "batching", "segments"}, "config");
  ExperimentConfig cfg;
  if (j.contains("name")) cfg.name = read_string(j, "name", "config");
  read(j, "seed", cfg.seed, "config");
  read(j, "threads", cfg.threads, "config");
  if (j.contains("filter")) parse_filter(j["filter"], cfg.filter);
  if (j.contains("stft")) parse_stft(j["stft"], cfg.stft);
  if (j.contains("input")) parse_input(j["input"], cfg.input);
  if (j.contains("training")) parse_training(j["training"], cfg.training);
  if (j.contains("batching")) parse_batching(j["batching"], cfg.training.batching);
  if (j.contains("segments")) {
    const auto& s = j["segments"];
    if (!s.is_array()) throw ConfigError("segments: expected an array of segment ids");
    cfg.segments.clear();
    for (const auto& id : s) {
      if (!id.is_string()) throw ConfigError("segments: expected strings");
      cfg.segments.push_back(as_config_error("segments", [&] { return dsp::parse_segment_id(id.get<std::string>()); }));
    }
  }
  cfg.training.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_experiment_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_experiment_config(j);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_experiment_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json to_json(const ExperimentConfig& cfg) {
  json stft = {{"window_fn", dsp::to_string(cfg.stft.window_fn)}};
  stft["window_len"] = cfg.stft.window_len == 0 ? json("auto") : json(cfg.stft.window_len);
  switch (cfg.stft.overlap_rule) {
    case OverlapRule::half: stft["overlap"] = "half"; break;
    case OverlapRule::minimal: stft["overlap"] = "minimal"; break;
    case OverlapRule::samples: stft["overlap"] = cfg.stft.overlap; break;
  }
  stft["crop_band"] = cfg.stft.crop_band ? json::array({cfg.stft.crop_band->first, cfg.stft.crop_band->second})
                                         : json(nullptr);
  json segments = json::array();
  for (auto s : cfg.segments) segments.push_back(dsp::to_string(s));
  const auto& t = cfg.training;
  return {{"name", cfg.name},
          {"seed", cfg.seed},
          {"threads", cfg.threads},
          {"filter",
           {{"order", cfg.filter.order},
            {"low_hz", cfg.filter.low_hz},
            {"high_hz", cfg.filter.high_hz},
            {"mode", dsp::to_string(cfg.filter.mode)}}},
          {"stft", stft},
          {"input",
           {{"representation", to_string(cfg.input.representation)}, {"standardize", cfg.input.standardize}}},
          {"training",
           {{"epochs", t.epochs},
            {"patience", t.patience},
            {"val_frac", t.val_frac},
            {"lr", t.lr},
            {"rho", t.rho},
            {"eps", t.eps}}},
          {"batching",
           {{"balanced", t.batching.balanced},
            {"per_subject", t.batching.per_subject},
            {"batch_size", t.batching.batch_size}}},
          {"segments", segments}};
}

}  // namespace tfoc

#include "tfoc/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "tfoc/random.hpp"

namespace tfoc {

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const auto n = static_cast<std::size_t>(std::llround(spec.fs * spec.duration_s));
  const std::vector<std::string> channels = {"C3", "Cz", "C4"};

  Rng rng(spec.seed);
  std::vector<TrialRecord> trials;
  for (int s = 0; s < spec.n_subjects; ++s) {
    const std::string id = "S" + std::to_string(s + 1);
    const double amp = spec.amplitude * (1.0 + spec.subject_spread * rng.uniform(-1.0, 1.0));
    const double noise = spec.noise_sd * (1.0 + spec.subject_spread * rng.uniform(-1.0, 1.0));
    const double shift = rng.uniform(-0.5, 0.5);  // subject-specific rhythm offset, Hz

    // Alternate labels so every subject is class balanced.
    for (int k = 0; k < 2 * spec.trials_per_class; ++k) {
      TrialRecord t;
      t.subject_id = id;
      t.session_id = "1";
      t.channels = channels;
      t.fs = spec.fs;
      t.label = k % 2 == 0 ? Label::left : Label::right;
      t.data.assign(3, std::vector<double>(n));

      const bool left = t.label == Label::left;
      const double f_c3 = (left ? spec.low_hz : spec.high_hz) + shift;
      const double f_c4 = (left ? spec.high_hz : spec.low_hz) + shift;
      const double ph3 = rng.uniform(0.0, kTwoPi);
      const double ph4 = rng.uniform(0.0, kTwoPi);
      for (std::size_t i = 0; i < n; ++i) {
        const double time = static_cast<double>(i) / spec.fs;
        t.data[0][i] = amp * std::sin(kTwoPi * f_c3 * time + ph3) + noise * rng.normal();
        t.data[1][i] = noise * rng.normal();
        t.data[2][i] = amp * std::sin(kTwoPi * f_c4 * time + ph4) + noise * rng.normal();
      }
      // Stored as float32 on disk; round here so in-memory and loaded data agree.
      for (auto& ch : t.data)
        for (double& v : ch) v = static_cast<float>(v);
      trials.push_back(std::move(t));
    }
  }

  Dataset ds;
  ds.manifest = manifest_for(trials, spec.duration_s);
  for (auto& e : ds.manifest.subjects) e.n_trials = static_cast<std::size_t>(2 * spec.trials_per_class);
  ds.trials = std::move(trials);
  return ds;
}

}  // namespace tfoc

#pragma once

#include <cstdint>

#include "tfoc/dataset.hpp"

namespace tfoc {

// Generator for lateralised motor-imagery-like data. For label left, C3
// carries a `low_hz` rhythm and C4 a `high_hz` rhythm; right swaps them. Cz
// and any extra channels carry noise only. Subjects differ in rhythm
// amplitude and noise level so that cross-subject transfer is non-trivial.
struct SyntheticSpec {
  int n_subjects{4};
  int trials_per_class{20};
  double fs{64.0};
  double duration_s{2.0};
  double low_hz{10.0};
  double high_hz{22.0};
  double amplitude{1.0};
  double noise_sd{1.0};
  // Relative spread of per-subject amplitude/noise around the nominal values.
  double subject_spread{0.3};
  uint64_t seed{1};
};

Dataset make_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace tfoc

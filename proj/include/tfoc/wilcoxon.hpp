#pragma once

#include <span>
#include <string>
#include <string_view>

namespace tfoc {

enum class Alternative { two_sided, greater, less };

std::string to_string(Alternative a);
// Throws ConfigError for anything but two_sided / greater / less.
Alternative parse_alternative(std::string_view s);

struct WilcoxonResult {
  double statistic{0.0};  // W+, sum of ranks of positive differences
  double p_value{1.0};
  std::size_t n_used{0};  // pairs left after dropping zero differences
  bool exact{true};
};

// Paired signed-rank test on d = x - y. Zero differences are dropped, tied
// |d| get average ranks. For n <= 25 the p-value is exact over all 2^n sign
// assignments; above that a normal approximation with tie-corrected variance
// (no continuity correction) is used. two_sided = min(1, 2 min(greater, less)).
// Differences whose magnitudes agree to 1e-9 relative are treated as tied.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y, Alternative alt);

inline constexpr std::size_t kWilcoxonExactMax = 25;

}  // namespace tfoc

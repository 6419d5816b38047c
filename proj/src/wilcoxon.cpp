#include "tfoc/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tfoc/errors.hpp"

namespace tfoc {

namespace {

constexpr double kTieRelTol = 1e-9;

bool same_magnitude(double a, double b) { return std::abs(a - b) <= kTieRelTol * std::max(a, b); }

struct Ranking {
  std::vector<double> ranks;  // aligned with the input magnitudes
  std::vector<std::size_t> tie_sizes;
};

Ranking average_ranks(const std::vector<double>& mag) {
  const std::size_t n = mag.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mag[a] < mag[b]; });
  Ranking r;
  r.ranks.resize(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && same_magnitude(mag[order[j - 1]], mag[order[j]])) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) r.ranks[order[k]] = avg;
    r.tie_sizes.push_back(j - i);
    i = j;
  }
  return r;
}

// Number of sign assignments giving each doubled rank sum. Doubled average
// ranks are integers, so the distribution is exact.
std::vector<double> doubled_sum_counts(const std::vector<double>& ranks) {
  std::size_t total = 0;
  std::vector<std::size_t> twice;
  for (double r : ranks) {
    twice.push_back(static_cast<std::size_t>(std::llround(2.0 * r)));
    total += twice.back();
  }
  std::vector<double> counts(total + 1, 0.0);
  counts[0] = 1.0;
  std::size_t reach = 0;
  for (std::size_t t : twice) {
    reach += t;
    for (std::size_t s = reach + 1; s-- > t;) counts[s] += counts[s - t];
  }
  return counts;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

std::string to_string(Alternative a) {
  switch (a) {
    case Alternative::two_sided: return "two_sided";
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
  }
  return "?";
}

Alternative parse_alternative(std::string_view s) {
  if (s == "two_sided" || s == "two-sided") return Alternative::two_sided;
  if (s == "greater") return Alternative::greater;
  if (s == "less") return Alternative::less;
  throw ConfigError("unknown alternative '" + std::string(s) + "' (expected two_sided, greater or less)");
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y, Alternative alt) {
  if (x.size() != y.size())
    throw InputError("wilcoxon: length mismatch (" + std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  if (x.empty()) throw InputError("wilcoxon: no pairs");

  std::vector<double> mag;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (!std::isfinite(d)) throw InputError("wilcoxon: non-finite difference at pair " + std::to_string(i));
    if (d == 0.0) continue;
    mag.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }

  WilcoxonResult res;
  res.n_used = mag.size();
  if (mag.empty()) return res;  // W = 0, p = 1

  const auto ranking = average_ranks(mag);
  for (std::size_t i = 0; i < mag.size(); ++i)
    if (positive[i]) res.statistic += ranking.ranks[i];

  double p_greater = 1.0, p_less = 1.0;
  const std::size_t n = mag.size();
  if (n <= kWilcoxonExactMax) {
    const auto counts = doubled_sum_counts(ranking.ranks);
    const auto w2 = static_cast<std::size_t>(std::llround(2.0 * res.statistic));
    const double total = std::ldexp(1.0, static_cast<int>(n));
    double ge = 0.0, le = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (s >= w2) ge += counts[s];
      if (s <= w2) le += counts[s];
    }
    p_greater = ge / total;
    p_less = le / total;
  } else {
    res.exact = false;
    const double nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
    for (std::size_t t : ranking.tie_sizes) {
      const double td = static_cast<double>(t);
      var -= (td * td * td - td) / 48.0;
    }
    if (var > 0.0) {
      const double z = (res.statistic - mean) / std::sqrt(var);
      p_greater = normal_sf(z);
      p_less = normal_sf(-z);
    }
  }

  switch (alt) {
    case Alternative::greater: res.p_value = p_greater; break;
    case Alternative::less: res.p_value = p_less; break;
    case Alternative::two_sided: res.p_value = std::min(1.0, 2.0 * std::min(p_greater, p_less)); break;
  }
  return res;
}

}  // namespace tfoc

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tfoc/network.hpp"

// Central-difference gradient oracle for BasicNetwork<double>.
namespace gradcheck {

struct ParamReport {
  std::string name;
  std::size_t checked{0};
  // Entries whose +/-h evaluations straddled a ReLU kink and were rechecked
  // with a smaller step (down to h * 1e-4).
  std::size_t refined{0};
  // Entries still straddling a kink at the smallest step; the loss is not
  // differentiable there, so they are excluded from max_rel_error.
  std::size_t kinks{0};
  double max_rel_error{0.0};
};

inline std::pair<tfoc::BasicTensor<double>, std::vector<int>> random_batch(const tfoc::InputDims& dims, std::size_t n,
                                                                           tfoc::Rng& rng) {
  tfoc::BasicTensor<double> batch({n, dims.height, dims.width, 1});
  for (auto& v : batch.data) v = rng.uniform(-1.0, 1.0);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  return {std::move(batch), std::move(labels)};
}

// Compares analytic gradients with (L(θ+h) - L(θ-h)) / 2h. In train mode each
// evaluation reseeds the dropout RNG with `seed`, so all evaluations share the
// same masks. max_per_param = 0 checks every entry; otherwise entries are
// strided evenly through each tensor.
inline std::vector<ParamReport> check(tfoc::BasicNetwork<double>& net, const tfoc::BasicTensor<double>& batch,
                                      const std::vector<int>& labels, tfoc::Mode mode, uint64_t seed,
                                      std::size_t max_per_param, double h = 1e-4) {
  auto loss_at = [&]() {
    tfoc::Rng rng(seed);
    return net.loss_and_grads(batch, labels, mode, &rng);
  };
  // Sign pattern of every cached activation; changes iff a ReLU switches.
  auto pattern = [&]() {
    tfoc::Rng rng(seed);
    const auto fwd = net.forward(batch, mode, &rng);
    std::vector<bool> bits;
    for (const auto& c : fwd.cache)
      for (const auto& a : c.acts)
        for (double v : a) bits.push_back(v > 0.0);
    return bits;
  };
  const auto base = loss_at();
  std::vector<ParamReport> out;
  for (std::size_t p = 0; p < net.params().size(); ++p) {
    auto& value = net.params()[p].value;
    ParamReport rep{net.params()[p].shape.name, 0, 0, 0, 0.0};
    const std::size_t stride = max_per_param == 0 ? 1 : std::max<std::size_t>(1, value.size() / max_per_param);
    for (std::size_t i = 0; i < value.size(); i += stride) {
      const double orig = value[i];
      // Shrink the step until both evaluations share one activation pattern.
      std::optional<double> numeric;
      for (double step = h; step >= h * 1e-4 && !numeric; step /= 10.0) {
        value[i] = orig + step;
        const double up = loss_at().loss;
        const auto up_pattern = pattern();
        value[i] = orig - step;
        const double down = loss_at().loss;
        const bool kink = pattern() != up_pattern;
        if (!kink) numeric = (up - down) / (2.0 * step);
        else if (step == h) ++rep.refined;
      }
      value[i] = orig;
      if (!numeric) {
        ++rep.kinks;
        continue;
      }
      const double analytic = base.grads[p][i];
      const double denom = std::max({std::abs(*numeric) + std::abs(analytic), 1e-4});
      rep.max_rel_error = std::max(rep.max_rel_error, std::abs(*numeric - analytic) / denom);
      ++rep.checked;
    }
    out.push_back(rep);
  }
  return out;
}

}  // namespace gradcheck

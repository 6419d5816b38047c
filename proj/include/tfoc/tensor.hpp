#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "tfoc/errors.hpp"

namespace tfoc {

// Dense row-major tensor.
template <class T>
struct BasicTensor {
  std::vector<std::size_t> dims;
  std::vector<T> data;

  BasicTensor() = default;
  explicit BasicTensor(std::vector<std::size_t> d, T fill = T(0))
      : dims(std::move(d)), data(element_count(dims), fill) {}

  static std::size_t element_count(const std::vector<std::size_t>& d) {
    return std::accumulate(d.begin(), d.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return dims.size(); }
  bool consistent() const { return element_count(dims) == data.size(); }
  bool all_finite() const {
    for (const T& v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

using Tensor = BasicTensor<float>;

inline std::string dims_to_string(const std::vector<std::size_t>& d) {
  std::string s = "(";
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? ", " : "") + std::to_string(d[i]);
  return s + ")";
}

}  // namespace tfoc

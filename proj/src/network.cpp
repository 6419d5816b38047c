#include "tfoc/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace tfoc {

namespace {

constexpr std::size_t kTaps = 9;

// Dot product with eight fixed lanes; the summation order depends only on n.
template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <class T>
inline void axpy(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// Accumulates one block of output channels at pixel (h, w) into o[0..nb).
// kernel is [tap][cin][cout]. With `flip` the taps are mirrored, which turns
// the forward correlation into the input-gradient correlation. NB > 0 fixes
// the block width at compile time so the accumulators stay in registers.
template <class T, std::size_t NB>
inline void conv_block(const T* in, std::size_t h_in, std::size_t w_in, std::size_t cin, const T* kernel,
                       std::size_t cout, std::size_t co0, std::size_t nb, std::size_t h, std::size_t w, bool flip,
                       T* o) {
  constexpr std::size_t kMax = NB > 0 ? NB : 16;
  const std::size_t n = NB > 0 ? NB : nb;
  T acc[kMax];
  for (std::size_t j = 0; j < n; ++j) acc[j] = o[j];
  for (std::size_t kh = 0; kh < 3; ++kh) {
    const std::size_t dh = flip ? 2 - kh : kh;
    if (h + dh < 1 || h + dh - 1 >= h_in) continue;
    const std::size_t ih = h + dh - 1;
    for (std::size_t kw = 0; kw < 3; ++kw) {
      const std::size_t dw = flip ? 2 - kw : kw;
      if (w + dw < 1 || w + dw - 1 >= w_in) continue;
      const std::size_t iw = w + dw - 1;
      const T* x = in + (ih * w_in + iw) * cin;
      const T* k = kernel + (kh * 3 + kw) * cin * cout + co0;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T xv = x[ci];
        if (xv == T(0)) continue;
        const T* kr = k + ci * cout;
        if constexpr (NB > 0) {
          for (std::size_t j = 0; j < NB; ++j) acc[j] += xv * kr[j];
        } else {
          for (std::size_t j = 0; j < n; ++j) acc[j] += xv * kr[j];
        }
      }
    }
  }
  for (std::size_t j = 0; j < n; ++j) o[j] = acc[j];
}

// out[h, w, :] += sum over taps of in[shifted pixel, :] * kernel[tap].
template <class T>
void conv_accumulate(const T* in, std::size_t h_in, std::size_t w_in, std::size_t cin, const T* kernel,
                     std::size_t cout, bool flip, T* out) {
  for (std::size_t h = 0; h < h_in; ++h) {
    for (std::size_t w = 0; w < w_in; ++w) {
      T* o = out + (h * w_in + w) * cout;
      std::size_t co = 0;
      for (; co + 64 <= cout; co += 64) conv_block<T, 64>(in, h_in, w_in, cin, kernel, cout, co, 64, h, w, flip, o + co);
      for (; co + 32 <= cout; co += 32) conv_block<T, 32>(in, h_in, w_in, cin, kernel, cout, co, 32, h, w, flip, o + co);
      for (; co < cout; co += 16) {
        const std::size_t nb = std::min<std::size_t>(16, cout - co);
        conv_block<T, 0>(in, h_in, w_in, cin, kernel, cout, co, nb, h, w, flip, o + co);
      }
    }
  }
}

// 3x3 'same' convolution followed by ReLU.
template <class T>
void conv_forward(const T* in, std::size_t h_in, std::size_t w_in, std::size_t cin, const T* kernel, const T* bias,
                  std::size_t cout, T* out) {
  for (std::size_t p = 0; p < h_in * w_in; ++p) std::copy(bias, bias + cout, out + p * cout);
  conv_accumulate(in, h_in, w_in, cin, kernel, cout, false, out);
  for (std::size_t i = 0; i < h_in * w_in * cout; ++i) out[i] = std::max(out[i], T(0));
}

// dkernel[tap][ci][co0..co0+n) += sum over pixels of in[shifted, ci] * gz[pixel, co].
template <class T, std::size_t NB>
inline void conv_dkernel_block(const T* in, std::size_t h_in, std::size_t w_in, std::size_t cin, std::size_t cout,
                               const T* gz, std::size_t tap, std::size_t ci, std::size_t co0, std::size_t nb, T* dk) {
  constexpr std::size_t kMax = NB > 0 ? NB : 16;
  const std::size_t n = NB > 0 ? NB : nb;
  const std::size_t kh = tap / 3, kw = tap % 3;
  T acc[kMax];
  for (std::size_t j = 0; j < n; ++j) acc[j] = dk[j];
  for (std::size_t h = 0; h < h_in; ++h) {
    if (h + kh < 1 || h + kh - 1 >= h_in) continue;
    const std::size_t ih = h + kh - 1;
    for (std::size_t w = 0; w < w_in; ++w) {
      if (w + kw < 1 || w + kw - 1 >= w_in) continue;
      const T xv = in[(ih * w_in + w + kw - 1) * cin + ci];
      if (xv == T(0)) continue;
      const T* g = gz + (h * w_in + w) * cout + co0;
      if constexpr (NB > 0) {
        for (std::size_t j = 0; j < NB; ++j) acc[j] += xv * g[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) acc[j] += xv * g[j];
      }
    }
  }
  for (std::size_t j = 0; j < n; ++j) dk[j] = acc[j];
}

// gz is the gradient w.r.t. the pre-activation. kernel_t is [tap][out][in].
template <class T>
void conv_backward(const T* in, std::size_t h_in, std::size_t w_in, std::size_t cin, const T* kernel_t,
                   std::size_t cout, const T* gz, T* dkernel, T* dbias, T* gin) {
  for (std::size_t p = 0; p < h_in * w_in; ++p)
    for (std::size_t co = 0; co < cout; ++co) dbias[co] += gz[p * cout + co];
  for (std::size_t tap = 0; tap < kTaps; ++tap) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      T* dk = dkernel + (tap * cin + ci) * cout;
      std::size_t co = 0;
      for (; co + 64 <= cout; co += 64)
        conv_dkernel_block<T, 64>(in, h_in, w_in, cin, cout, gz, tap, ci, co, 64, dk + co);
      for (; co + 32 <= cout; co += 32)
        conv_dkernel_block<T, 32>(in, h_in, w_in, cin, cout, gz, tap, ci, co, 32, dk + co);
      for (; co < cout; co += 16) {
        const std::size_t nb = std::min<std::size_t>(16, cout - co);
        conv_dkernel_block<T, 0>(in, h_in, w_in, cin, cout, gz, tap, ci, co, nb, dk + co);
      }
    }
  }
  // Input gradient: correlate gz with the mirrored, transposed kernel.
  if (gin != nullptr) conv_accumulate(gz, h_in, w_in, cout, kernel_t, cin, true, gin);
}

template <class T>
std::vector<T> transpose_kernel(const std::vector<T>& k, std::size_t cin, std::size_t cout) {
  std::vector<T> t(k.size());
  for (std::size_t tap = 0; tap < kTaps; ++tap)
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t co = 0; co < cout; ++co)
        t[(tap * cout + co) * cin + ci] = k[(tap * cin + ci) * cout + co];
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Architecture

std::string LayerSpec::describe() const {
  switch (kind) {
    case LayerKind::dropout: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "dropout(%.2g)", rate);
      return buf;
    }
    case LayerKind::conv: return "conv3x3(" + std::to_string(units) + ", relu" + (max_norm ? ", maxnorm3)" : ")");
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense:
      return "dense(" + std::to_string(units) + (softmax ? ", softmax" : ", relu") + (max_norm ? ", maxnorm3)" : ")");
  }
  return "?";
}

Architecture Architecture::scaled(int a, int b, int c, int dense_units) {
  auto drop = [](double r) { return LayerSpec{LayerKind::dropout, r, 0, false, false}; };
  auto conv = [](int u) { return LayerSpec{LayerKind::conv, 0.0, u, false, true}; };
  Architecture arch;
  arch.layers = {drop(0.2), conv(a),  conv(a),  drop(0.2),
                 conv(b),   conv(b),  drop(0.4), conv(c),
                 conv(c),   drop(0.4), LayerSpec{LayerKind::flatten},
                 LayerSpec{LayerKind::dense, 0.0, dense_units, false, true},
                 drop(0.4), LayerSpec{LayerKind::dense, 0.0, 2, true, false}};
  return arch;
}

Architecture Architecture::table1() { return scaled(32, 64, 128, 256); }

std::vector<std::string> Architecture::describe() const {
  std::vector<std::string> out;
  for (const auto& l : layers) out.push_back(l.describe());
  return out;
}

std::size_t NetworkPlan::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

NetworkPlan plan_network(const InputDims& input, const Architecture& arch) {
  if (input.height < 3 || input.width < 3)
    throw ShapeError("input " + std::to_string(input.height) + "x" + std::to_string(input.width) +
                     " is smaller than the 3x3 kernel");
  if (input.depth != 1) throw ShapeError("input depth must be 1");

  NetworkPlan plan;
  plan.input = input;
  std::size_t channels = 1;
  std::size_t flat = 0;
  bool flattened = false;
  int conv_i = 0, dense_i = 0;
  for (const auto& l : arch.layers) {
    switch (l.kind) {
      case LayerKind::dropout: break;
      case LayerKind::conv: {
        if (flattened) throw ShapeError("conv layer after flatten");
        const std::string name = "conv" + std::to_string(++conv_i);
        const auto u = static_cast<std::size_t>(l.units);
        plan.params.push_back({name + ".kernel", {3, 3, channels, u}, l.max_norm, 9 * channels});
        plan.params.push_back({name + ".bias", {u}, false, 0});
        channels = u;
        plan.conv_output = {input.height, input.width, channels};
        break;
      }
      case LayerKind::flatten:
        flattened = true;
        flat = input.height * input.width * channels;
        plan.flatten_size = flat;
        break;
      case LayerKind::dense: {
        if (!flattened) throw ShapeError("dense layer before flatten");
        const std::string name = "dense" + std::to_string(++dense_i);
        const auto u = static_cast<std::size_t>(l.units);
        plan.params.push_back({name + ".kernel", {flat, u}, l.max_norm, flat});
        plan.params.push_back({name + ".bias", {u}, false, 0});
        flat = u;
        break;
      }
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Initialisation and constraints

template <class T>
BasicTensor<T> he_uniform_init(const std::vector<std::size_t>& dims, std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw InputError("he_uniform_init: fan_in must be >= 1");
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  BasicTensor<T> t(dims);
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-limit, limit));
  return t;
}

template <class T>
void maxnorm_project(std::span<T> w, std::size_t units, double c) {
  if (units == 0 || w.size() % units != 0) throw ShapeError("maxnorm_project: weights not divisible into units");
  const std::size_t fan = w.size() / units;
  // Row-major sweeps; each unit's sum is still accumulated in row order.
  std::vector<double> sq(units, 0.0);
  for (std::size_t i = 0; i < fan; ++i) {
    const T* row = w.data() + i * units;
    for (std::size_t u = 0; u < units; ++u) sq[u] += static_cast<double>(row[u]) * static_cast<double>(row[u]);
  }
  std::vector<double> scale(units, 1.0);
  bool any = false;
  for (std::size_t u = 0; u < units; ++u) {
    const double norm = std::sqrt(sq[u]);
    if (norm > c) {
      scale[u] = c / norm;
      any = true;
    }
  }
  if (!any) return;
  for (std::size_t i = 0; i < fan; ++i) {
    T* row = w.data() + i * units;
    for (std::size_t u = 0; u < units; ++u)
      if (scale[u] != 1.0) row[u] = static_cast<T>(row[u] * scale[u]);
  }
}

// ---------------------------------------------------------------------------
// Network

template <class T>
BasicNetwork<T> BasicNetwork<T>::zeros(const InputDims& input, const Architecture& arch) {
  BasicNetwork net;
  net.arch_ = arch;
  net.plan_ = plan_network(input, arch);
  for (const auto& shape : net.plan_.params) net.params_.push_back({shape, std::vector<T>(shape.size(), T(0))});

  std::array<std::size_t, 3> shape = {input.height, input.width, 1};
  int next_param = 0;
  for (const auto& l : arch.layers) {
    int idx = -1;
    if (l.kind == LayerKind::conv) {
      idx = next_param;
      next_param += 2;
      shape[2] = static_cast<std::size_t>(l.units);
    } else if (l.kind == LayerKind::flatten) {
      shape = {1, 1, shape[0] * shape[1] * shape[2]};
    } else if (l.kind == LayerKind::dense) {
      idx = next_param;
      next_param += 2;
      shape = {1, 1, static_cast<std::size_t>(l.units)};
    }
    net.layer_param_.push_back(idx);
    net.layer_shape_.push_back(shape);
  }
  return net;
}

template <class T>
BasicNetwork<T>::BasicNetwork(const InputDims& input, const Architecture& arch, Rng& rng) {
  *this = zeros(input, arch);
  for (auto& p : params_) {
    if (p.shape.fan_in == 0) continue;  // bias
    p.value = he_uniform_init<T>(p.shape.dims, p.shape.fan_in, rng).data;
  }
}

template <class T>
void BasicNetwork<T>::check_batch(const BasicTensor<T>& batch) const {
  const auto& in = plan_.input;
  if (batch.rank() != 4 || batch.dims[1] != in.height || batch.dims[2] != in.width || batch.dims[3] != 1 ||
      !batch.consistent())
    throw ShapeError("batch " + dims_to_string(batch.dims) + " does not match network input (N, " +
                     std::to_string(in.height) + ", " + std::to_string(in.width) + ", 1)");
  if (batch.dims[0] == 0) throw ShapeError("empty batch");
}

template <class T>
void BasicNetwork<T>::forward_sample(const T* input, Mode mode, Rng* rng, SampleCache<T>& cache, T* probs) const {
  const std::size_t n_layers = arch_.layers.size();
  const std::size_t h = plan_.input.height, w = plan_.input.width;
  cache.acts.resize(n_layers + 1);
  cache.masks.assign(n_layers, {});
  cache.acts[0].assign(input, input + h * w);

  std::size_t channels = 1;
  for (std::size_t li = 0; li < n_layers; ++li) {
    const auto& spec = arch_.layers[li];
    const auto& in = cache.acts[li];
    auto& out = cache.acts[li + 1];
    switch (spec.kind) {
      case LayerKind::dropout: {
        out = in;
        if (mode == Mode::train && spec.rate > 0.0) {
          if (rng == nullptr) throw InputError("train-mode forward needs an RNG for dropout");
          const T keep_scale = static_cast<T>(1.0 / (1.0 - spec.rate));
          auto& mask = cache.masks[li];
          mask.resize(in.size());
          for (std::size_t i = 0; i < in.size(); ++i) {
            mask[i] = rng->uniform() < spec.rate ? T(0) : keep_scale;
            out[i] *= mask[i];
          }
        }
        break;
      }
      case LayerKind::conv: {
        const auto& kernel = params_[layer_param_[li]].value;
        const auto& bias = params_[layer_param_[li] + 1].value;
        const auto cout = static_cast<std::size_t>(spec.units);
        out.assign(h * w * cout, T(0));
        conv_forward(in.data(), h, w, channels, kernel.data(), bias.data(), cout, out.data());
        channels = cout;
        break;
      }
      case LayerKind::flatten: out = in; break;
      case LayerKind::dense: {
        const auto& kernel = params_[layer_param_[li]].value;
        const auto& bias = params_[layer_param_[li] + 1].value;
        const auto units = static_cast<std::size_t>(spec.units);
        out = bias;
        for (std::size_t d = 0; d < in.size(); ++d) {
          if (in[d] == T(0)) continue;
          axpy(in[d], kernel.data() + d * units, out.data(), units);
        }
        if (!spec.softmax)
          for (auto& v : out) v = std::max(v, T(0));
        break;
      }
    }
  }

  const auto& logits = cache.acts.back();
  const T peak = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - peak);
    sum += probs[k];
  }
  for (std::size_t k = 0; k < logits.size(); ++k) probs[k] /= sum;
}

template <class T>
ForwardResult<T> BasicNetwork<T>::forward(const BasicTensor<T>& batch, Mode mode, Rng* rng) const {
  check_batch(batch);
  const std::size_t n = batch.dims[0];
  const std::size_t n_out = layer_shape_.back()[2];
  const std::size_t stride = plan_.input.pixels();
  ForwardResult<T> res;
  res.probs = BasicTensor<T>({n, n_out});
  res.cache.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    forward_sample(batch.data.data() + i * stride, mode, rng, res.cache[i], res.probs.data.data() + i * n_out);
  return res;
}

template <class T>
BasicTensor<T> BasicNetwork<T>::predict_probs(const BasicTensor<T>& batch) const {
  check_batch(batch);
  const std::size_t n = batch.dims[0];
  const std::size_t n_out = layer_shape_.back()[2];
  const std::size_t stride = plan_.input.pixels();
  BasicTensor<T> probs({n, n_out});
  SampleCache<T> cache;
  for (std::size_t i = 0; i < n; ++i)
    forward_sample(batch.data.data() + i * stride, Mode::infer, nullptr, cache, probs.data.data() + i * n_out);
  return probs;
}

template <class T>
LossResult<T> BasicNetwork<T>::loss_and_grads(const BasicTensor<T>& batch, std::span<const int> labels, Mode mode,
                                              Rng* rng) const {
  check_batch(batch);
  const std::size_t n = batch.dims[0];
  const std::size_t n_out = layer_shape_.back()[2];
  if (labels.size() != n) throw ShapeError("label count does not match batch size");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= n_out) throw InputError("invalid label " + std::to_string(y));

  LossResult<T> res;
  res.grads.resize(params_.size());
  for (std::size_t p = 0; p < params_.size(); ++p) res.grads[p].assign(params_[p].value.size(), T(0));
  res.probs = BasicTensor<T>({n, n_out});

  // The first parameterised layer never needs an input gradient.
  std::size_t first_param_layer = 0;
  while (first_param_layer < arch_.layers.size() && layer_param_[first_param_layer] < 0) ++first_param_layer;

  std::vector<std::vector<T>> kernel_t(arch_.layers.size());
  {
    std::size_t channels = 1;
    for (std::size_t li = 0; li < arch_.layers.size(); ++li) {
      if (arch_.layers[li].kind != LayerKind::conv) continue;
      const auto cout = static_cast<std::size_t>(arch_.layers[li].units);
      if (li != first_param_layer) kernel_t[li] = transpose_kernel(params_[layer_param_[li]].value, channels, cout);
      channels = cout;
    }
  }

  const std::size_t stride = plan_.input.pixels();
  const std::size_t h = plan_.input.height, w = plan_.input.width;
  const T inv_n = T(1) / static_cast<T>(n);
  double loss = 0.0;
  SampleCache<T> cache;
  std::vector<T> g, gin;
  for (std::size_t i = 0; i < n; ++i) {
    T* probs = res.probs.data.data() + i * n_out;
    forward_sample(batch.data.data() + i * stride, mode, rng, cache, probs);

    const auto& logits = cache.acts.back();
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (T z : logits) sum += std::exp(static_cast<double>(z) - peak);
    loss += std::log(sum) + peak - static_cast<double>(logits[labels[i]]);

    g.assign(probs, probs + n_out);
    g[labels[i]] -= T(1);
    for (auto& v : g) v *= inv_n;

    for (std::size_t li = arch_.layers.size(); li-- > first_param_layer;) {
      const auto& spec = arch_.layers[li];
      const auto& in = cache.acts[li];
      const auto& out = cache.acts[li + 1];
      const bool need_input_grad = li > first_param_layer;
      switch (spec.kind) {
        case LayerKind::dropout: {
          const auto& mask = cache.masks[li];
          if (!mask.empty())
            for (std::size_t k = 0; k < g.size(); ++k) g[k] *= mask[k];
          break;
        }
        case LayerKind::flatten: break;
        case LayerKind::dense: {
          const auto units = static_cast<std::size_t>(spec.units);
          if (!spec.softmax)
            for (std::size_t k = 0; k < units; ++k)
              if (!(out[k] > T(0))) g[k] = T(0);
          const int pi = layer_param_[li];
          auto& dk = res.grads[pi];
          auto& db = res.grads[pi + 1];
          for (std::size_t k = 0; k < units; ++k) db[k] += g[k];
          for (std::size_t d = 0; d < in.size(); ++d)
            if (in[d] != T(0)) axpy(in[d], g.data(), dk.data() + d * units, units);
          if (need_input_grad) {
            const auto& kernel = params_[pi].value;
            gin.resize(in.size());
            for (std::size_t d = 0; d < in.size(); ++d) gin[d] = dot(kernel.data() + d * units, g.data(), units);
            g.swap(gin);
          }
          break;
        }
        case LayerKind::conv: {
          const auto cout = static_cast<std::size_t>(spec.units);
          const std::size_t cin = in.size() / (h * w);
          for (std::size_t k = 0; k < out.size(); ++k)
            if (!(out[k] > T(0))) g[k] = T(0);
          const int pi = layer_param_[li];
          T* gin_ptr = nullptr;
          if (need_input_grad) {
            gin.assign(in.size(), T(0));
            gin_ptr = gin.data();
          }
          conv_backward(in.data(), h, w, cin, kernel_t[li].data(), cout, g.data(), res.grads[pi].data(),
                        res.grads[pi + 1].data(), gin_ptr);
          if (need_input_grad) g.swap(gin);
          break;
        }
      }
    }
  }
  res.loss = loss / static_cast<double>(n);
  return res;
}

template <class T>
void BasicNetwork<T>::apply_max_norm(double c) {
  for (auto& p : params_)
    if (p.shape.max_norm) maxnorm_project<T>(std::span<T>(p.value), p.shape.dims.back(), c);
}

Network build_network(const InputDims& input, Rng& rng) { return Network(input, Architecture::table1(), rng); }

// ---------------------------------------------------------------------------
// Optimiser

template <class T>
OptimizerState<T> OptimizerState<T>::for_params(const std::vector<Param<T>>& params, double lr, double rho,
                                                double eps) {
  OptimizerState s;
  s.lr = lr;
  s.rho = rho;
  s.eps = eps;
  for (const auto& p : params) s.v.emplace_back(p.value.size(), T(0));
  return s;
}

template <class T>
void rmsprop_step(std::vector<Param<T>>& params, const std::vector<std::vector<T>>& grads, OptimizerState<T>& state) {
  if (grads.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("rmsprop_step: parameter/gradient/state count mismatch");
  const T rho = static_cast<T>(state.rho);
  const T one_minus_rho = static_cast<T>(1.0 - state.rho);
  const T lr = static_cast<T>(state.lr);
  const T eps = static_cast<T>(state.eps);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& theta = params[p].value;
    auto& v = state.v[p];
    const auto& g = grads[p];
    if (g.size() != theta.size() || v.size() != theta.size())
      throw ShapeError("rmsprop_step: shape mismatch for " + params[p].shape.name);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = rho * v[i] + one_minus_rho * g[i] * g[i];
      theta[i] -= lr * g[i] / (std::sqrt(v[i]) + eps);
    }
  }
  ++state.step;
}

template <class T>
BasicTensor<T> stack_inputs(const std::vector<const std::vector<double>*>& inputs, const InputDims& dims) {
  const std::size_t px = dims.pixels();
  BasicTensor<T> batch({inputs.size(), dims.height, dims.width, 1});
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i]->size() != px)
      throw ShapeError("input of " + std::to_string(inputs[i]->size()) + " values does not match " +
                       std::to_string(dims.height) + "x" + std::to_string(dims.width));
    std::transform(inputs[i]->begin(), inputs[i]->end(), batch.data.begin() + static_cast<std::ptrdiff_t>(i * px),
                   [](double v) { return static_cast<T>(v); });
  }
  return batch;
}

int argmax_row(std::span<const float> row) {
  int best = 0;
  for (std::size_t k = 1; k < row.size(); ++k)
    if (row[k] > row[best]) best = static_cast<int>(k);
  return best;
}

#define TFOC_INSTANTIATE(T)                                                                                       \
  template class BasicNetwork<T>;                                                                                 \
  template BasicTensor<T> he_uniform_init<T>(const std::vector<std::size_t>&, std::size_t, Rng&);                \
  template void maxnorm_project<T>(std::span<T>, std::size_t, double);                                            \
  template struct OptimizerState<T>;                                                                              \
  template void rmsprop_step<T>(std::vector<Param<T>>&, const std::vector<std::vector<T>>&, OptimizerState<T>&); \
  template BasicTensor<T> stack_inputs<T>(const std::vector<const std::vector<double>*>&, const InputDims&);

TFOC_INSTANTIATE(float)
TFOC_INSTANTIATE(double)

#undef TFOC_INSTANTIATE

}  // namespace tfoc

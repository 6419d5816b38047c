#pragma once

// The TFOC convolutional classifier:
//
//   dropout 0.2
//   conv 3x3x32, conv 3x3x32          ('same' padding, stride 1, ReLU)
//   dropout 0.2
//   conv 3x3x64, conv 3x3x64
//   dropout 0.4
//   conv 3x3x128, conv 3x3x128
//   dropout 0.4
//   flatten
//   dense 256, ReLU
//   dropout 0.4
//   dense 2, softmax
//
// There is no pooling, so the flatten width is F * W * 128. Conv kernels and
// the 256-unit dense kernel are MaxNorm(3)-constrained; every kernel is
// He-uniform initialised and every bias starts at zero.
//
// Activations are stored NHWC. Conv kernels are [3][3][in][out], dense
// kernels [in][out]. All reductions run in a fixed order, so results are
// bit-reproducible for a given build.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tfoc/random.hpp"
#include "tfoc/tensor.hpp"

namespace tfoc {

enum class LayerKind { dropout, conv, flatten, dense };

struct LayerSpec {
  LayerKind kind;
  double rate{0.0};   // dropout
  int units{0};       // conv filters or dense units
  bool softmax{false};  // dense output layer
  bool max_norm{false};

  std::string describe() const;
};

struct Architecture {
  std::vector<LayerSpec> layers;

  // The layer stack above.
  static Architecture table1();
  // Same stack with custom widths, for reduced test networks.
  static Architecture scaled(int conv_a, int conv_b, int conv_c, int dense_units);

  std::vector<std::string> describe() const;
};

// Spatial input shape (F, W, 1).
struct InputDims {
  std::size_t height{0};
  std::size_t width{0};
  std::size_t depth{1};

  bool operator==(const InputDims&) const = default;
  std::size_t pixels() const { return height * width; }
};

struct ParamShape {
  std::string name;
  std::vector<std::size_t> dims;
  bool max_norm{false};
  std::size_t fan_in{0};

  std::size_t size() const { return BasicTensor<float>::element_count(dims); }
};

struct NetworkPlan {
  InputDims input;
  std::vector<ParamShape> params;
  std::size_t flatten_size{0};
  // Shape (H, W, C) after the last conv layer.
  std::vector<std::size_t> conv_output;

  std::size_t parameter_count() const;
};

// Parameter shapes without allocating anything. Throws ShapeError when the
// spatial input is smaller than the 3x3 kernel.
NetworkPlan plan_network(const InputDims& input, const Architecture& arch = Architecture::table1());

// i.i.d. uniform on [-sqrt(6/fan_in), +sqrt(6/fan_in)].
template <class T>
BasicTensor<T> he_uniform_init(const std::vector<std::size_t>& dims, std::size_t fan_in, Rng& rng);

// Per-output-unit L2 projection onto the ball of radius c. The unit axis is
// the last dimension; each unit's incoming weights are the remaining ones.
template <class T>
void maxnorm_project(std::span<T> weights, std::size_t units, double c = 3.0);

template <class T>
BasicTensor<T> maxnorm_project(const BasicTensor<T>& weights, double c = 3.0) {
  BasicTensor<T> out = weights;
  maxnorm_project<T>(std::span<T>(out.data), out.dims.back(), c);
  return out;
}

enum class Mode { train, infer };

template <class T>
struct Param {
  ParamShape shape;
  std::vector<T> value;
};

// Per-sample intermediate values needed by backprop.
template <class T>
struct SampleCache {
  // Output of every layer; acts[0] is the network input.
  std::vector<std::vector<T>> acts;
  // Dropout multipliers (0 or 1/keep) per dropout layer, empty in infer mode.
  std::vector<std::vector<T>> masks;
};

template <class T>
struct ForwardResult {
  BasicTensor<T> probs;  // N x 2
  std::vector<SampleCache<T>> cache;
};

template <class T>
struct LossResult {
  double loss{0.0};
  BasicTensor<T> probs;
  std::vector<std::vector<T>> grads;  // aligned with params()
};

template <class T>
class BasicNetwork {
 public:
  BasicNetwork() = default;
  // He-uniform kernels, zero biases.
  BasicNetwork(const InputDims& input, const Architecture& arch, Rng& rng);
  // All parameters zero.
  static BasicNetwork zeros(const InputDims& input, const Architecture& arch = Architecture::table1());

  const InputDims& input_dims() const { return plan_.input; }
  const Architecture& architecture() const { return arch_; }
  const NetworkPlan& plan() const { return plan_; }

  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }
  std::size_t parameter_count() const { return plan_.parameter_count(); }

  // batch is N x H x W x 1. `rng` drives dropout and may be null in infer mode.
  ForwardResult<T> forward(const BasicTensor<T>& batch, Mode mode, Rng* rng) const;

  // Infer-mode probabilities (N x 2) without retaining per-sample caches.
  BasicTensor<T> predict_probs(const BasicTensor<T>& batch) const;

  // Mean sparse categorical cross-entropy and its gradient. Dropout masks are
  // drawn in train mode; infer mode gives the dropout-free objective.
  LossResult<T> loss_and_grads(const BasicTensor<T>& batch, std::span<const int> labels, Mode mode,
                               Rng* rng) const;

  // Projects every MaxNorm-constrained kernel.
  void apply_max_norm(double c = 3.0);

 private:
  void check_batch(const BasicTensor<T>& batch) const;
  void forward_sample(const T* input, Mode mode, Rng* rng, SampleCache<T>& cache, T* probs) const;

  Architecture arch_;
  NetworkPlan plan_;
  std::vector<Param<T>> params_;
  // Index into params_ of each layer's kernel, or -1.
  std::vector<int> layer_param_;
  // Spatial shape (H, W, C) or (1, 1, D) of each layer's output.
  std::vector<std::array<std::size_t, 3>> layer_shape_;
};

using Network = BasicNetwork<float>;

// Builds the default (table1) network for an (F, W, 1) input.
Network build_network(const InputDims& input, Rng& rng);

template <class T>
struct OptimizerState {
  std::vector<std::vector<T>> v;  // squared-gradient accumulators
  uint64_t step{0};
  double lr{0.001};
  double rho{0.9};
  double eps{1e-7};

  static OptimizerState for_params(const std::vector<Param<T>>& params, double lr, double rho, double eps);
};

// v <- rho v + (1 - rho) g^2 ;  theta <- theta - lr g / (sqrt(v) + eps)
template <class T>
void rmsprop_step(std::vector<Param<T>>& params, const std::vector<std::vector<T>>& grads, OptimizerState<T>& state);

// Stacks per-trial (F x W) inputs stored row-major into an N x F x W x 1 batch.
template <class T>
BasicTensor<T> stack_inputs(const std::vector<const std::vector<double>*>& inputs, const InputDims& dims);

// Lowest index wins ties.
int argmax_row(std::span<const float> row);

}  // namespace tfoc

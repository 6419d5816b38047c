#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tfoc/network.hpp"

namespace tfoc {

// Identity of one trial within a dataset.
struct TrialId {
  std::string subject_id;
  std::size_t trial_index{0};  // position in Dataset::trials

  auto operator<=>(const TrialId&) const = default;
  std::string to_string() const { return subject_id + "#" + std::to_string(trial_index); }
};

// One training or validation example: a precomputed (F x W) input.
struct Example {
  TrialId id;
  const std::vector<double>* input{nullptr};
  int label{0};
};

struct Batch {
  std::vector<std::size_t> members;  // indices into the example list
  std::vector<TrialId> provenance;
};

// One epoch of per-subject balanced batches. Subjects are visited in sorted
// id order and every batch holds exactly per_subject trials of each, drawn
// without replacement. The epoch has floor(min_s n_s / per_subject) batches.
std::vector<Batch> balanced_batches(std::span<const Example> examples, int per_subject, uint64_t seed);

// Uniform shuffle chunked into batch_size pieces; the last chunk may be short.
std::vector<Batch> unbalanced_batches(std::span<const Example> examples, int batch_size, uint64_t seed);

// Inputs (N x F x W x 1) and labels of a batch.
template <class T>
struct BatchData {
  BasicTensor<T> inputs;
  std::vector<int> labels;
};

template <class T>
BatchData<T> materialize(std::span<const Example> examples, std::span<const std::size_t> members,
                         const InputDims& dims);

}  // namespace tfoc

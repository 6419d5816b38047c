#include "tfoc/batching.hpp"

#include <algorithm>
#include <map>

#include "tfoc/random.hpp"

namespace tfoc {

std::vector<Batch> balanced_batches(std::span<const Example> examples, int per_subject, uint64_t seed) {
  if (per_subject < 1) throw BatchingError("per_subject must be >= 1");
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < examples.size(); ++i) by_subject[examples[i].id.subject_id].push_back(i);
  if (by_subject.empty()) throw BatchingError("no training examples");

  const auto ps = static_cast<std::size_t>(per_subject);
  std::size_t n_batches = SIZE_MAX;
  for (const auto& [subject, idx] : by_subject) {
    if (idx.size() < ps)
      throw BatchingError("subject " + subject + " has " + std::to_string(idx.size()) + " trials, fewer than per_subject=" +
                          std::to_string(per_subject));
    n_batches = std::min(n_batches, idx.size() / ps);
  }

  Rng rng(seed);
  for (auto& [subject, idx] : by_subject) rng.shuffle(std::span<std::size_t>(idx));

  std::vector<Batch> out(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    auto& batch = out[b];
    batch.members.reserve(by_subject.size() * ps);
    for (const auto& [subject, idx] : by_subject)
      for (std::size_t k = 0; k < ps; ++k) batch.members.push_back(idx[b * ps + k]);
    for (std::size_t m : batch.members) batch.provenance.push_back(examples[m].id);
  }
  return out;
}

std::vector<Batch> unbalanced_batches(std::span<const Example> examples, int batch_size, uint64_t seed) {
  if (batch_size < 1) throw BatchingError("batch_size must be >= 1");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  const auto bs = static_cast<std::size_t>(batch_size);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += bs) {
    Batch batch;
    const std::size_t end = std::min(order.size(), start + bs);
    batch.members.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t m : batch.members) batch.provenance.push_back(examples[m].id);
    out.push_back(std::move(batch));
  }
  return out;
}

template <class T>
BatchData<T> materialize(std::span<const Example> examples, std::span<const std::size_t> members,
                         const InputDims& dims) {
  std::vector<const std::vector<double>*> inputs;
  BatchData<T> out;
  inputs.reserve(members.size());
  out.labels.reserve(members.size());
  for (std::size_t m : members) {
    if (m >= examples.size()) throw InputError("batch member out of range");
    inputs.push_back(examples[m].input);
    out.labels.push_back(examples[m].label);
  }
  out.inputs = stack_inputs<T>(inputs, dims);
  return out;
}

template BatchData<float> materialize<float>(std::span<const Example>, std::span<const std::size_t>,
                                             const InputDims&);
template BatchData<double> materialize<double>(std::span<const Example>, std::span<const std::size_t>,
                                               const InputDims&);

}  // namespace tfoc

#include <map>
#include <set>

#include "doctest.h"
#include "tfoc/batching.hpp"

using namespace tfoc;

namespace {

struct ExampleSet {
  std::vector<std::vector<double>> inputs;
  std::vector<Example> examples;
};

// counts[s] trials for subject "S<s>", each input a 1-pixel-per-row ramp.
ExampleSet make_examples(const std::vector<std::size_t>& counts, std::size_t pixels = 4) {
  ExampleSet set;
  std::size_t total = 0;
  for (auto c : counts) total += c;
  set.inputs.reserve(total);
  std::size_t index = 0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    for (std::size_t t = 0; t < counts[s]; ++t, ++index) {
      set.inputs.emplace_back(pixels, static_cast<double>(index));
      set.examples.push_back({TrialId{"S" + std::to_string(s), index}, &set.inputs.back(), static_cast<int>(t % 2)});
    }
  }
  return set;
}

std::map<std::string, int> per_subject_counts(const Batch& b) {
  std::map<std::string, int> counts;
  for (const auto& id : b.provenance) ++counts[id.subject_id];
  return counts;
}

}  // namespace

TEST_SUITE("balanced_batches") {
  TEST_CASE("8 subjects, per_subject 4: batches of 32 with 4 per subject, no duplicates") {
    const auto set = make_examples(std::vector<std::size_t>(8, 50));
    const auto batches = balanced_batches(set.examples, 4, 3);
    CHECK(batches.size() == 12);
    std::set<TrialId> seen;
    for (const auto& b : batches) {
      CHECK(b.members.size() == 32);
      const auto counts = per_subject_counts(b);
      CHECK(counts.size() == 8);
      for (const auto& [subject, n] : counts) CHECK(n == 4);
      for (const auto& id : b.provenance) CHECK(seen.insert(id).second);
    }
  }

  TEST_CASE("4 subjects with 200 trials: 50 batches of 16") {
    const auto set = make_examples({200, 200, 200, 200});
    const auto batches = balanced_batches(set.examples, 4, 1);
    CHECK(batches.size() == 50);
    for (const auto& b : batches) CHECK(b.members.size() == 16);
  }

  TEST_CASE("uneven subjects: epoch length follows the smallest, remainder dropped") {
    const auto set = make_examples({20, 23, 21});
    const auto batches = balanced_batches(set.examples, 4, 9);
    CHECK(batches.size() == 5);
    std::map<std::string, int> used;
    for (const auto& b : batches)
      for (const auto& [s, n] : per_subject_counts(b)) used[s] += n;
    CHECK(used["S0"] == 20);
    CHECK(23 - used["S1"] == 3);
    CHECK(21 - used["S2"] == 1);
  }

  TEST_CASE("provenance matches members") {
    const auto set = make_examples({9, 9});
    for (const auto& b : balanced_batches(set.examples, 2, 4)) {
      REQUIRE(b.provenance.size() == b.members.size());
      for (std::size_t i = 0; i < b.members.size(); ++i) CHECK(b.provenance[i] == set.examples[b.members[i]].id);
    }
  }

  TEST_CASE("deterministic per seed, reshuffled across seeds") {
    const auto set = make_examples({40, 40, 40});
    const auto a = balanced_batches(set.examples, 4, 7);
    const auto b = balanced_batches(set.examples, 4, 7);
    const auto c = balanced_batches(set.examples, 4, 8);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      same = same && a[i].members == b[i].members;
      differs = differs || a[i].members != c[i].members;
    }
    CHECK(same);
    CHECK(differs);
  }

  TEST_CASE("a subject with fewer than per_subject trials") {
    const auto set = make_examples({10, 3});
    CHECK_THROWS_AS(balanced_batches(set.examples, 4, 1), BatchingError);
    CHECK_THROWS_AS(balanced_batches(set.examples, 0, 1), BatchingError);
    CHECK_THROWS_AS(balanced_batches({}, 4, 1), BatchingError);
  }
}

TEST_SUITE("unbalanced_batches") {
  TEST_CASE("100 trials, batch 32: 32, 32, 32, 4 covering every trial once") {
    const auto set = make_examples({60, 40});
    const auto batches = unbalanced_batches(set.examples, 32, 5);
    REQUIRE(batches.size() == 4);
    CHECK(batches[0].members.size() == 32);
    CHECK(batches[1].members.size() == 32);
    CHECK(batches[2].members.size() == 32);
    CHECK(batches[3].members.size() == 4);
    std::set<std::size_t> all;
    for (const auto& b : batches) all.insert(b.members.begin(), b.members.end());
    CHECK(all.size() == 100);
  }

  TEST_CASE("seed determinism") {
    const auto set = make_examples({50, 50});
    const auto a = unbalanced_batches(set.examples, 32, 11);
    const auto b = unbalanced_batches(set.examples, 32, 11);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].members == b[i].members);
  }

  TEST_CASE("batch 1 gives singletons") {
    const auto set = make_examples({50, 50});
    const auto batches = unbalanced_batches(set.examples, 1, 2);
    CHECK(batches.size() == 100);
    for (const auto& b : batches) CHECK(b.members.size() == 1);
  }

  TEST_CASE("batch size 0") {
    const auto set = make_examples({5});
    CHECK_THROWS_AS(unbalanced_batches(set.examples, 0, 1), BatchingError);
  }
}

TEST_CASE("materialize stacks inputs and labels in member order") {
  const auto set = make_examples({3, 3}, 6);
  const std::vector<std::size_t> members = {4, 0, 5};
  const auto data = materialize<float>(set.examples, members, InputDims{2, 3, 1});
  CHECK(data.inputs.dims == std::vector<std::size_t>{3, 2, 3, 1});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(data.labels[i] == set.examples[members[i]].label);
    for (std::size_t k = 0; k < 6; ++k) CHECK(data.inputs.data[i * 6 + k] == static_cast<float>(members[i]));
  }
  const std::vector<std::size_t> bad = {6};
  CHECK_THROWS_AS(materialize<float>(set.examples, bad, InputDims{2, 3, 1}), InputError);
}

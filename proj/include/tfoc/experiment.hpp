#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tfoc/checkpoint.hpp"
#include "tfoc/config.hpp"
#include "tfoc/dataset.hpp"
#include "tfoc/report.hpp"
#include "tfoc/trainer.hpp"

namespace tfoc {

// A fold's classifier saw a trial of the held-out subject.
struct LeakageError : Error {
  using Error::Error;
};

// Wraps the first failure of a run with the fold that caused it.
struct FoldError : Error {
  FoldError(std::string subject, const std::string& what) : Error(what), subject_id(std::move(subject)) {}
  std::string subject_id;
};

struct FoldData {
  std::string held_out;
  InputDims dims;
  std::span<const Example> train;
  std::span<const Example> validation;
  std::span<const Example> test;
  TrainConfig train_cfg;  // seed already fold-specific
  nlohmann::json pipeline;
};

struct FoldOutcome {
  std::vector<int> predictions;  // aligned with FoldData::test
  // Every trial the classifier used for fitting or model selection.
  std::vector<TrialId> seen;
  std::optional<Checkpoint> checkpoint;
  std::vector<EpochRecord> history;
};

using FoldClassifier = std::function<FoldOutcome(const FoldData&)>;

// train_fold on the fold's data, then prediction with the best checkpoint.
FoldClassifier network_classifier(const Architecture& arch = Architecture::table1());

struct FoldResult {
  std::string held_out;
  std::size_t n_train{0};
  std::size_t n_validation{0};
  std::size_t n_test{0};
  double accuracy{0.0};
  int best_epoch{0};
  std::size_t epochs_run{0};
  std::vector<std::string> warnings;
};

struct LosoOptions {
  // Slice applied to every trial; none uses the whole trial.
  std::optional<dsp::SegmentSpec> segment;
  // Config column in the report; defaults to the segment id, else cfg.name.
  std::string label;
  // Defaults to network_classifier().
  FoldClassifier classifier;
  // Called once per finished fold, serialised across threads.
  std::function<void(const FoldResult&)> on_fold;
  // When set, each fold's best checkpoint is saved as <dir>/<label>_<subject>.tfoc.
  std::optional<std::filesystem::path> checkpoint_dir;
  // Held-out subjects to run; empty runs every fold. Unknown ids throw SplitError.
  std::vector<std::string> subjects;
  // Return each fold's best checkpoint in LosoRun::checkpoints.
  bool keep_checkpoints{false};
};

struct LosoRun {
  EvalReport report;
  std::vector<FoldResult> folds;  // subject order
  std::vector<Checkpoint> checkpoints;  // aligned with folds when kept
};

// seed XOR FNV-1a(subject id).
uint64_t fold_seed(uint64_t seed, const std::string& subject_id);

// Leave-one-subject-out evaluation. Folds run on cfg.threads worker threads;
// results are assembled in subject order, so output does not depend on the
// thread count.
LosoRun run_loso(const Dataset& ds, const ExperimentConfig& cfg, const LosoOptions& options = {});

// One LOSO run per segment; report columns follow `segments`.
LosoRun run_segment_analysis(const Dataset& ds, const ExperimentConfig& cfg, std::span<const dsp::SegmentId> segments,
                             const LosoOptions& options = {});

}  // namespace tfoc

#pragma once

// On-disk dataset format:
//
//   manifest.json   format_version, sampling_rate_hz, channels, trial_duration_s,
//                   subjects: [{id, data_file, labels_file, n_trials}]
//   <data_file>     16-byte header "EEGT" u8 version=1, u8 n_channels,
//                   u16 reserved, u32 n_trials, u32 n_samples, then float32
//                   samples in [trial][channel][sample] order (little-endian)
//   <labels_file>   one "trial_index,label" line per trial, label in {0,1}
//
// Subject entries may additionally carry "session_id", "channels" and
// "sampling_rate_hz" overrides; validate_dataset reports any that disagree
// with the global values. Several entries may share a subject id (sessions).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tfoc/errors.hpp"
#include "tfoc/trial.hpp"

namespace tfoc {

inline constexpr int kManifestVersion = 1;
inline constexpr uint8_t kTrialFileVersion = 1;

struct SubjectEntry {
  std::string id;
  std::string session_id{"1"};
  std::string data_file;
  std::string labels_file;
  std::size_t n_trials{0};
  std::optional<std::vector<std::string>> channels;
  std::optional<double> sampling_rate_hz;
};

struct DatasetManifest {
  int format_version{kManifestVersion};
  double sampling_rate_hz{0.0};
  std::vector<std::string> channels;
  double trial_duration_s{0.0};
  std::vector<SubjectEntry> subjects;

  std::string to_json_text() const;
  static DatasetManifest parse(const std::string& json_text);
};

struct Dataset {
  DatasetManifest manifest;
  // Ordered by manifest entry, then trial index within the entry.
  std::vector<TrialRecord> trials;

  // Distinct subject ids in manifest order.
  std::vector<std::string> subject_ids() const;
  std::vector<std::size_t> trials_of(const std::string& subject_id) const;
};

enum class LoadErrorKind {
  missing_file,
  manifest,
  magic,
  version,
  truncated,
  count_mismatch,
  label_mismatch,
  bad_label,
  channel_mismatch,
};

struct LoadError : Error {
  LoadError(LoadErrorKind k, const std::string& what) : Error(what), kind(k) {}
  LoadErrorKind kind;
};

Dataset load_dataset(const std::filesystem::path& dir);

// Writes manifest.json plus one data/labels file pair per manifest entry.
// Trials are matched to entries by (subject_id, session_id) in order; the
// entries' n_trials fields are rewritten from the trials.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);

// Builds a manifest with one entry per (subject, session) found in `trials`
// and default file names.
DatasetManifest manifest_for(const std::vector<TrialRecord>& trials, double trial_duration_s);

// Trial-file primitives, exposed for tooling and tests.
struct TrialFileHeader {
  uint8_t version{kTrialFileVersion};
  uint8_t n_channels{0};
  uint32_t n_trials{0};
  uint32_t n_samples{0};
};
std::vector<uint8_t> encode_trial_file(std::span<const TrialRecord* const> trials);

enum class IssueKind { sampling_rate, channels, sample_count, class_balance, non_finite, duration };

struct ValidationIssue {
  IssueKind kind;
  std::string subject_id;
  std::optional<std::size_t> trial_index;  // dataset-global index
  std::string message;
};

std::string to_string(IssueKind k);

// Empty iff fs is uniform, every subject has C3/Cz/C4 and the shared channel
// set, every trial has fs*duration samples, both classes occur per subject
// and all samples are finite.
std::vector<ValidationIssue> validate_dataset(const Dataset& ds);

struct LosoFold {
  std::string held_out;
  std::vector<std::string> train_subjects;
};

// One fold per subject, in subject order. Throws SplitError for < 2 subjects.
std::vector<LosoFold> loso_splits(const Dataset& ds);

struct SplitPair {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::string> warnings;
};

// Stratified holdout: per (subject, label) cell, ceil(frac * cell size)
// trials go to validation. Deterministic in `seed`. Requires 0 < frac < 0.5.
SplitPair holdout_validation(const Dataset& ds, std::span<const std::size_t> train_trials, double frac,
                             uint64_t seed);

}  // namespace tfoc

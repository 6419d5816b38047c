#include "tfoc/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "byte_io.hpp"
#include "json.hpp"
#include "tfoc/random.hpp"

namespace tfoc {

namespace fs = std::filesystem;
using nlohmann::json;
using byte_io::get_u32;
using byte_io::put_u16;
using byte_io::put_u32;

namespace {

constexpr std::size_t kHeaderBytes = 16;

std::vector<uint8_t> read_bytes(const fs::path& p) {
  std::vector<uint8_t> bytes;
  if (!byte_io::read_file(p, bytes)) throw LoadError(LoadErrorKind::missing_file, "cannot open " + p.string());
  return bytes;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw LoadError(LoadErrorKind::missing_file, "cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Label> parse_labels(const std::string& text, const fs::path& p) {
  std::vector<Label> labels;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw LoadError(LoadErrorKind::bad_label, p.string() + ":" + std::to_string(lineno) + ": expected index,label");
    long idx = -1, lab = -1;
    try {
      std::size_t used = 0;
      idx = std::stol(line.substr(0, comma), &used);
      lab = std::stol(line.substr(comma + 1), &used);
    } catch (const std::exception&) {
      throw LoadError(LoadErrorKind::bad_label, p.string() + ":" + std::to_string(lineno) + ": malformed line");
    }
    if (idx != static_cast<long>(labels.size()))
      throw LoadError(LoadErrorKind::label_mismatch,
                      p.string() + ":" + std::to_string(lineno) + ": trial index must increase from 0 without gaps");
    if (lab != 0 && lab != 1)
      throw LoadError(LoadErrorKind::bad_label,
                      p.string() + ":" + std::to_string(lineno) + ": label must be 0 (left) or 1 (right)");
    labels.push_back(static_cast<Label>(lab));
  }
  return labels;
}

template <class T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw LoadError(LoadErrorKind::manifest, std::string("manifest is missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw LoadError(LoadErrorKind::manifest, std::string("manifest key '") + key + "': " + e.what());
  }
}

std::string label_text(const std::vector<const TrialRecord*>& trials) {
  std::string out;
  for (std::size_t i = 0; i < trials.size(); ++i)
    out += std::to_string(i) + "," + std::to_string(static_cast<int>(trials[i]->label)) + "\n";
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

std::string DatasetManifest::to_json_text() const {
  json j;
  j["format_version"] = format_version;
  j["sampling_rate_hz"] = sampling_rate_hz;
  j["channels"] = channels;
  j["trial_duration_s"] = trial_duration_s;
  j["subjects"] = json::array();
  for (const auto& s : subjects) {
    json e;
    e["id"] = s.id;
    e["session_id"] = s.session_id;
    e["data_file"] = s.data_file;
    e["labels_file"] = s.labels_file;
    e["n_trials"] = s.n_trials;
    if (s.channels) e["channels"] = *s.channels;
    if (s.sampling_rate_hz) e["sampling_rate_hz"] = *s.sampling_rate_hz;
    j["subjects"].push_back(e);
  }
  return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw LoadError(LoadErrorKind::manifest, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw LoadError(LoadErrorKind::manifest, "manifest must be a JSON object");
  DatasetManifest m;
  m.format_version = require<int>(j, "format_version");
  if (m.format_version != kManifestVersion)
    throw LoadError(LoadErrorKind::version, "unsupported manifest format_version " + std::to_string(m.format_version));
  m.sampling_rate_hz = require<double>(j, "sampling_rate_hz");
  m.channels = require<std::vector<std::string>>(j, "channels");
  m.trial_duration_s = require<double>(j, "trial_duration_s");
  if (!(m.sampling_rate_hz > 0.0)) throw LoadError(LoadErrorKind::manifest, "sampling_rate_hz must be positive");
  if (!(m.trial_duration_s > 0.0)) throw LoadError(LoadErrorKind::manifest, "trial_duration_s must be positive");
  const auto subjects = require<json>(j, "subjects");
  if (!subjects.is_array()) throw LoadError(LoadErrorKind::manifest, "'subjects' must be an array");
  for (const auto& e : subjects) {
    SubjectEntry s;
    s.id = require<std::string>(e, "id");
    s.data_file = require<std::string>(e, "data_file");
    s.labels_file = require<std::string>(e, "labels_file");
    s.n_trials = require<std::size_t>(e, "n_trials");
    if (e.contains("session_id")) s.session_id = require<std::string>(e, "session_id");
    if (e.contains("channels")) s.channels = require<std::vector<std::string>>(e, "channels");
    if (e.contains("sampling_rate_hz")) s.sampling_rate_hz = require<double>(e, "sampling_rate_hz");
    m.subjects.push_back(std::move(s));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Dataset

std::vector<std::string> Dataset::subject_ids() const {
  std::vector<std::string> ids;
  for (const auto& s : manifest.subjects)
    if (std::find(ids.begin(), ids.end(), s.id) == ids.end()) ids.push_back(s.id);
  return ids;
}

std::vector<std::size_t> Dataset::trials_of(const std::string& subject_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (trials[i].subject_id == subject_id) out.push_back(i);
  return out;
}

std::vector<uint8_t> encode_trial_file(std::span<const TrialRecord* const> trials) {
  const std::size_t n_ch = trials.empty() ? 0 : trials.front()->n_channels();
  const std::size_t n_samp = trials.empty() ? 0 : trials.front()->n_samples();
  if (n_ch > 255) throw InputError("trial files hold at most 255 channels");
  std::vector<uint8_t> out;
  out.reserve(kHeaderBytes + 4 * trials.size() * n_ch * n_samp);
  for (char c : {'E', 'E', 'G', 'T'}) out.push_back(static_cast<uint8_t>(c));
  out.push_back(kTrialFileVersion);
  out.push_back(static_cast<uint8_t>(n_ch));
  put_u16(out, 0);
  put_u32(out, static_cast<uint32_t>(trials.size()));
  put_u32(out, static_cast<uint32_t>(n_samp));
  for (const TrialRecord* t : trials) {
    if (t->n_channels() != n_ch || t->n_samples() != n_samp)
      throw InputError("all trials in a file must share channel and sample counts");
    for (const auto& ch : t->data)
      for (double v : ch) put_u32(out, std::bit_cast<uint32_t>(static_cast<float>(v)));
  }
  return out;
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path))
    throw LoadError(LoadErrorKind::missing_file, "no manifest.json in " + dir.string());

  Dataset ds;
  ds.manifest = DatasetManifest::parse(read_text(manifest_path));

  for (const auto& entry : ds.manifest.subjects) {
    const fs::path data_path = dir / entry.data_file;
    const fs::path labels_path = dir / entry.labels_file;
    const auto bytes = read_bytes(data_path);
    const auto labels = parse_labels(read_text(labels_path), labels_path);

    if (bytes.size() < kHeaderBytes)
      throw LoadError(LoadErrorKind::truncated, data_path.string() + ": shorter than the 16-byte header");
    if (std::memcmp(bytes.data(), "EEGT", 4) != 0)
      throw LoadError(LoadErrorKind::magic, data_path.string() + ": bad magic (expected EEGT)");
    if (bytes[4] != kTrialFileVersion)
      throw LoadError(LoadErrorKind::version, data_path.string() + ": unsupported version " + std::to_string(bytes[4]));
    const std::size_t n_ch = bytes[5];
    const std::size_t n_trials = get_u32(bytes.data() + 8);
    const std::size_t n_samp = get_u32(bytes.data() + 12);

    const auto& channels = entry.channels ? *entry.channels : ds.manifest.channels;
    if (n_ch != channels.size())
      throw LoadError(LoadErrorKind::channel_mismatch,
                      data_path.string() + ": file has " + std::to_string(n_ch) + " channels, manifest lists " +
                          std::to_string(channels.size()));
    if (n_trials != entry.n_trials)
      throw LoadError(LoadErrorKind::count_mismatch, data_path.string() + ": file has " + std::to_string(n_trials) +
                                                         " trials, manifest says " + std::to_string(entry.n_trials));
    const std::size_t expected = kHeaderBytes + 4 * n_trials * n_ch * n_samp;
    if (bytes.size() < expected)
      throw LoadError(LoadErrorKind::truncated, data_path.string() + ": truncated sample data");
    if (bytes.size() > expected)
      throw LoadError(LoadErrorKind::truncated, data_path.string() + ": trailing bytes after sample data");
    if (labels.size() != n_trials)
      throw LoadError(LoadErrorKind::label_mismatch, labels_path.string() + ": " + std::to_string(labels.size()) +
                                                         " labels for " + std::to_string(n_trials) + " trials");

    const double fs = entry.sampling_rate_hz.value_or(ds.manifest.sampling_rate_hz);
    const uint8_t* p = bytes.data() + kHeaderBytes;
    for (std::size_t t = 0; t < n_trials; ++t) {
      TrialRecord rec;
      rec.subject_id = entry.id;
      rec.session_id = entry.session_id;
      rec.channels = channels;
      rec.label = labels[t];
      rec.fs = fs;
      rec.data.assign(n_ch, std::vector<double>(n_samp));
      for (std::size_t c = 0; c < n_ch; ++c)
        for (std::size_t s = 0; s < n_samp; ++s, p += 4) rec.data[c][s] = std::bit_cast<float>(get_u32(p));
      ds.trials.push_back(std::move(rec));
    }
  }
  return ds;
}

DatasetManifest manifest_for(const std::vector<TrialRecord>& trials, double trial_duration_s) {
  DatasetManifest m;
  m.trial_duration_s = trial_duration_s;
  if (!trials.empty()) {
    m.sampling_rate_hz = trials.front().fs;
    m.channels = trials.front().channels;
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& t : trials) {
    if (!seen.insert({t.subject_id, t.session_id}).second) continue;
    SubjectEntry e;
    e.id = t.subject_id;
    e.session_id = t.session_id;
    const std::string stem = t.session_id == "1" ? t.subject_id : t.subject_id + "_" + t.session_id;
    e.data_file = stem + ".eegt";
    e.labels_file = stem + "_labels.csv";
    if (t.channels != m.channels) e.channels = t.channels;
    if (t.fs != m.sampling_rate_hz) e.sampling_rate_hz = t.fs;
    m.subjects.push_back(std::move(e));
  }
  return m;
}

void write_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  DatasetManifest manifest = ds.manifest;
  for (auto& entry : manifest.subjects) {
    std::vector<const TrialRecord*> mine;
    for (const auto& t : ds.trials)
      if (t.subject_id == entry.id && t.session_id == entry.session_id) mine.push_back(&t);
    entry.n_trials = mine.size();

    const auto bytes = encode_trial_file(mine);
    std::ofstream data(dir / entry.data_file, std::ios::binary);
    data.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    std::ofstream labels(dir / entry.labels_file);
    labels << label_text(mine);
    if (!data || !labels) throw Error("failed to write subject files for " + entry.id);
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.to_json_text();
  if (!out) throw Error("failed to write " + (dir / "manifest.json").string());
}

// ---------------------------------------------------------------------------
// Validation

std::string to_string(IssueKind k) {
  switch (k) {
    case IssueKind::sampling_rate: return "sampling_rate";
    case IssueKind::channels: return "channels";
    case IssueKind::sample_count: return "sample_count";
    case IssueKind::class_balance: return "class_balance";
    case IssueKind::non_finite: return "non_finite";
    case IssueKind::duration: return "duration";
  }
  return "?";
}

std::vector<ValidationIssue> validate_dataset(const Dataset& ds) {
  std::vector<ValidationIssue> issues;
  const auto& m = ds.manifest;
  static const std::vector<std::string> required = {"C3", "Cz", "C4"};

  for (const auto& entry : m.subjects) {
    const double fs = entry.sampling_rate_hz.value_or(m.sampling_rate_hz);
    if (fs != m.sampling_rate_hz)
      issues.push_back({IssueKind::sampling_rate, entry.id, std::nullopt,
                        "sampling rate " + std::to_string(fs) + " Hz differs from " +
                            std::to_string(m.sampling_rate_hz) + " Hz"});
    const auto& chans = entry.channels ? *entry.channels : m.channels;
    std::vector<std::string> missing;
    for (const auto& r : required)
      if (std::find(chans.begin(), chans.end(), r) == chans.end()) missing.push_back(r);
    if (!missing.empty()) {
      std::string list;
      for (const auto& s : missing) list += (list.empty() ? "" : ",") + s;
      issues.push_back({IssueKind::channels, entry.id, std::nullopt, "missing channel(s) " + list});
    } else if (chans != m.channels) {
      issues.push_back({IssueKind::channels, entry.id, std::nullopt, "channel set differs from the manifest"});
    }
  }

  const double expected_samples = m.sampling_rate_hz * m.trial_duration_s;
  if (std::abs(expected_samples - std::round(expected_samples)) > 1e-9)
    issues.push_back({IssueKind::duration, "", std::nullopt, "sampling_rate_hz * trial_duration_s is not an integer"});

  std::map<std::string, std::set<int>> classes;
  for (const auto& id : ds.subject_ids()) classes[id];
  for (std::size_t i = 0; i < ds.trials.size(); ++i) {
    const auto& t = ds.trials[i];
    classes[t.subject_id].insert(static_cast<int>(t.label));
    if (static_cast<double>(t.n_samples()) != std::round(expected_samples))
      issues.push_back({IssueKind::sample_count, t.subject_id, i,
                        "trial " + std::to_string(i) + " has " + std::to_string(t.n_samples()) + " samples, expected " +
                            std::to_string(static_cast<long long>(std::round(expected_samples)))});
    bool finite = true;
    for (const auto& ch : t.data)
      for (double v : ch) finite = finite && std::isfinite(v);
    if (!finite)
      issues.push_back({IssueKind::non_finite, t.subject_id, i, "trial " + std::to_string(i) + " has non-finite samples"});
  }
  for (const auto& [id, labels] : classes)
    if (labels.size() < 2)
      issues.push_back({IssueKind::class_balance, id, std::nullopt, "subject lacks trials of both classes"});
  return issues;
}

// ---------------------------------------------------------------------------
// Splits

std::vector<LosoFold> loso_splits(const Dataset& ds) {
  const auto ids = ds.subject_ids();
  if (ids.size() < 2) throw SplitError("leave-one-subject-out needs at least 2 subjects, got " + std::to_string(ids.size()));
  std::vector<LosoFold> folds;
  for (const auto& held : ids) {
    LosoFold f;
    f.held_out = held;
    for (const auto& id : ids)
      if (id != held) f.train_subjects.push_back(id);
    folds.push_back(std::move(f));
  }
  return folds;
}

SplitPair holdout_validation(const Dataset& ds, std::span<const std::size_t> train_trials, double frac,
                             uint64_t seed) {
  if (!(frac > 0.0 && frac < 0.5)) throw SplitError("validation fraction must lie in (0, 0.5)");

  // Cells keyed by (subject, label), subjects in first-appearance order.
  std::vector<std::string> subjects;
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> cells;
  for (std::size_t idx : train_trials) {
    const auto& t = ds.trials.at(idx);
    if (std::find(subjects.begin(), subjects.end(), t.subject_id) == subjects.end()) subjects.push_back(t.subject_id);
    cells[{t.subject_id, static_cast<int>(t.label)}].push_back(idx);
  }

  SplitPair out;
  Rng rng(seed);
  for (const auto& subject : subjects) {
    for (int label : {0, 1}) {
      auto it = cells.find({subject, label});
      if (it == cells.end() || it->second.empty()) {
        out.warnings.push_back("subject " + subject + " has no trials with label " + std::to_string(label) +
                               "; cell skipped");
        continue;
      }
      auto cell = it->second;
      rng.shuffle(std::span(cell));
      const auto n_val = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(cell.size()) - 1e-9));
      out.validation.insert(out.validation.end(), cell.begin(), cell.begin() + static_cast<std::ptrdiff_t>(n_val));
      out.train.insert(out.train.end(), cell.begin() + static_cast<std::ptrdiff_t>(n_val), cell.end());
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  return out;
}

}  // namespace tfoc

#include "tfoc/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tfoc/errors.hpp"

namespace tfoc {

namespace fs = std::filesystem;

namespace {

void append_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

std::string percent(double fraction) { return fmt::format("{:.2f}", 100.0 * fraction); }

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

}  // namespace

std::vector<std::string> EvalReport::configs() const {
  std::vector<std::string> out;
  for (const auto& r : rows) append_unique(out, r.config);
  return out;
}

std::vector<std::string> EvalReport::subjects() const {
  std::vector<std::string> out;
  for (const auto& r : rows) append_unique(out, r.subject_id);
  return out;
}

Summary EvalReport::summary(const std::string& config) const {
  std::vector<double> acc;
  for (const auto& r : rows)
    if (r.config == config) acc.push_back(r.accuracy);
  return {config, acc.size(), mean_of(acc), population_std(acc)};
}

std::vector<double> EvalReport::accuracies(const std::string& config, const std::vector<std::string>& subjects) const {
  std::vector<double> out;
  for (const auto& s : subjects) {
    const auto it = std::find_if(rows.begin(), rows.end(),
                                 [&](const ReportRow& r) { return r.config == config && r.subject_id == s; });
    if (it == rows.end()) throw InputError("no accuracy for subject " + s + " under config " + config);
    out.push_back(it->accuracy);
  }
  return out;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

std::string format_mean_std(double mean, double std) {
  return fmt::format("{:.2f} ±{:.2f}", 100.0 * mean, 100.0 * std);
}

std::string format_csv(const EvalReport& report) {
  std::string out = "subject,config,accuracy\n";
  for (const auto& r : report.rows) out += fmt::format("{},{},{}\n", r.subject_id, r.config, r.accuracy);
  return out;
}

std::string format_table(const EvalReport& report) {
  const auto configs = report.configs();
  const auto subjects = report.subjects();

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"subject"};
  header.insert(header.end(), configs.begin(), configs.end());
  cells.push_back(header);
  for (const auto& s : subjects) {
    std::vector<std::string> line = {s};
    for (const auto& c : configs) {
      const auto it = std::find_if(report.rows.begin(), report.rows.end(),
                                   [&](const ReportRow& r) { return r.config == c && r.subject_id == s; });
      line.push_back(it == report.rows.end() ? "-" : percent(it->accuracy));
    }
    cells.push_back(line);
  }
  std::vector<std::string> mean_line = {"mean"};
  for (const auto& c : configs) {
    const auto sum = report.summary(c);
    mean_line.push_back(format_mean_std(sum.mean, sum.std));
  }
  cells.push_back(mean_line);

  // Column widths in code points; the ± sign is two bytes in UTF-8.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], width(line[i]));

  std::string out;
  for (std::size_t li = 0; li < cells.size(); ++li) {
    const auto& line = cells[li];
    if (li + 1 == cells.size()) {
      std::size_t total = 0;
      for (auto w : widths) total += w + 2;
      out += std::string(total - 2, '-') + "\n";
    }
    for (std::size_t i = 0; i < line.size(); ++i) {
      const std::size_t pad = widths[i] - width(line[i]);
      if (i == 0)
        out += line[i] + std::string(pad, ' ');
      else
        out += "  " + std::string(pad, ' ') + line[i];
    }
    out += "\n";
  }

  if (!report.comparisons.empty()) {
    out += "\nWilcoxon signed-rank\n";
    for (const auto& c : report.comparisons)
      out += fmt::format("  {} vs {} ({}): n={} W={} p={}{}\n", c.config_a, c.config_b, to_string(c.alternative),
                         c.result.n_used, c.result.statistic, c.result.p_value,
                         c.result.exact ? "" : " (normal approx.)");
  }
  return out;
}

ReportFiles emit_report(const EvalReport& report, const fs::path& out_dir, const std::string& stem) {
  if (report.rows.empty()) throw InputError("emit_report: empty report");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  ReportFiles files{out_dir / (stem + ".csv"), out_dir / (stem + ".txt")};
  write_text(files.csv, format_csv(report));
  write_text(files.table, format_table(report));
  return files;
}

std::vector<ReportRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != "subject,config,accuracy")
        throw InputError("report CSV must start with 'subject,config,accuracy'");
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw InputError("report CSV line " + std::to_string(lineno) + ": expected 3 fields");
    ReportRow r{line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1), 0.0};
    try {
      std::size_t used = 0;
      const std::string acc = line.substr(c2 + 1);
      r.accuracy = std::stod(acc, &used);
      if (used != acc.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw InputError("report CSV line " + std::to_string(lineno) + ": bad accuracy");
    }
    if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0))
      throw InputError("report CSV line " + std::to_string(lineno) + ": accuracy outside [0, 1]");
    rows.push_back(std::move(r));
  }
  if (lineno == 0) throw InputError("report CSV is empty");
  return rows;
}

std::vector<ReportRow> read_report_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_report_csv(ss.str());
}

Comparison compare_configs(const EvalReport& report, const std::string& config_a, const std::string& config_b,
                           Alternative alt) {
  std::vector<std::string> subjects;
  for (const auto& r : report.rows)
    if (r.config == config_a) append_unique(subjects, r.subject_id);
  if (subjects.empty()) throw InputError("no rows for config " + config_a);
  const auto a = report.accuracies(config_a, subjects);
  const auto b = report.accuracies(config_b, subjects);
  return {config_a, config_b, alt, wilcoxon_signed_rank(a, b, alt)};
}

}  // namespace tfoc

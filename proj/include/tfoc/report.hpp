#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tfoc/wilcoxon.hpp"

namespace tfoc {

struct ReportRow {
  std::string subject_id;
  std::string config;  // config or segment id
  double accuracy{0.0};  // fraction in [0, 1]
};

struct Comparison {
  std::string config_a;
  std::string config_b;
  Alternative alternative{Alternative::greater};
  WilcoxonResult result;
};

struct Summary {
  std::string config;
  std::size_t n{0};
  double mean{0.0};  // fraction
  double std{0.0};   // population std, fraction
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::vector<Comparison> comparisons;

  // Config ids in order of first appearance.
  std::vector<std::string> configs() const;
  // Subject ids in order of first appearance.
  std::vector<std::string> subjects() const;
  Summary summary(const std::string& config) const;
  // Accuracies of `config` in the order of `subjects`; throws InputError if one is missing.
  std::vector<double> accuracies(const std::string& config, const std::vector<std::string>& subjects) const;
};

double mean_of(std::span<const double> v);
// Population standard deviation (divide by n).
double population_std(std::span<const double> v);

// "67.60 ±7.89" for fractions 0.676 and 0.0789.
std::string format_mean_std(double mean, double std);

std::string format_csv(const EvalReport& report);
// Subjects down, configs across, percent with 2 decimals; a final mean ±std
// row and any comparisons underneath.
std::string format_table(const EvalReport& report);

struct ReportFiles {
  std::filesystem::path csv;
  std::filesystem::path table;
};

// Writes <stem>.csv and <stem>.txt into out_dir (created if needed).
ReportFiles emit_report(const EvalReport& report, const std::filesystem::path& out_dir,
                        const std::string& stem = "report");

// Parses a CSV written by format_csv.
std::vector<ReportRow> parse_report_csv(const std::string& text);
std::vector<ReportRow> read_report_csv(const std::filesystem::path& path);

// Pairs two configs by subject and runs the signed-rank test on a - b.
Comparison compare_configs(const EvalReport& report, const std::string& config_a, const std::string& config_b,
                           Alternative alt);

}  // namespace tfoc

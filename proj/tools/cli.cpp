#include "cli.hpp"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>
#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <optional>

#include "tfoc/experiment.hpp"
#include "tfoc/features.hpp"
#include "tfoc/synthetic.hpp"
#include "tfoc/trainer.hpp"
#include "tfoc/wilcoxon.hpp"

namespace tfoc::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : Error {
  using Error::Error;
};

struct Options {
  std::string dataset;
  std::string config_path;
  std::string out;
  std::string holdout;
  std::string subject;
  std::string checkpoint;
  std::string csv_a;
  std::string csv_b;
  std::string config_a;
  std::string config_b;
  std::string alternative{"greater"};
  std::optional<uint64_t> seed;
  std::optional<int> threads;
  SyntheticSpec synth;
};

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto log = std::make_shared<spdlog::logger>("tfoc", sink);
  log->set_pattern("[%l] %v");
  const char* env = std::getenv("TFOC_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") log->set_level(spdlog::level::err);
  else if (level == "info") log->set_level(spdlog::level::info);
  else if (level == "debug") log->set_level(spdlog::level::debug);
  else throw UsageError("TFOC_LOG must be one of error, info, debug (got '" + level + "')");
  return log;
}

ExperimentConfig resolve_config(const Options& o) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    try {
      cfg = load_experiment_config(o.config_path);
    } catch (const IoError& e) {
      throw UsageError(e.what());
    } catch (const ConfigError& e) {
      throw UsageError(std::string("config ") + o.config_path + ": " + e.what());
    }
  }
  if (o.seed) cfg.seed = cfg.training.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

std::string echo(const ExperimentConfig& cfg) {
  return "config: " + to_json(cfg).dump(2) + "\nseed: " + std::to_string(cfg.seed) + "\n";
}

Dataset load_checked(const std::string& dir, spdlog::logger& log) {
  auto ds = load_dataset(dir);
  const auto issues = validate_dataset(ds);
  for (const auto& i : issues) log.error("{}: {}", to_string(i.kind), i.message);
  if (!issues.empty()) throw InputError(fmt::format("dataset {} has {} issues", dir, issues.size()));
  log.info("loaded {} trials of {} subjects from {}", ds.trials.size(), ds.subject_ids().size(), dir);
  return ds;
}

std::string fold_line(const FoldResult& r) {
  return fmt::format("fold {}: train={} validation={} test={} epochs={} best_epoch={} accuracy={:.4f}", r.held_out,
                     r.n_train, r.n_validation, r.n_test, r.epochs_run, r.best_epoch, r.accuracy);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

// Shared by loso and segments: runs, emits report files and a run log.
int run_experiment(const Options& o, bool segments, std::ostream& out, spdlog::logger& log) {
  const auto cfg = resolve_config(o);
  out << echo(cfg);
  const auto ds = load_checked(o.dataset, log);
  const fs::path dir = o.out;
  fs::create_directories(dir);

  std::string run_log = echo(cfg);
  LosoOptions opt;
  opt.checkpoint_dir = dir / "checkpoints";
  opt.on_fold = [&](const FoldResult& r) {
    for (const auto& w : r.warnings) log.warn("fold {}: {}", r.held_out, w);
    log.info("{}", fold_line(r));
  };
  const auto run = segments ? run_segment_analysis(ds, cfg, cfg.segments, opt) : run_loso(ds, cfg, opt);
  for (const auto& r : run.folds) run_log += fold_line(r) + "\n";

  const std::string stem = segments ? "segments" : "loso";
  const auto files = emit_report(run.report, dir, stem);
  const auto table = format_table(run.report);
  run_log += table;
  write_text(dir / (stem + ".log"), run_log);
  out << table;
  out << "wrote " << files.csv.string() << "\n";
  return kOk;
}

int cmd_validate(const Options& o, std::ostream& out, spdlog::logger&) {
  out << echo(resolve_config(o));
  const auto ds = load_dataset(o.dataset);
  const auto issues = validate_dataset(ds);
  for (const auto& i : issues) out << to_string(i.kind) << ": " << i.message << "\n";
  out << issues.size() << (issues.size() == 1 ? " issue" : " issues") << "\n";
  return issues.empty() ? kOk : kDataError;
}

int cmd_train(const Options& o, std::ostream& out, spdlog::logger& log) {
  const auto cfg = resolve_config(o);
  out << echo(cfg);
  const auto ds = load_checked(o.dataset, log);
  LosoOptions opt;
  opt.subjects = {o.holdout};
  opt.keep_checkpoints = true;
  opt.on_fold = [&](const FoldResult& r) { log.info("{}", fold_line(r)); };
  const auto run = run_loso(ds, cfg, opt);
  const fs::path path = o.out;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_checkpoint(run.checkpoints.front(), path);
  out << fold_line(run.folds.front()) << "\n";
  out << "wrote " << path.string() << "\n";
  return kOk;
}

int cmd_predict(const Options& o, std::ostream& out, spdlog::logger& log) {
  const auto ckpt = load_checkpoint(o.checkpoint);
  const auto pipeline = parse_pipeline_json(ckpt.pipeline);
  out << echo(pipeline.config);
  const auto ds = load_checked(o.dataset, log);
  if (ds.trials.front().fs != pipeline.fs)
    throw InputError(fmt::format("checkpoint expects {} Hz data, dataset has {} Hz", pipeline.fs, ds.trials.front().fs));
  const auto idx = ds.trials_of(o.subject);
  if (idx.empty()) throw SplitError("unknown subject " + o.subject);

  const auto features = compute_features(ds, pipeline.config, pipeline.segment);
  if (!(features.dims == ckpt.input))
    throw ShapeError(fmt::format("dataset yields {}x{} inputs, checkpoint expects {}x{}", features.dims.height,
                                 features.dims.width, ckpt.input.height, ckpt.input.width));
  std::vector<Example> examples;
  for (auto i : idx)
    examples.push_back({TrialId{o.subject, i}, &features.inputs[i], static_cast<int>(ds.trials[i].label)});
  const auto eval = evaluate(ckpt.network(), examples);

  std::string csv = "trial,label,prediction\n";
  for (std::size_t k = 0; k < examples.size(); ++k)
    csv += fmt::format("{},{},{}\n", examples[k].id.trial_index, examples[k].label, eval.predictions[k]);
  if (!o.out.empty()) write_text(o.out, csv);
  else out << csv;
  out << fmt::format("subject {}: accuracy={:.4f} ({} trials)\n", o.subject, eval.accuracy, examples.size());
  return kOk;
}

std::string pick_config(const std::vector<ReportRow>& rows, const std::string& requested, const std::string& file) {
  std::vector<std::string> configs;
  for (const auto& r : rows)
    if (std::find(configs.begin(), configs.end(), r.config) == configs.end()) configs.push_back(r.config);
  if (!requested.empty()) {
    if (std::find(configs.begin(), configs.end(), requested) == configs.end())
      throw InputError(file + " has no config " + requested);
    return requested;
  }
  if (configs.size() != 1) throw UsageError(file + " holds several configs; choose one with --config-a/--config-b");
  return configs.front();
}

int cmd_stats(const Options& o, std::ostream& out, spdlog::logger&) {
  out << echo(resolve_config(o));
  Alternative alt;
  try {
    alt = parse_alternative(o.alternative);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const auto rows_a = read_report_csv(o.csv_a);
  const auto rows_b = read_report_csv(o.csv_b);
  const auto a = pick_config(rows_a, o.config_a, o.csv_a);
  const auto b = pick_config(rows_b, o.config_b, o.csv_b);
  const std::string label_a = a == b ? a + " (A)" : a;
  const std::string label_b = a == b ? b + " (B)" : b;

  EvalReport report;
  for (const auto& r : rows_a)
    if (r.config == a) report.rows.push_back({r.subject_id, label_a, r.accuracy});
  for (const auto& r : rows_b)
    if (r.config == b) report.rows.push_back({r.subject_id, label_b, r.accuracy});
  const auto c = compare_configs(report, label_a, label_b, alt);
  const auto sa = report.summary(label_a);
  const auto sb = report.summary(label_b);
  out << fmt::format("{}: {}\n", label_a, format_mean_std(sa.mean, sa.std));
  out << fmt::format("{}: {}\n", label_b, format_mean_std(sb.mean, sb.std));
  out << fmt::format("Wilcoxon signed-rank {} vs {} ({}, {}): n={} W={} p={}\n", label_a, label_b, to_string(alt),
                     c.result.exact ? "exact" : "normal approximation", c.result.n_used, c.result.statistic,
                     c.result.p_value);
  return kOk;
}

int cmd_synth(const Options& o, std::ostream& out, spdlog::logger& log) {
  out << echo(resolve_config(o));
  SyntheticSpec spec = o.synth;
  if (o.seed) spec.seed = *o.seed;
  if (spec.n_subjects < 1 || spec.trials_per_class < 1 || spec.fs <= 0.0 || spec.duration_s <= 0.0)
    throw UsageError("synth: subjects, trials per class, rate and duration must be positive");
  const auto ds = make_synthetic_dataset(spec);
  write_dataset(ds, o.out);
  log.info("wrote {} trials to {}", ds.trials.size(), o.out);
  out << "wrote " << ds.trials.size() << " trials to " << o.out << "\n";
  return kOk;
}

// Problems with the user's data or files map to 2; everything else is a
// runtime failure.
int exit_code_for(const std::exception& e) {
  const bool data = dynamic_cast<const LoadError*>(&e) || dynamic_cast<const InputError*>(&e) ||
                    dynamic_cast<const SplitError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
                    dynamic_cast<const RangeError*>(&e) || dynamic_cast<const LengthError*>(&e) ||
                    dynamic_cast<const CheckpointError*>(&e);
  return data ? kDataError : kRuntimeError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-frequency CNN pipeline for two-class motor-imagery EEG", "tfoc"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option_function<uint64_t>("--seed", [&](const uint64_t& v) { o.seed = v; }, "Override the config seed");
    sub->add_option_function<int>("--threads", [&](const int& v) { o.threads = v; }, "Folds run in parallel");
  };

  auto* validate = app.add_subcommand("validate", "Check a dataset directory");
  validate->add_option("dataset", o.dataset)->required();
  add_common(validate);

  auto* loso = app.add_subcommand("loso", "Leave-one-subject-out evaluation");
  loso->add_option("dataset", o.dataset)->required();
  add_common(loso);
  loso->get_option("--config")->required();
  loso->add_option("--out", o.out, "Output directory")->required();

  auto* segments = app.add_subcommand("segments", "LOSO evaluation per trial segment");
  segments->add_option("dataset", o.dataset)->required();
  add_common(segments);
  segments->get_option("--config")->required();
  segments->add_option("--out", o.out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train on all subjects but one and save the best checkpoint");
  train->add_option("dataset", o.dataset)->required();
  add_common(train);
  train->get_option("--config")->required();
  train->add_option("--holdout", o.holdout, "Held-out subject id")->required();
  train->add_option("--out", o.out, "Checkpoint file")->required();

  auto* predict = app.add_subcommand("predict", "Classify one subject's trials with a checkpoint");
  predict->add_option("checkpoint", o.checkpoint)->required()->check(CLI::ExistingFile);
  predict->add_option("dataset", o.dataset)->required();
  predict->add_option("--subject", o.subject, "Subject id")->required();
  predict->add_option("--out", o.out, "Write predictions CSV here instead of stdout");

  auto* stats = app.add_subcommand("stats", "Wilcoxon signed-rank test between two report CSVs");
  stats->add_option("csv_a", o.csv_a)->required()->check(CLI::ExistingFile);
  stats->add_option("csv_b", o.csv_b)->required()->check(CLI::ExistingFile);
  stats->add_option("--alternative", o.alternative, "greater, less or two-sided (A relative to B)");
  stats->add_option("--config-a", o.config_a, "Config column of csv_a");
  stats->add_option("--config-b", o.config_b, "Config column of csv_b");
  add_common(stats);

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  synth->add_option("out", o.out, "Dataset directory")->required();
  synth->add_option("--subjects", o.synth.n_subjects);
  synth->add_option("--trials-per-class", o.synth.trials_per_class);
  synth->add_option("--fs", o.synth.fs, "Sampling rate (Hz)");
  synth->add_option("--duration", o.synth.duration_s, "Trial length (s)");
  add_common(synth);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  std::shared_ptr<spdlog::logger> log;
  try {
    log = make_logger(err);
    if (validate->parsed()) return cmd_validate(o, out, *log);
    if (loso->parsed()) return run_experiment(o, false, out, *log);
    if (segments->parsed()) return run_experiment(o, true, out, *log);
    if (train->parsed()) return cmd_train(o, out, *log);
    if (predict->parsed()) return cmd_predict(o, out, *log);
    if (stats->parsed()) return cmd_stats(o, out, *log);
    return cmd_synth(o, out, *log);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace tfoc::cli

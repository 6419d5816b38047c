#include "tfoc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "tfoc/features.hpp"

namespace tfoc {

namespace {

std::vector<Example> make_examples(const Dataset& ds, const FeatureSet& features,
                                   std::span<const std::size_t> indices) {
  std::vector<Example> out;
  out.reserve(indices.size());
  for (std::size_t i : indices)
    out.push_back({TrialId{ds.trials[i].subject_id, i}, &features.inputs[i], static_cast<int>(ds.trials[i].label)});
  return out;
}

void audit(const std::string& held_out, const std::set<std::size_t>& held_out_trials,
           std::span<const Example> train, std::span<const Example> validation, const std::vector<TrialId>& seen) {
  auto check = [&](const TrialId& id, const char* where) {
    if (id.subject_id == held_out || held_out_trials.count(id.trial_index) != 0)
      throw LeakageError("held-out subject " + held_out + ": trial " + id.to_string() + " reached the " + where);
  };
  for (const auto& e : train) check(e.id, "training set");
  for (const auto& e : validation) check(e.id, "validation set");
  for (const auto& id : seen) check(id, "classifier");
}

}  // namespace

uint64_t fold_seed(uint64_t seed, const std::string& subject_id) { return seed ^ stable_hash(subject_id); }

FoldClassifier network_classifier(const Architecture& arch) {
  return [arch](const FoldData& d) {
    auto trained = train_fold(d.train, d.validation, d.dims, d.train_cfg, make_batch_source(d.train_cfg), arch);
    trained.best.pipeline = d.pipeline;
    FoldOutcome out;
    out.predictions = evaluate(trained.best.network(), d.test).predictions;
    out.seen = std::move(trained.seen);
    out.history = std::move(trained.history);
    out.checkpoint = std::move(trained.best);
    return out;
  };
}

LosoRun run_loso(const Dataset& ds, const ExperimentConfig& cfg, const LosoOptions& options) {
  cfg.validate();
  auto folds = loso_splits(ds);
  if (!options.subjects.empty()) {
    std::vector<LosoFold> chosen;
    for (const auto& id : options.subjects) {
      const auto it = std::find_if(folds.begin(), folds.end(), [&](const LosoFold& f) { return f.held_out == id; });
      if (it == folds.end()) throw SplitError("unknown subject " + id);
      chosen.push_back(*it);
    }
    folds = std::move(chosen);
  }
  const auto features = compute_features(ds, cfg, options.segment);
  const std::string label =
      !options.label.empty() ? options.label : options.segment ? dsp::to_string(options.segment->id) : cfg.name;
  const FoldClassifier classifier = options.classifier ? options.classifier : network_classifier();
  const double fs = ds.trials.front().fs;
  const auto pipeline = pipeline_json(cfg, fs, options.segment);

  std::vector<FoldResult> results(folds.size());
  std::vector<std::optional<Checkpoint>> kept(folds.size());
  std::vector<std::exception_ptr> errors(folds.size());
  std::mutex callback_mutex;
  std::atomic<std::size_t> next{0};

  auto run_fold = [&](std::size_t f) {
    const auto& fold = folds[f];
    const auto test_idx = ds.trials_of(fold.held_out);
    std::vector<std::size_t> train_idx;
    for (const auto& s : fold.train_subjects) {
      const auto idx = ds.trials_of(s);
      train_idx.insert(train_idx.end(), idx.begin(), idx.end());
    }
    TrainConfig tc = cfg.training;
    tc.seed = fold_seed(cfg.seed, fold.held_out);
    const auto split = holdout_validation(ds, train_idx, tc.val_frac, tc.seed);

    const auto train = make_examples(ds, features, split.train);
    const auto validation = make_examples(ds, features, split.validation);
    const auto test = make_examples(ds, features, test_idx);
    const std::set<std::size_t> held_out_trials(test_idx.begin(), test_idx.end());
    audit(fold.held_out, held_out_trials, train, validation, {});

    const FoldData data{fold.held_out, features.dims, train, validation, test, tc, pipeline};
    auto outcome = classifier(data);
    audit(fold.held_out, held_out_trials, train, validation, outcome.seen);
    if (outcome.predictions.size() != test.size())
      throw InputError("classifier returned " + std::to_string(outcome.predictions.size()) + " predictions for " +
                       std::to_string(test.size()) + " test trials");

    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) correct += outcome.predictions[i] == test[i].label;

    FoldResult r;
    r.held_out = fold.held_out;
    r.n_train = train.size();
    r.n_validation = validation.size();
    r.n_test = test.size();
    r.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    r.epochs_run = outcome.history.size();
    r.best_epoch = outcome.checkpoint ? outcome.checkpoint->best_epoch : 0;
    r.warnings = split.warnings;
    if (options.checkpoint_dir && outcome.checkpoint) {
      std::filesystem::create_directories(*options.checkpoint_dir);
      save_checkpoint(*outcome.checkpoint, *options.checkpoint_dir / (label + "_" + fold.held_out + ".tfoc"));
    }
    if (options.keep_checkpoints) {
      if (!outcome.checkpoint) throw InputError("classifier produced no checkpoint");
      kept[f] = std::move(*outcome.checkpoint);
    }
    results[f] = r;
    if (options.on_fold) {
      std::lock_guard<std::mutex> lock(callback_mutex);
      options.on_fold(r);
    }
  };

  auto worker = [&] {
    for (std::size_t f = next++; f < folds.size(); f = next++) {
      try {
        run_fold(f);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };

  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), folds.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (!errors[f]) continue;
    try {
      std::rethrow_exception(errors[f]);
    } catch (const LeakageError&) {
      throw;
    } catch (const std::exception& e) {
      throw FoldError(folds[f].held_out, "fold " + folds[f].held_out + ": " + e.what());
    }
  }

  LosoRun run;
  run.folds = std::move(results);
  if (options.keep_checkpoints)
    for (auto& c : kept) run.checkpoints.push_back(std::move(*c));
  for (const auto& r : run.folds) run.report.rows.push_back({r.held_out, label, r.accuracy});
  return run;
}

LosoRun run_segment_analysis(const Dataset& ds, const ExperimentConfig& cfg, std::span<const dsp::SegmentId> segments,
                             const LosoOptions& options) {
  if (segments.empty()) throw ConfigError("no segments to analyse");
  LosoRun all;
  for (auto id : segments) {
    LosoOptions o = options;
    o.segment = dsp::segment_spec(id);
    o.label = dsp::to_string(id);
    auto run = run_loso(ds, cfg, o);
    all.report.rows.insert(all.report.rows.end(), run.report.rows.begin(), run.report.rows.end());
    all.folds.insert(all.folds.end(), run.folds.begin(), run.folds.end());
    std::move(run.checkpoints.begin(), run.checkpoints.end(), std::back_inserter(all.checkpoints));
  }
  return all;
}

}  // namespace tfoc

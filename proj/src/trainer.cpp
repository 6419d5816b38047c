#include "tfoc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json_util.hpp"

namespace tfoc {

using nlohmann::json;

namespace {

constexpr std::size_t kEvalChunk = 32;
constexpr double kMaxNorm = 3.0;
// Probability floor when evaluating the loss, as in common Keras builds.
constexpr double kProbFloor = 1e-7;

uint64_t dropout_seed(uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("training.epochs must be >= 1");
  if (patience < 1) throw ConfigError("training.patience must be >= 1");
  if (!(val_frac > 0.0 && val_frac < 0.5)) throw ConfigError("training.val_frac must be in (0, 0.5)");
  if (batching.per_subject < 1) throw ConfigError("batching.per_subject must be >= 1");
  if (batching.batch_size < 1) throw ConfigError("batching.batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("training.lr must be finite and >= 0");
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("training.rho must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("training.eps must be > 0");
}

json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"patience", cfg.patience},
          {"val_frac", cfg.val_frac},
          {"seed", cfg.seed},
          {"lr", cfg.lr},
          {"rho", cfg.rho},
          {"eps", cfg.eps},
          {"batching",
           {{"balanced", cfg.batching.balanced},
            {"per_subject", cfg.batching.per_subject},
            {"batch_size", cfg.batching.batch_size}}}};
}

TrainConfig train_config_from_json(const json& j) {
  using namespace json_util;
  const std::string where = "train_config";
  check_keys(j, {"epochs", "patience", "val_frac", "seed", "lr", "rho", "eps", "batching"}, where);
  TrainConfig cfg;
  read(j, "epochs", cfg.epochs, where);
  read(j, "patience", cfg.patience, where);
  read(j, "val_frac", cfg.val_frac, where);
  read(j, "seed", cfg.seed, where);
  read(j, "lr", cfg.lr, where);
  read(j, "rho", cfg.rho, where);
  read(j, "eps", cfg.eps, where);
  if (j.contains("batching")) {
    const auto& b = j["batching"];
    check_keys(b, {"balanced", "per_subject", "batch_size"}, where + ".batching");
    read(b, "balanced", cfg.batching.balanced, where + ".batching");
    read(b, "per_subject", cfg.batching.per_subject, where + ".batching");
    read(b, "batch_size", cfg.batching.batch_size, where + ".batching");
  }
  cfg.validate();
  return cfg;
}

BatchSource make_batch_source(const TrainConfig& cfg) {
  const BatchingConfig b = cfg.batching;
  const uint64_t seed = cfg.seed;
  return [b, seed](std::span<const Example> ex, int epoch) {
    const uint64_t s = seed + static_cast<uint64_t>(epoch);
    return b.balanced ? balanced_batches(ex, b.per_subject, s) : unbalanced_batches(ex, b.batch_size, s);
  };
}

Evaluation evaluate(const Network& net, std::span<const Example> examples) {
  Evaluation ev;
  if (examples.empty()) return ev;
  const auto& dims = net.input_dims();
  std::vector<std::size_t> members;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < examples.size(); start += kEvalChunk) {
    const std::size_t end = std::min(examples.size(), start + kEvalChunk);
    members.clear();
    for (std::size_t i = start; i < end; ++i) members.push_back(i);
    const auto data = materialize<float>(examples, members, dims);
    const auto probs = net.predict_probs(data.inputs);
    const std::size_t k = probs.dims[1];
    for (std::size_t i = 0; i < members.size(); ++i) {
      const std::span<const float> row(probs.data.data() + i * k, k);
      const int pred = argmax_row(row);
      ev.predictions.push_back(pred);
      correct += pred == data.labels[i];
      loss -= std::log(std::max(static_cast<double>(row[static_cast<std::size_t>(data.labels[i])]), kProbFloor));
    }
  }
  ev.loss = loss / static_cast<double>(examples.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  return ev;
}

TrainResult train_fold(std::span<const Example> train, std::span<const Example> validation, const InputDims& dims,
                       const TrainConfig& cfg, const BatchSource& source, const Architecture& arch,
                       const EpochCallback& on_epoch) {
  if (train.empty()) throw InputError("train_fold: empty training set");
  if (validation.empty()) throw InputError("train_fold: empty validation set");
  cfg.validate();

  Rng init_rng(cfg.seed);
  Network net(dims, arch, init_rng);
  Rng drop_rng(dropout_seed(cfg.seed));
  auto opt = OptimizerState<float>::for_params(net.params(), cfg.lr, cfg.rho, cfg.eps);

  std::set<TrialId> seen;
  for (const auto& e : train) seen.insert(e.id);
  for (const auto& e : validation) seen.insert(e.id);

  TrainResult res;
  std::vector<Param<float>> best_params = net.params();
  double best_acc = -1.0;
  int best_epoch = 0;
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = source(train, epoch);
    if (batches.empty()) throw BatchingError("batch source produced no batches");
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
      seen.insert(batch.provenance.begin(), batch.provenance.end());
      const auto data = materialize<float>(train, batch.members, dims);
      const auto step = net.loss_and_grads(data.inputs, data.labels, Mode::train, &drop_rng);
      rmsprop_step(net.params(), step.grads, opt);
      net.apply_max_norm(kMaxNorm);
      loss_sum += step.loss;
    }

    const auto ev = evaluate(net, validation);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(batches.size());
    rec.val_loss = ev.loss;
    rec.val_accuracy = ev.accuracy;
    rec.improved = ev.accuracy > best_acc;
    if (rec.improved) {
      best_acc = ev.accuracy;
      best_epoch = rec.epoch;
      best_params = net.params();
      since_best = 0;
    } else {
      ++since_best;
    }
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec, net);
    if (since_best >= cfg.patience) {
      res.stopped_early = epoch + 1 < cfg.epochs;
      break;
    }
  }

  res.best.input = dims;
  res.best.arch = arch;
  res.best.params = std::move(best_params);
  res.best.train_config = to_json(cfg);
  res.best.best_epoch = best_epoch;
  res.best.val_accuracy = best_acc;
  res.seen.assign(seen.begin(), seen.end());
  return res;
}

}  // namespace tfoc

#include <cmath>
#include <cstring>
#include <fstream>

#include "doctest.h"
#include "temp_dir.hpp"
#include "tfoc/checkpoint.hpp"
#include "tfoc/trainer.hpp"

using namespace tfoc;

namespace {

const InputDims kDims{4, 3, 1};
const Architecture kSmall = Architecture::scaled(4, 4, 4, 8);

// Label 0 lights the top rows, label 1 the bottom rows; plus noise.
struct Toy {
  std::vector<std::vector<double>> inputs;
  std::vector<Example> examples;
};

Toy make_toy(std::size_t n_subjects, std::size_t per_subject, uint64_t seed, double noise = 0.3) {
  Toy toy;
  Rng rng(seed);
  toy.inputs.reserve(n_subjects * per_subject);
  std::size_t index = 0;
  for (std::size_t s = 0; s < n_subjects; ++s) {
    for (std::size_t t = 0; t < per_subject; ++t, ++index) {
      const int label = static_cast<int>(t % 2);
      std::vector<double> x(kDims.pixels());
      for (std::size_t h = 0; h < kDims.height; ++h)
        for (std::size_t w = 0; w < kDims.width; ++w) {
          const bool top = h < kDims.height / 2;
          x[h * kDims.width + w] = ((top == (label == 0)) ? 1.0 : 0.0) + noise * rng.normal();
        }
      toy.inputs.push_back(std::move(x));
      toy.examples.push_back({TrialId{"S" + std::to_string(s), index}, &toy.inputs.back(), label});
    }
  }
  return toy;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.patience = 30;
  cfg.seed = 17;
  cfg.batching.per_subject = 2;
  return cfg;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

Checkpoint sample_checkpoint() {
  Rng rng(3);
  const Network net(kDims, kSmall, rng);
  auto ckpt = make_checkpoint(net);
  ckpt.train_config = to_json(small_config());
  ckpt.pipeline = {{"stft", {{"window_len", 32}}}};
  ckpt.best_epoch = 7;
  ckpt.val_accuracy = 0.8125;
  return ckpt;
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("encode/decode round trip is bit-exact") {
    const auto ckpt = sample_checkpoint();
    const auto bytes = encode_checkpoint(ckpt);
    const auto back = decode_checkpoint(bytes);
    CHECK(back.input == ckpt.input);
    CHECK(back.arch.describe() == ckpt.arch.describe());
    CHECK(back.train_config == ckpt.train_config);
    CHECK(back.pipeline == ckpt.pipeline);
    CHECK(back.best_epoch == 7);
    CHECK(back.val_accuracy == 0.8125);
    REQUIRE(back.params.size() == ckpt.params.size());
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
      CHECK(back.params[i].shape.name == ckpt.params[i].shape.name);
      CHECK(back.params[i].shape.dims == ckpt.params[i].shape.dims);
      CHECK(same_bits(back.params[i].value, ckpt.params[i].value));
    }
    CHECK(encode_checkpoint(back) == bytes);
  }

  TEST_CASE("file layout: magic, version, header length, first parameter record") {
    const auto ckpt = sample_checkpoint();
    const auto bytes = encode_checkpoint(ckpt);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "TFOC");
    CHECK(bytes[4] == 1);
    CHECK(bytes[5] == 0);
    CHECK(bytes[6] == 0);
    CHECK(bytes[7] == 0);
    const uint32_t header_len = bytes[8] | (bytes[9] << 8) | (bytes[10] << 16) | (bytes[11] << 24);
    const std::string header(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    const auto j = nlohmann::json::parse(header);
    CHECK(j["input"] == nlohmann::json::array({4, 3, 1}));
    CHECK(j["layers"].size() == 14);
    std::size_t p = 12 + header_len;
    const std::size_t name_len = bytes[p] | (bytes[p + 1] << 8);
    CHECK(std::string(bytes.begin() + p + 2, bytes.begin() + p + 2 + name_len) == "conv1.kernel");
    p += 2 + name_len;
    CHECK(bytes[p] == 4);
    CHECK(bytes[p + 1 + 12] == 4);  // dims (3, 3, 1, 4): last dim
    float first;
    std::memcpy(&first, &bytes[p + 1 + 16], 4);
    CHECK(first == ckpt.params[0].value[0]);
  }

  TEST_CASE("save and load through a file") {
    TempDir dir;
    const auto ckpt = sample_checkpoint();
    save_checkpoint(ckpt, dir.path() / "model.tfoc");
    const auto back = load_checkpoint(dir.path() / "model.tfoc");
    CHECK(encode_checkpoint(back) == encode_checkpoint(ckpt));
    CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing.tfoc"), IoError);
  }

  TEST_CASE("corrupt files are rejected") {
    const auto bytes = encode_checkpoint(sample_checkpoint());
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), CheckpointError);
    bad = bytes;
    bad[4] = 2;
    CHECK_THROWS_AS(decode_checkpoint(bad), CheckpointError);
    bad.assign(bytes.begin(), bytes.end() - 1);
    CHECK_THROWS_AS(decode_checkpoint(bad), CheckpointError);
    bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_checkpoint(bad), CheckpointError);
    bad.assign(bytes.begin(), bytes.begin() + 6);
    CHECK_THROWS_AS(decode_checkpoint(bad), CheckpointError);
  }

  TEST_CASE("parameters that do not fit the architecture") {
    auto ckpt = sample_checkpoint();
    ckpt.params[0].shape.dims = {3, 3, 1, 5};
    ckpt.params[0].value.resize(45);
    CHECK_THROWS_AS(ckpt.network(), CheckpointError);
    CHECK_THROWS_AS(decode_checkpoint(encode_checkpoint(ckpt)), CheckpointError);
  }
}

TEST_SUITE("predict") {
  TEST_CASE("zero-weight network: probabilities 0.5, ties to class 0") {
    const auto ckpt = make_checkpoint(Network::zeros(kDims, kSmall));
    Tensor inputs({3, 4, 3, 1}, 0.7f);
    const auto pred = predict(ckpt, inputs);
    CHECK(pred.labels == std::vector<int>{0, 0, 0});
    for (float p : pred.probs.data) CHECK(p == 0.5f);
  }

  TEST_CASE("argmax") {
    const std::vector<float> a = {0.9f, 0.1f}, b = {0.1f, 0.9f}, tie = {0.5f, 0.5f};
    CHECK(argmax_row(a) == 0);
    CHECK(argmax_row(b) == 1);
    CHECK(argmax_row(tie) == 0);
  }

  TEST_CASE("repeatable and dimension-checked") {
    const auto ckpt = sample_checkpoint();
    Rng rng(4);
    Tensor inputs({5, 4, 3, 1});
    for (auto& v : inputs.data) v = static_cast<float>(rng.normal());
    const auto a = predict(ckpt, inputs);
    const auto b = predict(ckpt, inputs);
    CHECK(a.labels == b.labels);
    CHECK(same_bits(a.probs.data, b.probs.data));
    CHECK_THROWS_AS(predict(ckpt, Tensor({5, 3, 4, 1})), ShapeError);
  }
}

TEST_SUITE("train_config") {
  TEST_CASE("json round trip") {
    auto cfg = small_config();
    cfg.batching.balanced = false;
    cfg.lr = 2.5e-4;
    const auto back = train_config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
  }

  TEST_CASE("defaults") {
    const TrainConfig cfg;
    CHECK(cfg.epochs == 200);
    CHECK(cfg.patience == 20);
    CHECK(cfg.batching.balanced);
    CHECK(cfg.batching.per_subject == 4);
    CHECK(cfg.lr == 0.001);
    CHECK(cfg.rho == 0.9);
    CHECK(cfg.eps == 1e-7);
  }

  TEST_CASE("invalid values and unknown keys") {
    CHECK_THROWS_AS(train_config_from_json({{"epochs", 0}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json({{"patience", 0}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json({{"val_frac", 0.5}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json({{"batching", {{"per_subject", 0}}}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json({{"epoch", 10}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json({{"epochs", "ten"}}), ConfigError);
  }
}

TEST_SUITE("train_fold") {
  TEST_CASE("empty sets") {
    const auto toy = make_toy(2, 8, 1);
    const auto cfg = small_config();
    const std::span<const Example> all(toy.examples);
    CHECK_THROWS_AS(train_fold({}, all, kDims, cfg, make_batch_source(cfg), kSmall), InputError);
    CHECK_THROWS_AS(train_fold(all, {}, kDims, cfg, make_batch_source(cfg), kSmall), InputError);
  }

  TEST_CASE("constant validation metric with patience 1 stops after 2 epochs") {
    const auto toy = make_toy(2, 8, 1);
    auto cfg = small_config();
    cfg.lr = 0.0;
    cfg.patience = 1;
    const auto res = train_fold(toy.examples, toy.examples, kDims, cfg, make_batch_source(cfg), kSmall);
    CHECK(res.history.size() == 2);
    CHECK(res.stopped_early);
    CHECK(res.best.best_epoch == 1);
    CHECK(res.history[0].val_accuracy == res.history[1].val_accuracy);
  }

  TEST_CASE("same seed twice: identical history and checkpoint bytes") {
    const auto toy = make_toy(3, 8, 2);
    const std::span<const Example> all(toy.examples);
    auto cfg = small_config();
    cfg.epochs = 6;
    const auto a = train_fold(all.subspan(0, 16), all.subspan(16), kDims, cfg, make_batch_source(cfg), kSmall);
    const auto b = train_fold(all.subspan(0, 16), all.subspan(16), kDims, cfg, make_batch_source(cfg), kSmall);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      CHECK(a.history[i].train_loss == b.history[i].train_loss);
      CHECK(a.history[i].val_loss == b.history[i].val_loss);
      CHECK(a.history[i].val_accuracy == b.history[i].val_accuracy);
    }
    CHECK(encode_checkpoint(a.best) == encode_checkpoint(b.best));
    cfg.seed += 1;
    const auto c = train_fold(all.subspan(0, 16), all.subspan(16), kDims, cfg, make_batch_source(cfg), kSmall);
    CHECK(encode_checkpoint(c.best) != encode_checkpoint(a.best));
  }

  TEST_CASE("keeps the earliest epoch with the best validation accuracy") {
    const auto toy = make_toy(4, 10, 3, 0.8);
    const std::span<const Example> all(toy.examples);
    auto cfg = small_config();
    cfg.epochs = 15;
    std::vector<std::vector<float>> snapshots;
    const auto res = train_fold(all.subspan(0, 30), all.subspan(30), kDims, cfg, make_batch_source(cfg), kSmall,
                                [&](const EpochRecord&, const Network& net) {
                                  std::vector<float> flat;
                                  for (const auto& p : net.params()) flat.insert(flat.end(), p.value.begin(), p.value.end());
                                  snapshots.push_back(std::move(flat));
                                });
    double best = -1.0;
    int best_epoch = 0;
    for (const auto& rec : res.history)
      if (rec.val_accuracy > best) {
        best = rec.val_accuracy;
        best_epoch = rec.epoch;
      }
    CHECK(res.best.best_epoch == best_epoch);
    CHECK(res.best.val_accuracy == best);
    std::vector<float> flat;
    for (const auto& p : res.best.params) flat.insert(flat.end(), p.value.begin(), p.value.end());
    CHECK(same_bits(flat, snapshots[static_cast<std::size_t>(best_epoch - 1)]));
    CHECK(evaluate(res.best.network(), all.subspan(30)).accuracy == best);
  }

  TEST_CASE("max-norm holds after every epoch") {
    const auto toy = make_toy(2, 12, 4, 0.5);
    auto cfg = small_config();
    cfg.epochs = 10;
    cfg.lr = 0.05;
    double worst = 0.0;
    train_fold(toy.examples, toy.examples, kDims, cfg, make_batch_source(cfg), kSmall,
               [&](const EpochRecord&, const Network& net) {
                 for (const auto& p : net.params()) {
                   if (!p.shape.max_norm) continue;
                   const std::size_t units = p.shape.dims.back();
                   for (std::size_t u = 0; u < units; ++u) {
                     double sq = 0.0;
                     for (std::size_t i = u; i < p.value.size(); i += units) sq += double(p.value[i]) * p.value[i];
                     worst = std::max(worst, std::sqrt(sq));
                   }
                 }
               });
    CHECK(worst <= 3.0 + 1e-6);
  }

  TEST_CASE("small network fits a 20-trial toy set") {
    const auto toy = make_toy(2, 10, 5);
    auto cfg = small_config();
    cfg.epochs = 200;
    cfg.patience = 200;
    cfg.batching.per_subject = 5;
    bool reached = false;
    train_fold(toy.examples, toy.examples, kDims, cfg, make_batch_source(cfg), kSmall,
               [&](const EpochRecord& rec, const Network&) { reached = reached || rec.val_accuracy == 1.0; });
    CHECK(reached);
  }

  TEST_CASE("training loss is non-increasing over the first epochs at lr 1e-4") {
    const auto toy = make_toy(2, 16, 6);
    auto cfg = small_config();
    cfg.epochs = 5;
    cfg.lr = 1e-4;
    cfg.batching.balanced = false;
    cfg.batching.batch_size = 32;
    Rng init(cfg.seed);  // the trainer initialises from the same seed
    std::vector<double> losses = {evaluate(Network(kDims, kSmall, init), toy.examples).loss};
    train_fold(toy.examples, toy.examples, kDims, cfg, make_batch_source(cfg), kSmall,
               [&](const EpochRecord&, const Network& net) { losses.push_back(evaluate(net, toy.examples).loss); });
    REQUIRE(losses.size() == 6);
    for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] <= losses[i - 1]);
  }

  TEST_CASE("seen ids cover training, validation and batch members") {
    const auto toy = make_toy(3, 8, 7);
    const std::span<const Example> all(toy.examples);
    auto cfg = small_config();
    cfg.epochs = 2;
    const auto res = train_fold(all.subspan(0, 16), all.subspan(16), kDims, cfg, make_batch_source(cfg), kSmall);
    CHECK(res.seen.size() == 24);
  }

  TEST_CASE("batch source reshuffles per epoch") {
    const auto toy = make_toy(2, 16, 8);
    const auto source = make_batch_source(small_config());
    CHECK(source(toy.examples, 0)[0].members != source(toy.examples, 1)[0].members);
    CHECK(source(toy.examples, 3)[0].members == source(toy.examples, 3)[0].members);
  }
}

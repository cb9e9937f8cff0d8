#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "paa/config.hpp"
#include "paa/errors.hpp"
#include "paa/model.hpp"

using namespace paa;

TEST_CASE("config text round-trips and defaults match the training recipe") {
  ExperimentConfig cfg;
  cfg.finalize();
  CHECK(cfg.train.beta1 == 0.9);
  CHECK(cfg.train.beta2 == 0.999);
  CHECK(cfg.train.weight_decay == 0.05);
  CHECK(cfg.train.warmup_steps == 1000);
  CHECK(cfg.train.lr_start == 1e-6);
  CHECK(cfg.train.lr_peak == 8e-5);
  CHECK(cfg.train.lr_min == 1e-5);
  CHECK(cfg.train.batch_size == 4);
  const ExperimentConfig back = ExperimentConfig::from_text(cfg.to_text());
  CHECK(back.to_text() == cfg.to_text());
  CHECK(back.hash() == cfg.hash());
}

TEST_CASE("partial files fall back to defaults; comments and blank lines are ignored") {
  const auto cfg = ExperimentConfig::from_text(
      "# experiment\n\nseed = 7\nadapter.variant = local_only   # no global path\nadapter.g_num = 0\n"
      "data.per_task = 5, 6, 7, 8\ntrain.freeze = encoder.,head.\n");
  CHECK(cfg.seed == 7);
  CHECK(cfg.adapter.seed == 7);
  CHECK(cfg.adapter.variant == Variant::local_only);
  CHECK(cfg.data.per_task == std::array<std::size_t, 4>{5, 6, 7, 8});
  CHECK(cfg.train.freeze.frozen("head.w"));
  CHECK(cfg.train.max_epochs == 5);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(ExperimentConfig::from_text("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_text("seed = -1\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_text("seed 1\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_text("seed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_text("adapter.variant = linear\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_text("train.lr_start = 1e-3\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_text("adapter.ratio = 0.8x\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_text("data.per_task = 1,2,3\n"), ConfigError);
}

TEST_CASE("the hash ignores the worker count and tracks everything else") {
  ExperimentConfig a;
  a.finalize();
  ExperimentConfig b = a;
  b.train.workers = 8;
  CHECK(a.hash() == b.hash());
  b.adapter.ratio = 0.5;
  CHECK(a.hash() != b.hash());
  ExperimentConfig c = a;
  c.data_seed = 1;
  CHECK(a.data_hash() != c.data_hash());
  CHECK(a.hash() != c.hash());
}

TEST_CASE("model checkpoints round-trip and reject tampering") {
  ExperimentConfig cfg;
  cfg.adapter.channels = cfg.adapter.word_dim = cfg.adapter.inner_dim = 6;
  cfg.adapter.attn_dim = cfg.adapter.out_dim = 6;
  cfg.finalize();
  const Model m = init_model(cfg);
  CHECK(m.params.count("encoder.image.table") == 1);
  CHECK(m.params.count("encoder.text.table") == 1);
  CHECK(m.params.at("head.w").shape == Shape{6, answer_vocabulary().size()});
  const Checkpoint ckpt = to_checkpoint(m);
  const Model back = from_checkpoint(ckpt);
  CHECK(back.params == m.params);
  CHECK(back.image.table == m.image.table);

  Checkpoint wrong = ckpt;
  wrong.config_hash ^= 0xff;
  CHECK_THROWS_AS(from_checkpoint(wrong), ConfigError);
  Checkpoint missing = ckpt;
  missing.params.erase("head.w");
  CHECK_THROWS_AS(from_checkpoint(missing), ConfigError);
  Checkpoint misshapen = ckpt;
  misshapen.params["head.w"] = Matrix(2, 2);
  CHECK_THROWS_AS(from_checkpoint(misshapen), ShapeError);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  const double v[] = {0.5, 2.0, 2.0, -1.0};
  CHECK(argmax(v) == 1);
  const double flat[] = {0.0, 0.0, 0.0};
  CHECK(argmax(flat) == 0);
}

TEST_CASE("the adapter prompt is the question or the full template") {
  const auto split = build_split(DataConfig{}, 0);
  ExperimentConfig cfg;
  cfg.finalize();
  const SceneQA& q = split.test.front();
  CHECK(adapter_prompt(q, cfg) == q.question);
  cfg.prompt = PromptSource::template_;
  const auto t = adapter_prompt(q, cfg);
  CHECK(t.front() == "[INST]");
  CHECK(t.size() == q.question.size() + 6);
}

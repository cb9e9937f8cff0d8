#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "paa/config.hpp"
#include "paa/errors.hpp"
#include "paa/eval.hpp"
#include "paa/gradcheck_suite.hpp"
#include "paa/hash.hpp"
#include "paa/model.hpp"
#include "paa/trainer.hpp"

namespace fs = std::filesystem;
using namespace paa;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "experiment config file (key = value)");
  cmd->add_option("--seed", c.seed, "override the run seed");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  cfg.finalize();
  return cfg;
}

ItemFile read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_items(in);
}

DatasetSplit load_split(const std::string& dir, const ExperimentConfig& cfg) {
  const ItemFile train = read_file(fs::path(dir) / "train.tsv");
  const ItemFile test = read_file(fs::path(dir) / "test.tsv");
  if (train.data_hash != test.data_hash) throw ConfigError("train and test files come from different configs");
  if (train.data_hash != cfg.data_hash())
    throw ConfigError("data in '" + dir + "' has hash " + to_hex(train.data_hash) + ", config expects " +
                      to_hex(cfg.data_hash()));
  DatasetSplit s;
  s.seed = train.seed;
  s.data_hash = train.data_hash;
  s.per_task = cfg.data.per_task;
  s.train = train.items;
  s.test = test.items;
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write '" + path.string() + "'");
}

Model load_model(const std::string& path, const Common& c) {
  const Checkpoint ckpt = load_checkpoint(path);
  Model model = from_checkpoint(ckpt);
  if (!c.config_path.empty() || c.seed) {
    const ExperimentConfig cfg = load(c);
    if (cfg.hash() != ckpt.config_hash)
      throw ConfigError("config hash " + to_hex(cfg.hash()) + " does not match checkpoint " +
                        to_hex(ckpt.config_hash));
  }
  return model;
}

int run(int argc, char** argv) {
  CLI::App app{"Prompt-aware adapter experiments on a synthetic VQA task", "paa"};
  app.require_subcommand(1);

  Common common;

  auto* gen = app.add_subcommand("gen-data", "generate the train/test split");
  add_common(gen, common);
  std::string gen_out;
  gen->add_option("--out", gen_out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train one adapter variant");
  add_common(tr, common);
  std::string data_dir, out_dir;
  tr->add_option("--data", data_dir, "directory holding train.tsv and test.tsv")->required();
  tr->add_option("--out", out_dir, "output directory for checkpoints and metrics")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(ev, common);
  std::string ckpt_path;
  bool as_json = false;
  std::size_t eval_workers = 1;
  ev->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  ev->add_option("--data", data_dir, "directory holding test.tsv")->required();
  ev->add_option("--workers", eval_workers, "scoring threads");
  ev->add_flag("--json", as_json, "print the report as JSON");

  auto* cmp = app.add_subcommand("compare", "train and evaluate several variants on one split");
  add_common(cmp, common);
  std::vector<std::string> variant_names;
  cmp->add_option("--data", data_dir, "directory holding train.tsv and test.tsv")->required();
  cmp->add_option("--out", out_dir, "output directory for the table")->required();
  cmp->add_option("--variants", variant_names, "variants to compare (default: all)")->delimiter(',');

  auto* at = app.add_subcommand("attn", "export attention heatmaps for one test item");
  add_common(at, common);
  std::size_t item_index = 0;
  at->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  at->add_option("--data", data_dir, "directory holding test.tsv")->required();
  at->add_option("--index", item_index, "position of the item in test.tsv");
  at->add_option("--out", out_dir, "output directory")->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every adapter variant");
  add_common(gc, common);

  auto* sc = app.add_subcommand("schedule", "print the learning-rate schedule");
  add_common(sc, common);
  std::optional<std::size_t> steps;
  std::size_t every = 1;
  sc->add_option("--steps", steps, "total steps (default: from config)");
  sc->add_option("--every", every, "print every k-th step")->check(CLI::PositiveNumber);

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    std::cerr << app.help();
    return 2;
  }

  if (gen->parsed()) {
    ExperimentConfig cfg = common.config_path.empty() ? ExperimentConfig{} : load_config(common.config_path);
    if (common.seed) cfg.data_seed = *common.seed;
    cfg.finalize();
    const DatasetSplit split = build_split(cfg.data, cfg.data_seed);
    fs::create_directories(gen_out);
    for (const auto& [name, items] : {std::pair{"train", &split.train}, std::pair{"test", &split.test}}) {
      std::ostringstream o;
      write_items(o, *items, cfg.data_seed, split.data_hash, name);
      write_text(fs::path(gen_out) / (std::string(name) + ".tsv"), o.str());
    }
    save_config((fs::path(gen_out) / "config.txt").string(), cfg);
    std::cout << "train " << split.train.size() << " test " << split.test.size() << " data_hash "
              << to_hex(split.data_hash) << "\n";
    return 0;
  }

  if (tr->parsed()) {
    const ExperimentConfig cfg = load(common);
    const DatasetSplit split = load_split(data_dir, cfg);
    fs::create_directories(out_dir);
    std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl");
    if (!metrics) throw IoError("cannot write metrics log in '" + out_dir + "'");
    TrainOptions opts;
    opts.on_step = [&](const StepMetrics& m) { metrics << format_metrics(m) << '\n'; };
    opts.on_epoch = [&](std::size_t epoch, const Model& m) {
      save_checkpoint((fs::path(out_dir) / ("epoch_" + std::to_string(epoch) + ".ckpt")).string(),
                      to_checkpoint(m));
    };
    const TrainResult r = train(init_model(cfg), split.train, opts);
    save_checkpoint((fs::path(out_dir) / "final.ckpt").string(), to_checkpoint(r.model));
    const EvalReport rep = evaluate(r.model, split.test, split.data_hash, cfg.train.workers);
    std::cout << "steps " << r.metrics.size() << " test_accuracy " << format_accuracy(rep.total()) << "\n";
    return 0;
  }

  if (ev->parsed()) {
    const Model model = load_model(ckpt_path, common);
    const ItemFile test = read_file(fs::path(data_dir) / "test.tsv");
    const EvalReport r = evaluate(model, test.items, test.data_hash, eval_workers);
    if (as_json) {
      std::cout << report_json(r).dump(2) << "\n";
    } else {
      ComparisonTable t{r.data_hash, {r}};
      std::cout << comparison_text(t);
    }
    return 0;
  }

  if (cmp->parsed()) {
    const ExperimentConfig cfg = load(common);
    std::vector<Variant> variants;
    for (const auto& n : variant_names) variants.push_back(parse_variant(n));
    if (variants.empty()) variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
    const DatasetSplit split = load_split(data_dir, cfg);
    const ComparisonTable table = compare(cfg, variants, split, out_dir);
    std::cout << comparison_text(table);
    return 0;
  }

  if (at->parsed()) {
    const Model model = load_model(ckpt_path, common);
    const ItemFile test = read_file(fs::path(data_dir) / "test.tsv");
    if (test.data_hash != model.config.data_hash()) throw ConfigError("test data does not match the checkpoint");
    if (item_index >= test.items.size())
      throw ContractError("--index " + std::to_string(item_index) + " is past the " +
                          std::to_string(test.items.size()) + " test items");
    for (const auto& path : export_attention(model, test.items[item_index], out_dir)) std::cout << path << "\n";
    return 0;
  }

  if (gc->parsed()) {
    const ExperimentConfig cfg = load(common);
    bool ok = true;
    for (Variant v : kAllVariants) {
      const GradCheckReport r = adapter_grad_check(gradcheck_config(v, cfg.seed), cfg.seed);
      const bool pass = r.max_rel_error <= 1e-4;
      ok = ok && pass;
      std::printf("%-18s max_rel_error %.3e  %s\n", std::string(variant_name(v)).c_str(), r.max_rel_error,
                  pass ? "ok" : ("FAIL at " + r.worst_input).c_str());
    }
    if (!ok) {
      std::cerr << "error: numerical_error: gradient check exceeded 1e-4\n";
      return 1;
    }
    return 0;
  }

  if (sc->parsed()) {
    ExperimentConfig cfg = load(common);
    if (steps) {
      cfg.train.max_epochs = 1;
      cfg.train.iters_per_epoch = *steps;
    }
    const std::size_t total = cfg.train.total_steps();
    std::printf("step lr\n");
    for (std::size_t s = 0; s < total; ++s)
      if (s % every == 0 || s + 1 == total) std::printf("%zu %.12g\n", s, lr_schedule(s, cfg.train));
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const paa::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: runtime_error: " << e.what() << "\n";
  }
  return 1;
}

#include "paa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "paa/errors.hpp"
#include "paa/hash.hpp"

namespace paa {

namespace fs = std::filesystem;

EvalReport evaluate(const Model& model, const std::vector<SceneQA>& items, std::uint64_t data_hash,
                    std::size_t workers) {
  if (data_hash != model.config.data_hash())
    throw ConfigError("data hash " + to_hex(data_hash) + " does not match the checkpoint's data config (" +
                      to_hex(model.config.data_hash()) + ")");
  std::vector<std::size_t> predicted(items.size(), 0);
  auto score = [&](std::size_t i) { predicted[i] = predict(model, items[i]); };
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(items.size(), 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < items.size(); ++i) score(i);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < items.size(); i += threads) score(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EvalReport r = score_predictions(items, predicted);
  r.variant = variant_name(model.config.adapter.variant);
  r.seed = model.config.seed;
  r.config_hash = model.config.hash();
  r.data_hash = data_hash;
  return r;
}

EvalReport score_predictions(const std::vector<SceneQA>& items, std::span<const std::size_t> predicted) {
  if (predicted.size() != items.size()) throw ContractError("one prediction per item required");
  EvalReport r;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto truth = answer_index(items[i].answer);
    if (!truth) throw ContractError("answer '" + items[i].answer + "' is not in the answer vocabulary");
    auto& c = r.categories[static_cast<std::size_t>(items[i].task)];
    ++c.items;
    if (predicted[i] == *truth) {
      ++c.correct;
      ++r.correct;
    }
  }
  r.items = items.size();
  return r;
}

EvalReport evaluate(const Checkpoint& ckpt, const ItemFile& file, std::size_t workers) {
  return evaluate(from_checkpoint(ckpt), file.items, file.data_hash, workers);
}

std::string format_accuracy(std::optional<double> acc) {
  if (!acc) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * *acc);
  return buf;
}

nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["variant"] = r.variant;
  j["seed"] = r.seed;
  j["config_hash"] = to_hex(r.config_hash);
  j["data_hash"] = to_hex(r.data_hash);
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (Task t : kTasks) {
    const auto& c = r.categories[static_cast<std::size_t>(t)];
    nlohmann::ordered_json e;
    e["items"] = c.items;
    e["correct"] = c.correct;
    if (const auto a = c.accuracy()) e["accuracy"] = *a;
    else e["accuracy"] = nullptr;
    cats[std::string(task_name(t))] = e;
  }
  j["categories"] = cats;
  j["items"] = r.items;
  j["correct"] = r.correct;
  j["total"] = r.total();
  return j;
}

std::string_view variant_label(Variant v) {
  switch (v) {
    case Variant::linear: return "prompt-unaware (linear)";
    case Variant::cross_attention: return "cross-attention";
    case Variant::local_only: return "w/o global-atten";
    case Variant::global_only: return "w/o local-atten";
    case Variant::global_plus_local: return "w/ global + local";
  }
  return "?";
}

nlohmann::ordered_json comparison_json(const ComparisonTable& table) {
  nlohmann::ordered_json j;
  j["data_hash"] = to_hex(table.data_hash);
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : table.rows) {
    auto row = report_json(r);
    row["label"] = variant_label(parse_variant(r.variant));
    j["rows"].push_back(row);
  }
  return j;
}

std::string comparison_text(const ComparisonTable& table) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Method", "Object", "Count", "Color", "Position", "Total"});
  for (const auto& r : table.rows) {
    std::vector<std::string> row{std::string(variant_label(parse_variant(r.variant)))};
    for (const auto& c : r.categories) row.push_back(format_accuracy(c.accuracy()));
    row.push_back(format_accuracy(r.items ? std::optional<double>(r.total()) : std::nullopt));
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& row : cells)
    for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
  std::ostringstream o;
  for (const auto& row : cells) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k == 0) o << row[k] << std::string(width[k] - row[k].size(), ' ');
      else o << "  " << std::string(width[k] - row[k].size(), ' ') << row[k];
    }
    o << '\n';
  }
  o << "data_hash " << to_hex(table.data_hash) << '\n';
  return o.str();
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ComparisonTable compare(const ExperimentConfig& base, std::span<const Variant> variants,
                        const DatasetSplit& split, const std::string& out_dir) {
  if (variants.size() < 2) throw ContractError("compare needs at least two variants");
  if (split.data_hash != base.data_hash())
    throw ConfigError("split data hash " + to_hex(split.data_hash) + " does not match the config (" +
                      to_hex(base.data_hash()) + ")");
  std::vector<Variant> ordered;
  for (Variant v : kAllVariants)
    if (std::find(variants.begin(), variants.end(), v) != variants.end()) ordered.push_back(v);
  if (ordered.size() != variants.size()) throw ContractError("compare: duplicate variants");

  if (!out_dir.empty()) fs::create_directories(out_dir);
  const fs::path partial = fs::path(out_dir) / "comparison.partial.json";

  ComparisonTable table;
  table.data_hash = split.data_hash;
  for (Variant v : ordered) {
    try {
      ExperimentConfig cfg = base;
      cfg.adapter.variant = v;
      if (!cfg.adapter.has_global_path()) cfg.adapter.g_num = GlobalTokens::zero;
      else if (cfg.adapter.g_num == GlobalTokens::zero) cfg.adapter.g_num = GlobalTokens::one;
      cfg.finalize();
      const TrainResult trained = train(init_model(cfg), split.train);
      table.rows.push_back(evaluate(trained.model, split.test, split.data_hash, cfg.train.workers));
    } catch (const std::exception& e) {
      if (!out_dir.empty()) {
        auto j = comparison_json(table);
        j["failed"] = {{"variant", variant_name(v)}, {"error", e.what()}};
        write_file(partial, j.dump(2) + "\n");
      }
      throw;
    }
    if (!out_dir.empty()) write_file(partial, comparison_json(table).dump(2) + "\n");
  }
  if (!out_dir.empty()) {
    write_file(fs::path(out_dir) / "comparison.json", comparison_json(table).dump(2) + "\n");
    write_file(fs::path(out_dir) / "comparison.txt", comparison_text(table));
    fs::remove(partial);
  }
  return table;
}

std::vector<int> grey_levels(const Matrix& m) {
  std::vector<int> out(m.values.size(), 128);
  if (m.values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(m.values.begin(), m.values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = static_cast<int>(std::lround(255.0 * (m.values[k] - *lo) / range));
  return out;
}

std::string pgm_text(const Matrix& m) {
  const auto levels = grey_levels(m);
  std::ostringstream o;
  o << "P2\n" << m.cols() << ' ' << m.rows() << "\n255\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) o << (c ? " " : "") << levels[r * m.cols() + c];
    o << '\n';
  }
  return o.str();
}

std::string csv_text(const Matrix& m, const std::vector<std::string>& header) {
  std::ostringstream o;
  if (!header.empty()) {
    if (header.size() != m.cols()) throw ShapeError("csv header does not match the column count");
    for (std::size_t c = 0; c < header.size(); ++c) {
      std::string quoted;
      for (char ch : header[c]) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      o << (c ? "," : "") << '"' << quoted << '"';
    }
    o << '\n';
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) o << (c ? "," : "") << fmt17(m(r, c));
    o << '\n';
  }
  return o.str();
}

Matrix parse_csv(const std::string& text, bool has_header) {
  std::istringstream in(text);
  std::string line;
  if (has_header && !std::getline(in, line)) throw IoError("csv lacks its header row");
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t n = 0;
    std::istringstream cells(line);
    for (std::string cell; std::getline(cells, cell, ',');) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("csv cell '" + cell + "' is not a number");
      }
      ++n;
    }
    if (rows == 0) cols = n;
    else if (n != cols) throw IoError("csv rows have different lengths");
    ++rows;
  }
  return Matrix(Shape{rows, cols}, std::move(values));
}

std::vector<std::string> export_artifacts(const AttentionArtifacts& art, std::size_t rows,
                                          std::size_t cols, const std::string& out_dir) {
  const Heatmaps maps = extract_attention(art, rows, cols);
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    const fs::path p = fs::path(out_dir) / name;
    write_file(p, text);
    written.push_back(p.string());
  };
  if (maps.local) {
    emit("local_weights.csv", csv_text(*maps.local));
    emit("local_weights.pgm", pgm_text(*maps.local));
  }
  if (maps.global) {
    emit("global_attention.csv", csv_text(*maps.global));
    emit("global_attention.pgm", pgm_text(*maps.global));
  }
  if (!art.similarity.values.empty()) {
    std::vector<std::string> header = art.words;
    if (header.size() != art.similarity.cols()) {
      header.clear();
      for (std::size_t j = 0; j < art.similarity.cols(); ++j) header.push_back("w" + std::to_string(j));
    }
    emit("similarity.csv", csv_text(art.similarity, header));
  }
  return written;
}

std::vector<std::string> export_attention(const Model& model, const SceneQA& qa, const std::string& out_dir) {
  const AdapterConfig& a = model.config.adapter;
  if (!a.has_global_path() && !a.has_local_path())
    throw ContractError("no attention artifacts for variant " + std::string(variant_name(a.variant)));
  Tape tape;
  const auto bound = bind_parameters(tape, model.params, FreezeMask{{""}});
  const auto w = AdapterWeights::from(bound, a);
  ItemForward f = forward_item(model, bound, w, qa);
  f.adapter.artifacts.words = adapter_prompt(qa, model.config);
  return export_artifacts(f.adapter.artifacts, qa.scene.rows, qa.scene.cols, out_dir);
}

}  // namespace paa

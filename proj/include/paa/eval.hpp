#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "paa/model.hpp"
#include "paa/parameters.hpp"
#include "paa/synth_qa.hpp"
#include "paa/trainer.hpp"

namespace paa {

struct CategoryAccuracy {
  std::size_t items = 0;
  std::size_t correct = 0;
  // Absent (nullopt) when the split has no item of this category.
  std::optional<double> accuracy() const {
    if (items == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(items);
  }
};

struct EvalReport {
  std::string variant;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t data_hash = 0;
  std::array<CategoryAccuracy, kNumTasks> categories{};
  std::size_t items = 0;
  std::size_t correct = 0;

  double total() const {
    return items == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(items);
  }
};

// Counts exact matches of predicted answer indices; metadata fields are left
// empty.
EvalReport score_predictions(const std::vector<SceneQA>& items, std::span<const std::size_t> predicted);

// Exact match of the argmax answer (lowest index on ties). Refuses with
// ConfigError when data_hash is not the hash of the model's data config.
// Items are scored on up to `workers` threads; the report does not depend on
// the count.
EvalReport evaluate(const Model& model, const std::vector<SceneQA>& items, std::uint64_t data_hash,
                    std::size_t workers = 1);
// Same, reading the data hash from the item file header.
EvalReport evaluate(const Checkpoint& ckpt, const ItemFile& file, std::size_t workers = 1);

nlohmann::ordered_json report_json(const EvalReport& r);
// Printable accuracy: percentage with two decimals, or "-" when absent.
std::string format_accuracy(std::optional<double> acc);

// Row label used in comparison tables.
std::string_view variant_label(Variant v);

struct ComparisonTable {
  std::uint64_t data_hash = 0;
  std::vector<EvalReport> rows;  // in kAllVariants order
};

// Trains and evaluates each variant on `split` with the same seed, data and
// schedule. Global-path variants keep base.adapter.g_num (one if it is zero);
// the others use zero. With a non-empty out_dir, each finished row is
// appended to out_dir/comparison.partial.json; on success comparison.json and
// comparison.txt replace it, on failure it is kept with the error recorded
// and the exception rethrown.
ComparisonTable compare(const ExperimentConfig& base, std::span<const Variant> variants,
                        const DatasetSplit& split, const std::string& out_dir = {});

nlohmann::ordered_json comparison_json(const ComparisonTable& table);
std::string comparison_text(const ComparisonTable& table);

// 0..255 grey levels by per-image min-max scaling; a constant image maps to
// 128 everywhere.
std::vector<int> grey_levels(const Matrix& m);
// Plain (P2) portable graymap.
std::string pgm_text(const Matrix& m);
// Comma-separated rows, 17 significant digits, optional header row.
std::string csv_text(const Matrix& m, const std::vector<std::string>& header = {});
Matrix parse_csv(const std::string& text, bool has_header);

// Writes local_weights.{csv,pgm}, global_attention.{csv,pgm} and
// similarity.csv for whichever artifacts exist; returns the paths written.
std::vector<std::string> export_artifacts(const AttentionArtifacts& art, std::size_t rows,
                                          std::size_t cols, const std::string& out_dir);
// Runs one item through the model and exports its attention. Variants
// without a prompt-aware attention path throw ContractError.
std::vector<std::string> export_attention(const Model& model, const SceneQA& qa,
                                          const std::string& out_dir);

}  // namespace paa

#include "paa/encoders.hpp"

#include <algorithm>
#include <cmath>

#include "paa/errors.hpp"
#include "paa/rng.hpp"

namespace paa {

FrozenImageEncoder FrozenImageEncoder::create(std::uint64_t seed, std::size_t rows,
                                              std::size_t cols, std::size_t channels) {
  if (rows == 0 || cols == 0 || channels == 0) throw ConfigError("image encoder: zero dimension");
  FrozenImageEncoder enc{seed, rows, cols, channels, Matrix(kTableRows, channels)};
  Rng rng(seed);
  const double sd = 1.0 / std::sqrt(3.0);
  for (auto& v : enc.table.values) v = sd * rng.normal();
  return enc;
}

FrozenTextEncoder FrozenTextEncoder::create(std::uint64_t seed, std::size_t dim) {
  if (dim == 0) throw ConfigError("text encoder: zero dimension");
  FrozenTextEncoder enc{seed, dim, prompt_vocabulary(), Matrix(prompt_vocabulary().size() + 1, dim)};
  Rng rng(seed);
  for (auto& v : enc.table.values) v = rng.normal();
  return enc;
}

std::size_t FrozenTextEncoder::index_of(const std::string& word) const {
  const auto it = std::find(vocab.begin(), vocab.end(), word);
  return it == vocab.end() ? unk_index() : static_cast<std::size_t>(it - vocab.begin());
}

PatchIndices patch_indices(const Scene& scene, const FrozenImageEncoder& enc) {
  if (scene.patch_count() == 0) throw ConfigError("encode_image: scene has no patches");
  if (scene.rows != enc.rows || scene.cols != enc.cols || scene.cells.size() != scene.patch_count()) {
    throw ConfigError("encode_image: scene grid " + std::to_string(scene.rows) + "x" +
                      std::to_string(scene.cols) + " does not match encoder grid " +
                      std::to_string(enc.rows) + "x" + std::to_string(enc.cols));
  }
  PatchIndices idx;
  for (std::size_t p = 0; p < scene.cells.size(); ++p) {
    const Cell& c = scene.cells[p];
    if (c.object >= kObjectNames.size()) {
      throw ConfigError("encode_image: object id " + std::to_string(c.object) + " outside vocabulary");
    }
    std::size_t color = kColorNames.size();  // "no color"
    if (c.object != kBackground) {
      if (c.color >= kColorNames.size()) {
        throw ConfigError("encode_image: color id " + std::to_string(c.color) + " outside vocabulary");
      }
      color = c.color;
    }
    idx.object.push_back(FrozenImageEncoder::kObjectBase + c.object);
    idx.color.push_back(FrozenImageEncoder::kColorBase + color);
    idx.region.push_back(FrozenImageEncoder::kRegionBase + scene.region_of(p));
  }
  return idx;
}

Tensor encode_image(const Tensor& table, const Scene& scene, const FrozenImageEncoder& enc) {
  const PatchIndices idx = patch_indices(scene, enc);
  return add(add(gather_rows(table, idx.object), gather_rows(table, idx.color)),
             gather_rows(table, idx.region));
}

Matrix encode_image(const Scene& scene, const FrozenImageEncoder& enc) {
  Tape tape;
  return encode_image(tape.constant(enc.table), scene, enc).to_matrix();
}

namespace {

std::vector<std::size_t> word_indices(const std::vector<std::string>& words,
                                      const FrozenTextEncoder& enc) {
  if (words.empty()) throw ContractError("encode_prompt: prompt must contain at least one word");
  std::vector<std::size_t> idx;
  idx.reserve(words.size());
  for (const auto& w : words) idx.push_back(enc.index_of(w));
  return idx;
}

}  // namespace

Tensor encode_prompt(const Tensor& table, const std::vector<std::string>& words,
                     const FrozenTextEncoder& enc) {
  return gather_rows(table, word_indices(words, enc));
}

Matrix encode_prompt(const std::vector<std::string>& words, const FrozenTextEncoder& enc) {
  Tape tape;
  return encode_prompt(tape.constant(enc.table), words, enc).to_matrix();
}

Tensor global_token(const Tensor& prompt, const GlobalTokenProjector& proj) {
  if (prompt.rows() == 0) throw ContractError("global_token: empty prompt");
  return add_row_bias(matmul(mean_rows(prompt), proj.weight), proj.bias);
}

Tensor project_words(const Tensor& prompt, const GlobalTokenProjector& proj) {
  if (prompt.rows() == 0) throw ContractError("project_words: empty prompt");
  return add_row_bias(matmul(prompt, proj.weight), proj.bias);
}

}  // namespace paa

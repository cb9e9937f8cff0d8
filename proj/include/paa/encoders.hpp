#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paa/matrix.hpp"
#include "paa/synth_qa.hpp"
#include "paa/tensor.hpp"

namespace paa {

// Frozen stand-in for a pretrained patch encoder. A patch descriptor
// (object, color, region) embeds as the sum of three rows of one table:
//   rows [0, 4)   objects, background included
//   rows [4, 9)   colors, the last one meaning "no color" (background)
//   rows [9, 14)  regions
// Entries are N(0, 1/3); a summed embedding has unit variance per channel.
struct FrozenImageEncoder {
  std::uint64_t seed = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 0;
  Matrix table;

  static FrozenImageEncoder create(std::uint64_t seed, std::size_t rows, std::size_t cols,
                                   std::size_t channels);

  static constexpr std::size_t kObjectBase = 0;
  static constexpr std::size_t kColorBase = kObjectNames.size();
  static constexpr std::size_t kRegionBase = kColorBase + kColorNames.size() + 1;
  static constexpr std::size_t kTableRows = kRegionBase + kRegionNames.size();
};

// Frozen word-embedding table over prompt_vocabulary(); the final row is UNK.
struct FrozenTextEncoder {
  std::uint64_t seed = 0;
  std::size_t dim = 0;
  std::vector<std::string> vocab;
  Matrix table;

  static FrozenTextEncoder create(std::uint64_t seed, std::size_t dim);
  std::size_t unk_index() const { return vocab.size(); }
  std::size_t index_of(const std::string& word) const;
};

// Maps the pooled D-dim prompt feature into the C-dim patch space.
struct GlobalTokenProjector {
  Tensor weight;  // D x C
  Tensor bias;    // 1 x C
};

// Table row indices for the three descriptor parts of each patch.
struct PatchIndices {
  std::vector<std::size_t> object;
  std::vector<std::size_t> color;
  std::vector<std::size_t> region;
};
PatchIndices patch_indices(const Scene& scene, const FrozenImageEncoder& enc);

// N x C, row i for patch i in row-major order.
Matrix encode_image(const Scene& scene, const FrozenImageEncoder& enc);
// Same computation on a tape against a bound copy of enc.table.
Tensor encode_image(const Tensor& table, const Scene& scene, const FrozenImageEncoder& enc);

Matrix encode_prompt(const std::vector<std::string>& words, const FrozenTextEncoder& enc);
Tensor encode_prompt(const Tensor& table, const std::vector<std::string>& words,
                     const FrozenTextEncoder& enc);

// Mean-pools Y over words (1 x D) then projects to 1 x C.
Tensor global_token(const Tensor& prompt, const GlobalTokenProjector& proj);
// Projects every word row: M x C.
Tensor project_words(const Tensor& prompt, const GlobalTokenProjector& proj);

}  // namespace paa

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paa/encoders.hpp"
#include "paa/nn.hpp"
#include "paa/parameters.hpp"
#include "paa/tensor.hpp"

namespace paa {

enum class Variant { linear, cross_attention, global_only, local_only, global_plus_local };
inline constexpr Variant kAllVariants[] = {Variant::linear, Variant::cross_attention,
                                           Variant::local_only, Variant::global_only,
                                           Variant::global_plus_local};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

// Number of prompt-derived rows appended in global attention: none, the one
// pooled token, or every word ("L").
enum class GlobalTokens { zero, one, all };
std::string_view global_tokens_name(GlobalTokens g);
GlobalTokens parse_global_tokens(std::string_view name);

struct AdapterConfig {
  Variant variant = Variant::global_plus_local;
  std::size_t patches = 9;     // N
  std::size_t channels = 64;   // C, visual feature width
  std::size_t word_dim = 64;    // D, prompt feature width
  std::size_t inner_dim = 64;  // C_i, global attention output width
  std::size_t attn_dim = 64;   // E, similarity / cross-attention width
  std::size_t out_dim = 64;    // C', token width fed downstream
  GlobalTokens g_num = GlobalTokens::one;
  double ratio = 0.8;  // weight of the local path when both paths exist
  std::size_t heads = 1;
  std::uint64_t seed = 0;

  // Throws ConfigError on inconsistent settings. g_num must be zero exactly
  // when the variant has no global path.
  void validate() const;

  bool has_global_path() const {
    return variant == Variant::global_only || variant == Variant::global_plus_local;
  }
  bool has_local_path() const {
    return variant == Variant::local_only || variant == Variant::global_plus_local;
  }
  bool prompt_aware() const { return variant != Variant::linear; }
  // Width of one output token.
  std::size_t token_width() const {
    return variant == Variant::cross_attention ? attn_dim : out_dim;
  }
  // Width of the features the output MLP consumes.
  std::size_t mlp_in() const { return variant == Variant::local_only ? channels : inner_dim; }
};

// Trainable tensors for one variant, Glorot-uniform weights and zero biases.
// Each tensor draws from its own stream derived from (seed, name), so shared
// names start identical across variants. Names:
//   adapter.linear.w                        C x C'
//   adapter.cross.{w_q, w_k, w_v}           D x E, C x E, C x E
//   adapter.global.{w_q, w_k, w_v, w_o}     C x C_i (w_o: C_i x C_i)
//   adapter.local.{w_i, w_y}                C_i x E, D x E
//   adapter.mlp.{w1, b1, w2, b2}            C_i -> 2 C_i -> C'
//   projection.{w, b}                       D x C, 1 x C
ParameterSet init_adapter_params(const AdapterConfig& cfg);

Matrix glorot_uniform(std::uint64_t seed, std::size_t fan_in, std::size_t fan_out);

// Bound view of the tensors a variant uses; unused members stay invalid.
struct AdapterWeights {
  Tensor linear_w;
  Tensor cross_w_q, cross_w_k, cross_w_v;
  AttentionParams global_attn;
  Tensor local_w_i, local_w_y;
  std::vector<Affine> mlp;
  GlobalTokenProjector projector;

  static AdapterWeights from(const BoundParameters& bound, const AdapterConfig& cfg);
};

struct AttentionArtifacts {
  Matrix similarity;        // S, N x M; sums to one over all entries
  Matrix patch_weights;     // a, 1 x N; a_i is row i of S summed
  Matrix global_attention;  // (N+g) x (N+g) self-attention weights, empty without a global path
  std::size_t global_tokens = 0;
  std::vector<std::string> words;  // column labels of S, when known
};

Tensor linear_adapter(const Tensor& x, const AdapterWeights& w);

struct CrossAttentionResult {
  Tensor tokens;     // M x E
  Matrix attention;  // M x N, each row sums to one
};
CrossAttentionResult cross_attention_adapter(const Tensor& x, const Tensor& y,
                                             const AdapterWeights& w);

struct GlobalAttentionResult {
  Tensor features;  // N x C_i
  Matrix weights;   // (N+g) x (N+g)
  std::size_t sequence_length = 0;
};
// Appends the g rows of prompt_tokens after the N patches, runs
// self-attention over N+g rows and keeps the first N output rows. An invalid
// (default) prompt_tokens means g = 0.
GlobalAttentionResult global_attention(const Tensor& x, const Tensor& prompt_tokens,
                                       const AdapterWeights& w);

struct LocalAttentionResult {
  Tensor tokens;         // N x C'
  Tensor similarity;     // N x M
  Tensor patch_weights;  // N x 1
};
// S = SOFTMAX((I W_i)(Y W_y)^T / sqrt(E)) over the whole matrix, a = row sums
// of S, tokens = MLP(diag(a) I).
LocalAttentionResult local_attention(const Tensor& features, const Tensor& y,
                                     const AdapterWeights& w);

struct AdapterOutput {
  Tensor tokens;
  AttentionArtifacts artifacts;
};

// The prompt-derived rows for global attention under cfg.g_num (invalid when
// g_num is zero).
Tensor global_prompt_tokens(const Tensor& y, const AdapterConfig& cfg, const AdapterWeights& w);

// global_only, local_only or global_plus_local. With both paths the output is
// ratio * local + (1 - ratio) * global, the two sharing the output MLP.
AdapterOutput prompt_aware_adapter(const Tensor& x, const Tensor& y, const Tensor& y_global,
                                   const AdapterConfig& cfg, const AdapterWeights& w);

// Any variant. y_global is derived from y via global_prompt_tokens.
AdapterOutput run_adapter(const Tensor& x, const Tensor& y, const AdapterConfig& cfg,
                          const AdapterWeights& w);

struct Heatmaps {
  std::optional<Matrix> local;   // rows x cols grid of a
  std::optional<Matrix> global;  // attention from the global token(s) to each patch
};
// Reshapes attention artifacts onto the patch grid without changing values.
// With several global tokens their rows are averaged.
Heatmaps extract_attention(const AttentionArtifacts& artifacts, std::size_t rows, std::size_t cols);

}  // namespace paa

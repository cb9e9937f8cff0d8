#include "paa/adapters.hpp"

#include <cmath>

#include "paa/errors.hpp"
#include "paa/hash.hpp"
#include "paa/rng.hpp"

namespace paa {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::linear: return "linear";
    case Variant::cross_attention: return "cross_attention";
    case Variant::global_only: return "global_only";
    case Variant::local_only: return "local_only";
    case Variant::global_plus_local: return "global_plus_local";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants)
    if (variant_name(v) == name) return v;
  throw ConfigError("unknown adapter variant '" + std::string(name) + "'");
}

std::string_view global_tokens_name(GlobalTokens g) {
  switch (g) {
    case GlobalTokens::zero: return "0";
    case GlobalTokens::one: return "1";
    case GlobalTokens::all: return "L";
  }
  return "?";
}

GlobalTokens parse_global_tokens(std::string_view name) {
  if (name == "0") return GlobalTokens::zero;
  if (name == "1") return GlobalTokens::one;
  if (name == "L") return GlobalTokens::all;
  throw ConfigError("g_num must be 0, 1 or L, got '" + std::string(name) + "'");
}

void AdapterConfig::validate() const {
  if (patches == 0 || channels == 0 || word_dim == 0 || inner_dim == 0 || attn_dim == 0 ||
      out_dim == 0 || heads == 0) {
    throw ConfigError("adapter dimensions must be positive");
  }
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("adapter ratio must lie in [0, 1]");
  if (has_global_path() != (g_num != GlobalTokens::zero)) {
    throw ConfigError("variant " + std::string(variant_name(variant)) + " is incompatible with g_num=" +
                      std::string(global_tokens_name(g_num)));
  }
  if (has_global_path() && inner_dim % heads != 0) {
    throw ConfigError("inner_dim " + std::to_string(inner_dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

Matrix glorot_uniform(std::uint64_t seed, std::size_t fan_in, std::size_t fan_out) {
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (auto& v : m.values) v = rng.uniform(-limit, limit);
  return m;
}

ParameterSet init_adapter_params(const AdapterConfig& cfg) {
  cfg.validate();
  ParameterSet p;
  auto weight = [&](const std::string& name, std::size_t in, std::size_t out) {
    p.emplace(name, glorot_uniform(derive_seed(cfg.seed, fnv1a64(name)), in, out));
  };
  auto bias = [&](const std::string& name, std::size_t out) { p.emplace(name, Matrix(1, out)); };

  const std::size_t c = cfg.channels, d = cfg.word_dim, ci = cfg.inner_dim, e = cfg.attn_dim;
  switch (cfg.variant) {
    case Variant::linear:
      weight("adapter.linear.w", c, cfg.out_dim);
      return p;
    case Variant::cross_attention:
      weight("adapter.cross.w_q", d, e);
      weight("adapter.cross.w_k", c, e);
      weight("adapter.cross.w_v", c, e);
      return p;
    default:
      break;
  }
  if (cfg.has_global_path()) {
    weight("adapter.global.w_q", c, ci);
    weight("adapter.global.w_k", c, ci);
    weight("adapter.global.w_v", c, ci);
    weight("adapter.global.w_o", ci, ci);
    weight("projection.w", d, c);
    bias("projection.b", c);
  }
  if (cfg.has_local_path()) {
    weight("adapter.local.w_i", cfg.mlp_in(), e);
    weight("adapter.local.w_y", d, e);
  }
  const std::size_t in = cfg.mlp_in(), hidden = 2 * cfg.mlp_in();
  weight("adapter.mlp.w1", in, hidden);
  bias("adapter.mlp.b1", hidden);
  weight("adapter.mlp.w2", hidden, cfg.out_dim);
  bias("adapter.mlp.b2", cfg.out_dim);
  return p;
}

AdapterWeights AdapterWeights::from(const BoundParameters& b, const AdapterConfig& cfg) {
  AdapterWeights w;
  switch (cfg.variant) {
    case Variant::linear:
      w.linear_w = lookup(b, "adapter.linear.w");
      return w;
    case Variant::cross_attention:
      w.cross_w_q = lookup(b, "adapter.cross.w_q");
      w.cross_w_k = lookup(b, "adapter.cross.w_k");
      w.cross_w_v = lookup(b, "adapter.cross.w_v");
      return w;
    default:
      break;
  }
  if (cfg.has_global_path()) {
    w.global_attn = {lookup(b, "adapter.global.w_q"), lookup(b, "adapter.global.w_k"),
                     lookup(b, "adapter.global.w_v"), lookup(b, "adapter.global.w_o"), cfg.heads};
    w.projector = {lookup(b, "projection.w"), lookup(b, "projection.b")};
  }
  if (cfg.has_local_path()) {
    w.local_w_i = lookup(b, "adapter.local.w_i");
    w.local_w_y = lookup(b, "adapter.local.w_y");
  }
  w.mlp = {{lookup(b, "adapter.mlp.w1"), lookup(b, "adapter.mlp.b1")},
           {lookup(b, "adapter.mlp.w2"), lookup(b, "adapter.mlp.b2")}};
  return w;
}

namespace {

void require_nonempty(const Tensor& t, const char* op, const char* what) {
  if (t.rows() == 0) throw ContractError(std::string(op) + ": " + what + " must have at least one row");
}

void require(bool ok, const char* op, const Shape& a, const Shape& b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.to_string() + " and " +
                     b.to_string());
  }
}

}  // namespace

Tensor linear_adapter(const Tensor& x, const AdapterWeights& w) {
  require_nonempty(x, "linear_adapter", "visual features");
  require(x.cols() == w.linear_w.rows(), "linear_adapter", x.shape(), w.linear_w.shape());
  return matmul(x, w.linear_w);
}

CrossAttentionResult cross_attention_adapter(const Tensor& x, const Tensor& y,
                                             const AdapterWeights& w) {
  require_nonempty(x, "cross_attention_adapter", "visual features");
  require_nonempty(y, "cross_attention_adapter", "prompt");
  require(y.cols() == w.cross_w_q.rows(), "cross_attention_adapter", y.shape(), w.cross_w_q.shape());
  require(x.cols() == w.cross_w_k.rows(), "cross_attention_adapter", x.shape(), w.cross_w_k.shape());
  const Tensor q = matmul(y, w.cross_w_q);
  const Tensor k = matmul(x, w.cross_w_k);
  const Tensor v = matmul(x, w.cross_w_v);
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  const Tensor attn = softmax_rows(scale(matmul(q, transpose(k)), inv));
  return {matmul(attn, v), attn.to_matrix()};
}

GlobalAttentionResult global_attention(const Tensor& x, const Tensor& prompt_tokens,
                                       const AdapterWeights& w) {
  require_nonempty(x, "global_attention", "visual features");
  const std::size_t n = x.rows();
  Tensor sequence = x;
  if (prompt_tokens.valid() && prompt_tokens.rows() > 0) {
    require(prompt_tokens.cols() == x.cols(), "global_attention", x.shape(), prompt_tokens.shape());
    sequence = concat_rows(x, prompt_tokens);
  }
  auto sa = self_attention(sequence, w.global_attn);
  const std::size_t length = sequence.rows();
  const Tensor kept = length == n ? sa.output : slice_rows(sa.output, 0, n);
  return {kept, std::move(sa.weights), length};
}

LocalAttentionResult local_attention(const Tensor& features, const Tensor& y,
                                     const AdapterWeights& w) {
  require_nonempty(features, "local_attention", "visual features");
  require_nonempty(y, "local_attention", "prompt");
  require(features.cols() == w.local_w_i.rows(), "local_attention", features.shape(), w.local_w_i.shape());
  require(y.cols() == w.local_w_y.rows(), "local_attention", y.shape(), w.local_w_y.shape());
  const Tensor patches = matmul(features, w.local_w_i);
  const Tensor words = matmul(y, w.local_w_y);
  const double inv = 1.0 / std::sqrt(static_cast<double>(patches.cols()));
  const Tensor s = softmax_global(scale(matmul(patches, transpose(words)), inv));
  const Tensor a = row_sums(s);
  const Tensor tokens = mlp(scale_rows(features, a), w.mlp);
  return {tokens, s, a};
}

Tensor global_prompt_tokens(const Tensor& y, const AdapterConfig& cfg, const AdapterWeights& w) {
  switch (cfg.g_num) {
    case GlobalTokens::zero: return Tensor{};
    case GlobalTokens::one: return global_token(y, w.projector);
    case GlobalTokens::all: return project_words(y, w.projector);
  }
  return Tensor{};
}

AdapterOutput prompt_aware_adapter(const Tensor& x, const Tensor& y, const Tensor& y_global,
                                   const AdapterConfig& cfg, const AdapterWeights& w) {
  if (!cfg.has_global_path() && !cfg.has_local_path()) {
    throw ConfigError("prompt_aware_adapter: variant " + std::string(variant_name(cfg.variant)) +
                      " has neither a global nor a local path");
  }
  require_nonempty(y, "prompt_aware_adapter", "prompt");
  if (x.rows() != cfg.patches) {
    throw ShapeError("prompt_aware_adapter: expected " + std::to_string(cfg.patches) +
                     " patches, got " + x.shape().to_string());
  }
  AdapterOutput out;
  Tensor features = x;
  if (cfg.has_global_path()) {
    const std::size_t expected = cfg.g_num == GlobalTokens::one ? 1 : y.rows();
    if (!y_global.valid() || y_global.rows() != expected) {
      throw ConfigError("prompt_aware_adapter: g_num=" + std::string(global_tokens_name(cfg.g_num)) +
                        " needs " + std::to_string(expected) + " global token rows");
    }
    auto g = global_attention(x, y_global, w);
    features = g.features;
    out.artifacts.global_attention = std::move(g.weights);
    out.artifacts.global_tokens = expected;
  }
  if (!cfg.has_local_path()) {
    out.tokens = mlp(features, w.mlp);
    return out;
  }
  auto local = local_attention(features, y, w);
  out.artifacts.similarity = local.similarity.to_matrix();
  out.artifacts.patch_weights = Matrix(Shape{1, local.patch_weights.rows()},
                                       std::vector<double>(local.patch_weights.values().begin(),
                                                           local.patch_weights.values().end()));
  if (!cfg.has_global_path()) {
    out.tokens = local.tokens;
    return out;
  }
  const Tensor global_out = mlp(features, w.mlp);
  out.tokens = add(scale(local.tokens, cfg.ratio), scale(global_out, 1.0 - cfg.ratio));
  return out;
}

AdapterOutput run_adapter(const Tensor& x, const Tensor& y, const AdapterConfig& cfg,
                          const AdapterWeights& w) {
  switch (cfg.variant) {
    case Variant::linear:
      return {linear_adapter(x, w), {}};
    case Variant::cross_attention:
      return {cross_attention_adapter(x, y, w).tokens, {}};
    default:
      return prompt_aware_adapter(x, y, global_prompt_tokens(y, cfg, w), cfg, w);
  }
}

Heatmaps extract_attention(const AttentionArtifacts& art, std::size_t rows, std::size_t cols) {
  const bool has_local = art.patch_weights.values.size() > 0;
  const bool has_global = art.global_tokens > 0 && art.global_attention.rows() > art.global_tokens;
  if (!has_local && !has_global) throw ContractError("extract_attention: artifacts are empty");
  const std::size_t n = has_local ? art.patch_weights.values.size()
                                  : art.global_attention.rows() - art.global_tokens;
  if (n != rows * cols) {
    throw ShapeError("extract_attention: " + std::to_string(n) + " patches cannot fill a " +
                     std::to_string(rows) + "x" + std::to_string(cols) + " grid");
  }
  Heatmaps maps;
  if (has_local) maps.local = Matrix(Shape{rows, cols}, art.patch_weights.values);
  if (has_global) {
    if (art.global_attention.rows() != n + art.global_tokens) {
      throw ShapeError("extract_attention: global attention does not cover the patch grid");
    }
    Matrix g(rows, cols);
    for (std::size_t t = 0; t < art.global_tokens; ++t)
      for (std::size_t p = 0; p < n; ++p)
        g.values[p] += art.global_attention(n + t, p) / static_cast<double>(art.global_tokens);
    maps.global = std::move(g);
  }
  return maps;
}

}  // namespace paa

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "paa/tensor.hpp"

namespace paa {

// Scaled dot-product self-attention weights. Each projection maps the input
// width c to the output width, which is split evenly across `heads`.
struct AttentionParams {
  Tensor w_q;  // c x c_out
  Tensor w_k;  // c x c_out
  Tensor w_v;  // c x c_out
  Tensor w_o;  // c_out x c_out
  std::size_t heads = 1;
};

struct SelfAttentionResult {
  Tensor output;   // n x c_out
  Matrix weights;  // n x n, averaged over heads
};

SelfAttentionResult self_attention(const Tensor& z, const AttentionParams& params);

struct Affine {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
};

// Affine layers with GELU between consecutive layers (none after the last).
Tensor mlp(const Tensor& z, std::span<const Affine> layers);

// Max over entries of |tape - fd| / max(|tape|, |fd|, kGradCheckFloor) where
// fd is the central difference (f(x + eps e) - f(x - eps e)) / (2 eps).
inline constexpr double kGradCheckFloor = 1e-6;

using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;

double grad_check(const ScalarFn& f, const Matrix& x, double eps);

}  // namespace paa

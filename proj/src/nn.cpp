#include "paa/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "paa/errors.hpp"

namespace paa {

SelfAttentionResult self_attention(const Tensor& z, const AttentionParams& p) {
  if (z.rows() == 0) throw ShapeError("self_attention: empty sequence");
  if (p.w_q.rows() != z.cols() || p.w_k.rows() != z.cols() || p.w_v.rows() != z.cols()) {
    throw ShapeError("self_attention: input " + z.shape().to_string() + " vs projections " +
                     p.w_q.shape().to_string() + ", " + p.w_k.shape().to_string() + ", " +
                     p.w_v.shape().to_string());
  }
  const std::size_t width = p.w_q.cols();
  if (p.w_k.cols() != width || p.w_v.cols() != width || p.w_o.rows() != width) {
    throw ShapeError("self_attention: projection widths disagree");
  }
  if (p.heads == 0 || width % p.heads != 0) {
    throw ShapeError("self_attention: width " + std::to_string(width) + " not divisible by " +
                     std::to_string(p.heads) + " heads");
  }
  const std::size_t n = z.rows();
  const std::size_t dh = width / p.heads;
  const Tensor q = matmul(z, p.w_q);
  const Tensor k = matmul(z, p.w_k);
  const Tensor v = matmul(z, p.w_v);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix weights(n, n);
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Tensor qh = p.heads == 1 ? q : slice_cols(q, h * dh, (h + 1) * dh);
    const Tensor kh = p.heads == 1 ? k : slice_cols(k, h * dh, (h + 1) * dh);
    const Tensor vh = p.heads == 1 ? v : slice_cols(v, h * dh, (h + 1) * dh);
    const Tensor attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_scale));
    const auto av = attn.values();
    for (std::size_t i = 0; i < av.size(); ++i) weights.values[i] += av[i] / static_cast<double>(p.heads);
    heads.push_back(matmul(attn, vh));
  }
  const Tensor joined = p.heads == 1 ? heads[0] : concat_cols(heads);
  return {matmul(joined, p.w_o), std::move(weights)};
}

Tensor mlp(const Tensor& z, std::span<const Affine> layers) {
  if (layers.empty()) throw ContractError("mlp: no layers");
  Tensor h = z;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].weight.rows() != h.cols()) {
      throw ShapeError("mlp: layer " + std::to_string(l) + " expects width " +
                       std::to_string(layers[l].weight.rows()) + ", input is " +
                       h.shape().to_string());
    }
    h = add_row_bias(matmul(h, layers[l].weight), layers[l].bias);
    if (l + 1 < layers.size()) h = gelu(h);
  }
  return h;
}

namespace {

double evaluate(const ScalarFn& f, const Matrix& x, std::size_t entry) {
  Tape tape;
  const Tensor out = f(tape, tape.constant(x));
  if (out.shape().size() != 1) throw ContractError("grad_check: function is not scalar-valued");
  for (NodeId id = 0; id < tape.size(); ++id) {
    for (double v : tape.node(id).value) {
      if (!std::isfinite(v)) {
        throw NumericalError("grad_check: non-finite intermediate while perturbing entry " +
                             std::to_string(entry));
      }
    }
  }
  return out.item();
}

}  // namespace

double grad_check(const ScalarFn& f, const Matrix& x, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw ContractError("grad_check: eps must lie in (0, 1e-2]");
  Tape tape;
  const Tensor input = tape.leaf(x, true);
  const Tensor out = f(tape, input);
  if (out.shape().size() != 1) throw ContractError("grad_check: function is not scalar-valued");
  tape.backward(out);
  const auto analytic = input.grad();

  double worst = 0.0;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    if (!std::isfinite(analytic[i])) {
      throw NumericalError("grad_check: non-finite gradient at entry " + std::to_string(i));
    }
    Matrix plus = x, minus = x;
    plus.values[i] += eps;
    minus.values[i] -= eps;
    const double fd = (evaluate(f, plus, i) - evaluate(f, minus, i)) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(fd), kGradCheckFloor});
    worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
  }
  return worst;
}

}  // namespace paa

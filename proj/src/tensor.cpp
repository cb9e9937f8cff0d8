#include "paa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "paa/errors.hpp"

namespace paa {

// ---- Tensor ---------------------------------------------------------------

const Shape& Tensor::shape() const { return tape_->node(id_).shape; }

std::span<const double> Tensor::values() const { return tape_->node(id_).value; }

std::span<const double> Tensor::grad() const { return tape_->node(id_).grad; }

bool Tensor::requires_grad() const { return tape_->node(id_).requires_grad; }

double Tensor::item() const {
  if (shape().size() != 1) throw ShapeError("item() on tensor of shape " + shape().to_string());
  return values()[0];
}

Matrix Tensor::to_matrix() const {
  const auto v = values();
  return Matrix(shape(), std::vector<double>(v.begin(), v.end()));
}

Matrix Tensor::grad_matrix() const {
  const auto g = grad();
  return Matrix(shape(), std::vector<double>(g.begin(), g.end()));
}

// ---- Tape -----------------------------------------------------------------

Tensor Tape::leaf(Matrix m, bool requires_grad) {
  Node n;
  n.shape = m.shape;
  n.grad.assign(m.values.size(), 0.0);
  n.value = std::move(m.values);
  n.requires_grad = requires_grad;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::record(Shape shape, std::vector<double> value, std::vector<NodeId> parents,
                    BackwardFn fn) {
  Node n;
  n.shape = shape;
  n.grad.assign(value.size(), 0.0);
  n.value = std::move(value);
  n.is_leaf = false;
  n.requires_grad = std::any_of(parents.begin(), parents.end(),
                                [this](NodeId p) { return nodes_[p].requires_grad; });
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

void Tape::accumulate(NodeId id, std::span<const double> delta) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  for (std::size_t i = 0; i < delta.size(); ++i) n.grad[i] += delta[i];
}

void Tape::backward(const Tensor& loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  if (loss.shape().size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + loss.shape().to_string());
  }
  const NodeId root = loss.node_id();
  for (NodeId id = 0; id <= root; ++id) {
    Node& n = nodes_[id];
    if (!n.is_leaf) std::fill(n.grad.begin(), n.grad.end(), 0.0);
  }
  Node& top = nodes_[root];
  if (!top.requires_grad) return;
  top.grad[0] += 1.0;
  for (NodeId id = root + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.is_leaf && n.requires_grad && n.backward) n.backward(*this, id);
  }
}

void Tape::zero_grad() {
  for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

// ---- operations -----------------------------------------------------------

namespace {

void same_tape(const Tensor& a, const Tensor& b, const char* op) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.to_string() + " and " +
                   b.to_string());
}

std::vector<double> copy(std::span<const double> s) { return {s.begin(), s.end()}; }

// c (p x r) = a (p x q) * b (q x r), all row-major.
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t p, std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = a[i * q + k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < r; ++j) c[i * r + j] += aik * b[k * r + j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  same_tape(a, b, "matmul");
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.cols != sb.rows) shape_fail("matmul", sa, sb);
  const std::size_t p = sa.rows, q = sa.cols, r = sb.cols;
  std::vector<double> out(p * r, 0.0);
  gemm(a.values(), b.values(), out, p, q, r);
  const NodeId ia = a.node_id(), ib = b.node_id();
  return a.tape().record({p, r}, std::move(out), {ia, ib}, [=](Tape& t, NodeId self) {
    const auto& g = t.node(self).grad;
    if (t.node(ia).requires_grad) {
      // dA = dC * B^T
      const auto& bv = t.node(ib).value;
      std::vector<double> da(p * q, 0.0);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < r; ++j) {
          const double gij = g[i * r + j];
          for (std::size_t k = 0; k < q; ++k) da[i * q + k] += gij * bv[k * r + j];
        }
      t.accumulate(ia, da);
    }
    if (t.node(ib).requires_grad) {
      // dB = A^T * dC
      const auto& av = t.node(ia).value;
      std::vector<double> db(q * r, 0.0);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < q; ++k) {
          const double aik = av[i * q + k];
          for (std::size_t j = 0; j < r; ++j) db[k * r + j] += aik * g[i * r + j];
        }
      t.accumulate(ib, db);
    }
  });
}

Tensor transpose(const Tensor& a) {
  const Shape s = a.shape();
  const auto v = a.values();
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) out[j * s.rows + i] = v[i * s.cols + j];
  const NodeId ia = a.node_id();
  return a.tape().record({s.cols, s.rows}, std::move(out), {ia}, [=](Tape& t, NodeId self) {
    const auto& g = t.node(self).grad;
    std::vector<double> da(s.size());
    for (std::size_t i = 0; i < s.rows; ++i)
      for (std::size_t j = 0; j < s.cols; ++j) da[i * s.cols + j] = g[j * s.rows + i];
    t.accumulate(ia, da);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  same_tape(a, b, "add");
  if (a.shape() != b.shape()) shape_fail("add", a.shape(), b.shape());
  const auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const NodeId ia = a.node_id(), ib = b.node_id();
  return a.tape().record(a.shape(), std::move(out), {ia, ib}, [=](Tape& t, NodeId self) {
    const auto g = copy(t.node(self).grad);
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  same_tape(a, b, "hadamard");
  if (a.shape() != b.shape()) shape_fail("hadamard", a.shape(), b.shape());
  const auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const NodeId ia = a.node_id(), ib = b.node_id();
  return a.tape().record(a.shape(), std::move(out), {ia, ib}, [=](Tape& t, NodeId self) {
    const auto& g = t.node(self).grad;
    const auto& x = t.node(ia).value;
    const auto& y = t.node(ib).value;
    std::vector<double> da(g.size()), db(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      da[i] = g[i] * y[i];
      db[i] = g[i] * x[i];
    }
    t.accumulate(ia, da);
    t.accumulate(ib, db);
  });
}

Tensor scale(const Tensor& a, double factor) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  const NodeId ia = a.node_id();
  return a.tape().record(a.shape(), std::move(out), {ia}, [=](Tape& t, NodeId self) {
    auto g = copy(t.node(self).grad);
    for (auto& x : g) x *= factor;
    t.accumulate(ia, g);
  });
}

Tensor add_row_bias(const Tensor& a, const Tensor& bias) {
  same_tape(a, bias, "add_row_bias");
  const Shape s = a.shape();
  if (bias.rows() != 1 || bias.cols() != s.cols) shape_fail("add_row_bias", s, bias.shape());
  const auto av = a.values(), bv = bias.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) out[i * s.cols + j] = av[i * s.cols + j] + bv[j];
  const NodeId ia = a.node_id(), ib = bias.node_id();
  return a.tape().record(s, std::move(out), {ia, ib}, [=](Tape& t, NodeId self) {
    const auto g = copy(t.node(self).grad);
    t.accumulate(ia, g);
    std::vector<double> db(s.cols, 0.0);
    for (std::size_t i = 0; i < s.rows; ++i)
      for (std::size_t j = 0; j < s.cols; ++j) db[j] += g[i * s.cols + j];
    t.accumulate(ib, db);
  });
}

Tensor scale_rows(const Tensor& a, const Tensor& weights) {
  same_tape(a, weights, "scale_rows");
  const Shape s = a.shape();
  if (weights.rows() != s.rows || weights.cols() != 1) shape_fail("scale_rows", s, weights.shape());
  const auto av = a.values(), wv = weights.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) out[i * s.cols + j] = wv[i] * av[i * s.cols + j];
  const NodeId ia = a.node_id(), iw = weights.node_id();
  return a.tape().record(s, std::move(out), {ia, iw}, [=](Tape& t, NodeId self) {
    const auto& g = t.node(self).grad;
    const auto& x = t.node(ia).value;
    const auto& w = t.node(iw).value;
    std::vector<double> da(s.size()), dw(s.rows, 0.0);
    for (std::size_t i = 0; i < s.rows; ++i)
      for (std::size_t j = 0; j < s.cols; ++j) {
        const std::size_t k = i * s.cols + j;
        da[k] = g[k] * w[i];
        dw[i] += g[k] * x[k];
      }
    t.accumulate(ia, da);
    t.accumulate(iw, dw);
  });
}

Tensor row_sums(const Tensor& a) {
  const Shape s = a.shape();
  const auto av = a.values();
  std::vector<double> out(s.rows, 0.0);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) out[i] += av[i * s.cols + j];
  const NodeId ia = a.node_id();
  return a.tape().record({s.rows, 1}, std::move(out), {ia}, [=](Tape& t, NodeId self) {
    const auto& g = t.node(self).grad;
    std::vector<double> da(s.size());
    for (std::size_t i = 0; i < s.rows; ++i)
      for (std::size_t j = 0; j < s.cols; ++j) da[i * s.cols + j] = g[i];
    t.accumulate(ia, da);
  });
}

Tensor mean_rows(const Tensor& a) {
  const Shape s = a.shape();
  if (s.rows == 0) throw ShapeError("mean_rows: empty input " + s.to_string());
  const auto av = a.values();
  const double inv = 1.0 / static_cast<double>(s.rows);
  std::vector<double> out(s.cols, 0.0);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) out[j] += av[i * s.cols + j];
  for (auto& x : out) x *= inv;
  const NodeId ia = a.node_id();
  return a.tape().record({1, s.cols}, std::move(out), {ia}, [=](Tape& t, NodeId self) {
    const auto& g = t.node(self).grad;
    std::vector<double> da(s.size());
    for (std::size_t i = 0; i < s.rows; ++i)
      for (std::size_t j = 0; j < s.cols; ++j) da[i * s.cols + j] = g[j] * inv;
    t.accumulate(ia, da);
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double x : a.values()) total += x;
  const NodeId ia = a.node_id();
  const std::size_t n = a.shape().size();
  return a.tape().record({1, 1}, {total}, {ia}, [=](Tape& t, NodeId self) {
    std::vector<double> da(n, t.node(self).grad[0]);
    t.accumulate(ia, da);
  });
}

Tensor softmax_rows(const Tensor& a) {
  const Shape s = a.shape();
  const auto av = a.values();
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.rows; ++i) {
    const double* row = av.data() + i * s.cols;
    const double mx = *std::max_element(row, row + s.cols);
    double z = 0.0;
    for (std::size_t j = 0; j < s.cols; ++j) {
      out[i * s.cols + j] = std::exp(row[j] - mx);
      z += out[i * s.cols + j];
    }
    for (std::size_t j = 0; j < s.cols; ++j) out[i * s.cols + j] /= z;
  }
  const NodeId ia = a.node_id();
  return a.tape().record(s, std::move(out), {ia}, [=](Tape& t, NodeId self) {
    const auto& g = t.node(self).grad;
    const auto& y = t.node(self).value;
    std::vector<double> da(s.size());
    for (std::size_t i = 0; i < s.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < s.cols; ++j) dot += g[i * s.cols + j] * y[i * s.cols + j];
      for (std::size_t j = 0; j < s.cols; ++j) {
        const std::size_t k = i * s.cols + j;
        da[k] = y[k] * (g[k] - dot);
      }
    }
    t.accumulate(ia, da);
  });
}

Tensor softmax_global(const Tensor& a) {
  const Shape s = a.shape();
  const auto av = a.values();
  const double mx = *std::max_element(av.begin(), av.end());
  std::vector<double> out(s.size());
  double z = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::exp(av[k] - mx);
    z += out[k];
  }
  for (auto& x : out) x /= z;
  const NodeId ia = a.node_id();
  return a.tape().record(s, std::move(out), {ia}, [=](Tape& t, NodeId self) {
    const auto& g = t.node(self).grad;
    const auto& y = t.node(self).value;
    double dot = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) dot += g[k] * y[k];
    std::vector<double> da(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) da[k] = y[k] * (g[k] - dot);
    t.accumulate(ia, da);
  });
}

Tensor gelu(const Tensor& a) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = 0.5 * av[k] * (1.0 + std::erf(av[k] * std::numbers::sqrt2 / 2.0));
  const NodeId ia = a.node_id();
  return a.tape().record(a.shape(), std::move(out), {ia}, [=](Tape& t, NodeId self) {
    const auto& g = t.node(self).grad;
    const auto& x = t.node(ia).value;
    std::vector<double> da(g.size());
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double cdf = 0.5 * (1.0 + std::erf(x[k] * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x[k] * x[k]);
      da[k] = g[k] * (cdf + x[k] * pdf);
    }
    t.accumulate(ia, da);
  });
}

Tensor concat_rows(const Tensor& top, const Tensor& bottom) {
  same_tape(top, bottom, "concat_rows");
  if (top.cols() != bottom.cols()) shape_fail("concat_rows", top.shape(), bottom.shape());
  std::vector<double> out = copy(top.values());
  const auto bv = bottom.values();
  out.insert(out.end(), bv.begin(), bv.end());
  const std::size_t split = top.shape().size();
  const NodeId it = top.node_id(), ib = bottom.node_id();
  const Shape s{top.rows() + bottom.rows(), top.cols()};
  return top.tape().record(s, std::move(out), {it, ib}, [=](Tape& t, NodeId self) {
    const auto& g = t.node(self).grad;
    t.accumulate(it, std::span<const double>(g.data(), split));
    t.accumulate(ib, std::span<const double>(g.data() + split, g.size() - split));
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  std::vector<NodeId> ids;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    same_tape(parts[0], p, "concat_cols");
    if (p.rows() != rows) shape_fail("concat_cols", parts[0].shape(), p.shape());
    ids.push_back(p.node_id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  std::vector<double> out(rows * cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto v = p.values();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out[i * cols + offset + j] = v[i * p.cols() + j];
    offset += p.cols();
  }
  return parts[0].tape().record({rows, cols}, std::move(out), ids, [=](Tape& t, NodeId self) {
    const auto& g = t.node(self).grad;
    std::size_t off = 0;
    for (std::size_t n = 0; n < ids.size(); ++n) {
      const std::size_t w = widths[n];
      std::vector<double> d(rows * w);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < w; ++j) d[i * w + j] = g[i * cols + off + j];
      t.accumulate(ids[n], d);
      off += w;
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  const Shape s = a.shape();
  if (begin > end || end > s.rows) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + s.to_string());
  }
  const auto v = a.values();
  std::vector<double> out(v.begin() + begin * s.cols, v.begin() + end * s.cols);
  const NodeId ia = a.node_id();
  return a.tape().record({end - begin, s.cols}, std::move(out), {ia}, [=](Tape& t, NodeId self) {
    const auto& g = t.node(self).grad;
    std::vector<double> da(s.size(), 0.0);
    std::copy(g.begin(), g.end(), da.begin() + begin * s.cols);
    t.accumulate(ia, da);
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  const Shape s = a.shape();
  if (begin > end || end > s.cols) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + s.to_string());
  }
  const std::size_t w = end - begin;
  const auto v = a.values();
  std::vector<double> out(s.rows * w);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = v[i * s.cols + begin + j];
  const NodeId ia = a.node_id();
  return a.tape().record({s.rows, w}, std::move(out), {ia}, [=](Tape& t, NodeId self) {
    const auto& g = t.node(self).grad;
    std::vector<double> da(s.size(), 0.0);
    for (std::size_t i = 0; i < s.rows; ++i)
      for (std::size_t j = 0; j < w; ++j) da[i * s.cols + begin + j] = g[i * w + j];
    t.accumulate(ia, da);
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  const Shape s = table.shape();
  const auto v = table.values();
  std::vector<double> out;
  out.reserve(indices.size() * s.cols);
  for (std::size_t idx : indices) {
    if (idx >= s.rows) {
      throw ShapeError("gather_rows: index " + std::to_string(idx) + " outside table " +
                       s.to_string());
    }
    out.insert(out.end(), v.begin() + idx * s.cols, v.begin() + (idx + 1) * s.cols);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const NodeId it = table.node_id();
  return table.tape().record({idx.size(), s.cols}, std::move(out), {it},
                             [=](Tape& t, NodeId self) {
                               const auto& g = t.node(self).grad;
                               std::vector<double> d(s.size(), 0.0);
                               for (std::size_t k = 0; k < idx.size(); ++k)
                                 for (std::size_t j = 0; j < s.cols; ++j)
                                   d[idx[k] * s.cols + j] += g[k * s.cols + j];
                               t.accumulate(it, d);
                             });
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
  const Shape s = logits.shape();
  if (s.rows != 1 || s.cols == 0) throw ShapeError("cross_entropy: logits must be 1 x k, got " + s.to_string());
  if (target >= s.cols) {
    throw ContractError("cross_entropy: answer index " + std::to_string(target) +
                        " out of range for " + std::to_string(s.cols) + " classes");
  }
  const auto v = logits.values();
  const double mx = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (double x : v) z += std::exp(x - mx);
  const double lse = mx + std::log(z);
  const double loss = lse - v[target];
  const NodeId il = logits.node_id();
  return logits.tape().record({1, 1}, {loss}, {il}, [=](Tape& t, NodeId self) {
    const double g = t.node(self).grad[0];
    const auto& x = t.node(il).value;
    std::vector<double> d(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) d[k] = g * std::exp(x[k] - lse);
    d[target] -= g;
    t.accumulate(il, d);
  });
}

}  // namespace paa

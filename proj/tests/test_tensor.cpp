#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "paa/errors.hpp"
#include "paa/nn.hpp"
#include "paa/tensor.hpp"
#include "test_util.hpp"

using namespace paa;
using paa::testing::max_abs_diff;
using paa::testing::random_matrix;

TEST_CASE("matmul examples") {
  Tape t;
  Rng rng(1);
  const Matrix b = random_matrix(rng, 2, 3);
  CHECK(matmul(t.constant(Matrix::identity(2)), t.constant(b)).to_matrix() == b);

  const Tensor prod = matmul(t.constant(Matrix::from({{1, 2}, {3, 4}})), t.constant(Matrix::from({{0}, {1}})));
  CHECK(prod.to_matrix() == Matrix::from({{2}, {4}}));

  const Tensor zero = matmul(t.constant(Matrix(3, 2)), t.constant(random_matrix(rng, 2, 5)));
  CHECK(zero.to_matrix() == Matrix(3, 5));
}

TEST_CASE("matmul shape error names both shapes") {
  Tape t;
  try {
    matmul(t.constant(Matrix(2, 3)), t.constant(Matrix(2, 3)));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("and [2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul associativity on random triples") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = rng.range(1, 6), q = rng.range(1, 6), r = rng.range(1, 6), s = rng.range(1, 6);
    Tape t;
    const Tensor a = t.constant(random_matrix(rng, p, q));
    const Tensor b = t.constant(random_matrix(rng, q, r));
    const Tensor c = t.constant(random_matrix(rng, r, s));
    const Matrix left = matmul(matmul(a, b), c).to_matrix();
    const Matrix right = matmul(a, matmul(b, c)).to_matrix();
    for (std::size_t i = 0; i < left.values.size(); ++i) {
      const double denom = std::max(1.0, std::abs(left.values[i]));
      CHECK(std::abs(left.values[i] - right.values[i]) / denom <= 1e-9);
    }
  }
}

TEST_CASE("softmax_rows examples") {
  Tape t;
  const Matrix flat = softmax_rows(t.constant(Matrix(2, 4, 3.5))).to_matrix();
  for (double v : flat.values) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

  const Matrix two = softmax_rows(t.constant(Matrix::from({{0.0, std::log(3.0)}}))).to_matrix();
  CHECK(std::abs(two(0, 0) - 0.25) < 1e-15);
  CHECK(std::abs(two(0, 1) - 0.75) < 1e-15);

  const Matrix spike = softmax_rows(t.constant(Matrix::from({{1e4, 0.0, 0.0}}))).to_matrix();
  CHECK(spike(0, 0) == 1.0);
  CHECK(spike(0, 1) == 0.0);
  for (double v : spike.values) CHECK(std::isfinite(v));
}

TEST_CASE("softmax_global examples") {
  Tape t;
  const Matrix flat = softmax_global(t.constant(Matrix(2, 3, -7.0))).to_matrix();
  for (double v : flat.values) CHECK(std::abs(v - 1.0 / 6.0) < 1e-15);

  const Matrix m = softmax_global(t.constant(Matrix::from({{0, 0}, {0, std::log(3.0)}}))).to_matrix();
  CHECK(std::abs(m(0, 0) - 1.0 / 6.0) < 1e-15);
  CHECK(std::abs(m(0, 1) - 1.0 / 6.0) < 1e-15);
  CHECK(std::abs(m(1, 0) - 1.0 / 6.0) < 1e-15);
  CHECK(std::abs(m(1, 1) - 0.5) < 1e-15);
}

TEST_CASE("softmax normalisation and shift invariance properties") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = rng.range(1, 8), q = rng.range(1, 8);
    Matrix a = random_matrix(rng, p, q, 10.0);
    Tape t;
    const Matrix rows = softmax_rows(t.constant(a)).to_matrix();
    const Matrix whole = softmax_global(t.constant(a)).to_matrix();
    double total = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(p); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < static_cast<std::size_t>(q); ++j) row += rows(i, j);
      CHECK(std::abs(row - 1.0) <= 1e-9);
    }
    for (double v : whole.values) total += v;
    CHECK(std::abs(total - 1.0) <= 1e-9);

    // Per-row shifts for softmax_rows, one global shift for softmax_global.
    Matrix row_shifted = a, global_shifted = a;
    const double c = rng.uniform(-50.0, 50.0);
    for (std::size_t i = 0; i < static_cast<std::size_t>(p); ++i) {
      const double ci = rng.uniform(-50.0, 50.0);
      for (std::size_t j = 0; j < static_cast<std::size_t>(q); ++j) {
        row_shifted(i, j) += ci;
        global_shifted(i, j) += c;
      }
    }
    CHECK(max_abs_diff(softmax_rows(t.constant(row_shifted)).to_matrix(), rows) <= 1e-12);
    CHECK(max_abs_diff(softmax_global(t.constant(global_shifted)).to_matrix(), whole) <= 1e-12);
  }
}

TEST_CASE("self_attention examples") {
  Rng rng(3);
  SUBCASE("single token gets weight one") {
    Tape t;
    const Matrix z = random_matrix(rng, 1, 4);
    AttentionParams p{t.constant(random_matrix(rng, 4, 4)), t.constant(random_matrix(rng, 4, 4)),
                      t.constant(random_matrix(rng, 4, 4)), t.constant(Matrix::identity(4)), 2};
    const auto out = self_attention(t.constant(z), p);
    const Matrix expected = matmul(t.constant(z), p.w_v).to_matrix();
    CHECK(max_abs_diff(out.output.to_matrix(), expected) <= 1e-15);
    CHECK(out.weights(0, 0) == 1.0);
  }
  SUBCASE("identical rows map to identical rows") {
    Tape t;
    const Matrix row = random_matrix(rng, 1, 3);
    Matrix z(4, 3);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 3; ++j) z(i, j) = row(0, j);
    AttentionParams p{t.constant(random_matrix(rng, 3, 6)), t.constant(random_matrix(rng, 3, 6)),
                      t.constant(random_matrix(rng, 3, 6)), t.constant(random_matrix(rng, 6, 6)), 3};
    const Matrix out = self_attention(t.constant(z), p).output.to_matrix();
    for (std::size_t i = 1; i < 4; ++i)
      for (std::size_t j = 0; j < 6; ++j) CHECK(out(i, j) == out(0, j));
  }
  SUBCASE("two tokens against hand computation with scalar weights") {
    const double wq = 0.7, wk = -1.3, wv = 2.1, wo = 0.4;
    const double z0 = 0.9, z1 = -0.35;
    Tape t;
    AttentionParams p{t.constant(Matrix::from({{wq}})), t.constant(Matrix::from({{wk}})),
                      t.constant(Matrix::from({{wv}})), t.constant(Matrix::from({{wo}})), 1};
    const Matrix out = self_attention(t.constant(Matrix::from({{z0}, {z1}})), p).output.to_matrix();
    const double zs[2] = {z0, z1};
    for (int i = 0; i < 2; ++i) {
      const double e0 = std::exp(wq * zs[i] * wk * z0);
      const double e1 = std::exp(wq * zs[i] * wk * z1);
      const double expected = wo * (e0 * wv * z0 + e1 * wv * z1) / (e0 + e1);
      CHECK(std::abs(out(i, 0) - expected) <= 1e-12);
    }
  }
  SUBCASE("dimension mismatch") {
    Tape t;
    AttentionParams p{t.constant(Matrix(3, 2)), t.constant(Matrix(3, 2)), t.constant(Matrix(3, 2)),
                      t.constant(Matrix(2, 2)), 1};
    CHECK_THROWS_AS(self_attention(t.constant(Matrix(2, 4)), p), ShapeError);
    p.heads = 3;
    CHECK_THROWS_AS(self_attention(t.constant(Matrix(2, 3)), p), ShapeError);
  }
}

TEST_CASE("mlp examples") {
  Rng rng(4);
  {
    Tape t;
    const Matrix z = random_matrix(rng, 3, 4);
    const Affine layer{t.constant(Matrix::identity(4)), t.constant(Matrix(1, 4))};
    CHECK(mlp(t.constant(z), std::span(&layer, 1)).to_matrix() == z);
  }
  {
    Tape t;
    const Matrix bias = Matrix::from({{0.5, -2.0}});
    const Affine layer{t.constant(Matrix(3, 2)), t.constant(bias)};
    const Matrix out = mlp(t.constant(random_matrix(rng, 5, 3)), std::span(&layer, 1)).to_matrix();
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(out(i, 0) == 0.5);
      CHECK(out(i, 1) == -2.0);
    }
  }
  {
    const double w1 = 1.7, b1 = -0.2, w2 = -0.6, b2 = 0.05, x = 0.8;
    Tape t;
    const std::vector<Affine> layers{
        {t.constant(Matrix::from({{w1}})), t.constant(Matrix::from({{b1}}))},
        {t.constant(Matrix::from({{w2}})), t.constant(Matrix::from({{b2}}))}};
    const double h = w1 * x + b1;
    const double g = 0.5 * h * (1.0 + std::erf(h / std::sqrt(2.0)));
    const double expected = w2 * g + b2;
    CHECK(std::abs(mlp(t.constant(Matrix::from({{x}})), layers).item() - expected) <= 1e-12);
  }
  {
    Tape t;
    const Affine layer{t.constant(Matrix(3, 2)), t.constant(Matrix(1, 2))};
    CHECK_THROWS_AS(mlp(t.constant(Matrix(2, 4)), std::span(&layer, 1)), ShapeError);
  }
}

TEST_CASE("backward examples") {
  Rng rng(9);
  const Matrix am = random_matrix(rng, 3, 4);
  const Matrix bm = random_matrix(rng, 4, 2);
  {
    Tape t;
    const Tensor a = t.leaf(am, true);
    t.backward(sum(a));
    for (double g : a.grad()) CHECK(g == 1.0);
  }
  {
    Tape t;
    const Tensor a = t.leaf(am, true);
    const Tensor b = t.leaf(bm, false);
    t.backward(sum(matmul(a, b)));
    // ones(3x2) * B^T: every row of grad(A) holds the row sums of B.
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < 4; ++k)
        CHECK(std::abs(a.grad()[i * 4 + k] - (bm(k, 0) + bm(k, 1))) <= 1e-15);
    for (double g : b.grad()) CHECK(g == 0.0);
  }
  {
    Tape t;
    const Tensor a = t.leaf(am, true);
    const Tensor loss = sum(hadamard(a, a));
    t.backward(loss);
    t.backward(loss);
    for (std::size_t i = 0; i < am.values.size(); ++i)
      CHECK(std::abs(a.grad()[i] - 4.0 * am.values[i]) <= 1e-15);
    t.zero_grad();
    for (double g : a.grad()) CHECK(g == 0.0);
  }
  {
    Tape t;
    const Tensor a = t.leaf(am, true);
    CHECK_THROWS_AS(t.backward(a), ContractError);
  }
}

TEST_CASE("tape records in topological order") {
  Tape t;
  const Tensor a = t.leaf(Matrix(2, 2, 1.0), true);
  const Tensor b = softmax_rows(matmul(a, transpose(a)));
  sum(gelu(b));
  for (NodeId id = 0; id < t.size(); ++id)
    for (NodeId parent : t.node(id).parents) CHECK(parent < id);
}

TEST_CASE("forward evaluation is deterministic") {
  Rng rng(21);
  const Matrix x = random_matrix(rng, 4, 4);
  auto run = [&] {
    Tape t;
    const Tensor a = t.constant(x);
    return softmax_global(gelu(matmul(a, transpose(a)))).to_matrix();
  };
  CHECK(run() == run());
}

TEST_CASE("grad_check examples") {
  Rng rng(17);
  const Matrix x = random_matrix(rng, 3, 5);
  CHECK(grad_check([](Tape&, const Tensor& v) { return sum(hadamard(v, v)); }, x, 1e-5) <= 1e-8);

  const Matrix w = random_matrix(rng, 3, 5);
  const auto linear = [&](Tape& t, const Tensor& v) { return sum(hadamard(v, t.constant(w))); };
  CHECK(grad_check(linear, x, 1e-5) <= 1e-9);

  CHECK_THROWS_AS(grad_check(linear, x, 0.0), ContractError);
  CHECK_THROWS_AS(grad_check(linear, x, 0.05), ContractError);
  CHECK_THROWS_AS(grad_check([](Tape&, const Tensor& v) { return v; }, x, 1e-5), ContractError);

  const auto blowup = [](Tape& t, const Tensor& v) {
    // exp of a huge logit overflows to inf once perturbed.
    return sum(hadamard(scale(v, 1e308), t.constant(Matrix(v.rows(), v.cols(), 10.0))));
  };
  CHECK_THROWS_AS(grad_check(blowup, Matrix(1, 1, 1.0), 1e-5), NumericalError);
}

TEST_CASE("every operation passes grad_check under a random linear readout") {
  Rng rng(33);
  const auto readout = [&](const Matrix& r) {
    return [r](Tape& t, const Tensor& v) { return sum(hadamard(v, t.constant(r))); };
  };
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t p = 3, q = 4;
    const Matrix x = random_matrix(rng, p, q, 2.0);
    const Matrix other = random_matrix(rng, q, 2);
    const Matrix same = random_matrix(rng, p, q);
    const Matrix bias = random_matrix(rng, 1, q);
    const Matrix col = random_matrix(rng, p, 1);
    const Matrix narrow = random_matrix(rng, p, 2);
    const std::vector<std::pair<std::string, ScalarFn>> cases = {
        {"matmul", [&](Tape& t, const Tensor& v) { return readout(narrow)(t, matmul(v, t.constant(other))); }},
        {"transpose", [&](Tape& t, const Tensor& v) { return readout(Matrix(q, p, 0.3))(t, transpose(v)); }},
        {"add", [&](Tape& t, const Tensor& v) { return readout(same)(t, add(v, hadamard(v, v))); }},
        {"hadamard", [&](Tape& t, const Tensor& v) { return readout(same)(t, hadamard(v, t.constant(same))); }},
        {"scale", [&](Tape& t, const Tensor& v) { return readout(same)(t, scale(v, -1.7)); }},
        {"add_row_bias", [&](Tape& t, const Tensor& v) { return readout(same)(t, add_row_bias(v, t.constant(bias))); }},
        {"scale_rows", [&](Tape& t, const Tensor& v) { return readout(same)(t, scale_rows(v, row_sums(hadamard(v, v)))); }},
        {"row_sums", [&](Tape& t, const Tensor& v) { return readout(col)(t, row_sums(v)); }},
        {"mean_rows", [&](Tape& t, const Tensor& v) { return readout(bias)(t, mean_rows(v)); }},
        {"softmax_rows", [&](Tape& t, const Tensor& v) { return readout(same)(t, softmax_rows(v)); }},
        {"softmax_global", [&](Tape& t, const Tensor& v) { return readout(same)(t, softmax_global(v)); }},
        {"gelu", [&](Tape& t, const Tensor& v) { return readout(same)(t, gelu(v)); }},
        {"concat_rows", [&](Tape& t, const Tensor& v) { return readout(Matrix(2 * p, q, 0.5))(t, concat_rows(v, gelu(v))); }},
        {"slice_rows", [&](Tape& t, const Tensor& v) { return readout(Matrix(2, q, 0.7))(t, slice_rows(v, 1, 3)); }},
        {"slice_cols+concat_cols", [&](Tape& t, const Tensor& v) {
           const std::vector<Tensor> parts{slice_cols(v, 2, 4), slice_cols(v, 0, 2)};
           return readout(same)(t, concat_cols(parts));
         }},
        {"gather_rows", [&](Tape& t, const Tensor& v) {
           const std::vector<std::size_t> idx{2, 0, 2};
           return readout(Matrix(3, q, 0.9))(t, gather_rows(v, idx));
         }},
        {"cross_entropy", [&](Tape&, const Tensor& v) { return cross_entropy(slice_rows(v, 1, 2), 2); }},
    };
    for (const auto& [name, fn] : cases) {
      CAPTURE(name);
      CHECK(grad_check(fn, x, 1e-5) <= 1e-4);
    }
  }
}

TEST_CASE("cross_entropy examples") {
  Tape t;
  CHECK(cross_entropy(t.constant(Matrix::from({{0.0, 1e4, 0.0}})), 1).item() == doctest::Approx(0.0).epsilon(1e-12));
  const double uniform = cross_entropy(t.constant(Matrix(1, 7, 2.5)), 3).item();
  CHECK(std::abs(uniform - std::log(7.0)) <= 1e-15);
  const double e = std::numbers::e;
  const double hand = std::log(e + e * e + e * e * e) - 3.0;
  CHECK(std::abs(cross_entropy(t.constant(Matrix::from({{1, 2, 3}})), 2).item() - hand) <= 1e-12);
  CHECK_THROWS_AS(cross_entropy(t.constant(Matrix(1, 3)), 3), ContractError);
}

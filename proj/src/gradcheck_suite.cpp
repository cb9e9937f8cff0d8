#include "paa/gradcheck_suite.hpp"

#include "paa/rng.hpp"

namespace paa {

AdapterConfig gradcheck_config(Variant v, std::uint64_t seed) {
  AdapterConfig cfg;
  cfg.variant = v;
  cfg.patches = 4;
  cfg.channels = 3;
  cfg.word_dim = 2;
  cfg.inner_dim = 4;
  cfg.attn_dim = 3;
  cfg.out_dim = 3;
  cfg.heads = 2;
  cfg.ratio = 0.7;
  cfg.g_num = cfg.has_global_path() ? GlobalTokens::one : GlobalTokens::zero;
  cfg.seed = seed;
  return cfg;
}

GradCheckReport adapter_grad_check(const AdapterConfig& cfg, std::uint64_t seed, double eps) {
  Rng rng(derive_seed(seed, 0x6763));
  const std::size_t m = 3;
  auto random = [&](std::size_t r, std::size_t c) {
    Matrix out(r, c);
    for (auto& v : out.values) v = rng.uniform(-1.0, 1.0);
    return out;
  };
  const Matrix x = random(cfg.patches, cfg.channels);
  const Matrix y = random(m, cfg.word_dim);
  ParameterSet params = init_adapter_params(cfg);
  // Non-zero biases so their gradients are exercised away from the origin.
  for (auto& [name, mat] : params)
    if (name.find(".b") != std::string::npos)
      for (auto& v : mat.values) v = rng.uniform(-0.5, 0.5);
  const std::size_t out_rows = cfg.variant == Variant::cross_attention ? m : cfg.patches;
  const Matrix readout = random(out_rows, cfg.token_width());

  auto make_fn = [&](const std::string& target) -> ScalarFn {
    return [&, target](Tape& t, const Tensor& v) {
      BoundParameters bound;
      for (const auto& [name, mat] : params) bound.emplace(name, name == target ? v : t.constant(mat));
      const Tensor xt = target == "X" ? v : t.constant(x);
      const Tensor yt = target == "Y" ? v : t.constant(y);
      const auto w = AdapterWeights::from(bound, cfg);
      const Tensor tokens = run_adapter(xt, yt, cfg, w).tokens;
      return sum(hadamard(tokens, t.constant(readout)));
    };
  };

  GradCheckReport report{cfg.variant, 0.0, ""};
  auto check = [&](const std::string& target, const Matrix& at) {
    const double err = grad_check(make_fn(target), at, eps);
    if (err >= report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_input = target;
    }
  };
  check("X", x);
  check("Y", y);
  for (const auto& [name, mat] : params) check(name, mat);
  return report;
}

}  // namespace paa

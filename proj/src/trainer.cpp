#include "paa/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <thread>

#include "paa/errors.hpp"
#include "paa/hash.hpp"
#include "paa/rng.hpp"

namespace paa {

double warmup_lr(std::size_t step, const TrainConfig& cfg) {
  if (cfg.warmup_steps == 0) return cfg.lr_peak;
  const double t = static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  return cfg.lr_start + (cfg.lr_peak - cfg.lr_start) * t;
}

double cosine_lr(std::size_t step, const TrainConfig& cfg) {
  const std::size_t total = cfg.total_steps();
  const std::size_t last = total > 0 ? total - 1 : 0;
  if (last <= cfg.warmup_steps) return cfg.lr_peak;
  const double span = static_cast<double>(last - cfg.warmup_steps);
  const double done = step <= cfg.warmup_steps ? 0.0 : static_cast<double>(step - cfg.warmup_steps);
  const double progress = std::min(1.0, done / span);
  return cfg.lr_min + 0.5 * (cfg.lr_peak - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

double lr_schedule(std::size_t step, const TrainConfig& cfg) {
  return step < cfg.warmup_steps ? warmup_lr(step, cfg) : cosine_lr(step, cfg);
}

void adamw_step(ParameterSet& params, const Gradients& grads, AdamState& state, double lr,
                const TrainConfig& cfg, std::size_t step) {
  for (const auto& [name, g] : grads) {
    if (cfg.freeze.frozen(name)) continue;
    for (double v : g.values)
      if (!std::isfinite(v))
        throw NumericalError("non-finite gradient for '" + name + "' at step " + std::to_string(step));
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (const auto& [name, g] : grads) {
    if (cfg.freeze.frozen(name)) continue;
    auto pit = params.find(name);
    if (pit == params.end()) throw ContractError("gradient for unknown parameter '" + name + "'");
    Matrix& p = pit->second;
    if (p.shape != g.shape) throw ShapeError("gradient shape mismatch for '" + name + "'");
    auto [mit, fresh_m] = state.m.try_emplace(name, p.rows(), p.cols());
    auto [vit, fresh_v] = state.v.try_emplace(name, p.rows(), p.cols());
    Matrix& m = mit->second;
    Matrix& v = vit->second;
    if (m.shape != p.shape || v.shape != p.shape)
      throw ShapeError("optimizer state shape mismatch for '" + name + "'");
    for (std::size_t k = 0; k < p.values.size(); ++k) {
      m.values[k] = cfg.beta1 * m.values[k] + (1.0 - cfg.beta1) * g.values[k];
      v.values[k] = cfg.beta2 * v.values[k] + (1.0 - cfg.beta2) * g.values[k] * g.values[k];
      const double m_hat = m.values[k] / bc1;
      const double v_hat = v.values[k] / bc2;
      p.values[k] = p.values[k] * (1.0 - lr * cfg.weight_decay) - lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

namespace {

struct ItemGrad {
  double loss = 0.0;
  Gradients grads;
};

ItemGrad item_gradient(const Model& model, const SceneQA& qa) {
  Tape tape;
  const auto bound = bind_parameters(tape, model.params, model.config.train.freeze);
  const auto w = AdapterWeights::from(bound, model.config.adapter);
  const ItemForward f = forward_item(model, bound, w, qa);
  tape.backward(f.loss);
  ItemGrad out;
  out.loss = f.loss.item();
  for (const auto& [name, t] : bound)
    if (t.requires_grad()) out.grads.emplace(name, t.grad_matrix());
  return out;
}

void add_into(ItemGrad& into, const ItemGrad& other) {
  into.loss += other.loss;
  for (auto& [name, g] : into.grads) {
    const Matrix& o = other.grads.at(name);
    for (std::size_t k = 0; k < g.values.size(); ++k) g.values[k] += o.values[k];
  }
}

// Pairwise sum over [lo, hi); consumes the entries.
ItemGrad tree_sum(std::vector<ItemGrad>& parts, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return std::move(parts[lo]);
  const std::size_t mid = lo + (hi - lo) / 2;
  ItemGrad left = tree_sum(parts, lo, mid);
  const ItemGrad right = tree_sum(parts, mid, hi);
  add_into(left, right);
  return left;
}

}  // namespace

BatchResult batch_gradients(const Model& model, const std::vector<SceneQA>& items,
                            std::span<const std::size_t> batch, std::size_t workers) {
  if (batch.empty()) throw ContractError("empty batch");
  std::vector<ItemGrad> parts(batch.size());
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), batch.size());
  if (threads == 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) parts[i] = item_gradient(model, items.at(batch[i]));
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < batch.size(); i += threads)
            parts[i] = item_gradient(model, items.at(batch[i]));
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  ItemGrad total = tree_sum(parts, 0, parts.size());
  const double inv = 1.0 / static_cast<double>(batch.size());
  BatchResult out;
  out.loss = total.loss * inv;
  for (auto& [name, g] : total.grads)
    for (double& v : g.values) v *= inv;
  out.grads = std::move(total.grads);
  return out;
}

double global_norm(const Gradients& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.values) sq += v * v;
  return std::sqrt(sq);
}

std::string format_metrics(const StepMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "{\"step\":%zu,\"lr\":%.17g,\"loss\":%.17g,\"grad_norm\":%.17g,\"epoch\":%zu,\"wall_ms\":%.3f}",
                m.step, m.lr, m.loss, m.grad_norm, m.epoch, m.wall_ms);
  return buf;
}

TrainResult train(const Model& init, const std::vector<SceneQA>& train_items, const TrainOptions& options) {
  const TrainConfig& cfg = init.config.train;
  cfg.validate();
  const std::size_t total = cfg.total_steps();
  if (total > 0 && train_items.empty()) throw ContractError("training split is empty");

  TrainResult result{init, {}};
  Model& model = result.model;
  AdamState state;

  std::vector<std::size_t> order(train_items.size());
  std::size_t cursor = order.size();
  std::size_t pass = 0;
  auto next_index = [&] {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng(derive_seed(init.config.seed, fnv1a64("batch-order") ^ pass));
      rng.shuffle(std::span<std::size_t>(order));
      ++pass;
      cursor = 0;
    }
    return order[cursor++];
  };

  std::vector<std::size_t> batch(cfg.batch_size);
  for (std::size_t step = 0; step < total; ++step) {
    const auto started = std::chrono::steady_clock::now();
    for (auto& b : batch) b = next_index();
    BatchResult br = batch_gradients(model, train_items, batch, cfg.workers);
    if (!std::isfinite(br.loss)) {
      std::string ids;
      for (auto b : batch) ids += (ids.empty() ? "" : ",") + std::to_string(train_items[b].id);
      throw NumericalError("non-finite loss at step " + std::to_string(step) + ", batch ids [" + ids + "]");
    }
    const double norm = global_norm(br.grads);
    if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) {
      const double f = cfg.clip_norm / norm;
      for (auto& [name, g] : br.grads)
        for (double& v : g.values) v *= f;
    }
    const double lr = lr_schedule(step, cfg);
    adamw_step(model.params, br.grads, state, lr, cfg, step);

    StepMetrics m{step, lr, br.loss, norm, step / cfg.iters_per_epoch, 0.0};
    if (options.record_wall_clock)
      m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    result.metrics.push_back(m);
    if (options.on_step) options.on_step(m);
    if (options.on_epoch && (step + 1) % cfg.iters_per_epoch == 0)
      options.on_epoch((step + 1) / cfg.iters_per_epoch, model);
  }

  for (const auto& [name, p] : init.params)
    if (cfg.freeze.frozen(name) && model.params.at(name) != p)
      throw ContractError("frozen parameter '" + name + "' changed during training");
  model.image.table = model.params.at("encoder.image.table");
  model.text.table = model.params.at("encoder.text.table");
  return result;
}

}  // namespace paa

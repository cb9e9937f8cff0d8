#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "paa/config.hpp"
#include "paa/model.hpp"

namespace paa {

// Linear warmup from lr_start to lr_peak over warmup_steps, then a single
// cosine from lr_peak down to lr_min reached at the last step
// (total_steps() - 1).
double lr_schedule(std::size_t step, const TrainConfig& cfg);
// The two branches, each valid for any step, so continuity at the junction
// can be checked from both sides.
double warmup_lr(std::size_t step, const TrainConfig& cfg);
double cosine_lr(std::size_t step, const TrainConfig& cfg);

using Gradients = std::map<std::string, Matrix>;

struct AdamState {
  std::map<std::string, Matrix> m;
  std::map<std::string, Matrix> v;
  std::size_t t = 0;
};

// Decoupled weight decay:
//   p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)
// Parameters the freeze mask selects, or that have no gradient, are left
// alone. A non-finite gradient throws NumericalError naming the parameter and
// `step`.
void adamw_step(ParameterSet& params, const Gradients& grads, AdamState& state, double lr,
                const TrainConfig& cfg, std::size_t step);

struct BatchResult {
  double loss = 0.0;  // mean item loss
  Gradients grads;    // mean item gradient of every trainable parameter
};

// Items are differentiated independently (on up to `workers` threads) and
// their gradients summed by a fixed pairwise tree, so the result is bitwise
// independent of the worker count.
BatchResult batch_gradients(const Model& model, const std::vector<SceneQA>& items,
                            std::span<const std::size_t> batch, std::size_t workers);

double global_norm(const Gradients& grads);

struct StepMetrics {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
  std::size_t epoch = 0;
  double wall_ms = 0.0;
};

// One JSON object per line.
std::string format_metrics(const StepMetrics& m);

struct TrainOptions {
  // When false wall_ms is always 0, making whole logs comparable byte-wise.
  bool record_wall_clock = true;
  std::function<void(std::size_t epoch, const Model&)> on_epoch;
  std::function<void(const StepMetrics&)> on_step;
};

struct TrainResult {
  Model model;
  std::vector<StepMetrics> metrics;
};

// Runs cfg.train.total_steps() optimizer steps. Batches of batch_size are
// drawn in order from a stream of seeded per-pass shuffles of train_items;
// an epoch is iters_per_epoch steps. Throws NumericalError on a non-finite
// loss with the ids of the batch, and ContractError if any frozen parameter
// moved.
TrainResult train(const Model& init, const std::vector<SceneQA>& train_items,
                  const TrainOptions& options = {});

}  // namespace paa

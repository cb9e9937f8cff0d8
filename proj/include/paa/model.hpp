#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "paa/adapters.hpp"
#include "paa/config.hpp"
#include "paa/encoders.hpp"
#include "paa/parameters.hpp"
#include "paa/synth_qa.hpp"

namespace paa {

// Full classifier: frozen encoders, one adapter variant, and a linear answer
// head over the mean-pooled adapter tokens. The encoder tables live in
// `params` as encoder.image.table and encoder.text.table so the freeze
// contract can be checked on checkpoints; head.w is C' x |answers|, initialised at half the Glorot range.
struct Model {
  ExperimentConfig config;
  FrozenImageEncoder image;
  FrozenTextEncoder text;
  ParameterSet params;
};

Model init_model(const ExperimentConfig& cfg);

Checkpoint to_checkpoint(const Model& model);
// Rebuilds the model; fails when the embedded hash does not match the
// embedded config or a parameter is missing or misshapen.
Model from_checkpoint(const Checkpoint& ckpt);

// Words the adapter receives for one item.
std::vector<std::string> adapter_prompt(const SceneQA& qa, const ExperimentConfig& cfg);

struct ItemForward {
  Tensor logits;  // 1 x |answers|
  Tensor loss;    // 1 x 1
  AdapterOutput adapter;
};

// One item on `tape` against parameters already bound there.
ItemForward forward_item(const Model& model, const BoundParameters& bound, const AdapterWeights& w,
                         const SceneQA& qa);

// Logits on a private tape, no gradients.
Matrix answer_logits(const Model& model, const SceneQA& qa);
// Lowest index wins ties.
std::size_t argmax(std::span<const double> values);
std::size_t predict(const Model& model, const SceneQA& qa);

}  // namespace paa

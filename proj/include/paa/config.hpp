#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "paa/adapters.hpp"
#include "paa/parameters.hpp"
#include "paa/synth_qa.hpp"

namespace paa {

struct TrainConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.05;
  double eps = 1e-8;
  std::size_t warmup_steps = 1000;
  double lr_start = 1e-6;
  double lr_peak = 8e-5;
  double lr_min = 1e-5;
  std::size_t max_epochs = 5;
  std::size_t iters_per_epoch = 400;
  std::size_t batch_size = 4;
  double clip_norm = 1.0;  // global gradient norm; 0 disables clipping
  FreezeMask freeze{{"encoder."}};
  std::size_t workers = 1;  // threads per batch; results do not depend on it

  std::size_t total_steps() const { return max_epochs * iters_per_epoch; }
  void validate() const;
};

// Which words the adapter sees as its prompt: the bare question or the full
// conversation template around it.
enum class PromptSource { question, template_ };
std::string_view prompt_source_name(PromptSource p);

// Everything one experiment depends on. Serialises to a plain-text
// "key = value" file; see README for the key list.
struct ExperimentConfig {
  std::uint64_t seed = 0;       // model initialisation and batch order
  std::uint64_t data_seed = 0;  // dataset generation
  DataConfig data;
  AdapterConfig adapter;
  TrainConfig train;
  std::string task_identifier = "[vqa]";
  PromptSource prompt = PromptSource::question;

  // Copies seed and grid size into the adapter config and checks every part.
  void finalize();

  std::string to_text() const;
  std::uint64_t hash() const;
  std::uint64_t data_hash() const { return data.hash(data_seed); }

  static ExperimentConfig from_text(std::string_view text);
};

ExperimentConfig load_config(const std::string& path);
void save_config(const std::string& path, const ExperimentConfig& cfg);

}  // namespace paa

#include "paa/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "paa/errors.hpp"
#include "paa/hash.hpp"

namespace paa {

void TrainConfig::validate() const {
  if (!(lr_start < lr_peak)) throw ConfigError("train.lr_start must be below train.lr_peak");
  if (!(lr_min <= lr_peak)) throw ConfigError("train.lr_min must not exceed train.lr_peak");
  if (lr_start <= 0.0 || lr_min <= 0.0) throw ConfigError("learning rates must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("adam betas must lie in [0, 1)");
  if (weight_decay < 0.0 || eps <= 0.0) throw ConfigError("weight_decay >= 0 and eps > 0 required");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (clip_norm < 0.0) throw ConfigError("train.clip_norm must be non-negative");
  if (workers == 0) throw ConfigError("train.workers must be positive");
}

std::string_view prompt_source_name(PromptSource p) {
  return p == PromptSource::question ? "question" : "template";
}

void ExperimentConfig::finalize() {
  adapter.patches = data.rows * data.cols;
  adapter.seed = seed;
  if (adapter.patches == 0) throw ConfigError("data grid must have at least one patch");
  if (task_identifier.empty() || task_identifier.find_first_of(" \t\n") != std::string::npos)
    throw ConfigError("task_identifier must be a single non-empty token");
  adapter.validate();
  train.validate();
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
  return out;
}

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::uint64_t to_u64(const std::string& key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + std::string(v) + "'");
  return out;
}

double to_double(const std::string& key, std::string_view v) {
  const std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size())
    throw ConfigError("'" + key + "' expects a number, got '" + s + "'");
  return out;
}

}  // namespace

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  auto kv = [&](const char* k, const std::string& v) { o << k << " = " << v << '\n'; };
  kv("seed", std::to_string(seed));
  kv("data.seed", std::to_string(data_seed));
  kv("data.rows", std::to_string(data.rows));
  kv("data.cols", std::to_string(data.cols));
  kv("data.min_objects", std::to_string(data.min_objects));
  kv("data.max_objects", std::to_string(data.max_objects));
  {
    std::vector<std::string> sizes;
    for (auto n : data.per_task) sizes.push_back(std::to_string(n));
    kv("data.per_task", join(sizes));
  }
  kv("data.train_fraction", fmt(data.train_fraction));
  kv("data.max_retries", std::to_string(data.max_retries));
  kv("adapter.variant", std::string(variant_name(adapter.variant)));
  kv("adapter.channels", std::to_string(adapter.channels));
  kv("adapter.word_dim", std::to_string(adapter.word_dim));
  kv("adapter.inner_dim", std::to_string(adapter.inner_dim));
  kv("adapter.attn_dim", std::to_string(adapter.attn_dim));
  kv("adapter.out_dim", std::to_string(adapter.out_dim));
  kv("adapter.g_num", std::string(global_tokens_name(adapter.g_num)));
  kv("adapter.ratio", fmt(adapter.ratio));
  kv("adapter.heads", std::to_string(adapter.heads));
  kv("prompt.source", std::string(prompt_source_name(prompt)));
  kv("prompt.task_identifier", task_identifier);
  kv("train.beta1", fmt(train.beta1));
  kv("train.beta2", fmt(train.beta2));
  kv("train.weight_decay", fmt(train.weight_decay));
  kv("train.eps", fmt(train.eps));
  kv("train.warmup_steps", std::to_string(train.warmup_steps));
  kv("train.lr_start", fmt(train.lr_start));
  kv("train.lr_peak", fmt(train.lr_peak));
  kv("train.lr_min", fmt(train.lr_min));
  kv("train.max_epochs", std::to_string(train.max_epochs));
  kv("train.iters_per_epoch", std::to_string(train.iters_per_epoch));
  kv("train.batch_size", std::to_string(train.batch_size));
  kv("train.clip_norm", fmt(train.clip_norm));
  kv("train.freeze", join(train.freeze.prefixes));
  kv("train.workers", std::to_string(train.workers));
  return o.str();
}

std::uint64_t ExperimentConfig::hash() const {
  ExperimentConfig c = *this;
  c.train.workers = 1;
  return fnv1a64(c.to_text());
}

ExperimentConfig ExperimentConfig::from_text(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? end : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    if (kv.contains(key)) throw ConfigError("duplicate key '" + key + "'");
    kv[key] = std::string(trim(line.substr(eq + 1)));
  }

  ExperimentConfig c;
  for (const auto& [key, v] : kv) {
    if (key == "seed") c.seed = to_u64(key, v);
    else if (key == "data.seed") c.data_seed = to_u64(key, v);
    else if (key == "data.rows") c.data.rows = to_u64(key, v);
    else if (key == "data.cols") c.data.cols = to_u64(key, v);
    else if (key == "data.min_objects") c.data.min_objects = to_u64(key, v);
    else if (key == "data.max_objects") c.data.max_objects = to_u64(key, v);
    else if (key == "data.per_task") {
      const auto parts = split_commas(v);
      if (parts.size() != kNumTasks)
        throw ConfigError("data.per_task expects " + std::to_string(kNumTasks) + " comma-separated sizes");
      for (std::size_t i = 0; i < kNumTasks; ++i) c.data.per_task[i] = to_u64(key, trim(parts[i]));
    } else if (key == "data.train_fraction") c.data.train_fraction = to_double(key, v);
    else if (key == "data.max_retries") c.data.max_retries = to_u64(key, v);
    else if (key == "adapter.variant") c.adapter.variant = parse_variant(v);
    else if (key == "adapter.channels") c.adapter.channels = to_u64(key, v);
    else if (key == "adapter.word_dim") c.adapter.word_dim = to_u64(key, v);
    else if (key == "adapter.inner_dim") c.adapter.inner_dim = to_u64(key, v);
    else if (key == "adapter.attn_dim") c.adapter.attn_dim = to_u64(key, v);
    else if (key == "adapter.out_dim") c.adapter.out_dim = to_u64(key, v);
    else if (key == "adapter.g_num") c.adapter.g_num = parse_global_tokens(v);
    else if (key == "adapter.ratio") c.adapter.ratio = to_double(key, v);
    else if (key == "adapter.heads") c.adapter.heads = to_u64(key, v);
    else if (key == "prompt.source") {
      if (v == "question") c.prompt = PromptSource::question;
      else if (v == "template") c.prompt = PromptSource::template_;
      else throw ConfigError("prompt.source must be 'question' or 'template'");
    } else if (key == "prompt.task_identifier") c.task_identifier = v;
    else if (key == "train.beta1") c.train.beta1 = to_double(key, v);
    else if (key == "train.beta2") c.train.beta2 = to_double(key, v);
    else if (key == "train.weight_decay") c.train.weight_decay = to_double(key, v);
    else if (key == "train.eps") c.train.eps = to_double(key, v);
    else if (key == "train.warmup_steps") c.train.warmup_steps = to_u64(key, v);
    else if (key == "train.lr_start") c.train.lr_start = to_double(key, v);
    else if (key == "train.lr_peak") c.train.lr_peak = to_double(key, v);
    else if (key == "train.lr_min") c.train.lr_min = to_double(key, v);
    else if (key == "train.max_epochs") c.train.max_epochs = to_u64(key, v);
    else if (key == "train.iters_per_epoch") c.train.iters_per_epoch = to_u64(key, v);
    else if (key == "train.batch_size") c.train.batch_size = to_u64(key, v);
    else if (key == "train.clip_norm") c.train.clip_norm = to_double(key, v);
    else if (key == "train.freeze") c.train.freeze.prefixes = split_commas(v);
    else if (key == "train.workers") c.train.workers = to_u64(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  c.finalize();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return ExperimentConfig::from_text(buf.str());
}

void save_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config '" + path + "'");
  out << cfg.to_text();
}

}  // namespace paa

#include "paa/model.hpp"

#include "paa/errors.hpp"
#include "paa/hash.hpp"
#include "paa/rng.hpp"

namespace paa {

namespace {

constexpr const char* kImageTable = "encoder.image.table";
constexpr const char* kTextTable = "encoder.text.table";
constexpr const char* kHead = "head.w";
constexpr double kHeadInitScale = 0.5;

void check_shape(const ParameterSet& params, const std::string& name, Shape expected) {
  const auto it = params.find(name);
  if (it == params.end()) throw ConfigError("checkpoint lacks parameter '" + name + "'");
  if (it->second.shape != expected)
    throw ShapeError("parameter '" + name + "' is " + it->second.shape.to_string() + ", expected " +
                     expected.to_string());
}

}  // namespace

Model init_model(const ExperimentConfig& cfg) {
  Model m;
  m.config = cfg;
  m.config.finalize();
  const auto& a = m.config.adapter;
  m.image = FrozenImageEncoder::create(derive_seed(cfg.seed, fnv1a64(kImageTable)), cfg.data.rows,
                                       cfg.data.cols, a.channels);
  m.text = FrozenTextEncoder::create(derive_seed(cfg.seed, fnv1a64(kTextTable)), a.word_dim);
  m.params = init_adapter_params(a);
  m.params.emplace(kImageTable, m.image.table);
  m.params.emplace(kTextTable, m.text.table);
  Matrix head = glorot_uniform(derive_seed(cfg.seed, fnv1a64(kHead)), a.token_width(),
                               answer_vocabulary().size());
  for (double& v : head.values) v *= kHeadInitScale;
  m.params.emplace(kHead, std::move(head));
  return m;
}

Checkpoint to_checkpoint(const Model& model) {
  return Checkpoint{model.config.to_text(), model.config.hash(), model.params};
}

Model from_checkpoint(const Checkpoint& ckpt) {
  const ExperimentConfig cfg = ExperimentConfig::from_text(ckpt.config_text);
  if (cfg.hash() != ckpt.config_hash)
    throw ConfigError("checkpoint config hash " + to_hex(ckpt.config_hash) +
                      " does not match its embedded config (" + to_hex(cfg.hash()) + ")");
  Model fresh = init_model(cfg);
  for (const auto& [name, m] : fresh.params) check_shape(ckpt.params, name, m.shape);
  if (ckpt.params.size() != fresh.params.size())
    throw ConfigError("checkpoint has parameters this variant does not use");
  fresh.params = ckpt.params;
  fresh.image.table = fresh.params.at(kImageTable);
  fresh.text.table = fresh.params.at(kTextTable);
  return fresh;
}

std::vector<std::string> adapter_prompt(const SceneQA& qa, const ExperimentConfig& cfg) {
  if (cfg.prompt == PromptSource::question) return qa.question;
  return render_template(qa, cfg.task_identifier);
}

ItemForward forward_item(const Model& model, const BoundParameters& bound, const AdapterWeights& w,
                         const SceneQA& qa) {
  const auto& cfg = model.config;
  const auto answer = answer_index(qa.answer);
  if (!answer) throw ContractError("answer '" + qa.answer + "' is not in the answer vocabulary");
  const Tensor x = encode_image(lookup(bound, kImageTable), qa.scene, model.image);
  const Tensor y = encode_prompt(lookup(bound, kTextTable), adapter_prompt(qa, cfg), model.text);
  ItemForward out;
  out.adapter = run_adapter(x, y, cfg.adapter, w);
  out.logits = matmul(mean_rows(out.adapter.tokens), lookup(bound, kHead));
  out.loss = cross_entropy(out.logits, *answer);
  return out;
}

Matrix answer_logits(const Model& model, const SceneQA& qa) {
  Tape tape;
  const auto bound = bind_parameters(tape, model.params, FreezeMask{{""}});
  const auto w = AdapterWeights::from(bound, model.config.adapter);
  return forward_item(model, bound, w, qa).logits.to_matrix();
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::size_t predict(const Model& model, const SceneQA& qa) {
  return argmax(answer_logits(model, qa).values);
}

}  // namespace paa

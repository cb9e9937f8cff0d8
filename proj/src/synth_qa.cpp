#include "paa/synth_qa.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "paa/errors.hpp"
#include "paa/hash.hpp"
#include "paa/rng.hpp"

namespace paa {

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <std::size_t K>
std::optional<std::size_t> find_word(const std::array<std::string_view, K>& words, std::string_view w) {
  for (std::size_t i = 0; i < K; ++i)
    if (words[i] == w) return i;
  return std::nullopt;
}

std::vector<std::string> words(std::initializer_list<std::string_view> list) {
  return {list.begin(), list.end()};
}

}  // namespace

std::string_view task_name(Task task) {
  switch (task) {
    case Task::object: return "object";
    case Task::count: return "count";
    case Task::color: return "color";
    case Task::position: return "position";
  }
  return "?";
}

Task parse_task(std::string_view name) {
  for (Task t : kTasks)
    if (task_name(t) == name) return t;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

const std::vector<std::string>& answer_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v;
    for (std::size_t i = 1; i < kObjectNames.size(); ++i) v.emplace_back(kObjectNames[i]);
    for (auto c : kColorNames) v.emplace_back(c);
    for (auto r : kRegionNames) v.emplace_back(r);
    for (auto n : kCountWords) v.emplace_back(n);
    return v;
  }();
  return vocab;
}

std::optional<std::size_t> answer_index(std::string_view word) {
  const auto& v = answer_vocabulary();
  const auto it = std::find(v.begin(), v.end(), word);
  if (it == v.end()) return std::nullopt;
  return static_cast<std::size_t>(it - v.begin());
}

const std::vector<std::string>& prompt_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v;
    for (auto t : kTemplateTokens) v.emplace_back(t);
    v.emplace_back("[vqa]");
    for (auto w : kQuestionWords) v.emplace_back(w);
    for (std::size_t i = 1; i < kObjectNames.size(); ++i) v.emplace_back(kObjectNames[i]);
    for (auto c : kColorNames) v.emplace_back(c);
    for (auto r : kRegionNames) v.emplace_back(r);
    return v;
  }();
  return vocab;
}

std::size_t region_of(std::size_t row, std::size_t col, std::size_t rows, std::size_t cols) {
  const std::size_t band_r = (rows + 2) / 3;
  const std::size_t band_c = (cols + 2) / 3;
  if (row < band_r) return 0;
  if (row >= rows - band_r) return 1;
  if (col < band_c) return 2;
  if (col >= cols - band_c) return 3;
  return 4;
}

std::size_t Scene::region_of(std::size_t patch) const {
  return paa::region_of(patch / cols, patch % cols, rows, cols);
}

std::uint64_t Scene::hash() const {
  std::string bytes = std::to_string(rows) + "x" + std::to_string(cols) + ":";
  for (const Cell& c : cells) {
    bytes.push_back(static_cast<char>(c.object));
    bytes.push_back(static_cast<char>(c.color));
  }
  return fnv1a64(bytes);
}

Scene generate_scene(std::uint64_t seed, std::size_t rows, std::size_t cols,
                     std::size_t min_objects, std::size_t max_objects) {
  if (rows == 0 || cols == 0) throw ConfigError("generate_scene: empty grid");
  if (min_objects > max_objects || max_objects > rows * cols) {
    throw ConfigError("generate_scene: object count range (" + std::to_string(min_objects) + ", " +
                      std::to_string(max_objects) + ") infeasible on a " + std::to_string(rows) +
                      "x" + std::to_string(cols) + " grid");
  }
  Rng rng(seed);
  Scene scene{rows, cols, std::vector<Cell>(rows * cols)};
  const auto k = static_cast<std::size_t>(
      rng.range(static_cast<std::int64_t>(min_objects), static_cast<std::int64_t>(max_objects)));
  std::vector<std::size_t> patches(rows * cols);
  std::iota(patches.begin(), patches.end(), 0);
  rng.shuffle(std::span(patches));
  for (std::size_t i = 0; i < k; ++i) {
    Cell& c = scene.cells[patches[i]];
    c.object = static_cast<std::uint8_t>(1 + rng.below(kObjectNames.size() - 1));
    c.color = static_cast<std::uint8_t>(rng.below(kColorNames.size()));
  }
  return scene;
}

std::vector<Question> enumerate_questions(const Scene& scene, Task task) {
  std::vector<Question> out;
  const std::size_t n = scene.patch_count();
  switch (task) {
    case Task::object: {
      for (std::size_t r = 0; r < kRegionNames.size(); ++r) {
        std::vector<std::size_t> occupied;
        bool region_exists = false;
        for (std::size_t p = 0; p < n; ++p) {
          if (scene.region_of(p) != r) continue;
          region_exists = true;
          if (scene.cells[p].object != kBackground) occupied.push_back(p);
        }
        if (region_exists && occupied.size() == 1) {
          out.push_back({words({"what", "is", "in", "the", kRegionNames[r]}),
                         std::string(kObjectNames[scene.cells[occupied[0]].object])});
        }
      }
      break;
    }
    case Task::count: {
      std::map<std::pair<std::uint8_t, std::uint8_t>, std::size_t> counts;  // (color, object)
      for (const Cell& c : scene.cells)
        if (c.object != kBackground) ++counts[{c.color, c.object}];
      for (const auto& [key, count] : counts) {
        if (count > kCountWords.size()) continue;
        out.push_back({words({"how", "many", kColorNames[key.first], kObjectNames[key.second]}),
                       std::string(kCountWords[count - 1])});
      }
      break;
    }
    case Task::color: {
      for (std::uint8_t obj = 1; obj < kObjectNames.size(); ++obj) {
        std::set<std::uint8_t> colors;
        for (const Cell& c : scene.cells)
          if (c.object == obj) colors.insert(c.color);
        if (colors.size() == 1) {
          out.push_back({words({"what", "is", "the", "color", "of", "the", kObjectNames[obj]}),
                         std::string(kColorNames[*colors.begin()])});
        }
      }
      break;
    }
    case Task::position: {
      for (std::uint8_t obj = 1; obj < kObjectNames.size(); ++obj) {
        std::vector<std::size_t> where;
        for (std::size_t p = 0; p < n; ++p)
          if (scene.cells[p].object == obj) where.push_back(p);
        if (where.size() == 1) {
          out.push_back({words({"where", "is", "the", kObjectNames[obj]}),
                         std::string(kRegionNames[scene.region_of(where[0])])});
        }
      }
      break;
    }
  }
  return out;
}

std::optional<SceneQA> generate_qa(const Scene& scene, Task task, std::uint64_t seed) {
  auto candidates = enumerate_questions(scene, task);
  if (candidates.empty()) return std::nullopt;
  Rng rng(seed);
  auto& pick = candidates[rng.below(candidates.size())];
  return SceneQA{0, scene, task, std::move(pick.words), std::move(pick.answer)};
}

std::vector<std::string> render_template(const SceneQA& qa, std::string_view task_identifier) {
  if (task_identifier.empty()) throw ContractError("render_template: empty task identifier");
  std::vector<std::string> out{"[INST]", "<Img>", "<IMG_SLOT>", "</Img>", std::string(task_identifier)};
  out.insert(out.end(), qa.question.begin(), qa.question.end());
  out.emplace_back("[/INST]");
  return out;
}

std::uint64_t DataConfig::hash(std::uint64_t seed) const {
  std::ostringstream s;
  s << "rows=" << rows << ";cols=" << cols << ";min=" << min_objects << ";max=" << max_objects;
  for (std::size_t t = 0; t < kNumTasks; ++t) s << ";n" << t << "=" << per_task[t];
  char frac[32];
  std::snprintf(frac, sizeof(frac), "%.17g", train_fraction);
  s << ";frac=" << frac << ";retries=" << max_retries << ";seed=" << seed;
  return fnv1a64(s.str());
}

DatasetSplit build_split(const DataConfig& config, std::uint64_t seed) {
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    if (config.per_task[t] == 0) {
      throw ContractError("build_split: category '" + std::string(task_name(kTasks[t])) +
                          "' needs at least one item");
    }
  }
  if (!(config.train_fraction > 0.0 && config.train_fraction <= 1.0)) {
    throw ContractError("build_split: train fraction must lie in (0, 1]");
  }
  std::array<std::size_t, kNumTasks> train_count{};
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    // The epsilon keeps exact products such as 100 * 0.67 from rounding down.
    train_count[t] = static_cast<std::size_t>(
        std::floor(static_cast<double>(config.per_task[t]) * config.train_fraction + 1e-9));
    if (train_count[t] == config.per_task[t]) {
      throw ContractError("build_split: train fraction leaves no test items for category '" +
                          std::string(task_name(kTasks[t])) + "'");
    }
    if (train_count[t] == 0) {
      throw ContractError("build_split: train fraction leaves no train items for category '" +
                          std::string(task_name(kTasks[t])) + "'");
    }
  }

  DatasetSplit split;
  split.seed = seed;
  split.data_hash = config.hash(seed);
  split.per_task = config.per_task;
  std::set<std::uint64_t> seen;
  std::uint64_t next_id = 0;
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    const std::uint64_t task_seed = derive_seed(seed, t);
    std::uint64_t attempt = 0;
    for (std::size_t i = 0; i < config.per_task[t]; ++i) {
      std::optional<SceneQA> item;
      for (std::size_t tries = 0; !item; ++tries) {
        if (tries >= config.max_retries) {
          throw GenerationError("build_split: no fresh scene for category '" +
                                std::string(task_name(kTasks[t])) + "' after " +
                                std::to_string(tries) + " retries");
        }
        const std::uint64_t item_seed = derive_seed(task_seed, attempt++);
        Scene scene = generate_scene(item_seed, config.rows, config.cols, config.min_objects,
                                     config.max_objects);
        if (seen.contains(scene.hash())) continue;
        item = generate_qa(scene, kTasks[t], derive_seed(item_seed, 1));
        if (item) seen.insert(scene.hash());
      }
      item->id = next_id++;
      (i < train_count[t] ? split.train : split.test).push_back(std::move(*item));
    }
  }
  return split;
}

std::string format_item(const SceneQA& qa) {
  std::ostringstream s;
  s << qa.id << '\t' << task_name(qa.task) << '\t' << qa.scene.rows << '\t' << qa.scene.cols << '\t';
  for (std::size_t p = 0; p < qa.scene.cells.size(); ++p) {
    if (p) s << ' ';
    const Cell& c = qa.scene.cells[p];
    if (c.object == kBackground) {
      s << '-';
    } else {
      s << kObjectNames[c.object] << '/' << kColorNames[c.color];
    }
  }
  s << '\t';
  for (std::size_t w = 0; w < qa.question.size(); ++w) s << (w ? " " : "") << qa.question[w];
  s << '\t' << qa.answer;
  return s.str();
}

SceneQA parse_item(std::string_view line) {
  const auto fields = split(line, '\t');
  if (fields.size() != 7) {
    throw IoError("dataset record has " + std::to_string(fields.size()) + " fields, expected 7");
  }
  SceneQA qa;
  try {
    qa.id = std::stoull(fields[0]);
    qa.scene.rows = std::stoull(fields[2]);
    qa.scene.cols = std::stoull(fields[3]);
  } catch (const std::exception&) {
    throw IoError("dataset record has a malformed numeric field");
  }
  qa.task = parse_task(fields[1]);
  for (const auto& tok : split(fields[4], ' ')) {
    Cell c;
    if (tok != "-") {
      const auto slash = tok.find('/');
      if (slash == std::string::npos) throw IoError("bad cell token '" + tok + "'");
      const auto obj = find_word(kObjectNames, std::string_view(tok).substr(0, slash));
      const auto col = find_word(kColorNames, std::string_view(tok).substr(slash + 1));
      if (!obj || !col || *obj == kBackground) throw IoError("bad cell token '" + tok + "'");
      c.object = static_cast<std::uint8_t>(*obj);
      c.color = static_cast<std::uint8_t>(*col);
    }
    qa.scene.cells.push_back(c);
  }
  if (qa.scene.cells.size() != qa.scene.patch_count()) {
    throw IoError("dataset record cell count does not match its grid");
  }
  qa.question = split(fields[5], ' ');
  qa.answer = fields[6];
  return qa;
}

void write_items(std::ostream& out, const std::vector<SceneQA>& items, std::uint64_t seed,
                 std::uint64_t data_hash, std::string_view split_name) {
  out << "# paa-dataset v1 seed=" << seed << " data_hash=" << to_hex(data_hash)
      << " split=" << split_name << '\n';
  for (const auto& qa : items) out << format_item(qa) << '\n';
}

ItemFile read_items(std::istream& in) {
  ItemFile file;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# paa-dataset v1 ", 0) != 0) {
    throw IoError("missing dataset header");
  }
  std::istringstream header(line.substr(17));
  std::string kv;
  bool have_hash = false;
  while (header >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "seed") file.seed = std::stoull(value);
    if (key == "data_hash") {
      file.data_hash = std::stoull(value, nullptr, 16);
      have_hash = true;
    }
    if (key == "split") file.split_name = value;
  }
  if (!have_hash) throw IoError("dataset header lacks data_hash");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    file.items.push_back(parse_item(line));
  }
  return file;
}

}  // namespace paa

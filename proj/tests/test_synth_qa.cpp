#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "paa/errors.hpp"
#include "paa/rng.hpp"
#include "paa/synth_qa.hpp"

using namespace paa;

namespace {

// Independent scene inspection: reads the question words and recomputes the
// answer straight from the cells, without the generator's enumeration.
std::string oracle_answer(const Scene& s, const std::vector<std::string>& q) {
  auto object_id = [](const std::string& w) {
    for (std::size_t i = 1; i < kObjectNames.size(); ++i)
      if (kObjectNames[i] == w) return static_cast<int>(i);
    return -1;
  };
  auto color_id = [](const std::string& w) {
    for (std::size_t i = 0; i < kColorNames.size(); ++i)
      if (kColorNames[i] == w) return static_cast<int>(i);
    return -1;
  };
  auto region = [&](std::size_t p) {
    const std::size_t r = p / s.cols, c = p % s.cols;
    const std::size_t br = (s.rows + 2) / 3, bc = (s.cols + 2) / 3;
    if (r < br) return std::string("top");
    if (r + br >= s.rows) return std::string("bottom");
    if (c < bc) return std::string("left");
    if (c + bc >= s.cols) return std::string("right");
    return std::string("center");
  };
  if (q[0] == "how") {
    const int col = color_id(q[2]), obj = object_id(q[3]);
    int n = 0;
    for (const Cell& c : s.cells) n += (c.object == obj && c.color == col);
    const char* words[] = {"zero", "one", "two", "three", "four", "five", "six", "seven", "eight"};
    return words[n];
  }
  if (q[0] == "where") {
    const int obj = object_id(q[3]);
    std::vector<std::string> found;
    for (std::size_t p = 0; p < s.cells.size(); ++p)
      if (s.cells[p].object == obj) found.push_back(region(p));
    return found.size() == 1 ? found[0] : "ambiguous";
  }
  if (q[2] == "the" && q[3] == "color") {
    const int obj = object_id(q[6]);
    std::set<int> colors;
    for (const Cell& c : s.cells)
      if (c.object == obj) colors.insert(c.color);
    return colors.size() == 1 ? std::string(kColorNames[*colors.begin()]) : "ambiguous";
  }
  // what is in the <region>
  std::vector<int> objects;
  for (std::size_t p = 0; p < s.cells.size(); ++p)
    if (region(p) == q[4] && s.cells[p].object != kBackground) objects.push_back(s.cells[p].object);
  return objects.size() == 1 ? std::string(kObjectNames[objects[0]]) : "ambiguous";
}

Scene scene_from(std::size_t rows, std::size_t cols, std::vector<Cell> cells) {
  return Scene{rows, cols, std::move(cells)};
}

}  // namespace

TEST_CASE("generate_scene examples") {
  const Scene empty = generate_scene(5, 3, 3, 0, 0);
  for (const Cell& c : empty.cells) CHECK(c.object == kBackground);

  CHECK(generate_scene(77, 3, 4, 1, 5) == generate_scene(77, 3, 4, 1, 5));

  const Scene full = generate_scene(3, 2, 2, 4, 4);
  REQUIRE(full.cells.size() == 4);
  for (const Cell& c : full.cells) CHECK(c.object != kBackground);

  CHECK_THROWS_AS(generate_scene(1, 2, 2, 1, 5), ConfigError);
  CHECK_THROWS_AS(generate_scene(1, 3, 3, 4, 2), ConfigError);
}

TEST_CASE("object counts stay in range and placements are distinct") {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const Scene s = generate_scene(seed, 3, 3, 2, 5);
    const auto n = std::count_if(s.cells.begin(), s.cells.end(),
                                 [](const Cell& c) { return c.object != kBackground; });
    CHECK(n >= 2);
    CHECK(n <= 5);
  }
}

TEST_CASE("generate_qa examples") {
  const Cell red_circle{1, 0}, blue_square{2, 1}, green_triangle{3, 2}, bg{};
  SUBCASE("count") {
    const Scene s = scene_from(3, 3, {red_circle, bg, bg, bg, red_circle, bg, bg, bg, blue_square});
    const auto qs = enumerate_questions(s, Task::count);
    const auto it = std::find_if(qs.begin(), qs.end(), [](const Question& q) {
      return q.words == std::vector<std::string>{"how", "many", "red", "circle"};
    });
    REQUIRE(it != qs.end());
    CHECK(it->answer == "two");
  }
  SUBCASE("position") {
    const Scene s = scene_from(3, 3, {blue_square, bg, bg, bg, bg, bg, bg, bg, bg});
    const auto qa = generate_qa(s, Task::position, 1);
    REQUIRE(qa);
    CHECK(qa->question == std::vector<std::string>{"where", "is", "the", "square"});
    CHECK(qa->answer == "top");
  }
  SUBCASE("color") {
    const Scene s = scene_from(2, 2, {bg, green_triangle, bg, bg});
    const auto qa = generate_qa(s, Task::color, 9);
    REQUIRE(qa);
    CHECK(qa->answer == "green");
  }
  SUBCASE("unsatisfiable task signals regeneration") {
    const Scene s = scene_from(2, 2, {bg, bg, bg, bg});
    for (Task t : kTasks) CHECK_FALSE(generate_qa(s, t, 3).has_value());
    // Two circles of different colours: colour and position are ambiguous.
    const Scene twin = scene_from(2, 2, {red_circle, Cell{1, 1}, bg, bg});
    CHECK_FALSE(generate_qa(twin, Task::color, 3).has_value());
    CHECK_FALSE(generate_qa(twin, Task::position, 3).has_value());
  }
}

TEST_CASE("region partition of a 3x3 grid") {
  const char* expected[] = {"top", "top", "top", "left", "center", "right", "bottom", "bottom", "bottom"};
  for (std::size_t p = 0; p < 9; ++p) CHECK(kRegionNames[region_of(p / 3, p % 3, 3, 3)] == expected[p]);
}

TEST_CASE("generated answers agree with the scene-inspection oracle on 10000 pairs") {
  std::size_t generated = 0, mismatches = 0;
  for (std::uint64_t seed = 0; generated < 10000; ++seed) {
    const Scene s = generate_scene(derive_seed(seed, 0), 3, 3, 1, 6);
    const Task task = kTasks[seed % kNumTasks];
    const auto qa = generate_qa(s, task, derive_seed(seed, 1));
    if (!qa) continue;
    ++generated;
    if (oracle_answer(qa->scene, qa->question) != qa->answer) ++mismatches;
    // The question names the attribute the answer hinges on.
    CHECK(answer_index(qa->answer).has_value());
  }
  CHECK(mismatches == 0);
}

TEST_CASE("most scenes admit two questions with different answers") {
  std::size_t dependent = 0;
  const std::size_t total = 2000;
  for (std::uint64_t seed = 0; seed < total; ++seed) {
    const Scene s = generate_scene(seed, 3, 3, 1, 4);
    std::set<std::string> answers;
    for (Task t : kTasks)
      for (const auto& q : enumerate_questions(s, t)) answers.insert(q.answer);
    dependent += answers.size() >= 2;
  }
  CHECK(static_cast<double>(dependent) / total >= 0.95);
}

TEST_CASE("render_template wraps the question") {
  SceneQA qa;
  qa.question = {"how", "many", "red", "circle"};
  const std::vector<std::string> expected{"[INST]", "<Img>", "<IMG_SLOT>", "</Img>", "[vqa]",
                                          "how", "many", "red", "circle", "[/INST]"};
  CHECK(render_template(qa, "[vqa]") == expected);
  CHECK_THROWS_AS(render_template(qa, ""), ContractError);
  for (auto tok : kTemplateTokens) CHECK_FALSE(answer_index(tok).has_value());
  CHECK_FALSE(answer_index("[vqa]").has_value());
}

TEST_CASE("build_split examples") {
  DataConfig cfg;
  cfg.per_task = {100, 100, 100, 100};
  cfg.train_fraction = 0.67;
  const DatasetSplit split = build_split(cfg, 42);
  CHECK(split.train.size() == 268);
  CHECK(split.test.size() == 132);

  std::array<std::size_t, kNumTasks> train_per{}, test_per{};
  for (const auto& qa : split.train) ++train_per[static_cast<std::size_t>(qa.task)];
  for (const auto& qa : split.test) ++test_per[static_cast<std::size_t>(qa.task)];
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    CHECK(train_per[t] == 67);
    CHECK(test_per[t] == 33);
  }

  std::set<std::uint64_t> train_hashes;
  for (const auto& qa : split.train) train_hashes.insert(qa.scene.hash());
  for (const auto& qa : split.test) CHECK_FALSE(train_hashes.contains(qa.scene.hash()));

  const DatasetSplit again = build_split(cfg, 42);
  CHECK(again.train == split.train);
  CHECK(again.test == split.test);

  cfg.train_fraction = 1.0;
  CHECK_THROWS_AS(build_split(cfg, 42), ContractError);
  cfg.train_fraction = 0.67;
  cfg.per_task[2] = 0;
  CHECK_THROWS_AS(build_split(cfg, 42), ContractError);
}

TEST_CASE("default config yields 400 train and 200 test items") {
  const DatasetSplit split = build_split(DataConfig{}, 1);
  CHECK(split.train.size() == 400);
  CHECK(split.test.size() == 200);
}

TEST_CASE("collision exhaustion is reported") {
  DataConfig cfg;
  cfg.rows = 1;
  cfg.cols = 1;
  cfg.min_objects = 1;
  cfg.max_objects = 1;
  cfg.per_task = {40, 40, 40, 40};  // only 12 distinct one-patch scenes exist
  cfg.max_retries = 200;
  CHECK_THROWS_AS(build_split(cfg, 1), GenerationError);
}

TEST_CASE("dataset records round-trip byte for byte") {
  DataConfig cfg;
  cfg.per_task = {10, 10, 10, 10};
  const DatasetSplit split = build_split(cfg, 8);
  std::ostringstream out;
  write_items(out, split.train, split.seed, split.data_hash, "train");
  std::istringstream in(out.str());
  const ItemFile file = read_items(in);
  CHECK(file.items == split.train);
  CHECK(file.data_hash == split.data_hash);
  CHECK(file.split_name == "train");
  std::ostringstream again;
  write_items(again, file.items, file.seed, file.data_hash, file.split_name);
  CHECK(again.str() == out.str());

  std::istringstream bad("# paa-dataset v1 seed=1 data_hash=00\n1\tobject\t3\n");
  CHECK_THROWS_AS(read_items(bad), IoError);
}

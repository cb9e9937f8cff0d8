#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace paa {

enum class Task : std::uint8_t { object = 0, count = 1, color = 2, position = 3 };
inline constexpr std::array<Task, 4> kTasks{Task::object, Task::count, Task::color, Task::position};
inline constexpr std::size_t kNumTasks = kTasks.size();

std::string_view task_name(Task task);
Task parse_task(std::string_view name);

// Closed word lists. Object id 0 is background; colors and regions index
// their arrays directly.
inline constexpr std::array<std::string_view, 4> kObjectNames{"background", "circle", "square",
                                                              "triangle"};
inline constexpr std::array<std::string_view, 4> kColorNames{"red", "blue", "green", "yellow"};
inline constexpr std::array<std::string_view, 5> kRegionNames{"top", "bottom", "left", "right",
                                                              "center"};
inline constexpr std::array<std::string_view, 8> kCountWords{"one", "two",   "three", "four",
                                                             "five", "six", "seven", "eight"};
inline constexpr std::array<std::string_view, 9> kQuestionWords{
    "what", "is", "in", "the", "how", "many", "of", "color", "where"};

// Conversation template markers; never valid answers.
inline constexpr std::array<std::string_view, 5> kTemplateTokens{"[INST]", "<Img>", "<IMG_SLOT>",
                                                                 "</Img>", "[/INST]"};

inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kNoColor = 0xFF;

// Answer classes: objects (without background), colors, regions, count words.
const std::vector<std::string>& answer_vocabulary();
std::optional<std::size_t> answer_index(std::string_view word);
// Every word a prompt can contain, template markers included.
const std::vector<std::string>& prompt_vocabulary();

struct Cell {
  std::uint8_t object = kBackground;
  std::uint8_t color = kNoColor;
  bool operator==(const Cell&) const = default;
};

struct Scene {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Cell> cells;  // row-major

  std::size_t patch_count() const { return rows * cols; }
  std::size_t region_of(std::size_t patch) const;
  std::uint64_t hash() const;
  bool operator==(const Scene&) const = default;
};

// Coarse region of a grid position. The first and last ceil(rows/3) rows are
// top and bottom; the middle band splits the same way into left, center and
// right.
std::size_t region_of(std::size_t row, std::size_t col, std::size_t rows, std::size_t cols);

struct SceneQA {
  std::uint64_t id = 0;
  Scene scene;
  Task task = Task::object;
  std::vector<std::string> question;
  std::string answer;
  bool operator==(const SceneQA&) const = default;
};

struct Question {
  std::vector<std::string> words;
  std::string answer;
};

// Places between min_objects and max_objects objects on distinct patches.
Scene generate_scene(std::uint64_t seed, std::size_t rows, std::size_t cols,
                     std::size_t min_objects, std::size_t max_objects);

// All unambiguous questions of one category the scene supports, in a fixed
// order.
std::vector<Question> enumerate_questions(const Scene& scene, Task task);

// Picks one supported question; nullopt asks the caller to retry with another
// seed.
std::optional<SceneQA> generate_qa(const Scene& scene, Task task, std::uint64_t seed);

std::vector<std::string> render_template(const SceneQA& qa, std::string_view task_identifier);

struct DataConfig {
  std::size_t rows = 3;
  std::size_t cols = 3;
  std::size_t min_objects = 1;
  std::size_t max_objects = 4;
  std::array<std::size_t, kNumTasks> per_task{150, 150, 150, 150};
  double train_fraction = 0.67;
  std::size_t max_retries = 1000;

  // Hash of everything that determines the generated items.
  std::uint64_t hash(std::uint64_t seed) const;
};

struct DatasetSplit {
  std::uint64_t seed = 0;
  std::uint64_t data_hash = 0;
  std::array<std::size_t, kNumTasks> per_task{};
  std::vector<SceneQA> train;
  std::vector<SceneQA> test;
};

// Per category, floor(size * train_fraction) items go to train and the rest
// to test. Scenes are unique across the whole split.
DatasetSplit build_split(const DataConfig& config, std::uint64_t seed);

// Line-delimited records, one item per line, tab-separated fields:
//   id  task  rows  cols  cells  question  answer
// cells are space-separated "object/color" pairs or "-" for background.
// A leading "# paa-dataset v1 seed=<n> data_hash=<hex> split=<name>" header
// ties the file to its generating config.
void write_items(std::ostream& out, const std::vector<SceneQA>& items, std::uint64_t seed,
                 std::uint64_t data_hash, std::string_view split_name);
struct ItemFile {
  std::uint64_t seed = 0;
  std::uint64_t data_hash = 0;
  std::string split_name;
  std::vector<SceneQA> items;
};
ItemFile read_items(std::istream& in);

std::string format_item(const SceneQA& qa);
SceneQA parse_item(std::string_view line);

}  // namespace paa

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;  // stdout and stderr interleaved
};

Result run(const std::string& args) {
  const std::string cmd = std::string(PAA_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string last_error_line(const std::string& out) {
  std::istringstream in(out);
  std::string line, found;
  while (std::getline(in, line))
    if (line.rfind("error: ", 0) == 0) found = line;
  return found;
}

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "paa_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "small.txt") << "data.seed = 4\n"
                                      "data.per_task = 6,6,6,6\n"
                                      "adapter.channels = 8\nadapter.word_dim = 8\nadapter.inner_dim = 8\n"
                                      "adapter.attn_dim = 8\nadapter.out_dim = 8\n"
                                      "train.max_epochs = 2\ntrain.iters_per_epoch = 3\n";
    return d;
  }();
  return dir;
}

std::string in_dir(const std::string& name) { return (workdir() / name).string(); }

}  // namespace

TEST_CASE("usage errors exit with 2") {
  const Result none = run("");
  CHECK(none.code == 2);
  CHECK(none.out.find("gen-data") != std::string::npos);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("schedule --bogus").code == 2);
  CHECK(run("gen-data").code == 2);
  CHECK(run("--help").code == 0);
}

TEST_CASE("gradcheck reports every variant and passes") {
  const Result r = run("gradcheck --seed 7");
  CHECK(r.code == 0);
  for (const char* v : {"linear", "cross_attention", "local_only", "global_only", "global_plus_local"})
    CHECK(r.out.find(v) != std::string::npos);
  CHECK(r.out.find("max_rel_error") != std::string::npos);
}

TEST_CASE("schedule prints the warmup peak at step 1000") {
  const Result r = run("schedule --steps 1001");
  CHECK(r.code == 0);
  CHECK(r.out.find("\n0 1e-06\n") != std::string::npos);
  CHECK(r.out.find("\n1000 8e-05\n") != std::string::npos);
  const Result full = run("schedule --every 1000");
  CHECK(full.out.find("\n1999 1e-05\n") != std::string::npos);
}

TEST_CASE("gen-data, train, eval, compare and attn work end to end") {
  const std::string cfg = " --config " + in_dir("small.txt");
  const Result gen = run("gen-data" + cfg + " --out " + in_dir("data"));
  REQUIRE(gen.code == 0);
  CHECK(gen.out.find("train 16 test 8") != std::string::npos);

  const Result tr = run("train" + cfg + " --data " + in_dir("data") + " --out " + in_dir("run"));
  REQUIRE(tr.code == 0);
  CHECK(fs::exists(workdir() / "run" / "epoch_1.ckpt"));
  CHECK(fs::exists(workdir() / "run" / "epoch_2.ckpt"));
  std::ifstream metrics(workdir() / "run" / "metrics.jsonl");
  std::size_t lines = 0;
  for (std::string l; std::getline(metrics, l);) ++lines;
  CHECK(lines == 6);

  const std::string ckpt = " --checkpoint " + in_dir("run/final.ckpt") + " --data " + in_dir("data");
  const Result ev = run("eval" + ckpt);
  CHECK(ev.code == 0);
  CHECK(ev.out.find("Object") != std::string::npos);
  const Result js = run("eval --json" + ckpt);
  CHECK(js.code == 0);
  CHECK(js.out.find("\"categories\"") != std::string::npos);

  const Result wrong = run("eval --seed 99" + cfg + ckpt);
  CHECK(wrong.code == 1);
  CHECK(last_error_line(wrong.out).rfind("error: config_error: ", 0) == 0);

  const Result at = run("attn" + ckpt + " --index 2 --out " + in_dir("attn"));
  CHECK(at.code == 0);
  CHECK(fs::exists(workdir() / "attn" / "local_weights.pgm"));
  CHECK(fs::exists(workdir() / "attn" / "similarity.csv"));

  const Result cm1 = run("compare" + cfg + " --data " + in_dir("data") + " --out " + in_dir("cmp1"));
  const Result cm2 = run("compare" + cfg + " --data " + in_dir("data") + " --out " + in_dir("cmp2"));
  CHECK(cm1.code == 0);
  CHECK(cm1.out == cm2.out);
  CHECK(cm1.out.find("w/o global-atten") != std::string::npos);

  const Result one = run("compare" + cfg + " --variants linear --data " + in_dir("data") + " --out " + in_dir("cmp3"));
  CHECK(one.code == 1);
  CHECK(last_error_line(one.out).rfind("error: contract_error: ", 0) == 0);
}

TEST_CASE("runtime failures print one machine-parseable line and exit 1") {
  const Result missing = run("train --config /nonexistent/cfg.txt --data x --out y");
  CHECK(missing.code == 1);
  CHECK(missing.out == "error: io_error: cannot open config '/nonexistent/cfg.txt'\n");
  std::ofstream(workdir() / "bad.txt") << "adapter.variant = linear\n";
  const Result bad = run("schedule --config " + in_dir("bad.txt"));
  CHECK(bad.code == 1);
  CHECK(last_error_line(bad.out).rfind("error: config_error: ", 0) == 0);
}

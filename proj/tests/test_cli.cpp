// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef RETRO_BIN
#error "RETRO_BIN must point at the retro executable"
#endif

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(RETRO_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string capture(const std::string& args) {
  const std::string path = "/tmp/retro_cli_capture.txt";
  const std::string cmd = std::string(RETRO_BIN) + " " + args + " >" + path + " 2>/dev/null";
  std::system(cmd.c_str());
  std::ifstream in(path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("retro_cli_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  out << content;
}

const std::string kToyReactions = std::string(RETRO_SOURCE_DIR) + "/data/toy_reactions.txt";

}  // namespace

TEST_CASE("no arguments is a usage error") { CHECK(run("") == 1); }

TEST_CASE("unknown subcommand is a usage error") { CHECK(run("frobnicate") == 1); }

TEST_CASE("help exits zero") {
  CHECK(run("--help") == 0);
  CHECK(run("train --help") == 0);
}

TEST_CASE("tokenize emits one line per input and a manifest") {
  TempDir dir;
  write_file(dir.file("in.txt"), "# comment\nCC(=O)O\nClC%12CC%12\n");
  const std::string out = dir.file("tokens.txt");
  CHECK(run("tokenize --input " + dir.file("in.txt") + " --out " + out) == 0);
  CHECK(read_file(out) == "C C ( = O ) O\nCl C %12 C C %12\n");
  CHECK(fs::exists(out + ".manifest"));
  CHECK(read_file(out + ".manifest").find("command = tokenize") != std::string::npos);
}

TEST_CASE("tokenize on an unreadable file is a data error") {
  CHECK(run("tokenize --input /no/such/file") == 2);
}

TEST_CASE("tokenize reports bad lines as data errors") {
  TempDir dir;
  write_file(dir.file("in.txt"), "CCO\nC$C\n");
  CHECK(run("tokenize --input " + dir.file("in.txt")) == 2);
}

TEST_CASE("ingest splits deterministically and writes rejects") {
  TempDir dir;
  write_file(dir.file("rxn.txt"),
             "# two good lines, one bad\nCCO>>CC=O\nC[OH>>CC\nCC.O>>CCO\n");
  const std::string out_a = dir.file("a");
  const std::string out_b = dir.file("b");
  CHECK(run("ingest --input " + dir.file("rxn.txt") + " --out-dir " + out_a +
            " --split-ratio 50/50/0 --split-seed 9") == 0);
  CHECK(run("ingest --input " + dir.file("rxn.txt") + " --out-dir " + out_b +
            " --split-ratio 50/50/0 --split-seed 9") == 0);
  CHECK(read_file(out_a + "/train.txt") == read_file(out_b + "/train.txt"));
  CHECK(read_file(out_a + "/valid.txt") == read_file(out_b + "/valid.txt"));
  const std::string rejects = read_file(out_a + "/rejects.txt");
  CHECK(rejects.find("UnbalancedBracket") != std::string::npos);
  CHECK(fs::exists(out_a + "/ingest.manifest"));
}

TEST_CASE("ingest with a malformed ratio is a usage error") {
  TempDir dir;
  write_file(dir.file("rxn.txt"), "CCO>>CC=O\n");
  CHECK(run("ingest --input " + dir.file("rxn.txt") + " --out-dir " + dir.file("x") +
            " --split-ratio banana") == 1);
}

TEST_CASE("augment is reproducible under a fixed seed") {
  TempDir dir;
  const std::string out_a = dir.file("aug_a.txt");
  const std::string out_b = dir.file("aug_b.txt");
  CHECK(run("augment --input " + kToyReactions + " --out " + out_a +
            " --factor 3 --seed 11") == 0);
  CHECK(run("augment --input " + kToyReactions + " --out " + out_b +
            " --factor 3 --seed 11") == 0);
  const std::string a = read_file(out_a);
  CHECK(a == read_file(out_b));
  CHECK(std::count(a.begin(), a.end(), '\n') == 32 * 3);
  CHECK(fs::exists(out_a + ".manifest"));

  const std::string out_c = dir.file("aug_c.txt");
  CHECK(run("augment --input " + kToyReactions + " --out " + out_c +
            " --factor 3 --seed 12") == 0);
  CHECK(a != read_file(out_c));
}

TEST_CASE("emit-priors writes the seven-matrix bundle") {
  TempDir dir;
  const std::string out = dir.file("priors.txt");
  CHECK(run("emit-priors --input " + kToyReactions + " --line 3 --out " + out +
            " --sigma 1.0") == 0);
  const std::string text = read_file(out);
  for (const char* name : {" D\n", " m1\n", " m2\n", " m3\n", " m4\n", " B_intra\n", " B_cross\n"})
    CHECK(text.find(name) != std::string::npos);

  // First record "[CH3:1][OH:2].Br[CH3:3]>>[CH3:1][O:2][CH3:3]": 3 product atoms.
  std::istringstream in(text);
  std::string rows, cols, name;
  in >> rows >> cols >> name;
  CHECK(rows == "3");
  CHECK(cols == "3");
  CHECK(name == "D");
}

TEST_CASE("eval on an effectively empty test file is a data error") {
  TempDir dir;
  write_file(dir.file("empty.txt"), "# nothing but comments\n");
  CHECK(run("eval --checkpoint /no/ckpt --input " + dir.file("empty.txt")) == 2);
}

TEST_CASE("predict with a missing checkpoint is a data error") {
  TempDir dir;
  write_file(dir.file("in.txt"), "CCO\n");
  CHECK(run("predict --checkpoint /no/such/ckpt.bin --input " + dir.file("in.txt")) == 2);
}

TEST_CASE("train with an unknown config key is a usage error") {
  TempDir dir;
  write_file(dir.file("cfg.txt"), "heads = 2\nbogus_knob = 1\n");
  write_file(dir.file("train.txt"), "CCO>>CC=O\n");
  CHECK(run("train --config " + dir.file("cfg.txt") + " --train " + dir.file("train.txt") +
            " --out-dir " + dir.file("run")) == 1);
}

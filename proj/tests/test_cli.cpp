#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "bilinear/data.hpp"
#include "bilinear/model_io.hpp"
#include "bilinear/rng.hpp"

using namespace bilinear;
namespace fs = std::filesystem;

namespace {

// Runs the binary under test through the shell, captures stdout (+stderr when
// merge_stderr) and returns the exit code.
int run_cli(const std::string& args, std::string* out, bool merge_stderr = false) {
  const char* exe = std::getenv("BILINEAR_CLI");
  REQUIRE_MESSAGE(exe != nullptr, "BILINEAR_CLI must point at the CLI binary");
  const std::string cmd =
      std::string(exe) + " " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string text;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) text.append(buf, got);
  const int status = pclose(pipe);
  if (out) *out = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

// Tiny synthetic IDX dataset: 8x7 images whose brightest pixel encodes the
// digit, plus mild noise, so every model can separate the classes.
void write_synthetic_pool(const fs::path& dir, const std::string& image_name,
                          const std::string& label_name, int per_digit,
                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ByteImage> images;
  std::vector<int> labels;
  for (int digit = 0; digit < 10; ++digit) {
    for (int i = 0; i < per_digit; ++i) {
      ByteImage img;
      img.rows = 8;
      img.cols = 7;
      img.pixels.assign(8 * 7, 0);
      for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(80));
      img.pixels[static_cast<std::size_t>(digit) * 5 + 3] = 230;
      images.push_back(std::move(img));
      labels.push_back(digit);
    }
  }
  // interleave the digits so splits see a shuffled pool
  std::vector<std::size_t> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<ByteImage> shuffled;
  std::vector<int> shuffled_labels;
  for (const std::size_t i : order) {
    shuffled.push_back(images[i]);
    shuffled_labels.push_back(labels[i]);
  }
  write_bytes(dir / image_name, write_idx_images(shuffled));
  write_bytes(dir / label_name, write_idx_labels(shuffled_labels));
}

const fs::path& synthetic_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("bilinear_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    write_synthetic_pool(d, "train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                         60, 101);
    write_synthetic_pool(d, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte",
                         30, 202);
    return d;
  }();
  return dir;
}

std::string data_flag() { return " --data-dir " + synthetic_dir().string(); }

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

TEST_CASE("train prints a CSV row and writes a loadable model") {
  const fs::path model_path = synthetic_dir() / "blr_model.txt";
  const fs::path csv_path = synthetic_dir() / "rows.csv";
  std::string out;
  const int code = run_cli(
      "train --experiment pair-8v9 --model blr -L 2 -T 16 --val-size 8 "
      "--test-size 40 --seed 1 --alpha 0.01 --model-out " + model_path.string() +
      " --out " + csv_path.string() + data_flag(), &out);
  CHECK(code == 0);
  REQUIRE(out.find('\n') != std::string::npos);
  const std::string header = out.substr(0, out.find('\n'));
  CHECK(header ==
        "experiment,model,L,T,alpha,seed,train_acc,val_acc,test_acc,param_count,"
        "wall_time_ms");
  const std::string row = out.substr(out.find('\n') + 1);
  CHECK(row.rfind("pair-8v9,blr,2,16,0.01,1,", 0) == 0);
  const std::vector<std::string> fields = split_csv(row);
  REQUIRE(fields.size() == 11);
  CHECK(fields[9] == "30");  // 2 * (8 + 7)

  const AnyModel m = load_model_file(model_path.string());
  CHECK(model_kind(m) == "blr");

  // the appended file carries the same header and row (modulo wall time)
  const std::string csv = slurp(csv_path);
  CHECK(csv.rfind("experiment,model,L,T,", 0) == 0);
  CHECK(csv.find("pair-8v9,blr,2,16,0.01,1,") != std::string::npos);
}

TEST_CASE("train rows are reproducible apart from the wall-time field") {
  const std::string args =
      "train --experiment pair-3v7 --model llr -T 12 --val-size 6 --test-size 30 "
      "--seed 5" + data_flag();
  std::string first;
  std::string second;
  REQUIRE(run_cli(args, &first) == 0);
  REQUIRE(run_cli(args, &second) == 0);
  auto strip_wall = [](const std::string& text) {
    const std::size_t cut = text.rfind(',');
    return text.substr(0, cut);
  };
  CHECK(strip_wall(first) == strip_wall(second));
}

TEST_CASE("train supports grid selection and reports the chosen alpha") {
  std::string out;
  const int code = run_cli(
      "train --experiment pair-8v9 --model llr -T 16 --val-size 8 --test-size 40 "
      "--seed 2 --grid 0,0.01" + data_flag(), &out);
  CHECK(code == 0);
  const std::string row = out.substr(out.find('\n') + 1);
  const std::vector<std::string> fields = split_csv(row);
  REQUIRE(fields.size() == 11);
  CHECK((fields[4] == "0" || fields[4] == "0.01"));
  CHECK(fields[2] == "0");  // linear models report L=0
}

TEST_CASE("figure emits the pair grid and is byte-identical across reruns") {
  const fs::path out_a = synthetic_dir() / "fig_a.csv";
  const fs::path out_b = synthetic_dir() / "fig_b.csv";
  const std::string args =
      "figure --experiment pair-8v9 --Ts 8,16 --seeds 1,2 --val-size 8 "
      "--test-size 40 --grid 0,0.01 --out ";
  REQUIRE(run_cli(args + out_a.string() + data_flag(), nullptr) == 0);
  REQUIRE(run_cli(args + out_b.string() + data_flag(), nullptr) == 0);
  const std::string csv = slurp(out_a);
  CHECK(csv == slurp(out_b));

  std::vector<std::string> lines;
  std::string cur;
  for (const char c : csv) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  std::vector<std::string> data_lines;
  std::string header;
  for (const std::string& line : lines) {
    if (line.empty()) continue;
    if (line[0] == '#') continue;
    if (line.rfind("seed,", 0) == 0) {
      header = line;
    } else {
      data_lines.push_back(line);
    }
  }
  CHECK(header == "seed,T,llr,blr_L1,blr_L2,blr_L3,blr_L4");
  REQUIRE(data_lines.size() == 6);  // 2 seeds x 2 T rows + 2 mean rows
  CHECK(split_csv(data_lines[0])[0] == "1");
  CHECK(split_csv(data_lines[2])[0] == "2");
  CHECK(split_csv(data_lines[4])[0] == "mean");
  for (const std::string& line : data_lines) {
    const std::vector<std::string> fields = split_csv(line);
    REQUIRE(fields.size() == 7);
    for (std::size_t i = 2; i < fields.size(); ++i) {
      CHECK(fields[i] != "nan");
      const double v = std::stod(fields[i]);
      CHECK(v >= 0.0);
      CHECK(v <= 100.0);
    }
  }
}

TEST_CASE("figure runs the multiclass grid") {
  std::string out;
  const int code = run_cli(
      "figure --experiment multiclass --Ts 20 --seeds 1 --val-size 20 "
      "--test-size 60 --grid 0.01" + data_flag(), &out);
  CHECK(code == 0);
  CHECK(out.find("seed,T,lsr,bsr_L1,bsr_L2,bsr_L3") != std::string::npos);
  CHECK(out.find("\n1,20,") != std::string::npos);
  CHECK(out.find("nan") == std::string::npos);
}

TEST_CASE("figure honors the worker-count option") {
  const fs::path out_serial = synthetic_dir() / "fig_w1.csv";
  const fs::path out_pool = synthetic_dir() / "fig_w3.csv";
  const std::string args =
      "figure --experiment pair-8v9 --Ts 8,16 --seeds 1 --val-size 8 "
      "--test-size 40 --grid 0,0.01 ";
  REQUIRE(run_cli(args + "--workers 1 --out " + out_serial.string() + data_flag(),
                  nullptr) == 0);
  REQUIRE(run_cli(args + "--workers 3 --out " + out_pool.string() + data_flag(),
                  nullptr) == 0);
  CHECK(slurp(out_serial) == slurp(out_pool));
}

TEST_CASE("gradcheck passes cleanly and fails under the corrupt hook") {
  std::string out;
  CHECK(run_cli("gradcheck", &out) == 0);
  CHECK(out.find("llr dJ/dW (alpha=0)") != std::string::npos);
  CHECK(out.find("blr dJ/da (prod, alpha=0.1)") != std::string::npos);
  CHECK(out.find("bsr dJ/dB (sum, alpha=0)") != std::string::npos);
  CHECK(out.find("all gradients within 1e-5") != std::string::npos);

  CHECK(run_cli("gradcheck --corrupt 1e-3", &out) == 3);
  CHECK(run_cli("gradcheck -M 30 -N 30 -T 30", &out) == 1);  // dims too large
}

TEST_CASE("equivalence reports both shapes and the partial-rank gap") {
  std::string out;
  CHECK(run_cli("equivalence", &out) == 0);
  CHECK(out.find("W 5x7") != std::string::npos);
  CHECK(out.find("W 28x28") != std::string::npos);
  CHECK(out.find("rank-1 W at L=1") != std::string::npos);
  CHECK(out.find("reported only") != std::string::npos);
  CHECK(out.find("equivalence holds within 1e-9") != std::string::npos);
}

TEST_CASE("inspect prints shape and parameter count") {
  const fs::path model_path = synthetic_dir() / "inspect_model.txt";
  REQUIRE(run_cli("train --experiment pair-8v9 --model llr -T 12 --val-size 6 "
                  "--test-size 20 --alpha 0 --model-out " + model_path.string() +
                  data_flag(), nullptr) == 0);
  std::string out;
  CHECK(run_cli("inspect " + model_path.string(), &out) == 0);
  CHECK(out.find("kind: llr") != std::string::npos);
  CHECK(out.find("shape: 8x7") != std::string::npos);
  CHECK(out.find("parameter count: 56") != std::string::npos);
}

TEST_CASE("error paths map to the documented exit codes") {
  std::string out;
  // unknown flag / missing subcommand -> 1
  CHECK(run_cli("--bogus", &out, true) == 1);
  CHECK(run_cli("", &out, true) == 1);
  // incompatible model/experiment -> 1, caught before data loading
  CHECK(run_cli("train --experiment pair-8v9 --model bsr -T 8", &out, true) == 1);
  CHECK(out.find("multiclass") != std::string::npos);
  // malformed experiment name -> 1
  CHECK(run_cli("train --experiment pair-8v8 -T 8" + data_flag(), &out, true) == 1);
  // missing data -> 2, message names the absent file
  CHECK(run_cli("train -T 8 --data-dir /nonexistent_dir_42", &out, true) == 2);
  CHECK(out.find("train-images-idx3-ubyte") != std::string::npos);
  // invalid training config -> 1
  CHECK(run_cli("train -T 8 --alpha -0.5" + data_flag(), &out, true) == 1);
  // trace without a fixed alpha -> 1
  CHECK(run_cli("train -T 8 --trace /tmp/t.csv" + data_flag(), &out, true) == 1);
  CHECK(out.find("--alpha") != std::string::npos);
  // inspect on a missing file -> 2
  CHECK(run_cli("inspect /nonexistent_model_42.txt", &out, true) == 2);
  // --help -> 0
  CHECK(run_cli("--help", &out) == 0);
  CHECK(out.find("train") != std::string::npos);
}

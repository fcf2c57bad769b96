#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bilinear/data.hpp"
#include "bilinear/eval.hpp"
#include "bilinear/model_io.hpp"
#include "bilinear/optim.hpp"

namespace bilinear {

// Experiment names: "multiclass" or "pair-PvQ" with distinct digits P, Q
// (e.g. "pair-8v9", "pair-5v8").
struct ExperimentKind {
  bool multiclass = false;
  int digit_p = 0;
  int digit_q = 0;
};

ExperimentKind parse_experiment(const std::string& name);

// Binary models (llr, blr) pair with "pair-*" experiments, softmax models
// (lsr, bsr) with "multiclass". Anything else is invalid_argument.
void check_model_experiment(const std::string& model, const ExperimentKind& kind);

// One training cell: split the pools, train at each grid alpha, keep the
// best validation accuracy, evaluate on all three splits.
struct RunSpec {
  std::string experiment = "pair-8v9";
  std::string model = "blr";
  int rank = 1;            // ignored for llr/lsr
  int train_size = 1024;
  int val_size = 2000;
  int test_size = 2000;
  std::uint64_t seed = 1;
  std::optional<double> fixed_alpha;  // unset: select over `grid`
  CvGrid grid;
  RegularizerKind regularizer = RegularizerKind::ProductSquares;  // bilinear only
  TrainConfig train;                  // rank/alpha/seed/regularizer overwritten
  std::ostream* trace = nullptr;      // forwarded to the trainer(s)
};

std::pair<EvalReport, AnyModel> run_single(const MnistData& data, const RunSpec& spec);

// Figure grid: every (seed, T, model column) cell trained with alpha
// selection; cells hold test accuracy in percent.
struct FigureSpec {
  std::string experiment = "pair-8v9";
  std::vector<int> train_sizes;            // empty: figure defaults
  std::vector<std::uint64_t> seeds = {1};
  bool full_scale = false;                 // desk scale caps the T sweep
  int val_size = 0;                        // 0: default (2000 binary, 10000 multiclass)
  int test_size = 0;
  CvGrid grid;
  RegularizerKind regularizer = RegularizerKind::ProductSquares;
  TrainConfig train;
  int workers = 1;
};

// Default T sweeps: pair figures use {32,128,512,1024,4096,8192}, the
// multiclass figure {160,640,2560,5120}; desk scale truncates to T<=1024
// and T<=640 respectively.
std::vector<int> figure_train_sizes(const ExperimentKind& kind, bool full_scale);

// Model columns: {llr, blr_L1..blr_L4} for pairs, {lsr, bsr_L1..bsr_L3}
// for multiclass.
std::vector<std::string> figure_columns(const ExperimentKind& kind);

// Runs the whole grid (optionally on `workers` threads; output is assembled
// in grid order either way) and returns the CSV text: `#` metadata comments,
// a header, one row per (seed, T), and per-T mean rows when several seeds
// ran. Failed cells are recorded as "nan" and the run continues.
std::string run_figure(const MnistData& data, const FigureSpec& spec);

// Finite-difference validation of every analytic gradient.
struct GradCheckSpec {
  int rows = 5;
  int cols = 5;
  int rank = 2;
  int batch = 10;
  int classes = 3;
  std::uint64_t seed = 1;
  double corrupt = 0.0;  // test hook: added to one analytic component
};

struct GradCheckReport {
  std::vector<std::pair<std::string, double>> entries;  // name, max rel error
  double worst = 0.0;
};

GradCheckReport run_gradcheck(const GradCheckSpec& spec);

// Linear/bilinear score equivalence through decompose_w at L = min(M, N),
// checked over 100 random inputs per shape. `partial_gap` documents the
// reconstruction error at L below the rank (reported, not a failure).
struct EquivalenceCase {
  int rows = 0;
  int cols = 0;
  double max_deviation = 0.0;
};

struct EquivalenceReport {
  std::vector<EquivalenceCase> cases;  // full-rank decompositions
  double worst = 0.0;                  // max over `cases`
  double rank1_deviation = 0.0;        // L=1 on a rank-1 W
  double partial_gap = 0.0;            // L=2 on a full-rank 5x7 W
};

EquivalenceReport run_equivalence(std::uint64_t seed);

// Human-readable description of a model file: kind, shape, norms, count.
std::string inspect_model(const AnyModel& m);

// Flag value if nonempty, else $BILINEAR_DATA_DIR, else "data/mnist".
std::string resolve_data_dir(const std::string& flag_value);

// $BILINEAR_WORKERS when set and positive, else 1.
int default_workers();

}  // namespace bilinear

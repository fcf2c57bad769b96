#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include "bilinear/model.hpp"
#include "bilinear/objective.hpp"

namespace bilinear {

struct LineSearchParams {
  double initial_step = 1.0;
  double shrink = 0.5;              // in (0,1)
  double sufficient_decrease = 1e-4;  // Armijo constant, in (0,1)
  int max_halvings = 50;
};

struct LineSearchResult {
  double step = 0.0;
  double value = 0.0;  // objective at `step` (== value at 0 when no progress)
  bool made_progress = false;
  int probes = 0;
};

// Backtracking search along a descent ray: returns the largest step
// initial_step * shrink^j (j <= max_halvings) satisfying
//   eval_at(step) < value_at_zero - sufficient_decrease * step * grad_sq_norm,
// or step 0 with made_progress=false when no probe qualifies. The strict
// comparison keeps accepted objective values strictly decreasing even when the
// decrease margin underflows. Non-finite probes fail the test naturally; a
// non-finite value_at_zero is a NumericError.
LineSearchResult backtracking_line_search(
    const std::function<double(double)>& eval_at, double value_at_zero,
    double grad_sq_norm, const LineSearchParams& params = {});

struct TrainConfig {
  int rank = 1;  // L; ignored by the linear trainers
  double alpha = 0.0;
  RegularizerKind regularizer = RegularizerKind::SumSquares;
  int outer_sweeps = 10;      // i_max
  double inner_tol = 1e-6;    // relative objective decrease cutoff per block loop
  int inner_max_iters = 100;  // per block loop; linear cap = outer_sweeps * this
  std::uint64_t seed = 0;
  LineSearchParams line_search;
};

struct TrainReport {
  // trace[0] is the objective at initialization; one entry per accepted step
  // after that. Nonincreasing by construction.
  std::vector<double> trace;
  int outer_sweeps = 0;  // sweeps executed (gradient steps for linear models)
  bool converged = false;
  double wall_time_ms = 0.0;
};

// A = 0, B columns i.i.d. uniform[-1,1]; columns 2..L are replaced by their
// Gram-Schmidt residual against the previous (normalized) columns, redrawing
// when a residual collapses below 1e-12. rank > min(rows, cols) only warns:
// the surplus columns keep their raw draw.
BilinearModel init_blr(int rows, int cols, int rank, std::uint64_t seed);
// Per-class init_blr drawing from one shared generator, class 0 first.
BilinearSoftmaxModel init_bsr(int rows, int cols, int rank, int num_classes,
                              std::uint64_t seed);

// Alternating block descent: for each outer sweep and each rank l, run an
// inner loop on a_l (gradient step + line search) to tolerance, then on b_l.
// An optional trace stream receives CSV lines "step,block,eta,J".
std::pair<BilinearModel, TrainReport> train_blr(const BinaryBatch& batch,
                                                const TrainConfig& cfg,
                                                std::ostream* trace_stream = nullptr);

// Full-gradient descent on W from W = 0 (or from initial_w), same line search,
// capped at outer_sweeps * inner_max_iters steps.
std::pair<LinearModel, TrainReport> train_llr(const BinaryBatch& batch,
                                              const TrainConfig& cfg,
                                              std::ostream* trace_stream = nullptr);
std::pair<LinearModel, TrainReport> train_llr(const BinaryBatch& batch,
                                              const TrainConfig& cfg,
                                              const Matrix& initial_w,
                                              std::ostream* trace_stream = nullptr);

// Algorithm as train_blr but each block stacks the K per-class columns
// [a_{l,1} ... a_{l,K}] and advances them with one shared line-search step.
std::pair<BilinearSoftmaxModel, TrainReport> train_bsr(
    const MulticlassBatch& batch, const TrainConfig& cfg,
    std::ostream* trace_stream = nullptr);

// Full-gradient descent on all W_k jointly with one shared step.
std::pair<LinearSoftmaxModel, TrainReport> train_lsr(
    const MulticlassBatch& batch, const TrainConfig& cfg,
    std::ostream* trace_stream = nullptr);

}  // namespace bilinear

#include "bilinear/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <string>

#include "bilinear/errors.hpp"
#include "bilinear/rng.hpp"
#include "bilinear/tensor.hpp"

namespace bilinear {

namespace {

void check_line_search_params(const LineSearchParams& p) {
  if (!std::isfinite(p.initial_step) || p.initial_step <= 0.0) {
    throw std::invalid_argument("LineSearchParams: initial_step must be positive");
  }
  if (!(p.shrink > 0.0) || !(p.shrink < 1.0)) {
    throw std::invalid_argument("LineSearchParams: shrink must lie in (0,1)");
  }
  if (!(p.sufficient_decrease > 0.0) || !(p.sufficient_decrease < 1.0)) {
    throw std::invalid_argument(
        "LineSearchParams: sufficient_decrease must lie in (0,1)");
  }
  if (p.max_halvings < 0) {
    throw std::invalid_argument("LineSearchParams: max_halvings must be >= 0");
  }
}

void check_train_config(const TrainConfig& cfg, bool bilinear) {
  if (bilinear && cfg.rank < 1) {
    throw std::invalid_argument("TrainConfig: rank must be >= 1");
  }
  if (!std::isfinite(cfg.alpha) || cfg.alpha < 0.0) {
    throw std::invalid_argument("TrainConfig: alpha must be finite and >= 0");
  }
  if (cfg.outer_sweeps < 1) {
    throw std::invalid_argument("TrainConfig: outer_sweeps must be >= 1");
  }
  if (!(cfg.inner_tol > 0.0)) {
    throw std::invalid_argument("TrainConfig: inner_tol must be > 0");
  }
  if (cfg.inner_max_iters < 1) {
    throw std::invalid_argument("TrainConfig: inner_max_iters must be >= 1");
  }
  check_line_search_params(cfg.line_search);
  if (bilinear) {
    if (cfg.regularizer == RegularizerKind::FrobeniusOfW) {
      throw std::invalid_argument(
          "TrainConfig: the frobenius regularizer is evaluate-only; train with "
          "sum or prod");
    }
  } else if (cfg.regularizer != RegularizerKind::SumSquares) {
    throw std::invalid_argument(
        "TrainConfig: linear models support only the sum regularizer");
  }
}

class Stopwatch {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

class TraceWriter {
 public:
  explicit TraceWriter(std::ostream* out) : out_(out) {
    if (out_) *out_ << "step,block,eta,J\n";
  }
  void accepted(const std::string& block, double eta, double j) {
    ++step_;
    if (!out_) return;
    *out_ << step_ << ',' << block << ',' << std::setprecision(17) << eta << ','
          << j << '\n';
  }

 private:
  std::ostream* out_;
  int step_ = 0;
};

void warn_if_single_class(const BinaryBatch& batch, const char* who) {
  for (std::size_t t = 1; t < batch.labels.size(); ++t) {
    if (batch.labels[t] != batch.labels.front()) return;
  }
  std::cerr << who << ": warning: training batch contains a single class\n";
}

void warn_if_single_class(const MulticlassBatch& batch, const char* who) {
  for (int t = 1; t < batch.size(); ++t) {
    if (batch.label_of(t) != batch.label_of(0)) return;
  }
  std::cerr << who << ": warning: training batch contains a single class\n";
}

// Columns i.i.d. uniform[-1,1]; from the second one on, keep the Gram-Schmidt
// residual against the previous normalized columns, redrawing when it
// collapses. When every retry collapses (rank above min(M,N)) the raw draw
// stays, since orthogonality is unattainable there.
void draw_b_columns(Matrix& b, Rng& rng) {
  std::vector<Vector> normalized;
  Vector draw(b.rows());
  for (int l = 0; l < b.cols(); ++l) {
    Vector col;
    for (int attempt = 0; attempt < 50; ++attempt) {
      for (double& v : draw) v = rng.uniform_pm1();
      if (l == 0) {
        col = draw;
        break;
      }
      Vector res = gram_schmidt_residual(normalized, draw);
      if (norm(res) >= 1e-12) {
        col = std::move(res);
        break;
      }
      col = draw;
    }
    set_column(b, l, col);
    const double n = norm(col);
    if (n > 0.0) {
      Vector unit = col;
      for (double& v : unit) v /= n;
      normalized.push_back(std::move(unit));
    }
  }
}

void warn_if_rank_excessive(int rows, int cols, int rank, const char* who) {
  if (rank > std::min(rows, cols)) {
    std::cerr << who << ": warning: rank " << rank << " exceeds min(" << rows
              << ", " << cols << "); surplus columns cannot be orthogonal\n";
  }
}

std::vector<int> label_vector(const MulticlassBatch& batch) {
  std::vector<int> labels(batch.size());
  for (int t = 0; t < batch.size(); ++t) labels[t] = batch.label_of(t);
  return labels;
}

// r(t,k) = softmax(z_t)_k - onehot(t,k), with the usual max subtraction
void softmax_residuals(const Matrix& z, const Matrix& onehot, Matrix& r) {
  for (int t = 0; t < z.rows(); ++t) {
    const double* row = z.row(t);
    double zmax = row[0];
    for (int k = 1; k < z.cols(); ++k) zmax = std::max(zmax, row[k]);
    double sum = 0.0;
    double* out = r.row(t);
    for (int k = 0; k < z.cols(); ++k) {
      out[k] = std::exp(row[k] - zmax);
      sum += out[k];
    }
    for (int k = 0; k < z.cols(); ++k) out[k] = out[k] / sum - onehot(t, k);
  }
}

}  // namespace

LineSearchResult backtracking_line_search(
    const std::function<double(double)>& eval_at, double value_at_zero,
    double grad_sq_norm, const LineSearchParams& params) {
  check_line_search_params(params);
  if (!std::isfinite(value_at_zero)) {
    throw NumericError("backtracking_line_search: objective at step 0 is not finite");
  }
  if (!std::isfinite(grad_sq_norm) || grad_sq_norm < 0.0) {
    throw std::invalid_argument(
        "backtracking_line_search: grad_sq_norm must be finite and >= 0");
  }
  LineSearchResult result;
  result.value = value_at_zero;
  double eta = params.initial_step;
  for (int j = 0; j <= params.max_halvings; ++j, eta *= params.shrink) {
    const double f = eval_at(eta);
    ++result.probes;
    // strict comparison: when the decrease margin underflows below one ulp of
    // the current value, a zero-decrease probe must still be rejected. NaN
    // probes fail the comparison and are skipped like any bad step.
    if (f < value_at_zero - params.sufficient_decrease * eta * grad_sq_norm) {
      result.step = eta;
      result.value = f;
      result.made_progress = true;
      return result;
    }
  }
  return result;
}

BilinearModel init_blr(int rows, int cols, int rank, std::uint64_t seed) {
  if (rank < 1) throw std::invalid_argument("init_blr: rank must be >= 1");
  warn_if_rank_excessive(rows, cols, rank, "init_blr");
  Rng rng(seed);
  BilinearModel m{Matrix(rows, rank, 0.0), Matrix(cols, rank, 0.0)};
  draw_b_columns(m.b, rng);
  return m;
}

BilinearSoftmaxModel init_bsr(int rows, int cols, int rank, int num_classes,
                              std::uint64_t seed) {
  if (rank < 1) throw std::invalid_argument("init_bsr: rank must be >= 1");
  if (num_classes < 2) {
    throw std::invalid_argument("init_bsr: need at least 2 classes");
  }
  warn_if_rank_excessive(rows, cols, rank, "init_bsr");
  Rng rng(seed);
  BilinearSoftmaxModel m;
  for (int k = 0; k < num_classes; ++k) {
    BilinearModel cls{Matrix(rows, rank, 0.0), Matrix(cols, rank, 0.0)};
    draw_b_columns(cls.b, rng);
    m.classes.push_back(std::move(cls));
  }
  return m;
}

std::pair<BilinearModel, TrainReport> train_blr(const BinaryBatch& batch,
                                                const TrainConfig& cfg,
                                                std::ostream* trace_stream) {
  check_train_config(cfg, true);
  validate_batch(batch);
  warn_if_single_class(batch, "train_blr");
  Stopwatch clock;

  const int t_count = batch.size();
  const int rows = batch.inputs.front().rows();
  const int cols = batch.inputs.front().cols();
  const double inv_t = 1.0 / t_count;
  const bool product = cfg.regularizer == RegularizerKind::ProductSquares;

  BilinearModel m = init_blr(rows, cols, cfg.rank, cfg.seed);
  Vector z(t_count, 0.0);  // scores start at 0 because A starts at 0
  double reg_run = regularizer_value(m, cfg.regularizer);
  double j_cur = binary_data_term(z, batch.labels) + cfg.alpha * reg_run;
  if (!std::isfinite(j_cur)) {
    throw NumericError("train_blr: initial objective is not finite");
  }

  TrainReport report;
  report.trace.push_back(j_cur);
  TraceWriter tracer(trace_stream);

  Vector zp(t_count), s(t_count);
  std::vector<Vector> proj(t_count);
  bool tolerance_met = false;

  for (int sweep = 0; sweep < cfg.outer_sweeps; ++sweep) {
    const double j_sweep_start = j_cur;
    bool any_accept = false;
    for (int l = 0; l < cfg.rank; ++l) {
      for (int side = 0; side < 2; ++side) {
        const bool a_side = side == 0;
        // the frozen factor fixes both the per-sample projections and (for the
        // product regularizer) the quadratic weight of this block
        const Vector frozen = column(a_side ? m.b : m.a, l);
        Vector active = column(a_side ? m.a : m.b, l);
        for (int t = 0; t < t_count; ++t) {
          proj[t] = a_side ? matvec(batch.inputs[t], frozen)
                           : vecmat(frozen, batch.inputs[t]);
        }
        const double scale = product ? squared_norm(frozen) : 1.0;
        const int dim = static_cast<int>(active.size());
        Vector g(dim);
        for (int iter = 0; iter < cfg.inner_max_iters; ++iter) {
          std::fill(g.begin(), g.end(), 0.0);
          for (int t = 0; t < t_count; ++t) {
            const double r = logistic(z[t]) - batch.labels[t];
            const double* p = proj[t].data();
            for (int i = 0; i < dim; ++i) g[i] += r * p[i];
          }
          for (int i = 0; i < dim; ++i) {
            g[i] = g[i] * inv_t + cfg.alpha * scale * active[i];
          }
          const double gsq = squared_norm(g);
          if (!(gsq > 0.0)) break;
          for (int t = 0; t < t_count; ++t) s[t] = dot(proj[t], g);
          // regularizer along the ray is an exact quadratic in eta
          const double r1 = -dot(active, g) * scale;
          const double r2 = 0.5 * gsq * scale;
          auto eval = [&](double eta) {
            for (int t = 0; t < t_count; ++t) zp[t] = z[t] - eta * s[t];
            return binary_data_term(zp, batch.labels) +
                   cfg.alpha * (reg_run + (r1 * eta + r2 * (eta * eta)));
          };
          const LineSearchResult ls =
              backtracking_line_search(eval, j_cur, gsq, cfg.line_search);
          if (!ls.made_progress) break;
          for (int i = 0; i < dim; ++i) active[i] -= ls.step * g[i];
          set_column(a_side ? m.a : m.b, l, active);
          z.swap(zp);  // zp holds exactly the accepted probe's scores
          reg_run = reg_run + (r1 * ls.step + r2 * (ls.step * ls.step));
          const double j_prev = j_cur;
          j_cur = ls.value;
          report.trace.push_back(j_cur);
          tracer.accepted(std::string(a_side ? "a" : "b") + std::to_string(l + 1),
                          ls.step, j_cur);
          any_accept = true;
          if (j_prev - j_cur < cfg.inner_tol * std::max(1.0, std::abs(j_prev))) {
            break;
          }
        }
      }
    }
    report.outer_sweeps = sweep + 1;
    if (!any_accept) {
      // a sweep that accepts nothing reproduces itself; further sweeps are moot
      tolerance_met = true;
      break;
    }
    tolerance_met = (j_sweep_start - j_cur) <
                    cfg.inner_tol * std::max(1.0, std::abs(j_sweep_start));
  }
  report.converged = tolerance_met;
  report.wall_time_ms = clock.ms();
  return {std::move(m), std::move(report)};
}

std::pair<LinearModel, TrainReport> train_llr(const BinaryBatch& batch,
                                              const TrainConfig& cfg,
                                              const Matrix& initial_w,
                                              std::ostream* trace_stream) {
  check_train_config(cfg, false);
  validate_batch(batch);
  warn_if_single_class(batch, "train_llr");
  Stopwatch clock;

  const int t_count = batch.size();
  const int rows = batch.inputs.front().rows();
  const int cols = batch.inputs.front().cols();
  if (initial_w.rows() != rows || initial_w.cols() != cols) {
    throw std::invalid_argument(
        "train_llr: initial W is " + std::to_string(initial_w.rows()) + "x" +
        std::to_string(initial_w.cols()) + " but inputs are " +
        std::to_string(rows) + "x" + std::to_string(cols));
  }
  for (const double v : initial_w.data()) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("train_llr: initial W has non-finite entries");
    }
  }
  const double inv_t = 1.0 / t_count;
  const int entries = rows * cols;

  LinearModel m{initial_w};
  Vector z(t_count);
  for (int t = 0; t < t_count; ++t) z[t] = frobenius_inner(m.w, batch.inputs[t]);
  double reg_run = 0.5 * squared_norm(m.w.data());
  double j_cur = binary_data_term(z, batch.labels) + cfg.alpha * reg_run;
  if (!std::isfinite(j_cur)) {
    throw NumericError("train_llr: initial objective is not finite");
  }

  TrainReport report;
  report.trace.push_back(j_cur);
  TraceWriter tracer(trace_stream);

  Vector zp(t_count), s(t_count);
  Matrix g(rows, cols);
  const long long cap =
      static_cast<long long>(cfg.outer_sweeps) * cfg.inner_max_iters;
  for (long long iter = 0; iter < cap; ++iter) {
    report.outer_sweeps = static_cast<int>(iter) + 1;
    double* gd = g.data().data();
    const double* wd = m.w.data().data();
    std::fill(g.data().begin(), g.data().end(), 0.0);
    for (int t = 0; t < t_count; ++t) {
      const double r = logistic(z[t]) - batch.labels[t];
      const double* x = batch.inputs[t].data().data();
      for (int e = 0; e < entries; ++e) gd[e] += r * x[e];
    }
    double gsq = 0.0;
    for (int e = 0; e < entries; ++e) {
      gd[e] = gd[e] * inv_t + cfg.alpha * wd[e];
      gsq += gd[e] * gd[e];
    }
    if (!(gsq > 0.0)) {
      report.converged = true;
      break;
    }
    for (int t = 0; t < t_count; ++t) s[t] = frobenius_inner(g, batch.inputs[t]);
    const double r1 = -frobenius_inner(m.w, g);
    const double r2 = 0.5 * gsq;
    auto eval = [&](double eta) {
      for (int t = 0; t < t_count; ++t) zp[t] = z[t] - eta * s[t];
      return binary_data_term(zp, batch.labels) +
             cfg.alpha * (reg_run + (r1 * eta + r2 * (eta * eta)));
    };
    const LineSearchResult ls =
        backtracking_line_search(eval, j_cur, gsq, cfg.line_search);
    if (!ls.made_progress) {
      report.converged = true;
      break;
    }
    double* wm = m.w.data().data();
    for (int e = 0; e < entries; ++e) wm[e] -= ls.step * gd[e];
    z.swap(zp);
    reg_run = reg_run + (r1 * ls.step + r2 * (ls.step * ls.step));
    const double j_prev = j_cur;
    j_cur = ls.value;
    report.trace.push_back(j_cur);
    tracer.accepted("w", ls.step, j_cur);
    if (j_prev - j_cur < cfg.inner_tol * std::max(1.0, std::abs(j_prev))) {
      report.converged = true;
      break;
    }
  }
  report.wall_time_ms = clock.ms();
  return {std::move(m), std::move(report)};
}

std::pair<LinearModel, TrainReport> train_llr(const BinaryBatch& batch,
                                              const TrainConfig& cfg,
                                              std::ostream* trace_stream) {
  validate_batch(batch);
  const Matrix zero(batch.inputs.front().rows(), batch.inputs.front().cols(), 0.0);
  return train_llr(batch, cfg, zero, trace_stream);
}

std::pair<BilinearSoftmaxModel, TrainReport> train_bsr(
    const MulticlassBatch& batch, const TrainConfig& cfg,
    std::ostream* trace_stream) {
  check_train_config(cfg, true);
  validate_batch(batch);
  warn_if_single_class(batch, "train_bsr");
  Stopwatch clock;

  const int t_count = batch.size();
  const int k_count = batch.classes();
  const int rows = batch.inputs.front().rows();
  const int cols = batch.inputs.front().cols();
  const double inv_t = 1.0 / t_count;
  const bool product = cfg.regularizer == RegularizerKind::ProductSquares;
  const std::vector<int> labels = label_vector(batch);

  BilinearSoftmaxModel m = init_bsr(rows, cols, cfg.rank, k_count, cfg.seed);
  Matrix z(t_count, k_count, 0.0);
  double reg_run = regularizer_value(m, cfg.regularizer);
  double j_cur = multiclass_data_term(z, labels) + cfg.alpha * reg_run;
  if (!std::isfinite(j_cur)) {
    throw NumericError("train_bsr: initial objective is not finite");
  }

  TrainReport report;
  report.trace.push_back(j_cur);
  TraceWriter tracer(trace_stream);

  Matrix zp(t_count, k_count), srow(t_count, k_count), resid(t_count, k_count);
  std::vector<std::vector<Vector>> proj(k_count, std::vector<Vector>(t_count));
  std::vector<Vector> g(k_count), active(k_count);
  std::vector<double> scale(k_count), gsq_k(k_count);
  bool tolerance_met = false;

  for (int sweep = 0; sweep < cfg.outer_sweeps; ++sweep) {
    const double j_sweep_start = j_cur;
    bool any_accept = false;
    for (int l = 0; l < cfg.rank; ++l) {
      for (int side = 0; side < 2; ++side) {
        const bool a_side = side == 0;
        const int dim = a_side ? rows : cols;
        for (int k = 0; k < k_count; ++k) {
          const Vector frozen =
              column(a_side ? m.classes[k].b : m.classes[k].a, l);
          for (int t = 0; t < t_count; ++t) {
            proj[k][t] = a_side ? matvec(batch.inputs[t], frozen)
                                : vecmat(frozen, batch.inputs[t]);
          }
          scale[k] = product ? squared_norm(frozen) : 1.0;
          active[k] = column(a_side ? m.classes[k].a : m.classes[k].b, l);
        }
        for (int iter = 0; iter < cfg.inner_max_iters; ++iter) {
          softmax_residuals(z, batch.onehot, resid);
          // the block direction stacks all K per-class gradients and moves
          // them with one shared step
          double gsq = 0.0;
          for (int k = 0; k < k_count; ++k) {
            g[k].assign(dim, 0.0);
            for (int t = 0; t < t_count; ++t) {
              const double r = resid(t, k);
              const double* p = proj[k][t].data();
              for (int i = 0; i < dim; ++i) g[k][i] += r * p[i];
            }
            for (int i = 0; i < dim; ++i) {
              g[k][i] = g[k][i] * inv_t + cfg.alpha * scale[k] * active[k][i];
            }
            gsq_k[k] = squared_norm(g[k]);
            gsq += gsq_k[k];
          }
          if (!(gsq > 0.0)) break;
          double r1 = 0.0;
          double r2 = 0.0;
          for (int k = 0; k < k_count; ++k) {
            for (int t = 0; t < t_count; ++t) {
              srow(t, k) = dot(proj[k][t], g[k]);
            }
            r1 -= dot(active[k], g[k]) * scale[k];
            r2 += 0.5 * gsq_k[k] * scale[k];
          }
          auto eval = [&](double eta) {
            const double* zd = z.data().data();
            const double* sd = srow.data().data();
            double* zpd = zp.data().data();
            for (int e = 0; e < t_count * k_count; ++e) {
              zpd[e] = zd[e] - eta * sd[e];
            }
            return multiclass_data_term(zp, labels) +
                   cfg.alpha * (reg_run + (r1 * eta + r2 * (eta * eta)));
          };
          const LineSearchResult ls =
              backtracking_line_search(eval, j_cur, gsq, cfg.line_search);
          if (!ls.made_progress) break;
          for (int k = 0; k < k_count; ++k) {
            for (int i = 0; i < dim; ++i) active[k][i] -= ls.step * g[k][i];
            set_column(a_side ? m.classes[k].a : m.classes[k].b, l, active[k]);
          }
          std::swap(z, zp);
          reg_run = reg_run + (r1 * ls.step + r2 * (ls.step * ls.step));
          const double j_prev = j_cur;
          j_cur = ls.value;
          report.trace.push_back(j_cur);
          tracer.accepted(std::string(a_side ? "A" : "B") + std::to_string(l + 1),
                          ls.step, j_cur);
          any_accept = true;
          if (j_prev - j_cur < cfg.inner_tol * std::max(1.0, std::abs(j_prev))) {
            break;
          }
        }
      }
    }
    report.outer_sweeps = sweep + 1;
    if (!any_accept) {
      tolerance_met = true;
      break;
    }
    tolerance_met = (j_sweep_start - j_cur) <
                    cfg.inner_tol * std::max(1.0, std::abs(j_sweep_start));
  }
  report.converged = tolerance_met;
  report.wall_time_ms = clock.ms();
  return {std::move(m), std::move(report)};
}

std::pair<LinearSoftmaxModel, TrainReport> train_lsr(const MulticlassBatch& batch,
                                                     const TrainConfig& cfg,
                                                     std::ostream* trace_stream) {
  check_train_config(cfg, false);
  validate_batch(batch);
  warn_if_single_class(batch, "train_lsr");
  Stopwatch clock;

  const int t_count = batch.size();
  const int k_count = batch.classes();
  const int rows = batch.inputs.front().rows();
  const int cols = batch.inputs.front().cols();
  const int entries = rows * cols;
  const double inv_t = 1.0 / t_count;
  const std::vector<int> labels = label_vector(batch);

  LinearSoftmaxModel m;
  for (int k = 0; k < k_count; ++k) m.w.emplace_back(rows, cols, 0.0);
  Matrix z(t_count, k_count, 0.0);
  double reg_run = 0.0;
  double j_cur = multiclass_data_term(z, labels);
  if (!std::isfinite(j_cur)) {
    throw NumericError("train_lsr: initial objective is not finite");
  }

  TrainReport report;
  report.trace.push_back(j_cur);
  TraceWriter tracer(trace_stream);

  Matrix zp(t_count, k_count), srow(t_count, k_count), resid(t_count, k_count);
  std::vector<Matrix> g(k_count, Matrix(rows, cols));
  const long long cap =
      static_cast<long long>(cfg.outer_sweeps) * cfg.inner_max_iters;
  for (long long iter = 0; iter < cap; ++iter) {
    report.outer_sweeps = static_cast<int>(iter) + 1;
    softmax_residuals(z, batch.onehot, resid);
    double gsq = 0.0;
    double r1 = 0.0;
    for (int k = 0; k < k_count; ++k) {
      double* gd = g[k].data().data();
      const double* wd = m.w[k].data().data();
      std::fill(g[k].data().begin(), g[k].data().end(), 0.0);
      for (int t = 0; t < t_count; ++t) {
        const double r = resid(t, k);
        const double* x = batch.inputs[t].data().data();
        for (int e = 0; e < entries; ++e) gd[e] += r * x[e];
      }
      for (int e = 0; e < entries; ++e) {
        gd[e] = gd[e] * inv_t + cfg.alpha * wd[e];
        gsq += gd[e] * gd[e];
      }
      for (int t = 0; t < t_count; ++t) {
        srow(t, k) = frobenius_inner(g[k], batch.inputs[t]);
      }
      r1 -= frobenius_inner(m.w[k], g[k]);
    }
    if (!(gsq > 0.0)) {
      report.converged = true;
      break;
    }
    const double r2 = 0.5 * gsq;
    auto eval = [&](double eta) {
      const double* zd = z.data().data();
      const double* sd = srow.data().data();
      double* zpd = zp.data().data();
      for (int e = 0; e < t_count * k_count; ++e) zpd[e] = zd[e] - eta * sd[e];
      return multiclass_data_term(zp, labels) +
             cfg.alpha * (reg_run + (r1 * eta + r2 * (eta * eta)));
    };
    const LineSearchResult ls =
        backtracking_line_search(eval, j_cur, gsq, cfg.line_search);
    if (!ls.made_progress) {
      report.converged = true;
      break;
    }
    for (int k = 0; k < k_count; ++k) {
      double* wd = m.w[k].data().data();
      const double* gd = g[k].data().data();
      for (int e = 0; e < entries; ++e) wd[e] -= ls.step * gd[e];
    }
    std::swap(z, zp);
    reg_run = reg_run + (r1 * ls.step + r2 * (ls.step * ls.step));
    const double j_prev = j_cur;
    j_cur = ls.value;
    report.trace.push_back(j_cur);
    tracer.accepted("W", ls.step, j_cur);
    if (j_prev - j_cur < cfg.inner_tol * std::max(1.0, std::abs(j_prev))) {
      report.converged = true;
      break;
    }
  }
  report.wall_time_ms = clock.ms();
  return {std::move(m), std::move(report)};
}

}  // namespace bilinear

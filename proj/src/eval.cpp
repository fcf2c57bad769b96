#include "bilinear/eval.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace bilinear {

void validate_grid(const CvGrid& grid) {
  if (grid.alphas.empty()) {
    throw std::invalid_argument("CvGrid: alpha grid is empty");
  }
  for (std::size_t i = 0; i < grid.alphas.size(); ++i) {
    const double a = grid.alphas[i];
    if (!std::isfinite(a) || a < 0.0) {
      throw std::invalid_argument("CvGrid: alphas must be finite and >= 0");
    }
    if (i > 0 && a <= grid.alphas[i - 1]) {
      throw std::invalid_argument(
          "CvGrid: alphas must be strictly ascending (sorted, no duplicates)");
    }
  }
}

int predict_binary(const LinearModel& m, const Matrix& x) {
  return llr_score(m, x) >= 0.0 ? 1 : 0;
}

int predict_binary(const BilinearModel& m, const Matrix& x) {
  return blr_score(m, x) >= 0.0 ? 1 : 0;
}

namespace {

int argmax_lowest(const Vector& scores) {
  int best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best]) best = static_cast<int>(k);
  }
  return best;
}

}  // namespace

int predict_multiclass(const LinearSoftmaxModel& m, const Matrix& x) {
  return argmax_lowest(lsr_scores(m, x));
}

int predict_multiclass(const BilinearSoftmaxModel& m, const Matrix& x) {
  return argmax_lowest(bsr_scores(m, x));
}

double ClassCounts::accuracy() const {
  long long correct_sum = 0;
  long long total_sum = 0;
  for (const long long c : correct) correct_sum += c;
  for (const long long t : total) total_sum += t;
  if (total_sum == 0) throw std::invalid_argument("ClassCounts: no samples");
  return static_cast<double>(correct_sum) / static_cast<double>(total_sum);
}

long long parameter_count(const LinearModel& m) {
  return static_cast<long long>(m.w.rows()) * m.w.cols();
}

long long parameter_count(const BilinearModel& m) {
  return static_cast<long long>(m.rank()) * (m.a.rows() + m.b.rows());
}

long long parameter_count(const LinearSoftmaxModel& m) {
  long long count = 0;
  for (const Matrix& w : m.w) count += static_cast<long long>(w.rows()) * w.cols();
  return count;
}

long long parameter_count(const BilinearSoftmaxModel& m) {
  long long count = 0;
  for (const BilinearModel& cls : m.classes) count += parameter_count(cls);
  return count;
}

std::string format_alpha(double alpha) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), alpha);
  if (ec != std::errc()) throw std::invalid_argument("format_alpha: conversion failed");
  return std::string(buf, end);
}

std::string eval_csv_header() {
  return "experiment,model,L,T,alpha,seed,train_acc,val_acc,test_acc,"
         "param_count,wall_time_ms";
}

std::string eval_csv_row(const EvalReport& report) {
  char tail[160];
  std::snprintf(tail, sizeof(tail), "%.4f,%.4f,%.4f,%lld,%.3f",
                100.0 * report.train_acc, 100.0 * report.val_acc,
                100.0 * report.test_acc, report.param_count, report.wall_time_ms);
  return report.experiment + ',' + report.model + ',' + std::to_string(report.rank) +
         ',' + std::to_string(report.train_size) + ',' + format_alpha(report.alpha) +
         ',' + std::to_string(report.seed) + ',' + tail;
}

}  // namespace bilinear

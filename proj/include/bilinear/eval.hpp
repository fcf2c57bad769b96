#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bilinear/errors.hpp"
#include "bilinear/model.hpp"
#include "bilinear/objective.hpp"
#include "bilinear/optim.hpp"

namespace bilinear {

struct CvGrid {
  std::vector<double> alphas = {0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
};

// nonempty, finite, nonnegative, ascending, no duplicates
void validate_grid(const CvGrid& grid);

// 1 iff z >= 0 (the z == 0 tie goes to class 1)
int predict_binary(const LinearModel& m, const Matrix& x);
int predict_binary(const BilinearModel& m, const Matrix& x);
// argmax over class scores; ties resolve to the lowest class index
int predict_multiclass(const LinearSoftmaxModel& m, const Matrix& x);
int predict_multiclass(const BilinearSoftmaxModel& m, const Matrix& x);

struct ClassCounts {
  std::vector<long long> correct;  // indexed by true class
  std::vector<long long> total;
  double accuracy() const;  // sum(correct) / sum(total)
};

template <class Model>
ClassCounts binary_counts(const Model& m, const BinaryBatch& batch) {
  validate_batch(batch);
  ClassCounts counts{std::vector<long long>(2, 0), std::vector<long long>(2, 0)};
  for (int t = 0; t < batch.size(); ++t) {
    const int truth = batch.labels[t] == 1.0 ? 1 : 0;
    ++counts.total[truth];
    if (predict_binary(m, batch.inputs[t]) == truth) ++counts.correct[truth];
  }
  return counts;
}

template <class Model>
ClassCounts multiclass_counts(const Model& m, const MulticlassBatch& batch) {
  validate_batch(batch);
  ClassCounts counts{std::vector<long long>(batch.classes(), 0),
                     std::vector<long long>(batch.classes(), 0)};
  for (int t = 0; t < batch.size(); ++t) {
    const int truth = batch.label_of(t);
    ++counts.total[truth];
    if (predict_multiclass(m, batch.inputs[t]) == truth) ++counts.correct[truth];
  }
  return counts;
}

template <class Model>
double accuracy(const Model& m, const BinaryBatch& batch) {
  return binary_counts(m, batch).accuracy();
}

template <class Model>
double accuracy(const Model& m, const MulticlassBatch& batch) {
  return multiclass_counts(m, batch).accuracy();
}

long long parameter_count(const LinearModel& m);           // M*N
long long parameter_count(const BilinearModel& m);         // L*(M+N)
long long parameter_count(const LinearSoftmaxModel& m);    // K*M*N
long long parameter_count(const BilinearSoftmaxModel& m);  // K*L*(M+N)

// shortest round-trip decimal, matching the model file format
std::string format_alpha(double alpha);

template <class Model>
struct AlphaSelection {
  double alpha = 0.0;
  Model model;
  TrainReport report;
  double val_accuracy = 0.0;
};

// Trains one model per grid value (ascending) via train_at(alpha), scores each
// with val_accuracy_of(model), and keeps the strictly best validation
// accuracy; ties keep the smallest alpha. Trainer errors are rethrown with the
// alpha in effect prepended.
template <class TrainFn, class ScoreFn>
auto select_alpha(const CvGrid& grid, TrainFn&& train_at, ScoreFn&& val_accuracy_of)
    -> AlphaSelection<typename decltype(train_at(0.0))::first_type> {
  validate_grid(grid);
  using Model = typename decltype(train_at(0.0))::first_type;
  AlphaSelection<Model> best;
  bool first = true;
  for (const double alpha : grid.alphas) {
    std::pair<Model, TrainReport> out;
    try {
      out = train_at(alpha);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("alpha=" + format_alpha(alpha) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("alpha=" + format_alpha(alpha) + ": " + e.what());
    } catch (const NumericError& e) {
      throw NumericError("alpha=" + format_alpha(alpha) + ": " + e.what());
    }
    const double acc = val_accuracy_of(out.first);
    if (first || acc > best.val_accuracy) {
      best.alpha = alpha;
      best.model = std::move(out.first);
      best.report = std::move(out.second);
      best.val_accuracy = acc;
      first = false;
    }
  }
  return best;
}

struct EvalReport {
  std::string experiment;  // e.g. "pair-8v9" or "multiclass"
  std::string model;       // "llr", "blr", "lsr", "bsr"
  int rank = 0;            // L; 0 for the linear models
  int train_size = 0;      // T
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double train_acc = 0.0;  // fractions in [0,1]
  double val_acc = 0.0;
  double test_acc = 0.0;
  long long param_count = 0;
  double wall_time_ms = 0.0;
};

// "experiment,model,L,T,alpha,seed,train_acc,val_acc,test_acc,param_count,
// wall_time_ms"; accuracies are rendered as percentages with 4 decimals
std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& report);

}  // namespace bilinear

#pragma once

#include <vector>

#include "bilinear/model.hpp"
#include "bilinear/tensor.hpp"

namespace bilinear {

// SumSquares:      1/2 sum_l (|a_l|^2 + |b_l|^2)
// ProductSquares:  1/2 sum_l |a_l|^2 |b_l|^2
// FrobeniusOfW:    1/2 |sum_l a_l b_l^T|_F^2 -- evaluate-only: no gradient is
//                  provided and the trainers reject it.
enum class RegularizerKind { SumSquares, ProductSquares, FrobeniusOfW };

const char* regularizer_name(RegularizerKind kind);
RegularizerKind regularizer_from_name(const std::string& name);

struct ObjectiveConfig {
  double alpha = 0.0;
  RegularizerKind regularizer = RegularizerKind::SumSquares;
};

// Training set for the binary models; labels are exactly 0.0 or 1.0.
struct BinaryBatch {
  std::vector<Matrix> inputs;
  std::vector<double> labels;
  int size() const { return static_cast<int>(inputs.size()); }
};

// Training set for the softmax models; labels are stored one-hot, exactly one
// 1.0 per row.
struct MulticlassBatch {
  std::vector<Matrix> inputs;
  Matrix onehot;  // T x K
  int size() const { return static_cast<int>(inputs.size()); }
  int classes() const { return onehot.cols(); }
  int label_of(int t) const;
};

MulticlassBatch make_multiclass_batch(std::vector<Matrix> inputs,
                                      const std::vector<int>& labels,
                                      int num_classes);

void validate_batch(const BinaryBatch& batch);
void validate_batch(const MulticlassBatch& batch);

// -(1/T) sum_t [c_t log y_t + (1-c_t) log(1-y_t)]; every y must lie strictly
// inside (0,1). This is the probability-based entry point kept for tests; the
// objectives below work from scores so saturated probabilities cannot occur.
double binary_cross_entropy(const std::vector<double>& y,
                            const std::vector<double>& c);

// -(1/T) sum_t sum_k c_tk log y_tk with one-hot C; rows of y must sum to 1
// within 1e-9 and no selected probability may be 0.
double multiclass_cross_entropy(const Matrix& y, const Matrix& onehot);

// log(1 + e^z) computed without overflow.
double softplus(double z);

// Stable data terms used by both the objectives and the trainers. Summation
// is sequential over t (bit-reproducible).
// binary: (1/T) sum_t [softplus(z_t) - c_t z_t]
double binary_data_term(const Vector& z, const std::vector<double>& c);
// multiclass: (1/T) sum_t [logsumexp_k z_tk - z_t,label(t)]; z is T x K
double multiclass_data_term(const Matrix& z, const std::vector<int>& labels);

double regularizer_value(const BilinearModel& m, RegularizerKind kind);
double regularizer_value(const BilinearSoftmaxModel& m, RegularizerKind kind);

// Full objectives J = V + alpha R. The bilinear ones reject FrobeniusOfW
// (evaluate-only); the linear ones require SumSquares.
double blr_objective(const BilinearModel& m, const BinaryBatch& batch,
                     const ObjectiveConfig& cfg);
double llr_objective(const LinearModel& m, const BinaryBatch& batch,
                     const ObjectiveConfig& cfg);
double bsr_objective(const BilinearSoftmaxModel& m, const MulticlassBatch& batch,
                     const ObjectiveConfig& cfg);
double lsr_objective(const LinearSoftmaxModel& m, const MulticlassBatch& batch,
                     const ObjectiveConfig& cfg);

// Analytic gradients. Rank index l and class index k are 0-based.
Vector blr_grad_a(const BilinearModel& m, const BinaryBatch& batch,
                  const ObjectiveConfig& cfg, int l);
Vector blr_grad_b(const BilinearModel& m, const BinaryBatch& batch,
                  const ObjectiveConfig& cfg, int l);
Matrix llr_grad(const LinearModel& m, const BinaryBatch& batch,
                const ObjectiveConfig& cfg);
Vector bsr_grad_a(const BilinearSoftmaxModel& m, const MulticlassBatch& batch,
                  const ObjectiveConfig& cfg, int l, int k);
Vector bsr_grad_b(const BilinearSoftmaxModel& m, const MulticlassBatch& batch,
                  const ObjectiveConfig& cfg, int l, int k);
Matrix lsr_grad(const LinearSoftmaxModel& m, const MulticlassBatch& batch,
                const ObjectiveConfig& cfg, int k);

}  // namespace bilinear

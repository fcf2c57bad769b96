#pragma once

#include <vector>

#include "bilinear/tensor.hpp"

namespace bilinear {

// Linear classifier weights; the score is the Frobenius inner product <W, X>.
struct LinearModel {
  Matrix w;  // M x N
};

// Rank-L bilinear weights. Column l of a/b holds the pair (a_l, b_l); the
// score is sum_l a_l^T X b_l.
struct BilinearModel {
  Matrix a;  // M x L
  Matrix b;  // N x L
  int rank() const { return a.cols(); }
};

// One weight matrix per class; scores feed a softmax.
struct LinearSoftmaxModel {
  std::vector<Matrix> w;  // K matrices, each M x N
};

// One bilinear block per class; scores feed a softmax.
struct BilinearSoftmaxModel {
  std::vector<BilinearModel> classes;  // K blocks sharing M, N, L
  int rank() const { return classes.empty() ? 0 : classes.front().rank(); }
};

// 1/(1+e^-z), sign-split so large |z| cannot overflow.
double logistic(double z);

// Softmax with max-subtraction; components in (0,1), summing to 1.
Vector softmax(const Vector& z);

double llr_score(const LinearModel& m, const Matrix& x);
double blr_score(const BilinearModel& m, const Matrix& x);
Vector lsr_scores(const LinearSoftmaxModel& m, const Matrix& x);
Vector bsr_scores(const BilinearSoftmaxModel& m, const Matrix& x);

// W = sum_l a_l b_l^T.
LinearModel reconstruct_w(const BilinearModel& m);

// SVD-based split W = U S V^T into a_l = sqrt(s_l) u_l, b_l = sqrt(s_l) v_l,
// keeping the leading L terms; 1 <= L <= min(M, N).
BilinearModel decompose_w(const LinearModel& m, int l_rank);

// Column helpers shared by the scoring and training code.
Vector column(const Matrix& m, int j);
void set_column(Matrix& m, int j, const Vector& v);

}  // namespace bilinear

#include "bilinear/objective.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bilinear/errors.hpp"

namespace bilinear {

namespace {

void check_config(const ObjectiveConfig& cfg) {
  if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha)) {
    throw std::invalid_argument("ObjectiveConfig: alpha must be finite and >= 0");
  }
}

void require_trainable_regularizer(const ObjectiveConfig& cfg, const char* who) {
  if (cfg.regularizer == RegularizerKind::FrobeniusOfW) {
    throw std::invalid_argument(std::string(who) +
                                ": FrobeniusOfW is evaluate-only and cannot be "
                                "used in an objective or gradient");
  }
}

void require_sum_squares(const ObjectiveConfig& cfg, const char* who) {
  if (cfg.regularizer != RegularizerKind::SumSquares) {
    throw std::invalid_argument(std::string(who) +
                                ": linear models support only SumSquares");
  }
}

void check_rank_index(int l, int rank, const char* who) {
  if (l < 0 || l >= rank) {
    throw std::invalid_argument(std::string(who) + ": rank index " +
                                std::to_string(l) + " out of range [0, " +
                                std::to_string(rank) + ")");
  }
}

void check_class_index(int k, int classes, const char* who) {
  if (k < 0 || k >= classes) {
    throw std::invalid_argument(std::string(who) + ": class index " +
                                std::to_string(k) + " out of range [0, " +
                                std::to_string(classes) + ")");
  }
}

// Logistic residuals y_t - c_t for the current scores.
std::vector<double> binary_residuals(const BilinearModel* bm, const LinearModel* lm,
                                     const BinaryBatch& batch) {
  std::vector<double> r(batch.size());
  for (int t = 0; t < batch.size(); ++t) {
    const double z = bm ? blr_score(*bm, batch.inputs[t])
                        : llr_score(*lm, batch.inputs[t]);
    r[t] = logistic(z) - batch.labels[t];
  }
  return r;
}

// Softmax residuals y_tk - c_tk, one row per sample.
Matrix multiclass_residuals(const BilinearSoftmaxModel* bm,
                            const LinearSoftmaxModel* lm,
                            const MulticlassBatch& batch) {
  const int t_count = batch.size();
  const int k_count = batch.classes();
  Matrix r(t_count, k_count);
  for (int t = 0; t < t_count; ++t) {
    const Vector z = bm ? bsr_scores(*bm, batch.inputs[t])
                        : lsr_scores(*lm, batch.inputs[t]);
    const Vector y = softmax(z);
    for (int k = 0; k < k_count; ++k) r(t, k) = y[k] - batch.onehot(t, k);
  }
  return r;
}

}  // namespace

const char* regularizer_name(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::SumSquares: return "sum";
    case RegularizerKind::ProductSquares: return "prod";
    default: return "frobenius";
  }
}

RegularizerKind regularizer_from_name(const std::string& name) {
  if (name == "sum") return RegularizerKind::SumSquares;
  if (name == "prod") return RegularizerKind::ProductSquares;
  if (name == "frobenius") return RegularizerKind::FrobeniusOfW;
  throw std::invalid_argument("unknown regularizer '" + name +
                              "' (expected sum, prod, or frobenius)");
}

int MulticlassBatch::label_of(int t) const {
  for (int k = 0; k < onehot.cols(); ++k) {
    if (onehot(t, k) == 1.0) return k;
  }
  throw std::logic_error("MulticlassBatch: row without a hot entry");
}

MulticlassBatch make_multiclass_batch(std::vector<Matrix> inputs,
                                      const std::vector<int>& labels,
                                      int num_classes) {
  if (inputs.size() != labels.size()) {
    throw std::invalid_argument("make_multiclass_batch: " +
                                std::to_string(inputs.size()) + " inputs vs " +
                                std::to_string(labels.size()) + " labels");
  }
  if (inputs.empty()) throw std::invalid_argument("make_multiclass_batch: empty");
  if (num_classes < 2) {
    throw std::invalid_argument("make_multiclass_batch: need at least 2 classes");
  }
  MulticlassBatch b;
  b.onehot = Matrix(static_cast<int>(labels.size()), num_classes, 0.0);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] < 0 || labels[t] >= num_classes) {
      throw std::invalid_argument("make_multiclass_batch: label " +
                                  std::to_string(labels[t]) + " out of range [0, " +
                                  std::to_string(num_classes) + ")");
    }
    b.onehot(static_cast<int>(t), labels[t]) = 1.0;
  }
  b.inputs = std::move(inputs);
  validate_batch(b);
  return b;
}

void validate_batch(const BinaryBatch& batch) {
  if (batch.inputs.empty()) throw std::invalid_argument("BinaryBatch: empty batch");
  if (batch.inputs.size() != batch.labels.size()) {
    throw std::invalid_argument("BinaryBatch: " + std::to_string(batch.inputs.size()) +
                                " inputs vs " + std::to_string(batch.labels.size()) +
                                " labels");
  }
  const int rows = batch.inputs.front().rows();
  const int cols = batch.inputs.front().cols();
  for (const Matrix& x : batch.inputs) {
    if (x.rows() != rows || x.cols() != cols) {
      throw std::invalid_argument("BinaryBatch: inputs disagree on shape");
    }
  }
  for (const double c : batch.labels) {
    if (c != 0.0 && c != 1.0) {
      throw std::invalid_argument("BinaryBatch: labels must be exactly 0 or 1");
    }
  }
}

void validate_batch(const MulticlassBatch& batch) {
  if (batch.inputs.empty()) throw std::invalid_argument("MulticlassBatch: empty batch");
  if (batch.onehot.rows() != batch.size()) {
    throw std::invalid_argument("MulticlassBatch: one-hot rows " +
                                std::to_string(batch.onehot.rows()) + " vs " +
                                std::to_string(batch.size()) + " inputs");
  }
  if (batch.classes() < 2) {
    throw std::invalid_argument("MulticlassBatch: need at least 2 classes");
  }
  const int rows = batch.inputs.front().rows();
  const int cols = batch.inputs.front().cols();
  for (const Matrix& x : batch.inputs) {
    if (x.rows() != rows || x.cols() != cols) {
      throw std::invalid_argument("MulticlassBatch: inputs disagree on shape");
    }
  }
  for (int t = 0; t < batch.size(); ++t) {
    int hot = 0;
    for (int k = 0; k < batch.classes(); ++k) {
      const double v = batch.onehot(t, k);
      if (v == 1.0) {
        ++hot;
      } else if (v != 0.0) {
        throw std::invalid_argument("MulticlassBatch: one-hot entries must be 0 or 1");
      }
    }
    if (hot != 1) {
      throw std::invalid_argument("MulticlassBatch: row " + std::to_string(t) +
                                  " has " + std::to_string(hot) + " hot entries");
    }
  }
}

double binary_cross_entropy(const std::vector<double>& y,
                            const std::vector<double>& c) {
  if (y.empty() || y.size() != c.size()) {
    throw std::invalid_argument("binary_cross_entropy: length mismatch or empty");
  }
  double acc = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (!(y[t] > 0.0 && y[t] < 1.0)) {
      throw std::invalid_argument(
          "binary_cross_entropy: probability must lie strictly in (0,1)");
    }
    if (c[t] != 0.0 && c[t] != 1.0) {
      throw std::invalid_argument("binary_cross_entropy: labels must be 0 or 1");
    }
    acc += c[t] * std::log(y[t]) + (1.0 - c[t]) * std::log(1.0 - y[t]);
  }
  return -acc / static_cast<double>(y.size());
}

double multiclass_cross_entropy(const Matrix& y, const Matrix& onehot) {
  if (y.rows() == 0 || y.rows() != onehot.rows() || y.cols() != onehot.cols()) {
    throw std::invalid_argument("multiclass_cross_entropy: shape mismatch or empty");
  }
  double acc = 0.0;
  for (int t = 0; t < y.rows(); ++t) {
    double row_sum = 0.0;
    for (int k = 0; k < y.cols(); ++k) row_sum += y(t, k);
    if (std::abs(row_sum - 1.0) > 1e-9) {
      throw std::invalid_argument("multiclass_cross_entropy: row " +
                                  std::to_string(t) + " sums to " +
                                  std::to_string(row_sum));
    }
    for (int k = 0; k < y.cols(); ++k) {
      if (onehot(t, k) == 0.0) continue;
      if (onehot(t, k) != 1.0) {
        throw std::invalid_argument("multiclass_cross_entropy: labels must be one-hot");
      }
      if (y(t, k) == 0.0) {
        throw std::invalid_argument(
            "multiclass_cross_entropy: selected probability is 0");
      }
      acc += std::log(y(t, k));
    }
  }
  return -acc / static_cast<double>(y.rows());
}

double softplus(double z) {
  // max(z,0) + log1p(e^{-|z|}) never overflows and keeps full precision
  return (z > 0.0 ? z : 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double binary_data_term(const Vector& z, const std::vector<double>& c) {
  if (z.empty() || z.size() != c.size()) {
    throw std::invalid_argument("binary_data_term: length mismatch or empty");
  }
  double acc = 0.0;
  for (std::size_t t = 0; t < z.size(); ++t) {
    acc += softplus(z[t]) - c[t] * z[t];
  }
  return acc / static_cast<double>(z.size());
}

double multiclass_data_term(const Matrix& z, const std::vector<int>& labels) {
  if (z.rows() == 0 || z.rows() != static_cast<int>(labels.size())) {
    throw std::invalid_argument("multiclass_data_term: length mismatch or empty");
  }
  double acc = 0.0;
  for (int t = 0; t < z.rows(); ++t) {
    const double* row = z.row(t);
    double zmax = row[0];
    for (int k = 1; k < z.cols(); ++k) zmax = std::max(zmax, row[k]);
    double sum = 0.0;
    for (int k = 0; k < z.cols(); ++k) sum += std::exp(row[k] - zmax);
    acc += zmax + std::log(sum) - row[labels[t]];
  }
  return acc / static_cast<double>(z.rows());
}

double regularizer_value(const BilinearModel& m, RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::SumSquares: {
      double acc = 0.0;
      for (const double v : m.a.data()) acc += v * v;
      for (const double v : m.b.data()) acc += v * v;
      return 0.5 * acc;
    }
    case RegularizerKind::ProductSquares: {
      double acc = 0.0;
      for (int l = 0; l < m.rank(); ++l) {
        double na = 0.0;
        double nb = 0.0;
        for (int i = 0; i < m.a.rows(); ++i) na += m.a(i, l) * m.a(i, l);
        for (int j = 0; j < m.b.rows(); ++j) nb += m.b(j, l) * m.b(j, l);
        acc += na * nb;
      }
      return 0.5 * acc;
    }
    default: {
      const LinearModel w = reconstruct_w(m);
      return 0.5 * frobenius_inner(w.w, w.w);
    }
  }
}

double regularizer_value(const BilinearSoftmaxModel& m, RegularizerKind kind) {
  double acc = 0.0;
  for (const BilinearModel& c : m.classes) acc += regularizer_value(c, kind);
  return acc;
}

double blr_objective(const BilinearModel& m, const BinaryBatch& batch,
                     const ObjectiveConfig& cfg) {
  check_config(cfg);
  require_trainable_regularizer(cfg, "blr_objective");
  validate_batch(batch);
  Vector z(batch.size());
  for (int t = 0; t < batch.size(); ++t) z[t] = blr_score(m, batch.inputs[t]);
  return binary_data_term(z, batch.labels) + cfg.alpha * regularizer_value(m, cfg.regularizer);
}

double llr_objective(const LinearModel& m, const BinaryBatch& batch,
                     const ObjectiveConfig& cfg) {
  check_config(cfg);
  require_sum_squares(cfg, "llr_objective");
  validate_batch(batch);
  Vector z(batch.size());
  for (int t = 0; t < batch.size(); ++t) z[t] = llr_score(m, batch.inputs[t]);
  return binary_data_term(z, batch.labels) +
         cfg.alpha * 0.5 * frobenius_inner(m.w, m.w);
}

double bsr_objective(const BilinearSoftmaxModel& m, const MulticlassBatch& batch,
                     const ObjectiveConfig& cfg) {
  check_config(cfg);
  require_trainable_regularizer(cfg, "bsr_objective");
  validate_batch(batch);
  Matrix z(batch.size(), batch.classes());
  std::vector<int> labels(batch.size());
  for (int t = 0; t < batch.size(); ++t) {
    const Vector zt = bsr_scores(m, batch.inputs[t]);
    for (int k = 0; k < batch.classes(); ++k) z(t, k) = zt[k];
    labels[t] = batch.label_of(t);
  }
  return multiclass_data_term(z, labels) +
         cfg.alpha * regularizer_value(m, cfg.regularizer);
}

double lsr_objective(const LinearSoftmaxModel& m, const MulticlassBatch& batch,
                     const ObjectiveConfig& cfg) {
  check_config(cfg);
  require_sum_squares(cfg, "lsr_objective");
  validate_batch(batch);
  Matrix z(batch.size(), batch.classes());
  std::vector<int> labels(batch.size());
  for (int t = 0; t < batch.size(); ++t) {
    const Vector zt = lsr_scores(m, batch.inputs[t]);
    for (int k = 0; k < batch.classes(); ++k) z(t, k) = zt[k];
    labels[t] = batch.label_of(t);
  }
  double reg = 0.0;
  for (const Matrix& w : m.w) reg += 0.5 * frobenius_inner(w, w);
  return multiclass_data_term(z, labels) + cfg.alpha * reg;
}

Vector blr_grad_a(const BilinearModel& m, const BinaryBatch& batch,
                  const ObjectiveConfig& cfg, int l) {
  check_config(cfg);
  require_trainable_regularizer(cfg, "blr_grad_a");
  validate_batch(batch);
  check_rank_index(l, m.rank(), "blr_grad_a");
  const std::vector<double> r = binary_residuals(&m, nullptr, batch);
  const Vector b_l = column(m.b, l);
  Vector g(m.a.rows(), 0.0);
  for (int t = 0; t < batch.size(); ++t) {
    const Vector xb = matvec(batch.inputs[t], b_l);
    for (int i = 0; i < m.a.rows(); ++i) g[i] += r[t] * xb[i];
  }
  const double inv_t = 1.0 / batch.size();
  for (double& v : g) v *= inv_t;
  const double scale =
      cfg.regularizer == RegularizerKind::SumSquares ? 1.0 : squared_norm(b_l);
  for (int i = 0; i < m.a.rows(); ++i) g[i] += cfg.alpha * scale * m.a(i, l);
  return g;
}

Vector blr_grad_b(const BilinearModel& m, const BinaryBatch& batch,
                  const ObjectiveConfig& cfg, int l) {
  check_config(cfg);
  require_trainable_regularizer(cfg, "blr_grad_b");
  validate_batch(batch);
  check_rank_index(l, m.rank(), "blr_grad_b");
  const std::vector<double> r = binary_residuals(&m, nullptr, batch);
  const Vector a_l = column(m.a, l);
  Vector g(m.b.rows(), 0.0);
  for (int t = 0; t < batch.size(); ++t) {
    const Vector xta = vecmat(a_l, batch.inputs[t]);  // X_t^T a_l
    for (int j = 0; j < m.b.rows(); ++j) g[j] += r[t] * xta[j];
  }
  const double inv_t = 1.0 / batch.size();
  for (double& v : g) v *= inv_t;
  const double scale =
      cfg.regularizer == RegularizerKind::SumSquares ? 1.0 : squared_norm(a_l);
  for (int j = 0; j < m.b.rows(); ++j) g[j] += cfg.alpha * scale * m.b(j, l);
  return g;
}

Matrix llr_grad(const LinearModel& m, const BinaryBatch& batch,
                const ObjectiveConfig& cfg) {
  check_config(cfg);
  require_sum_squares(cfg, "llr_grad");
  validate_batch(batch);
  const std::vector<double> r = binary_residuals(nullptr, &m, batch);
  Matrix g(m.w.rows(), m.w.cols(), 0.0);
  for (int t = 0; t < batch.size(); ++t) {
    const Matrix& x = batch.inputs[t];
    for (int i = 0; i < g.rows(); ++i) {
      const double* xr = x.row(i);
      double* gr = g.row(i);
      for (int j = 0; j < g.cols(); ++j) gr[j] += r[t] * xr[j];
    }
  }
  const double inv_t = 1.0 / batch.size();
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) {
      g(i, j) = g(i, j) * inv_t + cfg.alpha * m.w(i, j);
    }
  }
  return g;
}

Vector bsr_grad_a(const BilinearSoftmaxModel& m, const MulticlassBatch& batch,
                  const ObjectiveConfig& cfg, int l, int k) {
  check_config(cfg);
  require_trainable_regularizer(cfg, "bsr_grad_a");
  validate_batch(batch);
  check_class_index(k, static_cast<int>(m.classes.size()), "bsr_grad_a");
  const BilinearModel& cls = m.classes[k];
  check_rank_index(l, cls.rank(), "bsr_grad_a");
  const Matrix r = multiclass_residuals(&m, nullptr, batch);
  const Vector b_l = column(cls.b, l);
  Vector g(cls.a.rows(), 0.0);
  for (int t = 0; t < batch.size(); ++t) {
    const Vector xb = matvec(batch.inputs[t], b_l);
    for (int i = 0; i < cls.a.rows(); ++i) g[i] += r(t, k) * xb[i];
  }
  const double inv_t = 1.0 / batch.size();
  for (double& v : g) v *= inv_t;
  const double scale =
      cfg.regularizer == RegularizerKind::SumSquares ? 1.0 : squared_norm(b_l);
  for (int i = 0; i < cls.a.rows(); ++i) g[i] += cfg.alpha * scale * cls.a(i, l);
  return g;
}

Vector bsr_grad_b(const BilinearSoftmaxModel& m, const MulticlassBatch& batch,
                  const ObjectiveConfig& cfg, int l, int k) {
  check_config(cfg);
  require_trainable_regularizer(cfg, "bsr_grad_b");
  validate_batch(batch);
  check_class_index(k, static_cast<int>(m.classes.size()), "bsr_grad_b");
  const BilinearModel& cls = m.classes[k];
  check_rank_index(l, cls.rank(), "bsr_grad_b");
  const Matrix r = multiclass_residuals(&m, nullptr, batch);
  const Vector a_l = column(cls.a, l);
  Vector g(cls.b.rows(), 0.0);
  for (int t = 0; t < batch.size(); ++t) {
    const Vector xta = vecmat(a_l, batch.inputs[t]);
    for (int j = 0; j < cls.b.rows(); ++j) g[j] += r(t, k) * xta[j];
  }
  const double inv_t = 1.0 / batch.size();
  for (double& v : g) v *= inv_t;
  const double scale =
      cfg.regularizer == RegularizerKind::SumSquares ? 1.0 : squared_norm(a_l);
  for (int j = 0; j < cls.b.rows(); ++j) g[j] += cfg.alpha * scale * cls.b(j, l);
  return g;
}

Matrix lsr_grad(const LinearSoftmaxModel& m, const MulticlassBatch& batch,
                const ObjectiveConfig& cfg, int k) {
  check_config(cfg);
  require_sum_squares(cfg, "lsr_grad");
  validate_batch(batch);
  check_class_index(k, static_cast<int>(m.w.size()), "lsr_grad");
  const Matrix r = multiclass_residuals(nullptr, &m, batch);
  Matrix g(m.w[k].rows(), m.w[k].cols(), 0.0);
  for (int t = 0; t < batch.size(); ++t) {
    const Matrix& x = batch.inputs[t];
    for (int i = 0; i < g.rows(); ++i) {
      const double* xr = x.row(i);
      double* gr = g.row(i);
      for (int j = 0; j < g.cols(); ++j) gr[j] += r(t, k) * xr[j];
    }
  }
  const double inv_t = 1.0 / batch.size();
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) {
      g(i, j) = g(i, j) * inv_t + cfg.alpha * m.w[k](i, j);
    }
  }
  return g;
}

}  // namespace bilinear

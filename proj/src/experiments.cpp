#include "bilinear/experiments.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "bilinear/objective.hpp"
#include "bilinear/rng.hpp"

namespace bilinear {

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform_pm1();
  return m;
}

double frobenius_norm(const Matrix& m) { return std::sqrt(squared_norm(m.data())); }

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

template <class T, class Fmt>
std::string join(const std::vector<T>& values, Fmt&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += fmt(values[i]);
  }
  return out;
}

struct FigureColumn {
  std::string label;
  std::string model;
  int rank;
};

std::vector<FigureColumn> columns_for(const ExperimentKind& kind) {
  if (kind.multiclass) {
    return {{"lsr", "lsr", 0}, {"bsr_L1", "bsr", 1}, {"bsr_L2", "bsr", 2},
            {"bsr_L3", "bsr", 3}};
  }
  return {{"llr", "llr", 0}, {"blr_L1", "blr", 1}, {"blr_L2", "blr", 2},
          {"blr_L3", "blr", 3}, {"blr_L4", "blr", 4}};
}

template <class Split, class Model>
std::pair<EvalReport, AnyModel> finish_run(EvalReport row, const Split& split,
                                           AlphaSelection<Model> sel) {
  row.alpha = sel.alpha;
  row.train_acc = accuracy(sel.model, split.train);
  row.val_acc = sel.val_accuracy;
  row.test_acc = accuracy(sel.model, split.test);
  row.param_count = parameter_count(sel.model);
  row.wall_time_ms = sel.report.wall_time_ms;
  return {std::move(row), AnyModel{std::move(sel.model)}};
}

// Central finite differences of f, step h per coordinate.
Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                   double h = 1e-6) {
  Vector g(x.size());
  Vector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double grad_rel_error(const Vector& analytic, const Vector& fd) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    num += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
    den += fd[i] * fd[i];
  }
  return std::sqrt(num) / (std::sqrt(den) + 1e-300);
}

Vector matrix_grad_flat(const Matrix& g) { return g.data(); }

}  // namespace

ExperimentKind parse_experiment(const std::string& name) {
  if (name == "multiclass") return {true, 0, 0};
  const std::string bad =
      "experiment must be \"multiclass\" or \"pair-PvQ\" with distinct digits "
      "P and Q (e.g. pair-8v9), got \"" + name + "\"";
  if (name.size() != 8 || name.rfind("pair-", 0) != 0 || name[6] != 'v' ||
      !std::isdigit(static_cast<unsigned char>(name[5])) ||
      !std::isdigit(static_cast<unsigned char>(name[7]))) {
    throw std::invalid_argument(bad);
  }
  ExperimentKind kind{false, name[5] - '0', name[7] - '0'};
  if (kind.digit_p == kind.digit_q) throw std::invalid_argument(bad);
  return kind;
}

void check_model_experiment(const std::string& model, const ExperimentKind& kind) {
  const bool binary_model = model == "llr" || model == "blr";
  const bool softmax_model = model == "lsr" || model == "bsr";
  if (!binary_model && !softmax_model) {
    throw std::invalid_argument("model must be one of llr, blr, lsr, bsr; got \"" +
                                model + "\"");
  }
  if (kind.multiclass && !softmax_model) {
    throw std::invalid_argument("model " + model +
                                " is binary; the multiclass experiment needs lsr or bsr");
  }
  if (!kind.multiclass && !binary_model) {
    throw std::invalid_argument("model " + model +
                                " is multiclass; pair experiments need llr or blr");
  }
}

std::pair<EvalReport, AnyModel> run_single(const MnistData& data, const RunSpec& spec) {
  const ExperimentKind kind = parse_experiment(spec.experiment);
  check_model_experiment(spec.model, kind);
  CvGrid grid = spec.grid;
  if (spec.fixed_alpha) grid.alphas = {*spec.fixed_alpha};
  validate_grid(grid);

  const bool bilinear_model = spec.model == "blr" || spec.model == "bsr";
  TrainConfig cfg = spec.train;
  cfg.rank = bilinear_model ? spec.rank : 1;
  cfg.seed = spec.seed;
  cfg.regularizer =
      bilinear_model ? spec.regularizer : RegularizerKind::SumSquares;

  EvalReport row;
  row.experiment = spec.experiment;
  row.model = spec.model;
  row.rank = bilinear_model ? spec.rank : 0;
  row.train_size = spec.train_size;
  row.seed = spec.seed;

  const SplitSpec sizes{spec.train_size, spec.val_size, spec.test_size, spec.seed};
  if (!kind.multiclass) {
    const BinarySplit split =
        make_binary_split(data.train, data.test, kind.digit_p, kind.digit_q, sizes);
    if (spec.model == "llr") {
      auto sel = select_alpha(
          grid,
          [&](double a) {
            TrainConfig c = cfg;
            c.alpha = a;
            return train_llr(split.train, c, spec.trace);
          },
          [&](const LinearModel& m) { return accuracy(m, split.val); });
      return finish_run(std::move(row), split, std::move(sel));
    }
    auto sel = select_alpha(
        grid,
        [&](double a) {
          TrainConfig c = cfg;
          c.alpha = a;
          return train_blr(split.train, c, spec.trace);
        },
        [&](const BilinearModel& m) { return accuracy(m, split.val); });
    return finish_run(std::move(row), split, std::move(sel));
  }

  const MulticlassSplit split = make_multiclass_split(data.train, data.test, sizes);
  if (spec.model == "lsr") {
    auto sel = select_alpha(
        grid,
        [&](double a) {
          TrainConfig c = cfg;
          c.alpha = a;
          return train_lsr(split.train, c, spec.trace);
        },
        [&](const LinearSoftmaxModel& m) { return accuracy(m, split.val); });
    return finish_run(std::move(row), split, std::move(sel));
  }
  auto sel = select_alpha(
      grid,
      [&](double a) {
        TrainConfig c = cfg;
        c.alpha = a;
        return train_bsr(split.train, c, spec.trace);
      },
      [&](const BilinearSoftmaxModel& m) { return accuracy(m, split.val); });
  return finish_run(std::move(row), split, std::move(sel));
}

std::vector<int> figure_train_sizes(const ExperimentKind& kind, bool full_scale) {
  std::vector<int> sizes = kind.multiclass
                               ? std::vector<int>{160, 640, 2560, 5120}
                               : std::vector<int>{32, 128, 512, 1024, 4096, 8192};
  if (!full_scale) {
    const int cap = kind.multiclass ? 640 : 1024;
    std::vector<int> kept;
    for (const int t : sizes) {
      if (t <= cap) kept.push_back(t);
    }
    sizes = kept;
  }
  return sizes;
}

std::vector<std::string> figure_columns(const ExperimentKind& kind) {
  std::vector<std::string> labels;
  for (const FigureColumn& c : columns_for(kind)) labels.push_back(c.label);
  return labels;
}

std::string run_figure(const MnistData& data, const FigureSpec& spec) {
  const ExperimentKind kind = parse_experiment(spec.experiment);
  if (spec.seeds.empty()) {
    throw std::invalid_argument("figure: at least one seed is required");
  }
  validate_grid(spec.grid);
  const std::vector<int> ts = spec.train_sizes.empty()
                                  ? figure_train_sizes(kind, spec.full_scale)
                                  : spec.train_sizes;
  for (const int t : ts) {
    if (t < 1) throw std::invalid_argument("figure: train sizes must be >= 1");
  }
  const std::vector<FigureColumn> cols = columns_for(kind);
  const int val_size = spec.val_size > 0 ? spec.val_size : (kind.multiclass ? 10000 : 2000);
  const int test_size =
      spec.test_size > 0 ? spec.test_size : (kind.multiclass ? 10000 : 2000);
  const int workers = std::max(1, spec.workers);

  struct Cell {
    std::uint64_t seed;
    int t;
    const FigureColumn* col;
  };
  std::vector<Cell> cells;
  for (const std::uint64_t seed : spec.seeds) {
    for (const int t : ts) {
      for (const FigureColumn& c : cols) cells.push_back({seed, t, &c});
    }
  }

  // Cells run on a small pool when asked to, but results land in a
  // preallocated slot per cell, so assembly order (and output bytes) do not
  // depend on scheduling.
  std::vector<double> values(cells.size(), std::nan(""));
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      RunSpec rs;
      rs.experiment = spec.experiment;
      rs.model = cell.col->model;
      rs.rank = cell.col->rank;
      rs.train_size = cell.t;
      rs.val_size = val_size;
      rs.test_size = test_size;
      rs.seed = cell.seed;
      rs.grid = spec.grid;
      rs.regularizer = spec.regularizer;
      rs.train = spec.train;
      try {
        values[i] = run_single(data, rs).first.test_acc * 100.0;
      } catch (const std::exception& e) {
        const std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "figure cell failed (seed=" << cell.seed << " T=" << cell.t
                  << " " << cell.col->label << "): " << e.what() << "\n";
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }

  const auto cell_value = [&](std::size_t si, std::size_t ti, std::size_t ci) {
    return values[(si * ts.size() + ti) * cols.size() + ci];
  };
  const auto format_cell = [](double v) {
    return std::isnan(v) ? std::string("nan") : format_fixed(v, 2);
  };

  std::ostringstream out;
  out << "# figure " << spec.experiment << "\n";
  out << "# columns: "
      << join(cols, [](const FigureColumn& c) { return c.label; }) << "\n";
  out << "# train sizes: " << join(ts, [](int t) { return std::to_string(t); })
      << "\n";
  out << "# seeds: "
      << join(spec.seeds, [](std::uint64_t s) { return std::to_string(s); }) << "\n";
  out << "# alpha grid: "
      << join(spec.grid.alphas, [](double a) { return format_alpha(a); }) << "\n";
  out << "# val size: " << val_size << "  test size: " << test_size << "\n";
  out << "# regularizer (bilinear models): " << regularizer_name(spec.regularizer)
      << "\n";
  out << "# outer sweeps: " << spec.train.outer_sweeps
      << "  inner tol: " << format_alpha(spec.train.inner_tol)
      << "  inner max iters: " << spec.train.inner_max_iters << "\n";
  out << "# cells: test accuracy (percent) at the alpha selected on validation\n";
  out << "seed,T," << join(cols, [](const FigureColumn& c) { return c.label; })
      << "\n";
  for (std::size_t si = 0; si < spec.seeds.size(); ++si) {
    for (std::size_t ti = 0; ti < ts.size(); ++ti) {
      out << spec.seeds[si] << "," << ts[ti];
      for (std::size_t ci = 0; ci < cols.size(); ++ci) {
        out << "," << format_cell(cell_value(si, ti, ci));
      }
      out << "\n";
    }
  }
  if (spec.seeds.size() > 1) {
    for (std::size_t ti = 0; ti < ts.size(); ++ti) {
      out << "mean," << ts[ti];
      for (std::size_t ci = 0; ci < cols.size(); ++ci) {
        double sum = 0.0;
        for (std::size_t si = 0; si < spec.seeds.size(); ++si) {
          sum += cell_value(si, ti, ci);
        }
        out << "," << format_cell(sum / static_cast<double>(spec.seeds.size()));
      }
      out << "\n";
    }
  }
  return out.str();
}

GradCheckReport run_gradcheck(const GradCheckSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1 || spec.rank < 1 || spec.batch < 1 ||
      spec.classes < 2) {
    throw std::invalid_argument(
        "gradcheck: rows, cols, rank, batch must be >= 1 and classes >= 2");
  }
  if (static_cast<long long>(spec.rows) * spec.cols * spec.batch > 10000) {
    throw std::invalid_argument(
        "gradcheck: rows*cols*batch must stay <= 10000 (finite differences "
        "are quadratic in the instance size)");
  }
  if (!std::isfinite(spec.corrupt)) {
    throw std::invalid_argument("gradcheck: corrupt offset must be finite");
  }

  Rng rng(spec.seed);
  BinaryBatch binary;
  for (int t = 0; t < spec.batch; ++t) {
    binary.inputs.push_back(random_matrix(spec.rows, spec.cols, rng));
    binary.labels.push_back(static_cast<double>(rng.below(2)));
  }
  std::vector<Matrix> minputs;
  std::vector<int> mlabels;
  for (int t = 0; t < spec.batch; ++t) {
    minputs.push_back(random_matrix(spec.rows, spec.cols, rng));
    mlabels.push_back(static_cast<int>(rng.below(spec.classes)));
  }
  const MulticlassBatch multi =
      make_multiclass_batch(std::move(minputs), mlabels, spec.classes);

  const LinearModel lin{random_matrix(spec.rows, spec.cols, rng)};
  const BilinearModel bil{random_matrix(spec.rows, spec.rank, rng),
                          random_matrix(spec.cols, spec.rank, rng)};
  LinearSoftmaxModel lsm;
  for (int k = 0; k < spec.classes; ++k) {
    lsm.w.push_back(random_matrix(spec.rows, spec.cols, rng));
  }
  BilinearSoftmaxModel bsm;
  for (int k = 0; k < spec.classes; ++k) {
    bsm.classes.push_back(BilinearModel{random_matrix(spec.rows, spec.rank, rng),
                                        random_matrix(spec.cols, spec.rank, rng)});
  }

  GradCheckReport report;
  const auto record = [&](const std::string& name, Vector analytic, const Vector& fd) {
    if (spec.corrupt != 0.0 && !analytic.empty()) analytic[0] += spec.corrupt;
    const double err = grad_rel_error(analytic, fd);
    report.entries.emplace_back(name, err);
    report.worst = std::max(report.worst, err);
  };
  const double alphas[] = {0.0, 0.1};

  for (const double alpha : alphas) {
    const ObjectiveConfig cfg{alpha, RegularizerKind::SumSquares};
    const auto f = [&](const Vector& flat) {
      LinearModel probe = lin;
      probe.w.data() = flat;
      return llr_objective(probe, binary, cfg);
    };
    record("llr dJ/dW (alpha=" + format_alpha(alpha) + ")",
           matrix_grad_flat(llr_grad(lin, binary, cfg)),
           fd_gradient(f, lin.w.data()));
  }

  for (const RegularizerKind reg :
       {RegularizerKind::SumSquares, RegularizerKind::ProductSquares}) {
    for (const double alpha : alphas) {
      const ObjectiveConfig cfg{alpha, reg};
      const std::string tag = std::string(" (") + regularizer_name(reg) +
                              ", alpha=" + format_alpha(alpha) + ")";
      double worst_a = 0.0;
      double worst_b = 0.0;
      for (int l = 0; l < spec.rank; ++l) {
        const auto fa = [&](const Vector& v) {
          BilinearModel probe = bil;
          set_column(probe.a, l, v);
          return blr_objective(probe, binary, cfg);
        };
        Vector ga = blr_grad_a(bil, binary, cfg, l);
        if (spec.corrupt != 0.0) ga[0] += spec.corrupt;
        worst_a = std::max(worst_a, grad_rel_error(ga, fd_gradient(fa, column(bil.a, l))));
        const auto fb = [&](const Vector& v) {
          BilinearModel probe = bil;
          set_column(probe.b, l, v);
          return blr_objective(probe, binary, cfg);
        };
        Vector gb = blr_grad_b(bil, binary, cfg, l);
        if (spec.corrupt != 0.0) gb[0] += spec.corrupt;
        worst_b = std::max(worst_b, grad_rel_error(gb, fd_gradient(fb, column(bil.b, l))));
      }
      report.entries.emplace_back("blr dJ/da" + tag, worst_a);
      report.entries.emplace_back("blr dJ/db" + tag, worst_b);
      report.worst = std::max({report.worst, worst_a, worst_b});

      double worst_ka = 0.0;
      double worst_kb = 0.0;
      for (int k = 0; k < spec.classes; ++k) {
        for (int l = 0; l < spec.rank; ++l) {
          const auto fa = [&](const Vector& v) {
            BilinearSoftmaxModel probe = bsm;
            set_column(probe.classes[k].a, l, v);
            return bsr_objective(probe, multi, cfg);
          };
          Vector ga = bsr_grad_a(bsm, multi, cfg, l, k);
          if (spec.corrupt != 0.0) ga[0] += spec.corrupt;
          worst_ka = std::max(
              worst_ka, grad_rel_error(ga, fd_gradient(fa, column(bsm.classes[k].a, l))));
          const auto fb = [&](const Vector& v) {
            BilinearSoftmaxModel probe = bsm;
            set_column(probe.classes[k].b, l, v);
            return bsr_objective(probe, multi, cfg);
          };
          Vector gb = bsr_grad_b(bsm, multi, cfg, l, k);
          if (spec.corrupt != 0.0) gb[0] += spec.corrupt;
          worst_kb = std::max(
              worst_kb, grad_rel_error(gb, fd_gradient(fb, column(bsm.classes[k].b, l))));
        }
      }
      report.entries.emplace_back("bsr dJ/dA" + tag, worst_ka);
      report.entries.emplace_back("bsr dJ/dB" + tag, worst_kb);
      report.worst = std::max({report.worst, worst_ka, worst_kb});
    }
  }

  for (const double alpha : alphas) {
    const ObjectiveConfig cfg{alpha, RegularizerKind::SumSquares};
    double worst_k = 0.0;
    for (int k = 0; k < spec.classes; ++k) {
      const auto f = [&](const Vector& flat) {
        LinearSoftmaxModel probe = lsm;
        probe.w[k].data() = flat;
        return lsr_objective(probe, multi, cfg);
      };
      Vector g = matrix_grad_flat(lsr_grad(lsm, multi, cfg, k));
      if (spec.corrupt != 0.0) g[0] += spec.corrupt;
      worst_k = std::max(worst_k, grad_rel_error(g, fd_gradient(f, lsm.w[k].data())));
    }
    report.entries.emplace_back("lsr dJ/dW (alpha=" + format_alpha(alpha) + ")",
                                worst_k);
    report.worst = std::max(report.worst, worst_k);
  }

  return report;
}

EquivalenceReport run_equivalence(std::uint64_t seed) {
  Rng rng(seed);
  EquivalenceReport report;
  const auto max_deviation = [&](const LinearModel& lin, const BilinearModel& bil,
                                 int rows, int cols) {
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Matrix x = random_matrix(rows, cols, rng);
      worst = std::max(worst, std::fabs(blr_score(bil, x) - llr_score(lin, x)));
    }
    return worst;
  };

  for (const auto& [rows, cols] : std::vector<std::pair<int, int>>{{5, 7}, {28, 28}}) {
    const LinearModel lin{random_matrix(rows, cols, rng)};
    const BilinearModel bil = decompose_w(lin, std::min(rows, cols));
    const double dev = max_deviation(lin, bil, rows, cols);
    report.cases.push_back({rows, cols, dev});
    report.worst = std::max(report.worst, dev);
  }

  {
    Matrix w(5, 7);
    const Matrix u = random_matrix(5, 1, rng);
    const Matrix v = random_matrix(7, 1, rng);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 7; ++j) w(i, j) = u(i, 0) * v(j, 0);
    }
    const LinearModel lin{w};
    report.rank1_deviation = max_deviation(lin, decompose_w(lin, 1), 5, 7);
  }

  {
    const LinearModel lin{random_matrix(5, 7, rng)};
    report.partial_gap = max_deviation(lin, decompose_w(lin, 2), 5, 7);
  }
  return report;
}

std::string inspect_model(const AnyModel& m) {
  std::ostringstream os;
  if (const auto* lm = std::get_if<LinearModel>(&m)) {
    os << "kind: llr\n";
    os << "shape: " << lm->w.rows() << "x" << lm->w.cols() << "\n";
    os << "frobenius norm: " << format_fixed(frobenius_norm(lm->w), 6) << "\n";
    os << "parameter count: " << parameter_count(*lm) << "\n";
  } else if (const auto* bm = std::get_if<BilinearModel>(&m)) {
    os << "kind: blr\n";
    os << "shape: " << bm->a.rows() << "x" << bm->b.rows() << "  rank: "
       << bm->a.cols() << "\n";
    os << "frobenius norm A: " << format_fixed(frobenius_norm(bm->a), 6)
       << "  B: " << format_fixed(frobenius_norm(bm->b), 6) << "\n";
    os << "parameter count: " << parameter_count(*bm) << "\n";
  } else if (const auto* sm = std::get_if<LinearSoftmaxModel>(&m)) {
    os << "kind: lsr\n";
    os << "shape: " << sm->w[0].rows() << "x" << sm->w[0].cols()
       << "  classes: " << sm->w.size() << "\n";
    for (std::size_t k = 0; k < sm->w.size(); ++k) {
      os << "frobenius norm W_" << k << ": "
         << format_fixed(frobenius_norm(sm->w[k]), 6) << "\n";
    }
    os << "parameter count: " << parameter_count(*sm) << "\n";
  } else {
    const auto& bsm = std::get<BilinearSoftmaxModel>(m);
    const BilinearModel& first = bsm.classes[0];
    os << "kind: bsr\n";
    os << "shape: " << first.a.rows() << "x" << first.b.rows() << "  rank: "
       << first.a.cols() << "  classes: " << bsm.classes.size() << "\n";
    for (std::size_t k = 0; k < bsm.classes.size(); ++k) {
      os << "frobenius norm A_" << k << ": "
         << format_fixed(frobenius_norm(bsm.classes[k].a), 6)
         << "  B_" << k << ": " << format_fixed(frobenius_norm(bsm.classes[k].b), 6)
         << "\n";
    }
    os << "parameter count: " << parameter_count(bsm) << "\n";
  }
  return os.str();
}

std::string resolve_data_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("BILINEAR_DATA_DIR"); env && *env) return env;
  return "data/mnist";
}

int default_workers() {
  const char* env = std::getenv("BILINEAR_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return 1;
  return static_cast<int>(v);
}

}  // namespace bilinear

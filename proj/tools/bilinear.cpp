#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bilinear/experiments.hpp"

using namespace bilinear;

namespace {

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

void append_csv_row(const std::string& path, const EvalReport& row) {
  std::ifstream probe(path);
  const bool fresh = !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
  probe.close();
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot open output file " + path);
  if (fresh) out << eval_csv_header() << "\n";
  out << eval_csv_row(row) << "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bilinear logistic/softmax regression experiments on MNIST"};
  app.require_subcommand(1);

  std::string experiment = "pair-8v9";
  std::string model = "blr";
  int rank = 1;
  int train_size = 1024;
  int val_size = 0;
  int test_size = 0;
  std::uint64_t seed = 1;
  double alpha_value = 0.0;
  std::vector<double> grid_alphas;
  std::string reg = "prod";
  std::string data_dir;
  std::string out_path;
  std::string model_out;
  std::string trace_path;

  CLI::App* train_cmd =
      app.add_subcommand("train", "train one model, print its evaluation row");
  train_cmd->add_option("-e,--experiment", experiment,
                        "pair-PvQ (e.g. pair-8v9, pair-5v8) or multiclass")
      ->capture_default_str();
  train_cmd->add_option("-m,--model", model, "llr, blr, lsr, or bsr")
      ->capture_default_str();
  train_cmd->add_option("-L,--rank", rank, "bilinear rank (blr/bsr)")
      ->capture_default_str();
  train_cmd->add_option("-T,--train-size", train_size, "training examples")
      ->capture_default_str();
  train_cmd->add_option("--val-size", val_size,
                        "validation examples (default 2000 binary, 10000 multiclass)");
  train_cmd->add_option("--test-size", test_size,
                        "test examples cap (default 2000 binary, 10000 multiclass)");
  train_cmd->add_option("-s,--seed", seed, "split and init seed")
      ->capture_default_str();
  CLI::Option* alpha_opt = train_cmd->add_option(
      "-a,--alpha", alpha_value,
      "fixed regularization weight (default: selected on validation)");
  train_cmd->add_option("--grid", grid_alphas,
                        "alpha grid for validation selection "
                        "(default 0,0.0001,0.001,0.01,0.1,1,10)")
      ->delimiter(',');
  train_cmd->add_option("-r,--reg", reg, "bilinear regularizer: sum or prod")
      ->check(CLI::IsMember({"sum", "prod"}))
      ->capture_default_str();
  train_cmd->add_option("-d,--data-dir", data_dir,
                        "IDX directory (default $BILINEAR_DATA_DIR, else data/mnist)");
  train_cmd->add_option("-o,--out", out_path, "append the CSV row to this file");
  train_cmd->add_option("--model-out", model_out, "write the trained model here");
  train_cmd->add_option("--trace", trace_path,
                        "write the objective trace here (needs a fixed --alpha)");

  std::vector<std::uint64_t> seeds = {1};
  std::vector<int> train_sizes;
  bool full_scale = false;
  int workers = 0;
  CLI::App* figure_cmd = app.add_subcommand(
      "figure", "run a whole accuracy-vs-T grid and emit plot-ready CSV");
  figure_cmd->add_option("-e,--experiment", experiment,
                         "pair-PvQ or multiclass; picks the model columns")
      ->capture_default_str();
  figure_cmd->add_option("--seeds", seeds, "one row per seed, plus a mean row")
      ->delimiter(',')
      ->capture_default_str();
  figure_cmd
      ->add_option("--Ts", train_sizes,
                   "override the T sweep (default: the figure's sweep)")
      ->delimiter(',');
  figure_cmd->add_flag("--full,!--desk-scale", full_scale,
                       "full T sweep; default stops at T=1024 (binary) / 640");
  figure_cmd->add_option("--val-size", val_size, "validation examples per cell");
  figure_cmd->add_option("--test-size", test_size, "test examples cap per cell");
  figure_cmd->add_option("--grid", grid_alphas, "alpha grid")->delimiter(',');
  figure_cmd->add_option("-r,--reg", reg, "bilinear regularizer: sum or prod")
      ->check(CLI::IsMember({"sum", "prod"}))
      ->capture_default_str();
  figure_cmd->add_option("-d,--data-dir", data_dir, "IDX directory");
  figure_cmd->add_option("-o,--out", out_path, "write CSV here (default stdout)");
  figure_cmd->add_option("-w,--workers", workers,
                         "worker threads (default $BILINEAR_WORKERS, else 1)");

  GradCheckSpec gc;
  double corrupt = 0.0;
  CLI::App* gradcheck_cmd = app.add_subcommand(
      "gradcheck", "compare every analytic gradient against finite differences");
  gradcheck_cmd->add_option("-M,--rows", gc.rows, "input rows")->capture_default_str();
  gradcheck_cmd->add_option("-N,--cols", gc.cols, "input cols")->capture_default_str();
  gradcheck_cmd->add_option("-L,--rank", gc.rank, "bilinear rank")
      ->capture_default_str();
  gradcheck_cmd->add_option("-T,--batch", gc.batch, "batch size")
      ->capture_default_str();
  gradcheck_cmd->add_option("-K,--classes", gc.classes, "softmax classes")
      ->capture_default_str();
  gradcheck_cmd->add_option("-s,--seed", gc.seed, "fixture seed")
      ->capture_default_str();
  gradcheck_cmd->add_option("--corrupt", corrupt, "offset added to one analytic component")
      ->group("");  // negative-control hook, hidden from --help

  CLI::App* equivalence_cmd = app.add_subcommand(
      "equivalence", "check the full-rank bilinear/linear score equivalence");
  equivalence_cmd->add_option("-s,--seed", seed, "fixture seed")
      ->capture_default_str();

  std::string model_path;
  CLI::App* inspect_cmd =
      app.add_subcommand("inspect", "print a model file's shape, norms, and size");
  inspect_cmd->add_option("file", model_path, "model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) {
      const ExperimentKind kind = parse_experiment(experiment);
      check_model_experiment(model, kind);  // fail fast, before touching data
      RunSpec rs;
      rs.experiment = experiment;
      rs.model = model;
      rs.rank = rank;
      rs.train_size = train_size;
      rs.val_size = val_size > 0 ? val_size : (kind.multiclass ? 10000 : 2000);
      rs.test_size = test_size > 0 ? test_size : (kind.multiclass ? 10000 : 2000);
      rs.seed = seed;
      if (alpha_opt->count() > 0) rs.fixed_alpha = alpha_value;
      if (!grid_alphas.empty()) rs.grid.alphas = grid_alphas;
      rs.regularizer = regularizer_from_name(reg);
      std::ofstream trace_file;
      if (!trace_path.empty()) {
        if (!rs.fixed_alpha) {
          throw std::invalid_argument(
              "--trace needs a fixed --alpha; with grid selection several "
              "trainings would interleave in one stream");
        }
        trace_file.open(trace_path);
        if (!trace_file) throw DataError("cannot open trace file " + trace_path);
        rs.trace = &trace_file;
      }
      const MnistData data = load_mnist_dir(resolve_data_dir(data_dir));
      const auto [row, trained] = run_single(data, rs);
      std::cout << eval_csv_header() << "\n" << eval_csv_row(row) << "\n";
      if (!out_path.empty()) append_csv_row(out_path, row);
      if (!model_out.empty()) save_model_file(model_out, trained);
      return 0;
    }

    if (*figure_cmd) {
      parse_experiment(experiment);  // fail fast, before touching data
      FigureSpec fs;
      fs.experiment = experiment;
      fs.train_sizes = train_sizes;
      fs.seeds = seeds;
      fs.full_scale = full_scale;
      fs.val_size = val_size;
      fs.test_size = test_size;
      if (!grid_alphas.empty()) fs.grid.alphas = grid_alphas;
      fs.regularizer = regularizer_from_name(reg);
      fs.workers = workers > 0 ? workers : default_workers();
      const MnistData data = load_mnist_dir(resolve_data_dir(data_dir));
      const std::string csv = run_figure(data, fs);
      if (out_path.empty()) {
        std::cout << csv;
      } else {
        write_text_file(out_path, csv);
        std::cout << "wrote " << out_path << "\n";
      }
      return 0;
    }

    if (*gradcheck_cmd) {
      gc.corrupt = corrupt;
      const GradCheckReport report = run_gradcheck(gc);
      for (const auto& [name, err] : report.entries) {
        std::cout << name << ": " << sci(err) << "\n";
      }
      std::cout << "worst: " << sci(report.worst) << "\n";
      if (report.worst > 1e-5) {
        std::cerr << "gradient check failed: worst relative error " << sci(report.worst)
                  << " exceeds 1e-5\n";
        return 3;
      }
      std::cout << "all gradients within 1e-5\n";
      return 0;
    }

    if (*equivalence_cmd) {
      const EquivalenceReport report = run_equivalence(seed);
      for (const EquivalenceCase& c : report.cases) {
        std::cout << "W " << c.rows << "x" << c.cols
                  << " at L=min(M,N): max |z_blr - z_llr| = " << sci(c.max_deviation)
                  << "\n";
      }
      std::cout << "rank-1 W at L=1: " << sci(report.rank1_deviation) << "\n";
      std::cout << "full-rank 5x7 at L=2 (reconstruction gap, reported only): "
                << sci(report.partial_gap) << "\n";
      if (report.worst > 1e-9) {
        std::cerr << "equivalence check failed: max deviation " << sci(report.worst)
                  << " exceeds 1e-9\n";
        return 3;
      }
      std::cout << "equivalence holds within 1e-9\n";
      return 0;
    }

    const AnyModel m = load_model_file(model_path);
    std::cout << inspect_model(m);
    return 0;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid arguments: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// mdd: train, benchmark and inspect max-diversity distributed learners.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mdd/baselines.hpp"
#include "mdd/data.hpp"
#include "mdd/eval.hpp"
#include "mdd/mdd.hpp"
#include "mdd/model_io.hpp"
#include "mdd/paramserver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Validation failures detected by the CLI itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainArgs {
  std::string method;
  std::string data;
  std::string test;
  std::size_t m = 5;
  double lambda = 1e-3;
  double gamma = 0.0;
  double sigma = 1.0;
  double zeta = 1e-6;
  std::size_t max_iters = 100;
  std::string solver = "exact";
  std::uint64_t seed = 0;
  std::string out = "model.json";
  std::string trace = "trace.csv";
  bool standardize = false;
};

struct BenchArgs {
  std::string data;
  std::string methods = "rr,drr,mdd-ls";
  std::size_t m = 5;
  std::size_t trials = 30;
  double train_fraction = 0.7;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::string lambda_grid;
  std::string gamma_grid;
  std::string sigma_grid;
  std::string solver = "exact";
  double zeta = 1e-6;
  std::size_t max_iters = 100;
  std::size_t krr_max_n = mdd::kDefaultKrrMaxSamples;
  bool standardize = false;
  bool dry_run = false;
  std::string out_csv = "report.csv";
  std::string out_json = "report.json";
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_grid(const std::string& text, const char* what) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad value '") + item + "' in " + what + " grid");
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + " grid is empty");
  return out;
}

template <typename Fn>
auto validated(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void write_text(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  body(out);
}

int cmd_train(const TrainArgs& args) {
  const auto spec = validated([&] { return mdd::parse_method(args.method, args.m); });
  mdd::TrainConfig cfg;
  cfg.lambda = args.lambda;
  cfg.gamma = args.gamma;
  cfg.zeta = args.zeta;
  cfg.max_iters = args.max_iters;
  cfg.solver = validated([&] { return mdd::parse_solver_mode(args.solver); });
  cfg.threads = mdd::thread_budget();
  if (spec.uses_sigma()) cfg.sigma = args.sigma;
  validated([&] {
    cfg.validate();
    return 0;
  });
  if (spec.uses_gamma() && spec.m < 2) throw UsageError("MDD requires m >= 2");

  mdd::Dataset train = mdd::load_dataset(args.data);
  mdd::Dataset test;
  if (!args.test.empty()) {
    test = mdd::load_dataset(args.test);
    if (test.dim() > train.dim()) {
      train.features.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(test.dim()));
      train.features.rightCols(static_cast<Eigen::Index>(test.dim() - train.dim())).setZero();
    } else if (test.dim() < train.dim()) {
      const auto old = test.features.cols();
      test.features.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(train.dim()));
      test.features.rightCols(static_cast<Eigen::Index>(train.dim()) - old).setZero();
    }
  }
  if (args.standardize) {
    auto st = mdd::standardize(train, test);
    train = std::move(st.train);
    test = std::move(st.test);
  }
  if (spec.distributed() && spec.m > train.size()) {
    throw UsageError("m = " + std::to_string(spec.m) + " exceeds the " + std::to_string(train.size()) +
                     " training samples");
  }

  const mdd::KernelConfig kernel{args.sigma};
  const auto part = mdd::partition(train, spec.m, args.seed);
  mdd::SavedModel saved;
  saved.kind = std::string(mdd::kind_name(spec.kind));
  saved.lambda = args.lambda;
  if (spec.uses_gamma()) saved.gamma = args.gamma;
  if (spec.uses_sigma()) saved.sigma = args.sigma;
  std::vector<mdd::RoundTrace> trace;

  switch (spec.kind) {
    case mdd::MethodKind::rr:
      saved.linear_shards.push_back(mdd::train_rr(train, args.lambda).w);
      break;
    case mdd::MethodKind::drr:
      for (auto& s : mdd::train_drr(train, part, args.lambda).shards) saved.linear_shards.push_back(s.w);
      break;
    case mdd::MethodKind::krr:
      saved.kernel_model = mdd::train_krr(train, args.lambda, kernel);
      break;
    case mdd::MethodKind::kdrr:
      saved.kernel_model = mdd::train_kdrr(train, part, args.lambda, kernel);
      break;
    case mdd::MethodKind::mdd_ls: {
      auto fit = mdd::mdd_ls_train(train, part, cfg);
      for (auto& s : fit.shards) saved.linear_shards.push_back(s.w);
      trace = std::move(fit.trace);
      if (fit.status == mdd::Termination::max_iters_reached) {
        std::cerr << "warning: max_iters_reached after " << trace.size() << " rounds\n";
      }
      break;
    }
    case mdd::MethodKind::mdd_rkhs: {
      auto fit = mdd::mdd_rkhs_train(train, part, cfg, kernel);
      saved.kernel_model = std::move(fit.model);
      trace = std::move(fit.trace);
      if (fit.status == mdd::Termination::max_iters_reached) {
        std::cerr << "warning: max_iters_reached after " << trace.size() << " rounds\n";
      }
      break;
    }
  }

  mdd::save_model(saved, args.out);
  std::cout << "model written to " << args.out << "\n";
  if (spec.uses_gamma()) {
    write_text(args.trace, [&](std::ostream& out) { mdd::write_trace_csv(trace, out); });
    std::cout << "trace written to " << args.trace << " (" << trace.size() << " rounds)\n";
  }

  auto predict_on = [&](const Eigen::MatrixXd& x) {
    return saved.is_kernel() ? mdd::predict(saved.kernel_model, x) : mdd::predict(saved.linear_average(), x);
  };
  std::cout << std::setprecision(10);
  std::cout << "train rmse " << mdd::rmse(predict_on(train.features), train.targets) << "\n";
  if (!test.empty()) std::cout << "test rmse " << mdd::rmse(predict_on(test.features), test.targets) << "\n";
  return kExitOk;
}

int cmd_benchmark(const BenchArgs& args) {
  std::vector<mdd::MethodSpec> methods;
  const auto solver = validated([&] { return mdd::parse_solver_mode(args.solver); });
  for (const auto& name : split_list(args.methods)) {
    auto spec = validated([&] { return mdd::parse_method(name, args.m); });
    spec.solver = solver;
    spec.zeta = args.zeta;
    spec.max_iters = args.max_iters;
    spec.krr_max_samples = args.krr_max_n;
    methods.push_back(spec);
  }
  if (methods.empty()) throw UsageError("no methods given");
  if (args.trials < 1) throw UsageError("trials must be at least 1");
  if (!(args.train_fraction > 0.0 && args.train_fraction < 1.0)) throw UsageError("train fraction must lie in (0, 1)");
  if (args.folds < 2) throw UsageError("folds must be at least 2");
  if (!(args.zeta > 0.0)) throw UsageError("zeta must be positive");
  if (args.max_iters < 1) throw UsageError("max_iters must be at least 1");

  mdd::BenchmarkOptions opts;
  opts.trials = args.trials;
  opts.train_fraction = args.train_fraction;
  opts.folds = args.folds;
  opts.seed = args.seed;
  opts.standardize = args.standardize;
  opts.dry_run = args.dry_run;
  opts.threads = mdd::thread_budget();
  if (!args.lambda_grid.empty()) opts.grids.lambdas = parse_grid(args.lambda_grid, "lambda");
  if (!args.gamma_grid.empty()) opts.grids.gammas = parse_grid(args.gamma_grid, "gamma");
  if (!args.sigma_grid.empty()) opts.grids.sigmas = parse_grid(args.sigma_grid, "sigma");
  for (double v : opts.grids.lambdas) if (!(v > 0.0)) throw UsageError("lambda grid values must be positive");
  for (double v : opts.grids.gammas) if (!(v >= 0.0)) throw UsageError("gamma grid values must be nonnegative");
  for (double v : opts.grids.sigmas) if (!(v > 0.0)) throw UsageError("sigma grid values must be positive");

  const auto ds = mdd::load_dataset(args.data);
  const auto output = mdd::run_benchmark(ds, methods, opts);

  if (args.dry_run) {
    std::cout << "dry run: trials=" << output.counts.trials << " folds=" << output.counts.folds << "\n";
    for (const auto& m : output.counts.methods) {
      std::cout << "  " << m.method << ": lambda_points=" << m.lambda_points << " gamma_points=" << m.gamma_points
                << " sigma_points=" << m.sigma_points << " cv_fits=" << m.cv_fits << "\n";
    }
  }
  write_text(args.out_csv, [&](std::ostream& out) { mdd::write_report_csv(output.reports, out); });
  write_text(args.out_json, [&](std::ostream& out) { mdd::write_report_json(output, out); });
  if (args.dry_run) return kExitOk;

  // Best mean first; others are compared against it.
  std::size_t best = 0;
  for (std::size_t k = 1; k < output.reports.size(); ++k) {
    if (output.reports[k].mean_rmse < output.reports[best].mean_rmse) best = k;
  }
  const auto best_values = output.reports[best].rmse_values();
  std::cout << std::left << std::setw(14) << "method" << std::setw(14) << "mean_rmse" << std::setw(14) << "std"
            << "vs best\n";
  for (std::size_t k = 0; k < output.reports.size(); ++k) {
    const auto& r = output.reports[k];
    std::cout << std::setw(14) << r.method << std::setw(14) << r.mean_rmse << std::setw(14) << r.std_rmse;
    const auto values = r.rmse_values();
    if (k == best) {
      std::cout << "best";
    } else if (values.size() >= 2 && best_values.size() >= 2) {
      const auto w = mdd::welch_t_test(values, best_values);
      std::cout << (w.significant ? "significantly worse" : "not significantly worse") << " (p=" << w.p << ")";
    }
    std::size_t failures = r.trials.size() - values.size();
    if (failures > 0) std::cout << " [" << failures << " failed trials]";
    std::cout << "\n";
  }
  std::cout << "report written to " << args.out_csv << " and " << args.out_json << "\n";
  return kExitOk;
}

int cmd_diversity(const std::vector<std::string>& paths) {
  if (paths.empty()) throw UsageError("diversity needs model files");
  std::vector<mdd::SavedModel> models;
  for (const auto& p : paths) models.push_back(mdd::load_model(p));
  const bool kernel = models.front().is_kernel();
  for (const auto& m : models) {
    if (m.is_kernel() != kernel) throw UsageError("cannot mix linear and kernel models");
  }

  Eigen::MatrixXd dist;
  double diversity = 0.0;
  if (!kernel) {
    std::vector<Eigen::VectorXd> ws;
    if (models.size() == 1) {
      ws = models.front().linear_shards;
    } else {
      for (const auto& m : models) ws.push_back(m.linear_average().w);
    }
    if (ws.size() < 2) throw UsageError("diversity needs at least two models");
    for (const auto& w : ws) {
      if (w.size() != ws.front().size()) throw UsageError("linear models have different dimensions");
    }
    dist = mdd::pairwise_sq_distances(ws);
    diversity = mdd::diversity_linear(ws);
  } else {
    mdd::ShardedKernelModel combined;
    combined.kernel = models.front().kernel_model.kernel;
    if (models.size() == 1) {
      combined = models.front().kernel_model;
    } else {
      // each file becomes one expansion: its shards stacked with coeffs / m
      for (const auto& m : models) {
        if (m.kernel_model.kernel.sigma != combined.kernel.sigma) {
          throw UsageError("kernel models use different bandwidths");
        }
        Eigen::Index rows = 0;
        for (const auto& s : m.kernel_model.shards) rows += s.anchors.rows();
        const auto cols = m.kernel_model.shards.front().anchors.cols();
        mdd::KernelShard flat{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
        Eigen::Index at = 0;
        const double scale = 1.0 / static_cast<double>(m.kernel_model.shards.size());
        for (const auto& s : m.kernel_model.shards) {
          if (s.anchors.cols() != cols) throw UsageError("kernel model shards have different dimensions");
          flat.anchors.middleRows(at, s.anchors.rows()) = s.anchors;
          flat.coeffs.segment(at, s.coeffs.size()) = scale * s.coeffs;
          at += s.anchors.rows();
        }
        combined.shards.push_back(std::move(flat));
      }
    }
    if (combined.shards.size() < 2) throw UsageError("diversity needs at least two models");
    for (const auto& s : combined.shards) {
      if (s.anchors.cols() != combined.shards.front().anchors.cols()) {
        throw UsageError("kernel models have different dimensions");
      }
    }
    dist = mdd::pairwise_sq_distances(combined);
    diversity = mdd::diversity_rkhs(combined);
  }

  std::cout << std::setprecision(12);
  std::cout << "diversity " << diversity << "\n";
  std::cout << "pairwise squared distances\n";
  for (Eigen::Index i = 0; i < dist.rows(); ++i) {
    for (Eigen::Index j = 0; j < dist.cols(); ++j) std::cout << (j ? " " : "") << dist(i, j);
    std::cout << "\n";
  }
  return kExitOk;
}

int cmd_cache(const std::string& data, const std::string& out_path) {
  const auto ds = mdd::load_dataset(data);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
  mdd::write_cache(ds, out);
  std::cout << "cached " << ds.size() << " x " << ds.dim() << " to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Max-diversity distributed ridge and kernel ridge regression"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train one method and write model JSON (+ trace CSV for MDD)");
  train_cmd->add_option("--method", train.method, "rr|drr|krr|kdrr|mdd-ls|mdd-rkhs")->required();
  train_cmd->add_option("--data", train.data, "training data (LIBSVM text or MDD1 cache)")->required();
  train_cmd->add_option("--test", train.test, "optional test data; prints test RMSE");
  train_cmd->add_option("--m", train.m, "number of shards / workers")->capture_default_str();
  train_cmd->add_option("--lambda", train.lambda, "ridge regularization")->capture_default_str();
  train_cmd->add_option("--gamma", train.gamma, "diversity strength (MDD)")->capture_default_str();
  train_cmd->add_option("--sigma", train.sigma, "Gaussian kernel bandwidth")->capture_default_str();
  train_cmd->add_option("--zeta", train.zeta, "stopping threshold")->capture_default_str();
  train_cmd->add_option("--max-iters", train.max_iters, "iteration cap")->capture_default_str();
  train_cmd->add_option("--solver", train.solver, "exact|fast-lemma4")->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "partition seed")->capture_default_str();
  train_cmd->add_option("--out", train.out, "model JSON path")->capture_default_str();
  train_cmd->add_option("--trace", train.trace, "trace CSV path")->capture_default_str();
  train_cmd->add_flag("--standardize", train.standardize, "standardize features with train statistics");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "repeated 70/30 splits with k-fold CV per method");
  bench_cmd->add_option("--data", bench.data, "dataset (LIBSVM text or MDD1 cache)")->required();
  bench_cmd->add_option("--methods", bench.methods, "comma list, e.g. rr,drr-5,mdd-ls-10")->capture_default_str();
  bench_cmd->add_option("--m", bench.m, "default shard count for distributed methods")->capture_default_str();
  bench_cmd->add_option("--trials", bench.trials, "random splits")->capture_default_str();
  bench_cmd->add_option("--train-fraction", bench.train_fraction, "training share")->capture_default_str();
  bench_cmd->add_option("--folds", bench.folds, "cross-validation folds")->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "master seed")->capture_default_str();
  bench_cmd->add_option("--lambda-grid", bench.lambda_grid, "comma list (default 10^-6..10^3)");
  bench_cmd->add_option("--gamma-grid", bench.gamma_grid, "comma list (default 10^-6..10^3)");
  bench_cmd->add_option("--sigma-grid", bench.sigma_grid, "comma list (default 2^-10..2^10)");
  bench_cmd->add_option("--solver", bench.solver, "exact|fast-lemma4")->capture_default_str();
  bench_cmd->add_option("--zeta", bench.zeta, "MDD stopping threshold")->capture_default_str();
  bench_cmd->add_option("--max-iters", bench.max_iters, "MDD iteration cap")->capture_default_str();
  bench_cmd->add_option("--krr-max-n", bench.krr_max_n, "global KRR size limit")->capture_default_str();
  bench_cmd->add_flag("--standardize", bench.standardize, "standardize features per split");
  bench_cmd->add_flag("--dry-run", bench.dry_run, "count protocol steps without fitting");
  bench_cmd->add_option("--out-csv", bench.out_csv, "report CSV path")->capture_default_str();
  bench_cmd->add_option("--out-json", bench.out_json, "report JSON path")->capture_default_str();

  std::vector<std::string> model_paths;
  auto* div_cmd = app.add_subcommand("diversity", "empirical diversity of two or more models");
  div_cmd->add_option("models", model_paths, "model JSON files")->required();

  std::string cache_in;
  std::string cache_out;
  auto* cache_cmd = app.add_subcommand("cache", "convert a LIBSVM file to the MDD1 binary cache");
  cache_cmd->add_option("--data", cache_in, "LIBSVM input")->required();
  cache_cmd->add_option("--out", cache_out, "cache output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train);
    if (*bench_cmd) return cmd_benchmark(bench);
    if (*div_cmd) return cmd_diversity(model_paths);
    if (*cache_cmd) return cmd_cache(cache_in, cache_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

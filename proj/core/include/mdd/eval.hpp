#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mdd/baselines.hpp"
#include "mdd/data.hpp"
#include "mdd/mdd.hpp"

namespace mdd {

[[nodiscard]] double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  bool significant = false;  // two-sided, alpha = 0.05
};

/// Two-sided Welch unequal-variance t-test with Welch-Satterthwaite degrees
/// of freedom. Both samples constant with equal means gives t = 0, p = 1.
[[nodiscard]] WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

enum class MethodKind { rr, drr, krr, kdrr, mdd_ls, mdd_rkhs };

struct MethodSpec {
  MethodKind kind = MethodKind::rr;
  std::size_t m = 1;
  SolverMode solver = SolverMode::exact;
  double zeta = 1e-6;
  std::size_t max_iters = 100;
  std::size_t krr_max_samples = kDefaultKrrMaxSamples;

  [[nodiscard]] bool distributed() const;
  [[nodiscard]] bool uses_gamma() const;
  [[nodiscard]] bool uses_sigma() const;
  /// "rr", "drr-5", "mdd-ls-10", ...
  [[nodiscard]] std::string name() const;
};

[[nodiscard]] std::string_view kind_name(MethodKind kind);
[[nodiscard]] MethodKind parse_method_kind(std::string_view text);

/// Accepts "drr" (uses default_m for distributed kinds) or "drr-5".
[[nodiscard]] MethodSpec parse_method(std::string_view text, std::size_t default_m);

struct Grids {
  std::vector<double> lambdas;
  std::vector<double> gammas;
  std::vector<double> sigmas;

  /// lambda, gamma in {10^i : i = -6..3}; sigma in {2^i : i = -10..10}.
  [[nodiscard]] static Grids defaults();
};

struct HyperParams {
  double lambda = 1.0;
  std::optional<double> gamma;
  std::optional<double> sigma;
};

/// Trains `spec` on `train` and predicts `queries`. Distributed kinds
/// partition `train` with `seed`.
struct FitOutcome {
  Eigen::VectorXd predictions;
  std::uint64_t floats_comm = 0;
};
[[nodiscard]] FitOutcome fit_and_predict(const Dataset& train, const Eigen::MatrixXd& queries,
                                         const MethodSpec& spec, const HyperParams& hp, std::uint64_t seed);

/// Folds from a seeded permutation dealt round-robin: disjoint, covering,
/// sizes differ by at most one.
[[nodiscard]] std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed);

struct CvOptions {
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool dry_run = false;  // enumerate cells and folds without fitting
};

struct CvResult {
  HyperParams best;
  double best_rmse = 0.0;
  std::size_t lambda_points = 0;
  std::size_t gamma_points = 0;
  std::size_t sigma_points = 0;
  std::size_t cells = 0;
  std::size_t folds = 0;
  std::size_t fits = 0;  // cells x folds, counted as visited
};

/// Exhaustive grid search minimizing mean held-out RMSE. Ties go to the
/// smaller lambda, then gamma, then sigma. A fold that diverges or fails to
/// factor scores +inf for its cell.
[[nodiscard]] CvResult kfold_cv(const Dataset& train, const MethodSpec& spec, const Grids& grids,
                                const CvOptions& opts);

struct TrialResult {
  std::size_t trial = 0;
  double rmse = 0.0;  // NaN when the method failed
  double fit_time_s = 0.0;
  double cv_time_s = 0.0;
  std::uint64_t floats_comm = 0;
  HyperParams params;
  std::string error;
};

struct BenchmarkReport {
  std::string method;
  std::vector<TrialResult> trials;
  double mean_rmse = 0.0;  // over successful trials
  double std_rmse = 0.0;   // sample std; 0 with fewer than two successes

  [[nodiscard]] std::vector<double> rmse_values() const;
};

struct BenchmarkOptions {
  std::size_t trials = 30;
  double train_fraction = 0.7;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  Grids grids = Grids::defaults();
  bool standardize = false;
  bool dry_run = false;
  std::size_t threads = 1;
};

/// Protocol counters, filled in both dry and real runs.
struct ProtocolCounts {
  std::size_t trials = 0;
  std::size_t folds = 0;
  struct PerMethod {
    std::string method;
    std::size_t lambda_points = 0;
    std::size_t gamma_points = 0;
    std::size_t sigma_points = 0;
    std::size_t cv_fits = 0;
  };
  std::vector<PerMethod> methods;
};

struct BenchmarkOutput {
  std::vector<BenchmarkReport> reports;
  ProtocolCounts counts;
};

/// Per trial: fresh seeded split, per-method CV on the training part, refit
/// with the chosen hyperparameters, test RMSE. Method failures are recorded
/// per trial.
[[nodiscard]] BenchmarkOutput run_benchmark(const Dataset& ds, std::span<const MethodSpec> methods,
                                            const BenchmarkOptions& opts);

/// Deterministic per-trial seed derived from the master seed.
[[nodiscard]] std::uint64_t trial_seed(std::uint64_t master, std::size_t trial);

inline constexpr std::string_view kReportCsvHeader = "method,trial,rmse,time_s,floats_comm,lambda,gamma,sigma";

void write_report_csv(std::span<const BenchmarkReport> reports, std::ostream& out);
void write_report_json(const BenchmarkOutput& output, std::ostream& out);

}  // namespace mdd

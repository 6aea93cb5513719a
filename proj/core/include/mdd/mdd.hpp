#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mdd/baselines.hpp"
#include "mdd/data.hpp"
#include "mdd/linalg.hpp"

namespace mdd {

enum class SolverMode {
  exact,        // A_i^{-1} v through the cached Cholesky factor
  fast_lemma4,  // (v . c_i) ./ b_i, exact fallback per worker when b_i has zeros
};

[[nodiscard]] std::string_view to_string(SolverMode mode);
[[nodiscard]] SolverMode parse_solver_mode(std::string_view text);

/// Hyperparameters of one max-diversity run. `gamma` multiplies d_i^t in the
/// update w_i^t = w_i^0 - gamma d_i^t. The matching shard objective carries
/// the diversity term 2 gamma w^T wbar_{\i}.
struct TrainConfig {
  double lambda = 1e-3;
  double gamma = 0.0;
  double zeta = 1e-6;
  std::size_t max_iters = 100;
  SolverMode solver = SolverMode::exact;
  std::optional<double> sigma;
  std::size_t threads = 1;

  /// Throws std::invalid_argument on lambda <= 0, gamma < 0, zeta <= 0,
  /// max_iters == 0, or a non-positive sigma.
  void validate() const;
};

/// Consecutive growing consensus deltas that abort a run.
inline constexpr std::size_t kDivergenceWindow = 5;

class Diverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RoundTrace {
  std::size_t t = 0;
  double consensus_delta = 0.0;
  double diversity = 0.0;
  std::uint64_t floats_pushed = 0;  // cumulative
  std::uint64_t floats_pulled = 0;  // cumulative
  double elapsed_s = 0.0;
  std::size_t fast_fallbacks = 0;   // workers that fell back to the exact solve this round
};

enum class Termination { converged, max_iters_reached };

struct MddLinearResult {
  LinearModel average;
  std::vector<LinearModel> shards;
  std::vector<LinearModel> initial_shards;  // w_i^0
  std::vector<RoundTrace> trace;
  Termination status = Termination::converged;
  std::uint64_t setup_floats_pushed = 0;  // the initial push of w_i^0
};

struct MddKernelResult {
  ShardedKernelModel model;
  std::vector<Eigen::VectorXd> initial_coeffs;
  std::vector<RoundTrace> trace;
  Termination status = Termination::converged;
  std::uint64_t setup_floats_pushed = 0;
};

/// (m * mean - member) / (m - 1).
[[nodiscard]] Eigen::VectorXd loo_average(const Eigen::VectorXd& mean, const Eigen::VectorXd& member,
                                          std::size_t m);

[[nodiscard]] MddLinearResult mdd_ls_train(std::span<const Dataset> shards, const TrainConfig& cfg);
[[nodiscard]] MddLinearResult mdd_ls_train(const Dataset& ds, const Partition& part, const TrainConfig& cfg);

[[nodiscard]] MddKernelResult mdd_rkhs_train(std::span<const Dataset> shards, const TrainConfig& cfg,
                                             const KernelConfig& kernel);
[[nodiscard]] MddKernelResult mdd_rkhs_train(const Dataset& ds, const Partition& part, const TrainConfig& cfg,
                                             const KernelConfig& kernel);

/// (1/m^2) sum_{i != j} |w_i - w_j|^2.
[[nodiscard]] double diversity_linear(std::span<const Eigen::VectorXd> models);
[[nodiscard]] double diversity_linear(std::span<const LinearModel> models);

/// Same quantity in the RKHS norm of the kernel, shard by shard.
[[nodiscard]] double diversity_rkhs(const ShardedKernelModel& model);

/// Pairwise squared distances |f_i - f_j|^2 backing the two diversity meters.
[[nodiscard]] Eigen::MatrixXd pairwise_sq_distances(std::span<const Eigen::VectorXd> models);
[[nodiscard]] Eigen::MatrixXd pairwise_sq_distances(const ShardedKernelModel& model);

inline constexpr std::string_view kTraceCsvHeader = "t,consensus_delta,diversity,floats_pushed,floats_pulled,elapsed_s";

void write_trace_csv(std::span<const RoundTrace> trace, std::ostream& out);

}  // namespace mdd

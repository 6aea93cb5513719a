#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mdd/data.hpp"
#include "mdd/linalg.hpp"

namespace mdd {

struct LinearModel {
  Eigen::VectorXd w;
};

struct KernelShard {
  Eigen::MatrixXd anchors;  // n_i x d
  Eigen::VectorXd coeffs;   // n_i
};

/// Uniform average of per-shard kernel expansions.
struct ShardedKernelModel {
  std::vector<KernelShard> shards;
  KernelConfig kernel;
};

/// Thrown when global KRR is asked to run above the configured size limit.
class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultKrrMaxSamples = 20000;

/// A shard's ridge system, factored once. `solution` is A^{-1} b.
struct LinearShardSystem {
  SpdFactor factor;
  Eigen::VectorXd b;
  Eigen::VectorXd solution;
};

/// Kernel counterpart: A = (1/n) K + lambda I, b = (1/n) y.
struct KernelShardSystem {
  Eigen::MatrixXd anchors;
  Eigen::MatrixXd gram;
  SpdFactor factor;
  Eigen::VectorXd b;
  Eigen::VectorXd solution;
};

[[nodiscard]] LinearShardSystem prepare_linear_shard(const Dataset& shard, double lambda);
[[nodiscard]] KernelShardSystem prepare_kernel_shard(const Dataset& shard, double lambda,
                                                     const KernelConfig& cfg);

/// Splits `ds` along `part`; throws if any shard is empty.
[[nodiscard]] std::vector<Dataset> shard_datasets(const Dataset& ds, const Partition& part);

/// (1/m) sum_i v_i, summed in index order.
[[nodiscard]] Eigen::VectorXd average_in_order(std::span<const Eigen::VectorXd> members);

struct DistributedLinearFit {
  LinearModel average;
  std::vector<LinearModel> shards;
};

[[nodiscard]] LinearModel train_rr(const Dataset& ds, double lambda);
[[nodiscard]] DistributedLinearFit train_drr(const Dataset& ds, const Partition& part, double lambda);
[[nodiscard]] DistributedLinearFit train_drr(std::span<const Dataset> shards, double lambda);

[[nodiscard]] ShardedKernelModel train_krr(const Dataset& ds, double lambda, const KernelConfig& cfg,
                                           std::size_t max_samples = kDefaultKrrMaxSamples);
[[nodiscard]] ShardedKernelModel train_kdrr(const Dataset& ds, const Partition& part, double lambda,
                                            const KernelConfig& cfg);
[[nodiscard]] ShardedKernelModel train_kdrr(std::span<const Dataset> shards, double lambda,
                                            const KernelConfig& cfg);

/// Rows of `x` are query samples.
[[nodiscard]] Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& x);
[[nodiscard]] Eigen::VectorXd predict(const ShardedKernelModel& model, const Eigen::MatrixXd& x);

}  // namespace mdd

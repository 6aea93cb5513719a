#include "mdd/baselines.hpp"

#include <string>

namespace mdd {

LinearShardSystem prepare_linear_shard(const Dataset& shard, double lambda) {
  auto sys = linear_gram(shard.features, shard.targets, lambda);
  LinearShardSystem out;
  out.factor = spd_factorize(sys.a);
  out.b = std::move(sys.b);
  out.solution = solve(out.factor, out.b);
  return out;
}

KernelShardSystem prepare_kernel_shard(const Dataset& shard, double lambda, const KernelConfig& cfg) {
  if (!(lambda > 0.0)) throw std::invalid_argument("kernel ridge: lambda must be positive");
  if (shard.empty()) throw std::invalid_argument("kernel ridge: shard is empty");
  const double inv_n = 1.0 / static_cast<double>(shard.size());
  KernelShardSystem out;
  out.anchors = shard.features;
  out.gram = kernel_matrix(shard.features, shard.features, cfg);
  Eigen::MatrixXd a = inv_n * out.gram;
  a.diagonal().array() += lambda;
  out.factor = spd_factorize(a);
  out.b = inv_n * shard.targets;
  out.solution = solve(out.factor, out.b);
  return out;
}

std::vector<Dataset> shard_datasets(const Dataset& ds, const Partition& part) {
  std::vector<Dataset> shards;
  shards.reserve(part.num_shards());
  for (std::size_t i = 0; i < part.num_shards(); ++i) {
    if (part.shards[i].empty()) throw std::invalid_argument("shard " + std::to_string(i) + " is empty");
    shards.push_back(ds.subset(part.shards[i]));
  }
  return shards;
}

Eigen::VectorXd average_in_order(std::span<const Eigen::VectorXd> members) {
  if (members.empty()) throw std::invalid_argument("average_in_order: no members");
  Eigen::VectorXd sum = members.front();
  for (std::size_t i = 1; i < members.size(); ++i) sum += members[i];
  return sum / static_cast<double>(members.size());
}

LinearModel train_rr(const Dataset& ds, double lambda) {
  if (ds.empty()) throw std::invalid_argument("train_rr: empty dataset");
  return {prepare_linear_shard(ds, lambda).solution};
}

DistributedLinearFit train_drr(std::span<const Dataset> shards, double lambda) {
  if (shards.empty()) throw std::invalid_argument("train_drr: no shards");
  DistributedLinearFit fit;
  std::vector<Eigen::VectorXd> ws;
  ws.reserve(shards.size());
  for (std::size_t i = 0; i < shards.size(); ++i) {
    if (shards[i].empty()) throw std::invalid_argument("train_drr: shard " + std::to_string(i) + " is empty");
    ws.push_back(prepare_linear_shard(shards[i], lambda).solution);
    fit.shards.push_back({ws.back()});
  }
  fit.average.w = average_in_order(ws);
  return fit;
}

DistributedLinearFit train_drr(const Dataset& ds, const Partition& part, double lambda) {
  const auto shards = shard_datasets(ds, part);
  return train_drr(shards, lambda);
}

ShardedKernelModel train_krr(const Dataset& ds, double lambda, const KernelConfig& cfg,
                             std::size_t max_samples) {
  if (ds.empty()) throw std::invalid_argument("train_krr: empty dataset");
  if (ds.size() > max_samples) {
    throw Infeasible("global KRR infeasible: " + std::to_string(ds.size()) + " samples exceed limit " +
                     std::to_string(max_samples));
  }
  auto sys = prepare_kernel_shard(ds, lambda, cfg);
  ShardedKernelModel model;
  model.kernel = cfg;
  model.shards.push_back({std::move(sys.anchors), std::move(sys.solution)});
  return model;
}

ShardedKernelModel train_kdrr(std::span<const Dataset> shards, double lambda, const KernelConfig& cfg) {
  if (shards.empty()) throw std::invalid_argument("train_kdrr: no shards");
  ShardedKernelModel model;
  model.kernel = cfg;
  for (const auto& shard : shards) {
    auto sys = prepare_kernel_shard(shard, lambda, cfg);
    model.shards.push_back({std::move(sys.anchors), std::move(sys.solution)});
  }
  return model;
}

ShardedKernelModel train_kdrr(const Dataset& ds, const Partition& part, double lambda, const KernelConfig& cfg) {
  const auto shards = shard_datasets(ds, part);
  return train_kdrr(shards, lambda, cfg);
}

Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.w.size()) {
    throw std::invalid_argument("predict: query dimension " + std::to_string(x.cols()) +
                                " does not match model dimension " + std::to_string(model.w.size()));
  }
  return x * model.w;
}

Eigen::VectorXd predict(const ShardedKernelModel& model, const Eigen::MatrixXd& x) {
  if (model.shards.empty()) throw std::invalid_argument("predict: kernel model has no shards");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.rows());
  for (const auto& shard : model.shards) {
    if (shard.anchors.cols() != x.cols()) {
      throw std::invalid_argument("predict: query dimension " + std::to_string(x.cols()) +
                                  " does not match anchor dimension " + std::to_string(shard.anchors.cols()));
    }
    if (shard.coeffs.size() != shard.anchors.rows()) {
      throw std::invalid_argument("predict: coefficient count does not match anchor count");
    }
    sum += kernel_matrix(x, shard.anchors, model.kernel) * shard.coeffs;
  }
  return sum / static_cast<double>(model.shards.size());
}

}  // namespace mdd

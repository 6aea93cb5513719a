#include "mdd/mdd.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <string>

#include "mdd/paramserver.hpp"

namespace mdd {

namespace {

// Tracks consecutive growth of the consensus delta.
class DivergenceMonitor {
 public:
  void observe(double delta) {
    if (!std::isfinite(delta)) throw Diverged("diverging (gamma too large): non-finite consensus delta");
    growth_ = (have_prev_ && delta > prev_) ? growth_ + 1 : 0;
    have_prev_ = true;
    prev_ = delta;
    if (growth_ >= kDivergenceWindow) {
      throw Diverged("diverging (gamma too large): consensus delta grew for " +
                     std::to_string(kDivergenceWindow) + " consecutive rounds");
    }
  }

 private:
  bool have_prev_ = false;
  double prev_ = 0.0;
  std::size_t growth_ = 0;
};

// d = A^{-1} v, or the fast elementwise formula with per-call fallback.
Eigen::VectorXd inverse_apply(SolverMode mode, const SpdFactor& factor, const Eigen::VectorXd& c,
                              const Eigen::VectorXd& b, const Eigen::VectorXd& v, bool& fell_back) {
  fell_back = false;
  if (mode == SolverMode::fast_lemma4) {
    if (auto fast = fast_inverse_apply(c, b, v)) return *std::move(fast);
    fell_back = true;
  }
  return solve(factor, v);
}

std::vector<RoundTrace> merge_trace(const RunResult& run, std::vector<RoundTrace> server_side) {
  for (std::size_t k = 0; k < server_side.size() && k < run.rounds.size(); ++k) {
    server_side[k].t = run.rounds[k].t;
    server_side[k].floats_pushed = run.rounds[k].floats_pushed;
    server_side[k].floats_pulled = run.rounds[k].floats_pulled;
    server_side[k].elapsed_s = run.rounds[k].elapsed_s;
  }
  return server_side;
}

std::size_t count_true(const std::vector<char>& flags) {
  std::size_t n = 0;
  for (char f : flags) n += f ? 1 : 0;
  return n;
}

}  // namespace

std::string_view to_string(SolverMode mode) {
  return mode == SolverMode::exact ? "exact" : "fast-lemma4";
}

SolverMode parse_solver_mode(std::string_view text) {
  if (text == "exact") return SolverMode::exact;
  if (text == "fast" || text == "fast-lemma4") return SolverMode::fast_lemma4;
  throw std::invalid_argument("unknown solver mode '" + std::string(text) + "' (expected exact|fast-lemma4)");
}

void TrainConfig::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
  if (!(zeta > 0.0)) throw std::invalid_argument("zeta must be positive");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
  if (sigma && !(*sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
}

Eigen::VectorXd loo_average(const Eigen::VectorXd& mean, const Eigen::VectorXd& member, std::size_t m) {
  if (m < 2) throw std::invalid_argument("leave-one-out average requires m >= 2 (MDD requires m >= 2)");
  if (mean.size() != member.size()) throw std::invalid_argument("loo_average: length mismatch");
  const double md = static_cast<double>(m);
  return (md * mean - member) / (md - 1.0);
}

MddLinearResult mdd_ls_train(std::span<const Dataset> shards, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t m = shards.size();
  if (m < 2) throw std::invalid_argument("MDD requires m >= 2");

  std::vector<LinearShardSystem> systems;
  systems.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (shards[i].empty()) throw std::invalid_argument("shard " + std::to_string(i) + " is empty");
    systems.push_back(prepare_linear_shard(shards[i], cfg.lambda));
  }

  MddLinearResult result;
  std::vector<Eigen::VectorXd> w0(m);
  for (std::size_t i = 0; i < m; ++i) {
    w0[i] = systems[i].solution;
    result.initial_shards.push_back({w0[i]});
    result.setup_floats_pushed += static_cast<std::uint64_t>(w0[i].size());
  }

  Eigen::VectorXd wbar = average_in_order(w0);
  std::vector<Payload> first_pulls(m);
  for (std::size_t i = 0; i < m; ++i) first_pulls[i] = loo_average(wbar, w0[i], m);

  std::vector<char> fell_back(m, 0);
  auto worker = [&](std::size_t i, const Payload& loo) -> Payload {
    bool fb = false;
    Eigen::VectorXd d = inverse_apply(cfg.solver, systems[i].factor, w0[i], systems[i].b, loo, fb);
    fell_back[i] = fb ? 1 : 0;
    return w0[i] - cfg.gamma * d;
  };

  std::vector<RoundTrace> server_trace;
  DivergenceMonitor monitor;
  auto server = [&](std::size_t t, std::span<const Payload> pushes) -> ServerStep {
    Eigen::VectorXd next = average_in_order(pushes);
    RoundTrace rec;
    rec.t = t;
    rec.consensus_delta = (next - wbar).norm();
    rec.diversity = diversity_linear(pushes);
    rec.fast_fallbacks = count_true(fell_back);
    server_trace.push_back(rec);
    wbar = std::move(next);

    ServerStep step;
    if (rec.consensus_delta <= cfg.zeta) {
      step.stop = true;
      return step;
    }
    monitor.observe(rec.consensus_delta);
    step.pulls.reserve(m);
    for (std::size_t i = 0; i < m; ++i) step.pulls.push_back(loo_average(wbar, pushes[i], m));
    return step;
  };

  RoundEngine engine(m, worker, server, cfg.threads);
  RunResult run = engine.run(std::move(first_pulls), cfg.max_iters);

  result.trace = merge_trace(run, std::move(server_trace));
  result.status = run.stopped ? Termination::converged : Termination::max_iters_reached;
  for (auto& w : run.last_pushes) result.shards.push_back({w});
  result.average.w = wbar;
  return result;
}

MddLinearResult mdd_ls_train(const Dataset& ds, const Partition& part, const TrainConfig& cfg) {
  const auto shards = shard_datasets(ds, part);
  return mdd_ls_train(shards, cfg);
}

MddKernelResult mdd_rkhs_train(std::span<const Dataset> shards, const TrainConfig& cfg, const KernelConfig& kernel) {
  cfg.validate();
  if (!(kernel.sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const std::size_t m = shards.size();
  if (m < 2) throw std::invalid_argument("MDD requires m >= 2");

  std::vector<KernelShardSystem> systems;
  systems.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (shards[i].size() < 1) throw std::invalid_argument("shard " + std::to_string(i) + " is empty");
    systems.push_back(prepare_kernel_shard(shards[i], cfg.lambda, kernel));
  }

  // Server-side cross blocks K_{S_i,S_j}; the diagonal reuses each shard's Gram matrix.
  std::vector<std::vector<Eigen::MatrixXd>> blocks(m, std::vector<Eigen::MatrixXd>(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      blocks[i][j] = (j < i) ? Eigen::MatrixXd(blocks[j][i].transpose())
                             : kernel_matrix(systems[i].anchors, systems[j].anchors, kernel);
    }
  }
  auto block = [&](std::size_t i, std::size_t j) -> const Eigen::MatrixXd& {
    return i == j ? systems[i].gram : blocks[i][j];
  };

  // g[i][j] = K_{S_i,S_j} w_j; gbar_i = (1/m) sum_j g[i][j].
  struct CrossState {
    std::vector<std::vector<Eigen::VectorXd>> g;
    std::vector<Eigen::VectorXd> gbar;
  };
  auto cross = [&](std::span<const Payload> ws) {
    CrossState s;
    s.g.assign(m, std::vector<Eigen::VectorXd>(m));
    s.gbar.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) s.g[i][j] = block(i, j) * ws[j];
      s.gbar[i] = average_in_order(s.g[i]);
    }
    return s;
  };
  auto diversity_of = [&](const CrossState& s, std::span<const Payload> ws) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        sum += ws[i].dot(s.g[i][i]) - 2.0 * ws[i].dot(s.g[i][j]) + ws[j].dot(s.g[j][j]);
      }
    }
    return sum / static_cast<double>(m * m);
  };

  MddKernelResult result;
  std::vector<Eigen::VectorXd> w0(m);
  for (std::size_t i = 0; i < m; ++i) {
    w0[i] = systems[i].solution;
    result.initial_coeffs.push_back(w0[i]);
    result.setup_floats_pushed += static_cast<std::uint64_t>(w0[i].size());
  }

  CrossState state = cross(w0);
  std::vector<Payload> first_pulls(m);
  for (std::size_t i = 0; i < m; ++i) first_pulls[i] = loo_average(state.gbar[i], state.g[i][i], m);

  std::vector<char> fell_back(m, 0);
  auto worker = [&](std::size_t i, const Payload& loo) -> Payload {
    bool fb = false;
    Eigen::VectorXd d = inverse_apply(cfg.solver, systems[i].factor, w0[i], systems[i].b, loo, fb);
    fell_back[i] = fb ? 1 : 0;
    return w0[i] - cfg.gamma * d;
  };

  std::vector<RoundTrace> server_trace;
  DivergenceMonitor monitor;
  auto server = [&](std::size_t t, std::span<const Payload> pushes) -> ServerStep {
    CrossState next = cross(pushes);
    RoundTrace rec;
    rec.t = t;
    double delta = 0.0;
    for (std::size_t i = 0; i < m; ++i) delta += (next.gbar[i] - state.gbar[i]).norm();
    rec.consensus_delta = delta / static_cast<double>(m);
    rec.diversity = diversity_of(next, pushes);
    rec.fast_fallbacks = count_true(fell_back);
    server_trace.push_back(rec);
    state = std::move(next);

    ServerStep step;
    if (rec.consensus_delta <= cfg.zeta) {
      step.stop = true;
      return step;
    }
    monitor.observe(rec.consensus_delta);
    step.pulls.reserve(m);
    for (std::size_t i = 0; i < m; ++i) step.pulls.push_back(loo_average(state.gbar[i], state.g[i][i], m));
    return step;
  };

  RoundEngine engine(m, worker, server, cfg.threads);
  RunResult run = engine.run(std::move(first_pulls), cfg.max_iters);

  result.trace = merge_trace(run, std::move(server_trace));
  result.status = run.stopped ? Termination::converged : Termination::max_iters_reached;
  result.model.kernel = kernel;
  for (std::size_t i = 0; i < m; ++i) {
    result.model.shards.push_back({systems[i].anchors, std::move(run.last_pushes[i])});
  }
  return result;
}

MddKernelResult mdd_rkhs_train(const Dataset& ds, const Partition& part, const TrainConfig& cfg,
                               const KernelConfig& kernel) {
  const auto shards = shard_datasets(ds, part);
  return mdd_rkhs_train(shards, cfg, kernel);
}

Eigen::MatrixXd pairwise_sq_distances(std::span<const Eigen::VectorXd> models) {
  const auto m = static_cast<Eigen::Index>(models.size());
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const auto& a = models[static_cast<std::size_t>(i)];
      const auto& b = models[static_cast<std::size_t>(j)];
      if (a.size() != b.size()) throw std::invalid_argument("diversity: models have different dimensions");
      dist(i, j) = dist(j, i) = (a - b).squaredNorm();
    }
  }
  return dist;
}

double diversity_linear(std::span<const Eigen::VectorXd> models) {
  if (models.size() < 2) throw std::invalid_argument("diversity needs at least two models");
  const double m = static_cast<double>(models.size());
  return pairwise_sq_distances(models).sum() / (m * m);
}

double diversity_linear(std::span<const LinearModel> models) {
  std::vector<Eigen::VectorXd> ws;
  ws.reserve(models.size());
  for (const auto& model : models) ws.push_back(model.w);
  return diversity_linear(ws);
}

Eigen::MatrixXd pairwise_sq_distances(const ShardedKernelModel& model) {
  const std::size_t m = model.shards.size();
  // inner[i][j] = w_i^T K(S_i, S_j) w_j
  Eigen::MatrixXd inner(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const auto& si = model.shards[i];
      const auto& sj = model.shards[j];
      const double v = si.coeffs.dot(kernel_matrix(si.anchors, sj.anchors, model.kernel) * sj.coeffs);
      inner(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      inner(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(inner.rows(), inner.cols());
  for (Eigen::Index i = 0; i < inner.rows(); ++i) {
    for (Eigen::Index j = 0; j < inner.cols(); ++j) {
      if (i != j) dist(i, j) = inner(i, i) - 2.0 * inner(i, j) + inner(j, j);
    }
  }
  return dist;
}

double diversity_rkhs(const ShardedKernelModel& model) {
  if (model.shards.size() < 2) throw std::invalid_argument("diversity needs at least two models");
  const double m = static_cast<double>(model.shards.size());
  return pairwise_sq_distances(model).sum() / (m * m);
}

void write_trace_csv(std::span<const RoundTrace> trace, std::ostream& out) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << kTraceCsvHeader << '\n';
  for (const auto& r : trace) {
    out << r.t << ',' << r.consensus_delta << ',' << r.diversity << ',' << r.floats_pushed << ','
        << r.floats_pulled << ',' << r.elapsed_s << '\n';
  }
  out.precision(old_precision);
}

}  // namespace mdd

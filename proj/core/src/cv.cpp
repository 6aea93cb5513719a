#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "mdd/eval.hpp"

namespace mdd {

namespace {

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<double> powers(double base, int lo, int hi) {
  std::vector<double> out;
  for (int i = lo; i <= hi; ++i) out.push_back(std::pow(base, i));
  return out;
}

std::uint64_t dims_of(std::span<const Dataset> shards) {
  std::uint64_t n = 0;
  for (const auto& s : shards) n += static_cast<std::uint64_t>(s.dim());
  return n;
}

std::uint64_t sizes_of(std::span<const Dataset> shards) {
  std::uint64_t n = 0;
  for (const auto& s : shards) n += static_cast<std::uint64_t>(s.size());
  return n;
}

std::uint64_t mdd_comm(std::uint64_t setup, const std::vector<RoundTrace>& trace) {
  if (trace.empty()) return setup;
  return setup + trace.back().floats_pushed + trace.back().floats_pulled;
}

TrainConfig mdd_config(const MethodSpec& spec, const HyperParams& hp) {
  TrainConfig cfg;
  cfg.lambda = hp.lambda;
  cfg.gamma = hp.gamma.value_or(0.0);
  cfg.zeta = spec.zeta;
  cfg.max_iters = spec.max_iters;
  cfg.solver = spec.solver;
  cfg.sigma = hp.sigma;
  return cfg;
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < threads; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

bool MethodSpec::distributed() const {
  return kind == MethodKind::drr || kind == MethodKind::kdrr || kind == MethodKind::mdd_ls ||
         kind == MethodKind::mdd_rkhs;
}

bool MethodSpec::uses_gamma() const { return kind == MethodKind::mdd_ls || kind == MethodKind::mdd_rkhs; }

bool MethodSpec::uses_sigma() const {
  return kind == MethodKind::krr || kind == MethodKind::kdrr || kind == MethodKind::mdd_rkhs;
}

std::string MethodSpec::name() const {
  std::string out(kind_name(kind));
  if (distributed()) out += "-" + std::to_string(m);
  return out;
}

std::string_view kind_name(MethodKind kind) {
  switch (kind) {
    case MethodKind::rr: return "rr";
    case MethodKind::drr: return "drr";
    case MethodKind::krr: return "krr";
    case MethodKind::kdrr: return "kdrr";
    case MethodKind::mdd_ls: return "mdd-ls";
    case MethodKind::mdd_rkhs: return "mdd-rkhs";
  }
  return "?";
}

MethodKind parse_method_kind(std::string_view text) {
  for (auto kind : {MethodKind::rr, MethodKind::drr, MethodKind::krr, MethodKind::kdrr, MethodKind::mdd_ls,
                    MethodKind::mdd_rkhs}) {
    if (text == kind_name(kind)) return kind;
  }
  throw std::invalid_argument("unknown method '" + std::string(text) +
                              "' (expected rr|drr|krr|kdrr|mdd-ls|mdd-rkhs)");
}

MethodSpec parse_method(std::string_view text, std::size_t default_m) {
  MethodSpec spec;
  std::string_view base = text;
  std::optional<std::size_t> m;
  if (auto dash = text.rfind('-'); dash != std::string_view::npos) {
    std::string_view tail = text.substr(dash + 1);
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), value);
    if (!tail.empty() && ec == std::errc{} && ptr == tail.data() + tail.size()) {
      base = text.substr(0, dash);
      m = value;
    }
  }
  spec.kind = parse_method_kind(base);
  if (spec.distributed()) {
    spec.m = m.value_or(default_m);
    if (spec.m < 1) throw std::invalid_argument("method '" + std::string(text) + "': m must be positive");
    if (spec.uses_gamma() && spec.m < 2) {
      throw std::invalid_argument("method '" + std::string(text) + "': MDD requires m >= 2");
    }
  } else {
    if (m) throw std::invalid_argument("method '" + std::string(base) + "' takes no shard count");
    spec.m = 1;
  }
  return spec;
}

Grids Grids::defaults() {
  Grids g;
  g.lambdas = powers(10.0, -6, 3);
  g.gammas = powers(10.0, -6, 3);
  g.sigmas = powers(2.0, -10, 10);
  return g;
}

FitOutcome fit_and_predict(const Dataset& train, const Eigen::MatrixXd& queries, const MethodSpec& spec,
                           const HyperParams& hp, std::uint64_t seed) {
  FitOutcome out;
  const KernelConfig kernel{hp.sigma.value_or(1.0)};
  if (spec.uses_sigma() && !hp.sigma) throw std::invalid_argument(spec.name() + " needs sigma");

  std::vector<Dataset> shards;
  if (spec.distributed()) shards = shard_datasets(train, partition(train, spec.m, seed));

  switch (spec.kind) {
    case MethodKind::rr:
      out.predictions = predict(train_rr(train, hp.lambda), queries);
      break;
    case MethodKind::drr:
      out.predictions = predict(train_drr(shards, hp.lambda).average, queries);
      out.floats_comm = dims_of(shards);
      break;
    case MethodKind::krr:
      out.predictions = predict(train_krr(train, hp.lambda, kernel, spec.krr_max_samples), queries);
      break;
    case MethodKind::kdrr:
      out.predictions = predict(train_kdrr(shards, hp.lambda, kernel), queries);
      out.floats_comm = sizes_of(shards);
      break;
    case MethodKind::mdd_ls: {
      auto fit = mdd_ls_train(shards, mdd_config(spec, hp));
      out.predictions = predict(fit.average, queries);
      out.floats_comm = mdd_comm(fit.setup_floats_pushed, fit.trace);
      break;
    }
    case MethodKind::mdd_rkhs: {
      auto fit = mdd_rkhs_train(shards, mdd_config(spec, hp), kernel);
      out.predictions = predict(fit.model, queries);
      out.floats_comm = mdd_comm(fit.setup_floats_pushed, fit.trace);
      break;
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k-fold CV needs k >= 2");
  if (k > n) throw std::invalid_argument("k-fold CV: k exceeds the number of samples");
  return partition(n, k, seed).shards;
}

CvResult kfold_cv(const Dataset& train, const MethodSpec& spec, const Grids& grids, const CvOptions& opts) {
  const auto lambdas = sorted_unique(grids.lambdas);
  const auto gammas = spec.uses_gamma() ? sorted_unique(grids.gammas) : std::vector<double>{};
  const auto sigmas = spec.uses_sigma() ? sorted_unique(grids.sigmas) : std::vector<double>{};
  if (lambdas.empty()) throw std::invalid_argument("CV: lambda grid is empty");
  if (spec.uses_gamma() && gammas.empty()) throw std::invalid_argument("CV: gamma grid is empty");
  if (spec.uses_sigma() && sigmas.empty()) throw std::invalid_argument("CV: sigma grid is empty");

  // Cells in tie-break order: lambda, then gamma, then sigma, ascending.
  std::vector<HyperParams> cells;
  for (double l : lambdas) {
    const std::size_t ng = spec.uses_gamma() ? gammas.size() : 1;
    for (std::size_t gi = 0; gi < ng; ++gi) {
      const std::size_t ns = spec.uses_sigma() ? sigmas.size() : 1;
      for (std::size_t si = 0; si < ns; ++si) {
        HyperParams hp{l, std::nullopt, std::nullopt};
        if (spec.uses_gamma()) hp.gamma = gammas[gi];
        if (spec.uses_sigma()) hp.sigma = sigmas[si];
        cells.push_back(hp);
      }
    }
  }

  const auto folds = kfold_indices(train.size(), opts.folds, opts.seed);
  CvResult result;
  result.lambda_points = lambdas.size();
  result.gamma_points = gammas.size();
  result.sigma_points = sigmas.size();
  result.cells = cells.size();
  result.folds = folds.size();
  result.fits = cells.size() * folds.size();
  result.best = cells.front();

  if (opts.dry_run) {
    result.best_rmse = std::numeric_limits<double>::quiet_NaN();
    return result;
  }

  struct FoldData {
    Dataset fit;
    Dataset held_out;
  };
  std::vector<FoldData> fold_data;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> rest;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) rest.insert(rest.end(), folds[g].begin(), folds[g].end());
    }
    fold_data.push_back({train.subset(rest), train.subset(folds[f])});
  }

  std::vector<double> scores(cells.size(), 0.0);
  parallel_for(cells.size(), opts.threads, [&](std::size_t c) {
    double total = 0.0;
    for (const auto& fd : fold_data) {
      double err = std::numeric_limits<double>::infinity();
      try {
        const auto outcome = fit_and_predict(fd.fit, fd.held_out.features, spec, cells[c], opts.seed);
        err = rmse(outcome.predictions, fd.held_out.targets);
      } catch (const Diverged&) {
      } catch (const NotPositiveDefinite&) {
      }
      if (!std::isfinite(err)) {
        total = std::numeric_limits<double>::infinity();
        break;
      }
      total += err;
    }
    scores[c] = total / static_cast<double>(fold_data.size());
  });

  result.best_rmse = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (scores[c] < result.best_rmse) {
      result.best_rmse = scores[c];
      result.best = cells[c];
    }
  }
  return result;
}

}  // namespace mdd

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "mdd/eval.hpp"

namespace mdd {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void summarize(BenchmarkReport& report) {
  const auto values = report.rmse_values();
  if (values.empty()) {
    report.mean_rmse = std::numeric_limits<double>::quiet_NaN();
    report.std_rmse = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  report.mean_rmse = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - report.mean_rmse) * (v - report.mean_rmse);
  report.std_rmse = values.size() < 2 ? 0.0 : std::sqrt(ss / static_cast<double>(values.size() - 1));
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::vector<double> BenchmarkReport::rmse_values() const {
  std::vector<double> out;
  for (const auto& t : trials) {
    if (std::isfinite(t.rmse)) out.push_back(t.rmse);
  }
  return out;
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t trial) {
  // splitmix64 finalizer over (master, trial)
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(trial) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

BenchmarkOutput run_benchmark(const Dataset& ds, std::span<const MethodSpec> methods, const BenchmarkOptions& opts) {
  if (opts.trials < 1) throw std::invalid_argument("benchmark needs at least one trial");
  if (methods.empty()) throw std::invalid_argument("benchmark needs at least one method");

  BenchmarkOutput output;
  output.counts.folds = opts.folds;
  for (const auto& spec : methods) {
    output.reports.push_back({spec.name(), {}, 0.0, 0.0});
    output.counts.methods.push_back({spec.name(), 0, 0, 0, 0});
  }

  for (std::size_t trial = 0; trial < opts.trials; ++trial) {
    const std::uint64_t seed = trial_seed(opts.seed, trial);
    auto [train, test] = split_train_test(ds, opts.train_fraction, seed);
    if (opts.standardize) {
      auto st = standardize(train, test);
      train = std::move(st.train);
      test = std::move(st.test);
    }
    ++output.counts.trials;

    for (std::size_t k = 0; k < methods.size(); ++k) {
      const auto& spec = methods[k];
      TrialResult tr;
      tr.trial = trial;
      tr.rmse = std::numeric_limits<double>::quiet_NaN();
      try {
        const auto cv_start = std::chrono::steady_clock::now();
        const auto cv = kfold_cv(train, spec, opts.grids, {opts.folds, seed, opts.threads, opts.dry_run});
        tr.cv_time_s = seconds_since(cv_start);
        tr.params = cv.best;

        auto& counts = output.counts.methods[k];
        counts.lambda_points = cv.lambda_points;
        counts.gamma_points = cv.gamma_points;
        counts.sigma_points = cv.sigma_points;
        counts.cv_fits += cv.fits;

        if (!opts.dry_run) {
          const auto fit_start = std::chrono::steady_clock::now();
          const auto outcome = fit_and_predict(train, test.features, spec, tr.params, seed);
          tr.fit_time_s = seconds_since(fit_start);
          tr.floats_comm = outcome.floats_comm;
          tr.rmse = rmse(outcome.predictions, test.targets);
        }
      } catch (const std::exception& e) {
        tr.error = e.what();
      }
      output.reports[k].trials.push_back(std::move(tr));
    }
  }
  for (auto& report : output.reports) summarize(report);
  return output;
}

void write_report_csv(std::span<const BenchmarkReport> reports, std::ostream& out) {
  std::ostringstream buf;
  buf.precision(std::numeric_limits<double>::max_digits10);
  buf << kReportCsvHeader << '\n';
  for (const auto& report : reports) {
    for (const auto& t : report.trials) {
      buf << report.method << ',' << t.trial << ',';
      if (std::isfinite(t.rmse)) buf << t.rmse;
      buf << ',' << t.fit_time_s << ',' << t.floats_comm << ',' << t.params.lambda << ',';
      if (t.params.gamma) buf << *t.params.gamma;
      buf << ',';
      if (t.params.sigma) buf << *t.params.sigma;
      buf << '\n';
    }
  }
  out << buf.str();
}

void write_report_json(const BenchmarkOutput& output, std::ostream& out) {
  using nlohmann::json;
  json doc;
  json reports = json::array();
  for (const auto& report : output.reports) {
    json trials = json::array();
    for (const auto& t : report.trials) {
      json jt{{"trial", t.trial},
              {"rmse", number_or_null(t.rmse)},
              {"time_s", t.fit_time_s},
              {"cv_time_s", t.cv_time_s},
              {"floats_comm", t.floats_comm},
              {"lambda", t.params.lambda},
              {"gamma", t.params.gamma ? json(*t.params.gamma) : json(nullptr)},
              {"sigma", t.params.sigma ? json(*t.params.sigma) : json(nullptr)}};
      if (!t.error.empty()) jt["error"] = t.error;
      trials.push_back(std::move(jt));
    }
    reports.push_back({{"method", report.method},
                       {"mean_rmse", number_or_null(report.mean_rmse)},
                       {"std_rmse", number_or_null(report.std_rmse)},
                       {"trials", std::move(trials)}});
  }
  doc["reports"] = std::move(reports);
  json methods = json::array();
  for (const auto& m : output.counts.methods) {
    methods.push_back({{"method", m.method},
                       {"lambda_points", m.lambda_points},
                       {"gamma_points", m.gamma_points},
                       {"sigma_points", m.sigma_points},
                       {"cv_fits", m.cv_fits}});
  }
  doc["protocol"] = {{"trials", output.counts.trials}, {"folds", output.counts.folds}, {"methods", methods}};
  out << doc.dump(2) << '\n';
}

}  // namespace mdd

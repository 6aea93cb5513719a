#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "mdd/eval.hpp"

namespace mdd {

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  if (pred.size() != target.size()) throw std::invalid_argument("rmse: length mismatch");
  if (pred.size() == 0) throw std::invalid_argument("rmse: empty input");
  return std::sqrt((pred - target).squaredNorm() / static_cast<double>(pred.size()));
}

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // Bessel-corrected
  double n = 0.0;
};

Moments moments(std::span<const double> x) {
  Moments mo;
  mo.n = static_cast<double>(x.size());
  for (double v : x) mo.mean += v;
  mo.mean /= mo.n;
  for (double v : x) mo.var += (v - mo.mean) * (v - mo.mean);
  mo.var /= (mo.n - 1.0);
  return mo;
}

}  // namespace

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_t_test: each sample needs at least two values");
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  const double ra = ma.var / ma.n;
  const double rb = mb.var / mb.n;
  const double se2 = ra + rb;
  const double diff = ma.mean - mb.mean;

  WelchResult out;
  if (se2 == 0.0) {
    if (diff == 0.0) return out;  // t = 0, p = 1
    out.t = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    out.df = ma.n + mb.n - 2.0;
    out.p = 0.0;
    out.significant = true;
    return out;
  }
  out.t = diff / std::sqrt(se2);
  out.df = se2 * se2 / (ra * ra / (ma.n - 1.0) + rb * rb / (mb.n - 1.0));
  const boost::math::students_t_distribution<double> dist(out.df);
  out.p = 2.0 * boost::math::cdf(dist, -std::abs(out.t));
  out.significant = out.p < 0.05;
  return out;
}

}  // namespace mdd

#include "mdd/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace mdd {

SpdFactor spd_factorize(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("spd_factorize: matrix is not square");
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) throw NotPositiveDefinite(static_cast<std::size_t>(j));
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return SpdFactor(std::move(l));
}

Eigen::MatrixXd solve(const SpdFactor& f, const Eigen::MatrixXd& rhs) {
  const auto& l = f.lower();
  const Eigen::Index n = l.rows();
  if (rhs.rows() != n) {
    throw std::invalid_argument("solve: right-hand side has " + std::to_string(rhs.rows()) +
                                " rows, factor has dimension " + std::to_string(n));
  }
  Eigen::MatrixXd x = rhs;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    // L z = rhs
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = x(i, c);
      for (Eigen::Index k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      x(i, c) = s / l(i, i);
    }
    // L^T x = z
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      double s = x(i, c);
      for (Eigen::Index k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
      x(i, c) = s / l(i, i);
    }
  }
  return x;
}

Eigen::VectorXd solve(const SpdFactor& f, const Eigen::VectorXd& rhs) {
  Eigen::MatrixXd as_matrix = rhs;
  return solve(f, as_matrix).col(0);
}

RidgeSystem linear_gram(const Eigen::MatrixXd& samples, const Eigen::VectorXd& targets, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("linear_gram: lambda must be positive");
  if (samples.rows() < 1) throw std::invalid_argument("linear_gram: shard is empty");
  if (targets.size() != samples.rows()) throw std::invalid_argument("linear_gram: target length mismatch");
  const double inv_n = 1.0 / static_cast<double>(samples.rows());
  RidgeSystem sys;
  sys.a = inv_n * (samples.transpose() * samples);
  sys.a.diagonal().array() += lambda;
  sys.b = inv_n * (samples.transpose() * targets);
  return sys;
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const KernelConfig& cfg) {
  if (!(cfg.sigma > 0.0)) throw std::invalid_argument("kernel_matrix: sigma must be positive");
  if (a.cols() != b.cols()) throw std::invalid_argument("kernel_matrix: feature dimensions differ");
  const double scale = -1.0 / (2.0 * cfg.sigma * cfg.sigma);
  Eigen::VectorXd sq_a(a.rows());
  Eigen::VectorXd sq_b(b.rows());
  for (Eigen::Index p = 0; p < a.rows(); ++p) sq_a(p) = a.row(p).dot(a.row(p));
  for (Eigen::Index q = 0; q < b.rows(); ++q) sq_b(q) = b.row(q).dot(b.row(q));
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index q = 0; q < b.rows(); ++q) {
    for (Eigen::Index p = 0; p < a.rows(); ++p) {
      const double dist = std::max(0.0, sq_a(p) + sq_b(q) - 2.0 * a.row(p).dot(b.row(q)));
      k(p, q) = std::exp(scale * dist);
    }
  }
  return k;
}

std::optional<Eigen::VectorXd> fast_inverse_apply(const Eigen::VectorXd& c, const Eigen::VectorXd& b,
                                                  const Eigen::VectorXd& d) {
  if (c.size() != b.size() || d.size() != b.size()) {
    throw std::invalid_argument("fast_inverse_apply: vector lengths differ");
  }
  const double threshold = kFastApplyGuard * b.lpNorm<Eigen::Infinity>();
  for (Eigen::Index k = 0; k < b.size(); ++k) {
    if (std::abs(b(k)) <= threshold) return std::nullopt;
  }
  const double dc = d.dot(c);
  return Eigen::VectorXd((dc / b.array()).matrix());
}

}  // namespace mdd

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mdd {

class NotPositiveDefinite : public std::runtime_error {
 public:
  explicit NotPositiveDefinite(std::size_t pivot)
      : std::runtime_error("matrix is not positive definite (pivot " + std::to_string(pivot) + ")"),
        pivot_(pivot) {}
  [[nodiscard]] std::size_t pivot() const { return pivot_; }

 private:
  std::size_t pivot_;
};

/// Lower-triangular Cholesky factor L with A = L L^T.
class SpdFactor {
 public:
  SpdFactor() = default;
  explicit SpdFactor(Eigen::MatrixXd lower) : lower_(std::move(lower)) {}

  [[nodiscard]] Eigen::Index dimension() const { return lower_.rows(); }
  [[nodiscard]] const Eigen::MatrixXd& lower() const { return lower_; }

 private:
  Eigen::MatrixXd lower_;
};

/// Gaussian kernel bandwidth.
struct KernelConfig {
  double sigma = 1.0;
};

/// Cholesky decomposition of a symmetric positive-definite matrix. Only the
/// lower triangle of `a` is read.
[[nodiscard]] SpdFactor spd_factorize(const Eigen::MatrixXd& a);

[[nodiscard]] Eigen::VectorXd solve(const SpdFactor& f, const Eigen::VectorXd& rhs);
[[nodiscard]] Eigen::MatrixXd solve(const SpdFactor& f, const Eigen::MatrixXd& rhs);

/// Normal-equation pieces of the shard-local ridge problem.
struct RidgeSystem {
  Eigen::MatrixXd a;  // (1/n) X^T X + lambda I
  Eigen::VectorXd b;  // (1/n) X^T y
};

/// `samples` holds one sample per row (n x d).
[[nodiscard]] RidgeSystem linear_gram(const Eigen::MatrixXd& samples, const Eigen::VectorXd& targets,
                                      double lambda);

/// K(p, q) = exp(-|a_p - b_q|^2 / (2 sigma^2)); rows of `a` and `b` are samples.
/// Squared distances are formed as |a|^2 + |b|^2 - 2 a.b and clamped at zero.
[[nodiscard]] Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                            const KernelConfig& cfg);

/// Relative zero guard for fast_inverse_apply: |b_k| <= kFastApplyGuard * |b|_inf
/// makes the fast path unavailable.
inline constexpr double kFastApplyGuard = 1e-12;

/// Computes r_k = (d . c) / b_k elementwise. Returns nullopt when some b_k is
/// inside the zero guard, in which case callers must solve exactly.
///
/// Note: r is NOT A^{-1} d for a general SPD A with c = A^{-1} b. The only
/// identity that holds by construction is r . b = l (d . c); the two agree
/// exactly when l == 1.
[[nodiscard]] std::optional<Eigen::VectorXd> fast_inverse_apply(const Eigen::VectorXd& c,
                                                                const Eigen::VectorXd& b,
                                                                const Eigen::VectorXd& d);

}  // namespace mdd

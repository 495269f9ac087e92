#ifndef ADAPTMH_LINALG_HPP
#define ADAPTMH_LINALG_HPP

#include "adaptmh/core.hpp"

#include <Eigen/Cholesky>

namespace adaptmh {

// Symmetric positive definite matrix with a cached lower Cholesky factor.
//
// Construction symmetrizes the input (it must already be symmetric to
// 1e-8 relative) and factors it. A failed factorization is repaired by
// adding 1e-10 * trace/dim to the diagonal, escalating 10x per retry for
// up to three retries. `entries()` is always the matrix that was factored.
class CovMatrix {
 public:
  CovMatrix() = default;

  explicit CovMatrix(const Matrix& a) { assign(a); }

  static CovMatrix identity(Eigen::Index dim) {
    return CovMatrix(Matrix::Identity(dim, dim));
  }

  static CovMatrix diagonal(const Vector& d) {
    return CovMatrix(Matrix(d.asDiagonal()));
  }

  Eigen::Index dim() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  const Matrix& chol_lower() const { return lower_; }
  double log_det() const { return log_det_; }
  double jitter() const { return jitter_; }

  // Squared Mahalanobis norm of `v` under this matrix.
  double mahalanobis_sq(const Vector& v) const {
    require(v.size() == dim(), "mahalanobis: dimension mismatch");
    Vector w = v;
    lower_.triangularView<Eigen::Lower>().solveInPlace(w);
    return w.squaredNorm();
  }

  // L * v, the map from standard normal draws to N(0, entries).
  Vector transform(const Vector& v) const {
    return lower_.triangularView<Eigen::Lower>() * v;
  }

  CovMatrix scaled(double factor) const {
    require(factor > 0.0, "CovMatrix::scaled: factor must be positive");
    CovMatrix out;
    out.entries_ = entries_ * factor;
    out.lower_ = lower_ * std::sqrt(factor);
    out.log_det_ = log_det_ + static_cast<double>(dim()) * std::log(factor);
    out.jitter_ = jitter_ * factor;
    return out;
  }

  // Correlation matrix of this covariance (unit diagonal).
  CovMatrix correlation() const {
    const Vector inv_sd = entries_.diagonal().cwiseSqrt().cwiseInverse();
    Matrix c = inv_sd.asDiagonal() * entries_ * inv_sd.asDiagonal();
    c.diagonal().setOnes();
    return CovMatrix(c);
  }

 private:
  void assign(const Matrix& a) {
    require(a.rows() == a.cols() && a.rows() > 0, "CovMatrix: matrix must be square and non-empty");
    const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
    if (!a.allFinite()) throw factorization_error("CovMatrix: non-finite entries");
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
      throw contract_violation("CovMatrix: matrix is not symmetric");
    Matrix sym = 0.5 * (a + a.transpose());

    const double n = static_cast<double>(sym.rows());
    double base = sym.trace() / n;
    if (!(base > 0.0)) base = 1.0;
    double added = 0.0;
    for (int attempt = 0; attempt <= 3; ++attempt) {
      if (attempt > 0) {
        const double step = 1e-10 * base * std::pow(10.0, attempt - 1);
        sym.diagonal().array() += step - added;
        added = step;
      }
      Eigen::LLT<Matrix> llt(sym);
      if (llt.info() == Eigen::Success) {
        Matrix l = llt.matrixL();
        if (l.diagonal().minCoeff() > 0.0) {
          entries_ = std::move(sym);
          lower_ = std::move(l);
          log_det_ = 2.0 * lower_.diagonal().array().log().sum();
          jitter_ = added;
          return;
        }
      }
    }
    throw factorization_error("CovMatrix: matrix is not positive definite after jitter repair");
  }

  Matrix entries_;
  Matrix lower_;
  double log_det_ = 0.0;
  double jitter_ = 0.0;
};

// Streaming mean and covariance (Welford co-moment update).
class RunningMoments {
 public:
  RunningMoments() = default;
  explicit RunningMoments(Eigen::Index dim)
      : mean_(Vector::Zero(dim)), comoment_(Matrix::Zero(dim, dim)) {}

  void push(const Vector& x) {
    require(x.size() == mean_.size(), "RunningMoments: dimension mismatch");
    ++count_;
    const Vector delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    comoment_.noalias() += delta * (x - mean_).transpose();
  }

  std::size_t count() const { return count_; }
  const Vector& mean() const { return mean_; }

  // Sample covariance with divisor n - 1 (zero matrix for n < 2).
  Matrix covariance() const {
    if (count_ < 2) return Matrix::Zero(mean_.size(), mean_.size());
    Matrix c = comoment_ / static_cast<double>(count_ - 1);
    return 0.5 * (c + c.transpose());
  }

 private:
  std::size_t count_ = 0;
  Vector mean_;
  Matrix comoment_;
};

// Column means and maximum-likelihood (divisor n) covariance of row points.
inline std::pair<Vector, Matrix> sample_moments(const RowsRef& points) {
  const double n = static_cast<double>(points.rows());
  Vector mean = points.colwise().mean();
  Matrix centered = points.rowwise() - mean.transpose();
  Matrix cov = (centered.transpose() * centered) / n;
  return {mean, 0.5 * (cov + cov.transpose())};
}

}  // namespace adaptmh

#endif  // ADAPTMH_LINALG_HPP

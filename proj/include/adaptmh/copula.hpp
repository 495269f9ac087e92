#ifndef ADAPTMH_COPULA_HPP
#define ADAPTMH_COPULA_HPP

#include "adaptmh/core.hpp"
#include "adaptmh/dists.hpp"
#include "adaptmh/linalg.hpp"
#include "adaptmh/mixture.hpp"

#include <array>
#include <vector>

namespace adaptmh {

inline constexpr std::array<double, 4> kCopulaDofGrid = {3.0, 5.0, 10.0, 1000.0};
inline constexpr double kTailClamp = 1e-12;

// t copula joined to univariate mixture-of-normals marginals.
struct TCopulaModel {
  Eigen::Index dim = 0;
  std::vector<MixtureOfNormals> marginals;
  CovMatrix corr;
  double dof = 1000.0;
  // Profile log-likelihood at each grid value from the last fit (may be empty).
  std::vector<double> profile;

  void validate() const {
    require(dim >= 1, "TCopulaModel: dim must be positive");
    require(static_cast<Eigen::Index>(marginals.size()) == dim, "TCopulaModel: one marginal per coordinate");
    require(corr.dim() == dim, "TCopulaModel: correlation dimension mismatch");
    require((corr.entries().diagonal().array() - 1.0).abs().maxCoeff() <= 1e-12,
            "TCopulaModel: correlation diagonal must be one");
    require(std::find(kCopulaDofGrid.begin(), kCopulaDofGrid.end(), dof) != kCopulaDofGrid.end(),
            "TCopulaModel: dof must lie in the grid {3, 5, 10, 1000}");
  }
};

// ---------------------------------------------------------------------------
// Marginal CDF and its inverse
// ---------------------------------------------------------------------------

inline double marginal_cdf(double x, const MixtureOfNormals& m) { return mixture_cdf_sf_1d(x, m).first; }

namespace detail {

// Solves F(x) = p (upper == false) or S(x) = p (upper == true) for a
// univariate mixture by Newton with a bisection fallback inside a bracket
// grown geometrically from the mixture mean.
inline double mixture_tail_inverse(double p, bool upper, const MixtureOfNormals& m) {
  double mean = 0.0, second = 0.0;
  for (std::size_t c = 0; c < m.components(); ++c) {
    const double mu = m.means[c][0];
    mean += m.weights[c] * mu;
    second += m.weights[c] * (m.covs[c].entries()(0, 0) + mu * mu);
  }
  const double sd = std::sqrt(std::max(second - mean * mean, 1e-300));
  const auto tail = [&](double x) {
    const auto [lo, hi] = mixture_cdf_sf_1d(x, m);
    return upper ? hi : lo;
  };
  // f(x) = tail(x) - p is increasing in x for the lower tail, decreasing for the upper.
  const auto excess = [&](double x) { return upper ? p - tail(x) : tail(x) - p; };

  double half = 8.0 * sd;
  double a = mean - half;
  double b = mean + half;
  for (int grow = 0; grow < 200 && excess(a) > 0.0; ++grow) {
    half *= 2.0;
    a = mean - half;
  }
  half = 8.0 * sd;
  for (int grow = 0; grow < 200 && excess(b) < 0.0; ++grow) {
    half *= 2.0;
    b = mean + half;
  }

  const double z = upper ? -norm_quantile(std::min(p, 0.5)) : norm_quantile(std::min(p, 0.5));
  double x = std::clamp(mean + sd * z, a, b);
  for (int iter = 0; iter < 100; ++iter) {
    const double f = excess(x);
    if (std::abs(f) <= 1e-13 * p) return x;
    if (f > 0.0) b = x; else a = x;
    const double dens = mixture_pdf_1d(x, m);
    double next = x - f / dens;
    if (!std::isfinite(next) || next <= a || next >= b) next = 0.5 * (a + b);
    if (std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x))) return next;
    x = next;
  }
  return x;
}

}  // namespace detail

inline double marginal_invcdf(double p, const MixtureOfNormals& m) {
  require(p > 0.0 && p < 1.0, "marginal_invcdf: p must lie in (0, 1)");
  if (p > 0.5) return detail::mixture_tail_inverse(1.0 - p, true, m);
  return detail::mixture_tail_inverse(p, false, m);
}

// ---------------------------------------------------------------------------
// Copula-scale transforms
// ---------------------------------------------------------------------------

namespace detail {

// z = T_nu^-1(F(x)) using whichever tail is smaller, clamped at 1e-12.
inline double to_z_1d(double x, const MixtureOfNormals& m, double nu) {
  const auto [lo, hi] = mixture_cdf_sf_1d(x, m);
  if (lo <= hi) return t_invcdf_1d(std::clamp(lo, kTailClamp, 0.5), nu);
  return -t_invcdf_1d(std::clamp(hi, kTailClamp, 0.5), nu);
}

inline double to_x_1d(double z, const MixtureOfNormals& m, double nu) {
  if (z <= 0.0) return mixture_tail_inverse(std::max(t_cdf_1d(z, nu), kTailClamp), false, m);
  return mixture_tail_inverse(std::max(t_cdf_1d(-z, nu), kTailClamp), true, m);
}

}  // namespace detail

inline Vector to_z(const Vector& x, const TCopulaModel& model) {
  require(x.size() == model.dim, "to_z: dimension mismatch");
  Vector z(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j)
    z[j] = detail::to_z_1d(x[j], model.marginals[static_cast<std::size_t>(j)], model.dof);
  return z;
}

inline Vector to_x(const Vector& z, const TCopulaModel& model) {
  require(z.size() == model.dim, "to_x: dimension mismatch");
  Vector x(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j)
    x[j] = detail::to_x_1d(z[j], model.marginals[static_cast<std::size_t>(j)], model.dof);
  return x;
}

namespace detail {

inline double copula_kernel(const Vector& z, const CovMatrix& corr, double nu) {
  double s = mvt_logpdf_centered(z, corr, nu);
  for (Eigen::Index j = 0; j < z.size(); ++j) s -= t_logpdf_1d(z[j], nu);
  return s;
}

}  // namespace detail

inline double copula_logpdf(const Vector& x, const TCopulaModel& model) {
  const Vector z = to_z(x, model);
  double s = detail::copula_kernel(z, model.corr, model.dof);
  for (Eigen::Index j = 0; j < x.size(); ++j)
    s += mixture_logpdf_1d(x[j], model.marginals[static_cast<std::size_t>(j)]);
  return s;
}

inline Vector copula_sample(const TCopulaModel& model, Rng& rng) {
  const MvtParams joint(Vector::Zero(model.dim), model.corr, model.dof);
  return to_x(mvt_sample(joint, rng), model);
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

// Product-moment correlation of row points, repaired to PD with unit diagonal.
inline CovMatrix sample_correlation(const RowsRef& points) {
  const auto [mean, cov] = sample_moments(points);
  Vector sd = cov.diagonal().cwiseSqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (!(sd[j] > 0.0)) sd[j] = 1.0;
  Matrix c = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
  c.diagonal().setOnes();
  CovMatrix repaired(c);
  if (repaired.jitter() == 0.0) return repaired;
  return repaired.correlation();
}

// Marginals by fit_marginal; correlation of the z's transformed under the
// incumbent dof; dof by maximizing the copula log-likelihood over the grid
// with the marginals and correlation held fixed.
inline TCopulaModel fit_t_copula(const RowsRef& points, Rng& rng, double incumbent_dof = 1000.0) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  require(d >= 1, "fit_t_copula: no coordinates");
  require(n >= 10 * d, "fit_t_copula: need at least 10 * dim points");

  TCopulaModel model;
  model.dim = d;
  // Tail probabilities: sign +1 means the upper tail was smaller.
  Matrix tail_p(n, d);
  Eigen::MatrixXi tail_sign(n, d);
  double marginal_ll = 0.0;
  std::vector<double> column(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = points(i, j);
    model.marginals.push_back(fit_marginal(column, rng));
    const auto& m = model.marginals.back();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto [lo, hi] = mixture_cdf_sf_1d(points(i, j), m);
      if (lo <= hi) {
        tail_p(i, j) = std::clamp(lo, kTailClamp, 0.5);
        tail_sign(i, j) = -1;
      } else {
        tail_p(i, j) = std::clamp(hi, kTailClamp, 0.5);
        tail_sign(i, j) = 1;
      }
      marginal_ll += mixture_logpdf_1d(points(i, j), m);
    }
  }

  const auto transform = [&](double nu) {
    Matrix z(n, d);
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        z(i, j) = -tail_sign(i, j) * detail::t_lower_quantile(tail_p(i, j), nu);
    return z;
  };

  double current = incumbent_dof;
  if (std::find(kCopulaDofGrid.begin(), kCopulaDofGrid.end(), current) == kCopulaDofGrid.end()) current = 1000.0;
  const Matrix z_current = transform(current);
  model.corr = sample_correlation(z_current);

  double best = -kInf;
  for (double nu : kCopulaDofGrid) {
    const Matrix z = nu == current ? z_current : transform(nu);
    double ll = marginal_ll;
    for (Eigen::Index i = 0; i < n; ++i) ll += detail::copula_kernel(z.row(i).transpose(), model.corr, nu);
    model.profile.push_back(ll);
    if (ll > best) {
      best = ll;
      model.dof = nu;
    }
  }
  return model;
}

}  // namespace adaptmh

#endif  // ADAPTMH_COPULA_HPP

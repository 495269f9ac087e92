#ifndef ADAPTMH_DISTS_HPP
#define ADAPTMH_DISTS_HPP

#include "adaptmh/core.hpp"
#include "adaptmh/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace adaptmh {

// ---------------------------------------------------------------------------
// Univariate normal
// ---------------------------------------------------------------------------

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }
inline double norm_sf(double x) { return 0.5 * std::erfc(x * std::numbers::sqrt2 / 2.0); }

inline double norm_logpdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + r * r / var);
}

// log Phi(x), accurate in both tails.
inline double norm_logcdf(double x) {
  if (x > 5.0) return std::log1p(-norm_sf(x));
  if (x > -30.0) return std::log(norm_cdf(x));
  // Asymptotic expansion of the Mills ratio.
  const double x2 = x * x;
  const double inv = 1.0 / x2;
  const double series = 1.0 - inv * (1.0 - 3.0 * inv * (1.0 - 5.0 * inv * (1.0 - 7.0 * inv * (1.0 - 9.0 * inv))));
  return -0.5 * x2 - std::log(-x) - 0.5 * kLog2Pi + std::log(series);
}

// Inverse standard normal CDF (Wichura, AS 241, PPND16).
inline double norm_quantile(double p) {
  require(p > 0.0 && p < 1.0, "norm_quantile: p must lie in (0, 1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r + 6.7265770927008700853e+4) * r +
             4.5921953931549871457e+4) * r + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r + 3.9307895800092710610e+4) * r +
             2.1213794301586595867e+4) * r + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return q * num / den;
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
             1.27045825245236838258e+0) * r + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
             1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
             2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
             7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    val = num / den;
  }
  return q < 0.0 ? -val : val;
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta and the univariate Student t
// ---------------------------------------------------------------------------

namespace detail {

// Continued fraction for I_x(a, b) (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b); `x1` is 1 - x supplied exactly.
inline double reg_inc_beta(double a, double b, double x, double x1) {
  if (x <= 0.0) return 0.0;
  if (x1 <= 0.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(x1);
  if (x < (a + 1.0) / (a + b + 2.0))
    return std::exp(log_front) * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - std::exp(log_front) * detail::beta_continued_fraction(b, a, x1) / b;
}

inline double reg_inc_beta(double a, double b, double x) { return reg_inc_beta(a, b, x, 1.0 - x); }

// P(T <= -|t|) for T ~ t_nu.
inline double t_lower_tail(double t, double nu) {
  const double t2 = t * t;
  const double denom = nu + t2;
  return 0.5 * reg_inc_beta(0.5 * nu, 0.5, nu / denom, t2 / denom);
}

inline double t_logpdf_1d(double z, double nu) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
         0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

inline double t_cdf_1d(double z, double nu) {
  require(nu > 0.0, "t_cdf_1d: nu must be positive");
  if (std::isnan(z)) return kNaN;
  if (z == 0.0) return 0.5;
  const double tail = t_lower_tail(z, nu);
  return z < 0.0 ? tail : 1.0 - tail;
}

namespace detail {

// Quantile of t_nu for a lower-tail probability p <= 0.5 (result <= 0).
inline double t_lower_quantile(double p, double nu) {
  if (p == 0.5) return 0.0;
  if (nu == 1.0) return std::tan(std::numbers::pi * (p - 0.5));
  if (nu == 2.0) return (2.0 * p - 1.0) / std::sqrt(2.0 * p * (1.0 - p));

  const double log_p = std::log(p);
  const double z = norm_quantile(p);
  const double z2 = z * z;
  double guess = z + z * (z2 + 1.0) / (4.0 * nu) + z * ((5.0 * z2 + 16.0) * z2 + 3.0) / (96.0 * nu * nu) +
                 z * (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) / (384.0 * nu * nu * nu);
  guess = std::min(guess, -1e-300);
  const double log_c = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) +
                       0.5 * (nu - 1.0) * std::log(nu);
  const double tail_guess = -std::exp((log_c - log_p) / nu);
  if (std::abs(std::log(t_lower_tail(tail_guess, nu)) - log_p) <
      std::abs(std::log(t_lower_tail(guess, nu)) - log_p))
    guess = tail_guess;

  // Safeguarded Newton on log F with a bracket lo < root <= hi.
  double lo = -kInf;
  double hi = 0.0;
  double t = guess;
  for (int iter = 0; iter < 200; ++iter) {
    const double f = t_lower_tail(t, nu);
    if (f == p) return t;
    if (f < p) lo = std::max(lo, t); else hi = std::min(hi, t);
    if (std::abs(f - p) <= 1e-13 * p) return t;
    const double g = std::log(f) - log_p;
    const double slope = std::exp(t_logpdf_1d(t, nu)) / f;
    double next = t - g / slope;
    if (!std::isfinite(next) || next <= lo || next >= hi) {
      if (std::isfinite(lo)) {
        next = 0.5 * (lo + hi);
      } else {
        next = 2.0 * std::min(t, -1.0);
      }
    }
    if (std::abs(next - t) <= 1e-14 * std::abs(t)) return next;
    t = next;
  }
  return t;
}

}  // namespace detail

inline double t_invcdf_1d(double p, double nu) {
  require(p > 0.0 && p < 1.0, "t_invcdf_1d: p must lie in (0, 1)");
  require(nu > 0.0, "t_invcdf_1d: nu must be positive");
  if (p > 0.5) return -detail::t_lower_quantile(1.0 - p, nu);
  return detail::t_lower_quantile(p, nu);
}

// ---------------------------------------------------------------------------
// Multivariate normal and t
// ---------------------------------------------------------------------------

struct MvtParams {
  Vector location;
  CovMatrix scale;
  double dof = 5.0;

  MvtParams() = default;
  MvtParams(Vector loc, CovMatrix sc, double nu) : location(std::move(loc)), scale(std::move(sc)), dof(nu) {
    require(dof > 0.0, "MvtParams: dof must be positive");
    require(location.size() == scale.dim(), "MvtParams: location/scale dimension mismatch");
  }
  Eigen::Index dim() const { return location.size(); }
};

inline double mvn_logpdf(const Vector& x, const Vector& mu, const CovMatrix& sigma) {
  require(x.size() == mu.size() && mu.size() == sigma.dim(), "mvn_logpdf: dimension mismatch");
  const double q = sigma.mahalanobis_sq(x - mu);
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + sigma.log_det() + q);
}

// Log t density of a residual r = x - location.
inline double mvt_logpdf_centered(const Vector& r, const CovMatrix& scale, double nu) {
  const double d = static_cast<double>(r.size());
  const double q = scale.mahalanobis_sq(r);
  return std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) - 0.5 * d * std::log(nu * std::numbers::pi) -
         0.5 * scale.log_det() - 0.5 * (nu + d) * std::log1p(q / nu);
}

inline double mvt_logpdf(const Vector& x, const MvtParams& p) {
  require(x.size() == p.dim(), "mvt_logpdf: dimension mismatch");
  return mvt_logpdf_centered(x - p.location, p.scale, p.dof);
}

inline Vector mvn_sample(const Vector& mu, const CovMatrix& sigma, Rng& rng) {
  require(mu.size() == sigma.dim(), "mvn_sample: dimension mismatch");
  return mu + sigma.transform(rng.normal_vector(mu.size()));
}

inline Vector mvt_sample(const MvtParams& p, Rng& rng) {
  // chi^2_nu / nu mixing variable.
  const double w = 2.0 * rng.gamma(0.5 * p.dof) / p.dof;
  return p.location + p.scale.transform(rng.normal_vector(p.dim())) / std::sqrt(w);
}

// ---------------------------------------------------------------------------
// Inverse gamma (shape a, scale b)
// ---------------------------------------------------------------------------

inline double inv_gamma_logpdf(double v, double a, double b) {
  require(v > 0.0 && a > 0.0 && b > 0.0, "inv_gamma_logpdf: arguments must be positive");
  return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(v) - b / v;
}

}  // namespace adaptmh

#endif  // ADAPTMH_DISTS_HPP

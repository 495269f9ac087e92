#ifndef ADAPTMH_MIXTURE_HPP
#define ADAPTMH_MIXTURE_HPP

#include "adaptmh/core.hpp"
#include "adaptmh/dists.hpp"
#include "adaptmh/linalg.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace adaptmh {

inline constexpr double kCovJitterFloor = 1e-8;

// Finite mixture of multivariate normals.
struct MixtureOfNormals {
  Eigen::Index dim = 0;
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<CovMatrix> covs;

  MixtureOfNormals() = default;

  static MixtureOfNormals single(const Vector& mean, const CovMatrix& cov) {
    MixtureOfNormals m;
    m.dim = mean.size();
    m.weights = {1.0};
    m.means = {mean};
    m.covs = {cov};
    return m;
  }

  static MixtureOfNormals univariate(std::vector<double> w, const std::vector<double>& mu,
                                     const std::vector<double>& var) {
    require(w.size() == mu.size() && mu.size() == var.size(), "univariate mixture: size mismatch");
    MixtureOfNormals m;
    m.dim = 1;
    m.weights = std::move(w);
    for (std::size_t c = 0; c < mu.size(); ++c) {
      m.means.push_back(Vector::Constant(1, mu[c]));
      m.covs.emplace_back(Matrix::Constant(1, 1, var[c]));
    }
    return m;
  }

  std::size_t components() const { return weights.size(); }

  // Same weights and means, every covariance multiplied by `factor`.
  MixtureOfNormals inflated(double factor) const {
    MixtureOfNormals m = *this;
    for (auto& c : m.covs) c = c.scaled(factor);
    return m;
  }

  double logpdf(const Vector& x) const {
    double acc = -kInf;
    for (std::size_t c = 0; c < components(); ++c) {
      if (weights[c] <= 0.0) continue;
      acc = log_add_exp(acc, std::log(weights[c]) + mvn_logpdf(x, means[c], covs[c]));
    }
    return acc;
  }

  Vector sample(Rng& rng) const {
    const std::size_t c = rng.categorical(weights);
    return mvn_sample(means[c], covs[c], rng);
  }

  Vector mean() const {
    Vector m = Vector::Zero(dim);
    for (std::size_t c = 0; c < components(); ++c) m += weights[c] * means[c];
    return m;
  }

  Matrix covariance() const {
    const Vector mu = mean();
    Matrix s = Matrix::Zero(dim, dim);
    for (std::size_t c = 0; c < components(); ++c) {
      const Vector r = means[c] - mu;
      s += weights[c] * (covs[c].entries() + r * r.transpose());
    }
    return s;
  }

  // Throws contract_violation when an invariant is broken.
  void validate() const {
    require(dim >= 1, "mixture: dim must be positive");
    require(!weights.empty(), "mixture: at least one component required");
    require(means.size() == weights.size() && covs.size() == weights.size(), "mixture: size mismatch");
    double total = 0.0;
    for (std::size_t c = 0; c < weights.size(); ++c) {
      require(weights[c] >= 1e-8, "mixture: weight below 1e-8");
      require(means[c].size() == dim && covs[c].dim() == dim, "mixture: component dimension mismatch");
      total += weights[c];
    }
    require(std::abs(total - 1.0) <= 1e-12, "mixture: weights do not sum to one");
  }
};

// ---------------------------------------------------------------------------
// Univariate mixture helpers (component 0 coordinates of a dim-1 mixture)
// ---------------------------------------------------------------------------

inline double mixture_pdf_1d(double x, const MixtureOfNormals& m) {
  double s = 0.0;
  for (std::size_t c = 0; c < m.components(); ++c) {
    const double var = m.covs[c].entries()(0, 0);
    s += m.weights[c] * std::exp(norm_logpdf(x, m.means[c][0], var));
  }
  return s;
}

inline double mixture_logpdf_1d(double x, const MixtureOfNormals& m) {
  double acc = -kInf;
  for (std::size_t c = 0; c < m.components(); ++c) {
    const double var = m.covs[c].entries()(0, 0);
    acc = log_add_exp(acc, std::log(m.weights[c]) + norm_logpdf(x, m.means[c][0], var));
  }
  return acc;
}

// Lower and upper tail probabilities, each computed without cancellation.
inline std::pair<double, double> mixture_cdf_sf_1d(double x, const MixtureOfNormals& m) {
  double lower = 0.0;
  double upper = 0.0;
  for (std::size_t c = 0; c < m.components(); ++c) {
    const double sd = std::sqrt(m.covs[c].entries()(0, 0));
    const double u = (x - m.means[c][0]) / sd;
    lower += m.weights[c] * norm_cdf(u);
    upper += m.weights[c] * norm_sf(u);
  }
  return {lower, upper};
}

// ---------------------------------------------------------------------------
// Jarque-Bera normality gate
// ---------------------------------------------------------------------------

struct JarqueBera {
  double statistic = 0.0;
  bool is_normal = true;
};

// chi^2_2 upper 5% point.
inline constexpr double kJarqueBeraCritical = 5.991;

inline JarqueBera jarque_bera_gate(std::span<const double> samples) {
  require(samples.size() >= 8, "jarque_bera_gate: need at least 8 samples");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : samples) {
    const double r = v - mean;
    const double r2 = r * r;
    m2 += r2;
    m3 += r2 * r;
    m4 += r2 * r2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  // A constant series carries no evidence against normality.
  if (!(m2 > 1e-24 * std::max(1.0, mean * mean))) return {0.0, true};
  const double skew = m3 / std::pow(m2, 1.5);
  const double kurt = m4 / (m2 * m2);
  const double jb = n / 6.0 * (skew * skew + 0.25 * (kurt - 3.0) * (kurt - 3.0));
  return {jb, jb < kJarqueBeraCritical};
}

// ---------------------------------------------------------------------------
// k-harmonic means clustering
// ---------------------------------------------------------------------------

struct KhmResult {
  Matrix centers;                   // k x d
  Matrix memberships;               // n x k, rows sum to one
  std::vector<double> objective;    // objective after initialization and every accepted step
  int iterations = 0;
};

namespace detail {

// Row indices of the distinct points, ordered lexicographically.
inline std::vector<Eigen::Index> distinct_rows(const RowsRef& points) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(points.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      if (points(a, j) < points(b, j)) return true;
      if (points(a, j) > points(b, j)) return false;
    }
    return a < b;
  };
  std::sort(idx.begin(), idx.end(), less);
  std::vector<Eigen::Index> out;
  for (Eigen::Index i : idx)
    if (out.empty() || points.row(i) != points.row(out.back())) out.push_back(i);
  return out;
}

struct KhmSweep {
  double objective = 0.0;
  Matrix next_centers;
  Matrix memberships;
};

// One pass over the data with squared-distance (p = 2) harmonic weights.
// Distances are rescaled by each point's nearest-center distance so that
// coincident points and centers stay finite.
inline KhmSweep khm_sweep(const RowsRef& points, const Matrix& centers) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = centers.rows();
  const Eigen::Index d = points.cols();
  KhmSweep s;
  s.memberships.resize(n, k);
  Matrix num = Matrix::Zero(k, d);
  Vector den = Vector::Zero(k);
  Vector dist2(k);
  const double kd = static_cast<double>(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < k; ++c)
      dist2[c] = std::max((points.row(i) - centers.row(c)).squaredNorm(), 1e-24);
    const double dmin = dist2.minCoeff();
    double sum_r2 = 0.0, sum_r4 = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      const double r2 = dmin / dist2[c];
      sum_r2 += r2;
      sum_r4 += r2 * r2;
    }
    s.objective += kd * dmin / sum_r2;
    const double norm = sum_r2 * sum_r2;
    for (Eigen::Index c = 0; c < k; ++c) {
      const double r2 = dmin / dist2[c];
      const double r4 = r2 * r2;
      s.memberships(i, c) = r4 / sum_r4;
      const double alpha = r4 / norm;
      num.row(c) += alpha * points.row(i);
      den[c] += alpha;
    }
  }
  s.next_centers = num.array().colwise() / den.array();
  return s;
}

}  // namespace detail

inline constexpr int kKhmMaxIterations = 100;
inline constexpr double kKhmTolerance = 1e-8;

// Minimizes sum_i k / sum_c ||x_i - m_c||^-2 by the weighted recentering
// fixed point. A step that would raise the objective is halved back toward
// the current centers, so the recorded objective never increases.
inline KhmResult khm_cluster(const RowsRef& points, std::size_t k, Rng& rng) {
  require(k >= 1, "khm_cluster: k must be positive");
  require(points.rows() > 0, "khm_cluster: no points");
  const auto distinct = detail::distinct_rows(points);
  require(k <= distinct.size(), "khm_cluster: k exceeds the number of distinct points");

  const Eigen::Index kk = static_cast<Eigen::Index>(k);
  KhmResult out;
  out.centers.resize(kk, points.cols());
  if (k == 1) {
    // The objective is ||x - m||^2 summed, minimized at the centroid.
    out.centers.row(0) = points.colwise().mean();
    out.memberships = Matrix::Ones(points.rows(), 1);
    out.objective.push_back((points.rowwise() - out.centers.row(0)).rowwise().squaredNorm().sum());
    return out;
  }

  // Partial Fisher-Yates over the distinct points.
  std::vector<Eigen::Index> pool = distinct;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t j = c + rng.index(pool.size() - c);
    std::swap(pool[c], pool[j]);
    out.centers.row(static_cast<Eigen::Index>(c)) = points.row(pool[c]);
  }

  auto sweep = detail::khm_sweep(points, out.centers);
  out.objective.push_back(sweep.objective);
  for (int it = 0; it < kKhmMaxIterations; ++it) {
    Matrix candidate = sweep.next_centers;
    auto trial = detail::khm_sweep(points, candidate);
    int halvings = 0;
    while (trial.objective > sweep.objective && halvings < 30) {
      candidate = 0.5 * (candidate + out.centers);
      trial = detail::khm_sweep(points, candidate);
      ++halvings;
    }
    if (trial.objective > sweep.objective) break;
    const double moved = (candidate - out.centers).cwiseAbs().maxCoeff();
    out.centers = std::move(candidate);
    sweep = std::move(trial);
    out.objective.push_back(sweep.objective);
    out.iterations = it + 1;
    if (moved < kKhmTolerance) break;
  }
  out.memberships = std::move(sweep.memberships);
  return out;
}

// ---------------------------------------------------------------------------
// Mixture fitting
// ---------------------------------------------------------------------------

// Membership-weighted moments of a k-harmonic-means partition. Components
// lighter than max(1e-3, 2 d / n) are dropped and the rest renormalized.
inline MixtureOfNormals fit_mixture(const RowsRef& points, std::size_t nc, Rng& rng) {
  require(nc >= 1, "fit_mixture: nc must be positive");
  require(points.rows() >= 1, "fit_mixture: no points");
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  const std::size_t n_distinct = detail::distinct_rows(points).size();
  const std::size_t k = std::min(nc, n_distinct);
  const KhmResult khm = khm_cluster(points, k, rng);

  const double floor = std::max(1e-3, 2.0 * static_cast<double>(d) / static_cast<double>(n));
  struct Part {
    double mass;
    Vector mean;
    Matrix cov;
  };
  std::vector<Part> parts;
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k); ++c) {
    const Vector w = khm.memberships.col(c);
    const double mass = w.sum();
    if (!(mass > 0.0)) continue;
    Vector mean = (points.transpose() * w) / mass;
    Matrix centered = points.rowwise() - mean.transpose();
    Matrix cov = (centered.transpose() * w.asDiagonal() * centered) / mass;
    parts.push_back({mass / static_cast<double>(n), std::move(mean), 0.5 * (cov + cov.transpose())});
  }
  std::vector<Part> kept;
  for (auto& p : parts)
    if (p.mass >= floor) kept.push_back(p);
  if (kept.empty()) {
    auto heaviest = std::max_element(parts.begin(), parts.end(),
                                     [](const Part& a, const Part& b) { return a.mass < b.mass; });
    kept.push_back(*heaviest);
  }
  double total = 0.0;
  for (const auto& p : kept) total += p.mass;

  MixtureOfNormals m;
  m.dim = d;
  for (auto& p : kept) {
    p.cov.diagonal().array() += kCovJitterFloor;
    m.weights.push_back(p.mass / total);
    m.means.push_back(std::move(p.mean));
    m.covs.emplace_back(p.cov);
  }
  // Exact renormalization so the weights sum to one to rounding.
  const double s = std::accumulate(m.weights.begin(), m.weights.end(), 0.0);
  for (double& w : m.weights) w /= s;
  return m;
}

// Component count for the adaptive mixture term, stepping with the ratio of
// accepted draws to dimension.
inline std::size_t nc_schedule(std::size_t accepted, std::size_t dim) {
  require(dim >= 1, "nc_schedule: dim must be positive");
  const double ratio = static_cast<double>(accepted) / static_cast<double>(dim);
  if (ratio < 40.0) return 1;
  if (ratio < 100.0) return 2;
  if (ratio < 200.0) return 3;
  return 4;
}

inline constexpr std::size_t kMaxMarginalComponents = 4;

// Normal scores Phi^-1(F(x_i)) of a fitted univariate mixture.
inline std::vector<double> mixture_normal_scores(std::span<const double> samples, const MixtureOfNormals& m) {
  std::vector<double> r;
  r.reserve(samples.size());
  for (double v : samples) {
    auto [lo, hi] = mixture_cdf_sf_1d(v, m);
    lo = std::clamp(lo, 1e-300, 1.0);
    hi = std::clamp(hi, 1e-300, 1.0);
    r.push_back(lo <= hi ? norm_quantile(std::min(lo, 0.5)) : -norm_quantile(std::min(hi, 0.5)));
  }
  return r;
}

// Univariate marginal density: a single normal when the Jarque-Bera gate
// passes, otherwise the smallest mixture (2..4 components) whose normal
// scores pass the gate, capped at four.
inline MixtureOfNormals fit_marginal(std::span<const double> samples, Rng& rng) {
  require(samples.size() >= 8, "fit_marginal: need at least 8 samples");
  const Eigen::Map<const Matrix> pts(samples.data(), static_cast<Eigen::Index>(samples.size()), 1);
  if (jarque_bera_gate(samples).is_normal) return fit_mixture(pts, 1, rng);
  MixtureOfNormals best;
  for (std::size_t k = 2; k <= kMaxMarginalComponents; ++k) {
    best = fit_mixture(pts, k, rng);
    if (best.components() < k) break;  // the data cannot support more components
    if (jarque_bera_gate(mixture_normal_scores(samples, best)).is_normal) break;
  }
  return best;
}

}  // namespace adaptmh

#endif  // ADAPTMH_MIXTURE_HPP

#ifndef ADAPTMH_PROPOSALS_HPP
#define ADAPTMH_PROPOSALS_HPP

#include "adaptmh/copula.hpp"
#include "adaptmh/core.hpp"
#include "adaptmh/dists.hpp"
#include "adaptmh/linalg.hpp"
#include "adaptmh/mixture.hpp"

#include <array>
#include <cstdio>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

namespace adaptmh {

enum class SamplerKind { rw2, rw3, imh_mn, imh_tct, imh_tct_a };

inline constexpr std::array<SamplerKind, 5> kAllSamplers = {SamplerKind::rw2, SamplerKind::rw3, SamplerKind::imh_mn,
                                                            SamplerKind::imh_tct, SamplerKind::imh_tct_a};

inline std::string_view sampler_name(SamplerKind k) {
  switch (k) {
    case SamplerKind::rw2: return "rwm";
    case SamplerKind::rw3: return "rwm3c";
    case SamplerKind::imh_mn: return "imh-mn";
    case SamplerKind::imh_tct: return "imh-tct";
    case SamplerKind::imh_tct_a: return "imh-tct-a";
  }
  return "?";
}

inline std::optional<SamplerKind> parse_sampler(std::string_view s) {
  for (SamplerKind k : kAllSamplers)
    if (sampler_name(k) == s) return k;
  return std::nullopt;
}

inline bool is_independence(SamplerKind k) { return k != SamplerKind::rw2 && k != SamplerKind::rw3; }

// Outcome of one adaptation request.
struct AdaptOutcome {
  bool failed = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Adaptive random walk
// ---------------------------------------------------------------------------

struct RwSettings {
  // Zero or NaN selects the defaults: n0 = 200 d, kappa1 = 0.1^2 / d, kappa2 = 2.38^2 / d.
  std::size_t n0 = 0;
  double kappa1 = kNaN;
  double kappa2 = kNaN;
  double kappa3 = 25.0;
};

struct RwState {
  Eigen::Index dim = 0;
  std::size_t n0 = 0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double kappa3 = 25.0;
  bool three_component = false;
  CovMatrix sigma1;
  RunningMoments moments;

  RwState() = default;
  RwState(Eigen::Index d, bool three, const RwSettings& s, CovMatrix sigma)
      : dim(d), three_component(three), sigma1(std::move(sigma)), moments(d) {
    require(d >= 1, "RwState: dim must be positive");
    require(sigma1.dim() == d, "RwState: sigma1 dimension mismatch");
    const double dd = static_cast<double>(d);
    n0 = s.n0 > 0 ? s.n0 : static_cast<std::size_t>(200 * d);
    kappa1 = std::isfinite(s.kappa1) ? s.kappa1 : 0.01 / dd;
    kappa2 = std::isfinite(s.kappa2) ? s.kappa2 : 2.38 * 2.38 / dd;
    kappa3 = s.kappa3;
    require(kappa1 > 0.0 && kappa2 > 0.0 && kappa3 > 0.0, "RwState: scale factors must be positive");
  }

  // Component weights at iteration n (1-based).
  std::array<double, 3> weights(std::size_t n) const {
    if (n <= n0) return {1.0, 0.0, 0.0};
    if (three_component) return {0.05, 0.90, 0.05};
    return {0.05, 0.95, 0.0};
  }

  // Sigma_2n: sample covariance of the iterates seen so far.
  const CovMatrix& adaptive_cov() const {
    if (!cache_ || cache_count_ != moments.count()) {
      cache_ = CovMatrix(moments.covariance());
      cache_count_ = moments.count();
    }
    return *cache_;
  }

 private:
  mutable std::optional<CovMatrix> cache_;
  mutable std::size_t cache_count_ = 0;
};

inline void update_running_moments(RwState& st, const Vector& x) { st.moments.push(x); }

inline Vector rw_propose(const Vector& x, const RwState& st, std::size_t n, Rng& rng) {
  require(x.size() == st.dim, "rw_propose: dimension mismatch");
  const auto w = st.weights(n);
  const std::size_t c = rng.categorical(w);
  const Vector e = rng.normal_vector(st.dim);
  if (c == 0) return x + std::sqrt(st.kappa1) * st.sigma1.transform(e);
  const double kappa = c == 1 ? st.kappa2 : st.kappa3;
  return x + std::sqrt(kappa) * st.adaptive_cov().transform(e);
}

// Log density of the random-walk increment z - x (symmetric in x and z).
inline double rw_logpdf(const Vector& z, const Vector& x, const RwState& st, std::size_t n) {
  const auto w = st.weights(n);
  const Vector r = z - x;
  std::array<double, 3> t{-kInf, -kInf, -kInf};
  t[0] = std::log(w[0]) + mvn_logpdf(r, Vector::Zero(st.dim), st.sigma1.scaled(st.kappa1));
  if (w[1] > 0.0) t[1] = std::log(w[1]) + mvn_logpdf(r, Vector::Zero(st.dim), st.adaptive_cov().scaled(st.kappa2));
  if (w[2] > 0.0) t[2] = std::log(w[2]) + mvn_logpdf(r, Vector::Zero(st.dim), st.adaptive_cov().scaled(st.kappa3));
  return log_sum_exp(t);
}

inline double rw_accept_ratio(double log_target_x, double log_target_z) {
  if (!(log_target_z > -kInf)) return 0.0;
  return std::min(1.0, std::exp(log_target_z - log_target_x));
}

// ---------------------------------------------------------------------------
// Four-term mixture of normals independence proposal
// ---------------------------------------------------------------------------

inline constexpr double kHeavyFactorFixed = 10.0;
inline constexpr double kHeavyFactorAdaptive = 20.0;

struct ImhMnState {
  int stage = 1;
  MixtureOfNormals g1;
  MixtureOfNormals g2;
  std::optional<MixtureOfNormals> g3;
  std::optional<MixtureOfNormals> g4;

  ImhMnState() = default;
  explicit ImhMnState(MixtureOfNormals initial) : g1(std::move(initial)) {
    g1.validate();
    g2 = g1.inflated(kHeavyFactorFixed);
  }

  Eigen::Index dim() const { return g1.dim; }

  std::array<double, 4> weights() const {
    if (!g3) return {0.8, 0.2, 0.0, 0.0};
    return {0.15, 0.05, 0.7, 0.1};
  }

  void set_g3(MixtureOfNormals m) {
    g3 = std::move(m);
    g4 = g3->inflated(kHeavyFactorAdaptive);
  }
};

inline Vector imh_mn_propose(const ImhMnState& st, Rng& rng) {
  const auto w = st.weights();
  switch (rng.categorical(w)) {
    case 0: return st.g1.sample(rng);
    case 1: return st.g2.sample(rng);
    case 2: return st.g3->sample(rng);
    default: return st.g4->sample(rng);
  }
}

inline double imh_mn_logpdf(const Vector& x, const ImhMnState& st) {
  const auto w = st.weights();
  std::array<double, 4> t{std::log(w[0]) + st.g1.logpdf(x), std::log(w[1]) + st.g2.logpdf(x), -kInf, -kInf};
  if (st.g3) {
    t[2] = std::log(w[2]) + st.g3->logpdf(x);
    t[3] = std::log(w[3]) + st.g4->logpdf(x);
  }
  return log_sum_exp(t);
}

// Refits g3 on `window` with nc from the accepted count. Keeps the previous
// g3 when the window is too small or the fit fails.
inline AdaptOutcome imh_mn_adapt(ImhMnState& st, const RowsRef& window, std::size_t accepted, Rng& rng) {
  const Eigen::Index d = st.dim();
  require(window.cols() == d, "imh_mn_adapt: dimension mismatch");
  const std::size_t nc = nc_schedule(accepted, static_cast<std::size_t>(d));
  if (window.rows() < 2 * d + 2)
    return {true, "too few iterates (" + std::to_string(window.rows()) + ")"};
  if (static_cast<Eigen::Index>(detail::distinct_rows(window).size()) < d + 1)
    return {true, "too few distinct iterates"};
  try {
    MixtureOfNormals m = fit_mixture(window, nc, rng);
    m.validate();
    const std::size_t got = m.components();
    st.set_g3(std::move(m));
    return {false, "nc=" + std::to_string(nc) + " fitted=" + std::to_string(got) +
                       " n=" + std::to_string(window.rows())};
  } catch (const std::exception& e) {
    return {true, e.what()};
  }
}

// End of stage one: g1 takes the current g3.
inline void imh_mn_stage_transition(ImhMnState& st) {
  st.stage = 2;
  if (!st.g3) return;
  st.g1 = *st.g3;
  st.g2 = st.g1.inflated(kHeavyFactorFixed);
}

// ---------------------------------------------------------------------------
// t copula + multivariate t independence proposal
// ---------------------------------------------------------------------------

inline constexpr double kTctCopulaWeight = 0.7;
inline constexpr double kTctMvtDof = 5.0;

enum class TctComponent { copula, mvt };

// Where the copula mate is reflected: through the origin of the parameter
// space (x) or through the origin of the copula scale (z).
enum class AntitheticSpace { x, z };

struct ImhTctState {
  TCopulaModel copula;
  MvtParams mvt;
  bool antithetic = false;
  AntitheticSpace space = AntitheticSpace::z;
  std::optional<Vector> pending;

  std::array<double, 2> weights() const { return {kTctCopulaWeight, 1.0 - kTctCopulaWeight}; }
  Eigen::Index dim() const { return copula.dim; }
};

inline MvtParams moment_mvt(const RowsRef& points) {
  auto [mean, cov] = sample_moments(points);
  return MvtParams(mean, CovMatrix(cov), kTctMvtDof);
}

inline double imh_tct_logpdf(const Vector& x, const ImhTctState& st) {
  return log_add_exp(std::log(kTctCopulaWeight) + copula_logpdf(x, st.copula),
                     std::log(1.0 - kTctCopulaWeight) + mvt_logpdf(x, st.mvt));
}

inline Vector antithetic_mate(const Vector& draw, TctComponent component, const ImhTctState& st) {
  if (component == TctComponent::mvt) return 2.0 * st.mvt.location - draw;
  if (st.space == AntitheticSpace::x) return -draw;
  return to_x(-to_z(draw, st.copula), st.copula);
}

// Next proposal and its log density. With antithetic pairing on, every fresh
// draw queues its mate, which is returned by the following call.
inline std::pair<Vector, double> imh_tct_propose(ImhTctState& st, Rng& rng) {
  if (st.pending) {
    Vector mate = std::move(*st.pending);
    st.pending.reset();
    const double lq = imh_tct_logpdf(mate, st);
    return {std::move(mate), lq};
  }
  const auto w = st.weights();
  const auto component = rng.categorical(w) == 0 ? TctComponent::copula : TctComponent::mvt;
  Vector x = component == TctComponent::copula ? copula_sample(st.copula, rng) : mvt_sample(st.mvt, rng);
  if (st.antithetic) st.pending = antithetic_mate(x, component, st);
  const double lq = imh_tct_logpdf(x, st);
  return {std::move(x), lq};
}

inline AdaptOutcome imh_tct_adapt(ImhTctState& st, const RowsRef& window, Rng& rng) {
  const Eigen::Index d = st.dim();
  require(window.cols() == d, "imh_tct_adapt: dimension mismatch");
  if (window.rows() < 10 * d) return {true, "too few iterates (" + std::to_string(window.rows()) + ")"};
  try {
    TCopulaModel m = fit_t_copula(window, rng, st.copula.dof);
    m.validate();
    MvtParams t = moment_mvt(window);
    st.copula = std::move(m);
    st.mvt = std::move(t);
    st.pending.reset();
    return {false, "dof=" + std::to_string(static_cast<int>(st.copula.dof)) + " n=" + std::to_string(window.rows())};
  } catch (const std::exception& e) {
    return {true, e.what()};
  }
}

// ---------------------------------------------------------------------------
// Engine-facing proposal objects
// ---------------------------------------------------------------------------

// What the engine tells a proposal at an adaptation point.
struct AdaptContext {
  RowsRef window;
  std::size_t accepted;
  std::size_t iteration;
};

class Proposal {
 public:
  virtual ~Proposal() = default;

  virtual SamplerKind kind() const = 0;
  bool independent() const { return is_independence(kind()); }

  // Called once per iteration n (1-based) before the accept step.
  virtual Vector draw(const Vector& current, std::size_t n, Rng& rng) = 0;
  // Independence proposals only: log q at x.
  virtual double log_density(const Vector& /*x*/) const { return 0.0; }
  // Called with every chain state once it is fixed (start state included).
  virtual void observe(const Vector& /*state*/) {}
  virtual AdaptOutcome adapt(const AdaptContext& /*ctx*/, Rng& /*rng*/) { return {false, "no refit"}; }
  virtual void enter_stage_two() {}
  virtual std::string weights_text(std::size_t n) const = 0;
  // Flattened parameters, for change detection.
  virtual Vector fingerprint() const = 0;

  virtual std::unique_ptr<Proposal> clone() const = 0;
};

using ProposalPtr = std::unique_ptr<Proposal>;

namespace detail {

inline std::string join_weights(std::span<const double> w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += ' ';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", w[i]);
    s += buf;
  }
  return s;
}

inline void append(std::vector<double>& out, const Matrix& m) { out.insert(out.end(), m.data(), m.data() + m.size()); }

inline void append(std::vector<double>& out, const MixtureOfNormals& m) {
  out.insert(out.end(), m.weights.begin(), m.weights.end());
  for (std::size_t c = 0; c < m.components(); ++c) {
    append(out, m.means[c]);
    append(out, m.covs[c].entries());
  }
}

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

class RandomWalkProposal : public Proposal {
 public:
  explicit RandomWalkProposal(RwState st) : st_(std::move(st)) {}

  SamplerKind kind() const override { return st_.three_component ? SamplerKind::rw3 : SamplerKind::rw2; }
  Vector draw(const Vector& current, std::size_t n, Rng& rng) override { return rw_propose(current, st_, n, rng); }
  void observe(const Vector& state) override { update_running_moments(st_, state); }
  std::string weights_text(std::size_t n) const override { return detail::join_weights(st_.weights(n)); }

  Vector fingerprint() const override {
    std::vector<double> v{st_.kappa1, st_.kappa2, st_.kappa3, static_cast<double>(st_.n0)};
    detail::append(v, st_.sigma1.entries());
    return detail::to_vector(v);
  }

  ProposalPtr clone() const override { return std::make_unique<RandomWalkProposal>(*this); }
  const RwState& state() const { return st_; }

 private:
  RwState st_;
};

class MixtureProposal : public Proposal {
 public:
  explicit MixtureProposal(ImhMnState st) : st_(std::move(st)) {}

  SamplerKind kind() const override { return SamplerKind::imh_mn; }
  Vector draw(const Vector&, std::size_t, Rng& rng) override { return imh_mn_propose(st_, rng); }
  double log_density(const Vector& x) const override { return imh_mn_logpdf(x, st_); }

  AdaptOutcome adapt(const AdaptContext& ctx, Rng& rng) override {
    return imh_mn_adapt(st_, ctx.window, ctx.accepted, rng);
  }
  void enter_stage_two() override { imh_mn_stage_transition(st_); }
  std::string weights_text(std::size_t) const override { return detail::join_weights(st_.weights()); }

  Vector fingerprint() const override {
    std::vector<double> v;
    detail::append(v, st_.g1);
    if (st_.g3) detail::append(v, *st_.g3);
    return detail::to_vector(v);
  }

  ProposalPtr clone() const override { return std::make_unique<MixtureProposal>(*this); }
  const ImhMnState& state() const { return st_; }

 private:
  ImhMnState st_;
};

class CopulaProposal : public Proposal {
 public:
  explicit CopulaProposal(ImhTctState st) : st_(std::move(st)) {}

  SamplerKind kind() const override { return st_.antithetic ? SamplerKind::imh_tct_a : SamplerKind::imh_tct; }

  Vector draw(const Vector&, std::size_t, Rng& rng) override {
    auto [x, lq] = imh_tct_propose(st_, rng);
    last_lq_ = lq;
    last_ = x;
    return x;
  }

  double log_density(const Vector& x) const override {
    if (last_.size() == x.size() && last_ == x) return last_lq_;
    return imh_tct_logpdf(x, st_);
  }

  AdaptOutcome adapt(const AdaptContext& ctx, Rng& rng) override {
    last_.resize(0);
    return imh_tct_adapt(st_, ctx.window, rng);
  }
  std::string weights_text(std::size_t) const override { return detail::join_weights(st_.weights()); }

  Vector fingerprint() const override {
    std::vector<double> v{st_.copula.dof};
    detail::append(v, st_.copula.corr.entries());
    for (const auto& m : st_.copula.marginals) detail::append(v, m);
    detail::append(v, st_.mvt.location);
    detail::append(v, st_.mvt.scale.entries());
    return detail::to_vector(v);
  }

  ProposalPtr clone() const override { return std::make_unique<CopulaProposal>(*this); }
  const ImhTctState& state() const { return st_; }

 private:
  ImhTctState st_;
  Vector last_;
  double last_lq_ = 0.0;
};

}  // namespace adaptmh

#endif  // ADAPTMH_PROPOSALS_HPP

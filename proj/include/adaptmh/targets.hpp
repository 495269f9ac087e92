#ifndef ADAPTMH_TARGETS_HPP
#define ADAPTMH_TARGETS_HPP

#include "adaptmh/core.hpp"
#include "adaptmh/dists.hpp"
#include "adaptmh/linalg.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace adaptmh {

// ---------------------------------------------------------------------------
// Data and priors
// ---------------------------------------------------------------------------

struct Dataset {
  Matrix design;
  Vector response;
  // 1-based group labels; empty when the model has no groups.
  std::vector<int> group_index;

  Eigen::Index rows() const { return design.rows(); }
  Eigen::Index covariates() const { return design.cols(); }

  int groups() const {
    int n = 0;
    for (int g : group_index) n = std::max(n, g);
    return n;
  }

  void validate(bool binary, bool grouped) const {
    if (design.rows() != response.size()) throw data_error("dataset: design and response lengths differ");
    if (design.rows() == 0 || design.cols() == 0) throw data_error("dataset: empty design matrix");
    if (!design.allFinite() || !response.allFinite()) throw data_error("dataset: non-finite values");
    if (binary)
      for (Eigen::Index i = 0; i < response.size(); ++i)
        if (response[i] != 0.0 && response[i] != 1.0)
          throw data_error("dataset: response in row " + std::to_string(i + 1) + " is not 0 or 1");
    if (!grouped) return;
    if (static_cast<Eigen::Index>(group_index.size()) != design.rows())
      throw data_error("dataset: one group label per row is required");
    const int n = groups();
    std::vector<char> seen(static_cast<std::size_t>(n) + 1, 0);
    for (int g : group_index) {
      if (g < 1) throw data_error("dataset: group labels must start at 1");
      seen[static_cast<std::size_t>(g)] = 1;
    }
    for (int g = 1; g <= n; ++g)
      if (!seen[static_cast<std::size_t>(g)])
        throw data_error("dataset: group labels must be contiguous (missing " + std::to_string(g) + ")");
  }
};

enum class PriorKind { normal, double_exponential, mixture_normals };

struct PriorSpec {
  PriorKind kind = PriorKind::normal;
  double variance = 1e6;
  double tau_s2 = 0.01;
  double tau_l2 = 1e4;
  double ig_shape = 0.01;
  double ig_scale = 0.01;

  // Number of sampled hyperparameters the prior adds (log tau or logit omega).
  Eigen::Index extra() const { return kind == PriorKind::normal ? 0 : 1; }

  void validate() const {
    require(variance > 0.0, "prior: variance must be positive");
    require(ig_shape > 0.0 && ig_scale > 0.0, "prior: inverse gamma parameters must be positive");
    if (kind == PriorKind::mixture_normals)
      require(tau_s2 > 0.0 && tau_s2 < tau_l2, "prior: need 0 < tau_s2 < tau_l2");
  }
};

// Log density of theta = ln v when v ~ IG(a, b), Jacobian included.
inline double log_inv_gamma_of_log(double theta, double a, double b) {
  return a * std::log(b) - std::lgamma(a) - a * theta - b * std::exp(-theta);
}

// theta = (beta_0, ..., beta_{p-1}[, ln tau | logit omega]).
inline double log_prior(const Vector& theta, const PriorSpec& spec) {
  const Eigen::Index p = theta.size() - spec.extra();
  require(p >= 1, "log_prior: no coefficients");
  double s = 0.0;
  switch (spec.kind) {
    case PriorKind::normal:
      for (Eigen::Index j = 0; j < p; ++j) s += norm_logpdf(theta[j], 0.0, spec.variance);
      break;
    case PriorKind::double_exponential: {
      const double log_tau = theta[p];
      const double tau = std::exp(log_tau);
      s += norm_logpdf(theta[0], 0.0, spec.variance);
      for (Eigen::Index j = 1; j < p; ++j) s += -std::numbers::ln2 - log_tau - std::abs(theta[j]) / tau;
      s += log_inv_gamma_of_log(log_tau, spec.ig_shape, spec.ig_scale);
      break;
    }
    case PriorKind::mixture_normals: {
      const double t = theta[p];
      const double log_w = -softplus(-t);
      const double log_1mw = -softplus(t);
      s += norm_logpdf(theta[0], 0.0, spec.variance);
      for (Eigen::Index j = 1; j < p; ++j)
        s += log_add_exp(log_w + norm_logpdf(theta[j], 0.0, spec.tau_s2),
                         log_1mw + norm_logpdf(theta[j], 0.0, spec.tau_l2));
      // Uniform omega: only the logit Jacobian remains.
      s += log_w + log_1mw;
      break;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Likelihoods
// ---------------------------------------------------------------------------

inline double logistic_loglik(const Vector& beta, const Dataset& data) {
  require(beta.size() == data.covariates(), "logistic_loglik: dimension mismatch");
  const Vector eta = data.design * beta;
  double s = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) s += data.response[i] * eta[i] - softplus(eta[i]);
  return s;
}

inline double rho_delta(double u, double delta) {
  require(delta > 0.0 && delta < 1.0, "rho_delta: delta must lie in (0, 1)");
  return 0.5 * (std::abs(u) + (2.0 * delta - 1.0) * u);
}

inline double quantile_loglik(const Vector& beta, double log_sigma, const Dataset& data, double delta) {
  require(beta.size() == data.covariates(), "quantile_loglik: dimension mismatch");
  require(delta > 0.0 && delta < 1.0, "quantile_loglik: delta must lie in (0, 1)");
  const double inv_sigma = std::exp(-log_sigma);
  const Vector resid = data.response - data.design * beta;
  double check = 0.0;
  for (Eigen::Index i = 0; i < resid.size(); ++i) check += rho_delta(resid[i] * inv_sigma, delta);
  const double n = static_cast<double>(resid.size());
  return n * std::log(delta * (1.0 - delta)) - n * log_sigma - check;
}

// ---------------------------------------------------------------------------
// Probit random effects: importance-sampled marginal likelihood
// ---------------------------------------------------------------------------

struct ImportanceState {
  // Posterior moment estimates of each random effect.
  Vector post_mean;
  Vector post_var;
  // Importance density h_i = N(h_mean_i, h_var_i).
  Vector h_mean;
  Vector h_var;
  double kappa = 4.0;
  int draws = 100;
  int refresh_interval = 100;

  static ImportanceState initial(int groups, double kappa = 4.0, int draws = 100, int refresh_interval = 100) {
    ImportanceState st;
    st.post_mean = Vector::Zero(groups);
    st.post_var = Vector::Constant(groups, 1.5 / kappa);
    st.h_mean = Vector::Zero(groups);
    st.h_var = Vector::Constant(groups, 1.5);
    st.kappa = kappa;
    st.draws = draws;
    st.refresh_interval = refresh_interval;
    return st;
  }

  void validate(int groups) const {
    require(h_mean.size() == groups && h_var.size() == groups, "importance state: one entry per group");
    require((h_var.array() > 0.0).all(), "importance state: variances must be positive");
    require(kappa >= 1.0, "importance state: kappa must be at least 1");
    require(draws >= 1 && refresh_interval >= 1, "importance state: M and L must be positive");
  }
};

// Row indices of each group, in data order.
inline std::vector<std::vector<Eigen::Index>> group_rows(const Dataset& data) {
  std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(data.groups()));
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    rows[static_cast<std::size_t>(data.group_index[static_cast<std::size_t>(i)] - 1)].push_back(i);
  return rows;
}

namespace detail {

struct GroupDraws {
  std::vector<double> mu;
  std::vector<double> log_w;
};

// Importance draws and log weights for one group under theta.
inline void probit_group_weights(const Vector& eta, const std::vector<Eigen::Index>& rows, const Dataset& data,
                                 double log_s2, double mean, double var, int draws, Rng& rng, GroupDraws& out) {
  const double s2 = std::exp(log_s2);
  const double sd = std::sqrt(var);
  out.mu.resize(static_cast<std::size_t>(draws));
  out.log_w.resize(static_cast<std::size_t>(draws));
  for (int j = 0; j < draws; ++j) {
    const double u = rng.normal();
    const double mu = mean + sd * u;
    double lw = 0.0;
    for (Eigen::Index r : rows) {
      const double a = mu + eta[r];
      lw += norm_logcdf(data.response[r] > 0.5 ? a : -a);
    }
    lw += -0.5 * (std::log(s2) + mu * mu / s2) + 0.5 * (std::log(var) + u * u);
    out.mu[static_cast<std::size_t>(j)] = mu;
    out.log_w[static_cast<std::size_t>(j)] = lw;
  }
}

}  // namespace detail

// theta = (beta, ln sigma_mu^2). Fresh draws per call.
inline double probit_re_loglik_hat(const Vector& theta, const Dataset& data, const ImportanceState& st,
                                   const std::vector<std::vector<Eigen::Index>>& rows, Rng& rng) {
  const Eigen::Index p = data.covariates();
  require(theta.size() == p + 1, "probit_re_loglik_hat: theta must be (beta, log sigma^2)");
  const Vector eta = data.design * theta.head(p);
  const double log_m = std::log(static_cast<double>(st.draws));
  detail::GroupDraws buf;
  double s = 0.0;
  for (std::size_t g = 0; g < rows.size(); ++g) {
    const auto gi = static_cast<Eigen::Index>(g);
    detail::probit_group_weights(eta, rows[g], data, theta[p], st.h_mean[gi], st.h_var[gi], st.draws, rng, buf);
    const double lg = log_sum_exp(buf.log_w) - log_m;
    if (!(lg > -kInf)) return -kInf;
    s += lg;
  }
  return s;
}

inline double probit_re_loglik_hat(const Vector& theta, const Dataset& data, const ImportanceState& st, Rng& rng) {
  return probit_re_loglik_hat(theta, data, st, group_rows(data), rng);
}

// New importance densities from the last L iterates (rows of `recent`).
inline ImportanceState refresh_importance(const RowsRef& recent, const Dataset& data, const ImportanceState& st,
                                          const std::vector<std::vector<Eigen::Index>>& rows, Rng& rng) {
  require(recent.rows() >= 1, "refresh_importance: need at least one iterate");
  const Eigen::Index p = data.covariates();
  require(recent.cols() == p + 1, "refresh_importance: iterate dimension mismatch");
  const auto groups = static_cast<Eigen::Index>(rows.size());
  Vector m1 = Vector::Zero(groups);
  Vector m2 = Vector::Zero(groups);
  Eigen::Index used = 0;
  detail::GroupDraws buf;
  Vector e1(groups), e2(groups);
  for (Eigen::Index l = 0; l < recent.rows(); ++l) {
    const Vector theta = recent.row(l).transpose();
    const Vector eta = data.design * theta.head(p);
    bool ok = true;
    for (Eigen::Index g = 0; g < groups && ok; ++g) {
      detail::probit_group_weights(eta, rows[static_cast<std::size_t>(g)], data, theta[p], st.h_mean[g],
                                   st.h_var[g], st.draws, rng, buf);
      double top = -kInf;
      for (double w : buf.log_w) top = std::max(top, w);
      if (!std::isfinite(top)) {
        ok = false;
        break;
      }
      double sw = 0.0, s1 = 0.0, s2 = 0.0;
      for (std::size_t j = 0; j < buf.mu.size(); ++j) {
        const double w = std::exp(buf.log_w[j] - top);
        sw += w;
        s1 += w * buf.mu[j];
        s2 += w * buf.mu[j] * buf.mu[j];
      }
      e1[g] = s1 / sw;
      e2[g] = s2 / sw;
    }
    if (!ok) continue;
    m1 += e1;
    m2 += e2;
    ++used;
  }
  if (used == 0) return st;
  ImportanceState out = st;
  out.post_mean = m1 / static_cast<double>(used);
  out.post_var = (m2 / static_cast<double>(used) - out.post_mean.cwiseAbs2()).cwiseMax(1e-6);
  out.h_mean = out.post_mean;
  out.h_var = st.kappa * out.post_var;
  return out;
}

inline ImportanceState refresh_importance(const RowsRef& recent, const Dataset& data, const ImportanceState& st,
                                          Rng& rng) {
  return refresh_importance(recent, data, st, group_rows(data), rng);
}

// ---------------------------------------------------------------------------
// Bimodal benchmark
// ---------------------------------------------------------------------------

// 0.5 N(-offset * 1, I) + 0.5 N(offset * 1, I).
inline double bimodal_target_logpdf(const Vector& x, double offset = 3.0) {
  const double d = static_cast<double>(x.size());
  const double a = (x.array() + offset).matrix().squaredNorm();
  const double b = (x.array() - offset).matrix().squaredNorm();
  return -std::numbers::ln2 - 0.5 * d * kLog2Pi + log_add_exp(-0.5 * a, -0.5 * b);
}

// ---------------------------------------------------------------------------
// Target models
// ---------------------------------------------------------------------------

// Gaussian summary used to start samplers.
struct InitialGuess {
  Vector mean;
  Matrix cov;
};

class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index dim() const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;

  // Log posterior up to a constant. Stochastic targets draw from rng.
  virtual double log_density(const Vector& theta, Rng& rng) const = 0;

  virtual bool stochastic() const { return false; }
  virtual int refresh_interval() const { return 0; }
  virtual void refresh(const RowsRef& /*recent*/, Rng& /*rng*/) {}

  virtual std::optional<InitialGuess> initial_guess() const { return std::nullopt; }

  // Independent copy for another chain (mutable state is not shared).
  virtual std::unique_ptr<TargetModel> clone() const = 0;
};

using TargetPtr = std::unique_ptr<TargetModel>;

namespace detail {

inline std::vector<std::string> indexed_names(const std::string& stem, Eigen::Index n) {
  std::vector<std::string> out;
  for (Eigen::Index j = 0; j < n; ++j) out.push_back(stem + std::to_string(j));
  return out;
}

inline void append_prior_names(std::vector<std::string>& names, const PriorSpec& prior) {
  if (prior.kind == PriorKind::double_exponential) names.emplace_back("log_tau");
  if (prior.kind == PriorKind::mixture_normals) names.emplace_back("logit_omega");
}

// Prior slice (beta, prior hyperparameter) out of the full parameter vector.
inline Vector prior_slice(const Vector& theta, Eigen::Index p, Eigen::Index model_extra, const PriorSpec& prior) {
  Vector v(p + prior.extra());
  v.head(p) = theta.head(p);
  if (prior.extra() > 0) v[p] = theta[p + model_extra];
  return v;
}

inline void append_prior_guess(InitialGuess& g, const Vector& beta, const PriorSpec& prior) {
  if (prior.extra() == 0) return;
  const Eigen::Index k = g.mean.size();
  g.mean.conservativeResize(k + 1);
  Matrix cov = Matrix::Zero(k + 1, k + 1);
  cov.topLeftCorner(k, k) = g.cov;
  cov(k, k) = 1.0;
  g.cov = cov;
  if (prior.kind == PriorKind::double_exponential) {
    const double scale = beta.size() > 1 ? beta.tail(beta.size() - 1).cwiseAbs().mean() : 1.0;
    g.mean[k] = std::log(std::max(scale, 1e-3));
  } else {
    g.mean[k] = 0.0;
  }
}

// Maximum-likelihood GLM fit by iteratively reweighted least squares with
// a small ridge for stability. Returns (beta, inverse Fisher information).
inline InitialGuess irls(const Dataset& data, bool probit, double prior_var) {
  const Eigen::Index p = data.covariates();
  Vector beta = Vector::Zero(p);
  Matrix info = Matrix::Identity(p, p);
  for (int iter = 0; iter < 50; ++iter) {
    const Vector eta = data.design * beta;
    Vector w(eta.size()), score(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double y = data.response[i];
      if (probit) {
        const double e = std::clamp(eta[i], -30.0, 30.0);
        const double lp = norm_logpdf(e, 0.0, 1.0);
        const double rp = std::exp(lp - norm_logcdf(e));   // phi / Phi
        const double rq = std::exp(lp - norm_logcdf(-e));  // phi / (1 - Phi)
        score[i] = y > 0.5 ? rp : -rq;
        w[i] = std::max(rp * rq, 1e-12);
      } else {
        const double pr = 1.0 / (1.0 + std::exp(-eta[i]));
        score[i] = y - pr;
        w[i] = std::max(pr * (1.0 - pr), 1e-12);
      }
    }
    info = data.design.transpose() * w.asDiagonal() * data.design;
    info.diagonal().array() += 1.0 / prior_var;
    const Vector grad = data.design.transpose() * score - beta / prior_var;
    const Vector step = info.ldlt().solve(grad);
    if (!step.allFinite()) break;
    beta += step.cwiseMax(-5.0).cwiseMin(5.0);
    if (step.cwiseAbs().maxCoeff() < 1e-10) break;
  }
  Matrix cov = info.ldlt().solve(Matrix::Identity(p, p));
  cov = 0.5 * (cov + cov.transpose());
  return {beta, cov};
}

}  // namespace detail

class LogisticTarget : public TargetModel {
 public:
  LogisticTarget(std::shared_ptr<const Dataset> data, PriorSpec prior) : data_(std::move(data)), prior_(prior) {
    data_->validate(true, false);
    prior_.validate();
  }

  std::string name() const override { return "logistic"; }
  Eigen::Index dim() const override { return data_->covariates() + prior_.extra(); }

  std::vector<std::string> parameter_names() const override {
    auto names = detail::indexed_names("beta", data_->covariates());
    detail::append_prior_names(names, prior_);
    return names;
  }

  double log_density(const Vector& theta, Rng&) const override {
    require(theta.size() == dim(), "logistic target: dimension mismatch");
    const Eigen::Index p = data_->covariates();
    return logistic_loglik(theta.head(p), *data_) + log_prior(theta, prior_);
  }

  std::optional<InitialGuess> initial_guess() const override {
    InitialGuess g = detail::irls(*data_, false, prior_.variance);
    const Vector beta = g.mean;
    detail::append_prior_guess(g, beta, prior_);
    return g;
  }

  TargetPtr clone() const override { return std::make_unique<LogisticTarget>(*this); }

  const Dataset& data() const { return *data_; }

 private:
  std::shared_ptr<const Dataset> data_;
  PriorSpec prior_;
};

// Asymmetric-Laplace quantile regression; theta = (beta, ln sigma[, prior hyper]).
class QuantileTarget : public TargetModel {
 public:
  QuantileTarget(std::shared_ptr<const Dataset> data, PriorSpec prior, double delta)
      : data_(std::move(data)), prior_(prior), delta_(delta) {
    data_->validate(false, false);
    prior_.validate();
    require(delta_ > 0.0 && delta_ < 1.0, "quantile target: delta must lie in (0, 1)");
  }

  std::string name() const override { return "quantile"; }
  Eigen::Index dim() const override { return data_->covariates() + 1 + prior_.extra(); }

  std::vector<std::string> parameter_names() const override {
    auto names = detail::indexed_names("beta", data_->covariates());
    names.emplace_back("log_sigma");
    detail::append_prior_names(names, prior_);
    return names;
  }

  double log_density(const Vector& theta, Rng&) const override {
    require(theta.size() == dim(), "quantile target: dimension mismatch");
    const Eigen::Index p = data_->covariates();
    return quantile_loglik(theta.head(p), theta[p], *data_, delta_) +
           log_inv_gamma_of_log(theta[p], prior_.ig_shape, prior_.ig_scale) +
           log_prior(detail::prior_slice(theta, p, 1, prior_), prior_);
  }

  std::optional<InitialGuess> initial_guess() const override {
    const Dataset& d = *data_;
    const Eigen::Index p = d.covariates();
    const Eigen::Index n = d.rows();
    Matrix xtx = d.design.transpose() * d.design;
    xtx.diagonal().array() += 1e-8 * std::max(1.0, xtx.diagonal().maxCoeff());
    const auto ldlt = xtx.ldlt();
    Vector beta = ldlt.solve(d.design.transpose() * d.response);
    const Vector resid = d.response - d.design * beta;
    // Shift the intercept-like first coefficient to the delta-quantile of the residuals.
    std::vector<double> r(resid.data(), resid.data() + resid.size());
    std::sort(r.begin(), r.end());
    const double shift = r[static_cast<std::size_t>(std::floor(delta_ * static_cast<double>(n - 1)))];
    beta[0] += shift;
    const Vector r2 = d.response - d.design * beta;
    double check = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) check += rho_delta(r2[i], delta_);
    const double sigma = std::max(check / static_cast<double>(n), 1e-8);
    const double s2 = r2.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(n - p, 1));

    InitialGuess g;
    g.mean.resize(p + 1);
    g.mean.head(p) = beta;
    g.mean[p] = std::log(sigma);
    g.cov = Matrix::Zero(p + 1, p + 1);
    g.cov.topLeftCorner(p, p) = s2 * ldlt.solve(Matrix::Identity(p, p));
    g.cov.topLeftCorner(p, p) = 0.5 * (g.cov.topLeftCorner(p, p) + g.cov.topLeftCorner(p, p).transpose()).eval();
    g.cov(p, p) = 1.0 / static_cast<double>(n);
    detail::append_prior_guess(g, beta, prior_);
    return g;
  }

  TargetPtr clone() const override { return std::make_unique<QuantileTarget>(*this); }

 private:
  std::shared_ptr<const Dataset> data_;
  PriorSpec prior_;
  double delta_;
};

// Probit random-intercept model with the effects integrated out by
// importance sampling; theta = (beta, ln sigma_mu^2[, prior hyper]).
class ProbitReTarget : public TargetModel {
 public:
  ProbitReTarget(std::shared_ptr<const Dataset> data, PriorSpec prior, ImportanceState initial)
      : data_(std::move(data)), prior_(prior), state_(std::move(initial)) {
    data_->validate(true, true);
    prior_.validate();
    rows_ = std::make_shared<const std::vector<std::vector<Eigen::Index>>>(group_rows(*data_));
    state_.validate(data_->groups());
  }

  std::string name() const override { return "probit_re"; }
  Eigen::Index dim() const override { return data_->covariates() + 1 + prior_.extra(); }

  std::vector<std::string> parameter_names() const override {
    auto names = detail::indexed_names("beta", data_->covariates());
    names.emplace_back("log_sigma2");
    detail::append_prior_names(names, prior_);
    return names;
  }

  double log_density(const Vector& theta, Rng& rng) const override {
    require(theta.size() == dim(), "probit target: dimension mismatch");
    const Eigen::Index p = data_->covariates();
    const double ll = probit_re_loglik_hat(theta.head(p + 1), *data_, state_, *rows_, rng);
    if (!(ll > -kInf)) return -kInf;
    return ll + log_inv_gamma_of_log(theta[p], prior_.ig_shape, prior_.ig_scale) +
           log_prior(detail::prior_slice(theta, p, 1, prior_), prior_);
  }

  bool stochastic() const override { return true; }
  int refresh_interval() const override { return state_.refresh_interval; }

  void refresh(const RowsRef& recent, Rng& rng) override {
    const Eigen::Index p = data_->covariates();
    state_ = refresh_importance(recent.leftCols(p + 1), *data_, state_, *rows_, rng);
  }

  std::optional<InitialGuess> initial_guess() const override {
    const Eigen::Index p = data_->covariates();
    const InitialGuess pooled = detail::irls(*data_, true, prior_.variance);
    InitialGuess g;
    g.mean.resize(p + 1);
    g.mean.head(p) = pooled.mean;
    g.mean[p] = 0.0;
    g.cov = Matrix::Zero(p + 1, p + 1);
    g.cov.topLeftCorner(p, p) = pooled.cov;
    g.cov(p, p) = 1.0;
    detail::append_prior_guess(g, pooled.mean, prior_);
    return g;
  }

  TargetPtr clone() const override { return std::make_unique<ProbitReTarget>(*this); }

  const ImportanceState& importance() const { return state_; }

 private:
  std::shared_ptr<const Dataset> data_;
  PriorSpec prior_;
  ImportanceState state_;
  std::shared_ptr<const std::vector<std::vector<Eigen::Index>>> rows_;
};

class BimodalTarget : public TargetModel {
 public:
  explicit BimodalTarget(Eigen::Index dim = 5, double offset = 3.0) : dim_(dim), offset_(offset) {
    require(dim_ >= 1, "bimodal target: dim must be positive");
  }

  std::string name() const override { return "bimodal"; }
  Eigen::Index dim() const override { return dim_; }
  std::vector<std::string> parameter_names() const override { return detail::indexed_names("x", dim_); }

  double log_density(const Vector& x, Rng&) const override {
    require(x.size() == dim_, "bimodal target: dimension mismatch");
    return bimodal_target_logpdf(x, offset_);
  }

  std::optional<InitialGuess> initial_guess() const override {
    return InitialGuess{Vector::Constant(dim_, -offset_), Matrix::Identity(dim_, dim_)};
  }

  TargetPtr clone() const override { return std::make_unique<BimodalTarget>(*this); }

 private:
  Eigen::Index dim_;
  double offset_;
};

// Multivariate normal target (used for fitted-proposal and symmetry checks).
class GaussianTarget : public TargetModel {
 public:
  GaussianTarget(Vector mean, CovMatrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    require(mean_.size() == cov_.dim(), "gaussian target: dimension mismatch");
  }

  std::string name() const override { return "gaussian"; }
  Eigen::Index dim() const override { return mean_.size(); }
  std::vector<std::string> parameter_names() const override { return detail::indexed_names("x", dim()); }
  double log_density(const Vector& x, Rng&) const override { return mvn_logpdf(x, mean_, cov_); }

  std::optional<InitialGuess> initial_guess() const override { return InitialGuess{mean_, cov_.entries()}; }
  TargetPtr clone() const override { return std::make_unique<GaussianTarget>(*this); }

 private:
  Vector mean_;
  CovMatrix cov_;
};

// Arbitrary deterministic log density.
class FunctionTarget : public TargetModel {
 public:
  using Fn = std::function<double(const Vector&)>;

  FunctionTarget(Eigen::Index dim, Fn fn, std::optional<InitialGuess> guess = std::nullopt)
      : dim_(dim), fn_(std::move(fn)), guess_(std::move(guess)) {}

  std::string name() const override { return "function"; }
  Eigen::Index dim() const override { return dim_; }
  std::vector<std::string> parameter_names() const override { return detail::indexed_names("x", dim_); }
  double log_density(const Vector& x, Rng&) const override { return fn_(x); }
  std::optional<InitialGuess> initial_guess() const override { return guess_; }
  TargetPtr clone() const override { return std::make_unique<FunctionTarget>(*this); }

 private:
  Eigen::Index dim_;
  Fn fn_;
  std::optional<InitialGuess> guess_;
};

}  // namespace adaptmh

#endif  // ADAPTMH_TARGETS_HPP

#ifndef ADAPTMH_ENGINE_HPP
#define ADAPTMH_ENGINE_HPP

#include "adaptmh/core.hpp"
#include "adaptmh/linalg.hpp"
#include "adaptmh/mixture.hpp"
#include "adaptmh/proposals.hpp"
#include "adaptmh/targets.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace adaptmh {

// The chain could not be run (bad start point, unusable initialization).
class engine_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  SamplerKind sampler = SamplerKind::rw3;
  std::size_t iterations = 10000;
  std::size_t burn_in = 0;
  // Last iteration of stage one; 0 runs a single stage.
  std::size_t stage1_end = 0;
  std::vector<std::size_t> schedule;
  std::uint64_t seed = 1;

  RwSettings rw;
  // Three-component random-walk iterations used to initialize the
  // independence samplers; 0 initializes from the target's Gaussian guess.
  std::size_t pilot = 2000;
  std::optional<Vector> start;
  std::optional<Matrix> init_cov;
  AntitheticSpace antithetic_space = AntitheticSpace::z;

  // Pseudo-marginal targets: refresh after every L accepted values (true)
  // or every L iterations (false).
  bool refresh_on_accepted = true;

  void validate() const {
    require(iterations >= 1, "run config: iterations must be positive");
    require(burn_in < iterations, "run config: burn_in must be less than iterations");
    require(stage1_end <= burn_in, "run config: stage1_end must not exceed burn_in");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      require(schedule[i] >= 1 && schedule[i] <= iterations, "run config: schedule point out of range");
      if (i > 0) require(schedule[i] > schedule[i - 1], "run config: schedule must be strictly ascending");
    }
  }
};

struct ChainEvent {
  std::size_t iteration;
  std::string kind;  // update, update_failed, stage_transition, safety_update
  std::string detail;
};

struct ChainHistory {
  std::string sampler;
  std::vector<std::string> names;
  Vector start;
  double start_log_target = 0.0;
  // Row i is the state after iteration i + 1.
  Matrix iterates;
  std::vector<std::uint8_t> accepted;
  Vector log_target;
  Vector seconds;
  std::vector<ChainEvent> events;
  // Iterations after which a pseudo-marginal target refreshed.
  std::vector<std::size_t> refreshes;
  std::size_t pilot_iterations = 0;
  double pilot_seconds = 0.0;

  std::size_t size() const { return accepted.size(); }

  std::size_t accepted_count() const {
    std::size_t n = 0;
    for (auto a : accepted) n += a;
    return n;
  }
};

// Current chain position with cached log target and (independence) log q.
struct ChainState {
  Vector x;
  double log_target = 0.0;
  double log_q = 0.0;
};

// One Metropolis-Hastings transition at iteration n. Returns whether the
// proposal was accepted; on rejection `s` is left untouched.
inline bool mh_step(ChainState& s, Proposal& q, const TargetModel& target, std::size_t n, Rng& rng) {
  Vector z = q.draw(s.x, n, rng);
  const double lz = target.log_density(z, rng);
  double log_alpha = lz - s.log_target;
  double lqz = 0.0;
  if (q.independent()) {
    lqz = q.log_density(z);
    log_alpha += s.log_q - lqz;
  }
  const double u = rng.uniform();
  if (!(lz > -kInf) || !(std::log(u) < log_alpha)) return false;
  s.x = std::move(z);
  s.log_target = lz;
  s.log_q = lqz;
  return true;
}

namespace detail {

struct LoopSpec {
  std::size_t iterations = 0;
  std::size_t stage1_end = 0;
  std::vector<std::size_t> schedule;
  bool safety = false;
  bool refresh_on_accepted = true;
};

inline constexpr std::size_t kSafetyWindow = 100;

// Runs the MH loop from `start`, mutating the proposal and (for
// pseudo-marginal targets) the target.
inline ChainHistory run_loop(Proposal& q, TargetModel& target, const Vector& start, const LoopSpec& spec, Rng& rng) {
  using clock = std::chrono::steady_clock;
  const Eigen::Index d = target.dim();
  ChainHistory h;
  h.sampler = std::string(sampler_name(q.kind()));
  h.names = target.parameter_names();
  h.start = start;
  h.iterates.resize(static_cast<Eigen::Index>(spec.iterations), d);
  h.accepted.assign(spec.iterations, 0);
  h.log_target.resize(static_cast<Eigen::Index>(spec.iterations));
  h.seconds.resize(static_cast<Eigen::Index>(spec.iterations));

  ChainState s;
  s.x = start;
  s.log_target = target.log_density(start, rng);
  if (!std::isfinite(s.log_target))
    throw engine_error("log target is not finite at the start point (" + std::to_string(s.log_target) + ")");
  if (q.independent()) s.log_q = q.log_density(s.x);
  h.start_log_target = s.log_target;
  q.observe(s.x);

  const bool two_stage = spec.stage1_end > 0;
  std::size_t next_update = 0;
  std::size_t accepted = 0;
  std::size_t idle = 0;  // iterations since the last accept or adaptation
  std::size_t stage_start = 0;  // first history row used by fits

  const int interval = target.stochastic() ? target.refresh_interval() : 0;
  std::deque<Vector> recent;
  std::size_t since_refresh = 0;

  const auto refit = [&](std::size_t n) {
    const AdaptContext ctx{h.iterates.middleRows(static_cast<Eigen::Index>(stage_start),
                                                 static_cast<Eigen::Index>(n - stage_start)),
                           accepted, n};
    AdaptOutcome out = q.adapt(ctx, rng);
    if (q.independent()) s.log_q = q.log_density(s.x);
    idle = 0;
    return out;
  };

  for (std::size_t n = 1; n <= spec.iterations; ++n) {
    const auto t0 = clock::now();
    const bool acc = mh_step(s, q, target, n, rng);
    const auto row = static_cast<Eigen::Index>(n - 1);
    h.iterates.row(row) = s.x.transpose();
    h.accepted[n - 1] = acc ? 1 : 0;
    q.observe(s.x);
    if (acc) {
      ++accepted;
      idle = 0;
    } else {
      ++idle;
    }

    if (interval > 0) {
      bool due = false;
      if (spec.refresh_on_accepted) {
        if (acc) {
          recent.push_back(s.x);
          if (recent.size() > static_cast<std::size_t>(interval)) recent.pop_front();
          due = ++since_refresh >= static_cast<std::size_t>(interval);
        }
      } else {
        recent.push_back(s.x);
        if (recent.size() > static_cast<std::size_t>(interval)) recent.pop_front();
        due = ++since_refresh >= static_cast<std::size_t>(interval);
      }
      if (due) {
        Matrix m(static_cast<Eigen::Index>(recent.size()), d);
        for (std::size_t i = 0; i < recent.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = recent[i].transpose();
        target.refresh(m, rng);
        const double lt = target.log_density(s.x, rng);
        if (std::isfinite(lt)) s.log_target = lt;
        since_refresh = 0;
        h.refreshes.push_back(n);
      }
    }

    bool adapted = false;
    while (next_update < spec.schedule.size() && spec.schedule[next_update] < n) ++next_update;
    if (next_update < spec.schedule.size() && spec.schedule[next_update] == n) {
      const AdaptOutcome out = refit(n);
      h.events.push_back({n, out.failed ? "update_failed" : "update", out.detail});
      adapted = true;
      ++next_update;
    }
    if (two_stage && n == spec.stage1_end) {
      std::string detail;
      if (!adapted) {
        const AdaptOutcome out = refit(n);
        detail = (out.failed ? "refit failed: " : "refit: ") + out.detail;
      }
      q.enter_stage_two();
      if (q.independent()) s.log_q = q.log_density(s.x);
      stage_start = n;
      h.events.push_back({n, "stage_transition", detail});
      adapted = true;
    }
    if (!adapted && spec.safety && two_stage && n < spec.stage1_end && idle >= kSafetyWindow) {
      const AdaptOutcome out = refit(n);
      h.events.push_back({n, "safety_update", (out.failed ? "failed: " : "") + out.detail});
    }

    h.log_target[row] = s.log_target;
    h.seconds[row] = std::chrono::duration<double>(clock::now() - t0).count();
  }
  return h;
}

// Gaussian draws standing in for a pilot run when none is requested.
inline Matrix gaussian_cloud(const Vector& mean, const CovMatrix& cov, Eigen::Index n, Rng& rng) {
  Matrix pts(n, mean.size());
  for (Eigen::Index i = 0; i < n; ++i) pts.row(i) = mvn_sample(mean, cov, rng).transpose();
  return pts;
}

}  // namespace detail

// Builds the initial proposal and start point for `cfg`, running the pilot
// random walk for the independence samplers.
struct ChainSetup {
  ProposalPtr proposal;
  Vector start;
  std::size_t pilot_iterations = 0;
  double pilot_seconds = 0.0;
};

inline ChainSetup prepare_chain(const RunConfig& cfg, TargetModel& target, Rng& rng) {
  const Eigen::Index d = target.dim();
  const auto guess = target.initial_guess();
  Vector start = cfg.start ? *cfg.start : (guess ? guess->mean : Vector::Zero(d));
  require(start.size() == d, "run config: start dimension mismatch");
  Matrix cov0 = cfg.init_cov ? *cfg.init_cov : (guess ? guess->cov : Matrix::Identity(d, d));
  require(cov0.rows() == d && cov0.cols() == d, "run config: initial covariance dimension mismatch");
  const CovMatrix sigma1(cov0);

  ChainSetup setup;
  if (!is_independence(cfg.sampler)) {
    setup.proposal = std::make_unique<RandomWalkProposal>(RwState(d, cfg.sampler == SamplerKind::rw3, cfg.rw, sigma1));
    setup.start = start;
    return setup;
  }

  Matrix sample;
  if (cfg.pilot > 0) {
    RandomWalkProposal pilot(RwState(d, true, cfg.rw, sigma1));
    detail::LoopSpec spec;
    spec.iterations = cfg.pilot;
    spec.refresh_on_accepted = cfg.refresh_on_accepted;
    const auto t0 = std::chrono::steady_clock::now();
    ChainHistory ph = detail::run_loop(pilot, target, start, spec, rng);
    setup.pilot_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    setup.pilot_iterations = cfg.pilot;
    const Eigen::Index half = static_cast<Eigen::Index>(cfg.pilot / 2);
    sample = ph.iterates.bottomRows(static_cast<Eigen::Index>(cfg.pilot) - half);
    start = ph.iterates.row(static_cast<Eigen::Index>(cfg.pilot) - 1).transpose();
  } else {
    sample = detail::gaussian_cloud(start, sigma1, std::max<Eigen::Index>(2000, 20 * d), rng);
  }

  try {
    if (cfg.sampler == SamplerKind::imh_mn) {
      auto [mean, cov] = sample_moments(sample);
      cov.diagonal().array() += kCovJitterFloor;
      setup.proposal = std::make_unique<MixtureProposal>(ImhMnState(MixtureOfNormals::single(mean, CovMatrix(cov))));
    } else {
      if (sample.rows() < 10 * d) throw engine_error("pilot run too short to fit the copula (need 20 * dim iterations)");
      ImhTctState st;
      st.copula = fit_t_copula(sample, rng);
      st.mvt = moment_mvt(sample);
      st.antithetic = cfg.sampler == SamplerKind::imh_tct_a;
      st.space = cfg.antithetic_space;
      setup.proposal = std::make_unique<CopulaProposal>(std::move(st));
    }
  } catch (const factorization_error& e) {
    throw engine_error(std::string("initial proposal could not be built: ") + e.what());
  }
  setup.start = start;
  return setup;
}

// Runs one chain on a private copy of `target`.
inline ChainHistory run_chain(const RunConfig& cfg, const TargetModel& target) {
  cfg.validate();
  TargetPtr tgt = target.clone();
  Rng rng(cfg.seed);
  ChainSetup setup = prepare_chain(cfg, *tgt, rng);

  detail::LoopSpec spec;
  spec.iterations = cfg.iterations;
  spec.stage1_end = is_independence(cfg.sampler) ? cfg.stage1_end : 0;
  spec.schedule = cfg.schedule;
  spec.safety = is_independence(cfg.sampler);
  spec.refresh_on_accepted = cfg.refresh_on_accepted;
  ChainHistory h = detail::run_loop(*setup.proposal, *tgt, setup.start, spec, rng);
  h.pilot_iterations = setup.pilot_iterations;
  h.pilot_seconds = setup.pilot_seconds;
  return h;
}

// Runs a chain with a caller-built proposal (no pilot, no cloning).
inline ChainHistory run_chain(Proposal& proposal, TargetModel& target, const Vector& start, std::size_t iterations,
                              const std::vector<std::size_t>& schedule, std::size_t stage1_end, Rng& rng) {
  detail::LoopSpec spec;
  spec.iterations = iterations;
  spec.schedule = schedule;
  spec.stage1_end = stage1_end;
  spec.safety = proposal.independent();
  return detail::run_loop(proposal, target, start, spec, rng);
}

struct MatrixJob {
  RunConfig config;
  std::shared_ptr<const TargetModel> target;
};

struct MatrixResult {
  std::optional<ChainHistory> history;
  std::string error;
};

// Runs independent jobs on up to `jobs` threads. Results are in job order
// and do not depend on the thread count.
inline std::vector<MatrixResult> run_matrix(const std::vector<MatrixJob>& work, unsigned jobs = 1) {
  std::vector<MatrixResult> results(work.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= work.size()) return;
      try {
        results[i].history = run_chain(work[i].config, *work[i].target);
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(work.size())));
  if (n == 1) {
    worker();
    return results;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace adaptmh

#endif  // ADAPTMH_ENGINE_HPP

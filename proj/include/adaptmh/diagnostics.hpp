#ifndef ADAPTMH_DIAGNOSTICS_HPP
#define ADAPTMH_DIAGNOSTICS_HPP

#include "adaptmh/core.hpp"
#include "adaptmh/engine.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace adaptmh {

inline constexpr double kEssDraws = 10000.0;
inline constexpr double kEctDraws = 100000.0;

// Biased (1/M) sample autocorrelations at lags 0..max_lag, computed by FFT.
inline std::vector<double> autocorr(std::span<const double> series, std::size_t max_lag) {
  const std::size_t m = series.size();
  require(m > max_lag, "autocorr: series must be longer than max_lag");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(m);

  std::size_t len = 1;
  while (len < 2 * m) len <<= 1;
  std::vector<double> padded(len, 0.0);
  double var = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    padded[i] = series[i] - mean;
    var += padded[i] * padded[i];
  }
  if (!(var > 1e-300 * static_cast<double>(m))) throw contract_violation("autocorr: series has zero variance");

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& c : spec) c = std::complex<double>(std::norm(c), 0.0);
  std::vector<double> acov;
  fft.inv(acov, spec);

  std::vector<double> rho(max_lag + 1);
  for (std::size_t j = 0; j <= max_lag; ++j) rho[j] = acov[j] / acov[0];
  rho[0] = 1.0;
  return rho;
}

struct Inefficiency {
  double value = kNaN;
  std::size_t lags = 0;
  // The cutoff was never met and the sum stopped at M / 2.
  bool truncated = false;
  // Zero-variance series: the factor is undefined.
  bool defined = false;
};

// Truncated-kernel inefficiency factor: 1 + 2 * sum_{j<=T} rho_j where T is
// the first lag with |rho_j| < 2 / sqrt(M).
inline Inefficiency inefficiency(std::span<const double> series) {
  const std::size_t m = series.size();
  require(m >= 100, "inefficiency: need at least 100 values");
  const std::size_t cap = m / 2;
  Inefficiency out;
  std::vector<double> rho;
  try {
    rho = autocorr(series, cap);
  } catch (const contract_violation&) {
    return out;
  }
  const double cutoff = 2.0 / std::sqrt(static_cast<double>(m));
  double sum = 0.0;
  std::size_t t = 1;
  for (; t <= cap; ++t) {
    sum += rho[t];
    if (std::abs(rho[t]) < cutoff) break;
  }
  if (t > cap) {
    t = cap;
    out.truncated = true;
  }
  out.value = std::max(0.0, 1.0 + 2.0 * sum);
  out.lags = t;
  out.defined = true;
  return out;
}

inline double ess(double inefficiency_factor) {
  require(inefficiency_factor > 0.0, "ess: inefficiency factor must be positive");
  return kEssDraws / inefficiency_factor;
}

inline double ect(double inefficiency_factor, double time_per_iteration) {
  require(inefficiency_factor > 0.0, "ect: inefficiency factor must be positive");
  return kEctDraws * inefficiency_factor * time_per_iteration;
}

struct DiagnosticsReport {
  std::string sampler;
  std::vector<std::string> names;
  std::size_t draws = 0;
  double acceptance_rate = 0.0;  // percent
  std::vector<double> if_values;  // NaN where undefined
  std::vector<double> ess;        // NaN where undefined or IF == 0
  std::vector<std::uint8_t> if_truncated;
  std::vector<std::uint8_t> if_undefined;
  double if_min = kNaN;
  double if_median = kNaN;
  double if_max = kNaN;
  double time_per_iteration = kNaN;
  // ECT at the median IF.
  double ect = kNaN;
  std::vector<double> mean;
  std::vector<double> sd;
};

inline DiagnosticsReport summarize(const ChainHistory& h, std::size_t burn_in) {
  const std::size_t n = h.size();
  require(burn_in < n, "summarize: burn_in must be less than the chain length");
  const std::size_t m = n - burn_in;
  const Eigen::Index d = h.iterates.cols();

  DiagnosticsReport r;
  r.sampler = h.sampler;
  r.names = h.names;
  r.draws = m;
  std::size_t acc = 0;
  for (std::size_t i = burn_in; i < n; ++i) acc += h.accepted[i];
  r.acceptance_rate = 100.0 * static_cast<double>(acc) / static_cast<double>(m);

  std::vector<double> defined;
  std::vector<double> col(m);
  for (Eigen::Index j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      col[i] = h.iterates(static_cast<Eigen::Index>(burn_in + i), j);
      mean += col[i];
    }
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    r.mean.push_back(mean);
    r.sd.push_back(m > 1 ? std::sqrt(ss / static_cast<double>(m - 1)) : 0.0);

    Inefficiency f;
    if (m >= 100) f = inefficiency(col);
    r.if_values.push_back(f.defined ? f.value : kNaN);
    r.if_truncated.push_back(f.truncated ? 1 : 0);
    r.if_undefined.push_back(f.defined ? 0 : 1);
    r.ess.push_back(f.defined && f.value > 0.0 ? ess(f.value) : kNaN);
    if (f.defined) defined.push_back(f.value);
  }
  if (!defined.empty()) {
    std::sort(defined.begin(), defined.end());
    r.if_min = defined.front();
    r.if_max = defined.back();
    const std::size_t k = defined.size();
    r.if_median = k % 2 ? defined[k / 2] : 0.5 * (defined[k / 2 - 1] + defined[k / 2]);
  }
  if (h.seconds.size() > 0) {
    r.time_per_iteration = h.seconds.sum() / static_cast<double>(h.seconds.size());
    if (r.if_median > 0.0) r.ect = ect(r.if_median, r.time_per_iteration);
  }
  return r;
}

}  // namespace adaptmh

#endif  // ADAPTMH_DIAGNOSTICS_HPP

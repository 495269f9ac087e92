#ifndef ADAPTMH_EXPERIMENT_HPP
#define ADAPTMH_EXPERIMENT_HPP

#include "adaptmh/core.hpp"
#include "adaptmh/diagnostics.hpp"
#include "adaptmh/engine.hpp"
#include "adaptmh/targets.hpp"

#include "json.hpp"

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace adaptmh {

// ---------------------------------------------------------------------------
// Number formatting and parsing
// ---------------------------------------------------------------------------

// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

// ---------------------------------------------------------------------------
// CSV datasets
// ---------------------------------------------------------------------------

struct Table {
  std::vector<std::string> header;
  Matrix values;
};

// Reads a headed, comma-separated numeric table. Blank or non-numeric
// cells are reported with their line number.
inline Table read_numeric_csv(std::istream& in, const std::string& source) {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      for (auto& h : split(line, ',')) t.header.emplace_back(trim(h));
      for (const auto& h : t.header)
        if (h.empty()) throw data_error(source + ":1: empty column name in header");
      continue;
    }
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != t.header.size())
      throw data_error(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                       " cells, found " + std::to_string(cells.size()));
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = parse_double(cells[c]);
      if (!v)
        throw data_error(source + ":" + std::to_string(lineno) + ": column '" + t.header[c] +
                         "' is blank or not a finite number");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw data_error(source + ": missing header row");
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return t;
}

struct LoadedDataset {
  Dataset data;
  std::vector<std::string> covariate_names;
};

inline LoadedDataset dataset_from_table(const Table& t, const std::string& source) {
  Eigen::Index y_col = -1, g_col = -1;
  std::vector<Eigen::Index> x_cols;
  LoadedDataset out;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    if (t.header[c] == "y") {
      if (y_col >= 0) throw config_error(source + ": duplicate 'y' column");
      y_col = ci;
    } else if (t.header[c] == "group") {
      if (g_col >= 0) throw config_error(source + ": duplicate 'group' column");
      g_col = ci;
    } else {
      x_cols.push_back(ci);
      out.covariate_names.push_back(t.header[c]);
    }
  }
  if (y_col < 0) throw config_error(source + ": no response column named 'y'");
  const Eigen::Index n = t.values.rows();
  out.data.design.resize(n, static_cast<Eigen::Index>(x_cols.size()));
  for (std::size_t j = 0; j < x_cols.size(); ++j)
    out.data.design.col(static_cast<Eigen::Index>(j)) = t.values.col(x_cols[j]);
  out.data.response = t.values.col(y_col);
  if (g_col >= 0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = t.values(i, g_col);
      if (g != std::floor(g))
        throw data_error(source + ":" + std::to_string(i + 2) + ": group label is not an integer");
      out.data.group_index.push_back(static_cast<int>(g));
    }
  }
  return out;
}

inline LoadedDataset ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open data file " + path.string());
  return dataset_from_table(read_numeric_csv(in, path.string()), path.string());
}

inline void write_dataset_csv(std::ostream& out, const Dataset& data, const std::vector<std::string>& names) {
  for (std::size_t j = 0; j < names.size(); ++j) out << names[j] << ',';
  out << 'y';
  if (!data.group_index.empty()) out << ",group";
  out << '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.covariates(); ++j) out << format_double(data.design(i, j)) << ',';
    out << format_double(data.response[i]);
    if (!data.group_index.empty()) out << ',' << data.group_index[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

// Flat `key = value` settings with dotted keys; `#` starts a comment.
class Settings {
 public:
  static Settings parse(std::istream& in, const std::string& source) {
    Settings s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string_view::npos)
        throw config_error(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
      const std::string key(trim(body.substr(0, eq)));
      if (key.empty()) throw config_error(source + ":" + std::to_string(lineno) + ": empty key");
      s.values_[key] = std::string(trim(body.substr(eq + 1)));
    }
    return s;
  }

  static Settings parse_text(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    return parse(in, source);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  // Applies a `key=value` override.
  void apply_override(std::string_view kv) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw config_error("override '" + std::string(kv) + "' is not key=value");
    set(std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1))));
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string required(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end() || it->second.empty()) throw config_error("missing required setting '" + key + "'");
    return it->second;
  }

  double num(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto v = parse_double(values_.at(key));
    if (!v) throw config_error("setting '" + key + "' is not a number: " + values_.at(key));
    return *v;
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    if (!has(key)) return fallback;
    const double v = num(key, 0.0);
    if (v < 0.0 || v != std::floor(v) || v > 1e15)
      throw config_error("setting '" + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = values_.at(key);
    if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "off" || v == "no" || v == "0") return false;
    throw config_error("setting '" + key + "' must be true or false");
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    if (!has(key) || trim(values_.at(key)).empty()) return out;
    for (const auto& part : split(values_.at(key), ',')) {
      const auto v = parse_double(part);
      if (!v) throw config_error("setting '" + key + "' has a non-numeric entry '" + part + "'");
      out.push_back(*v);
    }
    return out;
  }

  std::vector<std::string> words(const std::string& key) const {
    std::vector<std::string> out;
    if (!has(key)) return out;
    for (const auto& part : split(values_.at(key), ','))
      if (!trim(part).empty()) out.emplace_back(trim(part));
    return out;
  }

  const std::map<std::string, std::string>& all() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct ExperimentSpec {
  std::string name;
  Settings settings;
  // Relative data paths resolve against this directory.
  std::filesystem::path base_dir;
};

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Intercept column plus standard normal covariates.
inline Matrix synthetic_design(Eigen::Index n, Eigen::Index p, Rng& rng) {
  Matrix x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < p; ++j) x(i, j) = rng.normal();
  }
  return x;
}

inline Dataset synthetic_logistic(Eigen::Index n, const Vector& beta, Rng& rng) {
  Dataset d;
  d.design = synthetic_design(n, beta.size(), rng);
  d.response.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eta = d.design.row(i).dot(beta);
    d.response[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
  }
  return d;
}

// y = x'beta + sigma * e with standard normal errors.
inline Dataset synthetic_linear(Eigen::Index n, const Vector& beta, double sigma, Rng& rng) {
  Dataset d;
  d.design = synthetic_design(n, beta.size(), rng);
  d.response = d.design * beta;
  for (Eigen::Index i = 0; i < n; ++i) d.response[i] += sigma * rng.normal();
  return d;
}

inline Dataset synthetic_probit_re(int groups, int per_group, const Vector& beta, double sigma2, Rng& rng) {
  Dataset d;
  const Eigen::Index n = static_cast<Eigen::Index>(groups) * per_group;
  d.design = synthetic_design(n, beta.size(), rng);
  d.response.resize(n);
  Eigen::Index row = 0;
  for (int g = 1; g <= groups; ++g) {
    const double mu = std::sqrt(sigma2) * rng.normal();
    for (int j = 0; j < per_group; ++j, ++row) {
      d.response[row] = mu + d.design.row(row).dot(beta) + rng.normal() > 0.0 ? 1.0 : 0.0;
      d.group_index.push_back(g);
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

inline std::vector<ExperimentSpec> builtin_experiments() {
  const auto make = [](std::string name, const char* text) {
    return ExperimentSpec{std::move(name), Settings::parse_text(text, "preset"), {}};
  };
  std::vector<ExperimentSpec> out;
  out.push_back(make("fig1-bimodal", R"(
target.kind = bimodal
target.dim = 5
target.offset = 3
sampler.kind = rwm3c, rwm
sampler.kappa3 = 16
sampler.start = -3, -3, -3, -3, -3
run.iterations = 200000
run.burn_in = 20000
run.seed = 20080601
output.trace_thin = 40
)"));
  out.push_back(make("logistic-synthetic", R"(
target.kind = logistic
data.synthetic = true
data.n = 500
data.beta = 0.3, -1.0, 0.8, 0.5, -0.4
prior.kind = normal
sampler.kind = rwm, rwm3c, imh-mn, imh-tct, imh-tct-a
sampler.pilot = 2000
run.iterations = 60000
run.burn_in = 10000
run.stage1_end = 5000
run.schedule = 50, 100, 150, 200, 300, 500, 700, 1000, 2000, 5000, 10000
run.seed = 20080602
)"));
  out.push_back(make("quantile-synthetic-d0.1", R"(
target.kind = quantile
target.delta = 0.1
data.synthetic = true
data.n = 500
data.beta = 1.0, 0.5, -0.5, 0.25
data.sigma = 1.0
prior.kind = normal
sampler.kind = rwm, rwm3c, imh-mn, imh-tct, imh-tct-a
sampler.pilot = 2000
run.iterations = 60000
run.burn_in = 10000
run.stage1_end = 3000
run.schedule = 100, 150, 200, 300, 500, 700, 1000, 2000, 3000, 5000, 7500, 10000
run.seed = 20080603
)"));
  out.push_back(make("probit-re-synthetic", R"(
target.kind = probit_re
data.synthetic = true
data.groups = 40
data.per_group = 8
data.beta = -0.2, 0.8, -0.5
data.sigma2 = 1.0
prior.kind = normal
importance.draws = 100
importance.kappa = 4
importance.interval = 100
importance.count = accepted
sampler.kind = rwm, rwm3c, imh-mn, imh-tct, imh-tct-a
sampler.pilot = 2000
run.iterations = 20000
run.burn_in = 10000
run.stage1_end = 5000
run.schedule = 20, 50, 100, 150, 200, 300, 400, 500, 600, 700, 800, 900, 1000, 1100, 1200, 1300, 1400, 1500, 2000, 2500, 3000, 3500, 4000, 4500, 5000, 6000, 7000, 8000, 9000, 10000
run.seed = 20080604
)"));
  return out;
}

inline std::optional<ExperimentSpec> find_preset(std::string_view name) {
  for (auto& e : builtin_experiments())
    if (e.name == name) return e;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Wiring
// ---------------------------------------------------------------------------

inline PriorSpec prior_from(const Settings& s) {
  PriorSpec p;
  const std::string kind = s.str("prior.kind", "normal");
  if (kind == "normal") p.kind = PriorKind::normal;
  else if (kind == "double_exponential") p.kind = PriorKind::double_exponential;
  else if (kind == "mixture_normals") p.kind = PriorKind::mixture_normals;
  else throw config_error("unknown prior.kind '" + kind + "'");
  p.variance = s.num("prior.variance", p.variance);
  p.tau_s2 = s.num("prior.tau_s2", p.tau_s2);
  p.tau_l2 = s.num("prior.tau_l2", p.tau_l2);
  p.ig_shape = s.num("prior.ig_shape", p.ig_shape);
  p.ig_scale = s.num("prior.ig_scale", p.ig_scale);
  try {
    p.validate();
  } catch (const contract_violation& e) {
    throw config_error(e.what());
  }
  return p;
}

inline Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct BuiltTarget {
  std::shared_ptr<const TargetModel> target;
  std::shared_ptr<const Dataset> data;
  std::vector<std::string> covariate_names;
  bool synthetic = false;
};

inline BuiltTarget build_target(const ExperimentSpec& spec, std::uint64_t seed) {
  const Settings& s = spec.settings;
  const std::string kind = s.required("target.kind");
  BuiltTarget out;
  if (kind == "bimodal") {
    out.target = std::make_shared<BimodalTarget>(static_cast<Eigen::Index>(s.count("target.dim", 5)),
                                                 s.num("target.offset", 3.0));
    return out;
  }
  if (kind != "logistic" && kind != "quantile" && kind != "probit_re")
    throw config_error("unknown target.kind '" + kind + "'");

  auto data = std::make_shared<Dataset>();
  if (s.flag("data.synthetic", false)) {
    out.synthetic = true;
    Rng rng(s.count("data.seed", splitmix64(seed)));
    const Vector beta = to_eigen(s.numbers("data.beta"));
    if (beta.size() < 1) throw config_error("synthetic data needs data.beta");
    if (kind == "logistic") {
      *data = synthetic_logistic(static_cast<Eigen::Index>(s.count("data.n", 500)), beta, rng);
    } else if (kind == "quantile") {
      *data = synthetic_linear(static_cast<Eigen::Index>(s.count("data.n", 500)), beta, s.num("data.sigma", 1.0), rng);
    } else {
      *data = synthetic_probit_re(static_cast<int>(s.count("data.groups", 40)), static_cast<int>(s.count("data.per_group", 8)),
                                  beta, s.num("data.sigma2", 1.0), rng);
    }
    for (Eigen::Index j = 0; j < beta.size(); ++j) out.covariate_names.push_back(j == 0 ? "intercept" : "x" + std::to_string(j));
  } else {
    std::filesystem::path path = s.required("data.path");
    if (path.is_relative() && !spec.base_dir.empty()) path = spec.base_dir / path;
    LoadedDataset loaded = ingest_csv(path);
    *data = std::move(loaded.data);
    out.covariate_names = std::move(loaded.covariate_names);
  }
  out.data = data;

  const PriorSpec prior = prior_from(s);
  if (kind == "logistic") {
    out.target = std::make_shared<LogisticTarget>(data, prior);
  } else if (kind == "quantile") {
    out.target = std::make_shared<QuantileTarget>(data, prior, s.num("target.delta", 0.5));
  } else {
    if (data->group_index.empty()) throw config_error("probit_re target needs a 'group' column");
    data->validate(true, true);
    const ImportanceState st = ImportanceState::initial(
        data->groups(), s.num("importance.kappa", 4.0), static_cast<int>(s.count("importance.draws", 100)),
        static_cast<int>(s.count("importance.interval", 100)));
    out.target = std::make_shared<ProbitReTarget>(data, prior, st);
  }
  return out;
}

inline std::vector<RunConfig> build_configs(const Settings& s, std::uint64_t seed, Eigen::Index dim) {
  RunConfig base;
  base.iterations = s.count("run.iterations", 10000);
  base.burn_in = s.count("run.burn_in", base.iterations / 5);
  base.stage1_end = s.count("run.stage1_end", 0);
  for (double v : s.numbers("run.schedule")) {
    if (v < 1.0 || v != std::floor(v)) throw config_error("run.schedule entries must be positive integers");
    base.schedule.push_back(static_cast<std::size_t>(v));
  }
  base.rw.n0 = s.count("sampler.n0", 0);
  base.rw.kappa1 = s.num("sampler.kappa1", kNaN);
  base.rw.kappa2 = s.num("sampler.kappa2", kNaN);
  base.rw.kappa3 = s.num("sampler.kappa3", 25.0);
  base.pilot = s.count("sampler.pilot", 2000);
  if (s.has("sampler.start")) {
    const Vector start = to_eigen(s.numbers("sampler.start"));
    if (start.size() != dim) throw config_error("sampler.start must have " + std::to_string(dim) + " entries");
    base.start = start;
  }
  const std::string space = s.str("sampler.antithetic_space", "z");
  if (space == "z") base.antithetic_space = AntitheticSpace::z;
  else if (space == "x") base.antithetic_space = AntitheticSpace::x;
  else throw config_error("sampler.antithetic_space must be x or z");
  const std::string counting = s.str("importance.count", "accepted");
  if (counting == "accepted") base.refresh_on_accepted = true;
  else if (counting == "iterations") base.refresh_on_accepted = false;
  else throw config_error("importance.count must be accepted or iterations");

  std::vector<RunConfig> out;
  std::vector<std::string> kinds = s.words("sampler.kind");
  if (kinds.empty()) throw config_error("missing required setting 'sampler.kind'");
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const auto k = parse_sampler(kinds[i]);
    if (!k) throw config_error("unknown sampler '" + kinds[i] + "' (expected rwm, rwm3c, imh-mn, imh-tct, imh-tct-a)");
    RunConfig c = base;
    c.sampler = *k;
    c.seed = splitmix64(seed ^ (0x100000001b3ULL * (i + 1)));
    try {
      c.validate();
    } catch (const contract_violation& e) {
      throw config_error(e.what());
    }
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outputs
// ---------------------------------------------------------------------------

struct RunOptions {
  std::filesystem::path out_dir = "adaptmh_out";
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  bool timing = true;
  bool quiet = false;
};

namespace detail {

inline nlohmann::ordered_json number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline nlohmann::ordered_json numbers_or_null(const std::vector<double>& v) {
  auto a = nlohmann::ordered_json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw config_error("cannot write " + p.string());
  out << text;
}

inline std::string safe_name(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  return s;
}

}  // namespace detail

inline nlohmann::ordered_json report_json(const DiagnosticsReport& r, const ChainHistory& h, const RunConfig& c,
                                          const std::string& target, bool timing) {
  nlohmann::ordered_json j;
  j["sampler"] = r.sampler;
  j["target"] = target;
  j["seed"] = c.seed;
  j["iterations"] = h.size();
  j["burn_in"] = c.burn_in;
  j["draws"] = r.draws;
  j["parameters"] = r.names;
  j["acceptance_rate"] = detail::number_or_null(r.acceptance_rate);
  j["if"] = detail::numbers_or_null(r.if_values);
  j["if_min"] = detail::number_or_null(r.if_min);
  j["if_median"] = detail::number_or_null(r.if_median);
  j["if_max"] = detail::number_or_null(r.if_max);
  j["ess"] = detail::numbers_or_null(r.ess);
  j["ect"] = timing ? detail::number_or_null(r.ect) : nullptr;
  j["time_per_iteration"] = timing ? detail::number_or_null(r.time_per_iteration) : nullptr;
  j["mean"] = detail::numbers_or_null(r.mean);
  j["sd"] = detail::numbers_or_null(r.sd);
  std::vector<std::string> truncated, undefined;
  for (std::size_t k = 0; k < r.names.size(); ++k) {
    if (r.if_truncated[k]) truncated.push_back(r.names[k]);
    if (r.if_undefined[k]) undefined.push_back(r.names[k]);
  }
  j["if_truncated"] = truncated;
  j["if_undefined"] = undefined;
  j["pilot_iterations"] = h.pilot_iterations;
  j["events"] = h.events.size();
  j["importance_refreshes"] = h.refreshes.size();
  return j;
}

inline void write_chain_outputs(const std::filesystem::path& dir, const ChainHistory& h, const DiagnosticsReport& r,
                                const RunConfig& c, const std::string& target, const Settings& s, bool timing) {
  std::filesystem::create_directories(dir);
  const std::size_t burn = c.burn_in;
  const Eigen::Index d = h.iterates.cols();

  if (s.flag("output.draws", true)) {
    std::string text = "iteration";
    for (const auto& n : h.names) text += "," + n;
    text += ",accepted,log_target\n";
    for (std::size_t i = burn; i < h.size(); ++i) {
      text += std::to_string(i + 1);
      for (Eigen::Index j = 0; j < d; ++j) text += "," + format_double(h.iterates(static_cast<Eigen::Index>(i), j));
      text += "," + std::to_string(h.accepted[i]) + "," + format_double(h.log_target[static_cast<Eigen::Index>(i)]) + "\n";
    }
    detail::write_text(dir / "draws.csv", text);
  }

  if (s.flag("output.report", true))
    detail::write_text(dir / "report.json", report_json(r, h, c, target, timing).dump(2) + "\n");

  {
    std::string text = "iteration,kind,detail\n";
    for (const auto& e : h.events) {
      std::string detail = e.detail;
      for (char& ch : detail)
        if (ch == ',' || ch == '\n') ch = ';';
      text += std::to_string(e.iteration) + "," + e.kind + "," + detail + "\n";
    }
    detail::write_text(dir / "events.csv", text);
  }

  if (s.flag("output.tracedata", true)) {
    const std::size_t m = h.size() - burn;
    const std::size_t thin = std::max<std::size_t>(1, s.count("output.trace_thin", std::max<std::size_t>(1, h.size() / 5000)));
    const std::size_t bins = std::max<std::size_t>(1, s.count("output.hist_bins", 50));
    for (Eigen::Index j = 0; j < d; ++j) {
      const std::string stem = detail::safe_name(h.names[static_cast<std::size_t>(j)]);
      std::string trace = "iteration,value\n";
      for (std::size_t i = 0; i < h.size(); i += thin)
        trace += std::to_string(i + 1) + "," + format_double(h.iterates(static_cast<Eigen::Index>(i), j)) + "\n";
      detail::write_text(dir / ("trace_" + stem + ".csv"), trace);

      double lo = kInf, hi = -kInf;
      for (std::size_t i = burn; i < h.size(); ++i) {
        lo = std::min(lo, h.iterates(static_cast<Eigen::Index>(i), j));
        hi = std::max(hi, h.iterates(static_cast<Eigen::Index>(i), j));
      }
      if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
      }
      std::vector<std::size_t> counts(bins, 0);
      const double width = (hi - lo) / static_cast<double>(bins);
      for (std::size_t i = burn; i < h.size(); ++i) {
        const double v = h.iterates(static_cast<Eigen::Index>(i), j);
        auto b = static_cast<std::size_t>((v - lo) / width);
        counts[std::min(b, bins - 1)]++;
      }
      std::string hist = "lower,upper,count,density\n";
      for (std::size_t b = 0; b < bins; ++b) {
        const double a = lo + width * static_cast<double>(b);
        const double e = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
        hist += format_double(a) + "," + format_double(e) + "," + std::to_string(counts[b]) + "," +
                format_double(static_cast<double>(counts[b]) / (static_cast<double>(m) * width)) + "\n";
      }
      detail::write_text(dir / ("hist_" + stem + ".csv"), hist);
    }
  }
}

// Runs every sampler of `spec`, writes outputs under opts.out_dir, and
// returns the process exit status (0 when every chain succeeded).
inline int run_experiment(const ExperimentSpec& spec, const RunOptions& opts, std::ostream& log = std::cerr) {
  const Settings& s = spec.settings;
  std::uint64_t seed = 0;
  if (opts.seed) seed = *opts.seed;
  else if (s.has("run.seed")) seed = s.count("run.seed", 0);
  else throw config_error("a seed is required (run.seed or --seed)");
  const bool timing = opts.timing && s.flag("output.timing", true);

  const BuiltTarget built = build_target(spec, seed);
  const std::vector<RunConfig> configs = build_configs(s, seed, built.target->dim());

  std::filesystem::create_directories(opts.out_dir);
  {
    std::string text;
    for (const auto& [k, v] : s.all()) text += k + " = " + v + "\n";
    text += "# resolved seed = " + std::to_string(seed) + "\n";
    detail::write_text(opts.out_dir / "config.txt", text);
  }
  if (built.synthetic) {
    std::ostringstream out;
    write_dataset_csv(out, *built.data, built.covariate_names);
    detail::write_text(opts.out_dir / "data.csv", out.str());
  }

  std::vector<MatrixJob> jobs;
  for (const auto& c : configs) jobs.push_back({c, built.target});
  const std::vector<MatrixResult> results = run_matrix(jobs, opts.jobs);

  nlohmann::ordered_json summary;
  summary["experiment"] = spec.name;
  summary["target"] = built.target->name();
  summary["seed"] = seed;
  summary["samplers"] = nlohmann::ordered_json::array();
  int status = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const std::string name(sampler_name(configs[i].sampler));
    nlohmann::ordered_json row;
    row["sampler"] = name;
    if (!results[i].history) {
      status = 2;
      log << "error: sampler " << name << " aborted: " << results[i].error << "\n";
      log << "event log: (no iterations completed)\n";
      row["error"] = results[i].error;
      summary["samplers"].push_back(row);
      continue;
    }
    const ChainHistory& h = *results[i].history;
    const DiagnosticsReport r = summarize(h, configs[i].burn_in);
    write_chain_outputs(opts.out_dir / name, h, r, configs[i], built.target->name(), s, timing);
    row["acceptance_rate"] = detail::number_or_null(r.acceptance_rate);
    row["if_min"] = detail::number_or_null(r.if_min);
    row["if_median"] = detail::number_or_null(r.if_median);
    row["if_max"] = detail::number_or_null(r.if_max);
    row["ect"] = timing ? detail::number_or_null(r.ect) : nullptr;
    summary["samplers"].push_back(row);
    if (!opts.quiet) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%-10s acc %6.2f%%  IF min/med/max %8.3f %8.3f %8.3f", name.c_str(),
                    r.acceptance_rate, r.if_min, r.if_median, r.if_max);
      log << buf << "\n";
    }
  }
  detail::write_text(opts.out_dir / "summary.json", summary.dump(2) + "\n");
  return status;
}

}  // namespace adaptmh

#endif  // ADAPTMH_EXPERIMENT_HPP

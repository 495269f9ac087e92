#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace adaptmh;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("adaptmh_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

Table parse_table(const std::string& text) {
  std::istringstream in(text);
  return read_numeric_csv(in, "test.csv");
}

std::string error_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

std::string files_digest(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) out += fs::relative(f, root).string() + "\n" + slurp(f) + "\n";
  return out;
}

ExperimentSpec small_logistic() {
  auto spec = *find_preset("logistic-synthetic");
  spec.settings.set("data.n", "150");
  spec.settings.set("run.iterations", "2500");
  spec.settings.set("run.burn_in", "1000");
  spec.settings.set("run.stage1_end", "500");
  spec.settings.set("run.schedule", "100, 200, 500, 1000");
  spec.settings.set("sampler.pilot", "500");
  return spec;
}

}  // namespace

TEST(Csv, IngestsThreeRows) {
  TempDir dir;
  write_file(dir.path() / "d.csv", "x1,x2,y\n0.5,1,1\n-0.25,2,0\n1e-3,3,1\n");
  const auto d = ingest_csv(dir.path() / "d.csv");
  EXPECT_EQ(d.data.rows(), 3);
  EXPECT_EQ(d.data.covariates(), 2);
  EXPECT_EQ(d.covariate_names, (std::vector<std::string>{"x1", "x2"}));
  EXPECT_EQ(d.data.design(1, 0), -0.25);
  EXPECT_EQ(d.data.design(2, 0), 1e-3);
  EXPECT_EQ(d.data.response, (Vector(3) << 1, 0, 1).finished());
  EXPECT_TRUE(d.data.group_index.empty());
}

TEST(Csv, GroupColumnAnywhere) {
  const auto t = parse_table("group,x,y\n0,1.5,1\n0,2,0\n1,3,1\n\n");
  const auto d = dataset_from_table(t, "test.csv");
  EXPECT_EQ(d.data.group_index, (std::vector<int>{0, 0, 1}));
  EXPECT_EQ(d.data.covariates(), 1);
  EXPECT_EQ(d.covariate_names, (std::vector<std::string>{"x"}));
}

TEST(Csv, BlankCellNamesLine) {
  const std::string msg = error_message([] { parse_table("x,y\n1,0\n2,\n"); });
  EXPECT_NE(msg.find("test.csv:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'y'"), std::string::npos) << msg;
  EXPECT_THROW(parse_table("x,y\n1,0\nabc,1\n"), data_error);
  EXPECT_THROW(parse_table("x,y\n1,0,3\n"), data_error);
  EXPECT_THROW(parse_table("x,y\nnan,1\n"), data_error);
}

TEST(Csv, MissingResponseIsConfigError) {
  const auto t = parse_table("a,b\n1,2\n");
  EXPECT_THROW(dataset_from_table(t, "test.csv"), config_error);
  EXPECT_THROW(ingest_csv("/nonexistent/path/data.csv"), config_error);
  EXPECT_THROW(dataset_from_table(parse_table("group,x,y\n0.5,1,1\n"), "test.csv"), data_error);
}

TEST(Csv, RoundTripIsExact) {
  Rng rng(1);
  Dataset d;
  d.design.resize(20, 3);
  d.response.resize(20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    d.design.row(i) = rng.normal_vector(3).transpose() * 1e3;
    d.response[i] = rng.uniform();
    d.group_index.push_back(static_cast<int>(i / 5));
  }
  std::ostringstream out;
  write_dataset_csv(out, d, {"a", "b", "c"});
  const auto back = dataset_from_table(parse_table(out.str()), "rt.csv");
  EXPECT_EQ(back.data.design, d.design);
  EXPECT_EQ(back.data.response, d.response);
  EXPECT_EQ(back.data.group_index, d.group_index);
}

TEST(SettingsParsing, KeyValues) {
  const auto s = Settings::parse_text("a = 1 # comment\n\n b.c=x, y \nflag = off\n", "cfg");
  EXPECT_EQ(s.num("a", 0.0), 1.0);
  EXPECT_EQ(s.words("b.c"), (std::vector<std::string>{"x", "y"}));
  EXPECT_FALSE(s.flag("flag", true));
  EXPECT_EQ(s.count("missing", 7), 7u);
  EXPECT_THROW(Settings::parse_text("novalue\n", "cfg"), config_error);
  EXPECT_THROW(Settings::parse_text("= 3\n", "cfg"), config_error);
  EXPECT_THROW(s.count("b.c", 0), config_error);
  EXPECT_THROW(s.required("nope"), config_error);
  Settings t = s;
  t.apply_override("a=2.5");
  EXPECT_EQ(t.num("a", 0.0), 2.5);
  EXPECT_THROW(t.apply_override("a"), config_error);
  t.set("a", "-1");
  EXPECT_THROW(t.count("a", 0), config_error);
}

TEST(SettingsParsing, BuildConfigsRejectsBadValues) {
  auto s = Settings::parse_text("sampler.kind = rwm\nrun.iterations = 100\nrun.burn_in = 10\n", "cfg");
  EXPECT_EQ(build_configs(s, 1, 2).size(), 1u);
  auto bad = s;
  bad.set("sampler.kind", "gibbs");
  EXPECT_THROW(build_configs(bad, 1, 2), config_error);
  bad = s;
  bad.set("run.burn_in", "100");
  EXPECT_THROW(build_configs(bad, 1, 2), config_error);
  bad = s;
  bad.set("run.schedule", "5, 3");
  EXPECT_THROW(build_configs(bad, 1, 2), config_error);
  bad = s;
  bad.set("sampler.start", "1, 2, 3");
  EXPECT_THROW(build_configs(bad, 1, 2), config_error);
  bad = s;
  bad.set("sampler.antithetic_space", "w");
  EXPECT_THROW(build_configs(bad, 1, 2), config_error);
  bad = s;
  bad.set("importance.count", "sometimes");
  EXPECT_THROW(build_configs(bad, 1, 2), config_error);
  bad = s;
  bad.set("sampler.kind", "");
  EXPECT_THROW(build_configs(bad, 1, 2), config_error);
}

TEST(SettingsParsing, SamplerSeedsDiffer) {
  auto s = Settings::parse_text("sampler.kind = rwm, rwm3c, imh-mn\nrun.iterations = 100\n", "cfg");
  const auto c = build_configs(s, 42, 2);
  ASSERT_EQ(c.size(), 3u);
  std::set<std::uint64_t> seeds;
  for (const auto& x : c) seeds.insert(x.seed);
  EXPECT_EQ(seeds.size(), 3u);
  EXPECT_EQ(c[0].sampler, SamplerKind::rw2);
  EXPECT_EQ(c[2].sampler, SamplerKind::imh_mn);
  EXPECT_EQ(build_configs(s, 42, 2)[1].seed, c[1].seed);
}

TEST(Presets, StableList) {
  std::vector<std::string> names;
  for (const auto& e : builtin_experiments()) names.push_back(e.name);
  EXPECT_EQ(names, (std::vector<std::string>{"fig1-bimodal", "logistic-synthetic", "quantile-synthetic-d0.1",
                                             "probit-re-synthetic"}));
  EXPECT_FALSE(find_preset("nope").has_value());
}

TEST(Presets, Fig1Settings) {
  const auto spec = *find_preset("fig1-bimodal");
  const auto built = build_target(spec, 1);
  const auto cfgs = build_configs(spec.settings, 1, built.target->dim());
  ASSERT_EQ(cfgs.size(), 2u);
  for (const auto& c : cfgs) {
    EXPECT_EQ(c.rw.kappa3, 16.0);
    EXPECT_EQ(*c.start, Vector::Constant(5, -3.0));
    EXPECT_EQ(c.iterations, 200000u);
  }
  EXPECT_EQ(cfgs[0].sampler, SamplerKind::rw3);
  EXPECT_EQ(cfgs[1].sampler, SamplerKind::rw2);
}

TEST(Presets, ProbitImportanceSettings) {
  const auto spec = *find_preset("probit-re-synthetic");
  const auto built = build_target(spec, 3);
  const auto* probit = dynamic_cast<const ProbitReTarget*>(built.target.get());
  ASSERT_NE(probit, nullptr);
  EXPECT_EQ(probit->importance().kappa, 4.0);
  EXPECT_EQ(probit->importance().refresh_interval, 100);
  EXPECT_EQ(probit->importance().draws, 100);
  EXPECT_EQ(built.data->groups(), 40);
  EXPECT_EQ(built.target->dim(), 4);
  for (const auto& c : build_configs(spec.settings, 3, 4)) EXPECT_TRUE(c.refresh_on_accepted);
}

TEST(Presets, AllBuild) {
  for (const auto& spec : builtin_experiments()) {
    const auto built = build_target(spec, 5);
    ASSERT_TRUE(built.target) << spec.name;
    Rng rng(1);
    const auto guess = built.target->initial_guess();
    ASSERT_TRUE(guess.has_value()) << spec.name;
    EXPECT_TRUE(std::isfinite(built.target->log_density(guess->mean, rng))) << spec.name;
    EXPECT_NO_THROW(build_configs(spec.settings, 5, built.target->dim())) << spec.name;
  }
}

TEST(Presets, RelativeDataPath) {
  TempDir dir;
  write_file(dir.path() / "d.csv", "x0,x1,y\n1,0.5,1\n1,-0.5,0\n1,1.5,1\n1,-1,0\n");
  ExperimentSpec spec{"file", Settings::parse_text("target.kind = logistic\ndata.path = d.csv\n", "cfg"), dir.path()};
  const auto built = build_target(spec, 1);
  EXPECT_EQ(built.target->dim(), 2);
  EXPECT_EQ(built.covariate_names, (std::vector<std::string>{"x0", "x1"}));
  spec.settings.set("prior.kind", "horseshoe");
  EXPECT_THROW(build_target(spec, 1), config_error);
  spec.settings.set("target.kind", "probit_re");
  spec.settings.set("prior.kind", "normal");
  EXPECT_THROW(build_target(spec, 1), config_error);
}

TEST(Reports, SchemaFields) {
  TempDir dir;
  RunOptions opts;
  opts.out_dir = dir.path();
  opts.quiet = true;
  std::ostringstream log;
  ASSERT_EQ(run_experiment(small_logistic(), opts, log), 0) << log.str();
  const auto summary = nlohmann::json::parse(slurp(dir.path() / "summary.json"));
  EXPECT_EQ(summary["experiment"], "logistic-synthetic");
  ASSERT_EQ(summary["samplers"].size(), 5u);
  for (const auto k : kAllSamplers) {
    const fs::path sub = dir.path() / std::string(sampler_name(k));
    ASSERT_TRUE(fs::exists(sub / "report.json")) << sub;
    const auto r = nlohmann::json::parse(slurp(sub / "report.json"));
    for (const char* key : {"sampler", "target", "seed", "iterations", "burn_in", "draws", "parameters",
                            "acceptance_rate", "if", "if_min", "if_median", "if_max", "ess", "ect",
                            "time_per_iteration", "mean", "sd", "if_truncated", "if_undefined", "pilot_iterations",
                            "events", "importance_refreshes"})
      EXPECT_TRUE(r.contains(key)) << key;
    EXPECT_EQ(r["draws"], 1500);
    EXPECT_EQ(r["parameters"].size(), 5u);
    EXPECT_TRUE(r["ect"].is_number());
    EXPECT_TRUE(fs::exists(sub / "draws.csv"));
    EXPECT_TRUE(fs::exists(sub / "events.csv"));
    EXPECT_TRUE(fs::exists(sub / "hist_beta0.csv"));
    EXPECT_TRUE(fs::exists(sub / "trace_beta4.csv"));
  }
  EXPECT_TRUE(fs::exists(dir.path() / "data.csv"));
  EXPECT_TRUE(fs::exists(dir.path() / "config.txt"));
}

TEST(Reports, DeterministicWithTimingOff) {
  TempDir a, b;
  RunOptions opts;
  opts.quiet = true;
  opts.timing = false;
  std::ostringstream log;
  opts.out_dir = a.path();
  ASSERT_EQ(run_experiment(small_logistic(), opts, log), 0);
  opts.out_dir = b.path();
  opts.jobs = 3;
  ASSERT_EQ(run_experiment(small_logistic(), opts, log), 0);
  EXPECT_EQ(files_digest(a.path()), files_digest(b.path()));
  const auto r = nlohmann::json::parse(slurp(a.path() / "imh-tct" / "report.json"));
  EXPECT_TRUE(r["ect"].is_null());
  EXPECT_TRUE(r["time_per_iteration"].is_null());
}

TEST(Reports, MissingSeedIsConfigError) {
  auto spec = small_logistic();
  Settings s;
  for (const auto& [k, v] : spec.settings.all())
    if (k != "run.seed") s.set(k, v);
  spec.settings = s;
  RunOptions opts;
  std::ostringstream log;
  EXPECT_THROW(run_experiment(spec, opts, log), config_error);
}

TEST(Reports, Fig1HistogramsShowModeCoverage) {
  TempDir dir;
  auto spec = *find_preset("fig1-bimodal");
  // A first escape from the starting mode is a rare event; this budget makes it near certain.
  spec.settings.set("run.iterations", "1500000");
  spec.settings.set("output.draws", "false");
  RunOptions opts;
  opts.out_dir = dir.path();
  opts.quiet = true;
  std::ostringstream log;
  ASSERT_EQ(run_experiment(spec, opts, log), 0);
  const auto mass_above_zero = [&](const std::string& sampler) {
    const auto t = parse_table(slurp(dir.path() / sampler / "hist_x0.csv"));
    double total = 0.0, pos = 0.0;
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
      total += t.values(i, 2);
      if (t.values(i, 0) >= 0.0) pos += t.values(i, 2);
    }
    return pos / total;
  };
  const double three = mass_above_zero("rwm3c");
  EXPECT_GT(three, 0.15);
  EXPECT_LT(three, 0.85);
  EXPECT_LT(mass_above_zero("rwm"), 0.01);
}

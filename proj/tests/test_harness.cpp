#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "doctest.h"

#include "crsn/harness.hpp"
#include "crsn/rates.hpp"
#include "crsn/riccati.hpp"

using namespace crsn;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(SchedulerKind kind) {
  ExperimentConfig c;
  Matrix a(2, 2), cm(1, 2);
  a << 0.8, 1.0, 0.0, 0.95;
  cm << 1.0, 1.0;
  c.plant = LtiSystem(a, cm, SymMatrix::identity(2), SymMatrix::identity(1));
  c.scheduler.kind = kind;
  c.scheduler.trigger = SymMatrix::scalar(0.05);
  c.scheduler.rate = 0.4;
  c.horizon = 300;
  c.burn_in = 100;
  c.paths = 64;
  c.seed = 9;
  return c;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

struct Run {
  int status;
  std::string out;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(CRSN_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p) != nullptr) out += buf.data();
  const int raw = pclose(p);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("crsn_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

bool same_tables_except_runtime(const ExperimentResult& a, const ExperimentResult& b) {
  if (a.tables.size() != b.tables.size()) return false;
  for (std::size_t t = 0; t < a.tables.size(); ++t) {
    const Table& x = a.tables[t];
    const Table& y = b.tables[t];
    if (x.columns != y.columns || x.rows.size() != y.rows.size()) return false;
    for (std::size_t r = 0; r < x.rows.size(); ++r)
      for (std::size_t col = 0; col < x.columns.size(); ++col)
        if (x.columns[col] != "runtime_s" && x.rows[r][col] != y.rows[r][col]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto j = nlohmann::json::parse(R"({
    "A": [[0.8, 1], [0, 0.95]], "C": [[1, 1]], "Q": [[1, 0], [0, 1]], "R": 1,
    "lambda": 0.7, "horizon": 500, "burn_in": 50, "paths": 20, "seed": 4,
    "scheduler": {"kind": "open", "Y": 0.3},
    "statistic": "endpoint",
    "sweep": {"gamma": [0.1, 0.2]}
  })");
  const ExperimentConfig c = config_from_json(j);
  CHECK(c.plant.n() == 2);
  CHECK(c.lambda == 0.7);
  CHECK(c.horizon == 500);
  CHECK(c.scheduler.kind == SchedulerKind::kOpen);
  CHECK(c.scheduler.trigger(0, 0) == 0.3);
  CHECK(c.statistic == PathStatistic::kEndpoint);
  CHECK(c.sweep.at("gamma").size() == 2);

  const ExperimentConfig back = config_from_json(config_to_json(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(std::regex_match(config_hash(c), std::regex("[0-9a-f]{16}")));
  ExperimentConfig other = c;
  other.seed = 5;
  CHECK(config_hash(other) != config_hash(c));
  other = c;
  other.parallel = !c.parallel;
  CHECK(config_hash(other) == config_hash(c));
}

TEST_CASE("config validation") {
  ExperimentConfig c = small_config(SchedulerKind::kOpen);
  CHECK_NOTHROW(c.validate());
  auto bad = [&](auto&& edit) {
    ExperimentConfig d = c;
    edit(d);
    return code_of([&] { d.validate(); });
  };
  CHECK(bad([](ExperimentConfig& d) { d.lambda = 0.0; }) == ErrorCode::kConfig);
  CHECK(bad([](ExperimentConfig& d) { d.lambda = 1.2; }) == ErrorCode::kConfig);
  CHECK(bad([](ExperimentConfig& d) { d.burn_in = d.horizon; }) == ErrorCode::kConfig);
  CHECK(bad([](ExperimentConfig& d) { d.paths = 0; }) == ErrorCode::kConfig);
  CHECK(bad([](ExperimentConfig& d) { d.scheduler.trigger = SymMatrix(); }) == ErrorCode::kConfig);
  CHECK(code_of([] { config_from_json(nlohmann::json::parse(R"({"scheduler": {"kind": "sometimes"}})")); }) ==
        ErrorCode::kConfig);
  CHECK(code_of([] { config_from_json(nlohmann::json::parse(R"({"statistic": "median"})")); }) ==
        ErrorCode::kConfig);
  CHECK(code_of([] { config_from_json(nlohmann::json::parse("[1, 2]")); }) == ErrorCode::kConfig);
}

TEST_CASE("seed from the environment") {
  ExperimentConfig c;
  ::setenv("CRSN_SEED", "42", 1);
  apply_env_seed(c);
  CHECK(c.seed == 42);
  ::setenv("CRSN_SEED", "4x", 1);
  CHECK(code_of([&] { apply_env_seed(c); }) == ErrorCode::kConfig);
  ::unsetenv("CRSN_SEED");
  c.seed = 3;
  apply_env_seed(c);
  CHECK(c.seed == 3);
}

TEST_CASE("always-send path with a perfect channel follows the Kalman recursion") {
  ExperimentConfig c = small_config(SchedulerKind::kAlways);
  c.lambda = 1.0;
  c.horizon = 201;
  c.burn_in = 0;
  std::vector<StepRecord> trace;
  run_path(c, 0, &trace);
  const SymMatrix kalman = fixed_point(RiccatiOp(c.plant, 1.0, c.plant.R()), c.plant);
  CHECK((Matrix(trace[200].p_prior) - kalman.mat()).norm() < 1e-6);
  for (const auto& r : trace) CHECK(r.eta == 1);
}

TEST_CASE("never-send path stays at the open-loop covariance") {
  ExperimentConfig c = small_config(SchedulerKind::kNever);
  c.horizon = 50;
  c.burn_in = 0;
  std::vector<StepRecord> trace;
  const PathStats s = run_path(c, 0, &trace);
  const SymMatrix sigma = steady_state(c.plant).Sigma;
  for (const auto& r : trace) CHECK((Matrix(r.p_prior) - sigma.mat()).norm() < 1e-8 * sigma.frobenius());
  CHECK(s.transmissions == 0);
}

TEST_CASE("paths are deterministic and serial equals parallel") {
  for (SchedulerKind k : {SchedulerKind::kOpen, SchedulerKind::kClosed, SchedulerKind::kRandomOffline,
                          SchedulerKind::kPeriodicOffline}) {
    const ExperimentConfig c = small_config(k);
    const PathStats a = run_path(c, 3), b = run_path(c, 3);
    CHECK(a.trace_p == b.trace_p);
    CHECK(a.trace_err == b.trace_err);
    CHECK(a.transmissions == b.transmissions);

    const MonteCarloSummary s = run_paths_serial(c), p = run_paths_parallel(c);
    CHECK(s.mean_trace_p == p.mean_trace_p);
    CHECK(s.se_trace_p == p.se_trace_p);
    CHECK(s.mean_trace_err == p.mean_trace_err);
    CHECK(s.rate == p.rate);
    CHECK(s.mean_p.mat() == p.mean_p.mat());
    CHECK(s.rate == doctest::Approx(static_cast<double>(s.transmissions) /
                                    (static_cast<double>(c.paths) * (c.horizon - c.burn_in))));
    CHECK(s.failed == 0);
  }
}

TEST_CASE("offline schedules hit their rate") {
  ExperimentConfig c = small_config(SchedulerKind::kPeriodicOffline);
  c.paths = 200;
  const MonteCarloSummary s = run_paths(c);
  CHECK(std::abs(s.rate - 0.4) < 0.02);
  c.scheduler.kind = SchedulerKind::kRandomOffline;
  CHECK(std::abs(run_paths(c).rate - 0.4) < 0.02);
}

TEST_CASE("calibration and experiment configuration errors") {
  const LtiSystem sys = small_config(SchedulerKind::kOpen).plant;
  CHECK(code_of([&] { calibrate_open(sys, 0.8, 0.8); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { calibrate_open(sys, 0.8, 0.0); }) == ErrorCode::kConfig);
  const SymMatrix y = calibrate_open(sys, 0.8, 0.3);
  CHECK(open_loop_rate(0.8, steady_state(sys).Pi, y) == doctest::Approx(0.3).epsilon(1e-6));

  ExperimentConfig f6 = default_config("fig6");
  f6.sweep["varpi"] = {1.0, -1.0};
  CHECK(code_of([&] { experiment_fig6(f6); }) == ErrorCode::kConfig);
  ExperimentConfig f7 = default_config("fig7");
  f7.sweep["lambda"] = {0.0};
  CHECK(code_of([&] { experiment_fig7(f7); }) == ErrorCode::kConfig);
  f7.sweep.erase("lambda");
  CHECK(code_of([&] { experiment_fig7(f7); }) == ErrorCode::kConfig);
  ExperimentConfig f4 = default_config("fig4");
  f4.sweep["gamma"] = {0.9};
  CHECK(code_of([&] { experiment_fig4(f4); }) == ErrorCode::kConfig);
  ExperimentConfig unknown;
  unknown.experiment = "fig9";
  CHECK(code_of([&] { run_experiment(unknown); }) == ErrorCode::kConfig);
}

TEST_CASE("experiment output is reproducible and well formed") {
  ExperimentConfig c = default_config("fig7");
  c.paths = 8;
  c.horizon = 400;
  const ExperimentResult a = run_experiment(c), b = run_experiment(c);
  CHECK(a.hash == config_hash(c));
  CHECK(same_tables_except_runtime(a, b));

  const fs::path dir = scratch("csv");
  const std::vector<std::string> files = write_result(a, dir.string());
  REQUIRE(files.size() == 1);
  CHECK(fs::path(files[0]).filename().string() == "fig7_" + a.hash + ".csv");
  std::ifstream in(files[0]);
  std::string first, header, row;
  std::getline(in, first);
  std::getline(in, header);
  std::getline(in, row);
  REQUIRE(first.rfind("# ", 0) == 0);
  const auto meta = nlohmann::json::parse(first.substr(2));
  CHECK(meta.at("config_hash") == a.hash);
  CHECK(meta.at("experiment") == "fig7");
  CHECK(header == "lambda,empirical,se,empirical_err,x_zero,x_p,rate,runtime_s");
  CHECK(std::count(row.begin(), row.end(), ',') == 7);
  CHECK(std::stod(row) == 0.2);
}

TEST_CASE("oracle check on a few histories") {
  const OracleReport r = oracle_check(7, 50, 3);
  CHECK(r.histories == 3);
  CHECK(r.max_mean_abs < 1e-3);
  CHECK(r.max_variance_rel < 1e-3);
  CHECK(r.max_excess_kurtosis < 0.01);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("cli");
  write_file(dir / "scalar.json", R"({"A": 0.8, "C": 1, "Q": 1, "R": 1, "lambda": 0.8})");
  write_file(dir / "broken.json", R"({"A": 0.8, "C": 1, "Q": 1)");
  write_file(dir / "unstable.json", R"({"A": 2.0, "C": 1, "Q": 1, "R": 1, "lambda": 0.5})");

  const Run ok = run_cli("bounds --config " + (dir / "scalar.json").string() + " --Y 1.0");
  CHECK(ok.status == 0);
  const auto j = nlohmann::json::parse(ok.out);
  CHECK(j.at("gamma").get<double>() == doctest::Approx(0.43400).epsilon(1e-4));
  CHECK(j.at("X0")[0][0].get<double>() == doctest::Approx(1.42636).epsilon(1e-5));

  CHECK(run_cli("bounds --config " + (dir / "broken.json").string() + " --Y 1").status == 2);
  CHECK(run_cli("bounds --bogus").status == 2);
  CHECK(run_cli("experiment fig9").status == 2);
  CHECK(run_cli("design-open --config " + (dir / "scalar.json").string() + " --varpi -1").status == 2);
  CHECK(run_cli("bounds --config " + (dir / "unstable.json").string() + " --Y 1").status == 2);
  CHECK(run_cli("design-open --config " + (dir / "scalar.json").string() + " --varpi 0.5 --sdp-max-iter 1")
            .status == 3);

  const Run sim = run_cli("simulate --config " + (dir / "scalar.json").string() + " --kind open --Y 1 --horizon 20");
  CHECK(sim.status == 0);
  CHECK(std::count(sim.out.begin(), sim.out.end(), '\n') >= 21);
  CHECK(run_cli("oracle-check --seed 7 --steps 50").status == 0);
}

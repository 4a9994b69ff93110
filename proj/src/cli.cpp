#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "crsn/bnb.hpp"
#include "crsn/conic.hpp"
#include "crsn/harness.hpp"
#include "crsn/rates.hpp"
#include "crsn/riccati.hpp"

namespace crsn {

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSolverFailure:
    case ErrorCode::kSolverInfeasible:
    case ErrorCode::kRiccatiDivergence:
    case ErrorCode::kInternal:
      return kExitSolver;
    default:
      return kExitConfig;
  }
}

nlohmann::json sym_json(const SymMatrix& m) { return matrix_to_json(m.mat()); }

ExperimentConfig base_config(const std::string& path) {
  ExperimentConfig c = default_config("simulate");
  return path.empty() ? c : load_config(path, c);
}

SymMatrix read_matrix_file(const std::string& path, const char* key) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
  if (j.is_object()) {
    if (!j.contains(key)) throw Error(ErrorCode::kConfig, path + " has no \"" + key + "\"");
    j = j.at(key);
  }
  return SymMatrix(matrix_from_json(j, key));
}

struct DesignArgs {
  std::string config;
  std::string m_file;
  double varpi = 0.0;
  double lambda = -1.0;
  double sdp_tol = 0.0;
  int sdp_max_iter = 0;
};

void add_design_flags(CLI::App* sub, DesignArgs& a) {
  sub->add_option("--config", a.config, "JSON config with the plant and lambda");
  sub->add_option("--M-file", a.m_file, "JSON file holding the quality bound M");
  sub->add_option("--varpi", a.varpi, "use M = X0 + varpi I");
  sub->add_option("--lambda", a.lambda, "channel availability");
  sub->add_option("--sdp-tol", a.sdp_tol, "SDP tolerance");
  sub->add_option("--sdp-max-iter", a.sdp_max_iter, "SDP iteration cap");
}

struct Design {
  ExperimentConfig cfg;
  SymMatrix m;
  SolverOptions sdp;
};

Design resolve_design(const DesignArgs& a) {
  Design d{base_config(a.config), SymMatrix(), SolverOptions{}};
  if (a.lambda > 0.0) d.cfg.lambda = a.lambda;
  if (!a.m_file.empty()) {
    d.m = read_matrix_file(a.m_file, "M");
  } else if (a.varpi > 0.0) {
    d.m = x_zero(d.cfg.plant, d.cfg.lambda) + SymMatrix::identity(d.cfg.plant.n()) * a.varpi;
  } else {
    throw Error(ErrorCode::kConfig, "give --M-file or a positive --varpi");
  }
  if (d.m.dim() != d.cfg.plant.n()) throw Error(ErrorCode::kConfig, "M must be n x n");
  if (a.sdp_tol > 0.0) d.sdp.tol = a.sdp_tol;
  if (a.sdp_max_iter > 0) d.sdp.max_iter = a.sdp_max_iter;
  return d;
}

int cmd_simulate(const std::string& config, const std::string& kind, double y, double z, double rate, int horizon,
                 std::uint64_t path, const std::string& out) {
  ExperimentConfig c = base_config(config);
  if (!kind.empty()) c.scheduler.kind = scheduler_kind_from_string(kind);
  if (y > 0.0) c.scheduler.trigger = SymMatrix::identity(c.plant.m()) * y;
  if (z > 0.0) c.scheduler.trigger = SymMatrix::identity(c.plant.m()) * z;
  if (rate >= 0.0) c.scheduler.rate = rate;
  if (horizon > 0) c.horizon = horizon;
  c.paths = 1;
  c.burn_in = 0;
  std::vector<StepRecord> trace;
  run_path(c, path, &trace);

  Table t;
  t.columns = {"step", "eta", "epsilon", "trace_p_prior", "trace_p_post", "err_sq"};
  for (int i = 0; i < c.plant.n(); ++i) t.columns.push_back("x" + std::to_string(i));
  for (int i = 0; i < c.plant.n(); ++i) t.columns.push_back("xhat" + std::to_string(i));
  for (const auto& r : trace) {
    std::vector<double> row = {static_cast<double>(r.step), static_cast<double>(r.eta), static_cast<double>(r.epsilon),
                               r.trace_p_prior, r.trace_p_post, r.err_sq};
    for (int i = 0; i < c.plant.n(); ++i) row.push_back(r.x(i));
    for (int i = 0; i < c.plant.n(); ++i) row.push_back(r.x_post(i));
    t.rows.push_back(std::move(row));
  }
  c.experiment = "simulate";
  ExperimentResult res{"simulate", config_hash(c), config_to_json(c), {t}};
  if (out.empty()) {
    std::cout << to_csv(t, {{"experiment", "simulate"}, {"config_hash", res.hash}, {"config", res.config}});
  } else {
    for (const auto& p : write_result(res, out)) std::cout << p << '\n';
  }
  return 0;
}

int cmd_bounds(const std::string& config, double y, double z, double lambda) {
  ExperimentConfig c = base_config(config);
  if (lambda > 0.0) c.lambda = lambda;
  const int m = c.plant.m();
  nlohmann::json j;
  BoundSet b;
  if (z > 0.0) {
    b = bound_set_closed(c.plant, c.lambda, SymMatrix::identity(m) * z);
    j["mode"] = "closed";
  } else {
    const SymMatrix trig = y > 0.0 ? SymMatrix::identity(m) * y : c.scheduler.trigger;
    if (trig.dim() != m) throw Error(ErrorCode::kConfig, "give --Y, --Z or a scheduler trigger in the config");
    b = bound_set_open(c.plant, c.lambda, trig);
    j["mode"] = "open";
  }
  j["lambda"] = c.lambda;
  j["X_upper"] = sym_json(b.x_upper);
  j["X_lower"] = sym_json(b.x_lower);
  j["X0"] = sym_json(b.x_zero);
  j["X_p"] = b.x_p ? sym_json(*b.x_p) : nlohmann::json(nullptr);
  j["gamma"] = b.gamma;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_design_open(const DesignArgs& a) {
  const Design d = resolve_design(a);
  const OpenDesign od = design_open(d.cfg.plant, d.cfg.lambda, d.m, d.sdp);
  nlohmann::json j = {{"lambda", d.cfg.lambda},
                      {"M", sym_json(d.m)},
                      {"Y_star", sym_json(od.Y_star)},
                      {"S_star", sym_json(od.S_star)},
                      {"X_upper", sym_json(od.x_upper)},
                      {"objective", od.objective},
                      {"gamma", od.rate.gamma},
                      {"f1", od.rate.f1},
                      {"f2", od.rate.f2},
                      {"gap", od.rate.kappa_bound.value_or(NAN)},
                      {"quality_margin", od.quality_margin},
                      {"psi_min_eig", od.psi_min_eig},
                      {"q_perturbed", od.q_perturbed},
                      {"status", to_string(od.solution.status)},
                      {"iterations", od.solution.iterations}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_design_closed(const DesignArgs& a, double eps, int node_cap, bool serial, const std::string& out) {
  const Design d = resolve_design(a);
  BnbOptions bo;
  bo.sdp = d.sdp;
  bo.sdp.allow_widening = false;
  if (eps > 0.0) bo.eps = eps;
  if (node_cap > 0) bo.node_cap = node_cap;
  bo.parallel = !serial;
  const BnbResult r = design_closed(d.cfg.plant, d.cfg.lambda, d.m, bo);

  Table stages{"stages", {"stage", "nu", "Upsilon", "open"}, {}};
  for (const auto& s : r.trace) {
    stages.rows.push_back({static_cast<double>(s.stage), s.nu, s.upsilon, static_cast<double>(s.open)});
  }
  ExperimentConfig c = d.cfg;
  c.experiment = "design-closed";
  const nlohmann::json cfg = {{"config", config_to_json(c)}, {"M", sym_json(d.m)}, {"eps", r.eps},
                              {"node_cap", bo.node_cap}};
  const std::string hash = [&] {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(cfg.dump())));
    return std::string(buf);
  }();
  const auto files = write_result(ExperimentResult{"design-closed", hash, cfg, {stages}}, out);

  nlohmann::json j = {{"lambda", d.cfg.lambda},
                      {"M", sym_json(d.m)},
                      {"Z_star", sym_json(r.Z_star)},
                      {"X_star", sym_json(r.X_star)},
                      {"upsilon_star", r.upsilon_star},
                      {"Upsilon_star", r.Upsilon_star},
                      {"eps", r.eps},
                      {"stages", r.stages},
                      {"nodes", r.nodes},
                      {"status", to_string(r.status)},
                      {"gamma_bar", closed_loop_rate_upper(r.X_star, r.Z_star, d.cfg.plant, d.cfg.lambda)},
                      {"gap_closed", gap_closed(d.cfg.lambda, r.upsilon_star, r.X_star, r.Z_star, d.cfg.plant)},
                      {"boundary", boundary_check(r, r.root, d.cfg.plant.C())},
                      {"stage_csv", files.front()}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_experiment(const std::string& name, const std::string& config, bool paper_scale, const std::string& out,
                   int paths, long long seed, bool serial) {
  ExperimentConfig c = default_config(name, paper_scale);
  if (!config.empty()) c = load_config(config, c);
  c.experiment = name;
  if (paths > 0) c.paths = paths;
  if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
  if (serial) c.parallel = false;
  const std::string dir = out.empty() ? c.output_dir : out;
  const ExperimentResult r = run_experiment(c);
  for (const auto& p : write_result(r, dir)) std::cout << p << '\n';
  return 0;
}

int cmd_oracle(std::uint64_t seed, int steps, int histories) {
  const OracleReport r = oracle_check(seed, steps, histories);
  std::printf("histories %d  max |grid mean - filter mean| %.3e  max rel variance %.3e  max |excess kurtosis| %.3e\n",
              r.histories, r.max_mean_abs, r.max_variance_rel, r.max_excess_kurtosis);
  return r.max_mean_abs < 1e-3 ? 0 : 1;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Event-triggered remote estimation over a shared channel"};
  app.require_subcommand(1);

  std::string config, kind, out;
  std::string stage_out = ".";
  double y = -1.0, z = -1.0, rate = -1.0, lambda = -1.0;
  int horizon = 0;
  std::uint64_t path = 0;
  auto* sim = app.add_subcommand("simulate", "one path, full trace CSV");
  sim->add_option("--config", config, "JSON config");
  sim->add_option("--kind", kind, "open, closed, random, periodic, always or never");
  sim->add_option("--Y", y, "open-loop trigger, times the identity");
  sim->add_option("--Z", z, "closed-loop trigger, times the identity");
  sim->add_option("--rate", rate, "offline transmission rate");
  sim->add_option("--horizon", horizon, "steps");
  sim->add_option("--path", path, "path index");
  sim->add_option("--out", out, "output directory (stdout when absent)");

  auto* bnd = app.add_subcommand("bounds", "mean-covariance bounds for a trigger");
  bnd->add_option("--config", config, "JSON config");
  bnd->add_option("--Y", y, "open-loop trigger, times the identity");
  bnd->add_option("--Z", z, "closed-loop trigger, times the identity");
  bnd->add_option("--lambda", lambda, "channel availability");

  DesignArgs dargs;
  auto* dopen = app.add_subcommand("design-open", "open-loop trigger design");
  add_design_flags(dopen, dargs);

  double eps = 0.0;
  int node_cap = 0;
  bool serial = false;
  auto* dclosed = app.add_subcommand("design-closed", "closed-loop trigger design by branch and bound");
  add_design_flags(dclosed, dargs);
  dclosed->add_option("--eps", eps, "optimality tolerance");
  dclosed->add_option("--node-cap", node_cap, "relaxation budget");
  dclosed->add_flag("--serial", serial, "solve children one at a time");
  dclosed->add_option("--out", stage_out, "directory of the stage CSV");

  std::string name;
  bool paper_scale = false;
  int paths = 0;
  long long seed = -1;
  auto* exp = app.add_subcommand("experiment", "reproduce a figure as CSV");
  exp->add_option("name", name, "fig3, fig4, fig6 or fig7")->required()->check(CLI::IsMember({"fig3", "fig4", "fig6", "fig7"}));
  exp->add_option("--config", config, "JSON config overriding the defaults");
  exp->add_flag("--paper-scale", paper_scale, "full run counts");
  exp->add_option("--out", out, "output directory");
  exp->add_option("--paths", paths, "number of paths");
  exp->add_option("--seed", seed, "root seed");
  exp->add_flag("--serial", serial, "run paths on one thread");

  std::uint64_t oseed = 7;
  int steps = 50, histories = 1;
  auto* orc = app.add_subcommand("oracle-check", "grid oracle against the closed-form filter");
  orc->add_option("--seed", oseed, "root seed");
  orc->add_option("--steps", steps, "steps per history");
  orc->add_option("--histories", histories, "number of random histories");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(config, kind, y, z, rate, horizon, path, out);
    if (*bnd) return cmd_bounds(config, y, z, lambda);
    if (*dopen) return cmd_design_open(dargs);
    if (*dclosed) return cmd_design_closed(dargs, eps, node_cap, serial, stage_out);
    if (*exp) return cmd_experiment(name, config, paper_scale, out, paths, seed, serial);
    if (*orc) return cmd_oracle(oseed, steps, histories);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitConfig;
}

}  // namespace crsn

#include <chrono>
#include <cmath>

#include "crsn/bnb.hpp"
#include "crsn/conic.hpp"
#include "crsn/estimator.hpp"
#include "crsn/harness.hpp"
#include "crsn/rates.hpp"
#include "crsn/riccati.hpp"

namespace crsn {

double Table::at(std::size_t row, const std::string& column) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == column) return rows.at(row).at(c);
  }
  throw Error(ErrorCode::kInvalidInput, "table " + name + " has no column " + column);
}

const Table& ExperimentResult::table(const std::string& name) const {
  for (const auto& t : tables) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCode::kInvalidInput, "result has no table " + name);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const std::vector<double>& sweep_values(const ExperimentConfig& c, const char* name) {
  auto it = c.sweep.find(name);
  if (it == c.sweep.end() || it->second.empty()) {
    throw Error(ErrorCode::kConfig, c.experiment + " needs a non-empty sweep \"" + name + "\"");
  }
  return it->second;
}

ExperimentResult start_result(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult r;
  r.experiment = c.experiment;
  r.hash = config_hash(c);
  r.config = config_to_json(c);
  return r;
}

LtiSystem scalar_plant() {
  return LtiSystem(Matrix::Constant(1, 1, 0.8), Matrix::Identity(1, 1), SymMatrix::identity(1), SymMatrix::identity(1));
}

LtiSystem bounds_plant() {
  Matrix a(2, 2), cm(1, 2);
  a << 0.8, 1.0, 0.0, 0.95;
  cm << 1.0, 1.0;
  return LtiSystem(a, cm, SymMatrix::identity(2), SymMatrix::identity(1));
}

LtiSystem design_plant() {
  Matrix a(2, 2), cm(2, 2);
  a << 0.8, 1.0, 0.0, 0.95;
  cm << 0.5, 0.3, 0.0, 1.4;
  return LtiSystem(a, cm, SymMatrix::identity(2), SymMatrix::identity(2));
}

void check_rate(double gamma, double lambda) {
  if (!(gamma > 0.0 && gamma < lambda)) {
    throw Error(ErrorCode::kConfig, "target rate " + std::to_string(gamma) + " is unreachable; need 0 < gamma < lambda");
  }
}

}  // namespace

SymMatrix calibrate_open(const LtiSystem& sys, double lambda, double gamma) {
  check_rate(gamma, lambda);
  const SymMatrix pi = steady_state(sys).Pi;
  const int m = sys.m();
  auto rate = [&](double s) { return open_loop_rate(lambda, pi, SymMatrix::identity(m) * s); };
  double lo = 0.0, hi = 1.0;
  while (rate(hi) < gamma) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e15) throw Error(ErrorCode::kConfig, "open-loop rate calibration did not bracket the target");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (rate(mid) < gamma ? lo : hi) = mid;
  }
  return SymMatrix::identity(m) * (0.5 * (lo + hi));
}

SymMatrix calibrate_closed(const LtiSystem& sys, double lambda, double gamma, std::uint64_t seed, int probe_steps) {
  check_rate(gamma, lambda);
  constexpr int kBurnIn = 1000;
  ExperimentConfig probe;
  probe.plant = sys;
  probe.lambda = lambda;
  probe.scheduler.kind = SchedulerKind::kClosed;
  probe.paths = 1;
  probe.horizon = kBurnIn + probe_steps;
  probe.burn_in = kBurnIn;
  probe.seed = seed;
  const int m = sys.m();

  std::vector<StepRecord> trace;
  std::vector<SmallMatrix> priors;
  auto rate = [&](double s) {
    probe.scheduler.trigger = SymMatrix::identity(m) * s;
    trace.clear();
    run_path(probe, 0, &trace);
    priors.clear();
    for (const auto& r : trace) priors.push_back(r.p_prior);
    return closed_loop_rate_empirical(priors, probe.scheduler.trigger, sys, lambda, kBurnIn);
  };
  // bisection on log s
  double lo = -20.0, hi = 0.0;
  while (rate(std::exp(hi)) < gamma) {
    lo = hi;
    hi += 2.0;
    if (hi > 30.0) throw Error(ErrorCode::kConfig, "closed-loop rate calibration did not bracket the target");
  }
  for (int i = 0; i < 60 && hi - lo > 1e-10; ++i) {
    const double mid = 0.5 * (lo + hi);
    (rate(std::exp(mid)) < gamma ? lo : hi) = mid;
  }
  return SymMatrix::identity(m) * std::exp(0.5 * (lo + hi));
}

ExperimentResult experiment_fig3(const ExperimentConfig& c) {
  ExperimentResult res = start_result(c);
  const auto& gammas = sweep_values(c, "gamma");
  for (double g : gammas) check_rate(g, c.lambda);

  Table t;
  t.columns = {"gamma", "Y", "Z"};
  const char* names[] = {"open", "closed", "random", "periodic"};
  for (const char* n : names) {
    for (const char* suffix : {"_p", "_se", "_err", "_rate"}) t.columns.push_back(std::string(n) + suffix);
  }
  t.columns.push_back("runtime_s");

  for (double g : gammas) {
    const auto t0 = Clock::now();
    const SymMatrix y = calibrate_open(c.plant, c.lambda, g);
    const SymMatrix z = calibrate_closed(c.plant, c.lambda, g, c.seed);
    std::vector<double> row = {g, y.trace(), z.trace()};
    for (SchedulerKind kind : {SchedulerKind::kOpen, SchedulerKind::kClosed, SchedulerKind::kRandomOffline,
                               SchedulerKind::kPeriodicOffline}) {
      ExperimentConfig run = c;
      run.scheduler = SchedulerSpec{};
      run.scheduler.kind = kind;
      if (kind == SchedulerKind::kOpen) run.scheduler.trigger = y;
      if (kind == SchedulerKind::kClosed) run.scheduler.trigger = z;
      run.scheduler.rate = g;
      run.scheduler.phase = c.scheduler.phase;
      // the periodic schedule is only cyclostationary: a fixed final step sits at a fixed pattern position
      if (kind == SchedulerKind::kPeriodicOffline) run.statistic = PathStatistic::kTimeAverage;
      const MonteCarloSummary s = run_paths(run);
      row.insert(row.end(), {s.mean_trace_p, s.se_trace_p, s.mean_trace_err, s.rate});
    }
    row.push_back(seconds_since(t0));
    t.rows.push_back(std::move(row));
  }
  res.tables.push_back(std::move(t));
  return res;
}

ExperimentResult experiment_fig4(const ExperimentConfig& c) {
  ExperimentResult res = start_result(c);
  const auto& gammas = sweep_values(c, "gamma");
  for (double g : gammas) check_rate(g, c.lambda);

  Table t;
  t.columns = {"gamma", "trace_Y", "trace_upper", "trace_lower", "empirical", "se", "empirical_err", "rate",
               "runtime_s"};
  for (double g : gammas) {
    const auto t0 = Clock::now();
    const SymMatrix y = calibrate_open(c.plant, c.lambda, g);
    const BoundSet b = bound_set_open(c.plant, c.lambda, y);
    ExperimentConfig run = c;
    run.scheduler = SchedulerSpec{};
    run.scheduler.kind = SchedulerKind::kOpen;
    run.scheduler.trigger = y;
    const MonteCarloSummary s = run_paths(run);
    t.rows.push_back({g, y.trace(), b.x_upper.trace(), b.x_lower.trace(), s.mean_trace_p, s.se_trace_p,
                      s.mean_trace_err, s.rate, seconds_since(t0)});
  }
  res.tables.push_back(std::move(t));
  return res;
}

ExperimentResult experiment_fig6(const ExperimentConfig& c) {
  ExperimentResult res = start_result(c);
  const auto& varpis = sweep_values(c, "varpi");
  for (double w : varpis) {
    if (!(w > 0.0)) throw Error(ErrorCode::kConfig, "varpi must be positive");
  }
  const SymMatrix x0 = x_zero(c.plant, c.lambda);
  const int n = c.plant.n();

  Table open{"open", {"varpi", "trace_M", "gamma", "gap", "objective", "quality_margin", "psi_min_eig", "runtime_s"}, {}};
  Table closed{"closed",
               {"varpi", "trace_M", "gamma", "gap", "upsilon", "Upsilon", "nodes", "stages", "eps_optimal", "runtime_s"},
               {}};
  for (double w : varpis) {
    const SymMatrix m = x0 + SymMatrix::identity(n) * w;
    auto t0 = Clock::now();
    const OpenDesign od = design_open(c.plant, c.lambda, m);
    open.rows.push_back({w, m.trace(), od.rate.gamma, od.rate.kappa_bound.value_or(NAN), od.objective,
                         od.quality_margin, od.psi_min_eig, seconds_since(t0)});

    t0 = Clock::now();
    BnbOptions bo;
    bo.parallel = c.parallel;
    const BnbResult br = design_closed(c.plant, c.lambda, m, bo);
    const double gamma_bar = closed_loop_rate_upper(br.X_star, br.Z_star, c.plant, c.lambda);
    const double gap = gap_closed(c.lambda, br.upsilon_star, br.X_star, br.Z_star, c.plant);
    closed.rows.push_back({w, m.trace(), gamma_bar, gap, br.upsilon_star, br.Upsilon_star,
                           static_cast<double>(br.nodes), static_cast<double>(br.stages),
                           br.status == BnbStatus::kEpsOptimal ? 1.0 : 0.0, seconds_since(t0)});
  }
  res.tables.push_back(std::move(open));
  res.tables.push_back(std::move(closed));
  return res;
}

ExperimentResult experiment_fig7(const ExperimentConfig& c) {
  ExperimentResult res = start_result(c);
  const auto& lambdas = sweep_values(c, "lambda");
  for (double l : lambdas) {
    if (!(l > 0.0 && l <= 1.0)) throw Error(ErrorCode::kConfig, "lambda grid values must lie in (0, 1]");
  }
  Table t;
  t.columns = {"lambda", "empirical", "se", "empirical_err", "x_zero", "x_p", "rate", "runtime_s"};
  for (double l : lambdas) {
    const auto t0 = Clock::now();
    ExperimentConfig run = c;
    run.lambda = l;
    run.scheduler = SchedulerSpec{};
    run.scheduler.kind = SchedulerKind::kAlways;
    const MonteCarloSummary s = run_paths(run);
    const double xz = x_zero(c.plant, l).trace();
    const double xp = x_p(c.plant, l).trace();
    t.rows.push_back({l, s.mean_trace_p, s.se_trace_p, s.mean_trace_err, xz, xp, s.rate, seconds_since(t0)});
  }
  res.tables.push_back(std::move(t));
  return res;
}

OracleReport oracle_check(std::uint64_t seed, int steps, int histories) {
  if (steps < 1 || histories < 1) throw Error(ErrorCode::kConfig, "oracle check needs steps >= 1 and histories >= 1");
  OracleReport rep;
  rep.histories = histories;
  for (int h = 0; h < histories; ++h) {
    const auto path = static_cast<std::uint64_t>(h);
    auto aux = RandomSource::for_path(seed, path, Stream::kAux);
    auto draw = [&](double lo, double hi) { return lo + (hi - lo) * aux.uniform(); };
    const LtiSystem sys(Matrix::Constant(1, 1, draw(0.3, 0.95)), Matrix::Constant(1, 1, draw(0.5, 1.5)),
                        SymMatrix::scalar(draw(0.5, 1.5)), SymMatrix::scalar(draw(0.5, 1.5)));
    const double lambda = draw(0.3, 1.0);
    const double trig = std::exp(draw(std::log(0.1), std::log(3.0)));
    const TriggerMode mode = h % 2 == 0 ? TriggerMode::kOpen : TriggerMode::kClosed;
    const TriggerParam param(SymMatrix::scalar(trig), mode);
    const double prior_var = steady_state(sys).Sigma(0, 0) * draw(0.5, 2.0);

    auto plant_rng = RandomSource::for_path(seed, path, Stream::kPlant);
    auto channel_rng = RandomSource::for_path(seed, path, Stream::kChannel);
    auto sched_rng = RandomSource::for_path(seed, path, Stream::kScheduler);
    const ChannelModel ch(lambda, seed);
    SimState state = initial_state(sys, plant_rng);
    FilterState fs = FilterState::from_prior(SmallVector::Zero(1), SmallMatrix::Constant(1, 1, prior_var), 1);
    std::vector<ObservationRecord> history;
    for (int k = 0; k < steps; ++k) {
      if (k > 0) fs = time_update(fs, sys);
      const PlantStep ps = step_plant(state, sys, plant_rng);
      TriggerDecision d;
      if (mode == TriggerMode::kOpen) {
        d = trigger_open(ps.y, param, sched_rng);
      } else {
        SmallVector innov = ps.y - sys.kernel().C * fs.x_prior;
        d = trigger_closed(innov, param, sched_rng);
      }
      const ObservationRecord obs = ObservationRecord::observe(draw_channel(ch, channel_rng), d.epsilon, ps.y);
      history.push_back(obs);
      fs = mode == TriggerMode::kOpen ? measurement_update_open(fs, obs, param, sys)
                                      : measurement_update_closed(fs, obs, param, sys);
      state = ps.next;
    }
    const GridMoments gm = grid_oracle_posterior(history, sys, mode, trig, prior_var);
    const double mean = fs.x_post(0), var = fs.P_post(0, 0);
    const double dm = std::abs(gm.mean - mean);
    rep.max_mean_abs = std::max(rep.max_mean_abs, dm);
    rep.max_mean_rel = std::max(rep.max_mean_rel, dm / std::sqrt(var));
    rep.max_variance_rel = std::max(rep.max_variance_rel, std::abs(gm.variance - var) / var);
    rep.max_excess_kurtosis = std::max(rep.max_excess_kurtosis, std::abs(gm.excess_kurtosis));
  }
  return rep;
}

ExperimentResult run_experiment(const ExperimentConfig& c) {
  if (c.experiment == "fig3") return experiment_fig3(c);
  if (c.experiment == "fig4") return experiment_fig4(c);
  if (c.experiment == "fig6") return experiment_fig6(c);
  if (c.experiment == "fig7") return experiment_fig7(c);
  throw Error(ErrorCode::kConfig, "unknown experiment \"" + c.experiment + "\"");
}

ExperimentConfig default_config(const std::string& experiment, bool paper_scale) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.paper_scale = paper_scale;
  c.plant = scalar_plant();
  c.lambda = 0.8;
  if (experiment == "fig3") {
    c.paths = paper_scale ? 150000 : 20000;
    c.horizon = 100;
    c.burn_in = 50;
    c.statistic = PathStatistic::kEndpoint;
    c.sweep["gamma"] = {0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  } else if (experiment == "fig4") {
    c.plant = bounds_plant();
    c.paths = paper_scale ? 60000 : 5000;
    c.horizon = 2000;
    c.burn_in = 1000;
    c.sweep["gamma"] = {0.1, 0.2, 0.35, 0.5, 0.65, 0.75};
  } else if (experiment == "fig6") {
    c.plant = design_plant();
    c.paths = 1;
    c.horizon = 1;
    c.burn_in = 0;
    c.sweep["varpi"] = paper_scale ? std::vector<double>{1, 2, 3, 4, 5, 6, 8, 10, 12, 14, 16, 18, 20}
                                   : std::vector<double>{1, 5, 10, 20};
  } else if (experiment == "fig7") {
    c.paths = 50;
    c.horizon = 3000;
    c.burn_in = 100;
    c.sweep["lambda"] = {0.2, 0.4, 0.6, 0.8, 1.0};
  } else if (experiment == "simulate") {
    c.paths = 1;
    c.horizon = 200;
    c.burn_in = 0;
    c.scheduler.kind = SchedulerKind::kOpen;
    c.scheduler.trigger = SymMatrix::identity(1);
  } else {
    throw Error(ErrorCode::kConfig, "unknown experiment \"" + experiment + "\"");
  }
  apply_env_seed(c);
  return c;
}

}  // namespace crsn

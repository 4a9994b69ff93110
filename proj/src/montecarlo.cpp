#include <cmath>
#include <cstdio>
#include <exception>
#include <optional>

#include "crsn/estimator.hpp"
#include "crsn/harness.hpp"
#include "crsn/schedulers.hpp"

namespace crsn {

namespace {

struct PathContext {
  SmallMatrix p0;
  std::optional<TriggerParam> trigger;
  ChannelModel channel;
};

PathContext make_context(const ExperimentConfig& c) {
  PathContext ctx;
  const SmallMatrix& f = c.plant.kernel().x0_factor;
  ctx.p0 = f * f.transpose();
  if (c.scheduler.kind == SchedulerKind::kOpen) ctx.trigger.emplace(c.scheduler.trigger, TriggerMode::kOpen);
  if (c.scheduler.kind == SchedulerKind::kClosed) ctx.trigger.emplace(c.scheduler.trigger, TriggerMode::kClosed);
  ctx.channel = ChannelModel(c.lambda, c.seed);
  return ctx;
}

PathStats simulate(const ExperimentConfig& c, const PathContext& ctx, std::uint64_t path,
                   std::vector<StepRecord>* trace) {
  const LtiSystem& sys = c.plant;
  const SmallMatrix& cm = sys.kernel().C;
  auto plant_rng = RandomSource::for_path(c.seed, path, Stream::kPlant);
  auto channel_rng = RandomSource::for_path(c.seed, path, Stream::kChannel);
  auto sched_rng = RandomSource::for_path(c.seed, path, Stream::kScheduler);

  SimState state = initial_state(sys, plant_rng);
  FilterState fs = FilterState::from_prior(SmallVector::Zero(sys.n()), ctx.p0, sys.m());

  PathStats st;
  st.mean_p = SmallMatrix::Zero(sys.n(), sys.n());
  double sum_tr = 0.0, sum_err = 0.0;

  for (int k = 0; k < c.horizon; ++k) {
    PlantStep ps = step_plant(state, sys, plant_rng);
    TriggerDecision d;
    switch (c.scheduler.kind) {
      case SchedulerKind::kOpen: d = trigger_open(ps.y, *ctx.trigger, sched_rng); break;
      case SchedulerKind::kClosed: {
        SmallVector innov = ps.y - cm * fs.x_prior;
        d = trigger_closed(innov, *ctx.trigger, sched_rng);
        break;
      }
      case SchedulerKind::kRandomOffline: d = trigger_random_offline(c.scheduler.rate, c.lambda, sched_rng); break;
      case SchedulerKind::kPeriodicOffline:
        d = trigger_periodic_offline(static_cast<std::uint64_t>(k), c.scheduler.rate, c.lambda, c.scheduler.phase);
        break;
      case SchedulerKind::kAlways: d.epsilon = Epsilon::kOne; break;
      case SchedulerKind::kNever: d.epsilon = Epsilon::kZero; break;
    }
    const int eta = draw_channel(ctx.channel, channel_rng);
    const bool sent = d.epsilon == Epsilon::kOne;

    const double err = (state.x - fs.x_prior).squaredNorm();
    const double tr_prior = fs.P_prior.trace();
    if (k >= c.burn_in) {
      sum_tr += tr_prior;
      sum_err += err;
      st.mean_p += fs.P_prior;
      st.sensor_triggers += sent ? 1 : 0;
      st.channel_free += eta;
      st.transmissions += (sent && eta == 1) ? 1 : 0;
    }

    const ObservationRecord obs = ObservationRecord::observe(eta, d.epsilon, ps.y);
    switch (c.scheduler.kind) {
      case SchedulerKind::kOpen: fs = measurement_update_open(fs, obs, *ctx.trigger, sys); break;
      case SchedulerKind::kClosed: fs = measurement_update_closed(fs, obs, *ctx.trigger, sys); break;
      default: fs = measurement_update_offline(fs, obs, sys); break;
    }
    if (trace != nullptr) {
      StepRecord r;
      r.step = static_cast<std::uint64_t>(k);
      r.eta = eta;
      r.epsilon = sent ? 1 : 0;
      r.trace_p_prior = tr_prior;
      r.trace_p_post = fs.P_post.trace();
      r.err_sq = err;
      r.x = state.x;
      r.x_post = fs.x_post;
      r.p_prior = fs.P_prior;
      trace->push_back(r);
    }
    fs = time_update(fs, sys);
    state = ps.next;

    if (!fs.P_prior.allFinite() || !fs.x_prior.allFinite()) {
      st.failed = true;
      return st;
    }
  }

  st.steps = c.horizon - c.burn_in;
  const double inv = 1.0 / static_cast<double>(st.steps);
  if (c.statistic == PathStatistic::kEndpoint) {
    st.trace_p = fs.P_prior.trace();
    st.trace_err = (state.x - fs.x_prior).squaredNorm();
    st.mean_p = fs.P_prior;
  } else {
    st.trace_p = sum_tr * inv;
    st.trace_err = sum_err * inv;
    st.mean_p *= inv;
  }
  return st;
}

MonteCarloSummary fold(const ExperimentConfig& c, const std::vector<PathStats>& all) {
  MonteCarloSummary s;
  const int n = c.plant.n();
  Matrix mean_p = Matrix::Zero(n, n);
  double sum_p = 0.0, sum_p2 = 0.0, sum_e = 0.0, sum_e2 = 0.0;
  long sensor = 0, free_steps = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const PathStats& p = all[i];
    if (p.failed) {
      if (s.failed < 10) std::fprintf(stderr, "path %zu: filter covariance lost finiteness, excluded\n", i);
      ++s.failed;
      continue;
    }
    ++s.paths;
    sum_p += p.trace_p;
    sum_p2 += p.trace_p * p.trace_p;
    sum_e += p.trace_err;
    sum_e2 += p.trace_err * p.trace_err;
    mean_p += p.mean_p;
    s.transmissions += p.transmissions;
    sensor += p.sensor_triggers;
    free_steps += p.channel_free;
  }
  if (s.failed > 0) std::fprintf(stderr, "%d of %zu paths excluded\n", s.failed, all.size());
  if (s.paths == 0) throw Error(ErrorCode::kRiccatiDivergence, "every simulated path failed");

  const double k = s.paths;
  s.mean_trace_p = sum_p / k;
  s.mean_trace_err = sum_e / k;
  if (s.paths > 1) {
    s.se_trace_p = std::sqrt(std::max(0.0, (sum_p2 - k * s.mean_trace_p * s.mean_trace_p) / (k - 1)) / k);
    s.se_trace_err = std::sqrt(std::max(0.0, (sum_e2 - k * s.mean_trace_err * s.mean_trace_err) / (k - 1)) / k);
  }
  s.mean_p = SymMatrix(mean_p / k);
  const double denom = static_cast<double>(s.paths) * static_cast<double>(c.horizon - c.burn_in);
  s.rate = static_cast<double>(s.transmissions) / denom;
  s.sensor_rate = static_cast<double>(sensor) / denom;
  s.channel_rate = static_cast<double>(free_steps) / denom;
  return s;
}

}  // namespace

PathStats run_path(const ExperimentConfig& c, std::uint64_t path_index, std::vector<StepRecord>* trace) {
  c.validate();
  return simulate(c, make_context(c), path_index, trace);
}

MonteCarloSummary run_paths_serial(const ExperimentConfig& c) {
  c.validate();
  const PathContext ctx = make_context(c);
  std::vector<PathStats> all(static_cast<std::size_t>(c.paths));
  for (int i = 0; i < c.paths; ++i) all[static_cast<std::size_t>(i)] = simulate(c, ctx, static_cast<std::uint64_t>(i), nullptr);
  return fold(c, all);
}

MonteCarloSummary run_paths_parallel(const ExperimentConfig& c) {
  c.validate();
  const PathContext ctx = make_context(c);
  std::vector<PathStats> all(static_cast<std::size_t>(c.paths));
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < c.paths; ++i) {
    try {
      all[static_cast<std::size_t>(i)] = simulate(c, ctx, static_cast<std::uint64_t>(i), nullptr);
    } catch (...) {
#pragma omp critical(crsn_mc_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return fold(c, all);
}

MonteCarloSummary run_paths(const ExperimentConfig& c) {
  return c.parallel ? run_paths_parallel(c) : run_paths_serial(c);
}

}  // namespace crsn

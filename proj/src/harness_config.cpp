#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "crsn/harness.hpp"

namespace crsn {

const char* to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::kOpen: return "open";
    case SchedulerKind::kClosed: return "closed";
    case SchedulerKind::kRandomOffline: return "random";
    case SchedulerKind::kPeriodicOffline: return "periodic";
    case SchedulerKind::kAlways: return "always";
    case SchedulerKind::kNever: return "never";
  }
  return "unknown";
}

SchedulerKind scheduler_kind_from_string(const std::string& s) {
  for (auto k : {SchedulerKind::kOpen, SchedulerKind::kClosed, SchedulerKind::kRandomOffline,
                 SchedulerKind::kPeriodicOffline, SchedulerKind::kAlways, SchedulerKind::kNever}) {
    if (s == to_string(k)) return k;
  }
  throw Error(ErrorCode::kConfig, "unknown scheduler kind \"" + s + "\"");
}

void ExperimentConfig::validate() const {
  if (paths < 1) throw Error(ErrorCode::kConfig, "paths must be at least 1");
  if (burn_in < 0 || horizon <= burn_in) throw Error(ErrorCode::kConfig, "need horizon > burn_in >= 0");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorCode::kConfig, "lambda must lie in (0, 1]");
  if (plant.n() > kMaxFilterDim || plant.m() > kMaxFilterDim) {
    throw Error(ErrorCode::kConfig, "plant dimension exceeds the filter limit");
  }
  switch (scheduler.kind) {
    case SchedulerKind::kOpen:
    case SchedulerKind::kClosed:
      if (scheduler.trigger.dim() != plant.m()) {
        throw Error(ErrorCode::kConfig, std::string(to_string(scheduler.kind)) + " scheduler needs an m x m trigger");
      }
      break;
    case SchedulerKind::kRandomOffline:
    case SchedulerKind::kPeriodicOffline:
      if (!(scheduler.rate >= 0.0 && scheduler.rate <= lambda)) {
        throw Error(ErrorCode::kConfig, "offline rate must lie in [0, lambda]");
      }
      break;
    default: break;
  }
}

namespace {

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("CRSN_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (end == nullptr || *end != '\0') throw Error(ErrorCode::kConfig, "CRSN_SEED is not an unsigned integer");
  return v;
}

}  // namespace

void apply_env_seed(ExperimentConfig& c) {
  if (auto s = env_seed()) c.seed = *s;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");
  ExperimentConfig c = std::move(base);
  try {
    if (j.contains("experiment")) c.experiment = j.at("experiment").get<std::string>();
    if (j.contains("plant")) {
      c.plant = plant_from_json(j.at("plant"));
    } else if (j.contains("A")) {
      c.plant = plant_from_json(j);
    }
    c.lambda = j.value("lambda", c.lambda);
    c.horizon = j.value("horizon", c.horizon);
    c.paths = j.value("paths", c.paths);
    c.burn_in = j.value("burn_in", c.burn_in);
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.parallel = j.value("parallel", c.parallel);
    c.paper_scale = j.value("paper_scale", c.paper_scale);
    if (j.contains("statistic")) {
      const auto s = j.at("statistic").get<std::string>();
      if (s == "endpoint") {
        c.statistic = PathStatistic::kEndpoint;
      } else if (s == "time-average") {
        c.statistic = PathStatistic::kTimeAverage;
      } else {
        throw Error(ErrorCode::kConfig, "statistic must be \"endpoint\" or \"time-average\"");
      }
    }
    if (j.contains("scheduler")) {
      const auto& s = j.at("scheduler");
      c.scheduler.kind = scheduler_kind_from_string(s.at("kind").get<std::string>());
      for (const char* key : {"trigger", "Y", "Z"}) {
        if (s.contains(key)) c.scheduler.trigger = SymMatrix(matrix_from_json(s.at(key), key));
      }
      c.scheduler.rate = s.value("rate", 0.0);
      c.scheduler.phase = s.value("phase", std::uint64_t{0});
    }
    if (j.contains("sweep")) {
      for (const auto& [name, values] : j.at("sweep").items()) {
        c.sweep[name] = values.get<std::vector<double>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed config: ") + e.what());
  }
  apply_env_seed(c);
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json sched = {{"kind", to_string(c.scheduler.kind)},
                          {"rate", c.scheduler.rate},
                          {"phase", c.scheduler.phase}};
  if (c.scheduler.trigger.dim() > 0) sched["trigger"] = matrix_to_json(c.scheduler.trigger.mat());
  nlohmann::json sweep = nlohmann::json::object();
  for (const auto& [name, values] : c.sweep) sweep[name] = values;
  // parallel and output_dir do not change results and stay out of the hash
  return {{"experiment", c.experiment},
          {"plant", plant_to_json(c.plant)},
          {"lambda", c.lambda},
          {"scheduler", sched},
          {"horizon", c.horizon},
          {"paths", c.paths},
          {"burn_in", c.burn_in},
          {"seed", c.seed},
          {"statistic", c.statistic == PathStatistic::kEndpoint ? "endpoint" : "time-average"},
          {"sweep", sweep},
          {"paper_scale", c.paper_scale}};
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
  return config_from_json(j, std::move(base));
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config_to_json(c).dump())));
  return buf;
}

}  // namespace crsn

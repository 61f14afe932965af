#include "fbl/config.hpp"

#include <cmath>
#include <sstream>

#include "fbl/io.hpp"

namespace fbl {

std::size_t ExperimentConfig::episode_steps() const {
  return static_cast<std::size_t>(std::llround(t_final / dt)) - 1;
}

LinearState ExperimentConfig::x0_state() const {
  LinearState s;
  for (std::size_t i = 0; i < 4; ++i) s[i] = x0[i];
  return s;
}

LinearState ExperimentConfig::xf_state() const {
  LinearState s;
  for (std::size_t i = 0; i < 4; ++i) s[i] = xf[i];
  return s;
}

ScenarioRuntime ExperimentConfig::runtime() const {
  ScenarioRuntime rt;
  rt.plant = plant;
  rt.model = model;
  rt.drift = drift;
  rt.eps_v = eps_v;
  rt.dt = dt;
  rt.start = start;
  rt.a_max = a_max;
  rt.b_max = b_max;
  rt.blowup = blowup;
  return rt;
}

void validate(const ExperimentConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw ConfigError("scenario: dt must be positive");
  if (!(cfg.t_final > 0.0)) throw ConfigError("scenario: t_final must be positive");
  const double ratio = cfg.t_final / cfg.dt;
  if (std::abs(ratio - std::llround(ratio)) > 1e-6)
    throw ConfigError("scenario: t_final/dt must be an integer step count");
  if (std::llround(ratio) < 2)
    throw ConfigError("scenario: horizon must cover at least 2 time points");
  if (!(cfg.plant.l_r > 0.0 && cfg.plant.l_f > 0.0 && cfg.model.l_r > 0.0 &&
        cfg.model.l_f > 0.0))
    throw ConfigError("vehicle: axle distances must be positive");
  if (!(cfg.eps_v > 0.0)) throw ConfigError("controller: eps_v must be positive");
  if (!(cfg.a_max > 0.0 && cfg.b_max > 0.0))
    throw ConfigError("controller: input bounds must be positive");
  if (!(cfg.plan_weights.v_bnds > 0.0))
    throw ConfigError("planner: v_bnds must be positive");
  for (double q : cfg.plan_weights.q)
    if (q < 0.0) throw ConfigError("planner: q must be nonnegative");
  for (double q : cfg.plan_weights.qf)
    if (q < 0.0) throw ConfigError("planner: qf must be nonnegative");
  for (double r : cfg.plan_weights.r)
    if (!(r > 0.0)) throw ConfigError("planner: r must be positive");
  for (double q : cfg.tracker_q)
    if (q < 0.0) throw ConfigError("tracker: q must be nonnegative");
  for (double r : cfg.tracker_r)
    if (!(r > 0.0)) throw ConfigError("tracker: r must be positive");
  try {
    fbl::validate(cfg.trainer);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(cfg.policy_output_gain > 0.0))
    throw ConfigError("trainer: output gain must be positive");
  if (cfg.collect.n < 1 || cfg.collect.hold_steps < 2)
    throw ConfigError("prenet: need n >= 1 and hold_steps >= 2");
  if (!(cfg.prenet_train.lr > 0.0) || cfg.prenet_train.epochs < 1 ||
      cfg.prenet_train.batch < 1)
    throw ConfigError("prenet: invalid training settings");
  if (!(cfg.actuator.gas_max > 0.0 && cfg.actuator.brake_max > 0.0 &&
        cfg.actuator.tau > 0.0))
    throw ConfigError("actuator: gains and tau must be positive");
}

namespace {

std::string join(const double* v, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += format_double(v[i]);
  }
  return s;
}

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  std::istringstream ss(s);
  double v;
  while (ss >> v) out.push_back(v);
  return out;
}

struct Reader {
  const KvFile& kv;

  double num(const std::string& sec, const std::string& key, double dflt) const {
    if (!kv.has(sec, key)) return dflt;
    return std::stod(kv.get(sec, key));
  }
  std::uint64_t unum(const std::string& sec, const std::string& key,
                     std::uint64_t dflt) const {
    if (!kv.has(sec, key)) return dflt;
    return std::stoull(kv.get(sec, key));
  }
  std::string str(const std::string& sec, const std::string& key,
                  const std::string& dflt) const {
    return kv.has(sec, key) ? kv.get(sec, key) : dflt;
  }
  template <std::size_t N>
  void arr(const std::string& sec, const std::string& key,
           std::array<double, N>& out) const {
    if (!kv.has(sec, key)) return;
    auto vals = split_doubles(kv.get(sec, key));
    if (vals.size() != N)
      throw ConfigError("config: [" + sec + "] " + key + " needs " +
                        std::to_string(N) + " values");
    for (std::size_t i = 0; i < N; ++i) out[i] = vals[i];
  }
};

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  KvFile kv = KvFile::parse(text);
  Reader r{kv};
  ExperimentConfig c;

  c.plant.l_r = r.num("vehicle", "plant_l_r", c.plant.l_r);
  c.plant.l_f = r.num("vehicle", "plant_l_f", c.plant.l_f);
  c.model.l_r = r.num("vehicle", "model_l_r", c.model.l_r);
  c.model.l_f = r.num("vehicle", "model_l_f", c.model.l_f);

  r.arr("scenario", "x0", c.x0);
  r.arr("scenario", "xf", c.xf);
  c.t_final = r.num("scenario", "t_final", c.t_final);
  c.dt = r.num("scenario", "dt", c.dt);
  c.start.x = r.num("scenario", "start_x", c.start.x);
  c.start.y = r.num("scenario", "start_y", c.start.y);
  c.start.psi = r.num("scenario", "start_psi", c.start.psi);
  c.start.v = r.num("scenario", "start_v", c.start.v);
  c.start.beta = r.num("scenario", "start_beta", c.start.beta);

  const std::string drift = r.str("controller", "drift_form", "exact");
  if (drift == "exact")
    c.drift = DriftForm::exact;
  else if (drift == "as_printed")
    c.drift = DriftForm::as_printed;
  else
    throw ConfigError("controller: drift_form must be exact or as_printed");
  c.eps_v = r.num("controller", "eps_v", c.eps_v);
  c.a_max = r.num("controller", "a_max", c.a_max);
  c.b_max = r.num("controller", "b_max", c.b_max);
  c.blowup = r.num("controller", "blowup", c.blowup);

  r.arr("planner", "q", c.plan_weights.q);
  r.arr("planner", "r", c.plan_weights.r);
  r.arr("planner", "qf", c.plan_weights.qf);
  c.plan_weights.v_bnds = r.num("planner", "v_bnds", c.plan_weights.v_bnds);
  c.qp_tol = r.num("planner", "qp_tol", c.qp_tol);
  c.qp_max_iter = static_cast<int>(r.num("planner", "qp_max_iter",
                                         c.qp_max_iter));
  c.replan_every = static_cast<int>(r.num("planner", "replan_every",
                                          c.replan_every));

  r.arr("tracker", "q", c.tracker_q);
  r.arr("tracker", "r", c.tracker_r);

  c.trainer.population = static_cast<std::size_t>(
      r.num("trainer", "population", static_cast<double>(c.trainer.population)));
  c.trainer.sigma_es = r.num("trainer", "sigma_es", c.trainer.sigma_es);
  c.trainer.step_size = r.num("trainer", "step_size", c.trainer.step_size);
  c.trainer.epochs = static_cast<std::size_t>(
      r.num("trainer", "epochs", static_cast<double>(c.trainer.epochs)));
  c.trainer.episodes_per_eval = static_cast<std::size_t>(r.num(
      "trainer", "episodes_per_eval",
      static_cast<double>(c.trainer.episodes_per_eval)));
  c.trainer.eval_episodes = static_cast<std::size_t>(r.num(
      "trainer", "eval_episodes", static_cast<double>(c.trainer.eval_episodes)));
  c.trainer.sigma_w = r.num("trainer", "sigma_w", c.trainer.sigma_w);
  c.trainer.seed = r.unum("trainer", "seed", c.trainer.seed);
  c.trainer.parallel = r.num("trainer", "parallel", 1.0) != 0.0;
  c.policy_output_gain = r.num("trainer", "output_gain", c.policy_output_gain);
  c.policy_hidden = static_cast<std::size_t>(
      r.num("trainer", "hidden", static_cast<double>(c.policy_hidden)));

  c.actuator.gas_max = r.num("actuator", "gas_max", c.actuator.gas_max);
  c.actuator.brake_max = r.num("actuator", "brake_max", c.actuator.brake_max);
  c.actuator.tau = r.num("actuator", "tau", c.actuator.tau);

  c.collect.actuator = c.actuator;
  c.collect.n = static_cast<std::size_t>(
      r.num("prenet", "samples", static_cast<double>(c.collect.n)));
  c.collect.hold_steps = static_cast<std::size_t>(r.num(
      "prenet", "hold_steps", static_cast<double>(c.collect.hold_steps)));
  c.collect.dt = r.num("prenet", "dt", c.collect.dt);
  c.collect.seed = r.unum("prenet", "seed", c.collect.seed);
  c.prenet_train.epochs = static_cast<std::size_t>(r.num(
      "prenet", "epochs", static_cast<double>(c.prenet_train.epochs)));
  c.prenet_train.lr = r.num("prenet", "lr", c.prenet_train.lr);
  c.prenet_train.batch = static_cast<std::size_t>(
      r.num("prenet", "batch", static_cast<double>(c.prenet_train.batch)));
  c.prenet_train.seed = c.collect.seed;
  c.prenet_train.hidden = static_cast<std::size_t>(r.num(
      "prenet", "hidden", static_cast<double>(c.prenet_train.hidden)));

  c.out_dir = r.str("output", "dir", c.out_dir);

  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_text_file(path));
}

std::string serialize_config(const ExperimentConfig& c) {
  KvFile kv;
  auto set = [&](const std::string& sec, const std::string& key, double v) {
    kv.set(sec, key, format_double(v));
  };
  set("vehicle", "plant_l_r", c.plant.l_r);
  set("vehicle", "plant_l_f", c.plant.l_f);
  set("vehicle", "model_l_r", c.model.l_r);
  set("vehicle", "model_l_f", c.model.l_f);

  kv.set("scenario", "x0", join(c.x0.data(), 4));
  kv.set("scenario", "xf", join(c.xf.data(), 4));
  set("scenario", "t_final", c.t_final);
  set("scenario", "dt", c.dt);
  set("scenario", "start_x", c.start.x);
  set("scenario", "start_y", c.start.y);
  set("scenario", "start_psi", c.start.psi);
  set("scenario", "start_v", c.start.v);
  set("scenario", "start_beta", c.start.beta);

  kv.set("controller", "drift_form",
         c.drift == DriftForm::exact ? "exact" : "as_printed");
  set("controller", "eps_v", c.eps_v);
  set("controller", "a_max", c.a_max);
  set("controller", "b_max", c.b_max);
  set("controller", "blowup", c.blowup);

  kv.set("planner", "q", join(c.plan_weights.q.data(), 4));
  kv.set("planner", "r", join(c.plan_weights.r.data(), 2));
  kv.set("planner", "qf", join(c.plan_weights.qf.data(), 4));
  set("planner", "v_bnds", c.plan_weights.v_bnds);
  set("planner", "qp_tol", c.qp_tol);
  set("planner", "qp_max_iter", c.qp_max_iter);
  set("planner", "replan_every", c.replan_every);

  kv.set("tracker", "q", join(c.tracker_q.data(), 4));
  kv.set("tracker", "r", join(c.tracker_r.data(), 2));

  set("trainer", "population", static_cast<double>(c.trainer.population));
  set("trainer", "sigma_es", c.trainer.sigma_es);
  set("trainer", "step_size", c.trainer.step_size);
  set("trainer", "epochs", static_cast<double>(c.trainer.epochs));
  set("trainer", "episodes_per_eval",
      static_cast<double>(c.trainer.episodes_per_eval));
  set("trainer", "eval_episodes", static_cast<double>(c.trainer.eval_episodes));
  set("trainer", "sigma_w", c.trainer.sigma_w);
  kv.set("trainer", "seed", std::to_string(c.trainer.seed));
  set("trainer", "parallel", c.trainer.parallel ? 1.0 : 0.0);
  set("trainer", "output_gain", c.policy_output_gain);
  set("trainer", "hidden", static_cast<double>(c.policy_hidden));

  set("actuator", "gas_max", c.actuator.gas_max);
  set("actuator", "brake_max", c.actuator.brake_max);
  set("actuator", "tau", c.actuator.tau);

  set("prenet", "samples", static_cast<double>(c.collect.n));
  set("prenet", "hold_steps", static_cast<double>(c.collect.hold_steps));
  set("prenet", "dt", c.collect.dt);
  kv.set("prenet", "seed", std::to_string(c.collect.seed));
  set("prenet", "epochs", static_cast<double>(c.prenet_train.epochs));
  set("prenet", "lr", c.prenet_train.lr);
  set("prenet", "batch", static_cast<double>(c.prenet_train.batch));
  set("prenet", "hidden", static_cast<double>(c.prenet_train.hidden));

  kv.set("output", "dir", c.out_dir);
  return kv.serialize();
}

}  // namespace fbl

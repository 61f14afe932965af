#include "fbl/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "fbl/io.hpp"
#include "fbl/rng.hpp"

namespace fbl {

CorrectionPolicy CorrectionPolicy::make(double output_gain,
                                        std::size_t hidden) {
  MlpSpec spec;
  spec.layers = {5, hidden, hidden, 6};
  spec.act = Activation::tanh;
  spec.output_gain = output_gain;
  // Fixed scaling keeps the raw states (positions in metres, heading in
  // radians, speed in m/s) in a comparable range for the tanh layers.
  spec.input_scale = {0.2, 0.2, 0.3183098861837907, 0.5, 1.0};
  return CorrectionPolicy{Mlp(std::move(spec))};
}

Corrections policy_corrections(const CorrectionPolicy& policy,
                               const VehicleState& s) {
  Vec out = policy.net.forward({s.x, s.y, s.psi, s.v, s.beta});
  Corrections c;
  c.beta = {out[0], out[1]};
  c.alpha = {out[2], out[3], out[4], out[5]};
  return c;
}

void save_policy_json(const std::string& path, const CorrectionPolicy& p) {
  nlohmann::json j;
  j["layers"] = p.net.spec().layers;
  j["activation"] = "tanh";
  j["output_gain"] = p.net.spec().output_gain;
  j["input_scale"] = p.net.spec().input_scale;
  j["params"] = p.net.params();
  write_text_file(path, j.dump(2) + "\n");
}

CorrectionPolicy load_policy_json(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_text_file(path));
  MlpSpec spec;
  spec.layers = j.at("layers").get<std::vector<std::size_t>>();
  spec.act = Activation::tanh;
  spec.output_gain = j.at("output_gain").get<double>();
  spec.input_scale = j.at("input_scale").get<Vec>();
  CorrectionPolicy p{Mlp(std::move(spec))};
  Vec params = j.at("params").get<Vec>();
  if (params.size() != p.net.param_count())
    throw std::runtime_error("policy file: parameter count mismatch");
  p.net.params() = std::move(params);
  return p;
}

double pointwise_loss(const LinearState& xi, const LinearState& xi_next,
                      const VirtualInput& v, const LinearModel& m) {
  double loss = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < 4; ++j) pred += m.abar(i, j) * xi[j];
    pred += m.bbar(i, 0) * v.v1 + m.bbar(i, 1) * v.v2;
    const double d = xi_next[i] - pred;
    loss += d * d;
  }
  return loss;
}

namespace {

double clamp(double v, double lo, double hi) {
  return std::min(hi, std::max(lo, v));
}

double state_norm(const LinearState& xi) {
  return std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2] +
                   xi[3] * xi[3]);
}

}  // namespace

EpisodeRecord run_episode(const ScenarioRuntime& rt,
                          const CorrectionPolicy& policy,
                          const PlanResult& plan, const Mat& tracker_f,
                          double sigma_w, std::uint64_t seed,
                          ActuationHook* actuation) {
  const std::size_t n = plan.states.size();
  EpisodeRecord rec;
  rec.steps.reserve(n);
  Rng rng(seed);
  if (actuation != nullptr) actuation->reset();
  LinearModel lm = linear_model(rt.dt);

  VehicleState s = rt.start;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    EpisodeStep step;
    step.x = s;
    step.xi = extract_linear_state(s);
    if (state_norm(step.xi) > rt.blowup) {
      rec.steps.push_back(step);
      rec.diverged = true;
      break;
    }
    step.reward = -std::sqrt(
        (step.xi[0] - plan.states[k][0]) * (step.xi[0] - plan.states[k][0]) +
        (step.xi[1] - plan.states[k][1]) * (step.xi[1] - plan.states[k][1]) +
        (step.xi[2] - plan.states[k][2]) * (step.xi[2] - plan.states[k][2]) +
        (step.xi[3] - plan.states[k][3]) * (step.xi[3] - plan.states[k][3]));
    step.v = track(step.xi, plan.states[k], plan.inputs[k], tracker_f);
    if (sigma_w > 0.0) {
      step.w[0] = sigma_w * rng.normal();
      step.w[1] = sigma_w * rng.normal();
    }
    try {
      const Corrections corr = policy_corrections(policy, s);
      ControlInput u = corrected_control(s, step.v, corr, rt.model, rt.drift,
                                         rt.eps_v);
      u.a = clamp(u.a + step.w[0], -rt.a_max, rt.a_max);
      u.b = clamp(u.b + step.w[1], -rt.b_max, rt.b_max);
      step.u = u;
      ControlInput applied = u;
      if (actuation != nullptr)
        applied.a = actuation->apply(u.a, rt.dt);
      s = step_rk4(s, applied, rt.plant, rt.dt);
    } catch (const SpeedTooLow&) {
      rec.steps.push_back(step);
      rec.diverged = true;
      break;
    } catch (const NonFiniteState&) {
      rec.steps.push_back(step);
      rec.diverged = true;
      break;
    }
    step.loss = pointwise_loss(step.xi, extract_linear_state(s), step.v, lm);
    rec.steps.push_back(step);
    rec.episode_return += step.reward;
  }
  if (rec.diverged) {
    rec.episode_return = -std::numeric_limits<double>::infinity();
    return rec;
  }
  EpisodeStep last;
  last.x = s;
  last.xi = extract_linear_state(s);
  rec.steps.push_back(last);
  return rec;
}

void validate(const TrainerConfig& cfg) {
  if (cfg.population < 2 || cfg.population % 2 != 0)
    throw std::invalid_argument(
        "trainer: population must be an even count >= 2");
  if (!(cfg.sigma_es > 0.0))
    throw std::invalid_argument("trainer: sigma_es must be positive");
  if (!(cfg.step_size > 0.0))
    throw std::invalid_argument("trainer: step_size must be positive");
  if (cfg.epochs < 1) throw std::invalid_argument("trainer: epochs must be >= 1");
  if (cfg.episodes_per_eval < 1)
    throw std::invalid_argument("trainer: episodes_per_eval must be >= 1");
  if (cfg.eval_episodes < 1)
    throw std::invalid_argument("trainer: eval_episodes must be >= 1");
  if (!(cfg.sigma_w > 0.0))
    throw std::invalid_argument("trainer: sigma_w must be positive");
}

double evaluate_member(const TrainScenario& sc, const Vec& params,
                       std::size_t episodes, double sigma_w,
                       std::uint64_t seed, std::uint64_t tag,
                       std::size_t member) {
  CorrectionPolicy policy =
      CorrectionPolicy::make(sc.policy_output_gain, sc.policy_hidden);
  policy.net.params() = params;
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    EpisodeRecord rec = run_episode(
        sc.rt, policy, sc.plan, sc.tracker_f, sigma_w,
        mix_seed(seed, tag, static_cast<std::uint64_t>(member), e));
    total += rec.episode_return;
  }
  return total / static_cast<double>(episodes);
}

void evaluate_population_serial(const TrainScenario& sc,
                                const std::vector<Vec>& members,
                                std::size_t episodes, double sigma_w,
                                std::uint64_t seed, std::uint64_t tag,
                                std::vector<double>& returns) {
  returns.resize(members.size());
  for (std::size_t i = 0; i < members.size(); ++i)
    returns[i] =
        evaluate_member(sc, members[i], episodes, sigma_w, seed, tag, i);
}

void evaluate_population_parallel(const TrainScenario& sc,
                                  const std::vector<Vec>& members,
                                  std::size_t episodes, double sigma_w,
                                  std::uint64_t seed, std::uint64_t tag,
                                  std::vector<double>& returns) {
  returns.resize(members.size());
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(members.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i)
    returns[static_cast<std::size_t>(i)] = evaluate_member(
        sc, members[static_cast<std::size_t>(i)], episodes, sigma_w, seed,
        tag, static_cast<std::size_t>(i));
}

namespace {

constexpr std::uint64_t kTagPopulation = 0x504f50;  // population rollouts
constexpr std::uint64_t kTagEval = 0x4556;          // noiseless evaluation

// Noiseless evaluation of one parameter vector; also reports the mean
// per-step pointwise loss across the evaluation episodes.
double evaluate_policy(const TrainScenario& sc, const Vec& params,
                       std::size_t episodes, std::uint64_t seed,
                       std::uint64_t epoch, double* mean_loss) {
  CorrectionPolicy policy =
      CorrectionPolicy::make(sc.policy_output_gain, sc.policy_hidden);
  policy.net.params() = params;
  double total = 0.0;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    EpisodeRecord rec = run_episode(sc.rt, policy, sc.plan, sc.tracker_f, 0.0,
                                    mix_seed(seed, kTagEval, epoch, e));
    total += rec.episode_return;
    for (std::size_t k = 0; k + 1 < rec.steps.size(); ++k) {
      loss_sum += rec.steps[k].loss;
      ++loss_count;
    }
  }
  if (mean_loss != nullptr)
    *mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count)
                                : std::numeric_limits<double>::infinity();
  return total / static_cast<double>(episodes);
}

}  // namespace

TrainResult train(const TrainerConfig& cfg, const TrainScenario& sc) {
  validate(cfg);
  CorrectionPolicy policy =
      CorrectionPolicy::make(sc.policy_output_gain, sc.policy_hidden);
  const std::size_t dim = policy.net.param_count();
  Vec theta(dim, 0.0);

  TrainResult result{CorrectionPolicy::make(sc.policy_output_gain,
                                            sc.policy_hidden),
                     {},
                     0.0};

  double step_size = cfg.step_size;
  double best_loss = 0.0;
  double best_return =
      evaluate_policy(sc, theta, cfg.eval_episodes, cfg.seed, 0, &best_loss);
  result.baseline_return = best_return;
  Vec best_theta = theta;
  result.curve.push_back({0, best_return, best_return, best_loss, step_size});

  const std::size_t half = cfg.population / 2;
  std::vector<Vec> members(cfg.population, Vec(dim));
  std::vector<Vec> noise(half, Vec(dim));
  std::vector<double> returns;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < half; ++i) {
      Rng rng(mix_seed(cfg.seed, kTagPopulation, epoch, i));
      for (std::size_t d = 0; d < dim; ++d) noise[i][d] = rng.normal();
      for (std::size_t d = 0; d < dim; ++d) {
        members[2 * i][d] = theta[d] + cfg.sigma_es * noise[i][d];
        members[2 * i + 1][d] = theta[d] - cfg.sigma_es * noise[i][d];
      }
    }
    if (cfg.parallel)
      evaluate_population_parallel(sc, members, cfg.episodes_per_eval,
                                   cfg.sigma_w, cfg.seed, epoch, returns);
    else
      evaluate_population_serial(sc, members, cfg.episodes_per_eval,
                                 cfg.sigma_w, cfg.seed, epoch, returns);

    const bool any_nan =
        std::any_of(returns.begin(), returns.end(),
                    [](double r) { return std::isnan(r); });
    if (any_nan) {
      // Abort this epoch's update; the halved step is visible in the curve.
      step_size *= 0.5;
      double loss = 0.0;
      const double ret = evaluate_policy(sc, theta, cfg.eval_episodes,
                                         cfg.seed, epoch, &loss);
      result.curve.push_back({epoch, ret, best_return, loss, step_size});
      continue;
    }

    // Rank-normalized utilities in [-0.5, 0.5]; -inf (diverged) members sink
    // to the bottom. Ties break by index so the update is deterministic.
    std::vector<std::size_t> order(cfg.population);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return returns[a] > returns[b];
                     });
    Vec utility(cfg.population);
    for (std::size_t rank = 0; rank < cfg.population; ++rank)
      utility[order[rank]] =
          0.5 - static_cast<double>(rank) /
                    static_cast<double>(cfg.population - 1);

    Vec grad(dim, 0.0);
    for (std::size_t i = 0; i < half; ++i) {
      const double w = utility[2 * i] - utility[2 * i + 1];
      for (std::size_t d = 0; d < dim; ++d) grad[d] += w * noise[i][d];
    }
    const double scale =
        step_size / (static_cast<double>(cfg.population) * cfg.sigma_es);
    for (std::size_t d = 0; d < dim; ++d) theta[d] += scale * grad[d];

    double loss = 0.0;
    const double ret =
        evaluate_policy(sc, theta, cfg.eval_episodes, cfg.seed, epoch, &loss);
    if (ret > best_return) {
      best_return = ret;
      best_theta = theta;
    }
    result.curve.push_back({epoch, ret, best_return, loss, step_size});
  }

  result.policy.net.params() = best_theta;
  return result;
}

void write_curve_csv(const std::string& path, const TrainResult& result) {
  CsvWriter csv(path);
  csv.row({"epoch", "mean_return", "best_return", "mean_pointwise_loss"});
  for (const EpochStats& e : result.curve)
    csv.row({static_cast<double>(e.epoch), e.mean_return, e.best_return,
             e.mean_pointwise_loss});
}

}  // namespace fbl

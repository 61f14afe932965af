#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbl/linearize.hpp"
#include "fbl/mlp.hpp"
#include "fbl/planner.hpp"
#include "fbl/vehicle.hpp"

namespace fbl {

/// State-dependent correction terms: a feed-forward net maps the 5 vehicle
/// states to 6 outputs, split into the additive beta correction (2) and the
/// row-major 2x2 alpha correction (4). Zero parameters give exactly zero
/// corrections, so the initial policy reproduces the nominal controller.
struct CorrectionPolicy {
  Mlp net;

  static CorrectionPolicy make(double output_gain = 0.1,
                               std::size_t hidden = 32);
};

Corrections policy_corrections(const CorrectionPolicy& policy,
                               const VehicleState& s);

void save_policy_json(const std::string& path, const CorrectionPolicy& p);
CorrectionPolicy load_policy_json(const std::string& path);

/// Squared deviation of an observed discrete update from the ideal linear
/// update xi_next = Abar xi + Bbar v.
double pointwise_loss(const LinearState& xi, const LinearState& xi_next,
                      const VirtualInput& v, const LinearModel& m);

/// Optional stateful transform of the commanded acceleration into the
/// realized one (the preprocessing-network-plus-actuator path).
class ActuationHook {
 public:
  virtual ~ActuationHook() = default;
  virtual void reset() = 0;
  virtual double apply(double commanded_accel, double dt) = 0;
};

/// Everything a rollout needs besides the policy: true plant, nominal model,
/// controller options and the episode start state.
struct ScenarioRuntime {
  VehicleParams plant{1.0, 1.0};
  VehicleParams model{0.5, 0.5};
  DriftForm drift = DriftForm::exact;
  double eps_v = 1e-3;
  double dt = 0.02;
  VehicleState start{0.0, 0.0, 1.5707963267948966, 0.5, 0.0};
  // Input clamps. b_max leaves the slip-rate demand of the initial
  // low-speed turn unclipped so the matched controller linearizes cleanly.
  double a_max = 4.0;
  double b_max = 3.0;
  double blowup = 1e3;       // ||xi||_2 divergence bound
};

struct EpisodeStep {
  VehicleState x;
  LinearState xi;
  VirtualInput v;
  ControlInput u;
  std::array<double, 2> w{0.0, 0.0};
  double reward = 0.0;
  double loss = 0.0;
};

struct EpisodeRecord {
  std::vector<EpisodeStep> steps;  // N entries; the last is the terminal state
  double episode_return = 0.0;
  bool diverged = false;
};

/// Tracks the plan under the corrected controller with exploration noise
/// w_k ~ N(0, sigma_w^2 I2) added to the applied input. Step reward is the
/// negative 2-norm distance of the linear state from the planned one.
/// Divergence (blow-up bound, loss of decoupling-matrix invertibility, or a
/// non-finite state) is recorded with a -inf return instead of throwing.
EpisodeRecord run_episode(const ScenarioRuntime& rt,
                          const CorrectionPolicy& policy,
                          const PlanResult& plan, const Mat& tracker_f,
                          double sigma_w, std::uint64_t seed,
                          ActuationHook* actuation = nullptr);

struct TrainerConfig {
  std::size_t population = 32;  // antithetic members; must be even
  double sigma_es = 0.05;
  double step_size = 0.02;
  std::size_t epochs = 200;
  std::size_t episodes_per_eval = 2;
  std::size_t eval_episodes = 5;
  double sigma_w = 0.01;
  std::uint64_t seed = 1;
  bool parallel = true;
};

// Throws std::invalid_argument on degenerate settings (population < 2 or
// odd, non-positive scales, ...).
void validate(const TrainerConfig& cfg);

struct TrainScenario {
  ScenarioRuntime rt;
  PlanResult plan;
  Mat tracker_f;
  double policy_output_gain = 0.1;
  std::size_t policy_hidden = 32;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_return = 0.0;  // noiseless evaluation of the current policy
  double best_return = 0.0;  // best-so-far evaluation (non-decreasing)
  double mean_pointwise_loss = 0.0;
  double step_size = 0.0;
};

struct TrainResult {
  CorrectionPolicy policy;  // best-so-far parameters
  std::vector<EpochStats> curve;
  double baseline_return = 0.0;  // epoch-0 evaluation of the zero policy
};

/// Mean return of `episodes` rollouts of one parameter vector; seeds are
/// derived from (seed, tag, member, episode) so results do not depend on
/// evaluation order.
double evaluate_member(const TrainScenario& sc, const Vec& params,
                       std::size_t episodes, double sigma_w,
                       std::uint64_t seed, std::uint64_t tag,
                       std::size_t member);

/// Serial reference for population evaluation; kept alongside the OpenMP
/// version so tests can assert bit-identical results.
void evaluate_population_serial(const TrainScenario& sc,
                                const std::vector<Vec>& members,
                                std::size_t episodes, double sigma_w,
                                std::uint64_t seed, std::uint64_t tag,
                                std::vector<double>& returns);

/// OpenMP population evaluation. Each member writes only its own slot, so
/// the result is bit-identical to the serial reference for any thread count.
void evaluate_population_parallel(const TrainScenario& sc,
                                  const std::vector<Vec>& members,
                                  std::size_t episodes, double sigma_w,
                                  std::uint64_t seed, std::uint64_t tag,
                                  std::vector<double>& returns);

/// Antithetic evolution strategies with rank-normalized returns and elitist
/// best-so-far retention, maximizing episode return. NaN returns abort the
/// epoch's update and halve the step size (visible in the curve).
TrainResult train(const TrainerConfig& cfg, const TrainScenario& sc);

void write_curve_csv(const std::string& path, const TrainResult& result);

}  // namespace fbl

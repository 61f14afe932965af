#pragma once

#include <string>

#include "fbl/config.hpp"
#include "fbl/learn.hpp"
#include "fbl/prenet.hpp"

namespace fbl {

/// Plan + tracker gain + rollout scenario derived from a config.
struct ExperimentSetup {
  PlanResult plan;
  Mat tracker_f;
  TrainScenario scenario;
};

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg);

/// Feeds commanded accelerations through the trained inverse network and the
/// lagged actuator, i.e. the full pipeline the preprocessing network exists
/// for.
class PrenetActuation : public ActuationHook {
 public:
  PrenetActuation(PreNet net, ActuatorParams params)
      : net_(std::move(net)), params_(params) {}

  void reset() override { act_ = ActuatorState{}; }

  double apply(double commanded_accel, double dt) override {
    auto [gas, brake] = accel_to_action(net_, commanded_accel);
    act_ = actuator_step(act_, gas, brake, params_, dt);
    return act_.accel;
  }

 private:
  PreNet net_;
  ActuatorParams params_;
  ActuatorState act_;
};

// Columns: k, t, x, y, psi, V, beta, xi1..xi4, v1, v2, a, b, reward, loss.
void write_trajectory_csv(const std::string& path, const EpisodeRecord& rec,
                          double dt);

/// Receding-horizon variant of the evaluation episode: re-solves the
/// planning QP from the current linear state every cfg.replan_every steps
/// (the remaining horizon shrinks each time) and tracks the freshest plan.
/// Noiseless and deterministic; rewards measure distance to the active
/// plan's reference.
EpisodeRecord run_receding_episode(const ExperimentConfig& cfg,
                                   const ExperimentSetup& setup,
                                   const CorrectionPolicy& policy,
                                   ActuationHook* actuation = nullptr);

// Exit codes: 0 success, 1 infeasible/diverged, 2 config error.
int cmd_plan(const ExperimentConfig& cfg);
int cmd_baseline(const ExperimentConfig& cfg);
int cmd_train(const ExperimentConfig& cfg);
int cmd_eval(const ExperimentConfig& cfg, const std::string& policy_file,
             bool use_prenet, const std::string& prenet_file = "");
int cmd_prenet(const ExperimentConfig& cfg);
int cmd_plot(const ExperimentConfig& cfg);

}  // namespace fbl

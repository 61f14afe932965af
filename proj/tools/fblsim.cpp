// Command-line front end: plan | baseline | train | eval | prenet | plot.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fbl/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Learned feedback-linearization simulator for a kinematic bicycle: "
      "plans with a constrained LQR, tracks with a learned-corrected "
      "linearizing controller, and trains the correction policy."};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string drift;
  long long seed = -1;
  app.add_option("--config", config_path, "Config file (text key-value)");
  app.add_option("--out", out_dir, "Output directory (overrides config)");
  app.add_option("--drift", drift, "Drift form: exact | as_printed")
      ->check(CLI::IsMember({"exact", "as_printed"}));
  app.add_option("--seed", seed, "Trainer/prenet seed override");

  auto* plan_cmd = app.add_subcommand("plan", "Solve the planning QP");
  auto* baseline_cmd =
      app.add_subcommand("baseline", "Run the zero-policy episode");
  auto* train_cmd =
      app.add_subcommand("train", "Train the correction policy");
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved policy");
  auto* prenet_cmd = app.add_subcommand(
      "prenet", "Collect actuator data and train the inverse network");
  auto* plot_cmd =
      app.add_subcommand("plot", "Emit an SVG of planned vs. flown paths");

  std::string policy_file = "out/policy.json";
  std::string prenet_file;
  bool use_prenet = false;
  eval_cmd->add_option("policy", policy_file, "Policy weights JSON");
  eval_cmd->add_flag("--use-prenet", use_prenet,
                     "Route acceleration through the inverse network and "
                     "lagged actuator");
  eval_cmd->add_option("--prenet", prenet_file,
                       "Prenet weights JSON (default: <out>/prenet_weights.json)");

  long long pn_samples = -1, pn_hold = -1, pn_epochs = -1;
  double pn_lr = -1.0;
  prenet_cmd->add_option("--samples", pn_samples, "Dataset size");
  prenet_cmd->add_option("--hold-steps", pn_hold, "Steps each action is held");
  prenet_cmd->add_option("--lr", pn_lr, "Adam learning rate");
  prenet_cmd->add_option("--epochs", pn_epochs, "Training epochs");

  CLI11_PARSE(app, argc, argv);

  fbl::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = fbl::load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!drift.empty())
      cfg.drift = drift == "exact" ? fbl::DriftForm::exact
                                   : fbl::DriftForm::as_printed;
    if (seed >= 0) {
      cfg.trainer.seed = static_cast<std::uint64_t>(seed);
      cfg.collect.seed = static_cast<std::uint64_t>(seed);
      cfg.prenet_train.seed = static_cast<std::uint64_t>(seed);
    }
    if (pn_samples > 0) cfg.collect.n = static_cast<std::size_t>(pn_samples);
    if (pn_hold > 0) cfg.collect.hold_steps = static_cast<std::size_t>(pn_hold);
    if (pn_lr > 0.0) cfg.prenet_train.lr = pn_lr;
    if (pn_epochs > 0)
      cfg.prenet_train.epochs = static_cast<std::size_t>(pn_epochs);
    fbl::validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (plan_cmd->parsed()) return fbl::cmd_plan(cfg);
    if (baseline_cmd->parsed()) return fbl::cmd_baseline(cfg);
    if (train_cmd->parsed()) return fbl::cmd_train(cfg);
    if (eval_cmd->parsed())
      return fbl::cmd_eval(cfg, policy_file, use_prenet, prenet_file);
    if (prenet_cmd->parsed()) return fbl::cmd_prenet(cfg);
    if (plot_cmd->parsed()) return fbl::cmd_plot(cfg);
  } catch (const fbl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

#include "fbl/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fbl/io.hpp"

namespace fbl {

namespace {

using nlohmann::json;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

json scenario_echo(const ExperimentConfig& cfg) {
  json j;
  j["x0"] = cfg.x0;
  j["xf"] = cfg.xf;
  j["t_final"] = cfg.t_final;
  j["dt"] = cfg.dt;
  j["steps"] = cfg.episode_steps();
  j["plant_l_r"] = cfg.plant.l_r;
  j["model_l_r"] = cfg.model.l_r;
  j["drift_form"] = cfg.drift == DriftForm::exact ? "exact" : "as_printed";
  return j;
}

void write_report(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

double improvement_factor(double baseline, double learned) {
  if (learned == 0.0) return std::numeric_limits<double>::infinity();
  return std::abs(baseline) / std::abs(learned);
}

EpisodeRecord run_noiseless(const ExperimentSetup& setup,
                            const CorrectionPolicy& policy,
                            ActuationHook* hook = nullptr) {
  return run_episode(setup.scenario.rt, policy, setup.plan, setup.tracker_f,
                     0.0, 0, hook);
}

}  // namespace

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
  ExperimentSetup setup;
  setup.plan = plan(cfg.x0_state(), cfg.xf_state(), cfg.plan_states(),
                    cfg.plan_weights, cfg.dt, {}, cfg.qp_tol, cfg.qp_max_iter);
  setup.tracker_f =
      tracker_gain(Mat::diag({cfg.tracker_q[0], cfg.tracker_q[1],
                              cfg.tracker_q[2], cfg.tracker_q[3]}),
                   Mat::diag({cfg.tracker_r[0], cfg.tracker_r[1]}));
  setup.scenario.rt = cfg.runtime();
  setup.scenario.plan = setup.plan;
  setup.scenario.tracker_f = setup.tracker_f;
  setup.scenario.policy_output_gain = cfg.policy_output_gain;
  setup.scenario.policy_hidden = cfg.policy_hidden;
  return setup;
}

void write_trajectory_csv(const std::string& path, const EpisodeRecord& rec,
                          double dt) {
  CsvWriter csv(path);
  csv.row({"k", "t", "x", "y", "psi", "V", "beta", "xi1", "xi2", "xi3", "xi4",
           "v1", "v2", "a", "b", "reward", "loss"});
  for (std::size_t k = 0; k < rec.steps.size(); ++k) {
    const EpisodeStep& s = rec.steps[k];
    csv.row({static_cast<double>(k), static_cast<double>(k) * dt, s.x.x,
             s.x.y, s.x.psi, s.x.v, s.x.beta, s.xi[0], s.xi[1], s.xi[2],
             s.xi[3], s.v.v1, s.v.v2, s.u.a, s.u.b, s.reward, s.loss});
  }
}

EpisodeRecord run_receding_episode(const ExperimentConfig& cfg,
                                   const ExperimentSetup& setup,
                                   const CorrectionPolicy& policy,
                                   ActuationHook* actuation) {
  const std::size_t total = cfg.episode_steps();
  const std::size_t every = cfg.replan_every > 0
                                ? static_cast<std::size_t>(cfg.replan_every)
                                : total;
  EpisodeRecord rec;
  rec.steps.reserve(total + 1);
  // Segment boundaries are not episode boundaries: the actuator lag carries
  // across re-plans, so shield the hook from run_episode's per-call reset.
  struct SegmentHook : ActuationHook {
    ActuationHook* inner = nullptr;
    void reset() override {}
    double apply(double a, double dt) override { return inner->apply(a, dt); }
  };
  SegmentHook segment_hook;
  segment_hook.inner = actuation;
  ActuationHook* hook = nullptr;
  if (actuation != nullptr) {
    actuation->reset();
    hook = &segment_hook;
  }

  ScenarioRuntime rt = setup.scenario.rt;
  PlanResult active = setup.plan;
  std::size_t done = 0;
  while (done < total) {
    const std::size_t remaining = total - done;
    if (done > 0 && remaining + 1 >= 2) {
      // Fresh plan from where the vehicle actually is.
      active = plan(extract_linear_state(rt.start), cfg.xf_state(),
                    remaining + 1, cfg.plan_weights, cfg.dt, {}, cfg.qp_tol,
                    cfg.qp_max_iter);
    }
    const std::size_t segment = std::min(every, remaining);
    PlanResult slice = active;
    slice.states.resize(segment + 1);
    slice.inputs.resize(segment);
    // Noise stays off: the receding mode is an evaluation hook.
    EpisodeRecord part =
        run_episode(rt, policy, slice, setup.tracker_f, 0.0, 0, hook);
    const bool last = part.diverged || segment == remaining;
    for (std::size_t k = 0; k + (last ? 0 : 1) < part.steps.size(); ++k)
      rec.steps.push_back(part.steps[k]);
    rec.episode_return += part.episode_return;
    if (part.diverged) {
      rec.diverged = true;
      rec.episode_return = part.episode_return;  // -inf sentinel
      break;
    }
    rt.start = part.steps.back().x;
    done += segment;
  }
  return rec;
}

int cmd_plan(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    PlanResult p = plan(cfg.x0_state(), cfg.xf_state(), cfg.plan_states(),
                        cfg.plan_weights, cfg.dt, {}, cfg.qp_tol,
                        cfg.qp_max_iter);
    const std::string csv_path = out_path(cfg, "plan.csv");
    write_plan_csv(csv_path, p, cfg.dt);

    // Feasibility residuals for the printout.
    auto [abar, bbar] = discretize(cfg.dt);
    double dyn_res = 0.0;
    for (std::size_t k = 0; k + 1 < p.states.size(); ++k)
      for (std::size_t i = 0; i < 4; ++i) {
        double pred = bbar(i, 0) * p.inputs[k].v1 + bbar(i, 1) * p.inputs[k].v2;
        for (std::size_t j = 0; j < 4; ++j)
          pred += abar(i, j) * p.states[k][j];
        dyn_res = std::max(dyn_res, std::abs(p.states[k + 1][i] - pred));
      }
    double v_max = 0.0;
    for (const VirtualInput& v : p.inputs)
      v_max = std::max({v_max, std::abs(v.v1), std::abs(v.v2)});

    json report;
    report["scenario"] = scenario_echo(cfg);
    report["objective"] = p.objective;
    report["dynamics_residual"] = dyn_res;
    report["max_input"] = v_max;
    report["files"] = {{"plan", "plan.csv"}};
    report["wall_clock_s"] = seconds_since(t0);
    write_report(out_path(cfg, "plan_report.json"), report);

    std::cout << "plan: objective " << format_double(p.objective)
              << ", dynamics residual " << format_double(dyn_res)
              << ", max |v| " << format_double(v_max) << " (bound "
              << format_double(cfg.plan_weights.v_bnds) << ")\n";
    return 0;
  } catch (const Infeasible& e) {
    std::cerr << "plan: infeasible: " << e.what() << "\n";
    return 1;
  }
}

int cmd_baseline(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    ExperimentSetup setup = prepare_experiment(cfg);
    CorrectionPolicy zero =
        CorrectionPolicy::make(cfg.policy_output_gain, cfg.policy_hidden);
    EpisodeRecord rec = run_noiseless(setup, zero);

    const std::string traj_path = out_path(cfg, "baseline_trajectory.csv");
    write_trajectory_csv(traj_path, rec, cfg.dt);
    const std::string plan_path = out_path(cfg, "plan.csv");
    write_plan_csv(plan_path, setup.plan, cfg.dt);

    json report;
    report["scenario"] = scenario_echo(cfg);
    report["baseline_return"] = rec.diverged
                                    ? json("diverged")
                                    : json(rec.episode_return);
    report["diverged"] = rec.diverged;
    report["files"] = {{"trajectory", "baseline_trajectory.csv"},
                       {"plan", "plan.csv"}};
    report["wall_clock_s"] = seconds_since(t0);
    write_report(out_path(cfg, "baseline_report.json"), report);

    if (rec.diverged) {
      std::cout << "baseline: episode diverged\n";
      return 1;
    }
    std::cout << "baseline: return " << format_double(rec.episode_return)
              << "\n";
    return 0;
  } catch (const Infeasible& e) {
    std::cerr << "baseline: infeasible: " << e.what() << "\n";
    return 1;
  }
}

int cmd_train(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    ExperimentSetup setup = prepare_experiment(cfg);
    TrainResult result = train(cfg.trainer, setup.scenario);

    const std::string curve_path = out_path(cfg, "learning_curve.csv");
    write_curve_csv(curve_path, result);
    const std::string policy_path = out_path(cfg, "policy.json");
    save_policy_json(policy_path, result.policy);

    const std::string plan_path = out_path(cfg, "plan.csv");
    write_plan_csv(plan_path, setup.plan, cfg.dt);
    CorrectionPolicy zero =
        CorrectionPolicy::make(cfg.policy_output_gain, cfg.policy_hidden);
    const std::string base_path = out_path(cfg, "baseline_trajectory.csv");
    EpisodeRecord base_rec = run_noiseless(setup, zero);
    write_trajectory_csv(base_path, base_rec, cfg.dt);
    const std::string learned_path = out_path(cfg, "learned_trajectory.csv");
    EpisodeRecord learned_rec = run_noiseless(setup, result.policy);
    write_trajectory_csv(learned_path, learned_rec, cfg.dt);

    const double baseline = result.baseline_return;
    const double learned = result.curve.back().best_return;
    json report;
    report["scenario"] = scenario_echo(cfg);
    report["baseline_return"] = baseline;
    report["learned_return"] = learned;
    report["improvement_factor"] = improvement_factor(baseline, learned);
    report["epochs"] = cfg.trainer.epochs;
    report["files"] = {{"curve", "learning_curve.csv"},
                       {"policy", "policy.json"},
                       {"plan", "plan.csv"},
                       {"baseline_trajectory", "baseline_trajectory.csv"},
                       {"learned_trajectory", "learned_trajectory.csv"}};
    report["wall_clock_s"] = seconds_since(t0);
    write_report(out_path(cfg, "train_report.json"), report);

    std::cout << "train: baseline " << format_double(baseline) << ", best "
              << format_double(learned) << ", improvement "
              << format_double(improvement_factor(baseline, learned)) << "x\n";
    return 0;
  } catch (const Infeasible& e) {
    std::cerr << "train: infeasible: " << e.what() << "\n";
    return 1;
  }
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& policy_file,
             bool use_prenet, const std::string& prenet_file) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    CorrectionPolicy policy = load_policy_json(policy_file);
    ExperimentSetup setup = prepare_experiment(cfg);

    const bool receding = cfg.replan_every > 0;
    EpisodeRecord direct = receding
                               ? run_receding_episode(cfg, setup, policy)
                               : run_noiseless(setup, policy);
    const std::string direct_path = out_path(cfg, "eval_trajectory.csv");
    write_trajectory_csv(direct_path, direct, cfg.dt);

    json report;
    report["scenario"] = scenario_echo(cfg);
    report["policy_file"] = policy_file;
    report["receding_horizon"] = receding ? cfg.replan_every : 0;
    report["direct_return"] = direct.diverged ? json("diverged")
                                              : json(direct.episode_return);
    report["files"] = {{"trajectory", "eval_trajectory.csv"}};

    bool diverged = direct.diverged;
    if (use_prenet) {
      const std::string weights =
          prenet_file.empty() ? out_path(cfg, "prenet_weights.json")
                              : prenet_file;
      PrenetActuation hook(load_prenet_json(weights), cfg.actuator);
      EpisodeRecord rec = receding
                              ? run_receding_episode(cfg, setup, policy, &hook)
                              : run_noiseless(setup, policy, &hook);
      const std::string prenet_path =
          out_path(cfg, "eval_prenet_trajectory.csv");
      write_trajectory_csv(prenet_path, rec, cfg.dt);
      report["prenet_return"] =
          rec.diverged ? json("diverged") : json(rec.episode_return);
      report["files"]["prenet_trajectory"] = "eval_prenet_trajectory.csv";
      if (!direct.diverged && !rec.diverged && direct.episode_return != 0.0)
        report["prenet_degradation_factor"] =
            rec.episode_return / direct.episode_return;
      diverged = diverged || rec.diverged;
      std::cout << "eval: direct return "
                << (direct.diverged ? std::string("diverged")
                                    : format_double(direct.episode_return))
                << ", with prenet "
                << (rec.diverged ? std::string("diverged")
                                 : format_double(rec.episode_return))
                << "\n";
    } else {
      std::cout << "eval: return "
                << (direct.diverged ? std::string("diverged")
                                    : format_double(direct.episode_return))
                << "\n";
    }
    report["wall_clock_s"] = seconds_since(t0);
    write_report(out_path(cfg, "eval_report.json"), report);
    return diverged ? 1 : 0;
  } catch (const Infeasible& e) {
    std::cerr << "eval: infeasible: " << e.what() << "\n";
    return 1;
  }
}

int cmd_prenet(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<ActuationSample> data = collect_data(cfg.collect);
  const std::string data_path = out_path(cfg, "prenet_dataset.csv");
  write_dataset_csv(data_path, data);

  PrenetTrainResult trained = train_prenet(data, cfg.prenet_train);
  const std::string weights_path = out_path(cfg, "prenet_weights.json");
  save_prenet_json(weights_path, trained.net);
  const std::string curve_path = out_path(cfg, "prenet_loss.csv");
  {
    CsvWriter csv(curve_path);
    csv.row({"epoch", "mse"});
    for (std::size_t e = 0; e < trained.loss_curve.size(); ++e)
      csv.row({static_cast<double>(e), trained.loss_curve[e]});
  }

  // Round-trip check: command a grid of accelerations, apply the inverse
  // network, and compare the actuator's steady state with the command.
  double mae = 0.0;
  std::size_t count = 0;
  for (double a = -6.0; a <= 3.5 + 1e-9; a += 0.05) {
    auto [gas, brake] = accel_to_action(trained.net, a);
    const double steady =
        cfg.actuator.gas_max * gas - cfg.actuator.brake_max * brake;
    mae += std::abs(steady - a);
    ++count;
  }
  mae /= static_cast<double>(count);
  const double full_scale = cfg.actuator.gas_max + cfg.actuator.brake_max;

  json report;
  report["samples"] = data.size();
  report["final_mse"] = trained.final_mse;
  report["round_trip_mae"] = mae;
  report["round_trip_mae_fraction_of_full_scale"] = mae / full_scale;
  report["files"] = {{"dataset", "prenet_dataset.csv"},
                     {"weights", "prenet_weights.json"},
                     {"loss_curve", "prenet_loss.csv"}};
  report["wall_clock_s"] = seconds_since(t0);
  write_report(out_path(cfg, "prenet_report.json"), report);

  std::cout << "prenet: final mse " << format_double(trained.final_mse)
            << ", round-trip MAE " << format_double(mae) << " ("
            << format_double(100.0 * mae / full_scale) << "% of full scale)\n";
  return 0;
}

namespace {

struct Polyline {
  std::vector<std::pair<double, double>> pts;
  const char* color;
  const char* label;
};

void write_svg(const std::string& path, const std::vector<Polyline>& lines) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& l : lines)
    for (auto [x, y] : l.pts) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmin > xmax) {
    xmin = ymin = 0.0;
    xmax = ymax = 1.0;
  }
  const double pad = 0.05 * std::max(xmax - xmin, ymax - ymin) + 1e-6;
  xmin -= pad;
  xmax += pad;
  ymin -= pad;
  ymax += pad;
  const double w = 640.0, h = 640.0;
  auto sx = [&](double x) { return (x - xmin) / (xmax - xmin) * w; };
  auto sy = [&](double y) { return h - (y - ymin) / (ymax - ymin) * h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  int legend_y = 20;
  for (const auto& l : lines) {
    svg << "<polyline fill=\"none\" stroke=\"" << l.color
        << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : l.pts)
      svg << format_double(sx(x)) << ',' << format_double(sy(y)) << ' ';
    svg << "\"/>\n";
    svg << "<text x=\"10\" y=\"" << legend_y << "\" fill=\"" << l.color
        << "\" font-size=\"14\">" << l.label << "</text>\n";
    legend_y += 18;
  }
  svg << "</svg>\n";
  write_text_file(path, svg.str());
}

}  // namespace

int cmd_plot(const ExperimentConfig& cfg) {
  std::vector<Polyline> lines;
  auto add = [&](const std::string& file, std::size_t xcol, std::size_t ycol,
                 const char* color, const char* label) {
    const std::string path = out_path(cfg, file);
    if (!std::filesystem::exists(path)) return;
    Polyline l{{}, color, label};
    for (const auto& row : read_csv(path))
      l.pts.emplace_back(row[xcol], row[ycol]);
    lines.push_back(std::move(l));
  };
  add("plan.csv", 2, 4, "#1f77b4", "planned");
  add("baseline_trajectory.csv", 2, 3, "#d62728", "baseline");
  add("learned_trajectory.csv", 2, 3, "#2ca02c", "learned");
  add("eval_trajectory.csv", 2, 3, "#9467bd", "eval");
  if (lines.empty()) {
    std::cerr << "plot: no trajectory files in " << cfg.out_dir << "\n";
    return 1;
  }
  const std::string svg_path = out_path(cfg, "paths.svg");
  write_svg(svg_path, lines);
  std::cout << "plot: wrote " << svg_path << "\n";
  return 0;
}

}  // namespace fbl

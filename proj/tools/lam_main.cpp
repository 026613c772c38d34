// lam: synthetic scenes, inference, prediction, evaluation, clustering,
// rendering, and the accuracy sweep, one subcommand each.
//
// Exit codes: 0 success, 2 usage or input error, 3 runtime failure.
// Option precedence: command-line flag > config file > built-in default.
// Every command writes <out>.manifest.json with content hashes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lam/baselines.hpp"
#include "lam/clustering.hpp"
#include "lam/field.hpp"
#include "lam/manifest.hpp"
#include "lam/mcmc.hpp"
#include "lam/metrics.hpp"
#include "lam/predictor.hpp"
#include "lam/raster.hpp"
#include "lam/scene_io.hpp"
#include "lam/state_io.hpp"
#include "lam/synth.hpp"

namespace {

using lam::Cell;
using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

json load_config_file(const std::string& path) {
  json j = json::parse(lam::read_text_file(path));
  if (!j.is_object()) throw lam::InputError("config file must hold a JSON object");
  return j;
}

json section(const json& cfg, const char* name) {
  if (!cfg.contains(name)) return json::object();
  const json& s = cfg.at(name);
  if (!s.is_object())
    throw lam::InputError(std::string("config section '") + name + "' must be an object");
  return s;
}

// Config-file values fill only fields whose flag was absent on the command
// line, so flags win over the file and the file wins over defaults.
template <typename T>
void fill(const json& sec, const CLI::App& cmd, const char* flag, const char* key, T& dst) {
  if (cmd.count(flag) == 0 && sec.contains(key)) dst = sec.at(key).get<T>();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

json field_json(const lam::FieldParams& f) {
  return json{{"sigma_a_sq", f.sigma_a_sq}, {"sigma_r_sq", f.sigma_r_sq}};
}

json model_json(const lam::ModelParams& m) {
  return json{{"beta", m.beta},   {"eta", m.eta},       {"rho", m.rho},
              {"kappa", m.kappa}, {"gamma", m.gamma},   {"lambda", m.lambda},
              {"max_goals", m.max_goals}};
}

void fill_field(const json& sec, const CLI::App& cmd, lam::FieldParams& f) {
  fill(sec, cmd, "--sigma-a-sq", "sigma_a_sq", f.sigma_a_sq);
  fill(sec, cmd, "--sigma-r-sq", "sigma_r_sq", f.sigma_r_sq);
}

void add_field_flags(CLI::App* cmd, lam::FieldParams& f) {
  cmd->add_option("--sigma-a-sq", f.sigma_a_sq, "attraction spread sigma_a^2");
  cmd->add_option("--sigma-r-sq", f.sigma_r_sq, "repulsion spread sigma_r^2");
}

void fill_model(const json& sec, const CLI::App& cmd, lam::ModelParams& m) {
  fill(sec, cmd, "--beta", "beta", m.beta);
  fill(sec, cmd, "--eta", "eta", m.eta);
  fill(sec, cmd, "--rho", "rho", m.rho);
  fill(sec, cmd, "--kappa", "kappa", m.kappa);
  fill(sec, cmd, "--gamma", "gamma", m.gamma);
  fill(sec, cmd, "--lambda", "lambda", m.lambda);
  fill(sec, cmd, "--max-goals", "max_goals", m.max_goals);
}

void add_model_flags(CLI::App* cmd, lam::ModelParams& m) {
  cmd->add_option("--beta", m.beta, "relation smoothness weight");
  cmd->add_option("--eta", m.eta, "expected source count");
  cmd->add_option("--rho", m.rho, "stay-at-goal termination weight");
  cmd->add_option("--kappa", m.kappa, "multi-goal behavior mass");
  cmd->add_option("--gamma", m.gamma, "change fraction of the multi-goal mass");
  cmd->add_option("--lambda", m.lambda, "energy-to-log-likelihood scale");
  cmd->add_option("--max-goals", m.max_goals, "selected goals cap per agent");
}

void save_run_manifest(lam::RunManifest& m, const std::string& out,
                       std::chrono::steady_clock::time_point start) {
  m.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  lam::save_manifest(m, out + ".manifest.json");
}

void add_output(lam::RunManifest& m, const std::string& path) {
  m.outputs.push_back({path, lam::hash_file(path)});
}

void check_pairing(const lam::Scene& scene, const lam::ChainSnapshot& state) {
  if (scene.lattice().width() != state.cmap.lattice().width() ||
      scene.lattice().height() != state.cmap.lattice().height())
    throw lam::InputError("scene and state lattices disagree");
  if (state.rel.n_agents() != static_cast<int>(scene.agents.size()))
    throw lam::InputError("state agent count does not match the scene");
}

// Closest selected goal by routing cost from the spawn cell, ties to the
// lowest index; matches the convention inference scores under.
int selected_goal(const lam::GoalTables& tables, const lam::RelationMatrix& rel, int agent,
                  Cell spawn) {
  int best = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int j : rel.goals_of(agent)) {
    double c = tables.togo(j).cost_at(spawn);
    if (best < 0 || c < best_cost) {
      best = j;
      best_cost = c;
    }
  }
  return best;
}

lam::EvalReport evaluate(const lam::Scene& scene, const lam::ChainSnapshot& state,
                         const lam::PredictionDoc& doc, const lam::FieldParams& fp,
                         double lambda, double epsilon) {
  lam::EvalReport r;
  lam::GoalTables tables(state.cmap, state.sources, fp, epsilon);
  const bool random_walk = doc.mode == "rw";
  double sum_mhd = 0.0, sum_nll = 0.0;

  for (const auto& p : doc.agents) {
    if (p.agent_id < 0 || p.agent_id >= static_cast<int>(scene.agents.size()))
      throw lam::InputError("prediction references unknown agent " + std::to_string(p.agent_id));
    const lam::Trajectory& gt = scene.agents[static_cast<size_t>(p.agent_id)].traj;
    const int t0 = gt.t0;
    const int len = static_cast<int>(gt.cells.size());

    if (len > t0 && static_cast<int>(p.path.size()) > t0) {
      std::span<const Cell> truth(gt.cells.data() + t0, static_cast<size_t>(len - t0));
      std::span<const Cell> pred(p.path.data() + t0, p.path.size() - static_cast<size_t>(t0));
      double d = lam::mhd(truth, pred);
      r.agent_mhd.push_back(d);
      sum_mhd += d;
    }

    if (len - 1 > t0) {
      double nll = std::numeric_limits<double>::quiet_NaN();
      if (random_walk) {
        double s = 0.0;
        for (int t = t0; t < len - 1; ++t) s += lam::rw_step_nll(scene.constraints, gt.cells[t]);
        nll = s / (len - 1 - t0);
      } else {
        int j = selected_goal(tables, state.rel, p.agent_id, gt.start());
        if (j >= 0) nll = lam::model_nll(gt.cells, t0, len - 1, tables.field(j), lambda);
      }
      if (!std::isnan(nll)) {
        r.agent_nll.push_back(nll);
        sum_nll += nll;
      }
    }
  }
  if (!r.agent_mhd.empty()) r.mean_mhd = sum_mhd / static_cast<double>(r.agent_mhd.size());
  if (!r.agent_nll.empty()) r.mean_nll = sum_nll / static_cast<double>(r.agent_nll.size());

  if (scene.truth && !scene.truth->sources.empty()) {
    lam::MatchResult m = lam::source_localization(state.sources, scene.truth->sources,
                                                  scene.lattice());
    r.s_accuracy = m.accuracy;
    r.source_iou = m.gt_iou;
    r.gt_to_pred = m.gt_to_pred;
    r.r_accuracy = lam::relation_accuracy(scene.truth->goal_orders, state.rel, m.gt_to_pred);
    r.joint_sr = lam::joint_sr_accuracy(scene.truth->goal_orders, state.rel, m.gt_to_pred);
  }

  if (doc.mode == "offline" && scene.truth &&
      scene.truth->behaviors.size() == scene.agents.size()) {
    std::vector<lam::Behavior> gt;
    std::vector<std::array<double, 3>> scores;
    for (const auto& p : doc.agents) {
      if (p.hypotheses.empty()) continue;
      std::array<double, 3> s;
      s.fill(-std::numeric_limits<double>::infinity());
      for (const auto& h : p.hypotheses) {
        double& slot = s[static_cast<size_t>(h.z)];
        slot = std::max(slot, h.score);
      }
      gt.push_back(scene.truth->behaviors[static_cast<size_t>(p.agent_id)]);
      scores.push_back(s);
    }
    if (!gt.empty()) {
      r.behaviors = lam::behavior_scores(gt, scores);
      r.has_behaviors = true;
    }
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent activity maps: synthesis, inference, prediction, evaluation"};
  app.require_subcommand(1);

  // shared storage; each subcommand binds the members it uses
  std::string scene_path, state_path, pred_path, out_path, config_path, summary_path, mode;
  std::uint64_t seed = 0;
  lam::SynthConfig sc;
  lam::ModelParams mp;
  lam::ChainConfig cc;
  lam::PredictParams pp;
  lam::FieldParams fp;
  lam::GreedyParams gp;
  double eval_lambda = lam::ModelParams{}.lambda;
  double epsilon = 1e-3;
  bool no_polish = false;
  int k = 2, restarts = 10, window = lam::kMapWindow;
  int cell_size = 8, source_index = -1;
  std::vector<int> sweep_sources{2, 3, 5, 8};
  std::vector<int> sweep_agents{10, 20, 50, 100};
  std::vector<double> sweep_fractions{0.5};
  int sweep_seeds = 3;
  std::int64_t sweep_iterations = 100000, sweep_burn_in = 3000;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_path, "output path")->required();
    cmd->add_option("--seed", seed, "seed for every random draw this command makes");
    cmd->add_option("--config", config_path, "JSON config file, overridden by flags");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene");
  add_common(synth);
  synth->add_option("--width", sc.width, "lattice width");
  synth->add_option("--height", sc.height, "lattice height");
  synth->add_option("--sources", sc.n_sources, "source count");
  synth->add_option("--agents", sc.n_agents, "agent count");
  synth->add_option("--obstacle-ratio", sc.obstacle_ratio, "target obstacle fraction");
  synth->add_option("--ratio-tolerance", sc.ratio_tolerance, "acceptable ratio error");
  synth->add_option("--jitter", sc.jitter, "off-plan step probability");
  synth->add_option("--speed", sc.speed, "move probability per frame");
  synth->add_option("--dwell", sc.dwell, "frames parked at each reached goal");
  synth->add_option("--p-single", sc.p_single, "single-goal behavior weight");
  synth->add_option("--p-sequential", sc.p_sequential, "sequential behavior weight");
  synth->add_option("--p-change", sc.p_change, "change behavior weight");
  synth->add_option("--separation", sc.min_source_separation, "min pairwise source distance");
  synth->add_option("--source-margin", sc.source_margin, "min source distance from border");
  synth->add_option("--observed-fraction", sc.observed_fraction, "observed prefix fraction");
  synth->add_flag("--features", sc.features, "attach an appearance channel");
  synth->add_option("--epsilon", sc.epsilon, "planner step regularizer");
  add_field_flags(synth, sc.field);

  CLI::App* infer = app.add_subcommand("infer", "run posterior sampling on a scene");
  add_common(infer);
  infer->add_option("--scene", scene_path, "input scene")->required();
  infer->add_option("--iterations", cc.iterations, "sampler iterations");
  infer->add_option("--burn-in", cc.burn_in, "iterations before MAP tracking");
  infer->add_option("--proposal-weights", cc.proposal_weights,
                    "flip : birth-death : relation weights")->expected(3);
  infer->add_option("--gmm-refit-period", cc.gmm_refit_period, "iterations between GMM refits");
  infer->add_option("--trace-period", cc.trace_period, "iterations between trace rows");
  infer->add_option("--audit-period", cc.audit_period, "iterations between posterior audits");
  infer->add_option("--stop-speed", cc.stop_speed, "speed below which a frame is stopped");
  infer->add_option("--stop-frames", cc.stop_frames, "stopped frames forming a stop event");
  infer->add_option("--source-sigma", cc.source_sigma, "sigma of initialized sources");
  infer->add_option("--epsilon", cc.epsilon, "planner step regularizer");
  infer->add_flag("--no-polish", no_polish, "skip the deterministic MAP polish");
  infer->add_option("--polish-radius", cc.polish_radius, "polish move radius");
  add_model_flags(infer, mp);
  add_field_flags(infer, cc.field);

  CLI::App* predict = app.add_subcommand("predict", "complete trajectories from a state");
  add_common(predict);
  predict->add_option("--scene", scene_path, "input scene")->required();
  predict->add_option("--state", state_path, "inferred state")->required();
  predict->add_option("--mode", mode, "offline | online | sp | rw | pm | gm")
      ->required()
      ->check(CLI::IsMember({"offline", "online", "sp", "rw", "pm", "gm"}));
  predict->add_option("--dwell", pp.dwell, "stay frames at intermediate milestones");
  predict->add_option("--switch-stride", pp.switch_stride, "candidate switch cell stride");
  predict->add_flag("--exhaustive-switch", pp.exhaustive_switch,
                    "try every first-leg cell as the switch point");
  predict->add_option("--online-samples", pp.online_samples, "posterior samples per frame");
  predict->add_option("--relation-sweeps", pp.relation_sweeps,
                      "relation proposals per simulated frame");
  predict->add_option("--tau", gp.tau, "greedy goal-posterior sharpness");
  predict->add_option("--epsilon", pp.epsilon, "planner step regularizer");
  add_model_flags(predict, pp.model);
  add_field_flags(predict, pp.field);

  CLI::App* eval = app.add_subcommand("eval", "score predictions against a scene");
  add_common(eval);
  eval->add_option("--scene", scene_path, "scene with ground truth")->required();
  eval->add_option("--state", state_path, "inferred state")->required();
  eval->add_option("--pred", pred_path, "predictions to score")->required();
  eval->add_option("--summary", summary_path, "also write a one-row CSV summary");
  eval->add_option("--lambda", eval_lambda, "energy-to-log-likelihood scale");
  eval->add_option("--epsilon", epsilon, "planner step regularizer");
  add_field_flags(eval, fp);

  CLI::App* cluster_cmd = app.add_subcommand("cluster", "group sources by function");
  add_common(cluster_cmd);
  cluster_cmd->add_option("--scene", scene_path, "input scene")->required();
  cluster_cmd->add_option("--state", state_path, "inferred state; omitted -> scene truth");
  cluster_cmd->add_option("--k", k, "cluster count")->required();
  cluster_cmd->add_option("--restarts", restarts, "k-means restarts");
  cluster_cmd->add_option("--window", window, "feature map half-window (cells)");

  CLI::App* render = app.add_subcommand("render", "rasterize a scene, field, or mask");
  add_common(render);
  render->add_option("--scene", scene_path, "input scene")->required();
  render->add_option("--state", state_path, "use this state's map and sources");
  render->add_option("--mode", mode, "scene | field | mask")
      ->required()
      ->check(CLI::IsMember({"scene", "field", "mask"}));
  render->add_option("--cell-size", cell_size, "pixels per cell");
  render->add_option("--source", source_index, "field mode: single source index");
  add_field_flags(render, fp);

  CLI::App* sweep = app.add_subcommand("sweep", "accuracy grid over scene sizes");
  add_common(sweep);
  sweep->add_option("--sources", sweep_sources, "source counts to sweep");
  sweep->add_option("--agents", sweep_agents, "agent counts to sweep");
  sweep->add_option("--fractions", sweep_fractions, "observed prefix fractions");
  sweep->add_option("--seeds", sweep_seeds, "scenes per grid cell");
  sweep->add_option("--iterations", sweep_iterations, "sampler iterations per scene");
  sweep->add_option("--burn-in", sweep_burn_in, "iterations before MAP tracking");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const auto start = std::chrono::steady_clock::now();
  lam::RunManifest man;
  man.seed = seed;

  try {
    json cfg = config_path.empty() ? json::object() : load_config_file(config_path);

    if (app.got_subcommand(synth)) {
      const json sec = section(cfg, "synth");
      fill(sec, *synth, "--width", "width", sc.width);
      fill(sec, *synth, "--height", "height", sc.height);
      fill(sec, *synth, "--sources", "n_sources", sc.n_sources);
      fill(sec, *synth, "--agents", "n_agents", sc.n_agents);
      fill(sec, *synth, "--obstacle-ratio", "obstacle_ratio", sc.obstacle_ratio);
      fill(sec, *synth, "--ratio-tolerance", "ratio_tolerance", sc.ratio_tolerance);
      fill(sec, *synth, "--jitter", "jitter", sc.jitter);
      fill(sec, *synth, "--speed", "speed", sc.speed);
      fill(sec, *synth, "--dwell", "dwell", sc.dwell);
      fill(sec, *synth, "--p-single", "p_single", sc.p_single);
      fill(sec, *synth, "--p-sequential", "p_sequential", sc.p_sequential);
      fill(sec, *synth, "--p-change", "p_change", sc.p_change);
      fill(sec, *synth, "--separation", "min_source_separation", sc.min_source_separation);
      fill(sec, *synth, "--source-margin", "source_margin", sc.source_margin);
      fill(sec, *synth, "--observed-fraction", "observed_fraction", sc.observed_fraction);
      fill(sec, *synth, "--features", "features", sc.features);
      fill(sec, *synth, "--epsilon", "epsilon", sc.epsilon);
      fill_field(section(cfg, "field"), *synth, sc.field);
      sc.seed = seed;

      lam::Scene scene = lam::synth_scene(sc);
      lam::save_scene(scene, out_path);

      man.command = "synth";
      man.config_json = json{{"synth",
                              json{{"width", sc.width},
                                   {"height", sc.height},
                                   {"n_sources", sc.n_sources},
                                   {"n_agents", sc.n_agents},
                                   {"obstacle_ratio", sc.obstacle_ratio},
                                   {"ratio_tolerance", sc.ratio_tolerance},
                                   {"jitter", sc.jitter},
                                   {"speed", sc.speed},
                                   {"dwell", sc.dwell},
                                   {"p_single", sc.p_single},
                                   {"p_sequential", sc.p_sequential},
                                   {"p_change", sc.p_change},
                                   {"min_source_separation", sc.min_source_separation},
                                   {"source_margin", sc.source_margin},
                                   {"observed_fraction", sc.observed_fraction},
                                   {"features", sc.features},
                                   {"epsilon", sc.epsilon}}},
                             {"field", field_json(sc.field)}}
                           .dump();
      add_output(man, out_path);
    } else if (app.got_subcommand(infer)) {
      const json sec = section(cfg, "chain");
      fill(sec, *infer, "--iterations", "iterations", cc.iterations);
      fill(sec, *infer, "--burn-in", "burn_in", cc.burn_in);
      fill(sec, *infer, "--proposal-weights", "proposal_weights", cc.proposal_weights);
      fill(sec, *infer, "--gmm-refit-period", "gmm_refit_period", cc.gmm_refit_period);
      fill(sec, *infer, "--trace-period", "trace_period", cc.trace_period);
      fill(sec, *infer, "--audit-period", "audit_period", cc.audit_period);
      fill(sec, *infer, "--stop-speed", "stop_speed", cc.stop_speed);
      fill(sec, *infer, "--stop-frames", "stop_frames", cc.stop_frames);
      fill(sec, *infer, "--source-sigma", "source_sigma", cc.source_sigma);
      fill(sec, *infer, "--epsilon", "epsilon", cc.epsilon);
      fill(sec, *infer, "--polish-radius", "polish_radius", cc.polish_radius);
      if (infer->count("--no-polish") == 0 && sec.contains("polish_map"))
        cc.polish_map = sec.at("polish_map").get<bool>();
      if (no_polish) cc.polish_map = false;
      fill_model(section(cfg, "model"), *infer, mp);
      fill_field(section(cfg, "field"), *infer, cc.field);
      cc.seed = seed;

      lam::Scene scene = lam::load_scene(scene_path);
      lam::Chain chain(scene, mp, cc);
      lam::McmcResult res = chain.run();
      lam::save_state(res.map_state, out_path, &res);

      man.command = "infer";
      man.inputs = {scene_path};
      man.config_json =
          json{{"chain",
                json{{"iterations", cc.iterations},
                     {"burn_in", cc.burn_in},
                     {"proposal_weights", cc.proposal_weights},
                     {"gmm_refit_period", cc.gmm_refit_period},
                     {"trace_period", cc.trace_period},
                     {"audit_period", cc.audit_period},
                     {"stop_speed", cc.stop_speed},
                     {"stop_frames", cc.stop_frames},
                     {"source_sigma", cc.source_sigma},
                     {"epsilon", cc.epsilon},
                     {"polish_map", cc.polish_map},
                     {"polish_radius", cc.polish_radius}}},
               {"model", model_json(mp)},
               {"field", field_json(cc.field)}}
              .dump();
      add_output(man, out_path);
    } else if (app.got_subcommand(predict)) {
      const json sec = section(cfg, "predict");
      fill(sec, *predict, "--dwell", "dwell", pp.dwell);
      fill(sec, *predict, "--switch-stride", "switch_stride", pp.switch_stride);
      fill(sec, *predict, "--exhaustive-switch", "exhaustive_switch", pp.exhaustive_switch);
      fill(sec, *predict, "--online-samples", "online_samples", pp.online_samples);
      fill(sec, *predict, "--relation-sweeps", "relation_sweeps", pp.relation_sweeps);
      fill(sec, *predict, "--tau", "tau", gp.tau);
      fill(sec, *predict, "--epsilon", "epsilon", pp.epsilon);
      fill_model(section(cfg, "model"), *predict, pp.model);
      fill_field(section(cfg, "field"), *predict, pp.field);

      lam::Scene scene = lam::load_scene(scene_path);
      lam::ChainSnapshot state = lam::load_state(state_path);
      check_pairing(scene, state);

      lam::PredictionDoc doc;
      doc.mode = mode;
      const int n = static_cast<int>(scene.agents.size());
      if (mode == "offline") {
        for (auto& p : lam::predict_offline_all(scene, state, pp)) {
          lam::AgentPrediction ap;
          ap.agent_id = p.agent_id;
          ap.path = std::move(p.path);
          ap.best = std::move(p.best);
          ap.hypotheses = std::move(p.hypotheses);
          doc.agents.push_back(std::move(ap));
        }
      } else if (mode == "online") {
        for (auto& p : lam::predict_online_all(scene, state, pp, seed)) {
          lam::AgentPrediction ap;
          ap.agent_id = p.agent_id;
          ap.path = std::move(p.path);
          ap.goal_posterior = std::move(p.goal_posterior);
          ap.stop_reason = lam::to_string(p.stop);
          doc.agents.push_back(std::move(ap));
        }
      } else if (mode == "sp") {
        for (int i = 0; i < n; ++i) {
          lam::AgentPrediction ap;
          ap.agent_id = i;
          ap.path = lam::shortest_path_baseline(scene, state, i).cells;
          doc.agents.push_back(std::move(ap));
        }
      } else if (mode == "rw") {
        std::mt19937_64 rng(seed);
        for (int i = 0; i < n; ++i) {
          lam::AgentPrediction ap;
          ap.agent_id = i;
          ap.path = lam::random_walk_baseline(scene, state, i, rng).cells;
          doc.agents.push_back(std::move(ap));
        }
      } else if (mode == "pm") {
        for (int i = 0; i < n; ++i) {
          lam::AgentPrediction ap;
          ap.agent_id = i;
          ap.path = lam::physical_move_baseline(scene, state, i, pp.field).cells;
          doc.agents.push_back(std::move(ap));
        }
      } else {  // gm
        lam::GoalTables tables(state.cmap, state.sources, pp.field, pp.epsilon);
        for (int i = 0; i < n; ++i) {
          lam::GreedyPrediction g = lam::greedy_move_baseline(scene, tables, i, gp);
          lam::AgentPrediction ap;
          ap.agent_id = i;
          ap.path = std::move(g.traj.cells);
          ap.goal_per_frame = std::move(g.goal_per_frame);
          doc.agents.push_back(std::move(ap));
        }
      }
      lam::save_predictions(doc, out_path);

      man.command = "predict";
      man.inputs = {scene_path, state_path};
      man.config_json = json{{"mode", mode},
                             {"predict",
                              json{{"dwell", pp.dwell},
                                   {"switch_stride", pp.switch_stride},
                                   {"exhaustive_switch", pp.exhaustive_switch},
                                   {"online_samples", pp.online_samples},
                                   {"relation_sweeps", pp.relation_sweeps},
                                   {"tau", gp.tau},
                                   {"epsilon", pp.epsilon}}},
                             {"model", model_json(pp.model)},
                             {"field", field_json(pp.field)}}
                           .dump();
      add_output(man, out_path);
    } else if (app.got_subcommand(eval)) {
      const json sec = section(cfg, "eval");
      fill(sec, *eval, "--lambda", "lambda", eval_lambda);
      fill(sec, *eval, "--epsilon", "epsilon", epsilon);
      fill_field(section(cfg, "field"), *eval, fp);

      lam::Scene scene = lam::load_scene(scene_path);
      lam::ChainSnapshot state = lam::load_state(state_path);
      check_pairing(scene, state);
      lam::PredictionDoc doc = lam::load_predictions(pred_path);

      lam::EvalReport report = evaluate(scene, state, doc, fp, eval_lambda, epsilon);
      lam::write_text_file(out_path, lam::serialize_eval_report(report));

      man.command = "eval";
      man.inputs = {scene_path, state_path, pred_path};
      man.config_json = json{{"eval", json{{"lambda", eval_lambda}, {"epsilon", epsilon}}},
                             {"field", field_json(fp)}}
                            .dump();
      add_output(man, out_path);
      if (!summary_path.empty()) {
        lam::write_text_file(summary_path,
                             lam::eval_summary_header() + lam::eval_summary_row(report));
        add_output(man, summary_path);
      }
    } else if (app.got_subcommand(cluster_cmd)) {
      const json sec = section(cfg, "cluster");
      fill(sec, *cluster_cmd, "--k", "k", k);
      fill(sec, *cluster_cmd, "--restarts", "restarts", restarts);
      fill(sec, *cluster_cmd, "--window", "window", window);

      lam::Scene scene = lam::load_scene(scene_path);
      lam::Scene work = scene;
      lam::RelationMatrix rel(0, 0);
      if (!state_path.empty()) {
        lam::ChainSnapshot state = lam::load_state(state_path);
        check_pairing(scene, state);
        work.sources = state.sources;
        rel = state.rel;
      } else {
        if (!scene.truth || scene.truth->goal_orders.size() != scene.agents.size())
          throw lam::InputError("cluster needs --state or a scene with ground truth");
        rel = lam::RelationMatrix(static_cast<int>(scene.agents.size()),
                                  static_cast<int>(scene.sources.size()));
        for (int i = 0; i < rel.n_agents(); ++i)
          for (int j : scene.truth->goal_orders[static_cast<size_t>(i)]) rel.set(i, j, true);
      }

      std::vector<lam::FunctionalDescriptor> descs;
      for (int j = 0; j < static_cast<int>(work.sources.size()); ++j)
        descs.push_back(lam::descriptor(lam::build_feature_maps(work, rel, j, window)));
      lam::ClusterResult result = lam::cluster(descs, k, seed, restarts);
      lam::write_text_file(out_path, lam::serialize_clusters(result));

      man.command = "cluster";
      man.inputs = {scene_path};
      if (!state_path.empty()) man.inputs.push_back(state_path);
      man.config_json =
          json{{"cluster", json{{"k", k}, {"restarts", restarts}, {"window", window}}}}.dump();
      add_output(man, out_path);
    } else if (app.got_subcommand(render)) {
      const json sec = section(cfg, "render");
      fill(sec, *render, "--cell-size", "cell_size", cell_size);
      fill(sec, *render, "--source", "source", source_index);
      fill_field(section(cfg, "field"), *render, fp);

      lam::Scene scene = lam::load_scene(scene_path);
      std::optional<lam::ChainSnapshot> state;
      if (!state_path.empty()) {
        state = lam::load_state(state_path);
        check_pairing(scene, *state);
      }
      const lam::ConstraintMap& cmap = state ? state->cmap : scene.constraints;
      const std::vector<lam::Source>& sources = state ? state->sources : scene.sources;

      if (mode == "scene") {
        lam::save_image(lam::render_scene(scene, cell_size), out_path);
      } else if (mode == "field") {
        if (sources.empty()) throw lam::InputError("no sources to render a field from");
        lam::VectorField f;
        if (source_index >= 0) {
          if (source_index >= static_cast<int>(sources.size()))
            throw lam::InputError("source index out of range");
          f = lam::sum_fields(
              lam::attraction_field(cmap.lattice(), sources[static_cast<size_t>(source_index)].mu,
                                    fp.sigma_a_sq),
              lam::repulsion_field(cmap, fp.sigma_r_sq));
        } else {
          f = lam::superposed_field(cmap, sources, fp);
        }
        lam::save_image(lam::render_field_magnitude(f, cell_size), out_path);
      } else {  // mask
        const lam::Lattice& lat = cmap.lattice();
        std::vector<double> v(static_cast<size_t>(lat.size()), 0.0);
        for (int i = 0; i < lat.size(); ++i)
          v[static_cast<size_t>(i)] = cmap.walkable(lat.cell(i)) ? 1.0 : 0.0;
        lam::write_text_file(out_path, lam::encode_pgm(v, lat.width(), lat.height(), 0.0, 1.0));
      }

      man.command = "render";
      man.inputs = {scene_path};
      if (!state_path.empty()) man.inputs.push_back(state_path);
      man.config_json = json{{"render",
                              json{{"mode", mode},
                                   {"cell_size", cell_size},
                                   {"source", source_index}}},
                             {"field", field_json(fp)}}
                            .dump();
      add_output(man, out_path);
    } else if (app.got_subcommand(sweep)) {
      const json sec = section(cfg, "sweep");
      fill(sec, *sweep, "--sources", "sources", sweep_sources);
      fill(sec, *sweep, "--agents", "agents", sweep_agents);
      fill(sec, *sweep, "--fractions", "fractions", sweep_fractions);
      fill(sec, *sweep, "--seeds", "seeds", sweep_seeds);
      fill(sec, *sweep, "--iterations", "iterations", sweep_iterations);
      fill(sec, *sweep, "--burn-in", "burn_in", sweep_burn_in);

      std::string csv =
          "sources,agents,seed,fraction,s_accuracy,r_accuracy,joint_sr,n_sources_pred\n";
      for (int s_count : sweep_sources) {
        for (int a_count : sweep_agents) {
          for (int si = 0; si < sweep_seeds; ++si) {
            for (double frac : sweep_fractions) {
              const auto scene_start = std::chrono::steady_clock::now();
              lam::SynthConfig scfg;
              scfg.width = 44;
              scfg.height = 44;
              scfg.n_sources = s_count;
              scfg.n_agents = a_count;
              scfg.obstacle_ratio = 0.15;
              scfg.jitter = 0.1;
              scfg.dwell = 60;
              scfg.min_source_separation = 12;
              scfg.source_margin = 4;
              scfg.p_single = 1.0;
              scfg.p_sequential = 0.0;
              scfg.p_change = 0.0;
              scfg.observed_fraction = frac;
              scfg.seed = seed + static_cast<std::uint64_t>(si);
              lam::Scene scene = lam::synth_scene(scfg);

              lam::ModelParams smp;
              smp.eta = s_count;
              lam::ChainConfig scc;
              scc.iterations = sweep_iterations;
              scc.burn_in = sweep_burn_in;
              scc.seed = scfg.seed + 1000;
              lam::Chain chain(scene, smp, scc);
              lam::McmcResult res = chain.run();
              const lam::ChainSnapshot& snap = res.map_state;

              const lam::GroundTruth& truth = *scene.truth;
              lam::MatchResult match = lam::source_localization(
                  snap.sources, truth.sources, scene.lattice());
              double r_acc =
                  lam::relation_accuracy(truth.goal_orders, snap.rel, match.gt_to_pred);
              double joint =
                  lam::joint_sr_accuracy(truth.goal_orders, snap.rel, match.gt_to_pred);

              csv += std::to_string(s_count) + "," + std::to_string(a_count) + "," +
                     std::to_string(scfg.seed) + "," + fmt(frac) + "," + fmt(match.accuracy) +
                     "," + fmt(r_acc) + "," + fmt(joint) + "," +
                     std::to_string(snap.sources.size()) + "\n";

              std::cerr << "sweep S=" << s_count << " A=" << a_count << " seed=" << scfg.seed
                        << " frac=" << frac << " s_acc=" << fmt(match.accuracy) << " ("
                        << fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                             scene_start)
                                   .count())
                        << "s)\n";
            }
          }
        }
      }
      lam::write_text_file(out_path, csv);

      man.command = "sweep";
      man.config_json = json{{"sweep",
                              json{{"sources", sweep_sources},
                                   {"agents", sweep_agents},
                                   {"fractions", sweep_fractions},
                                   {"seeds", sweep_seeds},
                                   {"iterations", sweep_iterations},
                                   {"burn_in", sweep_burn_in}}}}
                            .dump();
      add_output(man, out_path);
    }

    save_run_manifest(man, out_path, start);
    return 0;
  } catch (const lam::GenerationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const lam::PredictionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const lam::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const lam::MetricError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

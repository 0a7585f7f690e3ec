// Command-line driver for the hybrid-observer / MTL-inference pipeline.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "hytl/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hytl;

namespace {

struct CommonOpts {
  std::string config;
  std::string out = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  double grid_step = 0.0;
  int max_states = 0;
};

ScenarioConfig load_config(const CommonOpts& o) {
  std::ifstream is(o.config);
  if (!is) throw std::runtime_error("cannot open config " + o.config);
  json j;
  is >> j;
  ScenarioConfig cfg = scenario_from_json(j);
  if (o.seed_set) {
    cfg.seed = o.seed;
    cfg.search.seed = o.seed;
  }
  if (o.grid_step > 0) cfg.grid_step = o.grid_step;
  if (o.max_states > 0) cfg.max_states = o.max_states;
  return cfg;
}

std::vector<Trajectory> load_trajectories(const std::string& out) {
  json j = fs_detail::read_json(fs::path(out) / "trajectories.json");
  std::vector<Trajectory> trajs;
  for (const auto& tj : j) trajs.push_back(trajectory_from_json(tj));
  return trajs;
}

void add_common(CLI::App* cmd, CommonOpts& o, bool config_required = true) {
  cmd->add_option("--config", o.config, "scenario configuration (JSON)")
      ->required(config_required);
  cmd->add_option("--out", o.out, "artifact directory");
  cmd->add_option("--seed", o.seed, "override the scenario seed")
      ->each([&o](const std::string&) { o.seed_set = true; });
  cmd->add_option("--grid-step", o.grid_step, "override the sampling grid step [s]");
  cmd->add_option("--max-states", o.max_states, "observer state cap");
}

int guarded(const std::function<int()>& f, int failure_code) {
  try {
    return f();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure_code;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid-system timed observer and MTL inference toolkit"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string stream_file, formula_text, csv_file, view = "classic";
  double tau = 0.0;
  int segment = 0;

  auto* c_sim = app.add_subcommand("simulate", "simulate the scenario trajectories");
  add_common(c_sim, o);
  auto* c_bisim = app.add_subcommand("bisim", "compute bisimulation metrics and robust data");
  add_common(c_bisim, o);
  auto* c_abs = app.add_subcommand("abstract", "build the timed abstraction");
  add_common(c_abs, o);
  auto* c_obs = app.add_subcommand("observe", "compile the basic observer (optionally run a stream)");
  add_common(c_obs, o);
  c_obs->add_option("--stream", stream_file, "timed symbol stream (JSON lines {time, symbol})");
  auto* c_inf = app.add_subcommand("infer", "infer a classifying MTL formula");
  add_common(c_inf, o);
  auto* c_ref = app.add_subcommand("refine", "refine the observer with the inferred formula");
  add_common(c_ref, o);
  auto* c_pipe = app.add_subcommand("pipeline", "run every stage");
  add_common(c_pipe, o);
  auto* c_eval = app.add_subcommand("eval", "evaluate an MTL formula on a CSV trajectory");
  c_eval->add_option("--formula", formula_text, "MTL formula text")->required();
  c_eval->add_option("--csv", csv_file, "trajectory CSV (segment,clock_time,x1..xn)")->required();
  c_eval->add_option("--tau", tau, "evaluation clock time");
  c_eval->add_option("--segment", segment, "segment index within the CSV");
  c_eval->add_option("--view", view, "classic | strong | weak");
  c_eval->add_option("--grid-step", o.grid_step, "resampling grid step [s]");

  CLI11_PARSE(app, argc, argv);

  if (c_sim->parsed()) {
    return guarded(
        [&] {
          ScenarioConfig cfg = load_config(o);
          fs::create_directories(o.out);
          auto trajs = simulate_all(cfg);
          json all = json::array();
          for (size_t k = 0; k < trajs.size(); ++k) {
            all.push_back(trajectory_to_json(trajs[k]));
            std::ostringstream csv;
            write_trajectory_csv(trajs[k], csv);
            fs_detail::write_file(fs::path(o.out) / ("traj_" + cfg.trajectories[k].name + ".csv"),
                                  csv.str());
            json events = json::array();
            for (const auto& ev : project_outputs(cfg.automaton, trajs[k]))
              events.push_back({{"time", ev.time}, {"symbol", ev.symbol}});
            fs_detail::write_json(
                fs::path(o.out) / ("events_" + cfg.trajectories[k].name + ".json"), events);
          }
          fs_detail::write_json(fs::path(o.out) / "trajectories.json", all);
          return exit_code::ok;
        },
        exit_code::simulation);
  }

  if (c_bisim->parsed()) {
    return guarded(
        [&] {
          ScenarioConfig cfg = load_config(o);
          auto trajs = load_trajectories(o.out);
          RobustData rd = compute_robust_data(cfg, trajs);
          auto cover = check_initial_cover(cfg, trajs, rd);
          json rj = robust_data_to_json(rd);
          rj["initial_cover"] = cover.covered;
          fs_detail::write_json(fs::path(o.out) / "robust.json", rj);
          if (!cover.covered) {
            std::cerr << "error: initial set not covered\n";
            return exit_code::bisim;
          }
          return exit_code::ok;
        },
        exit_code::bisim);
  }

  if (c_abs->parsed()) {
    return guarded(
        [&] {
          ScenarioConfig cfg = load_config(o);
          auto trajs = load_trajectories(o.out);
          RobustData rd = robust_data_from_json(fs_detail::read_json(fs::path(o.out) / "robust.json"));
          TimedAutomaton ta =
              build_abstraction(cfg.automaton, trajs, rd, cfg.quantum, cfg.schedule_windows);
          fs_detail::write_json(fs::path(o.out) / "abstraction.json", timed_automaton_to_json(ta));
          fs_detail::write_file(fs::path(o.out) / "abstraction.dot", timed_automaton_to_dot(ta));
          return exit_code::ok;
        },
        exit_code::abstraction);
  }

  if (c_obs->parsed()) {
    return guarded(
        [&] {
          ScenarioConfig cfg = load_config(o);
          TimedAutomaton ta =
              timed_automaton_from_json(fs_detail::read_json(fs::path(o.out) / "abstraction.json"));
          ObserverAutomaton O = build_observer(ta, cfg.max_states);
          fs_detail::write_json(fs::path(o.out) / "observer.json", observer_to_json(O));
          fs_detail::write_file(fs::path(o.out) / "observer.dot", observer_to_dot(O));
          if (!stream_file.empty()) {
            std::ifstream is(stream_file);
            if (!is) throw std::runtime_error("cannot open stream " + stream_file);
            std::vector<StreamEntry> stream;
            std::string line;
            double horizon = 0;
            while (std::getline(is, line)) {
              if (line.empty()) continue;
              json e = json::parse(line);
              stream.push_back({e.at("time").get<double>(), e.value("symbol", ""), false, false});
              horizon = std::max(horizon, stream.back().time);
            }
            RunResult run = run_observer(O, stream, horizon + 100.0);
            std::ofstream os(fs::path(o.out) / "observer_trace.jsonl");
            for (const auto& t : run.trace) {
              json entry{{"external_time", t.time}, {"state_id", t.state}, {"label", t.label}};
              json tubes = json::array();
              for (const auto& tube : tubes_of(O.states[t.state], 0.0))
                tubes.push_back({{"state", tube.q.name()}, {"lo", tube.lo}, {"hi", tube.hi}});
              entry["tubes"] = tubes;
              os << entry.dump() << "\n";
            }
            if (!run.consistent) {
              std::cerr << "inconsistent observation: " << run.diagnosis << "\n";
              return exit_code::observer;
            }
          }
          return exit_code::ok;
        },
        exit_code::observer);
  }

  if (c_inf->parsed()) {
    return guarded(
        [&] {
          ScenarioConfig cfg = load_config(o);
          auto trajs = load_trajectories(o.out);
          RobustData rd = robust_data_from_json(fs_detail::read_json(fs::path(o.out) / "robust.json"));
          ObserverAutomaton O =
              observer_from_json(fs_detail::read_json(fs::path(o.out) / "observer.json"));
          InferenceOutcome inf = infer_classifier(cfg, trajs, rd, O);
          json ij{{"found", inf.found}, {"note", inf.note}};
          if (inf.found) {
            ij["checkpoint_state"] = inf.checkpoint;
            ij["formula"] = inf.report.formula_text;
            ij["cost"] = inf.report.cost;
            ij["margins"] = inf.report.margins;
            ij["wall_ms"] = inf.report.wall_ms;
            ij["window"] = inf.window.str();
          }
          fs_detail::write_json(fs::path(o.out) / "inference.json", ij);
          std::cout << ij.dump(2) << "\n";
          return inf.found ? exit_code::ok : exit_code::inference;
        },
        exit_code::inference);
  }

  if (c_ref->parsed()) {
    return guarded(
        [&] {
          ScenarioConfig cfg = load_config(o);
          auto trajs = load_trajectories(o.out);
          RobustData rd = robust_data_from_json(fs_detail::read_json(fs::path(o.out) / "robust.json"));
          ObserverAutomaton O =
              observer_from_json(fs_detail::read_json(fs::path(o.out) / "observer.json"));
          json ij = fs_detail::read_json(fs::path(o.out) / "inference.json");
          if (!ij.at("found").get<bool>())
            throw RefinementError("inference stage did not produce a formula");
          InferenceOutcome inf;
          inf.found = true;
          inf.checkpoint = ij.at("checkpoint_state").get<int>();
          inf.report.formula_text = ij.at("formula").get<std::string>();
          inf.report.formula = mtl::parse(inf.report.formula_text);
          inf.window = Rational::parse(ij.at("window"));
          inf.tubes = tubes_of_state(cfg, O.states[inf.checkpoint]);
          ObserverAutomaton refined = refine_from_inference(cfg, trajs, rd, O, inf);
          fs_detail::write_json(fs::path(o.out) / "refined_observer.json",
                                observer_to_json(refined));
          fs_detail::write_file(fs::path(o.out) / "refined_observer.dot",
                                observer_to_dot(refined));
          SeparationReport sep = separation_analysis(cfg, trajs, refined, inf);
          json sj{{"separated", sep.separated}, {"runs", json::array()}};
          for (const auto& r : sep.runs)
            sj["runs"].push_back({{"class", r.name},
                                  {"verdict", r.verdict},
                                  {"time_after_door", r.time_after_door},
                                  {"branch_pure", r.branch_pure}});
          fs_detail::write_json(fs::path(o.out) / "separation.json", sj);
          std::cout << sj.dump(2) << "\n";
          return sep.separated ? exit_code::ok : exit_code::refinement;
        },
        exit_code::refinement);
  }

  if (c_pipe->parsed()) {
    return guarded(
        [&] {
          ScenarioConfig cfg = load_config(o);
          PipelineResult res = run_pipeline(cfg, o.out);
          if (res.exit_code != exit_code::ok) {
            std::cerr << "pipeline failed: " << res.error << "\n";
          } else if (res.inference.found) {
            std::cout << "formula: " << res.inference.report.formula_text << "\n";
            for (const auto& r : res.separation.runs)
              std::cout << r.name << ": verdict " << (r.verdict ? "sat" : "unsat")
                        << ", identified " << r.time_after_door << " s after the door symbol\n";
          }
          return res.exit_code;
        },
        exit_code::config);
  }

  if (c_eval->parsed()) {
    return guarded(
        [&] {
          std::ifstream is(csv_file);
          if (!is) throw std::runtime_error("cannot open " + csv_file);
          std::string line;
          std::getline(is, line);  // header
          mtl::SampledSignal sig;
          sig.dt = o.grid_step > 0 ? o.grid_step : 0.05;
          double expected_t = 0.0;
          while (std::getline(is, line)) {
            std::stringstream ss(line);
            std::string cell;
            std::vector<double> row;
            while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
            if (static_cast<int>(row[0]) != segment) continue;
            if (row[1] + 1e-9 < expected_t) continue;  // keep the uniform grid only
            sig.samples.emplace_back(row.begin() + 2, row.end());
            expected_t += sig.dt;
          }
          auto phi = mtl::parse(formula_text);
          double r;
          if (view == "classic")
            r = mtl::robustness(sig, phi, tau);
          else
            r = mtl::ext_robustness(sig, phi, tau,
                                    view == "strong" ? mtl::View::Strong : mtl::View::Weak);
          std::cout << r << "\n";
          return exit_code::ok;
        },
        exit_code::io);
  }

  return exit_code::config;
}

#pragma once

#include <chrono>

#include "hytl/scenario.hpp"

namespace hytl {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int simulation = 3;
inline constexpr int bisim = 4;
inline constexpr int abstraction = 5;
inline constexpr int observer = 6;
inline constexpr int inference = 7;
inline constexpr int refinement = 8;
inline constexpr int io = 9;
}  // namespace exit_code

inline std::vector<Trajectory> simulate_all(const ScenarioConfig& cfg) {
  std::vector<Trajectory> trajs;
  for (const auto& spec : cfg.trajectories) {
    log_info("simulating " + spec.name);
    trajs.push_back(simulate(cfg.automaton, spec.location, spec.x0, spec.schedule, spec.horizon,
                             cfg.grid_step));
  }
  return trajs;
}

// ---------------------------------------------------------------------------
// Inference over observer states

/// Labeled tubes of an observer state: one tube per atom, labeled by the
/// class of its trajectory.
inline std::vector<LabeledTube> tubes_of_state(const ScenarioConfig& cfg, const AtomSet& atoms) {
  std::vector<LabeledTube> tubes;
  for (const auto& a : atoms) {
    if (a.q.eos) throw std::invalid_argument("EoS atoms carry no tube");
    tubes.push_back(LabeledTube{a.q.k, a.q.n, a.lo.to_double(), a.hi.to_double(),
                                cfg.trajectories.at(a.q.k).label});
  }
  return tubes;
}

/// Evaluation context for a tube set: nominal extended flows sampled past the
/// tube windows plus the robust bounds.
inline TubeContext make_tube_context(const ScenarioConfig& cfg,
                                     const std::vector<Trajectory>& trajs, const RobustData& rd,
                                     const std::vector<LabeledTube>& tubes, double window_pad) {
  TubeContext ctx;
  for (const auto& t : tubes) {
    if (ctx.contains({t.k, t.m})) continue;
    const Segment& seg = trajs.at(t.k).segments.at(t.m);
    const Location& loc = cfg.automaton.location(seg.location);
    const auto& srd = rd.at(t.k, t.m);
    double horizon = std::max(seg.dwell * cfg.tau_bar_factor, t.hi + window_pad);
    TubeEvalData data;
    data.nominal = sample_flow(loc, seg.x0, horizon, cfg.grid_step);
    data.gamma = srd.gamma;
    data.gamma_hat = srd.gamma_hat;
    data.gamma_tilde = srd.gamma_tilde;
    ctx[{t.k, t.m}] = std::move(data);
  }
  return ctx;
}

inline std::map<std::pair<int, int>, TubeSampler> make_samplers(
    const ScenarioConfig& cfg, const std::vector<Trajectory>& trajs, const RobustData& rd,
    const std::vector<LabeledTube>& tubes) {
  std::map<std::pair<int, int>, TubeSampler> samplers;
  for (const auto& t : tubes) {
    if (samplers.contains({t.k, t.m})) continue;
    const Segment& seg = trajs.at(t.k).segments.at(t.m);
    const Location& loc = cfg.automaton.location(seg.location);
    samplers[{t.k, t.m}] = TubeSampler{rd.M.at(seg.location), seg.x0, loc.A, loc.b};
  }
  return samplers;
}

struct InferenceOutcome {
  bool found = false;
  int checkpoint = -1;
  SearchReport report;
  std::vector<LabeledTube> tubes;
  Rational window{0};
  std::string note;
};

/// States reachable only after at least one observable symbol.
inline std::vector<bool> after_symbol_states(const ObserverAutomaton& O) {
  std::vector<bool> mark(O.states.size(), false);
  std::deque<int> work;
  for (const auto& edges : O.edges)
    for (const auto& e : edges)
      if (std::holds_alternative<SymbolLabel>(e.label) && !mark[e.target]) {
        mark[e.target] = true;
        work.push_back(e.target);
      }
  while (!work.empty()) {
    int s = work.front();
    work.pop_front();
    for (const auto& e : O.edges[s])
      if (!mark[e.target]) {
        mark[e.target] = true;
        work.push_back(e.target);
      }
  }
  return mark;
}

/// Search for a checkpoint state and a zero-cost classifying formula. With an
/// explicit checkpoint in the config only that state is tried; otherwise the
/// post-symbol states are scanned in construction order and near-degenerate
/// results (min margin below the floor) are rejected.
inline InferenceOutcome infer_classifier(const ScenarioConfig& cfg,
                                         const std::vector<Trajectory>& trajs,
                                         const RobustData& rd, const ObserverAutomaton& O) {
  InferenceOutcome out;
  std::vector<int> candidates;
  if (cfg.checkpoint >= 0) {
    candidates.push_back(cfg.checkpoint);
  } else {
    auto mark = after_symbol_states(O);
    for (size_t i = 0; i < O.states.size(); ++i)
      if (mark[i]) candidates.push_back(static_cast<int>(i));
  }

  for (int s : candidates) {
    const AtomSet& atoms = O.states[s];
    if (atoms.empty()) continue;
    bool has_eos = false;
    std::set<int> labels;
    for (const auto& a : atoms) {
      if (a.q.eos) has_eos = true;
      else labels.insert(cfg.trajectories.at(a.q.k).label);
    }
    if (has_eos || labels.size() < 2) continue;

    auto tubes = tubes_of_state(cfg, atoms);
    SearchConfig sc = cfg.search;
    auto blank = O.blank_of[s];
    if (blank) {
      double b = blank->to_double();
      double floored =
          std::floor(b / cfg.quantum.to_double() + 1e-9) * cfg.quantum.to_double();
      sc.window_max = std::min(sc.window_max, floored);
    }
    if (sc.window_max <= cfg.grid_step) continue;

    TubeContext ctx = make_tube_context(cfg, trajs, rd, tubes, sc.window_max + 1.0);
    log_info("inference at state " + std::to_string(s) + " over " +
             std::to_string(tubes.size()) + " tubes (window <= " +
             std::to_string(sc.window_max) + ")");
    SearchReport rep = pso_search(tubes, ctx, sc);
    if (rep.zero_cost && rep.min_margin >= cfg.margin_floor) {
      out.found = true;
      out.checkpoint = s;
      out.report = rep;
      out.tubes = tubes;
      out.window = quantize(mtl::horizon(rep.formula), cfg.quantum, +1);
      if (blank && out.window > *blank) out.window = *blank;
      return out;
    }
    out.note += "state " + std::to_string(s) + ": cost " + std::to_string(rep.cost) +
                ", min margin " + std::to_string(rep.min_margin) + "; ";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Refinement and separation analysis

struct SeparationReport {
  bool separated = true;
  bool branches_pure = false;  // static: verdict targets contain one class each
  struct PerClass {
    std::string name;
    int label = 0;
    bool reached_checkpoint = false;
    bool verdict = false;
    double verdict_time = 0.0;   // absolute
    double time_after_door = 0.0;
    bool branch_pure = false;
    int final_state = -1;
  };
  std::vector<PerClass> runs;
};

/// Refine the observer at the inferred checkpoint: atoms are routed by the
/// sign of their certified margins.
inline ObserverAutomaton refine_from_inference(const ScenarioConfig& cfg,
                                               const std::vector<Trajectory>& trajs,
                                               const RobustData& rd, const ObserverAutomaton& O,
                                               const InferenceOutcome& inf) {
  TubeContext ctx = make_tube_context(cfg, trajs, rd, inf.tubes,
                                      cfg.search.window_max + inf.window.to_double() + 1.0);
  auto classify = [&](const TimedAtom& a) {
    LabeledTube pos{a.q.k, a.q.n, a.lo.to_double(), a.hi.to_double(), +1};
    LabeledTube neg = pos;
    neg.label = -1;
    AtomVerdict v;
    v.in_positive = margin(pos, inf.report.formula, ctx) >= kMarginStrict;
    v.in_negative = margin(neg, inf.report.formula, ctx) >= kMarginStrict;
    return v;
  };
  return refine_observer(O, inf.checkpoint, inf.report.formula_text, inf.window, classify,
                         cfg.max_states);
}

/// Replay each class's nominal run through the refined observer, synthesizing
/// the checkpoint verdict from the measured (simulated) signal, and check that
/// the branch states contain only atoms of that class.
inline SeparationReport separation_analysis(const ScenarioConfig& cfg,
                                            const std::vector<Trajectory>& trajs,
                                            const ObserverAutomaton& refined,
                                            const InferenceOutcome& inf) {
  SeparationReport rep;
  mtl::FormulaPtr phi = inf.report.formula;
  double d = inf.window.to_double();

  // Static purity: each verdict branch may contain hypotheses of one class only.
  rep.branches_pure = true;
  bool saw_branch = false;
  for (const auto& e : refined.edges[inf.checkpoint]) {
    auto* v = std::get_if<VerdictLabel>(&e.label);
    if (!v) continue;
    saw_branch = true;
    int want = v->positive ? +1 : -1;
    for (const auto& a : refined.states[e.target])
      if (!a.q.eos && cfg.trajectories.at(a.q.k).label != want) rep.branches_pure = false;
  }
  rep.branches_pure = rep.branches_pure && saw_branch;
  rep.separated = rep.branches_pure;

  // Replay every class's nominal run; classes whose trace never visits the
  // checkpoint are untouched by the refinement.
  for (size_t k = 0; k < trajs.size(); ++k) {
    SeparationReport::PerClass pc;
    pc.name = cfg.trajectories[k].name;
    pc.label = cfg.trajectories[k].label;

    auto outputs = project_outputs(cfg.automaton, trajs[k]);
    std::vector<StreamEntry> stream;
    for (const auto& o : outputs) stream.push_back({o.time, o.symbol, false, false});

    RunResult pre = run_observer(refined, stream, trajs[k].total_time());
    double t_cp = -1;
    for (const auto& e : pre.trace)
      if (e.state == inf.checkpoint && t_cp < 0) t_cp = e.time;
    pc.reached_checkpoint = t_cp >= 0;
    if (!pc.reached_checkpoint) {
      rep.runs.push_back(pc);
      continue;
    }

    // Verdict from the measured signal over [t_cp, t_cp + d].
    mtl::SampledSignal sig;
    sig.dt = cfg.grid_step;
    for (double t = 0.0; t <= d + cfg.grid_step + 1e-9; t += cfg.grid_step) {
      auto [loc, tau, x] = trajs[k].at(std::min(t_cp + t, trajs[k].total_time()));
      (void)loc;
      (void)tau;
      sig.samples.emplace_back(x.data(), x.data() + x.size());
    }
    pc.verdict = mtl::robustness(sig, phi, 0.0) > 0.0;
    pc.verdict_time = t_cp + d;
    double door_time = outputs.empty() ? 0.0 : outputs.front().time;
    pc.time_after_door = pc.verdict_time - door_time;

    std::vector<StreamEntry> full = stream;
    full.push_back({t_cp + d, "", true, pc.verdict});
    std::sort(full.begin(), full.end(),
              [](const StreamEntry& a, const StreamEntry& b) { return a.time < b.time; });
    RunResult run = run_observer(refined, full, pc.verdict_time + 1e-6);
    pc.final_state = run.trace.back().state;
    pc.branch_pure = run.consistent;
    if (run.consistent) {
      for (const auto& a : refined.states[pc.final_state])
        if (!a.q.eos && cfg.trajectories.at(a.q.k).label != pc.label) pc.branch_pure = false;
    }
    rep.separated = rep.separated && pc.branch_pure;
    rep.runs.push_back(pc);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Stage orchestration with file artifacts

namespace fs_detail {

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << content;
}

inline void write_json(const std::filesystem::path& p, const json& j) {
  write_file(p, j.dump(2) + "\n");
}

inline json read_json(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  json j;
  is >> j;
  return j;
}

}  // namespace fs_detail

struct PipelineResult {
  int exit_code = exit_code::ok;
  std::string error;
  InferenceOutcome inference;
  SeparationReport separation;
  ClassificationReport classification;
};

/// Run simulate -> bisim -> abstract -> observe -> infer -> refine, writing
/// every stage artifact under out_dir.
inline PipelineResult run_pipeline(const ScenarioConfig& cfg, const std::string& out_dir,
                                   bool with_inference = true) {
  namespace fs = std::filesystem;
  PipelineResult result;
  fs::create_directories(out_dir);
  json manifest{{"scenario", cfg.name}, {"seed", cfg.seed}, {"stages", json::array()}};
  auto stage_done = [&](const std::string& name, std::initializer_list<std::string> files) {
    json s{{"stage", name}, {"outputs", json::array()}};
    for (const auto& f : files) s["outputs"].push_back(f);
    s["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    manifest["stages"].push_back(s);
    fs_detail::write_json(fs::path(out_dir) / "manifest.json", manifest);
  };

  std::vector<Trajectory> trajs;
  try {
    trajs = simulate_all(cfg);
    json all = json::array();
    for (size_t k = 0; k < trajs.size(); ++k) {
      all.push_back(trajectory_to_json(trajs[k]));
      std::ostringstream csv;
      write_trajectory_csv(trajs[k], csv);
      fs_detail::write_file(fs::path(out_dir) / ("traj_" + cfg.trajectories[k].name + ".csv"),
                            csv.str());
      json events = json::array();
      for (const auto& o : project_outputs(cfg.automaton, trajs[k]))
        events.push_back({{"time", o.time}, {"symbol", o.symbol}});
      fs_detail::write_json(fs::path(out_dir) / ("events_" + cfg.trajectories[k].name + ".json"),
                            events);
    }
    fs_detail::write_json(fs::path(out_dir) / "trajectories.json", all);
    stage_done("simulate", {"trajectories.json"});
  } catch (const std::exception& e) {
    result.exit_code = exit_code::simulation;
    result.error = std::string("simulate: ") + e.what();
    return result;
  }

  RobustData rd;
  try {
    rd = compute_robust_data(cfg, trajs);
    auto cover = check_initial_cover(cfg, trajs, rd);
    if (!cover.covered) throw InfeasibleError("initial set is not covered by the initial balls");
    json rj = robust_data_to_json(rd);
    rj["initial_cover"] = cover.covered;
    fs_detail::write_json(fs::path(out_dir) / "robust.json", rj);
    stage_done("bisim", {"robust.json"});
  } catch (const std::exception& e) {
    result.exit_code = exit_code::bisim;
    result.error = std::string("bisim: ") + e.what();
    return result;
  }

  TimedAutomaton ta;
  try {
    ta = build_abstraction(cfg.automaton, trajs, rd, cfg.quantum, cfg.schedule_windows);
    fs_detail::write_json(fs::path(out_dir) / "abstraction.json", timed_automaton_to_json(ta));
    fs_detail::write_file(fs::path(out_dir) / "abstraction.dot", timed_automaton_to_dot(ta));
    stage_done("abstract", {"abstraction.json", "abstraction.dot"});
  } catch (const std::exception& e) {
    result.exit_code = exit_code::abstraction;
    result.error = std::string("abstract: ") + e.what();
    return result;
  }

  ObserverAutomaton O;
  try {
    O = build_observer(ta, cfg.max_states);
    fs_detail::write_json(fs::path(out_dir) / "observer.json", observer_to_json(O));
    fs_detail::write_file(fs::path(out_dir) / "observer.dot", observer_to_dot(O));
    stage_done("observe", {"observer.json", "observer.dot"});
    log_info("observer has " + std::to_string(O.states.size()) + " states");
  } catch (const std::exception& e) {
    result.exit_code = exit_code::observer;
    result.error = std::string("observe: ") + e.what();
    return result;
  }

  if (!with_inference) return result;

  try {
    result.inference = infer_classifier(cfg, trajs, rd, O);
    json ij;
    ij["found"] = result.inference.found;
    ij["note"] = result.inference.note;
    if (result.inference.found) {
      ij["checkpoint_state"] = result.inference.checkpoint;
      ij["formula"] = result.inference.report.formula_text;
      ij["cost"] = result.inference.report.cost;
      ij["min_margin"] = result.inference.report.min_margin;
      ij["margins"] = result.inference.report.margins;
      ij["templates_tried"] = result.inference.report.templates_tried;
      ij["wall_ms"] = result.inference.report.wall_ms;
      ij["window"] = result.inference.window.str();
      json tubes = json::array();
      for (const auto& t : result.inference.tubes)
        tubes.push_back(
            {{"k", t.k}, {"m", t.m}, {"lo", t.lo}, {"hi", t.hi}, {"label", t.label}});
      ij["tubes"] = tubes;
    }
    fs_detail::write_json(fs::path(out_dir) / "inference.json", ij);
    stage_done("infer", {"inference.json"});
    if (!result.inference.found) {
      result.exit_code = exit_code::inference;
      result.error = "infer: no zero-cost formula found (" + result.inference.note + ")";
      return result;
    }

    // Prop.-5 style sampling check on the inferred formula.
    TubeContext ctx = make_tube_context(cfg, trajs, rd, result.inference.tubes,
                                        cfg.search.window_max + 1.0);
    auto samplers = make_samplers(cfg, trajs, rd, result.inference.tubes);
    result.classification = verify_classification(result.inference.tubes,
                                                  result.inference.report.formula, ctx, samplers,
                                                  500, mix_seed(cfg.seed, 555));
    json vj{{"samples", result.classification.samples},
            {"violations", result.classification.violations}};
    fs_detail::write_json(fs::path(out_dir) / "classification_check.json", vj);
  } catch (const std::exception& e) {
    result.exit_code = exit_code::inference;
    result.error = std::string("infer: ") + e.what();
    return result;
  }

  try {
    ObserverAutomaton refined = refine_from_inference(cfg, trajs, rd, O, result.inference);
    fs_detail::write_json(fs::path(out_dir) / "refined_observer.json", observer_to_json(refined));
    fs_detail::write_file(fs::path(out_dir) / "refined_observer.dot", observer_to_dot(refined));
    result.separation = separation_analysis(cfg, trajs, refined, result.inference);
    json sj{{"separated", result.separation.separated}, {"runs", json::array()}};
    sj["branches_pure"] = result.separation.branches_pure;
    for (const auto& r : result.separation.runs)
      sj["runs"].push_back({{"class", r.name},
                            {"label", r.label},
                            {"reached_checkpoint", r.reached_checkpoint},
                            {"verdict", r.verdict},
                            {"verdict_time", r.verdict_time},
                            {"time_after_door", r.time_after_door},
                            {"branch_pure", r.branch_pure},
                            {"final_state", r.final_state}});
    fs_detail::write_json(fs::path(out_dir) / "separation.json", sj);
    stage_done("refine", {"refined_observer.json", "refined_observer.dot", "separation.json"});
    if (!result.separation.separated) {
      result.exit_code = exit_code::refinement;
      result.error = "refine: classes are not separated by the refined observer";
    }
  } catch (const std::exception& e) {
    result.exit_code = exit_code::refinement;
    result.error = std::string("refine: ") + e.what();
    return result;
  }
  return result;
}

}  // namespace hytl

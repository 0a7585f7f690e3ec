#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "hytl/pipeline.hpp"

using namespace hytl;
namespace fs = std::filesystem;

namespace {

ScenarioConfig load(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(is);
  json j;
  is >> j;
  return scenario_from_json(j);
}

}  // namespace

TEST_CASE("smart-building model structure") {
  HybridAutomaton ha = build_smart_building();
  CHECK(ha.locations.size() == 6);
  CHECK(ha.events.size() == 5);

  // unoccupied dynamics: the generation pseudo-states are decoupled
  const Location& l0 = ha.location("l0");
  CHECK(l0.A.col(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(l0.A.col(3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(l0.A.row(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(l0.A.row(3).cwiseAbs().maxCoeff() == 0.0);

  // occupied dynamics couple heat and moisture generation
  const Location& l11 = ha.location("l1_1");
  CHECK(l11.A(1, 2) > 0.0);
  CHECK(l11.A(1, 3) < 0.0);
  CHECK(l11.A(0, 3) > 0.0);

  // the empty-room equilibrium temperature stays below the first threshold,
  // so the empty room never self-triggers the AC step event
  Eigen::Matrix2d Ayy = l0.A.topLeftCorner(2, 2);
  Eigen::Vector2d eq = -Ayy.inverse() * l0.b.head(2);
  CHECK(eq(1) == Catch::Approx(290.4976).margin(1e-6));
  CHECK(eq(1) < 290.6);

  // door events: nondeterministic, observable, shared symbol
  const Event& door1 = ha.event("e1_1");
  const Event& door2 = ha.event("e1_2");
  CHECK_FALSE(door1.deterministic);
  CHECK(door1.symbol == "door");
  CHECK(door2.symbol == "door");
  CHECK(door2.reset.d(2) == Catch::Approx(2 * door1.reset.d(2)));
  // threshold events: deterministic, unobservable
  CHECK(ha.event("e2_1").deterministic);
  CHECK(ha.event("e2_1").symbol.empty());
}

TEST_CASE("scenario configs load and validate") {
  ScenarioConfig sb = load("data/smart_building.json");
  CHECK(sb.trajectories.size() == 2);
  CHECK(sb.quantum == Rational(1, 10));
  CHECK(sb.gamma_cap(0, 0, "l0") == 0.074);
  CHECK(sb.gamma_cap(1, 1, "l1_2") == 0.1);
  CHECK(sb.gamma_cap(0, 1, "l1_1") == 0.098);
  CHECK(sb.m_spec("l1_1").kind == MSpec::Optimize);
  CHECK(sb.checkpoint == 3);

  ScenarioConfig toy = load("data/toy.json");
  CHECK(toy.trajectories.size() == 2);
  CHECK_FALSE(toy.trajectories[1].normal);

  // faulty trajectories must come after the normal ones
  json bad = json::parse(R"({
    "name": "bad", "automaton_builtin": "toy",
    "trajectories": [
      {"name": "f", "location": "lC", "x0": [0.2], "horizon": 1.0, "normal": false},
      {"name": "n", "x0": [1.0], "horizon": 1.0, "normal": true}
    ]})");
  CHECK_THROWS_AS(scenario_from_json(bad), std::invalid_argument);
}

TEST_CASE("toy pipeline runs end to end") {
  ScenarioConfig cfg = load("data/toy.json");
  fs::path out = fs::temp_directory_path() / "hytl_toy_test";
  fs::remove_all(out);
  PipelineResult res = run_pipeline(cfg, out.string());
  REQUIRE(res.error == "");
  REQUIRE(res.exit_code == exit_code::ok);
  CHECK(res.inference.found);
  CHECK(res.inference.report.cost == 0.0);
  CHECK(res.classification.violations == 0);
  CHECK(res.separation.branches_pure);

  // the faulty hypotheses are pruned from the positive branch at the checkpoint
  ObserverAutomaton refined =
      observer_from_json(fs_detail::read_json(out / "refined_observer.json"));
  bool found_pos = false;
  for (const auto& e : refined.edges[res.inference.checkpoint]) {
    auto* v = std::get_if<VerdictLabel>(&e.label);
    if (!v || !v->positive) continue;
    found_pos = true;
    for (const auto& a : refined.states[e.target]) CHECK(a.q.k == 0);
  }
  CHECK(found_pos);

  for (const char* f :
       {"trajectories.json", "robust.json", "abstraction.json", "observer.json",
        "inference.json", "refined_observer.json", "separation.json", "manifest.json"})
    CHECK(fs::exists(out / f));
}

TEST_CASE("stage artifacts reload consistently") {
  ScenarioConfig cfg = load("data/toy.json");
  fs::path out = fs::temp_directory_path() / "hytl_toy_stage";
  fs::remove_all(out);
  REQUIRE(run_pipeline(cfg, out.string(), false).exit_code == exit_code::ok);

  RobustData rd = robust_data_from_json(fs_detail::read_json(out / "robust.json"));
  json trajs = fs_detail::read_json(out / "trajectories.json");
  std::vector<Trajectory> ts;
  for (const auto& tj : trajs) ts.push_back(trajectory_from_json(tj));
  TimedAutomaton ta =
      build_abstraction(cfg.automaton, ts, rd, cfg.quantum, cfg.schedule_windows);
  CHECK(timed_automaton_to_json(ta) == fs_detail::read_json(out / "abstraction.json"));
  ObserverAutomaton O = build_observer(timed_automaton_from_json(
      fs_detail::read_json(out / "abstraction.json")));
  CHECK(observer_to_json(O) == fs_detail::read_json(out / "observer.json"));
}

TEST_CASE("pipeline outputs are deterministic under a fixed seed") {
  ScenarioConfig cfg = load("data/toy.json");
  fs::path out1 = fs::temp_directory_path() / "hytl_det_1";
  fs::path out2 = fs::temp_directory_path() / "hytl_det_2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  REQUIRE(run_pipeline(cfg, out1.string()).exit_code == exit_code::ok);
  REQUIRE(run_pipeline(cfg, out2.string()).exit_code == exit_code::ok);
  for (const char* f : {"robust.json", "abstraction.json", "observer.json", "inference.json",
                        "refined_observer.json", "separation.json"}) {
    json a = fs_detail::read_json(out1 / f);
    json b = fs_detail::read_json(out2 / f);
    a.erase("wall_ms");  // measured time is the one sanctioned nondeterminism
    b.erase("wall_ms");
    CHECK(a == b);
  }
}

TEST_CASE("observer replay of simulated smart-building outputs") {
  ScenarioConfig cfg = load("data/smart_building.json");
  auto trajs = simulate_all(cfg);
  RobustData rd = compute_robust_data(cfg, trajs);
  TimedAutomaton ta =
      build_abstraction(cfg.automaton, trajs, rd, cfg.quantum, cfg.schedule_windows);
  ObserverAutomaton O = build_observer(ta);

  // After the shared door symbol both occupancy hypotheses are alive, and the
  // basic observer never separates them along the blank chain.
  for (size_t k = 0; k < trajs.size(); ++k) {
    auto word = project_outputs(cfg.automaton, trajs[k]);
    std::vector<StreamEntry> stream;
    for (const auto& o : word) stream.push_back({o.time, o.symbol, false, false});
    RunResult run = run_observer(O, stream, 100.0);
    REQUIRE(run.consistent);
    for (const auto& e : run.trace) {
      if (e.time < 10.0) continue;
      std::set<int> ks;
      for (const auto& a : O.states[e.state])
        if (!a.q.eos) ks.insert(a.q.k);
      CHECK(ks.size() == 2);
    }
  }
}

// Acceptance suite: runs every acceptance criterion end to end and prints one
// pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "hytl/pipeline.hpp"
#include "mtl_oracle.hpp"

using namespace hytl;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
 public:
  Criterion(int number, std::string what) : number_(number), what_(std::move(what)) {
    start_ = std::chrono::steady_clock::now();
  }

  void expect(bool ok, const std::string& detail) {
    if (!ok) {
      ok_ = false;
      details_ += (details_.empty() ? "" : "; ") + detail;
    }
  }

  ~Criterion() {
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::cout << (ok_ ? "[PASS]" : "[FAIL]") << " criterion " << number_ << ": " << what_
              << std::fixed << std::setprecision(2) << " (" << secs << " s)";
    if (!ok_) {
      std::cout << " -- " << details_;
      ++g_failures;
    }
    std::cout << "\n";
  }

 private:
  int number_;
  std::string what_;
  bool ok_ = true;
  std::string details_;
  std::chrono::steady_clock::time_point start_;
};

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  json j;
  is >> j;
  return scenario_from_json(j);
}

// True hybrid state (location, clock, x) must lie in a tube of the observer
// state; EoS atoms stand for "past the modeled horizon" in an end location.
bool truth_covered(const ScenarioConfig& cfg, const std::vector<Trajectory>& model,
                   const RobustData& rd, const AtomSet& atoms, const std::string& loc,
                   double tau, const Vector& x) {
  for (const auto& a : atoms) {
    if (a.q.eos) {
      for (size_t k = 0; k < model.size(); ++k) {
        const Segment& last = model[k].segments.back();
        if (last.location == loc && tau >= last.dwell - 0.1) return true;
      }
      continue;
    }
    const Segment& seg = model[a.q.k].segments[a.q.n];
    if (seg.location != loc) continue;
    if (tau < a.lo.to_double() - 1e-6 || tau > a.hi.to_double() + 1e-6) continue;
    const Location& location = cfg.automaton.location(loc);
    Vector nominal = affine_flow(location.A, location.b, seg.x0, tau);
    if (bisim_dist(rd.M.at(loc), x, nominal) <= rd.at(a.q.k, a.q.n).gamma + 1e-6) return true;
  }
  return false;
}

struct SoundnessStats {
  int runs = 0;
  int updates = 0;
  int violations = 0;
};

// Replay one randomized execution through the observer, checking the truth at
// every update instant.
void check_run(const ScenarioConfig& cfg, const std::vector<Trajectory>& model,
               const RobustData& rd, const ObserverAutomaton& O, const std::string& init_loc,
               const Vector& x0, const std::vector<ScheduledEvent>& sched, double horizon,
               SoundnessStats& stats) {
  Trajectory truth = simulate(cfg.automaton, init_loc, x0, sched, horizon, cfg.grid_step);
  auto word = project_outputs(cfg.automaton, truth);
  std::vector<StreamEntry> stream;
  for (const auto& o : word) stream.push_back({o.time, o.symbol, false, false});
  RunResult run = run_observer(O, stream, horizon);
  if (!run.consistent)
    throw std::runtime_error("observer rejected a model-consistent run: " + run.diagnosis);
  ++stats.runs;
  for (const auto& e : run.trace) {
    if (e.time > horizon - 1e-9) continue;
    // evaluate just after the update instant: symbol updates coincide with the
    // jump, and the new state's tubes describe the post-jump hybrid state
    auto [loc, tau, x] = truth.at(std::min(e.time + 1e-9, horizon));
    ++stats.updates;
    if (!truth_covered(cfg, model, rd, O.states[e.state], loc, tau, x)) ++stats.violations;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

static void criterion_1() {
  Criterion c(1, "observer golden values on the worked example (exact rationals)");
  std::ifstream is("data/fig2_abstraction.json");
  json j;
  is >> j;
  TimedAutomaton ta = timed_automaton_from_json(j);
  ObserverAutomaton O = build_observer(ta);

  auto atom = [](int k, int n, std::int64_t lo, std::int64_t hi) {
    return TimedAtom{TAState{k, n, false}, Rational(lo), Rational(hi)};
  };
  c.expect(O.states[O.initial] == AtomSet{atom(0, 0, 0, 0)}, "s0");
  c.expect(O.blank_of[O.initial] == Rational(17), "Blank_min(s0) = 17");

  const ObserverAutomaton::Edge* b0 = nullptr;
  for (const auto& e : O.edges[O.initial])
    if (label_str(e.label) == "eps[17]") b0 = &e;
  c.expect(b0 != nullptr, "eps[17] transition");
  int s1 = b0->target;
  c.expect(O.states[s1] == canonicalize(AtomSet{atom(0, 0, 17, 17), atom(0, 1, -12, 0),
                                                atom(1, 0, -19, 0), atom(2, 0, -19, 0)}),
           "s1 atoms");
  c.expect(O.blank_of[s1] == Rational(12), "Blank_min(s1) = 12");

  std::set<std::string> labels;
  for (const auto& e : O.edges[s1]) labels.insert(label_str(e.label));
  c.expect(labels == std::set<std::string>{"eps[12]", "alpha[5,12]"}, "labels of s1");

  for (const auto& e : O.edges[s1])
    if (label_str(e.label) == "alpha[5,12]")
      c.expect(O.states[e.target] == AtomSet{atom(0, 2, 0, 0)}, "f(s1, alpha[5,12])");
}

static void criterion_2() {
  Criterion c(2, "Prop. 2 soundness over 200 randomized hybrid executions");
  try {
    // toy scenario: spatial spread plus randomly scheduled faults
    ScenarioConfig toy = load_scenario("data/toy.json");
    auto toy_trajs = simulate_all(toy);
    RobustData toy_rd = compute_robust_data(toy, toy_trajs);
    ObserverAutomaton toy_obs = build_observer(
        build_abstraction(toy.automaton, toy_trajs, toy_rd, toy.quantum, toy.schedule_windows));

    SoundnessStats stats;
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int i = 0; i < 120; ++i) {
      Vector x0 = Vector::Constant(1, 0.9 + 0.2 * uni(rng));
      std::vector<ScheduledEvent> sched;
      if (uni(rng) < 0.5) sched.push_back({1.41 + 0.69 * uni(rng), "EF"});
      check_run(toy, toy_trajs, toy_rd, toy_obs, "lA", x0, sched, 6.0, stats);
    }

    // smart building: random generation rates, door time and occupancy
    ScenarioConfig sb = load_scenario("data/smart_building.json");
    auto sb_trajs = simulate_all(sb);
    RobustData sb_rd = compute_robust_data(sb, sb_trajs);
    ObserverAutomaton sb_obs = build_observer(
        build_abstraction(sb.automaton, sb_trajs, sb_rd, sb.quantum, sb.schedule_windows));
    for (int i = 0; i < 80; ++i) {
      Vector x0 = 0.5 * (sb.automaton.initial_box.lo + sb.automaton.initial_box.hi);
      x0(2) = sb.automaton.initial_box.lo(2) +
              (sb.automaton.initial_box.hi(2) - sb.automaton.initial_box.lo(2)) * uni(rng);
      x0(3) = sb.automaton.initial_box.lo(3) +
              (sb.automaton.initial_box.hi(3) - sb.automaton.initial_box.lo(3)) * uni(rng);
      std::vector<ScheduledEvent> sched{
          {9.0 + 2.0 * uni(rng), uni(rng) < 0.5 ? "e1_1" : "e1_2"}};
      check_run(sb, sb_trajs, sb_rd, sb_obs, "l0", x0, sched, 100.0, stats);
    }

    c.expect(stats.runs == 200, "200 runs executed");
    c.expect(stats.violations == 0,
             std::to_string(stats.violations) + " violations in " +
                 std::to_string(stats.updates) + " updates");
  } catch (const std::exception& e) {
    c.expect(false, e.what());
  }
}

static void criteria_3_and_4() {
  int checked = 0, single_checked = 0, violations = 0, single_violations = 0, tilde_leq = 0;
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  {
    Criterion c3(3, "Prop. 3 perturbation bound over 1000 randomized cases");
    for (int trial = 0; trial < 1000; ++trial) {
      int n = 2 + trial % 2;
      Matrix A = Matrix::NullaryExpr(n, n, [&](int, int) { return uni(rng); });
      A -= (A.cwiseAbs().rowwise().sum().maxCoeff() + 0.5) * Matrix::Identity(n, n);
      Vector b = Vector::NullaryExpr(n, [&](int) { return uni(rng); });
      Matrix M = solve_lyapunov(A, Matrix::Identity(n, n));
      double gamma = 0.1 + 0.4 * std::abs(uni(rng));
      Vector x0 = Vector::NullaryExpr(n, [&](int) { return uni(rng); });
      Vector xt = ellipsoid_interior_sample(M, x0, gamma, rng);

      Location loc;
      loc.name = "rand";
      loc.A = A;
      loc.b = b;
      auto nominal = sample_flow(loc, x0, 6.0, 0.05);
      auto pert = sample_flow(loc, xt, 6.0, 0.05);

      bool single = trial % 2 == 1;
      int coord = trial % n;
      double ghat = gamma_hat(gamma, M);
      double gtilde = gamma / z_for_coord(M, coord);
      auto phi = oracle::random_formula(rng, n, 2, 1.0, -1.5, 1.5, single, coord);
      double tau = std::floor(uni(rng) * 40.0) * 0.05 - 1.0;
      for (auto view : {mtl::View::Strong, mtl::View::Weak}) {
        double rn = mtl::ext_robustness(nominal, phi, tau, view);
        double rp = mtl::ext_robustness(pert, phi, tau, view);
        ++checked;
        bool ok = (std::isinf(rn) || std::isinf(rp)) ? rn == rp
                                                     : std::abs(rp - rn) <= ghat + 1e-6;
        if (!ok) ++violations;
        if (single) {
          ++single_checked;
          if (gtilde <= ghat + 1e-12) ++tilde_leq;
          bool okt = (std::isinf(rn) || std::isinf(rp)) ? rn == rp
                                                        : std::abs(rp - rn) <= gtilde + 1e-6;
          if (!okt) ++single_violations;
        }
      }
    }
    c3.expect(checked == 2000, "both views of 1000 cases");
    c3.expect(violations == 0, std::to_string(violations) + " bound violations");
  }
  Criterion c4(4, "Prop. 4 tighter single-coordinate bound");
  c4.expect(single_checked >= 900, "enough single-coordinate cases");
  c4.expect(single_violations == 0, std::to_string(single_violations) + " gamma-tilde violations");
  c4.expect(tilde_leq == single_checked, "gamma_tilde <= gamma_hat in 100% of cases");
}

static PipelineResult g_sb_result;
static PipelineResult g_toy_result;

static void criterion_8() {
  Criterion c(8, "smart-building case study: formula shape, threshold range, separation");
  try {
    ScenarioConfig cfg = load_scenario("data/smart_building.json");
    fs::path out = fs::temp_directory_path() / "hytl_acceptance_sb";
    fs::remove_all(out);
    g_sb_result = run_pipeline(cfg, out.string());
    c.expect(g_sb_result.exit_code == exit_code::ok, "pipeline exit: " + g_sb_result.error);
    if (g_sb_result.exit_code != exit_code::ok) return;

    const auto& rep = g_sb_result.inference.report;
    c.expect(rep.cost == 0.0, "zero cost");
    auto phi = rep.formula;
    c.expect(phi->op == mtl::Op::Always, "shape G_[a,b]");
    c.expect(phi->lhs && phi->lhs->op == mtl::Op::Atom, "atomic argument");
    if (phi->lhs && phi->lhs->op == mtl::Op::Atom) {
      c.expect(phi->lhs->atom.coord == 1, "temperature coordinate x2");
      c.expect(phi->lhs->atom.ge, "lower-bound predicate");
      double thr = phi->lhs->atom.threshold;
      c.expect(thr > 290.6 && thr < 290.7,
               "threshold " + std::to_string(thr) + " within (290.6, 290.7)");
    }
    c.expect(g_sb_result.separation.separated, "refined observer separates the hypotheses");
    bool reported = true;
    for (const auto& r : g_sb_result.separation.runs)
      reported = reported && r.reached_checkpoint && r.time_after_door > 0 &&
                 r.time_after_door < 120.0;
    c.expect(reported, "bounded identification time reported for both classes");
    for (const auto& r : g_sb_result.separation.runs)
      std::cout << "        " << r.name << " identified " << r.time_after_door
                << " s after the door symbol (verdict " << (r.verdict ? "sat" : "unsat")
                << ")\n";
    std::cout << "        inferred: " << rep.formula_text << "\n";

    ScenarioConfig toy = load_scenario("data/toy.json");
    fs::path tout = fs::temp_directory_path() / "hytl_acceptance_toy";
    fs::remove_all(tout);
    g_toy_result = run_pipeline(toy, tout.string());
    c.expect(g_toy_result.exit_code == exit_code::ok, "toy pipeline: " + g_toy_result.error);
  } catch (const std::exception& e) {
    c.expect(false, e.what());
  }
}

static void criterion_5() {
  Criterion c(5, "Prop. 5 margin soundness: 500 samples per tube, zero violations");
  c.expect(g_sb_result.inference.found, "smart-building formula available");
  c.expect(g_sb_result.classification.samples >= 500 * 2,
           "sample count " + std::to_string(g_sb_result.classification.samples));
  c.expect(g_sb_result.classification.violations == 0,
           std::to_string(g_sb_result.classification.violations) + " violations (smart building)");
  c.expect(g_toy_result.classification.violations == 0,
           std::to_string(g_toy_result.classification.violations) + " violations (toy)");
}

static void criterion_6() {
  Criterion c(6, "extended robustness matches the brute-force oracle on 1000 pairs");
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  int pairs = 0, mismatches = 0, order_violations = 0, duality_violations = 0;
  while (pairs < 1000) {
    mtl::SampledSignal sig;
    sig.dt = 0.05;
    double x = uni(rng), y = uni(rng);
    for (int i = 0; i < 100; ++i) {
      x += 0.05 * uni(rng);
      y += 0.05 * uni(rng);
      sig.samples.push_back({x, y});
    }
    auto phi = oracle::random_formula(rng, 2, 3, 0.8, -1.5, 1.5);
    double tau = std::floor(uni(rng) * 40.0) * sig.dt - 1.0;
    if (mtl::horizon(phi) + std::max(tau, 0.0) > sig.hor() - 0.1) continue;
    ++pairs;
    double rs = mtl::ext_robustness(sig, phi, tau, mtl::View::Strong);
    double rw = mtl::ext_robustness(sig, phi, tau, mtl::View::Weak);
    for (auto view : {mtl::View::Strong, mtl::View::Weak}) {
      double got = view == mtl::View::Strong ? rs : rw;
      double want = oracle::ext_robustness(sig, phi, tau, view);
      bool same = std::isinf(want) ? got == want : std::abs(got - want) <= 1e-9;
      if (!same) ++mismatches;
    }
    if (!(rs <= rw)) ++order_violations;
    auto np = mtl::Formula::make_not(phi);
    if (mtl::ext_robustness(sig, np, tau, mtl::View::Strong) != -rw) ++duality_violations;
    if (mtl::ext_robustness(sig, np, tau, mtl::View::Weak) != -rs) ++duality_violations;
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " oracle mismatches");
  c.expect(order_violations == 0, "strong <= weak violated");
  c.expect(duality_violations == 0, "negation duality not exact");
}

static void criterion_7() {
  Criterion c(7, "bisimulation checks: residuals, certificates, monotonicity");
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  int residual_fails = 0, verify_fails = 0, monotone_fails = 0;
  for (int trial = 0; trial < 25; ++trial) {
    int n = 2 + trial % 3;
    Matrix A = Matrix::NullaryExpr(n, n, [&](int, int) { return uni(rng); });
    A -= (A.cwiseAbs().rowwise().sum().maxCoeff() + 0.5) * Matrix::Identity(n, n);
    Matrix Q = Matrix::Identity(n, n);
    Matrix M = solve_lyapunov(A, Q);
    if ((A.transpose() * M + M * A + Q).norm() > 1e-8 * Q.norm()) ++residual_fails;
    auto rep = verify_bisim(M, A, mix_seed(99, trial), 100, 1e-7);
    if (!rep.pass()) ++verify_fails;
    monotone_fails += rep.violations;
  }
  c.expect(residual_fails == 0, "Lyapunov residuals above 1e-8");
  c.expect(verify_fails == 0, "verify_bisim failures");
  c.expect(monotone_fails == 0, "Phi monotonicity violations");
}

static void criterion_9() {
  Criterion c(9, "parser round trip on a 50-formula corpus");
  std::vector<std::string> corpus = {
      "G[1.7717,5](x2 >= 290.6006)",  // the case-study formula text
      "true",
      "x1 >= 0",
      "x3 <= -2.5",
      "!(x1 >= 3)",
      "F[0,2](x1 >= 1) & G[0,3](x1 <= 4)",
      "x1 >= 0 U[1,2] x2 <= 5",
      "F(0,2](x1 >= 1)",
      "G[0,1)(x2 <= 0.125)",
      "F(1,2)(G(0,1](x1 >= -1))",
  };
  std::mt19937_64 rng(5150);
  while (corpus.size() < 50)
    corpus.push_back(mtl::print(oracle::random_formula(rng, 4, 4, 3.0, -10.0, 10.0)));

  int failures = 0;
  for (const auto& text : corpus) {
    try {
      std::string canon = mtl::print(mtl::parse(text));
      if (mtl::print(mtl::parse(canon)) != canon) ++failures;
    } catch (const std::exception&) {
      ++failures;
    }
  }
  c.expect(failures == 0, std::to_string(failures) + " round-trip failures");
}

int main() {
  std::cout << "hytl acceptance suite\n=====================\n";
  auto t0 = std::chrono::steady_clock::now();
  criterion_1();
  criterion_2();
  criteria_3_and_4();
  criterion_8();  // runs the pipelines used by criterion 5
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_9();
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "=====================\n"
            << (g_failures == 0 ? "all criteria passed" : std::to_string(g_failures) + " FAILED")
            << " (total " << std::fixed << std::setprecision(1) << secs << " s)\n";
  return g_failures == 0 ? 0 : 1;
}

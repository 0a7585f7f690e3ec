#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "hytl/abstraction.hpp"
#include "hytl/bisim.hpp"
#include "hytl/hybrid.hpp"
#include "hytl/inference.hpp"
#include "hytl/observer.hpp"

namespace hytl {

inline int log_level() {
  static int level = [] {
    const char* v = std::getenv("HYTL_LOG");
    if (!v) return 1;
    std::string s(v);
    if (s == "debug") return 2;
    if (s == "quiet" || s == "0") return 0;
    return 1;
  }();
  return level;
}

inline void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[hytl] " << msg << "\n";
}
inline void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[hytl:debug] " << msg << "\n";
}

// ---------------------------------------------------------------------------
// Smart-building case study

/// Physical constants of the two-zone thermal/humidity model and the event
/// thresholds. Coordinates: x1 humidity ratio, x2 temperature [K],
/// x3 heat generation [W], x4 moisture generation [mg/s].
struct SmartBuildingParams {
  double thermal_capacitance = 34000.0;  // C  [J/K]
  double air_mass = 50.0;                // M  [kg]
  double mass_transfer = 0.01;           // G  [kg/s]
  double cp = 1005.0;                    // specific heat of air [J/(kg K)]
  double beta = 2.26e6;                  // latent heat of vaporization [J/kg]
  double t_supply = 290.0;               // T_s [K]
  double t_ambient = 303.0;              // T_inf [K]
  double w_supply = 0.01;                // w_s
  double w_ambient = 0.0105;             // w_inf
  double mdot_low = 0.5;                 // l0, l1_1, l1_2 [kg/s]
  double mdot_mid = 0.6;                 // l2_1, l2_2
  double mdot_high = 0.8;                // l3_2
  double t_eq_empty = 290.4976;          // equilibrium temperature of the empty room
  double threshold_1 = 290.6;            // AC step-up thresholds
  double threshold_2 = 290.7;
  double gen_heat_per_person = 300.0;    // added to x3 when the door opens
  double gen_moisture_per_person = 80.0; // added to x4

  /// Wall conductance solved so the empty-room equilibrium temperature is
  /// exactly t_eq_empty at the chosen constants.
  double wall_conductance() const {
    double w_eq = (mdot_low * w_supply + mass_transfer * w_ambient) / (mdot_low + mass_transfer);
    return (mdot_low * cp * (t_eq_empty - t_supply) -
            beta * mass_transfer * (w_eq - w_ambient)) /
           (t_ambient - t_eq_empty);
  }

  double w_eq_empty() const {
    return (mdot_low * w_supply + mass_transfer * w_ambient) / (mdot_low + mass_transfer);
  }
};

/// Six-location hybrid automaton of the occupancy case study. The door events
/// are nondeterministic and observable; the AC threshold events are
/// deterministic and unobservable.
inline HybridAutomaton build_smart_building(const SmartBuildingParams& p = {}) {
  HybridAutomaton ha;
  ha.state_dim = 4;
  const double K = p.wall_conductance();

  auto location = [&](const std::string& name, double mdot, bool occupied, double inv_lo,
                      double inv_hi) {
    Location loc;
    loc.name = name;
    Matrix A = Matrix::Zero(4, 4);
    Vector b = Vector::Zero(4);
    A(0, 0) = -(mdot + p.mass_transfer) / p.air_mass;
    b(0) = (mdot * p.w_supply + p.mass_transfer * p.w_ambient) / p.air_mass;
    A(1, 0) = p.beta * p.mass_transfer / p.thermal_capacitance;
    A(1, 1) = -(mdot * p.cp + K) / p.thermal_capacitance;
    b(1) = (mdot * p.cp * p.t_supply - p.beta * p.mass_transfer * p.w_ambient + K * p.t_ambient) /
           p.thermal_capacitance;
    if (occupied) {
      A(0, 3) = 1e-6 / p.air_mass;                       // moisture generation [mg/s]
      A(1, 2) = 1.0 / p.thermal_capacitance;             // heat generation [W]
      A(1, 3) = -1e-6 * p.beta / p.thermal_capacitance;  // evaporative cooling
    }
    loc.A = A;
    loc.b = b;
    if (inv_lo > 0) {
      loc.invariant.push_back(LinearConstraint{Vector::Unit(4, 1), Cmp::GE, inv_lo});
      loc.invariant.push_back(LinearConstraint{Vector::Unit(4, 1), Cmp::LE, inv_hi});
    }
    ha.locations[name] = std::move(loc);
  };

  location("l0", p.mdot_low, false, 0, 0);
  location("l1_1", p.mdot_low, true, 290.4, p.threshold_1);
  location("l2_1", p.mdot_mid, true, 290.5, p.threshold_2);
  location("l1_2", p.mdot_low, true, 290.4, p.threshold_1);
  location("l2_2", p.mdot_mid, true, 290.5, p.threshold_2);
  location("l3_2", p.mdot_high, true, p.threshold_1, 290.8);

  AffineMap identity{Matrix::Identity(4, 4), Vector::Zero(4)};
  auto enter = [&](double persons) {
    Vector d = Vector::Zero(4);
    d(2) = p.gen_heat_per_person * persons;
    d(3) = p.gen_moisture_per_person * persons;
    return AffineMap{Matrix::Identity(4, 4), d};
  };
  auto threshold_guard = [&](double thr) {
    return std::vector<LinearConstraint>{LinearConstraint{Vector::Unit(4, 1), Cmp::EQ, thr}};
  };

  ha.events.push_back(Event{"e1_1", "l0", "l1_1", {}, enter(1), "door", false, false});
  ha.events.push_back(Event{"e1_2", "l0", "l1_2", {}, enter(2), "door", false, false});
  ha.events.push_back(
      Event{"e2_1", "l1_1", "l2_1", threshold_guard(p.threshold_1), identity, "", true, false});
  ha.events.push_back(
      Event{"e2_2", "l1_2", "l2_2", threshold_guard(p.threshold_1), identity, "", true, false});
  ha.events.push_back(
      Event{"e3_2", "l2_2", "l3_2", threshold_guard(p.threshold_2), identity, "", true, false});

  ha.initial_location = "l0";
  // Pre-door uncertainty in the generation pseudo-states: the door reset adds
  // the nominal per-person rates on top of this box.
  Vector lo(4), hi(4);
  lo << p.w_eq_empty(), p.t_eq_empty, -1.5, -0.75;
  hi << p.w_eq_empty(), p.t_eq_empty, 1.5, 0.75;
  ha.initial_box = Box{lo, hi};
  ha.validate();
  return ha;
}

/// Small cyclic system with an unobservable fault branch, used by the bundled
/// toy scenario: lA -> lB (eps) -> lD (alpha) -> lA again, with a scheduled
/// fault from lB into the sink dynamics of lC.
inline HybridAutomaton build_toy() {
  HybridAutomaton ha;
  ha.state_dim = 1;
  auto loc1 = [&](const std::string& name, double a, double b,
                  std::vector<LinearConstraint> inv) {
    Location loc;
    loc.name = name;
    loc.A = Matrix::Constant(1, 1, a);
    loc.b = Vector::Constant(1, b);
    loc.invariant = std::move(inv);
    ha.locations[name] = std::move(loc);
  };
  Vector one = Vector::Constant(1, 1.0);
  loc1("lA", -0.3, 3.0, {LinearConstraint{one, Cmp::LE, 4.0}});
  loc1("lB", -0.5, 5.0, {LinearConstraint{one, Cmp::LE, 6.0}});
  loc1("lD", -2.0, 2.0, {LinearConstraint{one, Cmp::GE, 1.05}});
  loc1("lC", -0.2, 0.04, {});

  AffineMap identity{Matrix::Identity(1, 1), Vector::Zero(1)};
  AffineMap to_fault{Matrix::Zero(1, 1), Vector::Constant(1, 0.2)};
  auto eq_guard = [&](double c) {
    return std::vector<LinearConstraint>{LinearConstraint{one, Cmp::EQ, c}};
  };
  ha.events.push_back(Event{"EA", "lA", "lB", eq_guard(4.0), identity, "", true, false});
  ha.events.push_back(Event{"EB", "lB", "lD", eq_guard(6.0), identity, "alpha", true, false});
  ha.events.push_back(Event{"ED", "lD", "lA", eq_guard(1.05), identity, "", true, false});
  ha.events.push_back(Event{"EF", "lB", "lC", {}, to_fault, "", false, true});
  ha.initial_location = "lA";
  ha.initial_box = Box{Vector::Constant(1, 0.9), Vector::Constant(1, 1.1)};
  ha.validate();
  return ha;
}

// ---------------------------------------------------------------------------
// Scenario configuration

struct TrajectorySpec {
  std::string location;
  Vector x0;
  std::vector<ScheduledEvent> schedule;
  double horizon = 0.0;
  bool normal = true;
  int label = +1;  // classification label of tubes from this trajectory
  std::string name;
};

struct MSpec {
  enum Kind { Lyapunov, Optimize } kind = Lyapunov;
  int protected_coord = 0;
  std::optional<double> floor;
  std::map<int, double> ceilings;
};

struct ScenarioConfig {
  std::string name;
  std::uint64_t seed = 1;
  double grid_step = 0.05;
  Rational quantum{1, 10};
  HybridAutomaton automaton;
  std::vector<TrajectorySpec> trajectories;
  std::map<std::string, ScheduleWindow> schedule_windows;
  double gamma_cap_default = 0.1;
  std::map<std::string, double> gamma_cap_location;
  std::map<std::string, double> gamma_cap_segment;  // "k:m"
  double tau_bar_factor = 2.0;
  int lead_lag_samples = 200;
  int cover_density = 5;
  MSpec m_default;
  std::map<std::string, MSpec> m_location;
  SearchConfig search;
  double margin_floor = 0.002;
  int positive_label = +1;
  int checkpoint = -1;  // -1 = auto-scan
  int max_states = 100000;

  double gamma_cap(int k, int m, const std::string& loc) const {
    auto its = gamma_cap_segment.find(std::to_string(k) + ":" + std::to_string(m));
    if (its != gamma_cap_segment.end()) return its->second;
    auto itl = gamma_cap_location.find(loc);
    if (itl != gamma_cap_location.end()) return itl->second;
    return gamma_cap_default;
  }

  const MSpec& m_spec(const std::string& loc) const {
    auto it = m_location.find(loc);
    return it != m_location.end() ? it->second : m_default;
  }
};

inline MSpec mspec_from_json(const json& j) {
  MSpec s;
  s.kind = j.at("kind").get<std::string>() == "optimize" ? MSpec::Optimize : MSpec::Lyapunov;
  if (j.contains("protected_coord")) s.protected_coord = j.at("protected_coord").get<int>();
  if (j.contains("floor")) s.floor = j.at("floor").get<double>();
  if (j.contains("ceilings"))
    for (const auto& [c, v] : j.at("ceilings").items()) s.ceilings[std::stoi(c)] = v.get<double>();
  return s;
}

inline ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig cfg;
  cfg.name = j.value("name", "scenario");
  cfg.seed = j.value("seed", 1ull);
  cfg.grid_step = j.value("grid_step", 0.05);
  if (j.contains("quantum")) cfg.quantum = Rational::parse(j.at("quantum"));

  if (j.contains("automaton_builtin")) {
    std::string which = j.at("automaton_builtin").get<std::string>();
    if (which == "smart_building") {
      SmartBuildingParams p;
      if (j.contains("params")) {
        const auto& pj = j.at("params");
        p.thermal_capacitance = pj.value("thermal_capacitance", p.thermal_capacitance);
        p.air_mass = pj.value("air_mass", p.air_mass);
        p.mass_transfer = pj.value("mass_transfer", p.mass_transfer);
        p.cp = pj.value("cp", p.cp);
        p.beta = pj.value("beta", p.beta);
      }
      cfg.automaton = build_smart_building(p);
    } else if (which == "toy") {
      cfg.automaton = build_toy();
    } else {
      throw std::invalid_argument("unknown builtin automaton: " + which);
    }
  } else {
    cfg.automaton = automaton_from_json(j.at("automaton"));
  }

  for (const auto& tj : j.at("trajectories")) {
    TrajectorySpec t;
    t.location = tj.value("location", cfg.automaton.initial_location);
    t.x0 = tj.contains("x0") ? vector_from_json(tj.at("x0"))
                             : Vector(0.5 * (cfg.automaton.initial_box.lo +
                                             cfg.automaton.initial_box.hi));
    if (tj.contains("schedule"))
      for (const auto& sj : tj.at("schedule"))
        t.schedule.push_back({sj.at("time").get<double>(), sj.at("event").get<std::string>()});
    t.horizon = tj.at("horizon").get<double>();
    t.normal = tj.value("normal", true);
    t.label = tj.value("label", +1);
    t.name = tj.value("name", "traj");
    cfg.trajectories.push_back(std::move(t));
  }
  if (j.contains("schedule_windows"))
    for (const auto& [ev, wj] : j.at("schedule_windows").items())
      cfg.schedule_windows[ev] = {wj.at("lead").get<double>(), wj.at("lag").get<double>()};

  if (j.contains("gamma_caps")) {
    const auto& g = j.at("gamma_caps");
    cfg.gamma_cap_default = g.value("default", cfg.gamma_cap_default);
    if (g.contains("per_location"))
      for (const auto& [loc, v] : g.at("per_location").items())
        cfg.gamma_cap_location[loc] = v.get<double>();
    if (g.contains("per_segment"))
      for (const auto& [km, v] : g.at("per_segment").items())
        cfg.gamma_cap_segment[km] = v.get<double>();
  }
  cfg.tau_bar_factor = j.value("tau_bar_factor", 2.0);
  cfg.lead_lag_samples = j.value("lead_lag_samples", 200);
  cfg.cover_density = j.value("cover_density", 5);
  if (j.contains("m_strategy")) {
    const auto& m = j.at("m_strategy");
    if (m.contains("default")) cfg.m_default = mspec_from_json(m.at("default"));
    if (m.contains("per_location"))
      for (const auto& [loc, sj] : m.at("per_location").items())
        cfg.m_location[loc] = mspec_from_json(sj);
  }
  if (j.contains("inference")) {
    const auto& inf = j.at("inference");
    cfg.search.swarm = inf.value("swarm", cfg.search.swarm);
    cfg.search.iterations = inf.value("iterations", cfg.search.iterations);
    cfg.search.inertia = inf.value("inertia", cfg.search.inertia);
    cfg.search.cognitive = inf.value("cognitive", cfg.search.cognitive);
    cfg.search.social = inf.value("social", cfg.search.social);
    cfg.search.zeta = inf.value("zeta", cfg.search.zeta);
    cfg.search.threshold_slack = inf.value("threshold_slack", cfg.search.threshold_slack);
    cfg.search.window_max = inf.value("max_window", cfg.search.window_max);
    cfg.search.window_min_width = inf.value("min_window_width", cfg.search.window_min_width);
    cfg.search.try_pairs = inf.value("try_pairs", cfg.search.try_pairs);
    if (inf.contains("coords")) cfg.search.coords = inf.at("coords").get<std::vector<int>>();
    cfg.margin_floor = inf.value("margin_floor", cfg.margin_floor);
    cfg.positive_label = inf.value("positive_label", +1);
    cfg.checkpoint = inf.value("checkpoint", -1);
  }
  cfg.search.seed = cfg.seed;
  cfg.max_states = j.value("max_states", 100000);

  // Trajectory indices double as timed-abstraction state indices, with the
  // normal ones forming the initial set; keep them ordered.
  bool seen_faulty = false;
  for (const auto& t : cfg.trajectories) {
    if (!t.normal) seen_faulty = true;
    else if (seen_faulty)
      throw std::invalid_argument("normal trajectories must precede faulty ones");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Robust-data computation

inline RobustData compute_robust_data(const ScenarioConfig& cfg,
                                      const std::vector<Trajectory>& trajs) {
  const HybridAutomaton& ha = cfg.automaton;
  RobustData rd;
  rd.n_normal = 0;
  for (const auto& t : cfg.trajectories) rd.n_normal += t.normal ? 1 : 0;

  // Bisimulation metric per location actually visited.
  std::set<std::string> locs;
  for (const auto& t : trajs)
    for (const auto& s : t.segments) locs.insert(s.location);
  for (const auto& name : locs) {
    const Location& loc = ha.location(name);
    const MSpec& spec = cfg.m_spec(name);
    if (spec.kind == MSpec::Lyapunov) {
      rd.M[name] = solve_lyapunov(loc.A, Matrix::Identity(loc.A.rows(), loc.A.cols()));
    } else {
      MCaps caps;
      caps.floor = spec.floor;
      caps.ceilings = spec.ceilings;
      MOptResult r = optimize_M(loc.A, spec.protected_coord, caps);
      if (!r.feasible) throw InfeasibleError("optimize_M failed for " + name + ": " + r.message);
      rd.M[name] = r.M;
      rd.z_protected[name] = r.z;
      log_info("optimize_M(" + name + "): z = " + std::to_string(r.z));
    }
  }

  // Per-segment radii, lead/lag windows and chain containment.
  for (size_t k = 0; k < trajs.size(); ++k) {
    std::vector<SegmentRobustData> per_seg;
    const auto& segs = trajs[k].segments;
    for (size_t m = 0; m < segs.size(); ++m) {
      const Segment& seg = segs[m];
      const Location& loc = ha.location(seg.location);
      const Matrix& M = rd.M.at(seg.location);
      SegmentRobustData s;
      double cap = cfg.gamma_cap(static_cast<int>(k), static_cast<int>(m), seg.location);

      const Event* exit_event = nullptr;
      if (m + 1 < segs.size() && segs[m + 1].entry_event != "e0")
        exit_event = &ha.event(segs[m + 1].entry_event);

      std::vector<const Event*> competing;
      for (const Event* e : ha.events_from(seg.location))
        if (e->deterministic && (!exit_event || e->name != exit_event->name)) competing.push_back(e);

      double tau_bar = std::max(seg.dwell * cfg.tau_bar_factor, seg.dwell + cfg.grid_step);
      s.gamma = gamma_for_segment(loc, M, seg.x0, competing, tau_bar, cap, cfg.grid_step);

      if (exit_event && exit_event->deterministic) {
        LeadLag ll = lead_lag(ha, loc, seg.x0, exit_event->name, seg.dwell, M, s.gamma,
                              cfg.lead_lag_samples, mix_seed(cfg.seed, 77 + k * 100 + m));
        s.tau_lead = ll.lead;
        s.tau_lag = ll.lag;
      } else if (exit_event) {
        auto it = cfg.schedule_windows.find(exit_event->name);
        if (it != cfg.schedule_windows.end()) {
          s.tau_lead = it->second.lead;
          s.tau_lag = it->second.lag;
        }
      }

      s.gamma_hat = gamma_hat_of(s.gamma, M);
      const int n = static_cast<int>(M.rows());
      Matrix Minv = M.inverse();
      for (int jc = 0; jc < n; ++jc) {
        double z = 1.0 / std::sqrt(Minv(jc, jc));
        s.z.push_back(z);
        s.gamma_tilde.push_back(s.gamma / z);
      }
      per_seg.push_back(std::move(s));
    }
    rd.segments.push_back(std::move(per_seg));
  }

  // Chain containment: trajectories started on the initial-ball boundary and
  // replayed through the whole event chain must (i) trigger the nominal event
  // sequence, (ii) enter every segment inside its ball, (iii) dwell within the
  // lead/lag windows. This is the sampled form of the robust-neighborhood
  // chaining that the observer's soundness rests on.
  std::mt19937_64 chain_rng(mix_seed(cfg.seed, 4242));
  for (size_t k = 0; k < trajs.size(); ++k) {
    const auto& spec = cfg.trajectories[k];
    const auto& segs = trajs[k].segments;
    const Matrix& M0 = rd.M.at(segs[0].location);
    const double gamma0 = rd.at(static_cast<int>(k), 0).gamma;
    for (int i = 0; i < 32; ++i) {
      Vector xs = ellipsoid_boundary_sample(M0, segs[0].x0, gamma0 * 0.999, chain_rng);
      std::vector<ScheduledEvent> sched = spec.schedule;
      for (auto& ev : sched) {
        auto it = cfg.schedule_windows.find(ev.event);
        if (it != cfg.schedule_windows.end()) {
          std::uniform_real_distribution<double> uni(-it->second.lead, it->second.lag);
          ev.time = std::max(0.0, ev.time + uni(chain_rng));
        }
      }
      Trajectory t = simulate(cfg.automaton, spec.location, xs, sched, spec.horizon,
                              cfg.grid_step);
      size_t upto = std::min(t.segments.size(), segs.size());
      for (size_t m = 0; m < upto; ++m) {
        if (t.segments[m].entry_event != segs[m].entry_event)
          throw TubeInconsistencyError("trajectory " + std::to_string(k) +
                                       ": a ball sample triggers event sequence " +
                                       t.segments[m].entry_event + " instead of " +
                                       segs[m].entry_event + " (gamma too large)");
        const auto& srd = rd.at(static_cast<int>(k), static_cast<int>(m));
        double phi = bisim_dist(rd.M.at(segs[m].location), t.segments[m].x0, segs[m].x0);
        if (phi >= srd.gamma)
          throw TubeInconsistencyError(
              "tube chain broken at trajectory " + std::to_string(k) + " segment " +
              std::to_string(m) + ": entry reaches Phi = " + std::to_string(phi) +
              " >= gamma = " + std::to_string(srd.gamma));
        bool last = m + 1 == segs.size();
        if (!last && m + 1 < t.segments.size() &&
            (t.segments[m].dwell < segs[m].dwell - srd.tau_lead - 1e-9 ||
             t.segments[m].dwell > segs[m].dwell + srd.tau_lag + 1e-9))
          throw TubeInconsistencyError("lead/lag window of trajectory " + std::to_string(k) +
                                       " segment " + std::to_string(m) +
                                       " misses a sampled dwell time");
      }
    }
  }

  // Cover relation for normal trajectories: the end tube must land in the
  // ball of some initial segment in the same location.
  for (size_t k = 0; k < trajs.size(); ++k) {
    if (!cfg.trajectories[k].normal) continue;
    const auto& segs = trajs[k].segments;
    const Segment& last = segs.back();
    const auto& srd = rd.at(static_cast<int>(k), static_cast<int>(segs.size() - 1));
    Vector end_state = affine_flow(ha.location(last.location).A, ha.location(last.location).b,
                                   last.x0, last.dwell);
    EllipsoidBall target{rd.M.at(last.location), end_state, srd.gamma};
    std::vector<int> covers;
    for (size_t kc = 0; kc < trajs.size(); ++kc) {
      if (!cfg.trajectories[kc].normal) continue;
      const Segment& first = trajs[kc].segments.front();
      if (first.location != last.location) continue;
      EllipsoidBall ball{rd.M.at(first.location), first.x0,
                         rd.at(static_cast<int>(kc), 0).gamma};
      if (check_cover_ball(target, {ball}, 128, mix_seed(cfg.seed, 90 + k * 10 + kc)).covered)
        covers.push_back(static_cast<int>(kc));
    }
    rd.cover[static_cast<int>(k)] = covers;
  }

  // Faulty diversion relation: the reset image of each tube cross-section must
  // be covered by the union of faulty initial balls.
  for (size_t k = 0; k < trajs.size(); ++k) {
    const auto& segs = trajs[k].segments;
    for (size_t m = 0; m < segs.size(); ++m) {
      for (const Event* ef : ha.events_from(segs[m].location)) {
        if (!ef->faulty) continue;
        std::vector<int> targets;
        std::vector<EllipsoidBall> balls;
        for (size_t kf = 0; kf < trajs.size(); ++kf) {
          if (cfg.trajectories[kf].normal) continue;
          const Segment& first = trajs[kf].segments.front();
          if (first.location != ef->target) continue;
          targets.push_back(static_cast<int>(kf));
          balls.push_back(EllipsoidBall{rd.M.at(first.location), first.x0,
                                        rd.at(static_cast<int>(kf), 0).gamma});
        }
        const auto& srd = rd.at(static_cast<int>(k), static_cast<int>(m));
        const Location& loc = ha.location(segs[m].location);
        const Matrix& M = rd.M.at(segs[m].location);
        std::mt19937_64 rng(mix_seed(cfg.seed, 300 + k * 50 + m));
        double upper = segs[m].dwell + srd.tau_lag;
        bool ok = !balls.empty();
        for (double tau = 0.0; ok && tau <= upper + 1e-9; tau += std::max(upper / 16.0, 1e-6)) {
          for (int i = 0; ok && i < 8; ++i) {
            Vector xs = i == 0 ? segs[m].x0
                               : Vector(ellipsoid_boundary_sample(M, segs[m].x0,
                                                                  srd.gamma * 0.999, rng));
            Vector img = ef->reset.apply(affine_flow(loc.A, loc.b, xs, tau));
            bool inside = false;
            for (const auto& b : balls) inside = inside || b.contains(img);
            ok = inside;
          }
        }
        if (!ok)
          throw TubeInconsistencyError("fault image of " + ef->name +
                                       " is not covered by the faulty initial balls");
        rd.ind[RobustData::ind_key(static_cast<int>(k), static_cast<int>(m), ef->name)] = targets;
      }
    }
  }
  return rd;
}

/// Eq.-4 check: the scenario's initial box is covered by the union of the
/// initial-segment balls of trajectories starting in the initial location.
inline CoverResult check_initial_cover(const ScenarioConfig& cfg,
                                       const std::vector<Trajectory>& trajs,
                                       const RobustData& rd) {
  std::vector<EllipsoidBall> balls;
  for (size_t k = 0; k < trajs.size(); ++k) {
    const Segment& first = trajs[k].segments.front();
    if (first.location != cfg.automaton.initial_location) continue;
    balls.push_back(
        EllipsoidBall{rd.M.at(first.location), first.x0, rd.at(static_cast<int>(k), 0).gamma});
  }
  if (balls.empty()) return CoverResult{false, cfg.automaton.initial_box.lo};
  return check_cover_box(cfg.automaton.initial_box, balls, cfg.cover_density);
}

}  // namespace hytl

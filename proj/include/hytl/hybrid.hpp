#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hytl/linalg.hpp"
#include "hytl/mtl.hpp"

namespace hytl {

using nlohmann::json;

struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ScheduleError : SimulationError {
  using SimulationError::SimulationError;
};
struct DeadlockError : SimulationError {
  using SimulationError::SimulationError;
};
struct IntegrationError : SimulationError {
  using SimulationError::SimulationError;
};

enum class Cmp { LE, GE, EQ };

/// Linear constraint w.x (op) c.
struct LinearConstraint {
  Vector w;
  Cmp op = Cmp::LE;
  double c = 0.0;

  double value(const Vector& x) const { return w.dot(x) - c; }

  /// Nonnegative iff satisfied (equalities measure -|distance|).
  double margin(const Vector& x) const {
    double v = value(x);
    switch (op) {
      case Cmp::LE: return -v;
      case Cmp::GE: return v;
      case Cmp::EQ: return -std::abs(v);
    }
    return 0.0;
  }

  bool satisfied(const Vector& x, double tol = 1e-6) const { return margin(x) >= -tol; }
};

struct Location {
  std::string name;
  Matrix A;
  Vector b;
  std::vector<LinearConstraint> invariant;

  bool in_invariant(const Vector& x, double tol = 1e-6) const {
    for (const auto& c : invariant)
      if (!c.satisfied(x, tol)) return false;
    return true;
  }
};

struct AffineMap {
  Matrix R;
  Vector d;
  Vector apply(const Vector& x) const { return R * x + d; }
};

struct Event {
  std::string name;
  std::string source;
  std::string target;
  std::vector<LinearConstraint> guard;
  AffineMap reset;
  std::string symbol;          // empty = unobservable (epsilon)
  bool deterministic = true;
  bool faulty = false;         // unobservable scheduled events modeling faults

  bool observable() const { return !symbol.empty(); }
};

struct Box {
  Vector lo;
  Vector hi;

  bool contains(const Vector& x, double tol = 1e-9) const {
    for (int i = 0; i < x.size(); ++i)
      if (x(i) < lo(i) - tol || x(i) > hi(i) + tol) return false;
    return true;
  }
};

struct HybridAutomaton {
  int state_dim = 0;
  std::map<std::string, Location> locations;
  std::vector<Event> events;
  std::string initial_location;
  Box initial_box;

  const Location& location(const std::string& name) const {
    auto it = locations.find(name);
    if (it == locations.end()) throw std::out_of_range("unknown location: " + name);
    return it->second;
  }

  const Event& event(const std::string& name) const {
    for (const auto& e : events)
      if (e.name == name) return e;
    throw std::out_of_range("unknown event: " + name);
  }

  std::vector<const Event*> events_from(const std::string& loc) const {
    std::vector<const Event*> out;
    for (const auto& e : events)
      if (e.source == loc) out.push_back(&e);
    return out;
  }

  void validate() const {
    for (const auto& e : events) {
      location(e.source);
      location(e.target);
    }
  }
};

/// One flow segment of a trajectory (Def.-1 record plus dense samples).
struct Segment {
  std::string entry_event;   // "e0" marks initialization
  std::string location;
  Vector x0;                 // (reset) initial state
  double dwell = 0.0;
  std::vector<std::pair<double, Vector>> samples;  // (clock time, state)
};

struct Trajectory {
  std::vector<Segment> segments;
  double grid_step = 0.05;

  double total_time() const {
    double t = 0;
    for (const auto& s : segments) t += s.dwell;
    return t;
  }

  /// Absolute time at which segment m starts.
  double segment_start_time(size_t m) const {
    double t = 0;
    for (size_t i = 0; i < m; ++i) t += segments[i].dwell;
    return t;
  }

  /// (location, clock time, state) at absolute time t, by linear interpolation
  /// of the stored samples.
  std::tuple<std::string, double, Vector> at(double t) const {
    double acc = 0;
    for (size_t m = 0; m < segments.size(); ++m) {
      const auto& seg = segments[m];
      bool last = m + 1 == segments.size();
      if (t <= acc + seg.dwell + 1e-12 || last) {
        double tau = std::min(t - acc, seg.dwell);
        const auto& ss = seg.samples;
        if (ss.size() == 1 || tau <= ss.front().first) return {seg.location, tau, ss.front().second};
        for (size_t i = 1; i < ss.size(); ++i) {
          if (tau <= ss[i].first + 1e-12) {
            double t0 = ss[i - 1].first, t1 = ss[i].first;
            double w = t1 > t0 ? (tau - t0) / (t1 - t0) : 0.0;
            return {seg.location, tau, ss[i - 1].second * (1 - w) + ss[i].second * w};
          }
        }
        return {seg.location, tau, ss.back().second};
      }
      acc += seg.dwell;
    }
    throw std::out_of_range("time beyond trajectory");
  }
};

struct TimedSymbol {
  double time = 0.0;
  std::string symbol;
};

using TimedSymbolSequence = std::vector<TimedSymbol>;

struct ScheduledEvent {
  double time = 0.0;   // absolute time
  std::string event;
};

// ---------------------------------------------------------------------------

/// Exact solution of the location's affine flow at clock time tau.
inline Vector flow(const Location& loc, const Vector& x0, double tau) {
  if (tau < 0) throw std::invalid_argument("flow requires tau >= 0");
  Vector x = affine_flow(loc.A, loc.b, x0, tau);
  if (!x.allFinite()) throw IntegrationError("non-finite state in flow of " + loc.name);
  return x;
}

/// Sample the location flow on the uniform grid 0..horizon (ignoring
/// invariants/events). Used for MTL evaluation of nominal segments.
inline mtl::SampledSignal sample_flow(const Location& loc, const Vector& x0, double horizon,
                                      double dt) {
  mtl::SampledSignal sig;
  sig.dt = dt;
  AffineStepper stepper(loc.A, loc.b, dt);
  Vector x = x0;
  int n = static_cast<int>(std::ceil(horizon / dt - 1e-9)) + 1;
  for (int k = 0; k < n; ++k) {
    if (!x.allFinite()) throw IntegrationError("non-finite state in flow of " + loc.name);
    sig.samples.emplace_back(x.data(), x.data() + x.size());
    x = stepper.step(x);
  }
  return sig;
}

namespace detail {

struct Trigger {
  double tau;               // clock time within the current segment
  const Event* event;       // nullptr = invariant exit with no event (deadlock)
};

// Earliest zero of f on [lo, hi] given f(lo), f(hi) have opposite signs.
template <typename F>
double bisect(F&& f, double lo, double hi, double tol) {
  double flo = f(lo);
  for (int i = 0; i < 200 && hi - lo > tol; ++i) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if ((flo <= 0) == (fm <= 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return hi;
}

}  // namespace detail

/// Simulate the automaton from (location, x0). Deterministic events fire at
/// the first clock time their guard surface is reached; nondeterministic
/// events fire exactly at their scheduled times.
inline Trajectory simulate(const HybridAutomaton& ha, const std::string& init_location,
                           const Vector& x0, const std::vector<ScheduledEvent>& schedule,
                           double horizon, double grid_step = 0.05) {
  constexpr double kRootTol = 1e-9;
  Trajectory traj;
  traj.grid_step = grid_step;

  std::string loc_name = init_location;
  Vector x = x0;
  std::string entry = "e0";
  double t_abs = 0.0;
  size_t sched_idx = 0;

  for (double last = -1; sched_idx < schedule.size(); ++sched_idx) {
    if (schedule[sched_idx].time < last) throw ScheduleError("schedule times must be increasing");
    last = schedule[sched_idx].time;
  }
  sched_idx = 0;

  while (t_abs < horizon - 1e-12) {
    const Location& loc = ha.location(loc_name);
    if (!loc.in_invariant(x))
      throw SimulationError("state outside invariant of " + loc_name + " at segment start");

    Segment seg;
    seg.entry_event = entry;
    seg.location = loc_name;
    seg.x0 = x;

    auto det_events = ha.events_from(loc_name);
    std::erase_if(det_events, [](const Event* e) { return !e->deterministic; });

    AffineStepper stepper(loc.A, loc.b, grid_step);
    auto flow_from = [&](double tau) { return affine_flow(loc.A, loc.b, seg.x0, tau); };

    double tau = 0.0;
    Vector xs = seg.x0;
    seg.samples.emplace_back(0.0, xs);

    std::optional<detail::Trigger> fired;
    bool horizon_end = false;

    while (!fired && !horizon_end) {
      double tau_next = tau + grid_step;
      bool clip_sched = false;
      if (sched_idx < schedule.size() && schedule[sched_idx].time <= t_abs + tau_next + 1e-12) {
        tau_next = schedule[sched_idx].time - t_abs;
        clip_sched = true;
      }
      if (t_abs + tau_next >= horizon) {
        tau_next = horizon - t_abs;
        clip_sched = false;
        horizon_end = true;
      }
      Vector xn = clip_sched || horizon_end ? flow_from(tau_next) : stepper.step(xs);
      if (!xn.allFinite()) throw IntegrationError("non-finite state in " + loc_name);

      // Deterministic guards: bracket the defining functions between tau and tau_next.
      double best_tau = std::numeric_limits<double>::infinity();
      const Event* best_event = nullptr;
      for (const Event* e : det_events) {
        for (const auto& g : e->guard) {
          if (g.op != Cmp::EQ) continue;
          double v0 = g.value(xs), v1 = g.value(xn);
          if (v0 == 0.0 && tau == 0.0) continue;  // just reset onto the surface
          if ((v0 < 0) != (v1 < 0) || v1 == 0.0) {
            double root = detail::bisect([&](double s) { return g.value(flow_from(s)); }, tau,
                                         tau_next, kRootTol);
            Vector xr = flow_from(root);
            bool ok = true;
            for (const auto& g2 : e->guard)
              if (!g2.satisfied(xr, 1e-6)) ok = false;
            if (ok && root < best_tau) {
              best_tau = root;
              best_event = e;
            }
          }
        }
        // Pure-inequality deterministic guards: fire when the satisfaction
        // margin crosses zero.
        bool has_eq = false;
        for (const auto& g : e->guard) has_eq |= g.op == Cmp::EQ;
        if (!has_eq && !e->guard.empty()) {
          auto m = [&](const Vector& p) {
            double worst = std::numeric_limits<double>::infinity();
            for (const auto& g : e->guard) worst = std::min(worst, g.margin(p));
            return worst;
          };
          double m0 = m(xs), m1 = m(xn);
          if (m0 < 0 && m1 >= 0) {
            double root = detail::bisect([&](double s) { return -m(flow_from(s)); }, tau, tau_next,
                                         kRootTol);
            if (root < best_tau) {
              best_tau = root;
              best_event = e;
            }
          }
        }
      }

      // Invariant exit.
      auto inv_margin = [&](const Vector& p) {
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& g : loc.invariant) worst = std::min(worst, g.margin(p));
        return worst;
      };
      double exit_tau = std::numeric_limits<double>::infinity();
      if (!loc.invariant.empty() && inv_margin(xn) < -1e-9) {
        exit_tau = detail::bisect([&](double s) { return inv_margin(flow_from(s)); }, tau, tau_next,
                                  kRootTol);
      }

      if (best_event && best_tau <= exit_tau + kRootTol) {
        fired = detail::Trigger{best_tau, best_event};
      } else if (exit_tau < std::numeric_limits<double>::infinity()) {
        // Leaving the invariant: a deterministic event must be enabled there.
        Vector xe = flow_from(exit_tau);
        const Event* enabled = nullptr;
        for (const Event* e : det_events) {
          bool ok = true;
          for (const auto& g : e->guard)
            if (!g.satisfied(xe, 1e-6)) ok = false;
          if (ok) enabled = e;
        }
        if (!enabled)
          throw DeadlockError("flow exits invariant of " + loc_name +
                              " with no feasible deterministic event");
        fired = detail::Trigger{exit_tau, enabled};
      } else if (clip_sched && !horizon_end) {
        // Scheduled (nondeterministic) event fires exactly now.
        const Event& e = ha.event(schedule[sched_idx].event);
        if (e.source != loc_name)
          throw ScheduleError("scheduled event " + e.name + " not available in " + loc_name);
        bool ok = true;
        for (const auto& g : e.guard)
          if (!g.satisfied(xn, 1e-6)) ok = false;
        if (!ok) throw ScheduleError("guard of scheduled event " + e.name + " is violated");
        ++sched_idx;
        fired = detail::Trigger{tau_next, &e};
      }

      if (!fired) {
        tau = tau_next;
        xs = xn;
        if (!horizon_end && std::abs(std::remainder(tau, grid_step)) < 1e-9)
          seg.samples.emplace_back(tau, xs);
      }
    }

    auto push_final = [&](double tau_end, const Vector& xe) {
      if (tau_end - seg.samples.back().first > 1e-12)
        seg.samples.emplace_back(tau_end, xe);
      else
        seg.samples.back() = {tau_end, xe};
    };

    if (fired) {
      Vector xe = flow_from(fired->tau);
      seg.dwell = fired->tau;
      push_final(fired->tau, xe);
      traj.segments.push_back(std::move(seg));
      t_abs += fired->tau;
      x = fired->event->reset.apply(xe);
      loc_name = fired->event->target;
      entry = fired->event->name;
    } else {
      double tau_end = horizon - t_abs;
      seg.dwell = tau_end;
      push_final(tau_end, flow_from(tau_end));
      traj.segments.push_back(std::move(seg));
      t_abs = horizon;
    }
  }
  return traj;
}

/// Observable timed word of a trajectory: (absolute event time, symbol) for
/// every observable entry event, epsilon entries removed.
inline TimedSymbolSequence project_outputs(const HybridAutomaton& ha, const Trajectory& traj) {
  TimedSymbolSequence out;
  double t = 0;
  for (size_t m = 0; m < traj.segments.size(); ++m) {
    const auto& seg = traj.segments[m];
    if (m > 0 && seg.entry_event != "e0") {
      const Event& e = ha.event(seg.entry_event);
      if (e.observable()) out.push_back({t, e.symbol});
    }
    t += seg.dwell;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline json to_json(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

inline Vector vector_from_json(const json& a) {
  Vector v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
  return v;
}

inline Matrix matrix_from_json(const json& a) {
  Matrix m(a.size(), a.empty() ? 0 : a[0].size());
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < a[i].size(); ++j) m(i, j) = a[i][j].get<double>();
  return m;
}

inline json constraint_to_json(const LinearConstraint& c) {
  const char* op = c.op == Cmp::LE ? "<=" : c.op == Cmp::GE ? ">=" : "==";
  return json{{"w", to_json(c.w)}, {"op", op}, {"c", c.c}};
}

inline LinearConstraint constraint_from_json(const json& j) {
  LinearConstraint c;
  c.w = vector_from_json(j.at("w"));
  std::string op = j.at("op").get<std::string>();
  c.op = op == "<=" ? Cmp::LE : op == ">=" ? Cmp::GE : Cmp::EQ;
  c.c = j.at("c").get<double>();
  return c;
}

inline json to_json(const HybridAutomaton& ha) {
  json j;
  j["state_dim"] = ha.state_dim;
  j["locations"] = json::array();
  for (const auto& [name, loc] : ha.locations) {
    json inv = json::array();
    for (const auto& c : loc.invariant) inv.push_back(constraint_to_json(c));
    j["locations"].push_back(
        {{"name", name}, {"A", to_json(loc.A)}, {"b", to_json(loc.b)}, {"invariant", inv}});
  }
  j["events"] = json::array();
  for (const auto& e : ha.events) {
    json guard = json::array();
    for (const auto& c : e.guard) guard.push_back(constraint_to_json(c));
    j["events"].push_back({{"name", e.name},
                           {"source", e.source},
                           {"target", e.target},
                           {"guard", guard},
                           {"reset", {{"R", to_json(e.reset.R)}, {"d", to_json(e.reset.d)}}},
                           {"symbol", e.symbol},
                           {"deterministic", e.deterministic},
                           {"faulty", e.faulty}});
  }
  j["initial"] = {{"location", ha.initial_location},
                  {"box", {{"lo", to_json(ha.initial_box.lo)}, {"hi", to_json(ha.initial_box.hi)}}}};
  return j;
}

inline HybridAutomaton automaton_from_json(const json& j) {
  HybridAutomaton ha;
  ha.state_dim = j.at("state_dim").get<int>();
  for (const auto& lj : j.at("locations")) {
    Location loc;
    loc.name = lj.at("name").get<std::string>();
    loc.A = matrix_from_json(lj.at("A"));
    loc.b = vector_from_json(lj.at("b"));
    for (const auto& cj : lj.at("invariant")) loc.invariant.push_back(constraint_from_json(cj));
    ha.locations[loc.name] = std::move(loc);
  }
  for (const auto& ej : j.at("events")) {
    Event e;
    e.name = ej.at("name").get<std::string>();
    e.source = ej.at("source").get<std::string>();
    e.target = ej.at("target").get<std::string>();
    for (const auto& cj : ej.at("guard")) e.guard.push_back(constraint_from_json(cj));
    e.reset.R = matrix_from_json(ej.at("reset").at("R"));
    e.reset.d = vector_from_json(ej.at("reset").at("d"));
    e.symbol = ej.at("symbol").get<std::string>();
    e.deterministic = ej.at("deterministic").get<bool>();
    e.faulty = ej.value("faulty", false);
    ha.events.push_back(std::move(e));
  }
  ha.initial_location = j.at("initial").at("location").get<std::string>();
  ha.initial_box.lo = vector_from_json(j.at("initial").at("box").at("lo"));
  ha.initial_box.hi = vector_from_json(j.at("initial").at("box").at("hi"));
  ha.validate();
  return ha;
}

inline void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  os << "segment,clock_time";
  if (!traj.segments.empty())
    for (int i = 0; i < traj.segments[0].x0.size(); ++i) os << ",x" << (i + 1);
  os << "\n";
  for (size_t m = 0; m < traj.segments.size(); ++m) {
    for (const auto& [tau, x] : traj.segments[m].samples) {
      os << m << "," << tau;
      for (int i = 0; i < x.size(); ++i) os << "," << x(i);
      os << "\n";
    }
  }
}

inline json trajectory_to_json(const Trajectory& traj) {
  json segs = json::array();
  for (const auto& s : traj.segments) {
    json samples = json::array();
    for (const auto& [tau, x] : s.samples) samples.push_back({{"tau", tau}, {"x", to_json(x)}});
    segs.push_back({{"entry_event", s.entry_event},
                    {"location", s.location},
                    {"x0", to_json(s.x0)},
                    {"dwell", s.dwell},
                    {"samples", samples}});
  }
  return json{{"grid_step", traj.grid_step}, {"segments", segs}};
}

inline Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.grid_step = j.at("grid_step").get<double>();
  for (const auto& sj : j.at("segments")) {
    Segment s;
    s.entry_event = sj.at("entry_event").get<std::string>();
    s.location = sj.at("location").get<std::string>();
    s.x0 = vector_from_json(sj.at("x0"));
    s.dwell = sj.at("dwell").get<double>();
    for (const auto& pj : sj.at("samples"))
      s.samples.emplace_back(pj.at("tau").get<double>(), vector_from_json(pj.at("x")));
    t.segments.push_back(std::move(s));
  }
  return t;
}

}  // namespace hytl

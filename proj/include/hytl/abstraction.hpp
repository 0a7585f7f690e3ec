#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hytl/bisim.hpp"
#include "hytl/rational.hpp"

namespace hytl {

struct AbstractionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// State (k,n) of the timed abstraction, or the end-of-simulation sink.
struct TAState {
  int k = 0;  // trajectory index (0-based internally; printed 1-based)
  int n = 0;  // segment index
  bool eos = false;

  static TAState EoS() { return TAState{-1, -1, true}; }

  friend bool operator==(const TAState&, const TAState&) = default;
  friend auto operator<=>(const TAState&, const TAState&) = default;

  std::string name() const {
    if (eos) return "EoS";
    return "(" + std::to_string(k + 1) + "," + std::to_string(n) + ")";
  }
};

/// Timed event: single clock, guard [glo, ghi], clock reset on firing.
struct TAEvent {
  TAState source;
  TAState target;
  Rational glo;
  Rational ghi;
  std::string symbol;  // empty = epsilon

  bool observable() const { return !symbol.empty(); }
};

struct TimedAutomaton {
  std::vector<TAState> states;
  std::map<TAState, std::optional<Rational>> inv_upper;  // nullopt = unbounded (EoS)
  std::vector<TAEvent> events;
  std::vector<TAState> initial;
  int n_traj = 0;
  int n_normal = 0;

  bool has_state(const TAState& q) const { return inv_upper.contains(q); }

  std::optional<Rational> invariant_upper(const TAState& q) const {
    auto it = inv_upper.find(q);
    if (it == inv_upper.end()) throw std::out_of_range("unknown timed state " + q.name());
    return it->second;
  }

  std::vector<const TAEvent*> feasible_events(const TAState& q) const {
    if (!has_state(q)) throw std::out_of_range("unknown timed state " + q.name());
    std::vector<const TAEvent*> out;
    for (const auto& e : events)
      if (e.source == q) out.push_back(&e);
    return out;
  }

  /// Labels psi[a,b] of the feasible events of q.
  std::vector<std::tuple<std::string, Rational, Rational>> feasible_labels(const TAState& q) const {
    std::vector<std::tuple<std::string, Rational, Rational>> out;
    for (const TAEvent* e : feasible_events(q)) out.emplace_back(e->symbol, e->glo, e->ghi);
    return out;
  }
};

/// Schedule-uncertainty window for segments that end in a nondeterministic
/// (externally scheduled) event: the ball-based lead/lag machinery does not
/// apply, so the abstraction widens the nominal time by declared slack.
struct ScheduleWindow {
  double lead = 0.0;
  double lag = 0.0;
};

/// Build the single-clock timed abstraction from simulated trajectories and
/// their robust data. Times are quantized onto the rational grid `quantum`,
/// windows rounded outward.
inline TimedAutomaton build_abstraction(const HybridAutomaton& ha,
                                        const std::vector<Trajectory>& trajs,
                                        const RobustData& rd, const Rational& quantum,
                                        const std::map<std::string, ScheduleWindow>& sched = {}) {
  TimedAutomaton ta;
  ta.n_traj = static_cast<int>(trajs.size());
  ta.n_normal = rd.n_normal;

  auto qdown = [&](double t) { return Rational::max(Rational(0), quantize(t, quantum, -1)); };
  auto qup = [&](double t) { return quantize(t, quantum, +1); };
  auto qnear = [&](double t) { return quantize(t, quantum, 0); };

  for (int k = 0; k < ta.n_traj; ++k) {
    const auto& segs = trajs[k].segments;
    if (segs.size() != rd.segments.at(k).size())
      throw AbstractionError("robust data does not align with trajectory " + std::to_string(k));
    int N = static_cast<int>(segs.size()) - 1;
    for (int n = 0; n <= N; ++n) {
      TAState q{k, n, false};
      ta.states.push_back(q);
      const auto& srd = rd.at(k, n);
      double tau = segs[n].dwell;
      ta.inv_upper[q] = n < N ? qup(tau + srd.tau_lag) : qnear(tau);
    }
    // Q0 covers the initial set through the normal trajectories only; faulty
    // ones are entered via diversion events.
    if (k < ta.n_normal) ta.initial.push_back(TAState{k, 0, false});
  }
  ta.states.push_back(TAState::EoS());
  ta.inv_upper[TAState::EoS()] = std::nullopt;

  for (int k = 0; k < ta.n_traj; ++k) {
    const auto& segs = trajs[k].segments;
    int N = static_cast<int>(segs.size()) - 1;
    for (int n = 0; n <= N; ++n) {
      TAState q{k, n, false};
      const auto& srd = rd.at(k, n);
      double tau = segs[n].dwell;

      if (n < N) {
        // Case 1: advance along the trajectory with the successor's entry symbol.
        const Event& entry = ha.event(segs[n + 1].entry_event);
        Rational glo, ghi;
        if (!entry.deterministic) {
          auto it = sched.find(entry.name);
          ScheduleWindow w = it != sched.end() ? it->second : ScheduleWindow{};
          glo = qdown(tau - w.lead);
          ghi = qup(tau + w.lag);
        } else {
          glo = qdown(tau - srd.tau_lead);
          ghi = qup(tau + srd.tau_lag);
        }
        ta.events.push_back(TAEvent{q, TAState{k, n + 1, false}, glo, ghi, entry.symbol});
      } else {
        // Cases 2/3: the trajectory ends; loop into covering initial balls or
        // fall through to the end-of-simulation sink.
        Rational point = qnear(tau);
        auto it = rd.cover.find(k);
        bool looped = false;
        if (k < ta.n_normal && it != rd.cover.end()) {
          for (int kc : it->second) {
            ta.events.push_back(
                TAEvent{q, TAState{kc, 0, false}, point, point, std::string()});
            looped = true;
          }
        }
        if (!looped)
          ta.events.push_back(TAEvent{q, TAState::EoS(), point, point, std::string()});
      }

      // Case 4: scheduled faulty events may divert anywhere in the segment.
      for (const Event* e : ha.events_from(segs[n].location)) {
        if (!e->faulty) continue;
        auto it = rd.ind.find(RobustData::ind_key(k, n, e->name));
        if (it == rd.ind.end())
          throw AbstractionError("missing Ind entry for " + RobustData::ind_key(k, n, e->name));
        for (int kf : it->second) {
          ta.events.push_back(
              TAEvent{q, TAState{kf, 0, false}, Rational(0), *ta.inv_upper[q], e->symbol});
        }
      }
    }
  }

  // Sanity: guards within invariants, well-ordered.
  for (const auto& e : ta.events) {
    if (e.glo > e.ghi) throw AbstractionError("empty guard window on " + e.source.name());
    auto inv = ta.inv_upper[e.source];
    if (inv && e.ghi > *inv)
      throw AbstractionError("guard exceeds invariant of " + e.source.name());
  }
  return ta;
}

// ---------------------------------------------------------------------------

inline json timed_automaton_to_json(const TimedAutomaton& ta) {
  auto state_j = [](const TAState& q) {
    return q.eos ? json{{"eos", true}} : json{{"k", q.k}, {"n", q.n}};
  };
  json j;
  j["n_traj"] = ta.n_traj;
  j["n_normal"] = ta.n_normal;
  j["states"] = json::array();
  for (const auto& q : ta.states) {
    json s = state_j(q);
    auto inv = ta.inv_upper.at(q);
    s["inv_upper"] = inv ? json(inv->str()) : json();
    j["states"].push_back(s);
  }
  j["events"] = json::array();
  for (const auto& e : ta.events)
    j["events"].push_back({{"source", state_j(e.source)},
                           {"target", state_j(e.target)},
                           {"glo", e.glo.str()},
                           {"ghi", e.ghi.str()},
                           {"symbol", e.symbol}});
  j["initial"] = json::array();
  for (const auto& q : ta.initial) j["initial"].push_back(state_j(q));
  return j;
}

inline TimedAutomaton timed_automaton_from_json(const json& j) {
  auto state_f = [](const json& s) {
    if (s.contains("eos")) return TAState::EoS();
    return TAState{s.at("k").get<int>(), s.at("n").get<int>(), false};
  };
  TimedAutomaton ta;
  ta.n_traj = j.at("n_traj").get<int>();
  ta.n_normal = j.at("n_normal").get<int>();
  for (const auto& s : j.at("states")) {
    TAState q = state_f(s);
    ta.states.push_back(q);
    ta.inv_upper[q] = s.at("inv_upper").is_null()
                          ? std::optional<Rational>()
                          : std::optional<Rational>(Rational::parse(s.at("inv_upper")));
  }
  for (const auto& e : j.at("events"))
    ta.events.push_back(TAEvent{state_f(e.at("source")), state_f(e.at("target")),
                                Rational::parse(e.at("glo")), Rational::parse(e.at("ghi")),
                                e.at("symbol").get<std::string>()});
  for (const auto& q : j.at("initial")) ta.initial.push_back(state_f(q));
  return ta;
}

inline std::string timed_automaton_to_dot(const TimedAutomaton& ta) {
  std::ostringstream os;
  os << "digraph timed_abstraction {\n  rankdir=LR;\n";
  for (const auto& q : ta.states) {
    auto inv = ta.inv_upper.at(q);
    os << "  \"" << q.name() << "\" [label=\"" << q.name();
    if (inv) os << "\\nInv [0," << inv->str() << "]";
    os << "\"];\n";
  }
  for (const auto& e : ta.events) {
    os << "  \"" << e.source.name() << "\" -> \"" << e.target.name() << "\" [label=\""
       << (e.symbol.empty() ? "eps" : e.symbol) << " [" << e.glo.str() << "," << e.ghi.str()
       << "]\"];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace hytl

#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hytl/abstraction.hpp"
#include "hytl/rational.hpp"

namespace hytl {

struct ObserverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InconsistentObservation : ObserverError {
  using ObserverError::ObserverError;
};
struct ClosureCycleError : ObserverError {
  using ObserverError::ObserverError;
};
struct StateExplosionError : ObserverError {
  using ObserverError::ObserverError;
};
struct RefinementError : ObserverError {
  using ObserverError::ObserverError;
};

/// Hypothesis "the hybrid state is within tube (k,n) with clock time in
/// [lo, hi] relative to now". lo may be negative (latent, not entered yet).
struct TimedAtom {
  TAState q;
  Rational lo;
  Rational hi;

  friend bool operator==(const TimedAtom&, const TimedAtom&) = default;
  friend auto operator<=>(const TimedAtom&, const TimedAtom&) = default;

  std::string str() const { return q.name() + "[" + lo.str() + "," + hi.str() + "]"; }
};

/// Canonical observer state: sorted atoms, same-state overlapping or touching
/// intervals merged.
using AtomSet = std::vector<TimedAtom>;

inline AtomSet canonicalize(AtomSet atoms) {
  std::sort(atoms.begin(), atoms.end());
  AtomSet out;
  for (const auto& a : atoms) {
    if (!out.empty() && out.back().q == a.q && a.lo <= out.back().hi) {
      out.back().hi = Rational::max(out.back().hi, a.hi);
    } else {
      out.push_back(a);
    }
  }
  return out;
}

inline std::string atom_set_str(const AtomSet& s) {
  std::string out = "{";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += s[i].str();
  }
  return out + "}";
}

// ---------------------------------------------------------------------------
// Transition labels

struct BlankLabel {
  Rational a;
};

/// Observation of a (possibly concatenated) symbol string within a window.
struct SymbolLabel {
  std::string symbol;
  Rational lo, hi;
  bool lo_open = false;
  bool hi_open = false;

  bool contains(double t) const {
    double l = lo.to_double(), h = hi.to_double();
    if (lo_open ? t <= l : t < l) return false;
    if (hi_open ? t >= h : t > h) return false;
    return true;
  }

  std::string str() const {
    std::string s = symbol;
    s += lo_open ? '(' : '[';
    s += lo.str() + "," + hi.str();
    s += hi_open ? ')' : ']';
    return s;
  }
};

/// MTL checkpoint verdict, available d time units after entering the state.
struct VerdictLabel {
  std::string formula;
  Rational d;
  bool positive = true;

  std::string str() const { return (positive ? "" : "!") + ("(" + formula + ")[" + d.str() + "]"); }
};

using ObsLabel = std::variant<BlankLabel, SymbolLabel, VerdictLabel>;

inline std::string label_str(const ObsLabel& l) {
  if (auto* b = std::get_if<BlankLabel>(&l)) return "eps[" + b->a.str() + "]";
  if (auto* s = std::get_if<SymbolLabel>(&l)) return s->str();
  return std::get<VerdictLabel>(l).str();
}

// ---------------------------------------------------------------------------
// Core set operations

namespace obs_detail {

inline constexpr int kClosureCap = 4096;

struct LatentChild {
  TimedAtom atom;
};

}  // namespace obs_detail

/// eps[0]-extension: atoms q[lo,0] spawn latent successors through
/// epsilon events whose guard starts at zero, transitively.
inline AtomSet eps0_extension(const TimedAutomaton& ta, AtomSet s) {
  std::deque<TimedAtom> work(s.begin(), s.end());
  int budget = obs_detail::kClosureCap;
  while (!work.empty()) {
    TimedAtom a = work.front();
    work.pop_front();
    if (a.hi != Rational(0)) continue;
    for (const TAEvent* e : ta.feasible_events(a.q)) {
      if (e->observable() || e->glo != Rational(0)) continue;
      TimedAtom child{e->target, a.lo - e->ghi, Rational(0)};
      bool subsumed = false;
      for (const auto& x : s)
        if (x.q == child.q && x.lo <= child.lo && child.hi <= x.hi) subsumed = true;
      if (subsumed) continue;
      if (--budget <= 0)
        throw ClosureCycleError("eps[0]-closure does not terminate (zero-guard epsilon cycle)");
      s.push_back(child);
      work.push_back(child);
    }
  }
  return canonicalize(std::move(s));
}

/// Blank_min(s): shortest blank interval after which the observer must update.
inline std::optional<Rational> blank_min(const TimedAutomaton& ta, const AtomSet& s) {
  std::optional<Rational> best;
  auto consider = [&](const Rational& v) {
    if (v <= Rational(0)) return;
    if (!best || v < *best) best = v;
  };
  for (const auto& a : s) {
    for (const TAEvent* e : ta.feasible_events(a.q)) {
      if (!e->observable() && a.hi < e->glo) consider(e->glo - a.hi);
      if (e->observable() && a.lo < e->ghi) consider(e->ghi - a.lo);
    }
    auto inv = ta.invariant_upper(a.q);
    if (inv) consider(*inv - a.lo);
  }
  return best;
}

/// Latent successors spawned when the blank reaches an epsilon guard start:
/// events with glo == hi + a contribute target[lo + a - ghi, 0].
inline AtomSet blank_latents(const TimedAutomaton& ta, const AtomSet& s, const Rational& a) {
  AtomSet out;
  for (const auto& atom : s) {
    for (const TAEvent* e : ta.feasible_events(atom.q)) {
      if (e->observable()) continue;
      if (atom.hi < e->glo && e->glo == atom.hi + a)
        out.push_back(TimedAtom{e->target, atom.lo + a - e->ghi, Rational(0)});
    }
  }
  return out;
}

/// f(s, eps[a]) for 0 < a <= Blank_min(s): shift atoms by a (dropping those
/// pushed to their invariant bound, clipping the upper end), then add the
/// eps[0]-extension of the latent successors.
inline AtomSet advance(const TimedAutomaton& ta, const AtomSet& s, const Rational& a) {
  AtomSet out;
  for (const auto& atom : s) {
    Rational lo = atom.lo + a;
    Rational hi = atom.hi + a;
    auto inv = ta.invariant_upper(atom.q);
    if (inv) {
      if (lo >= *inv) continue;  // must have transitioned out
      hi = Rational::min(hi, *inv);
    }
    out.push_back(TimedAtom{atom.q, lo, hi});
  }
  AtomSet latents = eps0_extension(ta, blank_latents(ta, s, a));
  out.insert(out.end(), latents.begin(), latents.end());
  return canonicalize(std::move(out));
}

inline AtomSet step_eps(const TimedAutomaton& ta, const AtomSet& s) {
  auto b = blank_min(ta, s);
  if (!b) throw ObserverError("blank_min undefined: no candidate events or invariants");
  AtomSet r = advance(ta, s, *b);
  if (r.empty())
    throw InconsistentObservation("blank of " + b->str() + " leaves no consistent hypothesis");
  return r;
}

/// f(s, psi<a,b]) for a single observable symbol: successors q'[0,0] of events
/// whose anticipated window covers the label cell, eps[0]-extended.
inline AtomSet step_obs(const TimedAutomaton& ta, const AtomSet& s, const SymbolLabel& lab) {
  AtomSet out;
  for (const auto& atom : s) {
    for (const TAEvent* e : ta.feasible_events(atom.q)) {
      if (e->symbol != lab.symbol) continue;
      if (e->ghi - atom.lo >= lab.hi && e->glo - atom.hi <= lab.lo)
        out.push_back(TimedAtom{e->target, Rational(0), Rational(0)});
    }
  }
  if (out.empty())
    throw InconsistentObservation("symbol " + lab.symbol + " has no matching event in " +
                                  atom_set_str(s));
  return eps0_extension(ta, canonicalize(std::move(out)));
}

/// Chains of instantly-fireable events (guard starting at 0) from q, keyed by
/// the projected concatenation of their output symbols.
inline std::vector<std::pair<std::string, TAState>> instant_chains(const TimedAutomaton& ta,
                                                                   const TAState& q0) {
  std::vector<std::pair<std::string, TAState>> out;
  std::deque<std::pair<std::string, TAState>> work{{std::string(), q0}};
  int budget = obs_detail::kClosureCap;
  std::set<std::pair<std::string, TAState>> seen;
  while (!work.empty()) {
    auto [str, q] = work.front();
    work.pop_front();
    for (const TAEvent* e : ta.feasible_events(q)) {
      if (e->glo != Rational(0)) continue;
      std::string next = str + e->symbol;
      auto key = std::make_pair(next, e->target);
      if (seen.contains(key)) continue;
      seen.insert(key);
      if (--budget <= 0)
        throw ClosureCycleError("instant-event chains do not terminate");
      if (!next.empty()) out.push_back(key);
      work.push_back(key);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// The compiled observer

struct ObserverAutomaton {
  TimedAutomaton ta;
  std::vector<AtomSet> states;
  std::vector<std::optional<Rational>> blank_of;

  struct Edge {
    ObsLabel label;
    int target = -1;
  };
  std::vector<std::vector<Edge>> edges;
  int initial = 0;

  int find_state(const AtomSet& s) const {
    auto key = atom_set_str(s);
    for (size_t i = 0; i < states.size(); ++i)
      if (atom_set_str(states[i]) == key) return static_cast<int>(i);
    return -1;
  }

  const Edge* blank_edge(int state) const {
    for (const auto& e : edges[state])
      if (std::holds_alternative<BlankLabel>(e.label)) return &e;
    return nullptr;
  }
};

namespace obs_detail {

/// Observable-window labels of a state: anticipated windows grouped by symbol,
/// partitioned at distinct window starts, capped at Blank_min.
struct WindowedEvent {
  std::string symbol;
  Rational wlo;
};

inline std::vector<SymbolLabel> symbol_labels(const TimedAutomaton& ta, const AtomSet& s,
                                              const Rational& B) {
  std::map<std::string, std::set<Rational>> starts;
  for (const auto& atom : s) {
    for (const TAEvent* e : ta.feasible_events(atom.q)) {
      if (!e->observable()) continue;
      Rational whi = e->ghi - atom.lo;
      if (whi <= Rational(0)) continue;  // window already past
      Rational wlo = Rational::max(Rational(0), e->glo - atom.hi);
      if (wlo > B) continue;  // blank update happens first
      starts[e->symbol].insert(wlo);
    }
  }
  std::vector<SymbolLabel> labels;
  for (const auto& [sym, as] : starts) {
    std::vector<Rational> a(as.begin(), as.end());
    for (size_t i = 0; i + 1 < a.size(); ++i)
      labels.push_back(SymbolLabel{sym, a[i], a[i + 1], a[i] == Rational(0), true});
    labels.push_back(SymbolLabel{sym, a.back(), B, a.back() == Rational(0), false});
  }
  return labels;
}

}  // namespace obs_detail

namespace obs_detail {

struct Pending {
  ObsLabel label;
  AtomSet succ;
};

/// All outgoing transitions of an observer state: the blank update, the
/// partitioned symbol-window labels, chain-extended labels for instant
/// follow-up events, and point labels for symbols heard exactly at the blank
/// boundary. Same-symbol point collisions are merged to keep determinism.
inline std::vector<Pending> expand_state(const TimedAutomaton& ta, const AtomSet& s,
                                         const Rational& B) {
  std::vector<Pending> pending;

  AtomSet blank_succ = advance(ta, s, B);
  if (!blank_succ.empty()) pending.push_back({BlankLabel{B}, blank_succ});

  // Symbol strings observable exactly at the blank boundary, from instant
  // chains out of the latent newcomers.
  std::map<std::string, AtomSet> point_obs;
  for (const auto& latent : blank_latents(ta, s, B))
    for (const auto& [str, q_end] : instant_chains(ta, latent.q))
      point_obs[str].push_back(TimedAtom{q_end, Rational(0), Rational(0)});

  for (const auto& lab : symbol_labels(ta, s, B)) {
    AtomSet base = step_obs(ta, s, lab);

    std::map<std::string, AtomSet> chained;
    for (const auto& atom : base)
      if (atom.lo == Rational(0) && atom.hi == Rational(0))
        for (const auto& [str, q_end] : instant_chains(ta, atom.q))
          chained[lab.symbol + str].push_back(TimedAtom{q_end, Rational(0), Rational(0)});

    auto coll = point_obs.find(lab.symbol);
    if (coll != point_obs.end() && !lab.hi_open && lab.hi == B) {
      AtomSet merged = base;
      merged.insert(merged.end(), coll->second.begin(), coll->second.end());
      merged = eps0_extension(ta, canonicalize(std::move(merged)));
      if (lab.lo == lab.hi) {
        pending.push_back({lab, merged});
      } else {
        SymbolLabel open = lab;
        open.hi_open = true;
        pending.push_back({open, base});
        pending.push_back({SymbolLabel{lab.symbol, B, B, false, false}, merged});
      }
      point_obs.erase(coll);
    } else {
      pending.push_back({lab, base});
    }
    for (auto& [str, atoms] : chained)
      pending.push_back({SymbolLabel{str, lab.lo, lab.hi, lab.lo_open, lab.hi_open},
                         eps0_extension(ta, canonicalize(std::move(atoms)))});
  }
  for (auto& [str, atoms] : point_obs)
    pending.push_back({SymbolLabel{str, B, B, false, false},
                       eps0_extension(ta, canonicalize(std::move(atoms)))});
  return pending;
}

}  // namespace obs_detail

/// Compile the deterministic basic observer from the timed abstraction by
/// worklist closure over blank and symbol transitions.
inline ObserverAutomaton build_observer(const TimedAutomaton& ta, int max_states = 100000) {
  ObserverAutomaton O;
  O.ta = ta;

  std::map<std::string, int> index;
  std::deque<int> work;
  auto intern = [&](const AtomSet& s) {
    std::string key = atom_set_str(s);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    if (static_cast<int>(O.states.size()) >= max_states)
      throw StateExplosionError("observer exceeds the configured state cap");
    O.states.push_back(s);
    O.edges.emplace_back();
    O.blank_of.emplace_back();
    index[key] = static_cast<int>(O.states.size()) - 1;
    work.push_back(static_cast<int>(O.states.size()) - 1);
    return static_cast<int>(O.states.size()) - 1;
  };

  AtomSet s0;
  for (const auto& q : ta.initial) s0.push_back(TimedAtom{q, Rational(0), Rational(0)});
  O.initial = intern(eps0_extension(ta, canonicalize(std::move(s0))));

  while (!work.empty()) {
    int si = work.front();
    work.pop_front();
    const AtomSet s = O.states[si];
    auto B = blank_min(ta, s);
    O.blank_of[si] = B;
    if (!B) continue;  // terminal: nothing more can be anticipated
    for (auto& p : obs_detail::expand_state(ta, s, *B)) {
      int target = intern(p.succ);  // may grow O.edges
      O.edges[si].push_back(ObserverAutomaton::Edge{p.label, target});
    }
  }
  return O;
}

// ---------------------------------------------------------------------------
// Runtime

struct TimeRobustTube {
  TAState q;
  double lo = 0.0;
  double hi = 0.0;
};

/// Tubes claimed by state s at external time t since the last update.
inline std::vector<TimeRobustTube> tubes_of(const AtomSet& s, double t) {
  std::vector<TimeRobustTube> out;
  for (const auto& a : s) {
    if (a.q.eos) continue;  // beyond the simulated horizon: no tube claim
    out.push_back(TimeRobustTube{a.q, t + a.lo.to_double(), t + a.hi.to_double()});
  }
  return out;
}

struct StreamEntry {
  double time = 0.0;
  std::string symbol;      // for symbol observations
  bool is_verdict = false;
  bool verdict = false;    // for checkpoint predicate results
};

struct TraceEntry {
  double time = 0.0;
  int state = -1;
  std::string label;
};

struct RunResult {
  std::vector<TraceEntry> trace;
  bool consistent = true;
  std::string diagnosis;
};

/// Execute the observer against a timed symbol stream. The external timer
/// resets at each update; blanks fire at Blank_min; a symbol selects the
/// unique matching window label.
inline RunResult run_observer(const ObserverAutomaton& O, const std::vector<StreamEntry>& stream,
                              double horizon) {
  RunResult res;
  int state = O.initial;
  double entry_time = 0.0;
  res.trace.push_back({0.0, state, "init"});
  size_t i = 0;

  auto fail = [&](const std::string& why) {
    res.consistent = false;
    res.diagnosis = why;
    return res;
  };

  while (true) {
    auto blank = O.blank_of[state];
    double blank_at = blank ? entry_time + blank->to_double()
                            : std::numeric_limits<double>::infinity();

    bool have_sym = i < stream.size() && stream[i].time <= horizon + 1e-12;
    double sym_at = have_sym ? stream[i].time : std::numeric_limits<double>::infinity();

    if (!have_sym && (blank_at > horizon + 1e-12)) break;

    if (sym_at <= blank_at + 1e-12) {
      // Group simultaneous entries into one observation string.
      std::string str;
      bool verdict_entry = stream[i].is_verdict;
      bool verdict_val = stream[i].verdict;
      size_t j = i;
      while (j < stream.size() && std::abs(stream[j].time - sym_at) < 1e-12 &&
             stream[j].is_verdict == verdict_entry) {
        str += stream[j].symbol;
        ++j;
      }
      double elapsed = sym_at - entry_time;
      const ObserverAutomaton::Edge* match = nullptr;
      if (verdict_entry) {
        for (const auto& e : O.edges[state]) {
          auto* v = std::get_if<VerdictLabel>(&e.label);
          if (v && v->positive == verdict_val && std::abs(v->d.to_double() - elapsed) < 1e-9)
            match = &e;
        }
        if (!match)
          return fail("verdict at elapsed " + std::to_string(elapsed) +
                      " matches no refinement label of state " + std::to_string(state));
      } else {
        for (const auto& e : O.edges[state]) {
          auto* sl = std::get_if<SymbolLabel>(&e.label);
          if (sl && sl->symbol == str && sl->contains(elapsed)) match = &e;
        }
        if (!match && j > i + 1) {
          // fall back to consuming one symbol
          j = i + 1;
          str = stream[i].symbol;
          for (const auto& e : O.edges[state]) {
            auto* sl = std::get_if<SymbolLabel>(&e.label);
            if (sl && sl->symbol == str && sl->contains(elapsed)) match = &e;
          }
        }
        if (!match)
          return fail("symbol '" + str + "' at elapsed " + std::to_string(elapsed) +
                      " is outside all feasible windows of state " + std::to_string(state));
      }
      state = match->target;
      entry_time = sym_at;
      i = j;
      res.trace.push_back({entry_time, state, label_str(match->label)});
    } else {
      if (blank_at > horizon + 1e-12) break;
      const auto* be = O.blank_edge(state);
      if (!be)
        return fail("blank of " + blank->str() + " leaves no consistent hypothesis in state " +
                    std::to_string(state));
      state = be->target;
      entry_time = blank_at;
      res.trace.push_back({entry_time, state, label_str(be->label)});
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Refinement

/// Classification of one checkpoint atom: may go to the positive branch, the
/// negative branch, or both (fully latent tubes satisfy anything weakly).
struct AtomVerdict {
  bool in_positive = false;
  bool in_negative = false;
};

/// Refine the observer at a checkpoint state with an MTL formula evaluated
/// over window d: two verdict transitions are added whose targets keep only
/// the atoms weakly satisfying the formula (resp. its negation), advanced by
/// d; construction then resumes as in build_observer.
inline ObserverAutomaton refine_observer(
    const ObserverAutomaton& base, int checkpoint, const std::string& formula_text,
    const Rational& d, const std::function<AtomVerdict(const TimedAtom&)>& classify,
    int max_states = 100000) {
  ObserverAutomaton O = base;
  if (checkpoint < 0 || checkpoint >= static_cast<int>(O.states.size()))
    throw RefinementError("unknown checkpoint state");
  auto B = O.blank_of[checkpoint];
  if (d < Rational(0) || (B && d > *B) || (!B && d > Rational(0)))
    throw RefinementError("evaluation window exceeds Blank_min of the checkpoint state");

  AtomSet pos, neg;
  for (const auto& atom : O.states[checkpoint]) {
    AtomVerdict v = classify(atom);
    if (!v.in_positive && !v.in_negative)
      throw RefinementError("atom " + atom.str() + " is classified by neither the formula nor its negation");
    if (v.in_positive) pos.push_back(atom);
    if (v.in_negative) neg.push_back(atom);
  }

  std::map<std::string, int> index;
  for (size_t i = 0; i < O.states.size(); ++i) index[atom_set_str(O.states[i])] = static_cast<int>(i);
  std::deque<int> work;
  auto intern = [&](const AtomSet& s) {
    std::string key = atom_set_str(s);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    if (static_cast<int>(O.states.size()) >= max_states)
      throw StateExplosionError("observer exceeds the configured state cap");
    O.states.push_back(s);
    O.edges.emplace_back();
    O.blank_of.emplace_back(blank_min(O.ta, s));
    index[key] = static_cast<int>(O.states.size()) - 1;
    work.push_back(static_cast<int>(O.states.size()) - 1);
    return static_cast<int>(O.states.size()) - 1;
  };

  auto attach = [&](const AtomSet& branch, bool positive) {
    if (branch.empty()) return;  // unreachable branch (e.g. negation of truth)
    AtomSet target = d == Rational(0) ? canonicalize(branch) : advance(O.ta, branch, d);
    if (target.empty()) return;
    int ti = intern(target);
    O.edges[checkpoint].push_back(
        ObserverAutomaton::Edge{VerdictLabel{formula_text, d, positive}, ti});
  };
  attach(pos, true);
  attach(neg, false);

  // The verdict preempts the checkpoint's blank update; symbol windows are
  // truncated to observations strictly before d.
  auto& ces = O.edges[checkpoint];
  for (auto it = ces.begin(); it != ces.end();) {
    if (auto* bl = std::get_if<BlankLabel>(&it->label); bl && bl->a >= d && d > Rational(0)) {
      it = ces.erase(it);
      continue;
    }
    if (auto* sl = std::get_if<SymbolLabel>(&it->label); sl && d > Rational(0) && sl->hi >= d) {
      if (sl->lo > d || (sl->lo == d)) {
        it = ces.erase(it);
        continue;
      }
      sl->hi = d;
      sl->hi_open = true;
    }
    ++it;
  }

  // Resume the standard construction from any new states.
  while (!work.empty()) {
    int si = work.front();
    work.pop_front();
    const AtomSet s = O.states[si];
    auto B2 = blank_min(O.ta, s);
    O.blank_of[si] = B2;
    if (!B2) continue;
    for (auto& p : obs_detail::expand_state(O.ta, s, *B2)) {
      int target = intern(p.succ);  // may grow O.edges
      O.edges[si].push_back(ObserverAutomaton::Edge{p.label, target});
    }
  }
  return O;
}

// ---------------------------------------------------------------------------
// Serialization

inline json observer_to_json(const ObserverAutomaton& O) {
  json j;
  j["abstraction"] = timed_automaton_to_json(O.ta);
  j["initial"] = O.initial;
  j["states"] = json::array();
  for (size_t i = 0; i < O.states.size(); ++i) {
    json atoms = json::array();
    for (const auto& a : O.states[i]) {
      json aj;
      aj["q"] = a.q.eos ? json{{"eos", true}} : json{{"k", a.q.k}, {"n", a.q.n}};
      aj["lo"] = a.lo.str();
      aj["hi"] = a.hi.str();
      atoms.push_back(aj);
    }
    json st{{"id", i}, {"atoms", atoms}, {"name", atom_set_str(O.states[i])}};
    st["blank_min"] = O.blank_of[i] ? json(O.blank_of[i]->str()) : json();
    j["states"].push_back(st);
  }
  j["transitions"] = json::array();
  for (size_t i = 0; i < O.edges.size(); ++i) {
    for (const auto& e : O.edges[i]) {
      json tj{{"from", i}, {"to", e.target}, {"label", label_str(e.label)}};
      if (auto* b = std::get_if<BlankLabel>(&e.label)) {
        tj["kind"] = "blank";
        tj["a"] = b->a.str();
      } else if (auto* sl = std::get_if<SymbolLabel>(&e.label)) {
        tj["kind"] = "symbol";
        tj["symbol"] = sl->symbol;
        tj["lo"] = sl->lo.str();
        tj["hi"] = sl->hi.str();
        tj["lo_open"] = sl->lo_open;
        tj["hi_open"] = sl->hi_open;
      } else {
        auto& v = std::get<VerdictLabel>(e.label);
        tj["kind"] = "verdict";
        tj["formula"] = v.formula;
        tj["d"] = v.d.str();
        tj["positive"] = v.positive;
      }
      j["transitions"].push_back(tj);
    }
  }
  return j;
}

inline ObserverAutomaton observer_from_json(const json& j) {
  ObserverAutomaton O;
  O.ta = timed_automaton_from_json(j.at("abstraction"));
  O.initial = j.at("initial").get<int>();
  for (const auto& st : j.at("states")) {
    AtomSet s;
    for (const auto& aj : st.at("atoms")) {
      TAState q = aj.at("q").contains("eos")
                      ? TAState::EoS()
                      : TAState{aj.at("q").at("k").get<int>(), aj.at("q").at("n").get<int>(), false};
      s.push_back(TimedAtom{q, Rational::parse(aj.at("lo")), Rational::parse(aj.at("hi"))});
    }
    O.states.push_back(s);
    O.edges.emplace_back();
    O.blank_of.emplace_back(st.at("blank_min").is_null()
                                ? std::optional<Rational>()
                                : std::optional<Rational>(Rational::parse(st.at("blank_min"))));
  }
  for (const auto& tj : j.at("transitions")) {
    ObsLabel label;
    std::string kind = tj.at("kind").get<std::string>();
    if (kind == "blank") {
      label = BlankLabel{Rational::parse(tj.at("a"))};
    } else if (kind == "symbol") {
      label = SymbolLabel{tj.at("symbol").get<std::string>(), Rational::parse(tj.at("lo")),
                          Rational::parse(tj.at("hi")), tj.at("lo_open").get<bool>(),
                          tj.at("hi_open").get<bool>()};
    } else {
      label = VerdictLabel{tj.at("formula").get<std::string>(), Rational::parse(tj.at("d")),
                           tj.at("positive").get<bool>()};
    }
    O.edges[tj.at("from").get<int>()].push_back(
        ObserverAutomaton::Edge{label, tj.at("to").get<int>()});
  }
  return O;
}

inline std::string observer_to_dot(const ObserverAutomaton& O) {
  std::ostringstream os;
  os << "digraph observer {\n  rankdir=LR;\n";
  for (size_t i = 0; i < O.states.size(); ++i) {
    os << "  s" << i << " [label=\"s" << i << "\\n";
    for (const auto& a : O.states[i]) os << a.str() << "\\n";
    os << "\"" << (static_cast<int>(i) == O.initial ? ", shape=doublecircle" : "") << "];\n";
  }
  for (size_t i = 0; i < O.edges.size(); ++i)
    for (const auto& e : O.edges[i])
      os << "  s" << i << " -> s" << e.target << " [label=\"" << label_str(e.label) << "\"];\n";
  os << "}\n";
  return os.str();
}

}  // namespace hytl

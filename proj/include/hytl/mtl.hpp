#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace hytl::mtl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct HorizonError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, size_t pos)
      : std::runtime_error(msg + " at position " + std::to_string(pos)), position(pos) {}
  size_t position;
};

/// Interval attached to a temporal operator. Endpoints may be open.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_open = false;
  bool hi_open = false;
};

/// Half-space predicate over one coordinate: x_j >= c or x_j <= c.
/// Coordinates are 0-based internally; the surface syntax x1, x2, ... is 1-based.
struct AtomicPredicate {
  int coord = 0;
  double threshold = 0.0;
  bool ge = true;
};

enum class Op { True, Atom, Not, And, Or, Until, Eventually, Always };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  Op op;
  AtomicPredicate atom;         // Atom
  Interval interval;            // Until / Eventually / Always
  FormulaPtr lhs, rhs;          // rhs only for And / Or / Until

  static FormulaPtr make_true() { return std::make_shared<Formula>(Formula{Op::True, {}, {}, nullptr, nullptr}); }
  static FormulaPtr make_atom(AtomicPredicate p) {
    return std::make_shared<Formula>(Formula{Op::Atom, p, {}, nullptr, nullptr});
  }
  static FormulaPtr make_not(FormulaPtr f) {
    return std::make_shared<Formula>(Formula{Op::Not, {}, {}, std::move(f), nullptr});
  }
  static FormulaPtr make_and(FormulaPtr a, FormulaPtr b) {
    return std::make_shared<Formula>(Formula{Op::And, {}, {}, std::move(a), std::move(b)});
  }
  static FormulaPtr make_or(FormulaPtr a, FormulaPtr b) {
    return std::make_shared<Formula>(Formula{Op::Or, {}, {}, std::move(a), std::move(b)});
  }
  static FormulaPtr make_until(Interval i, FormulaPtr a, FormulaPtr b) {
    return std::make_shared<Formula>(Formula{Op::Until, {}, i, std::move(a), std::move(b)});
  }
  static FormulaPtr make_eventually(Interval i, FormulaPtr f) {
    return std::make_shared<Formula>(Formula{Op::Eventually, {}, i, std::move(f), nullptr});
  }
  static FormulaPtr make_always(Interval i, FormulaPtr f) {
    return std::make_shared<Formula>(Formula{Op::Always, {}, i, std::move(f), nullptr});
  }
};

inline void collect_coords(const FormulaPtr& f, std::set<int>& out) {
  if (!f) return;
  if (f->op == Op::Atom) out.insert(f->atom.coord);
  collect_coords(f->lhs, out);
  collect_coords(f->rhs, out);
}

/// Set of coordinates referenced by atoms of the formula.
inline std::set<int> coords_used(const FormulaPtr& f) {
  std::set<int> s;
  collect_coords(f, s);
  return s;
}

/// Upper bound on how far past the evaluation time the formula looks.
inline double horizon(const FormulaPtr& f) {
  if (!f) return 0.0;
  switch (f->op) {
    case Op::True:
    case Op::Atom:
      return 0.0;
    case Op::Not:
      return horizon(f->lhs);
    case Op::And:
    case Op::Or:
      return std::max(horizon(f->lhs), horizon(f->rhs));
    case Op::Until:
      return f->interval.hi + std::max(horizon(f->lhs), horizon(f->rhs));
    case Op::Eventually:
    case Op::Always:
      return f->interval.hi + horizon(f->lhs);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Printing (canonical form)

namespace detail {

inline std::string num_str(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string interval_str(const Interval& i) {
  std::string s;
  s += i.lo_open ? '(' : '[';
  s += num_str(i.lo);
  s += ',';
  s += num_str(i.hi);
  s += i.hi_open ? ')' : ']';
  return s;
}

inline int precedence(Op op) {
  switch (op) {
    case Op::True:
    case Op::Atom:
      return 0;
    case Op::Not:
    case Op::Eventually:
    case Op::Always:
      return 1;
    case Op::Until:
      return 2;
    case Op::And:
      return 3;
    case Op::Or:
      return 4;
  }
  return 5;
}

}  // namespace detail

inline std::string print(const FormulaPtr& f);

namespace detail {
inline std::string print_operand(const FormulaPtr& f, int parent_prec) {
  std::string s = print(f);
  if (precedence(f->op) > parent_prec) return "(" + s + ")";
  return s;
}
}  // namespace detail

inline std::string print(const FormulaPtr& f) {
  using namespace detail;
  switch (f->op) {
    case Op::True:
      return "true";
    case Op::Atom: {
      const auto& a = f->atom;
      return "x" + std::to_string(a.coord + 1) + (a.ge ? " >= " : " <= ") + num_str(a.threshold);
    }
    case Op::Not:
      return "!(" + print(f->lhs) + ")";
    case Op::And:
      return print_operand(f->lhs, precedence(Op::And)) + " & " +
             print_operand(f->rhs, precedence(Op::And) - 1);
    case Op::Or:
      return print_operand(f->lhs, precedence(Op::Or)) + " | " +
             print_operand(f->rhs, precedence(Op::Or) - 1);
    case Op::Until:
      return print_operand(f->lhs, precedence(Op::Until) - 1) + " U" + interval_str(f->interval) +
             " " + print_operand(f->rhs, precedence(Op::Until) - 1);
    case Op::Eventually:
      return "F" + interval_str(f->interval) + "(" + print(f->lhs) + ")";
    case Op::Always:
      return "G" + interval_str(f->interval) + "(" + print(f->lhs) + ")";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Parsing (recursive descent)

namespace detail {

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  FormulaPtr parse() {
    FormulaPtr f = parse_or();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing input");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool peek_word(const char* w) {
    skip_ws();
    size_t n = std::strlen(w);
    if (text_.compare(pos_, n, w) != 0) return false;
    char after = pos_ + n < text_.size() ? text_[pos_ + n] : '\0';
    return !std::isalnum(static_cast<unsigned char>(after));
  }

  double parse_number() {
    skip_ws();
    size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
    bool digits = false;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
      digits = true;
      ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (!digits) fail("expected a number");
    return std::stod(text_.substr(start, pos_ - start));
  }

  Interval parse_interval() {
    skip_ws();
    Interval iv;
    if (eat('[')) iv.lo_open = false;
    else if (eat('(')) iv.lo_open = true;
    else fail("expected '[' or '(' to open an interval");
    iv.lo = parse_number();
    if (!eat(',')) fail("expected ',' in interval");
    iv.hi = parse_number();
    if (eat(']')) iv.hi_open = false;
    else if (eat(')')) iv.hi_open = true;
    else fail("expected ']' or ')' to close an interval");
    if (iv.lo < 0 || iv.hi < iv.lo) fail("malformed interval");
    return iv;
  }

  FormulaPtr parse_or() {
    FormulaPtr f = parse_and();
    while (eat('|')) f = Formula::make_or(f, parse_and());
    return f;
  }

  FormulaPtr parse_and() {
    FormulaPtr f = parse_until();
    while (eat('&')) f = Formula::make_and(f, parse_until());
    return f;
  }

  FormulaPtr parse_until() {
    FormulaPtr f = parse_unary();
    for (;;) {
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == 'U') {
        ++pos_;
        Interval iv = parse_interval();
        f = Formula::make_until(iv, f, parse_unary());
      } else {
        break;
      }
    }
    return f;
  }

  FormulaPtr parse_unary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '!') {
      ++pos_;
      return Formula::make_not(parse_unary());
    }
    if (c == 'F' || c == 'G') {
      ++pos_;
      Interval iv = parse_interval();
      FormulaPtr child = parse_unary();
      return c == 'F' ? Formula::make_eventually(iv, child) : Formula::make_always(iv, child);
    }
    if (c == '(') {
      ++pos_;
      FormulaPtr f = parse_or();
      if (!eat(')')) fail("expected ')'");
      return f;
    }
    if (peek_word("true")) {
      pos_ += 4;
      return Formula::make_true();
    }
    if (c == 'x') {
      ++pos_;
      size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ == start) fail("expected coordinate index after 'x'");
      int coord = std::stoi(text_.substr(start, pos_ - start));
      if (coord < 1) fail("coordinate indices are 1-based");
      skip_ws();
      bool ge;
      if (text_.compare(pos_, 2, ">=") == 0) ge = true;
      else if (text_.compare(pos_, 2, "<=") == 0) ge = false;
      else fail("expected '>=' or '<='");
      pos_ += 2;
      double thr = parse_number();
      return Formula::make_atom(AtomicPredicate{coord - 1, thr, ge});
    }
    fail("unexpected token");
  }

  const std::string& text_;
  size_t pos_ = 0;
};

}  // namespace detail

inline FormulaPtr parse(const std::string& text) { return detail::Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Signals and semantics

/// Signed distance from x to the half-space of the predicate: positive inside.
inline double signed_dist(const std::vector<double>& x, const AtomicPredicate& p) {
  if (p.coord < 0 || p.coord >= static_cast<int>(x.size()))
    throw std::out_of_range("predicate coordinate out of range");
  return p.ge ? x[p.coord] - p.threshold : p.threshold - x[p.coord];
}

/// Signed distance for a general unit-normal half-space w.x >= c.
inline double signed_dist(const std::vector<double>& x, const std::vector<double>& w, double c) {
  double dot = 0, nrm = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    dot += w[i] * x[i];
    nrm += w[i] * w[i];
  }
  return (dot - c) / std::sqrt(nrm);
}

/// A trajectory segment sampled on the uniform grid k*dt, k = 0..n-1.
struct SampledSignal {
  double dt = 0.05;
  std::vector<std::vector<double>> samples;

  double hor() const { return samples.empty() ? 0.0 : dt * (samples.size() - 1); }
  int last_index() const { return static_cast<int>(samples.size()) - 1; }
};

enum class View { Strong, Weak };

inline View flip(View v) { return v == View::Strong ? View::Weak : View::Strong; }

struct SatResult {
  bool sat = false;
  bool boundary = false;
};

namespace detail {

// Grid index range of the dense window [lo,hi] (with openness flags):
// endpoints are snapped outward to the enclosing grid points so the dense
// min/max is over-approximated; an endpoint that lies exactly on the grid is
// kept exact, and an exactly-on-grid open endpoint excludes that point.
inline std::pair<int, int> window_indices(double lo, bool lo_open, double hi, bool hi_open,
                                          double dt) {
  const double tol = dt * 1e-9;
  int k_lo = static_cast<int>(std::floor(lo / dt + 1e-9));
  int k_hi = static_cast<int>(std::ceil(hi / dt - 1e-9));
  if (lo_open && std::abs(k_lo * dt - lo) <= tol) ++k_lo;
  if (hi_open && std::abs(k_hi * dt - hi) <= tol) --k_hi;
  return {k_lo, k_hi};
}

inline int snap_index(double tau, double dt) {
  return static_cast<int>(std::floor(tau / dt + 0.5));
}

// Classical robustness on grid indices; every touched index must be in [0, n-1].
inline double rob(const SampledSignal& sig, const FormulaPtr& f, int k) {
  if (k < 0 || k > sig.last_index())
    throw HorizonError("evaluation time outside the sampled horizon");
  switch (f->op) {
    case Op::True:
      return kInf;
    case Op::Atom:
      return signed_dist(sig.samples[k], f->atom);
    case Op::Not:
      return -rob(sig, f->lhs, k);
    case Op::And:
      return std::min(rob(sig, f->lhs, k), rob(sig, f->rhs, k));
    case Op::Or:
      return std::max(rob(sig, f->lhs, k), rob(sig, f->rhs, k));
    case Op::Eventually: {
      auto [a, b] = window_indices(k * sig.dt + f->interval.lo, f->interval.lo_open,
                                   k * sig.dt + f->interval.hi, f->interval.hi_open, sig.dt);
      if (b > sig.last_index() || a < 0) throw HorizonError("temporal window exceeds horizon");
      double best = -kInf;
      for (int i = a; i <= b; ++i) best = std::max(best, rob(sig, f->lhs, i));
      return best;
    }
    case Op::Always: {
      auto [a, b] = window_indices(k * sig.dt + f->interval.lo, f->interval.lo_open,
                                   k * sig.dt + f->interval.hi, f->interval.hi_open, sig.dt);
      if (b > sig.last_index() || a < 0) throw HorizonError("temporal window exceeds horizon");
      double worst = kInf;
      for (int i = a; i <= b; ++i) worst = std::min(worst, rob(sig, f->lhs, i));
      return worst;
    }
    case Op::Until: {
      auto [a, b] = window_indices(k * sig.dt + f->interval.lo, f->interval.lo_open,
                                   k * sig.dt + f->interval.hi, f->interval.hi_open, sig.dt);
      if (b > sig.last_index() || a < 0) throw HorizonError("temporal window exceeds horizon");
      double best = -kInf;
      for (int i = a; i <= b; ++i) {
        double v = rob(sig, f->rhs, i);
        for (int j = k; j < i; ++j) v = std::min(v, rob(sig, f->lhs, j));
        best = std::max(best, v);
      }
      return best;
    }
  }
  return 0.0;
}

// Extended semantics: indices below 0 are permitted (atoms evaluate to -inf in
// the strong view, +inf in the weak view); indices above the horizon are errors.
inline double ext_rob(const SampledSignal& sig, const FormulaPtr& f, int k, View view) {
  switch (f->op) {
    case Op::True:
      return kInf;
    case Op::Atom:
      if (k < 0) return view == View::Strong ? -kInf : kInf;
      if (k > sig.last_index()) throw HorizonError("evaluation time outside the sampled horizon");
      return signed_dist(sig.samples[k], f->atom);
    case Op::Not:
      return -ext_rob(sig, f->lhs, k, flip(view));
    case Op::And:
      return std::min(ext_rob(sig, f->lhs, k, view), ext_rob(sig, f->rhs, k, view));
    case Op::Or:
      return std::max(ext_rob(sig, f->lhs, k, view), ext_rob(sig, f->rhs, k, view));
    case Op::Eventually: {
      auto [a, b] = window_indices(k * sig.dt + f->interval.lo, f->interval.lo_open,
                                   k * sig.dt + f->interval.hi, f->interval.hi_open, sig.dt);
      if (b > sig.last_index()) throw HorizonError("temporal window exceeds horizon");
      double best = -kInf;
      for (int i = a; i <= b; ++i) best = std::max(best, ext_rob(sig, f->lhs, i, view));
      return best;
    }
    case Op::Always: {
      auto [a, b] = window_indices(k * sig.dt + f->interval.lo, f->interval.lo_open,
                                   k * sig.dt + f->interval.hi, f->interval.hi_open, sig.dt);
      if (b > sig.last_index()) throw HorizonError("temporal window exceeds horizon");
      double worst = kInf;
      for (int i = a; i <= b; ++i) worst = std::min(worst, ext_rob(sig, f->lhs, i, view));
      return worst;
    }
    case Op::Until:
      throw std::invalid_argument("extended semantics are defined for the (F,G)-fragment only");
  }
  return 0.0;
}

}  // namespace detail

/// Classical robustness degree of phi at clock time tau (tau on the grid).
inline double robustness(const SampledSignal& sig, const FormulaPtr& f, double tau) {
  return detail::rob(sig, f, detail::snap_index(tau, sig.dt));
}

/// Extended robustness at clock time tau (tau may be negative).
inline double ext_robustness(const SampledSignal& sig, const FormulaPtr& f, double tau, View view) {
  return detail::ext_rob(sig, f, detail::snap_index(tau, sig.dt), view);
}

/// Boolean satisfaction in the given view; the zero boundary is reported unsat
/// with a flag.
inline SatResult sat(const SampledSignal& sig, const FormulaPtr& f, double tau, View view) {
  double r = ext_robustness(sig, f, tau, view);
  return SatResult{r > 0.0, r == 0.0};
}

}  // namespace hytl::mtl

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hytl/hybrid.hpp"
#include "hytl/linalg.hpp"

namespace hytl {

struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateGammaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TubeInconsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Solve A^T M + M A = -Q for symmetric M via the Kronecker linear system.
inline Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  if (!is_hurwitz(A)) throw InfeasibleError("A is not Hurwitz");
  const int n = static_cast<int>(A.rows());
  Matrix I = Matrix::Identity(n, n);
  Matrix K = Eigen::kroneckerProduct(I, A.transpose()).eval() +
             Eigen::kroneckerProduct(A.transpose(), I).eval();
  Eigen::Map<const Vector> qvec(Q.data(), n * n);
  Vector mvec = K.fullPivLu().solve(-qvec);
  Matrix M = Eigen::Map<const Matrix>(mvec.data(), n, n);
  M = 0.5 * (M + M.transpose());
  double residual = (A.transpose() * M + M * A + Q).norm();
  if (residual > 1e-8 * std::max(1.0, Q.norm()))
    throw InfeasibleError("Lyapunov residual too large");
  return M;
}

struct BisimReport {
  bool positive_definite = false;
  bool decrease_lmi = false;
  bool monotone_samples = false;
  double lambda_min_M = 0.0;
  double lambda_max_S = 0.0;
  int violations = 0;

  bool pass() const { return positive_definite && decrease_lmi && monotone_samples; }
};

/// Check that Phi_M is an autobisimulation function for dx = A x (+ anything
/// affine): M > 0, A^T M + M A <= 0, and Phi nonincreasing along sampled
/// trajectory pairs.
inline BisimReport verify_bisim(const Matrix& M, const Matrix& A, std::uint64_t seed = 7,
                                int n_pairs = 100, double tol = 1e-7) {
  BisimReport rep;
  Matrix S = A.transpose() * M + M * A;
  double scale = std::max(1.0, S.norm());
  rep.lambda_min_M = lambda_min(M);
  rep.lambda_max_S = lambda_max(S);
  rep.positive_definite = rep.lambda_min_M > 0;
  rep.decrease_lmi = rep.lambda_max_S <= 1e-9 * scale;

  const int n = static_cast<int>(A.rows());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  rep.monotone_samples = true;
  Vector b = Vector::Zero(n);
  for (int p = 0; p < n_pairs; ++p) {
    Vector x1(n), x2(n);
    for (int i = 0; i < n; ++i) {
      x1(i) = uni(rng);
      x2(i) = uni(rng);
    }
    double prev = std::numeric_limits<double>::infinity();
    for (double t = 0.0; t <= 2.0; t += 0.1) {
      double phi = bisim_dist(M, affine_flow(A, b, x1, t), affine_flow(A, b, x2, t));
      if (phi > prev + tol) {
        rep.monotone_samples = false;
        ++rep.violations;
        break;
      }
      prev = phi;
    }
  }
  return rep;
}

/// Caps for optimize_M: a floor on e_j^T M e_j for the protected coordinate
/// and ceilings on chosen other coordinates.
struct MCaps {
  std::optional<double> floor;        // on the protected coordinate
  std::map<int, double> ceilings;     // coord -> max diagonal entry
  double scale_cap = 1e6;             // implicit bound when ceilings leave M unbounded
};

struct MOptResult {
  Matrix M;
  double z = 0.0;     // certified bound for the protected coordinate
  bool feasible = false;
  std::string message;
};

/// Largest z with z^2 e_j e_j^T <= M, in closed form.
inline double z_for_coord(const Matrix& M, int j) {
  Matrix Minv = M.inverse();
  return 1.0 / std::sqrt(Minv(j, j));
}

/// Maximize z_j subject to M > 0, A^T M + M A <= 0 and the diagonal caps.
///
/// Rows of A that are identically zero (constant pseudo-states) make the
/// strict Lyapunov inequality unattainable; M is built so that the decrease
/// matrix is exactly negative semidefinite: with Y the contracting block,
/// Z the constant block and s = -A_YY^{-1} A_YZ the asymptote map,
///   M = [ P, -P s; -s^T P, s^T P s + R ]
/// gives A^T M + M A = blkdiag(A_YY^T P + P A_YY, 0) in shifted coordinates.
/// P ranges over Lyapunov solutions for weighted Q; R is free diagonal weight
/// on the constant block. A deterministic coordinate search tunes the weights.
inline MOptResult optimize_M(const Matrix& A, int protected_coord, const MCaps& caps) {
  MOptResult res;
  const int n = static_cast<int>(A.rows());

  std::vector<int> Y, Z;
  for (int i = 0; i < n; ++i) {
    if (A.row(i).cwiseAbs().maxCoeff() == 0.0)
      Z.push_back(i);
    else
      Y.push_back(i);
  }
  const int ny = static_cast<int>(Y.size());
  const int nz = static_cast<int>(Z.size());

  Matrix Ayy(ny, ny), Ayz(ny, nz);
  for (int i = 0; i < ny; ++i) {
    for (int j = 0; j < ny; ++j) Ayy(i, j) = A(Y[i], Y[j]);
    for (int j = 0; j < nz; ++j) Ayz(i, j) = A(Y[i], Z[j]);
  }
  if (ny == 0 || !is_hurwitz(Ayy)) {
    res.message = "contracting block of A is not Hurwitz";
    return res;
  }
  Matrix S = nz > 0 ? Matrix(-Ayy.fullPivLu().solve(Ayz)) : Matrix(ny, 0);

  auto assemble = [&](const Vector& qw, const Vector& rw) -> Matrix {
    Matrix P = solve_lyapunov(Ayy, Matrix(qw.asDiagonal()));
    Matrix M = Matrix::Zero(n, n);
    Matrix PS = P * S;
    Matrix ZZ = S.transpose() * PS + Matrix(rw.asDiagonal());
    for (int i = 0; i < ny; ++i)
      for (int j = 0; j < ny; ++j) M(Y[i], Y[j]) = P(i, j);
    for (int i = 0; i < ny; ++i)
      for (int j = 0; j < nz; ++j) {
        M(Y[i], Z[j]) = -PS(i, j);
        M(Z[j], Y[i]) = -PS(i, j);
      }
    for (int i = 0; i < nz; ++i)
      for (int j = 0; j < nz; ++j) M(Z[i], Z[j]) = ZZ(i, j);
    return M;
  };

  // Scale a candidate to its caps and score the certified z.
  auto score = [&](const Matrix& M) -> std::optional<std::pair<double, Matrix>> {
    double s = caps.scale_cap / M.diagonal().maxCoeff();
    for (const auto& [coord, cap] : caps.ceilings)
      s = std::min(s, cap / M(coord, coord));
    if (!(s > 0) || !std::isfinite(s)) return std::nullopt;
    Matrix Ms = s * M;
    if (caps.floor && Ms(protected_coord, protected_coord) < *caps.floor - 1e-12)
      return std::nullopt;
    if (lambda_min(Ms) <= 0) return std::nullopt;
    return std::make_pair(z_for_coord(Ms, protected_coord), Ms);
  };

  Vector qw = Vector::Ones(ny), rw = Vector::Constant(std::max(nz, 1), 1e-6);
  rw.conservativeResize(nz);
  auto eval = [&](const Vector& q, const Vector& r) { return score(assemble(q, r)); };

  auto best = eval(qw, rw);
  const double factors[] = {8.0, 4.0, 2.0, 1.3};
  for (int round = 0; round < 6; ++round) {
    bool improved = false;
    for (int d = 0; d < ny + nz; ++d) {
      for (double f : factors) {
        for (double g : {f, 1.0 / f}) {
          Vector q = qw, r = rw;
          if (d < ny)
            q(d) *= g;
          else
            r(d - ny) *= g;
          auto cand = eval(q, r);
          if (cand && (!best || cand->first > best->first + 1e-12)) {
            best = cand;
            qw = q;
            rw = r;
            improved = true;
          }
        }
      }
    }
    if (!improved) break;
  }

  if (!best) {
    res.message = "no feasible scaling under the caps";
    return res;
  }
  res.M = best->second;

  // Raise the constant-block diagonals to their ceilings: rows of A are zero
  // there, so the decrease matrix is untouched, M grows in the Loewner order
  // (z can only improve), and the level sets get as tight as the caps allow.
  for (int zc : Z) {
    auto it = caps.ceilings.find(zc);
    if (it != caps.ceilings.end() && res.M(zc, zc) < it->second)
      res.M(zc, zc) = it->second;
  }
  res.z = z_for_coord(res.M, protected_coord);

  // Certify feasibility by eigenvalue checks.
  Matrix Sm = A.transpose() * res.M + res.M * A;
  double scale = std::max(1.0, Sm.norm());
  Matrix Mz = res.M - res.z * res.z *
                          (Vector::Unit(n, protected_coord) *
                           Vector::Unit(n, protected_coord).transpose());
  res.feasible = lambda_min(res.M) > 0 && lambda_max(Sm) <= 1e-9 * scale &&
                 lambda_min(Mz) >= -1e-9 * std::max(1.0, res.M.norm());
  if (!res.feasible) res.message = "eigenvalue certification failed";
  return res;
}

// ---------------------------------------------------------------------------
// Robust neighborhoods

/// Weighted distance from p to the region of a linear constraint under metric
/// M (a lower bound on the distance to any set contained in that region).
inline double constraint_dist(const Matrix& Minv, const Vector& p, const LinearConstraint& c) {
  double denom = std::sqrt(c.w.dot(Minv * c.w));
  double v = c.value(p);
  switch (c.op) {
    case Cmp::EQ: return std::abs(v) / denom;
    case Cmp::LE: return std::max(0.0, v) / denom;
    case Cmp::GE: return std::max(0.0, -v) / denom;
  }
  return 0.0;
}

/// Distance lower bound from p to a conjunction of constraints.
inline double guard_dist(const Matrix& Minv, const Vector& p,
                         const std::vector<LinearConstraint>& guard) {
  double best = 0.0;
  for (const auto& c : guard) best = std::max(best, constraint_dist(Minv, p, c));
  return best;
}

/// Radius gamma for one trajectory segment: the smallest M-distance from the
/// nominal flow to any competing guard over [0, tau_bar], capped and shrunk by
/// the safety factor.
inline double gamma_for_segment(const Location& loc, const Matrix& M, const Vector& x0,
                                const std::vector<const Event*>& competing, double tau_bar,
                                double cap, double grid = 0.05, double safety = 0.99) {
  if (competing.empty()) return cap;  // infimum over the empty set: the cap decides
  Matrix Minv = M.inverse();
  double inf_dist = std::numeric_limits<double>::infinity();
  AffineStepper stepper(loc.A, loc.b, grid);
  Vector x = x0;
  for (double tau = 0.0; tau <= tau_bar + 1e-12; tau += grid) {
    for (const Event* e : competing) inf_dist = std::min(inf_dist, guard_dist(Minv, x, e->guard));
    x = stepper.step(x);
  }
  double gamma = std::min(cap, inf_dist * safety);
  if (gamma <= 0)
    throw DegenerateGammaError("simulated trajectory touches a competing guard in " + loc.name);
  return gamma;
}

namespace detail {

/// First deterministic event fired by the location flow from x0, or nullopt if
/// none fires before search_horizon.
inline std::optional<std::pair<const Event*, double>> first_exit(
    const HybridAutomaton& ha, const Location& loc, const Vector& x0, double search_horizon,
    double grid = 0.01) {
  auto det = ha.events_from(loc.name);
  std::erase_if(det, [](const Event* e) { return !e->deterministic; });
  auto flow_from = [&](double tau) { return affine_flow(loc.A, loc.b, x0, tau); };
  AffineStepper stepper(loc.A, loc.b, grid);
  Vector xs = x0;
  for (double tau = 0.0; tau < search_horizon; tau += grid) {
    Vector xn = stepper.step(xs);
    for (const Event* e : det) {
      for (const auto& g : e->guard) {
        double v0 = g.value(xs), v1 = g.value(xn);
        if (g.op == Cmp::EQ && ((v0 < 0) != (v1 < 0) || v1 == 0.0)) {
          if (v0 == 0.0 && tau == 0.0) continue;
          double root = bisect([&](double s) { return g.value(flow_from(s)); }, tau, tau + grid,
                               1e-9);
          return std::make_pair(e, root);
        }
      }
    }
    xs = xn;
  }
  return std::nullopt;
}

}  // namespace detail

struct LeadLag {
  double lead = 0.0;
  double lag = 0.0;
};

/// Monte-Carlo lead/lag bounds: trajectories started on the boundary
/// ellipsoid of the segment ball must trigger the nominal exit event; the
/// min/max trigger times around the nominal dwell are inflated by 5%.
inline LeadLag lead_lag(const HybridAutomaton& ha, const Location& loc, const Vector& x0,
                        const std::string& exit_event, double nominal_dwell, const Matrix& M,
                        double gamma, int sample_count, std::uint64_t seed,
                        double inflation = 1.05) {
  double lo = nominal_dwell, hi = nominal_dwell;
  std::mt19937_64 rng(seed);
  double search = std::max(nominal_dwell * 4.0, nominal_dwell + 1.0);
  for (int i = 0; i < sample_count; ++i) {
    Vector xs = ellipsoid_boundary_sample(M, x0, gamma * 0.999, rng);
    auto exit = detail::first_exit(ha, loc, xs, search);
    if (!exit)
      throw TubeInconsistencyError("sampled trajectory in " + loc.name +
                                   " does not trigger any event (gamma too large)");
    if (exit->first->name != exit_event)
      throw TubeInconsistencyError("sampled trajectory triggers " + exit->first->name +
                                   " instead of " + exit_event);
    lo = std::min(lo, exit->second);
    hi = std::max(hi, exit->second);
  }
  return LeadLag{(nominal_dwell - lo) * inflation, (hi - nominal_dwell) * inflation};
}

// ---------------------------------------------------------------------------
// Coverage

struct EllipsoidBall {
  Matrix M;
  Vector center;
  double gamma = 0.0;

  bool contains(const Vector& x) const { return bisim_dist(M, x, center) < gamma; }
};

struct CoverResult {
  bool covered = true;
  std::optional<Vector> witness;
};

/// Sufficient cover check by deterministic grid + vertex sampling of a box.
inline CoverResult check_cover_box(const Box& target, const std::vector<EllipsoidBall>& balls,
                                   int density = 5) {
  const int n = static_cast<int>(target.lo.size());
  std::vector<std::vector<double>> axis(n);
  for (int i = 0; i < n; ++i) {
    if (target.hi(i) - target.lo(i) < 1e-15) {
      axis[i] = {target.lo(i)};
    } else {
      for (int k = 0; k < density; ++k)
        axis[i].push_back(target.lo(i) + (target.hi(i) - target.lo(i)) * k / (density - 1));
    }
  }
  std::vector<int> idx(n, 0);
  for (;;) {
    Vector p(n);
    for (int i = 0; i < n; ++i) p(i) = axis[i][idx[i]];
    bool inside = false;
    for (const auto& b : balls) inside = inside || b.contains(p);
    if (!inside) return CoverResult{false, p};
    int i = 0;
    while (i < n && ++idx[i] == static_cast<int>(axis[i].size())) idx[i++] = 0;
    if (i == n) break;
  }
  return CoverResult{};
}

/// Cover check for an ellipsoidal target: center plus boundary samples.
inline CoverResult check_cover_ball(const EllipsoidBall& target,
                                    const std::vector<EllipsoidBall>& balls, int samples = 200,
                                    std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  auto test = [&](const Vector& p) -> bool {
    for (const auto& b : balls)
      if (b.contains(p)) return true;
    return false;
  };
  if (!test(target.center)) return CoverResult{false, target.center};
  for (int i = 0; i < samples; ++i) {
    Vector p = ellipsoid_boundary_sample(target.M, target.center, target.gamma, rng);
    if (!test(p)) return CoverResult{false, p};
  }
  return CoverResult{};
}

// ---------------------------------------------------------------------------
// Per-trajectory robust data

struct SegmentRobustData {
  double gamma = 0.0;
  double tau_lead = 0.0;
  double tau_lag = 0.0;
  double gamma_hat = 0.0;
  std::vector<double> z;             // certified z per coordinate
  std::vector<double> gamma_tilde;   // gamma / z_j
};

struct RobustData {
  std::map<std::string, Matrix> M;                        // per location
  std::map<std::string, double> z_protected;              // per location (optimize runs)
  std::vector<std::vector<SegmentRobustData>> segments;   // [k][m]
  std::map<int, std::vector<int>> cover;                  // k -> {k'}
  std::map<std::string, std::vector<int>> ind;            // "k:n:event" -> {k'}
  int n_normal = 0;

  static std::string ind_key(int k, int n, const std::string& event) {
    return std::to_string(k) + ":" + std::to_string(n) + ":" + event;
  }

  const SegmentRobustData& at(int k, int m) const { return segments.at(k).at(m); }
};

inline double gamma_hat_of(double gamma, const Matrix& M) {
  double lmin = lambda_min(M);
  if (lmin <= 0) throw InfeasibleError("M is not positive definite");
  return gamma / std::sqrt(lmin);
}

inline json robust_data_to_json(const RobustData& rd) {
  json j;
  j["n_normal"] = rd.n_normal;
  j["M"] = json::object();
  for (const auto& [loc, M] : rd.M) j["M"][loc] = to_json(M);
  j["z_protected"] = rd.z_protected;
  j["segments"] = json::array();
  for (const auto& traj : rd.segments) {
    json ts = json::array();
    for (const auto& s : traj) {
      ts.push_back({{"gamma", s.gamma},
                    {"tau_lead", s.tau_lead},
                    {"tau_lag", s.tau_lag},
                    {"gamma_hat", s.gamma_hat},
                    {"z", s.z},
                    {"gamma_tilde_per_coord", s.gamma_tilde}});
    }
    j["segments"].push_back(ts);
  }
  json cov = json::object();
  for (const auto& [k, ks] : rd.cover) cov[std::to_string(k)] = ks;
  j["cover"] = cov;
  j["ind"] = rd.ind;
  return j;
}

inline RobustData robust_data_from_json(const json& j) {
  RobustData rd;
  rd.n_normal = j.at("n_normal").get<int>();
  for (const auto& [loc, m] : j.at("M").items()) rd.M[loc] = matrix_from_json(m);
  if (j.contains("z_protected"))
    rd.z_protected = j.at("z_protected").get<std::map<std::string, double>>();
  for (const auto& ts : j.at("segments")) {
    std::vector<SegmentRobustData> v;
    for (const auto& s : ts) {
      SegmentRobustData d;
      d.gamma = s.at("gamma").get<double>();
      d.tau_lead = s.at("tau_lead").get<double>();
      d.tau_lag = s.at("tau_lag").get<double>();
      d.gamma_hat = s.at("gamma_hat").get<double>();
      d.z = s.at("z").get<std::vector<double>>();
      d.gamma_tilde = s.at("gamma_tilde_per_coord").get<std::vector<double>>();
      v.push_back(std::move(d));
    }
    rd.segments.push_back(std::move(v));
  }
  for (const auto& [k, ks] : j.at("cover").items())
    rd.cover[std::stoi(k)] = ks.get<std::vector<int>>();
  rd.ind = j.at("ind").get<std::map<std::string, std::vector<int>>>();
  return rd;
}

}  // namespace hytl

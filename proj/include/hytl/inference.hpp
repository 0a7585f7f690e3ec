#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hytl/linalg.hpp"
#include "hytl/mtl.hpp"

namespace hytl {

/// gamma_hat = gamma * ||M^{-1/2}|| = gamma / sqrt(lambda_min(M)).
inline double gamma_hat(double gamma, const Matrix& M) {
  double lmin = lambda_min(M);
  if (lmin <= 0) throw std::domain_error("M is not positive definite");
  return gamma / std::sqrt(lmin);
}

/// A labeled time-robust tube segment, anchored at external time t = 0:
/// clock time ranges over [lo, hi] (lo may be negative).
struct LabeledTube {
  int k = 0;
  int m = 0;
  double lo = 0.0;
  double hi = 0.0;
  int label = +1;  // +1 desired, -1 undesired
};

/// Evaluation data for the tube of segment (k,m): the nominal extended flow
/// and the applicable perturbation bounds.
struct TubeEvalData {
  mtl::SampledSignal nominal;
  double gamma = 0.0;
  double gamma_hat = 0.0;
  std::vector<double> gamma_tilde;  // per coordinate; 0 = no certified z
};

using TubeContext = std::map<std::pair<int, int>, TubeEvalData>;

/// Perturbation bound applicable to the formula on this tube: the coordinate
/// bound gamma_tilde when the formula reads exactly one certified coordinate,
/// else gamma_hat.
inline double applicable_gamma(const TubeEvalData& data, const mtl::FormulaPtr& phi) {
  auto coords = mtl::coords_used(phi);
  if (coords.size() == 1) {
    int j = *coords.begin();
    if (j < static_cast<int>(data.gamma_tilde.size()) && data.gamma_tilde[j] > 0)
      return data.gamma_tilde[j];
  }
  return data.gamma_hat;
}

/// Margin MG of a labeled tube: the minimum over the tube's clock window of
/// the weak extended robustness of the nominal trajectory (of the formula for
/// label +1, of its negation for label -1), minus the perturbation bound.
inline double margin(const LabeledTube& tube, const mtl::FormulaPtr& phi, const TubeContext& ctx) {
  const TubeEvalData& data = ctx.at({tube.k, tube.m});
  mtl::FormulaPtr f = tube.label > 0 ? phi : mtl::Formula::make_not(phi);
  double g = applicable_gamma(data, phi);
  const double dt = data.nominal.dt;
  int k_lo = static_cast<int>(std::floor(tube.lo / dt + 1e-9));
  int k_hi = static_cast<int>(std::ceil(tube.hi / dt - 1e-9));
  double worst = mtl::kInf;
  for (int k = k_lo; k <= k_hi; ++k)
    worst = std::min(worst, mtl::ext_robustness(data.nominal, f, k * dt, mtl::View::Weak));
  return worst - g;
}

inline constexpr double kMarginStrict = 1e-9;

/// Cost J = sum of zeta over tubes whose margin is not (strictly) positive.
inline double cost(const std::vector<LabeledTube>& tubes, const mtl::FormulaPtr& phi, double zeta,
                   const TubeContext& ctx) {
  double j = 0;
  for (const auto& t : tubes)
    if (margin(t, phi, ctx) < kMarginStrict) j += zeta;
  return j;
}

// ---------------------------------------------------------------------------
// Particle swarm search over (F,G)-primitive templates and two-term combos

struct SearchConfig {
  int swarm = 40;
  int iterations = 200;
  double inertia = 0.729;
  double cognitive = 1.494;
  double social = 1.494;
  double zeta = 10.0;
  std::uint64_t seed = 1;
  std::vector<int> coords{0};
  double window_max = 10.0;        // upper bound for interval endpoints
  double window_min_width = 0.0;
  double threshold_slack = 0.1;    // fraction of the observed data range
  bool try_pairs = true;           // grow to two-term connectives if needed
};

struct SearchReport {
  mtl::FormulaPtr formula;
  std::string formula_text;
  double cost = std::numeric_limits<double>::infinity();
  double min_margin = -std::numeric_limits<double>::infinity();
  std::vector<double> margins;
  bool zero_cost = false;
  int templates_tried = 0;
  long long wall_ms = 0;
};

namespace pso_detail {

struct Shape {
  bool always = true;  // G vs F
  bool ge = true;
  int coord = 0;
};

inline mtl::FormulaPtr instantiate(const Shape& s, double a, double b, double c) {
  mtl::Interval iv{a, b, false, false};
  auto atom = mtl::Formula::make_atom(mtl::AtomicPredicate{s.coord, c, s.ge});
  return s.always ? mtl::Formula::make_always(iv, atom) : mtl::Formula::make_eventually(iv, atom);
}

struct Fitness {
  double cost = std::numeric_limits<double>::infinity();
  double min_margin = -std::numeric_limits<double>::infinity();

  bool better_than(const Fitness& o) const {
    if (cost != o.cost) return cost < o.cost;
    return min_margin > o.min_margin;
  }
};

}  // namespace pso_detail

/// PSO over the continuous parameters of a fixed structural template.
/// Deterministic under the seed: every particle owns its own random stream.
template <typename Builder>
pso_detail::Fitness pso_optimize(const std::vector<LabeledTube>& tubes, const TubeContext& ctx,
                                 const SearchConfig& cfg, int dim,
                                 const std::vector<std::pair<double, double>>& bounds,
                                 const std::function<void(std::vector<double>&)>& repair,
                                 const Builder& build, std::vector<double>& best_out,
                                 std::uint64_t stream) {
  std::vector<std::mt19937_64> rngs;
  for (int p = 0; p < cfg.swarm; ++p) rngs.emplace_back(mix_seed(cfg.seed, stream * 1000 + p));

  auto fitness = [&](const std::vector<double>& x) {
    mtl::FormulaPtr phi = build(x);
    pso_detail::Fitness f;
    f.cost = 0;
    f.min_margin = mtl::kInf;
    for (const auto& t : tubes) {
      double mg = margin(t, phi, ctx);
      if (mg < kMarginStrict) f.cost += cfg.zeta;
      f.min_margin = std::min(f.min_margin, mg);
    }
    return f;
  };

  std::vector<std::vector<double>> xs(cfg.swarm, std::vector<double>(dim));
  std::vector<std::vector<double>> vs(cfg.swarm, std::vector<double>(dim, 0.0));
  std::vector<std::vector<double>> pbest = xs;
  std::vector<pso_detail::Fitness> pfit(cfg.swarm);
  pso_detail::Fitness gfit;
  std::vector<double> gbest(dim);

  for (int p = 0; p < cfg.swarm; ++p) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int d = 0; d < dim; ++d)
      xs[p][d] = bounds[d].first + (bounds[d].second - bounds[d].first) * uni(rngs[p]);
    repair(xs[p]);
    pbest[p] = xs[p];
    pfit[p] = fitness(xs[p]);
    if (pfit[p].better_than(gfit)) {
      gfit = pfit[p];
      gbest = xs[p];
    }
  }

  for (int it = 0; it < cfg.iterations; ++it) {
    for (int p = 0; p < cfg.swarm; ++p) {
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      for (int d = 0; d < dim; ++d) {
        double r1 = uni(rngs[p]), r2 = uni(rngs[p]);
        vs[p][d] = cfg.inertia * vs[p][d] + cfg.cognitive * r1 * (pbest[p][d] - xs[p][d]) +
                   cfg.social * r2 * (gbest[d] - xs[p][d]);
        xs[p][d] += vs[p][d];
        xs[p][d] = std::clamp(xs[p][d], bounds[d].first, bounds[d].second);
      }
      repair(xs[p]);
      auto f = fitness(xs[p]);
      if (f.better_than(pfit[p])) {
        pfit[p] = f;
        pbest[p] = xs[p];
      }
      if (f.better_than(gfit)) {
        gfit = f;
        gbest = xs[p];
      }
    }
  }
  best_out = gbest;
  return gfit;
}

/// Search the template schedule (primitives, then two-term connectives) for a
/// zero-cost formula, smallest structure first; ties broken by the largest
/// minimum margin.
inline SearchReport pso_search(const std::vector<LabeledTube>& tubes, const TubeContext& ctx,
                               const SearchConfig& cfg) {
  auto t_start = std::chrono::steady_clock::now();
  SearchReport best;

  // Observed data range per coordinate over the involved tubes.
  std::map<int, std::pair<double, double>> range;
  for (const auto& t : tubes) {
    const auto& sig = ctx.at({t.k, t.m}).nominal;
    for (const auto& sample : sig.samples)
      for (int j = 0; j < static_cast<int>(sample.size()); ++j) {
        auto it = range.find(j);
        if (it == range.end())
          range[j] = {sample[j], sample[j]};
        else {
          it->second.first = std::min(it->second.first, sample[j]);
          it->second.second = std::max(it->second.second, sample[j]);
        }
      }
  }

  double dt = tubes.empty() ? 0.05 : ctx.at({tubes[0].k, tubes[0].m}).nominal.dt;
  auto thr_bounds = [&](int coord) {
    auto [lo, hi] = range.at(coord);
    double slack = cfg.threshold_slack * std::max(hi - lo, 1e-9);
    return std::make_pair(lo - slack, hi + slack);
  };

  std::vector<pso_detail::Shape> shapes;
  for (int j : cfg.coords)
    for (bool always : {true, false})
      for (bool ge : {true, false}) shapes.push_back({always, ge, j});

  auto finish = [&](SearchReport& rep) {
    rep.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t_start)
                      .count();
    if (rep.formula) {
      rep.formula_text = mtl::print(rep.formula);
      rep.margins.clear();
      for (const auto& t : tubes) rep.margins.push_back(margin(t, rep.formula, ctx));
    }
    return rep;
  };

  std::uint64_t stream = 0;
  auto consider = [&](const pso_detail::Fitness& f, const mtl::FormulaPtr& phi) {
    if (f.cost < best.cost || (f.cost == best.cost && f.min_margin > best.min_margin)) {
      best.cost = f.cost;
      best.min_margin = f.min_margin;
      best.formula = phi;
      best.zero_cost = f.cost == 0.0;
    }
  };

  for (const auto& sh : shapes) {
    ++best.templates_tried;
    auto [clo, chi] = thr_bounds(sh.coord);
    std::vector<std::pair<double, double>> bounds{
        {0.0, cfg.window_max}, {0.0, cfg.window_max}, {clo, chi}};
    auto repair = [&](std::vector<double>& x) {
      if (x[0] > x[1]) std::swap(x[0], x[1]);
      x[0] = std::clamp(x[0], 0.0, cfg.window_max);
      x[1] = std::clamp(x[1], x[0], cfg.window_max);
      if (x[1] - x[0] < cfg.window_min_width) {
        x[1] = std::min(x[0] + cfg.window_min_width, cfg.window_max);
        x[0] = std::max(0.0, x[1] - cfg.window_min_width);
      }
    };
    std::vector<double> got;
    auto f = pso_optimize(
        tubes, ctx, cfg, 3, bounds, repair,
        [&](const std::vector<double>& x) { return pso_detail::instantiate(sh, x[0], x[1], x[2]); },
        got, stream++);
    consider(f, pso_detail::instantiate(sh, got[0], got[1], got[2]));
    if (best.zero_cost) return finish(best);
    (void)dt;
  }

  if (cfg.try_pairs) {
    for (size_t i = 0; i < shapes.size(); ++i) {
      for (size_t l = i; l < shapes.size(); ++l) {
        for (bool conj : {true, false}) {
          ++best.templates_tried;
          auto [c1lo, c1hi] = thr_bounds(shapes[i].coord);
          auto [c2lo, c2hi] = thr_bounds(shapes[l].coord);
          std::vector<std::pair<double, double>> bounds{{0.0, cfg.window_max},
                                                        {0.0, cfg.window_max},
                                                        {c1lo, c1hi},
                                                        {0.0, cfg.window_max},
                                                        {0.0, cfg.window_max},
                                                        {c2lo, c2hi}};
          auto repair = [&](std::vector<double>& x) {
            if (x[0] > x[1]) std::swap(x[0], x[1]);
            if (x[3] > x[4]) std::swap(x[3], x[4]);
          };
          auto build = [&](const std::vector<double>& x) {
            auto f1 = pso_detail::instantiate(shapes[i], x[0], x[1], x[2]);
            auto f2 = pso_detail::instantiate(shapes[l], x[3], x[4], x[5]);
            return conj ? mtl::Formula::make_and(f1, f2) : mtl::Formula::make_or(f1, f2);
          };
          std::vector<double> got;
          auto f = pso_optimize(tubes, ctx, cfg, 6, bounds, repair, build, got, stream++);
          consider(f, build(got));
          if (best.zero_cost) return finish(best);
        }
      }
    }
  }
  return finish(best);
}

// ---------------------------------------------------------------------------
// Prop.-5 style sampling check

struct TubeSampler {
  Matrix M;       // bisimulation metric of the segment's location
  Vector center;  // nominal (reset) initial state of the segment
  Matrix A;       // location dynamics
  Vector b;
};

struct ClassificationReport {
  int samples = 0;
  int violations = 0;
};

/// Draw random tube members (perturbed initial state in the gamma-ball, clock
/// time in the tube window) and check weak satisfaction of the formula (label
/// +1) or its negation (label -1).
inline ClassificationReport verify_classification(
    const std::vector<LabeledTube>& tubes, const mtl::FormulaPtr& phi, const TubeContext& ctx,
    const std::map<std::pair<int, int>, TubeSampler>& samplers, int n_samples,
    std::uint64_t seed) {
  ClassificationReport rep;
  for (const auto& t : tubes) {
    const auto& data = ctx.at({t.k, t.m});
    const auto& smp = samplers.at({t.k, t.m});
    mtl::FormulaPtr f = t.label > 0 ? phi : mtl::Formula::make_not(phi);
    std::mt19937_64 rng(mix_seed(seed, t.k * 1000 + t.m));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double hor = data.nominal.hor();
    for (int i = 0; i < n_samples; ++i) {
      Vector x = ellipsoid_interior_sample(smp.M, smp.center, data.gamma, rng);
      double tau = t.lo + (t.hi - t.lo) * uni(rng);
      tau = std::floor(tau / data.nominal.dt) * data.nominal.dt;  // grid member
      mtl::SampledSignal sig;
      {
        AffineStepper stepper(smp.A, smp.b, data.nominal.dt);
        sig.dt = data.nominal.dt;
        Vector xs = x;
        int n = static_cast<int>(std::ceil(hor / sig.dt - 1e-9)) + 1;
        for (int s = 0; s < n; ++s) {
          sig.samples.emplace_back(xs.data(), xs.data() + xs.size());
          xs = stepper.step(xs);
        }
      }
      ++rep.samples;
      if (mtl::ext_robustness(sig, f, tau, mtl::View::Weak) <= 0.0) ++rep.violations;
    }
  }
  return rep;
}

}  // namespace hytl

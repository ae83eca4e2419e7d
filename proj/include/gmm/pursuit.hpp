#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gmm/common.hpp"
#include "gmm/oracle.hpp"
#include "gmm/solve.hpp"
#include "gmm/univariate.hpp"

namespace gmm {

// ---------------------------------------------------------------------------
// Windows
// ---------------------------------------------------------------------------

/// Resolution window (eps1, eps2, eps3, eps4): eps1 is the univariate
/// precision and equivalence threshold, eps2 the direction spread, eps3/eps4
/// the weak/strong separation floors.
struct PursuitWindow {
  double eps1 = 0.0, eps2 = 0.0, eps3 = 0.0, eps4 = 0.0;
};

struct WellSeparatedReport {
  bool ok = false;
  bool cond1 = false, cond2 = false, cond3 = false;
  // Value of max(eps1 sqrt(n)/eps2, 6 n eps1/eps2^2), the additive error
  // Solve guarantees under eps1-accurate statistics.
  double solve_guarantee = 0.0;
};

/// Literal check of the three conditions:
///   1. max(eps1 sqrt(n)/eps2, 6 n eps1/eps2^2) <= eps
///   2. eps2/eps + eps1 << eps3
///   3. eps2/eps + eps1 + eps3 << eps4
/// with "<<" realized as the configured factor (default 100).
inline WellSeparatedReport window_well_separated_report(
    const PursuitWindow& w, double eps, int n, double factor = 100.0) {
  WellSeparatedReport rep;
  const double sn = std::sqrt(static_cast<double>(n));
  rep.solve_guarantee = std::max(w.eps1 * sn / w.eps2,
                                 6.0 * n * w.eps1 / (w.eps2 * w.eps2));
  rep.cond1 = rep.solve_guarantee <= eps;
  rep.cond2 = (w.eps2 / eps + w.eps1) * factor <= w.eps3;
  rep.cond3 = (w.eps2 / eps + w.eps1 + w.eps3) * factor <= w.eps4;
  rep.ok = rep.cond1 && rep.cond2 && rep.cond3;
  return rep;
}

inline bool window_well_separated(const PursuitWindow& w, double eps, int n,
                                  double factor = 100.0) {
  return window_well_separated_report(w, eps, n, factor).ok;
}

/// Pairwise parameter distances must all be <= eps1 or >= eps4 (strong) /
/// eps3 (weak). A single component satisfies either mode vacuously.
inline bool satisfies_window(const UnivariateGmm& fhat, const PursuitWindow& w,
                             bool strong) {
  const double hi = strong ? w.eps4 : w.eps3;
  for (int i = 0; i < fhat.k(); ++i) {
    for (int j = i + 1; j < fhat.k(); ++j) {
      const double d = param_distance(fhat.comp(i).g, fhat.comp(j).g);
      if (d > w.eps1 && d < hi) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Equivalence classes and cross-direction matching
// ---------------------------------------------------------------------------

struct EquivClasses {
  std::vector<std::vector<int>> classes;  // member component indices
  std::vector<int> representative;        // first member of each class
  std::vector<double> weight;             // aggregated weight per class
};

/// Union-find closure of D_p <= eps1 over the estimate's components.
inline EquivClasses equivalence_classes(const UnivariateGmm& fhat,
                                        double eps1) {
  const int k = fhat.k();
  std::vector<int> parent(k);
  for (int i = 0; i < k; ++i) parent[i] = i;
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      if (param_distance(fhat.comp(i).g, fhat.comp(j).g) <= eps1) {
        parent[find(i)] = find(j);
      }
    }
  }
  EquivClasses out;
  std::vector<int> class_of(k, -1);
  for (int i = 0; i < k; ++i) {
    const int root = find(i);
    int idx = -1;
    for (std::size_t c = 0; c < out.classes.size(); ++c) {
      if (find(out.classes[c].front()) == root) {
        idx = static_cast<int>(c);
        break;
      }
    }
    if (idx < 0) {
      idx = static_cast<int>(out.classes.size());
      out.classes.emplace_back();
      out.representative.push_back(i);
      out.weight.push_back(0.0);
    }
    out.classes[idx].push_back(i);
    out.weight[idx] += fhat.comp(i).w;
    class_of[i] = idx;
  }
  return out;
}

/// Matches the equivalence classes of two estimates taken along eps2-close
/// directions. Classes pair when any cross-pair of members sits within
/// 4 eps1 + 4 eps2 / eps in parameter distance; the matching must be a
/// bijection. Throws ClassCountMismatch or AmbiguousMatching otherwise.
inline std::vector<int> pair_classes(const UnivariateGmm& fu,
                                     const UnivariateGmm& fv,
                                     const PursuitWindow& w, double eps) {
  const EquivClasses cu = equivalence_classes(fu, w.eps1);
  const EquivClasses cv = equivalence_classes(fv, w.eps1);
  if (cu.classes.size() != cv.classes.size()) {
    throw ClassCountMismatch(
        "pair_classes: " + std::to_string(cu.classes.size()) + " vs " +
        std::to_string(cv.classes.size()) + " equivalence classes");
  }
  const double threshold = 4.0 * w.eps1 + 4.0 * w.eps2 / eps;
  const int kc = static_cast<int>(cu.classes.size());
  std::vector<int> match(kc, -1);
  std::vector<int> taken(kc, 0);
  for (int a = 0; a < kc; ++a) {
    int hit = -1;
    for (int b = 0; b < kc; ++b) {
      bool linked = false;
      for (int i : cu.classes[a]) {
        for (int j : cv.classes[b]) {
          if (param_distance(fu.comp(i).g, fv.comp(j).g) <= threshold) {
            linked = true;
            break;
          }
        }
        if (linked) break;
      }
      if (linked) {
        if (hit >= 0) {
          throw AmbiguousMatching("pair_classes: class " + std::to_string(a) +
                                  " matches multiple counterparts");
        }
        hit = b;
      }
    }
    if (hit < 0) {
      throw AmbiguousMatching("pair_classes: class " + std::to_string(a) +
                              " matches nothing");
    }
    match[a] = hit;
    ++taken[hit];
  }
  for (int b = 0; b < kc; ++b) {
    if (taken[b] != 1) {
      throw AmbiguousMatching("pair_classes: matching is not a bijection");
    }
  }
  return match;
}

namespace detail {

/// Nearest-root-class matching with a relative margin. The Lemma E.4 gap
/// (matched classes sit close, unmatched ones are separated by the window)
/// makes the argmin unambiguous whenever the window holds; the margin check
/// turns a violated gap into AmbiguousMatching so the driver can shift.
inline std::vector<int> match_classes_nearest(const UnivariateGmm& root,
                                              const EquivClasses& rc,
                                              const UnivariateGmm& est,
                                              const EquivClasses& ec,
                                              double margin) {
  const int kc = static_cast<int>(rc.classes.size());
  if (static_cast<int>(ec.classes.size()) != kc) {
    throw ClassCountMismatch(
        "match_classes: " + std::to_string(rc.classes.size()) + " vs " +
        std::to_string(ec.classes.size()) + " equivalence classes");
  }
  std::vector<int> match(kc, -1);
  std::vector<int> taken(kc, 0);
  for (int a = 0; a < kc; ++a) {
    double best = std::numeric_limits<double>::infinity();
    double second = best;
    int arg = -1;
    for (int b = 0; b < kc; ++b) {
      double d = std::numeric_limits<double>::infinity();
      for (int i : rc.classes[a]) {
        for (int j : ec.classes[b]) {
          d = std::min(d, param_distance(root.comp(i).g, est.comp(j).g));
        }
      }
      if (d < best) {
        second = best;
        best = d;
        arg = b;
      } else if (d < second) {
        second = d;
      }
    }
    if (kc > 1 && !(second >= margin * best)) {
      throw AmbiguousMatching("match_classes: class " + std::to_string(a) +
                              " has no margin (best " + std::to_string(best) +
                              ", second " + std::to_string(second) + ")");
    }
    match[a] = arg;
    ++taken[arg];
  }
  for (int b = 0; b < kc; ++b) {
    if (taken[b] != 1) {
      throw AmbiguousMatching("match_classes: matching is not a bijection");
    }
  }
  return match;
}

}  // namespace detail

/// Size of the largest component subset with all pairwise parameter
/// distances above eps1 (exact maximum clique; component counts are small).
inline int observed_components(const UnivariateGmm& fhat, double eps1) {
  const int k = fhat.k();
  int best = 0;
  for (unsigned mask = 1; mask < (1u << k); ++mask) {
    bool ok = true;
    for (int i = 0; i < k && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      for (int j = i + 1; j < k && ok; ++j) {
        if (!(mask & (1u << j))) continue;
        ok = param_distance(fhat.comp(i).g, fhat.comp(j).g) > eps1;
      }
    }
    if (ok) best = std::max(best, __builtin_popcount(mask));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Partition Pursuit driver
// ---------------------------------------------------------------------------

struct PursuitConfig {
  UnivariateConfig uni;

  // Window initialization: the Fig. 5 formula eps^5 delta^2 / (100 n^2)
  // underflows double-precision estimation at desk scale, so the practical
  // default starts at eps4_init and relies on shifting.
  bool faithful_eps4_init = false;
  double eps4_init = 1.0;
  double window_ratio = 6.0;

  std::size_t pool_samples = 150000;
  double pool_growth = 1.5;
  std::size_t max_pool = 600000;
  int extra_shift_budget = 0;  // shift budget is k + extra

  // Cross-direction class matching: nearest root class, accepted when the
  // runner-up is at least match_margin times farther.
  double match_margin = 2.0;

  // Random root directions tried before settling; the one whose estimate
  // observes the most components wins (ties: first drawn). A single draw can
  // land in the measure-zero-in-theory, noticeable-at-desk-precision set of
  // directions that hide a pair.
  int root_candidates = 4;

  // Reconstruction passes: pass 1 weights the pool by the root estimate's
  // 1-D class posterior; later passes re-weight by the n-D posterior of the
  // reconstructed mixture until it stabilizes. Statistics stay exact
  // linear/quadratic forms of the directions, so Solve's finite differences
  // cancel sampling error.
  int solve_passes = 50;
  double solve_pass_tol = 1e-7;  // mean |gamma change| convergence threshold
};

/// Derives (eps1, eps2, eps3) from eps4 by the fixed ratio rule used both at
/// initialization and when shifting: eps3 = eps4 / (2 rho), with the
/// condition-2/3 budgets split between eps1 and eps2.
inline PursuitWindow derive_window(double eps4, double eps, double ratio) {
  PursuitWindow w;
  w.eps4 = eps4;
  w.eps3 = eps4 / (2.0 * ratio);
  const double budget = w.eps3 / ratio;  // eps2/eps + eps1 <= budget
  w.eps1 = 0.2 * budget;
  w.eps2 = eps * 0.75 * budget;
  return w;
}

struct ProjectionSet {
  Vector r;      // unit root direction
  Matrix basis;  // orthonormal columns with sum b_i / sqrt(n) = r
  double eps2 = 0.0;

  Vector dir(int i, int j) const {
    return r + eps2 * basis.col(i) + eps2 * basis.col(j);
  }
};

struct ShiftEvent {
  PursuitWindow from, to;
  int observed_before = 0, observed_after = 0;
  std::string reason;
};

struct DirectionRun {
  int i = 0, j = 0;
  UnivariateGmm estimate;
};

struct PursuitResult {
  Gmm estimate;
  int requested_k = 0;
  int observed_k = 0;
  bool fewer_components = false;  // flags k' < k
  PursuitWindow window;
  double solve_guarantee = 0.0;
  ProjectionSet projections;
  UnivariateGmm root_estimate;
  std::vector<DirectionRun> direction_runs;
  std::vector<ShiftEvent> shift_trace;
  std::vector<std::string> warnings;
};

/// Fig. 5: project a shared sample pool onto a root direction and the n^2
/// offset directions r + eps2 (b_i + b_j), learn each projection with the
/// General Univariate Algorithm, shift the window while the root estimate
/// fails strong satisfaction, restart from any offset direction whose
/// estimate fails weak satisfaction, then match equivalence classes across
/// directions and reconstruct every class with Solve.
///
/// All directions view one pool (and one convolution noise table) per round;
/// correlated statistics make the finite differences in Solve cancel the
/// sampling error that independent streams would amplify by 1/eps2^2.
inline PursuitResult partition_pursuit(SampleOracle& oracle, int k, double eps,
                                       double delta, const PursuitConfig& cfg,
                                       std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("partition_pursuit: k < 1");
  const int n = oracle.dim();
  Rng rng(Rng::mix(seed, 0x700d1e5ULL));

  PursuitResult out;
  out.requested_k = k;

  double eps4 = cfg.faithful_eps4_init
                    ? std::pow(eps, 5) * delta * delta / (100.0 * n * n)
                    : cfg.eps4_init;
  PursuitWindow w = derive_window(eps4, eps, cfg.window_ratio);

  std::size_t pool_size = cfg.pool_samples;
  auto pool = std::make_shared<PoolProjectionSource::Pool>(
      oracle, pool_size, Rng::mix(seed, 1));

  const int shift_budget = k + cfg.extra_shift_budget;
  int shifts = 0;
  std::uint64_t run_id = 0;

  auto run_direction = [&](const Vector& dir) {
    PoolProjectionSource src(pool, dir);
    return general_univariate(src, k, w.eps1, delta, cfg.uni, ++run_id);
  };

  auto random_unit = [&]() {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.next_gaussian();
    v.normalize();
    return v;
  };

  // Root direction: try a few random draws and keep the most informative.
  Vector r = random_unit();
  {
    int best_obs = -1;
    Vector best_dir = r;
    for (int c = 0; c < std::max(cfg.root_candidates, 1); ++c) {
      const Vector cand = c == 0 ? r : random_unit();
      try {
        const GeneralResult g = run_direction(cand);
        const int obs = observed_components(g.estimate, w.eps1);
        if (obs > best_obs) {
          best_obs = obs;
          best_dir = cand;
        }
        if (obs >= k) break;  // cannot observe more than k
      } catch (const ConsensusFailure&) {
      }
    }
    r = best_dir;
  }

  auto do_shift = [&](const std::string& reason, int observed_before) {
    if (shifts >= shift_budget) {
      throw ShiftBudgetExhausted("partition_pursuit: " +
                                 std::to_string(shifts) +
                                 " shifts exhausted the budget (" + reason +
                                 ")");
    }
    ++shifts;
    ShiftEvent ev;
    ev.from = w;
    ev.reason = reason;
    ev.observed_before = observed_before;
    w = derive_window(w.eps1, eps, cfg.window_ratio);
    ev.to = w;
    out.shift_trace.push_back(ev);
    pool_size = std::min(
        static_cast<std::size_t>(pool_size * cfg.pool_growth), cfg.max_pool);
    pool = std::make_shared<PoolProjectionSource::Pool>(
        oracle, pool_size, Rng::mix(seed, 1000 + shifts));
  };

  for (;;) {  // <retry>
    ProjectionSet proj;
    proj.r = r;
    proj.basis = basis_for_direction(r, rng);
    proj.eps2 = w.eps2;

    GeneralResult root = run_direction(r);
    while (!satisfies_window(root.estimate, w, /*strong=*/true)) {
      const int before = observed_components(root.estimate, w.eps1);
      do_shift("root estimate fails strong satisfaction", before);
      proj.eps2 = w.eps2;
      root = run_direction(r);
      out.shift_trace.back().observed_after =
          observed_components(root.estimate, w.eps1);
    }

    std::vector<DirectionRun> runs;
    bool restart = false;
    for (int i = 0; i < n && !restart; ++i) {
      for (int j = i; j < n && !restart; ++j) {
        const Vector rij = proj.dir(i, j);
        GeneralResult est = run_direction(rij);
        if (!satisfies_window(est.estimate, w, /*strong=*/false)) {
          const int before = observed_components(root.estimate, w.eps1);
          r = rij.normalized();
          do_shift("direction (" + std::to_string(i) + "," +
                       std::to_string(j) + ") fails weak satisfaction",
                   before);
          restart = true;
          break;
        }
        runs.push_back({i, j, est.estimate});
      }
    }
    if (restart) continue;

    // Match every direction's classes against the root classes. Matching is
    // a consistency gate only; failure follows the weak-satisfaction path.
    const EquivClasses root_classes =
        equivalence_classes(root.estimate, w.eps1);
    const int kc = static_cast<int>(root_classes.classes.size());
    bool matched_all = true;
    std::string fail_reason;
    int fail_i = 0, fail_j = 0;
    for (const auto& runrec : runs) {
      try {
        const EquivClasses dc = equivalence_classes(runrec.estimate, w.eps1);
        detail::match_classes_nearest(root.estimate, root_classes,
                                      runrec.estimate, dc, cfg.match_margin);
      } catch (const std::exception& e) {
        matched_all = false;
        fail_reason = e.what();
        fail_i = runrec.i;
        fail_j = runrec.j;
        break;
      }
    }
    if (!matched_all) {
      const int before = observed_components(root.estimate, w.eps1);
      r = proj.dir(fail_i, fail_j).normalized();
      do_shift("class matching failed: " + fail_reason, before);
      continue;
    }

    // Reconstruction. Direction statistics are class-posterior-weighted pool
    // moments: exact linear/quadratic forms of each direction, so the Solve
    // algebra cancels the shared sampling error instead of amplifying it by
    // 1/eps2^2. Pass 1 weights by the root estimate's class posterior along
    // r; later passes re-weight by the n-D posterior of the reconstruction.
    const std::size_t m = pool->xs.size();
    std::vector<double> root_proj(m);
    for (std::size_t t = 0; t < m; ++t) root_proj[t] = r.dot(pool->xs[t]);
    std::vector<std::vector<double>> dir_proj;
    dir_proj.reserve(runs.size());
    for (const auto& runrec : runs) {
      const Vector rij = proj.dir(runrec.i, runrec.j);
      std::vector<double> p(m);
      for (std::size_t t = 0; t < m; ++t) p[t] = rij.dot(pool->xs[t]);
      dir_proj.push_back(std::move(p));
    }

    // Class posterior along the root direction.
    std::vector<std::vector<double>> gamma(m, std::vector<double>(kc, 0.0));
    {
      std::vector<double> lw(root.estimate.k());
      for (std::size_t t = 0; t < m; ++t) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < root.estimate.k(); ++c) {
          const auto& comp = root.estimate.comp(c);
          lw[c] = std::log(comp.w) + log_pdf(comp.g, root_proj[t]);
          mx = std::max(mx, lw[c]);
        }
        double z = 0.0;
        for (int c = 0; c < root.estimate.k(); ++c) {
          lw[c] = std::exp(lw[c] - mx);
          z += lw[c];
        }
        for (int h = 0; h < kc; ++h) {
          double s = 0.0;
          for (int c : root_classes.classes[h]) s += lw[c];
          gamma[t][h] = s / z;
        }
      }
    }

    std::optional<Gmm> reconstruction;
    bool degenerate_class = false;
    for (int pass = 0; pass < std::max(cfg.solve_passes, 1); ++pass) {
      std::vector<WeightedGaussian> comps;
      comps.reserve(kc);
      for (int h = 0; h < kc && !degenerate_class; ++h) {
        double wsum = 0.0;
        for (std::size_t t = 0; t < m; ++t) wsum += gamma[t][h];
        if (wsum < 30.0) {
          degenerate_class = true;
          fail_reason = "class " + std::to_string(h) +
                        " holds almost no posterior mass";
          break;
        }
        auto weighted_stats = [&](const std::vector<double>& s, double& mean,
                                  double& var) {
          double acc = 0.0, acc2 = 0.0;
          for (std::size_t t = 0; t < m; ++t) {
            acc += gamma[t][h] * s[t];
            acc2 += gamma[t][h] * s[t] * s[t];
          }
          mean = acc / wsum;
          var = std::max(acc2 / wsum - mean * mean, 0.0);
        };
        double m0, v0;
        weighted_stats(root_proj, m0, v0);
        Matrix means = Matrix::Zero(n, n), vars = Matrix::Zero(n, n);
        for (std::size_t d = 0; d < runs.size(); ++d) {
          double mm, vv;
          weighted_stats(dir_proj[d], mm, vv);
          means(runs[d].i, runs[d].j) = mm;
          means(runs[d].j, runs[d].i) = mm;
          vars(runs[d].i, runs[d].j) = vv;
          vars(runs[d].j, runs[d].i) = vv;
        }
        const SolveResult sr = solve(proj.basis, w.eps2, m0, v0, means, vars);
        const double wgt =
            pass == 0 ? root_classes.weight[h] : wsum / static_cast<double>(m);
        comps.push_back({wgt, Gaussian(sr.mu, sr.sigma)});
      }
      if (degenerate_class) break;
      double tw = 0.0;
      for (const auto& c : comps) tw += c.w;
      for (auto& c : comps) c.w /= tw;
      reconstruction = Gmm(std::move(comps));
      if (pass + 1 < std::max(cfg.solve_passes, 1)) {
        // Refresh gamma with the full n-dimensional posterior; stop once it
        // stabilizes.
        std::vector<double> lw(kc);
        double drift = 0.0;
        for (std::size_t t = 0; t < m; ++t) {
          double mx = -std::numeric_limits<double>::infinity();
          for (int h = 0; h < kc; ++h) {
            const auto& comp = reconstruction->comp(h);
            lw[h] = std::log(comp.w) + log_pdf(comp.g, pool->xs[t]);
            mx = std::max(mx, lw[h]);
          }
          double z = 0.0;
          for (int h = 0; h < kc; ++h) {
            lw[h] = std::exp(lw[h] - mx);
            z += lw[h];
          }
          for (int h = 0; h < kc; ++h) {
            const double g = lw[h] / z;
            drift += std::abs(g - gamma[t][h]);
            gamma[t][h] = g;
          }
        }
        if (drift / static_cast<double>(m * kc) < cfg.solve_pass_tol) break;
      }
    }
    if (degenerate_class) {
      const int before = observed_components(root.estimate, w.eps1);
      do_shift("reconstruction failed: " + fail_reason, before);
      continue;
    }

    out.estimate = std::move(*reconstruction);
    out.observed_k = kc;
    out.fewer_components = kc < k;
    out.window = w;
    out.solve_guarantee =
        window_well_separated_report(w, eps, n).solve_guarantee;
    out.projections = proj;
    out.root_estimate = root.estimate;
    out.direction_runs = std::move(runs);
    for (const auto& warn : root.warnings) out.warnings.push_back(warn);
    return out;
  }
}

}  // namespace gmm

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gmm/distance.hpp"
#include "gmm/model.hpp"

namespace gmm {

inline constexpr int kExhaustiveSearchLimit = 8;

// ---------------------------------------------------------------------------
// eps-statistical learnability (Def. 1.1)
// ---------------------------------------------------------------------------

struct LearnabilityReport {
  bool learnable = false;
  double min_weight = 0.0;
  double min_pairwise_tv = 1.0;
  double weight_margin = 0.0;    // min_weight - eps
  double distance_margin = 0.0;  // min_pairwise_tv - eps
};

/// True iff min weight >= eps and every pairwise component TV >= eps.
/// Pairwise distances use the Monte-Carlo estimator with a fixed budget,
/// so the verdict is deterministic for a given seed.
inline LearnabilityReport is_eps_learnable(const Gmm& f, double eps,
                                           std::size_t budget = 20000,
                                           std::uint64_t seed = 421) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::invalid_argument("is_eps_learnable: eps must be in (0,1)");
  }
  LearnabilityReport rep;
  rep.min_weight = 1.0;
  for (const auto& c : f.components()) rep.min_weight = std::min(rep.min_weight, c.w);
  rep.min_pairwise_tv = 1.0;
  for (int i = 0; i < f.k(); ++i) {
    for (int j = i + 1; j < f.k(); ++j) {
      const auto tv = gaussian_tv(f.comp(i).g, f.comp(j).g, budget,
                                  Rng::mix(seed, (i << 16) | j));
      rep.min_pairwise_tv = std::min(rep.min_pairwise_tv, tv.estimate);
    }
  }
  rep.weight_margin = rep.min_weight - eps;
  rep.distance_margin = rep.min_pairwise_tv - eps;
  rep.learnable = rep.weight_margin >= 0.0 && rep.distance_margin >= 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// eps-standard pairs (Def. 3.1)
// ---------------------------------------------------------------------------

struct StandardReport {
  bool standard = false;
  // 0 = passed; 1..4 = the failed Def. 3.1 condition; 5 = variance bound.
  int failed_condition = 0;
  std::string detail;
  // Value of the condition-4 minimum over all maps, reported even on failure.
  double condition4_value = 0.0;
};

/// Checks the four conditions of Def. 3.1 plus the sigma^2 <= 1 precondition.
/// Condition 4 minimizes over arbitrary maps pi, which decomposes into an
/// independent nearest-component choice per component of f.
inline StandardReport is_eps_standard(const UnivariateGmm& f,
                                      const UnivariateGmm& g, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::invalid_argument("is_eps_standard: eps must be in (0,1)");
  }
  StandardReport rep;
  std::ostringstream msg;

  double c4 = 0.0;
  for (const auto& a : f.components()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : g.components()) {
      best = std::min(best, std::abs(a.w - b.w) + std::abs(a.g.mu - b.g.mu) +
                                std::abs(a.g.sigma2 - b.g.sigma2));
    }
    c4 += best;
  }
  rep.condition4_value = c4;

  const auto check_one = [&](const UnivariateGmm& h, const char* name) -> int {
    for (int i = 0; i < h.k(); ++i) {
      if (h.comp(i).g.sigma2 > 1.0) {
        msg << name << " component " << i << " has variance > 1";
        return 5;
      }
    }
    for (int i = 0; i < h.k(); ++i) {
      if (h.comp(i).w < eps) {
        msg << name << " component " << i << " weight " << h.comp(i).w
            << " < eps";
        return 1;
      }
    }
    for (int i = 0; i < h.k(); ++i) {
      if (std::abs(h.comp(i).g.mu) > 1.0 / eps) {
        msg << name << " component " << i << " |mean| > 1/eps";
        return 2;
      }
    }
    for (int i = 0; i < h.k(); ++i) {
      for (int j = i + 1; j < h.k(); ++j) {
        if (param_distance(h.comp(i).g, h.comp(j).g) < eps) {
          msg << name << " components " << i << "," << j
              << " at parameter distance "
              << param_distance(h.comp(i).g, h.comp(j).g) << " < eps";
          return 3;
        }
      }
    }
    return 0;
  };

  int fail = check_one(f, "F");
  if (fail == 0) fail = check_one(g, "F'");
  if (fail == 0 && c4 < eps) {
    msg << "condition 4 discrepancy " << c4 << " < eps";
    fail = 4;
  }
  rep.failed_condition = fail;
  rep.detail = msg.str();
  rep.standard = fail == 0;
  return rep;
}

// ---------------------------------------------------------------------------
// eps-close estimates (Def. 1.2)
// ---------------------------------------------------------------------------

struct CloseReport {
  bool close = false;
  std::vector<int> permutation;  // component i of f matches permutation[i]
  bool exhaustive = true;
};

struct CloseOpts {
  std::size_t tv_budget = 20000;
  std::uint64_t seed = 991;
  double tv_tol_1d = 1e-7;
};

namespace detail {

/// Perfect matching on a boolean feasibility matrix via augmenting paths.
inline bool bipartite_perfect_matching(const std::vector<std::vector<bool>>& ok,
                                       std::vector<int>& match) {
  const int k = static_cast<int>(ok.size());
  std::vector<int> owner(k, -1);
  std::function<bool(int, std::vector<bool>&)> try_assign =
      [&](int i, std::vector<bool>& seen) -> bool {
    for (int j = 0; j < k; ++j) {
      if (ok[i][j] && !seen[j]) {
        seen[j] = true;
        if (owner[j] < 0 || try_assign(owner[j], seen)) {
          owner[j] = i;
          return true;
        }
      }
    }
    return false;
  };
  for (int i = 0; i < k; ++i) {
    std::vector<bool> seen(k, false);
    if (!try_assign(i, seen)) return false;
  }
  match.assign(k, -1);
  for (int j = 0; j < k; ++j) match[owner[j]] = j;
  return true;
}

inline bool feasibility_permutation(const std::vector<std::vector<bool>>& ok,
                                    std::vector<int>& perm, bool& exhaustive) {
  const int k = static_cast<int>(ok.size());
  if (k <= kExhaustiveSearchLimit) {
    exhaustive = true;
    std::vector<int> p(k);
    std::iota(p.begin(), p.end(), 0);
    do {
      bool good = true;
      for (int i = 0; i < k && good; ++i) good = ok[i][p[i]];
      if (good) {
        perm = p;
        return true;
      }
    } while (std::next_permutation(p.begin(), p.end()));
    return false;
  }
  exhaustive = false;
  return bipartite_perfect_matching(ok, perm);
}

}  // namespace detail

/// Def. 1.2: true iff some permutation matches weights within eps and
/// per-component TV within eps. Unequal component counts give false.
inline CloseReport is_eps_close(const Gmm& f, const Gmm& fhat, double eps,
                                const CloseOpts& opts = {}) {
  CloseReport rep;
  if (f.k() != fhat.k()) return rep;
  const int k = f.k();
  std::vector<std::vector<bool>> ok(k, std::vector<bool>(k, false));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (std::abs(f.comp(i).w - fhat.comp(j).w) > eps) continue;
      double tv;
      if (f.dim() == 1) {
        const UnivariateGmm a({{1.0, UniGaussian(f.comp(i).g.mu[0],
                                                 f.comp(i).g.sigma(0, 0))}});
        const UnivariateGmm b({{1.0, UniGaussian(fhat.comp(j).g.mu[0],
                                                 fhat.comp(j).g.sigma(0, 0))}});
        tv = stat_distance_1d(a, b, opts.tv_tol_1d);
      } else {
        tv = gaussian_tv(f.comp(i).g, fhat.comp(j).g, opts.tv_budget,
                         Rng::mix(opts.seed, (i << 16) | j))
                 .estimate;
      }
      ok[i][j] = tv <= eps;
    }
  }
  rep.close = detail::feasibility_permutation(ok, rep.permutation,
                                              rep.exhaustive);
  return rep;
}

inline CloseReport is_eps_close(const UnivariateGmm& f,
                                const UnivariateGmm& fhat, double eps,
                                const CloseOpts& opts = {}) {
  CloseReport rep;
  if (f.k() != fhat.k()) return rep;
  const int k = f.k();
  std::vector<std::vector<bool>> ok(k, std::vector<bool>(k, false));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (std::abs(f.comp(i).w - fhat.comp(j).w) > eps) continue;
      const UnivariateGmm a({{1.0, f.comp(i).g}});
      const UnivariateGmm b({{1.0, fhat.comp(j).g}});
      ok[i][j] = stat_distance_1d(a, b, opts.tv_tol_1d) <= eps;
    }
  }
  rep.close = detail::feasibility_permutation(ok, rep.permutation,
                                              rep.exhaustive);
  return rep;
}

// ---------------------------------------------------------------------------
// eps-correct subdivisions (Def. 2.3)
// ---------------------------------------------------------------------------

struct SubdivisionReport {
  bool correct = false;
  std::vector<int> pi;  // onto map from f's components to fhat's
  bool exhaustive = true;
};

namespace detail {

template <typename Model>
SubdivisionReport subdivision_search(const Model& f, const Model& fhat,
                                     double eps) {
  SubdivisionReport rep;
  const int k = f.k();
  const int kp = fhat.k();
  if (kp > k) {
    throw std::invalid_argument("is_eps_subdivision: estimate has more "
                                "components than the target");
  }
  // Feasible targets per component (parameter-distance condition).
  std::vector<std::vector<int>> feasible(k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < kp; ++j) {
      if (param_distance(f.comp(i).g, fhat.comp(j).g) <= eps) {
        feasible[i].push_back(j);
      }
    }
    if (feasible[i].empty()) return rep;
  }

  if (k > kExhaustiveSearchLimit) {
    // Greedy nearest assignment, flagged non-exhaustive.
    rep.exhaustive = false;
    std::vector<int> pi(k);
    std::vector<double> agg(kp, 0.0);
    for (int i = 0; i < k; ++i) {
      int best = -1;
      double bd = std::numeric_limits<double>::infinity();
      for (int j : feasible[i]) {
        const double d = param_distance(f.comp(i).g, fhat.comp(j).g);
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      pi[i] = best;
      agg[best] += f.comp(i).w;
    }
    for (int j = 0; j < kp; ++j) {
      if (agg[j] == 0.0 || std::abs(agg[j] - fhat.comp(j).w) > eps) return rep;
    }
    rep.correct = true;
    rep.pi = pi;
    return rep;
  }

  // Exhaustive search over onto maps with weight aggregation, pruned by the
  // per-component feasible sets.
  std::vector<int> pi(k, -1);
  std::vector<double> agg(kp, 0.0);
  std::vector<int> covered(kp, 0);
  std::function<bool(int)> rec = [&](int i) -> bool {
    if (i == k) {
      for (int j = 0; j < kp; ++j) {
        if (covered[j] == 0) return false;
        if (std::abs(agg[j] - fhat.comp(j).w) > eps) return false;
      }
      return true;
    }
    // Prune: remaining components cannot cover still-empty classes.
    int empty = 0;
    for (int j = 0; j < kp; ++j) empty += covered[j] == 0 ? 1 : 0;
    if (empty > k - i) return false;
    for (int j : feasible[i]) {
      pi[i] = j;
      agg[j] += f.comp(i).w;
      ++covered[j];
      if (rec(i + 1)) return true;
      --covered[j];
      agg[j] -= f.comp(i).w;
      pi[i] = -1;
    }
    return false;
  };
  if (rec(0)) {
    rep.correct = true;
    rep.pi = pi;
  }
  return rep;
}

}  // namespace detail

/// Def. 2.3: searches onto maps pi from f's components to fhat's; returns a
/// map satisfying both the weight-aggregation and parameter-distance
/// conditions, or none. Univariate uses D_p; high-dimensional uses
/// ||mu_i - mu_j|| + ||Sigma_i - Sigma_j||_F.
inline SubdivisionReport is_eps_subdivision(const UnivariateGmm& f,
                                            const UnivariateGmm& fhat,
                                            double eps) {
  return detail::subdivision_search(f, fhat, eps);
}

inline SubdivisionReport is_eps_subdivision(const Gmm& f, const Gmm& fhat,
                                            double eps) {
  return detail::subdivision_search(f, fhat, eps);
}

}  // namespace gmm

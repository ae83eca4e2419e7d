#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gmm/common.hpp"
#include "gmm/moments.hpp"
#include "gmm/oracle.hpp"
#include "gmm/predicates.hpp"

namespace gmm {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class SearchMode { faithful, practical };

/// The unspecified constants of the univariate machinery, gathered in one
/// block so acceptance tests can pin behavior per configuration.
struct UnivariateConstants {
  double c_big = 10.0;       // C_B in Q(eps, delta) = (eps delta)^{c_exp}/C_B
  double c_exp = 3.0;        // c_B
  double c1 = 4.0;           // R = Q / (C1 k^4)
  double c2 = 4.0;           // S = R / (C2 k^4)
  double c_schedule = 4.0;   // eps_1 = eps / (C k^{k^2})
  double alpha_exp = 4.0;    // accept tolerance alpha = eps^{alpha_exp * k}
  double chain_c = 4.0;      // chain tolerance = chain_c * k * eps_1
};

struct UnivariateConfig {
  UnivariateConstants constants;
  SearchMode mode = SearchMode::practical;

  // Sample budgets: the Q formula is clamped into [min_samples, max_samples].
  std::size_t min_samples = 2000;
  std::size_t max_samples = 400000;

  // Moment-accept tolerance is floored at alpha_noise_mult times the largest
  // sample-moment standard error, the finest discrimination the draw affords.
  double alpha_noise_mult = 3.0;

  // Consensus-chain tolerance floor (desk-scale estimates cannot certify
  // chains tighter than their statistical noise).
  double chain_floor = 0.05;

  // Schedule precisions below this switch to plain ratio spacing.
  double schedule_floor = 1e-12;
  double schedule_ratio_fallback = 4.0;

  // Practical-mode search.
  std::size_t em_subsample = 20000;
  int em_iters = 40;
  int em_restarts = 1;
  int refine_rounds = 4;
  int box_steps = 2;  // grid is +-box_steps * gamma per parameter

  // Practical-mode candidates below this variance are EM spikes chasing the
  // unbounded mixture likelihood, never genuine desk-scale components.
  double min_component_var = 0.05;

  // Faithful-mode mesh pitch; 0 means the gamma = alpha^{4k-1} formula.
  double gamma_override = 0.0;

  // Precondition guard (practical mode logs instead of failing).
  bool guard_preconditions = true;
  double guard_var_lo = 0.4;
  double guard_var_hi = 2.2;
  double guard_mean_abs = 0.25;

  // Variance floor applied when deconvolving the final estimate by 1/2.
  double deconv_var_floor = 1e-12;
};

// ---------------------------------------------------------------------------
// Window functions (Q, R, S)
// ---------------------------------------------------------------------------

struct WindowFns {
  double q, r, s;
};

/// Q = (eps delta)^{c_B} / C_B is the inverse of the Basic algorithm's sample
/// count; R = Q / (C1 k^4) and S = R / (C2 k^4) pad it for union bounds and
/// subdivision composition. The window at eps is [R(eps, delta), eps].
inline WindowFns window_fns(double eps, double delta, int k,
                            const UnivariateConstants& c = {}) {
  WindowFns w;
  const double k4 = std::pow(static_cast<double>(k), 4.0);
  w.q = std::pow(eps * delta, c.c_exp) / c.c_big;
  w.r = w.q / (c.c1 * k4);
  w.s = w.r / (c.c2 * k4);
  return w;
}

// ---------------------------------------------------------------------------
// Candidate mesh (Fig. 3 step 3)
// ---------------------------------------------------------------------------

struct MeshSpec {
  double gamma;         // grid pitch
  double weight_floor;  // eps / 2
  double param_bound;   // 2 / eps
  double min_pairwise;  // eps / 2
  int k;                // component count of the candidates
};

namespace detail {

inline bool mesh_candidate_ok(const std::vector<WeightedUni>& comps,
                              const MeshSpec& mesh) {
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (comps[i].w < mesh.weight_floor - 1e-12) return false;
    if (std::abs(comps[i].g.mu) > mesh.param_bound + 1e-12) return false;
    if (comps[i].g.sigma2 > mesh.param_bound + 1e-12) return false;
    for (std::size_t j = i + 1; j < comps.size(); ++j) {
      if (param_distance(comps[i].g, comps[j].g) <
          mesh.min_pairwise - 1e-12) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace detail

/// Enumerates the Fig. 3 candidate mesh in deterministic lexicographic order
/// (weights, then means, then variances, all multiples of gamma) and feeds
/// each candidate passing the four constraints to `fn`. Returning false from
/// `fn` stops the enumeration.
inline void enumerate_candidates(
    const MeshSpec& mesh, const std::function<bool(const UnivariateGmm&)>& fn) {
  if (mesh.gamma <= 0.0 || mesh.k < 1) {
    throw std::invalid_argument("enumerate_candidates: bad mesh");
  }
  const int k = mesh.k;
  const long max_steps = static_cast<long>(mesh.param_bound / mesh.gamma);

  // Weight grids: multiples of gamma, >= floor, summing to 1.
  std::vector<double> wgrid;
  for (long t = 1; t * mesh.gamma <= 1.0 + 1e-12; ++t) {
    const double w = t * mesh.gamma;
    if (w >= mesh.weight_floor - 1e-12) wgrid.push_back(w);
  }

  std::vector<double> ws(k), mus(k), vars(k);
  bool stop = false;

  std::function<void(int, double)> weights_rec;
  std::function<void(int)> means_rec;
  std::function<void(int)> vars_rec;

  vars_rec = [&](int i) {
    if (stop) return;
    if (i == k) {
      std::vector<WeightedUni> comps;
      comps.reserve(k);
      for (int t = 0; t < k; ++t) {
        comps.push_back({ws[t], UniGaussian(mus[t], vars[t])});
      }
      if (detail::mesh_candidate_ok(comps, mesh)) {
        if (!fn(UnivariateGmm(std::move(comps)))) stop = true;
      }
      return;
    }
    for (long t = 1; t <= max_steps && !stop; ++t) {
      vars[i] = t * mesh.gamma;
      vars_rec(i + 1);
    }
  };

  means_rec = [&](int i) {
    if (stop) return;
    if (i == k) {
      vars_rec(0);
      return;
    }
    for (long t = -max_steps; t <= max_steps && !stop; ++t) {
      mus[i] = t * mesh.gamma;
      means_rec(i + 1);
    }
  };

  weights_rec = [&](int i, double remaining) {
    if (stop) return;
    if (i == k - 1) {
      // Last weight forced by the sum-to-one constraint.
      const double w = remaining;
      const long steps = std::lround(w / mesh.gamma);
      if (std::abs(steps * mesh.gamma - w) > 1e-9) return;
      if (w < mesh.weight_floor - 1e-12) return;
      ws[k - 1] = w;
      means_rec(0);
      return;
    }
    for (double w : wgrid) {
      if (stop) return;
      if (w > remaining - (k - 1 - i) * mesh.weight_floor + 1e-12) break;
      ws[i] = w;
      weights_rec(i + 1, remaining - w);
    }
  };

  weights_rec(0, 1.0);
}

/// Materialized candidate stream (test-sized meshes only).
inline std::vector<UnivariateGmm> candidate_grid(const MeshSpec& mesh,
                                                 std::size_t limit = 1000000) {
  std::vector<UnivariateGmm> out;
  enumerate_candidates(mesh, [&](const UnivariateGmm& f) {
    out.push_back(f);
    return out.size() < limit;
  });
  return out;
}

// ---------------------------------------------------------------------------
// 1-D EM (practical-mode warm starts)
// ---------------------------------------------------------------------------

namespace detail {

struct Em1DState {
  std::vector<double> w, mu, var;
};

inline void em_iterate(const std::vector<double>& xs, Em1DState& st,
                       int iters, Rng* reseed_rng) {
  const std::size_t m = xs.size();
  const int k = static_cast<int>(st.w.size());
  std::vector<double> resp(k);
  for (int it = 0; it < iters; ++it) {
    std::vector<double> nw(k, 0.0), nmu(k, 0.0), nvar(k, 0.0);
    for (double x : xs) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < k; ++i) {
        const double d = x - st.mu[i];
        resp[i] = std::log(std::max(st.w[i], 1e-300)) -
                  0.5 * (std::log(st.var[i]) + d * d / st.var[i]);
        mx = std::max(mx, resp[i]);
      }
      double z = 0.0;
      for (int i = 0; i < k; ++i) {
        resp[i] = std::exp(resp[i] - mx);
        z += resp[i];
      }
      for (int i = 0; i < k; ++i) {
        const double r = resp[i] / z;
        nw[i] += r;
        nmu[i] += r * x;
        nvar[i] += r * x * x;
      }
    }
    for (int i = 0; i < k; ++i) {
      if (nw[i] < 1e-9) {  // collapsed component; re-seed at a data point
        if (reseed_rng) {
          st.mu[i] = xs[reseed_rng->next_u64() % m];
          st.var[i] = 1.0;
          st.w[i] = 1.0 / static_cast<double>(m);
        }
        continue;
      }
      st.mu[i] = nmu[i] / nw[i];
      st.var[i] = std::max(nvar[i] / nw[i] - st.mu[i] * st.mu[i], 1e-8);
      st.w[i] = nw[i] / static_cast<double>(m);
    }
    double tw = 0.0;
    for (int i = 0; i < k; ++i) tw += st.w[i];
    for (int i = 0; i < k; ++i) st.w[i] /= tw;
  }
}

inline Em1DState em_1d(const std::vector<double>& xs, int k, int iters,
                       int restart, std::uint64_t seed) {
  const std::size_t m = xs.size();
  Em1DState st;
  st.w.assign(k, 1.0 / k);
  st.mu.resize(k);
  st.var.resize(k);

  // Quantile-spread init, jittered per restart.
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  Rng rng(Rng::mix(seed, 0x9d8f3c2bULL + restart));
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(m);
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(m);
  for (int i = 0; i < k; ++i) {
    const std::size_t q =
        static_cast<std::size_t>((i + 0.5) / k * (m - 1));
    st.mu[i] = sorted[q] + 0.1 * std::sqrt(var) * rng.next_gaussian() *
                               (restart > 0 ? 1.0 : 0.0);
    st.var[i] = std::max(var / k, 1e-8);
  }
  em_iterate(xs, st, iters, &rng);
  return st;
}

inline Em1DState em_polish(const std::vector<double>& xs, const Em1DState& st,
                           int iters) {
  Em1DState out = st;
  em_iterate(xs, out, iters, nullptr);
  return out;
}

inline double log_likelihood(const UnivariateGmm& f,
                             const std::vector<double>& xs) {
  double total = 0.0;
  for (double x : xs) {
    double mx = -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    std::vector<double> lw(f.k());
    for (int i = 0; i < f.k(); ++i) {
      lw[i] = std::log(f.comp(i).w) + log_pdf(f.comp(i).g, x);
      mx = std::max(mx, lw[i]);
    }
    for (int i = 0; i < f.k(); ++i) acc += std::exp(lw[i] - mx);
    total += mx + std::log(acc);
  }
  return total;
}

inline std::optional<UnivariateGmm> state_to_mixture(const Em1DState& st) {
  std::vector<WeightedUni> comps;
  comps.reserve(st.w.size());
  for (std::size_t i = 0; i < st.w.size(); ++i) {
    if (!(st.w[i] > 0.0) || !(st.var[i] > 0.0)) return std::nullopt;
    comps.push_back({st.w[i], UniGaussian(st.mu[i], st.var[i])});
  }
  // Absorb the EM weight normalization residue.
  double tw = 0.0;
  for (const auto& c : comps) tw += c.w;
  for (auto& c : comps) c.w /= tw;
  return UnivariateGmm(std::move(comps));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Basic Univariate Algorithm (Fig. 3)
// ---------------------------------------------------------------------------

struct BasicResult {
  UnivariateGmm estimate;
  double best_discrepancy = 0.0;  // max over orders of |cand - sample| moment
  double alpha = 0.0;             // accept tolerance actually used
  std::size_t samples = 0;
  int components = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline double moment_discrepancy(const UnivariateGmm& cand,
                                 const std::vector<double>& target,
                                 double bail_above) {
  double worst = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d =
        std::abs(mixture_moment(cand, static_cast<int>(i) + 1) - target[i]);
    worst = std::max(worst, d);
    if (worst > bail_above) return worst;
  }
  return worst;
}

/// Coarse-to-fine box search around a warm start; candidates are snapped to
/// the mesh constraints and scored by max moment discrepancy.
inline std::optional<std::pair<UnivariateGmm, double>> refine_search(
    const Em1DState& warm, const MeshSpec& mesh,
    const std::vector<double>& target, const UnivariateConfig& cfg) {
  const int k = mesh.k;
  std::vector<double> ws = warm.w, mus = warm.mu, vars = warm.var;
  double gamma = std::max(mesh.gamma, 1e-6);
  std::optional<std::pair<UnivariateGmm, double>> best;

  const int nfree = 3 * k - 1;  // k-1 weights + k means + k variances
  // Keep the per-round grid below ~2M candidates.
  int b = cfg.box_steps;
  while (b > 1 && std::pow(2.0 * b + 1.0, nfree) > 2e6) --b;

  for (int round = 0; round < cfg.refine_rounds; ++round) {
    // Enumerate offsets for each parameter block in lexicographic order.
    const int span = 2 * b + 1;
    long total = 1;
    for (int i = 0; i < nfree; ++i) {
      if (total * span > 2000000) break;
      total *= span;
    }
    std::vector<int> off(nfree, 0);
    std::vector<double> cw(k), cmu(k), cvar(k);
    for (long code = 0; code < total; ++code) {
      long c = code;
      for (int i = 0; i < nfree; ++i) {
        off[i] = static_cast<int>(c % span) - b;
        c /= span;
      }
      double wsum = 0.0;
      bool ok = true;
      for (int i = 0; i < k - 1; ++i) {
        cw[i] = ws[i] + off[i] * gamma;
        if (cw[i] < mesh.weight_floor) ok = false;
        wsum += cw[i];
      }
      if (k >= 1) {
        cw[k - 1] = 1.0 - wsum;
        if (cw[k - 1] < mesh.weight_floor) ok = false;
      }
      if (!ok) continue;
      for (int i = 0; i < k; ++i) {
        cmu[i] = mus[i] + off[k - 1 + i] * gamma;
        cvar[i] = vars[i] + off[2 * k - 1 + i] * gamma;
        if (std::abs(cmu[i]) > mesh.param_bound ||
            cvar[i] > mesh.param_bound || cvar[i] < 1e-12) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      std::vector<WeightedUni> comps;
      comps.reserve(k);
      for (int i = 0; i < k; ++i) {
        comps.push_back({cw[i], UniGaussian(cmu[i], cvar[i])});
      }
      if (!mesh_candidate_ok(comps, mesh)) continue;
      UnivariateGmm cand(std::move(comps));
      const double bail =
          best ? best->second : std::numeric_limits<double>::infinity();
      const double d = moment_discrepancy(cand, target, bail);
      if (!best || d < best->second) best = {std::move(cand), d};
    }
    if (best) {
      // Recenter on the incumbent for the next, finer round.
      const auto& e = best->first;
      for (int i = 0; i < k; ++i) {
        ws[i] = e.comp(i).w;
        mus[i] = e.comp(i).g.mu;
        vars[i] = e.comp(i).g.sigma2;
      }
    }
    gamma *= 0.5;
  }
  return best;
}

}  // namespace detail

namespace detail {

/// Work shared across runs over the same sample vector (the scheduled
/// windows of the General algorithm all see one pooled draw at desk budgets,
/// so the EM starts and sample moments are computed once).
struct LevelCache {
  std::vector<double> target, se;
  std::vector<std::vector<Em1DState>> starts;  // index k''-1
  std::map<std::vector<double>, double> loglik_memo;
};

inline double memo_log_likelihood(const UnivariateGmm& f,
                                  const std::vector<double>& xs,
                                  LevelCache& cc) {
  std::vector<double> key;
  key.reserve(3 * f.k());
  for (const auto& c : f.components()) {
    key.push_back(c.w);
    key.push_back(c.g.mu);
    key.push_back(c.g.sigma2);
  }
  const auto it = cc.loglik_memo.find(key);
  if (it != cc.loglik_memo.end()) return it->second;
  const double v = log_likelihood(f, xs);
  cc.loglik_memo.emplace(std::move(key), v);
  return v;
}

}  // namespace detail

inline std::size_t basic_sample_budget(double eps, double delta, int k,
                                       const UnivariateConfig& cfg) {
  const WindowFns wf = window_fns(eps, delta, k, cfg.constants);
  const double want = 1.0 / std::max(wf.q, 1e-300);
  return static_cast<std::size_t>(std::clamp(
      want, static_cast<double>(cfg.min_samples),
      static_cast<double>(cfg.max_samples)));
}

/// Core of the Basic algorithm operating on a materialized sample vector;
/// `cache`, when supplied, shares EM starts and sample moments across calls
/// with the same samples.
inline BasicResult basic_univariate_from_samples(
    const std::vector<double>& xs, int k, double eps, double delta,
    const UnivariateConfig& cfg, std::uint64_t stream = 0,
    detail::LevelCache* cache = nullptr) {
  if (k < 1) throw std::invalid_argument("basic_univariate: k < 1");
  BasicResult out;
  out.samples = xs.size();

  const int orders = 4 * k - 2;
  detail::LevelCache local;
  detail::LevelCache& cc = cache ? *cache : local;
  if (cc.target.empty()) {
    cc.target = sample_moments(xs, orders);
    cc.se = sample_moment_stderr(xs, orders);
  }
  const auto& target = cc.target;
  const auto& se = cc.se;
  const double noise = *std::max_element(se.begin(), se.end());
  const double alpha_formula = std::pow(eps, cfg.constants.alpha_exp * k);
  out.alpha = std::max(alpha_formula, cfg.alpha_noise_mult * noise);

  if (cfg.guard_preconditions) {
    const double mean = target[0];
    const double var = target[1] - mean * mean;
    if (std::abs(mean) > cfg.guard_mean_abs || var < cfg.guard_var_lo ||
        var > cfg.guard_var_hi) {
      out.warnings.push_back(
          "PreconditionWarning: empirical mean " + std::to_string(mean) +
          ", variance " + std::to_string(var) +
          " outside the Basic algorithm's assumed range");
    }
  }

  double best_overall = std::numeric_limits<double>::infinity();

  auto try_k = [&](int kpp, double gamma0,
                   int extra_rounds) -> std::optional<UnivariateGmm> {
    MeshSpec mesh{gamma0, eps / 2.0, 2.0 / eps, eps / 2.0, kpp};
    if (cfg.mode == SearchMode::faithful) {
      std::optional<UnivariateGmm> hit;
      enumerate_candidates(mesh, [&](const UnivariateGmm& cand) {
        const double d =
            detail::moment_discrepancy(cand, target, best_overall);
        best_overall = std::min(best_overall, d);
        if (d <= out.alpha) {
          hit = cand;
          return false;  // Fig. 3 returns the first passing candidate
        }
        return true;
      });
      return hit;
    }
    // Practical: EM warm starts (subsample fit, full-data polish) plus the
    // k''=1 method-of-moments start. An accepted start is used as-is; the
    // box refinement only rescues starts that miss the moment test.
    UnivariateConfig rcfg = cfg;
    rcfg.refine_rounds += extra_rounds;
    if (static_cast<int>(cc.starts.size()) < kpp) cc.starts.resize(kpp);
    if (cc.starts[kpp - 1].empty()) {
      auto& starts = cc.starts[kpp - 1];
      if (kpp == 1) {
        detail::Em1DState mom;
        mom.w = {1.0};
        mom.mu = {target[0]};
        mom.var = {std::max(target[1] - target[0] * target[0], 1e-8)};
        starts.push_back(mom);
      }
      std::vector<double> sub(
          xs.begin(),
          xs.begin() + std::min(xs.size(), cfg.em_subsample));
      for (int rs = 0; rs < cfg.em_restarts; ++rs) {
        auto st = detail::em_1d(sub, kpp, cfg.em_iters, rs,
                                Rng::mix(stream, 0xabcdef + rs));
        if (xs.size() > sub.size()) {
          starts.push_back(detail::em_polish(xs, st, 10));
        } else {
          starts.push_back(st);
        }
      }
    }
    const auto& starts = cc.starts[kpp - 1];
    const auto admissible = [&](const UnivariateGmm& cand) {
      for (const auto& c : cand.components()) {
        if (c.g.sigma2 < cfg.min_component_var) return false;
      }
      return detail::mesh_candidate_ok(cand.components(), mesh);
    };
    std::optional<std::pair<UnivariateGmm, double>> best;
    for (const auto& st : starts) {
      auto cand = detail::state_to_mixture(st);
      if (!cand || !admissible(*cand)) continue;
      const double bail =
          best ? best->second : std::numeric_limits<double>::infinity();
      const double d = detail::moment_discrepancy(*cand, target, bail);
      if (!best || d < best->second) best = {std::move(*cand), d};
    }
    if (!best || best->second > out.alpha) {
      // Rescue pass: coarse-to-fine box search around each start.
      for (const auto& st : starts) {
        MeshSpec rmesh = mesh;
        rmesh.gamma = gamma0;
        auto r = detail::refine_search(st, rmesh, target, rcfg);
        if (r && admissible(r->first) &&
            (!best || r->second < best->second)) {
          best = r;
        }
      }
    }
    if (best) best_overall = std::min(best_overall, best->second);
    if (best && best->second <= out.alpha) return best->first;
    return std::nullopt;
  };

  const double gamma0 =
      cfg.mode == SearchMode::faithful
          ? (cfg.gamma_override > 0.0
                 ? cfg.gamma_override
                 : std::pow(out.alpha, 4.0 * k - 1.0))
          : std::max(eps / 4.0, 0.01);

  if (cfg.mode == SearchMode::faithful) {
    // Fig. 3 order: smallest component count first, first passing candidate.
    for (int kpp = 1; kpp <= k; ++kpp) {
      if (auto hit = try_k(kpp, gamma0, 0)) {
        out.estimate = *hit;
        out.components = kpp;
        out.best_discrepancy = best_overall;
        return out;
      }
    }
  } else {
    // Evaluate every component count; among the moment-accepted levels pick
    // the BIC-best, so a genuinely split pair beats the merged fit while a
    // near-coincident pair still collapses to fewer components.
    for (int attempt = 0; attempt < 2; ++attempt) {
      const double g = gamma0 / (attempt + 1);
      std::optional<UnivariateGmm> pick;
      double pick_score = -std::numeric_limits<double>::infinity();
      int pick_k = 0;
      for (int kpp = 1; kpp <= k; ++kpp) {
        const auto hit = try_k(kpp, g, attempt);
        if (!hit) continue;
        const double score =
            detail::memo_log_likelihood(*hit, xs, cc) -
            0.5 * (3.0 * kpp - 1.0) * std::log(static_cast<double>(xs.size()));
        if (score > pick_score) {
          pick_score = score;
          pick = *hit;
          pick_k = kpp;
        }
      }
      if (pick) {
        out.estimate = *pick;
        out.components = pick_k;
        out.best_discrepancy = best_overall;
        return out;
      }
    }
  }
  throw NoCandidateError(
      "basic_univariate: no candidate within alpha=" +
          std::to_string(out.alpha) + " (best " +
          std::to_string(best_overall) + ")",
      best_overall);
}

/// Brute-force moment matching (Fig. 3). Draws the configured sample budget,
/// computes moments 1..4k-2, and searches candidates of k'' = 1..k
/// components. Faithful mode enumerates the full gamma-mesh lexicographically
/// and returns the first candidate with every moment within alpha of the
/// sample moments, preferring fewer components; practical mode searches EM /
/// method-of-moments warm starts with a coarse-to-fine box rescue, keeps the
/// moment-accept test unchanged, and picks among accepted component counts by
/// BIC-penalized likelihood.
///
/// Preconditions (mean 0, variance in [1/2, 2], separated components) are the
/// caller's responsibility; with the guard enabled violations are logged as
/// warnings and the run proceeds.
inline BasicResult basic_univariate(BatchSource1D& source, int k, double eps,
                                    double delta, const UnivariateConfig& cfg,
                                    std::uint64_t stream = 0) {
  const auto xs =
      source.draw(basic_sample_budget(eps, delta, k, cfg), stream);
  return basic_univariate_from_samples(xs, k, eps, delta, cfg, stream);
}

// ---------------------------------------------------------------------------
// Consensus chains and the General Univariate Algorithm (Fig. 4)
// ---------------------------------------------------------------------------

/// True iff every consecutive pair of the precision-ordered list satisfies
/// is_eps_subdivision at eps. Component counts must be non-increasing along
/// the list; an increase makes the chain false rather than an error.
inline bool is_correct_chain(const std::vector<UnivariateGmm>& estimates,
                             double eps) {
  for (std::size_t i = 0; i + 1 < estimates.size(); ++i) {
    if (estimates[i + 1].k() > estimates[i].k()) return false;
    if (!is_eps_subdivision(estimates[i], estimates[i + 1], eps).correct) {
      return false;
    }
  }
  return true;
}

struct ChainVerdict {
  std::vector<int> subset;  // window indices, 0-based
  bool is_majority = false;
  bool is_chain = false;
  UnivariateGmm chosen;
};

struct GeneralResult {
  UnivariateGmm estimate;
  std::vector<double> schedule;  // precisions eps_1 .. eps_{k^2}
  std::vector<std::optional<BasicResult>> window_runs;
  std::vector<int> winning_subset;
  double chain_eps = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

inline UnivariateGmm deconvolve_clamped(const UnivariateGmm& f, double alpha,
                                        double floor,
                                        std::vector<std::string>* warnings) {
  std::vector<WeightedUni> comps;
  comps.reserve(f.k());
  for (const auto& c : f.components()) {
    double v = c.g.sigma2 - alpha;
    if (v < floor) {
      if (warnings) {
        warnings->push_back("deconvolution clamped a variance of " +
                            std::to_string(c.g.sigma2) + " - " +
                            std::to_string(alpha));
      }
      v = floor;
    }
    comps.push_back({c.w, UniGaussian(c.g.mu, v)});
  }
  return UnivariateGmm(std::move(comps));
}

}  // namespace detail

/// Fig. 4: convolve the stream with N(0, 1/2), run the Basic algorithm at
/// each of the k^2 scheduled precisions, search majority subsets whose
/// precision-ordered estimates form an O(k) eps_1-correct chain, and return
/// the schedule-head member of the first such subset, deconvolved by 1/2.
inline GeneralResult general_univariate(BatchSource1D& source, int k,
                                        double eps, double delta,
                                        const UnivariateConfig& cfg,
                                        std::uint64_t stream = 0) {
  if (k < 1) throw std::invalid_argument("general_univariate: k < 1");
  GeneralResult out;

  const int nwin = k * k;
  double head = eps / (cfg.constants.c_schedule *
                       std::pow(static_cast<double>(k),
                                static_cast<double>(k) * k));
  out.schedule.reserve(nwin);
  double cur = head;
  for (int i = 0; i < nwin; ++i) {
    out.schedule.push_back(cur);
    double next = window_fns(cur, delta, k, cfg.constants).s;
    if (!(next > cfg.schedule_floor) || !std::isfinite(next)) {
      next = cur / cfg.schedule_ratio_fallback;
    }
    cur = next;
  }

  UnivariateConfig wcfg = cfg;
  // The convolution shifts the expected variance range up by 1/2.
  wcfg.guard_var_lo = cfg.guard_var_lo + 0.5;
  wcfg.guard_var_hi = cfg.guard_var_hi + 0.5;

  // One convolved draw covers every window (the per-window theory budgets
  // all clamp to the same desk value), letting the windows share EM starts
  // and sample moments.
  std::size_t budget = 0;
  for (int i = 0; i < nwin; ++i) {
    budget = std::max(budget,
                      basic_sample_budget(out.schedule[i], delta, k, wcfg));
  }
  const auto xs = source.draw_convolved(budget, stream);
  detail::LevelCache cache;

  out.window_runs.resize(nwin);
  for (int i = 0; i < nwin; ++i) {
    try {
      out.window_runs[i] = basic_univariate_from_samples(
          xs, k, out.schedule[i], delta, wcfg, Rng::mix(stream, 1000 + i),
          &cache);
    } catch (const NoCandidateError& e) {
      out.warnings.push_back("window " + std::to_string(i) +
                             " failed: " + e.what());
    }
  }

  out.chain_eps = std::max(cfg.constants.chain_c * k * head, cfg.chain_floor);

  // Majority subsets, largest first; within a size, lexicographic order with
  // the downward-closed prefix sets naturally appearing early.
  std::vector<int> present;
  for (int i = 0; i < nwin; ++i) {
    if (out.window_runs[i]) present.push_back(i);
  }
  std::vector<std::vector<int>> subsets;
  const unsigned pn = static_cast<unsigned>(present.size());
  if (pn <= 20) {
    for (unsigned mask = 1; mask < (1u << pn); ++mask) {
      std::vector<int> t;
      for (unsigned b = 0; b < pn; ++b) {
        if (mask & (1u << b)) t.push_back(present[b]);
      }
      if (2 * static_cast<int>(t.size()) > nwin) subsets.push_back(t);
    }
    std::sort(subsets.begin(), subsets.end(),
              [](const std::vector<int>& a, const std::vector<int>& b) {
                if (a.size() != b.size()) return a.size() > b.size();
                return a < b;
              });
  }

  for (const auto& t : subsets) {
    // Precision-ordered: finest (largest index) first.
    std::vector<UnivariateGmm> seq;
    for (auto it = t.rbegin(); it != t.rend(); ++it) {
      seq.push_back(out.window_runs[*it]->estimate);
    }
    if (is_correct_chain(seq, out.chain_eps)) {
      out.winning_subset = t;
      const int head_idx = t.front();  // min index = schedule head
      out.estimate = detail::deconvolve_clamped(
          out.window_runs[head_idx]->estimate, 0.5, cfg.deconv_var_floor,
          &out.warnings);
      return out;
    }
  }
  throw ConsensusFailure(
      "general_univariate: no majority subset forms a correct chain (" +
      std::to_string(present.size()) + "/" + std::to_string(nwin) +
      " windows produced estimates)");
}

}  // namespace gmm

#include <gtest/gtest.h>

#include <cmath>

#include "gmm/univariate.hpp"
#include "test_support.hpp"

using namespace gmm;

namespace {

UnivariateGmm uni1(double mu, double s2) {
  return UnivariateGmm({{1.0, UniGaussian(mu, s2)}});
}

UnivariateGmm uni2(double w1, double mu1, double s1, double mu2, double s2) {
  return UnivariateGmm(
      {{w1, UniGaussian(mu1, s1)}, {1.0 - w1, UniGaussian(mu2, s2)}});
}

}  // namespace

// ---------------------------------------------------------------------------
// Window functions
// ---------------------------------------------------------------------------

TEST(WindowFns, MonotoneAndOrdered) {
  Rng rng(101);
  for (int t = 0; t < 100; ++t) {
    const double eps = 0.01 + 0.98 * rng.next_double();
    const double epsp = eps * (0.1 + 0.8 * rng.next_double());
    const double delta = 0.01 + 0.5 * rng.next_double();
    const int k = 1 + static_cast<int>(rng.next_u64() % 4);
    const auto a = window_fns(eps, delta, k);
    const auto b = window_fns(epsp, delta, k);
    EXPECT_LT(b.q, a.q);
    EXPECT_LT(a.s, a.r);
    EXPECT_LT(a.r, eps);
  }
}

TEST(WindowFns, PinnedConfigValue) {
  UnivariateConstants c;
  c.c_big = 1.0;
  c.c_exp = 2.0;
  c.c1 = 1.0;
  c.c2 = 1.0;
  const auto w = window_fns(0.1, 0.1, 1, c);
  EXPECT_DOUBLE_EQ(w.q, 1e-4);
  EXPECT_DOUBLE_EQ(w.r, 1e-4);
  EXPECT_DOUBLE_EQ(w.s, 1e-4);
}

TEST(WindowFns, ScheduleDisjointness) {
  // max of W(eps_{i+1}) = S(eps_i) < R(eps_i) = min of W(eps_i).
  Rng rng(103);
  for (int t = 0; t < 100; ++t) {
    const double eps = 0.01 + 0.5 * rng.next_double();
    const double delta = 0.05 + 0.5 * rng.next_double();
    const int k = 1 + static_cast<int>(rng.next_u64() % 4);
    const auto w = window_fns(eps, delta, k);
    EXPECT_LT(w.s, w.r);
  }
}

// ---------------------------------------------------------------------------
// Candidate mesh
// ---------------------------------------------------------------------------

TEST(CandidateGrid, HandEnumeratedK1) {
  const MeshSpec mesh{1.0, 0.5, 1.0, 0.5, 1};
  const auto cands = candidate_grid(mesh);
  // sigma^2 must be a positive gamma-multiple <= bound, so sigma^2 = 1 only;
  // means are {-1, 0, 1}.
  ASSERT_EQ(cands.size(), 3u);
  for (const auto& c : cands) {
    EXPECT_DOUBLE_EQ(c.comp(0).w, 1.0);
    EXPECT_DOUBLE_EQ(c.comp(0).g.sigma2, 1.0);
  }
  EXPECT_DOUBLE_EQ(cands[0].comp(0).g.mu, -1.0);
  EXPECT_DOUBLE_EQ(cands[1].comp(0).g.mu, 0.0);
  EXPECT_DOUBLE_EQ(cands[2].comp(0).g.mu, 1.0);
}

TEST(CandidateGrid, EveryCandidatePassesIndependentChecker) {
  const MeshSpec mesh{0.5, 0.25, 1.0, 0.5, 2};
  const auto cands = candidate_grid(mesh);
  ASSERT_FALSE(cands.empty());
  for (const auto& c : cands) {
    double ws = 0.0;
    for (const auto& comp : c.components()) {
      ws += comp.w;
      EXPECT_GE(comp.w, mesh.weight_floor - 1e-12);
      EXPECT_LE(std::abs(comp.g.mu), mesh.param_bound + 1e-12);
      EXPECT_LE(comp.g.sigma2, mesh.param_bound + 1e-12);
      EXPECT_NEAR(std::remainder(comp.g.mu, mesh.gamma), 0.0, 1e-9);
      EXPECT_NEAR(std::remainder(comp.g.sigma2, mesh.gamma), 0.0, 1e-9);
    }
    EXPECT_NEAR(ws, 1.0, 1e-9);
    for (int i = 0; i < c.k(); ++i) {
      for (int j = i + 1; j < c.k(); ++j) {
        EXPECT_GE(param_distance(c.comp(i).g, c.comp(j).g),
                  mesh.min_pairwise - 1e-12);
      }
    }
  }
}

TEST(CandidateGrid, CountMatchesClosedFormOnToyMesh) {
  // k=2, gamma=0.5, bound=0.5: single weight split (0.5, 0.5), means in
  // {-0.5, 0, 0.5}, variances in {0.5}. Ordered mean pairs with
  // |mu1 - mu2| >= 0.5: brute-count oracle.
  const MeshSpec mesh{0.5, 0.5, 0.5, 0.5, 2};
  const auto cands = candidate_grid(mesh);
  const double mus[3] = {-0.5, 0.0, 0.5};
  int expected = 0;
  for (double m1 : mus) {
    for (double m2 : mus) {
      if (std::abs(m1 - m2) >= 0.5) ++expected;
    }
  }
  EXPECT_EQ(static_cast<int>(cands.size()), expected);
}

// ---------------------------------------------------------------------------
// Basic Univariate Algorithm
// ---------------------------------------------------------------------------

TEST(BasicUnivariate, SingleGaussianPractical) {
  ModelSource1D src(uni1(0, 1), 4242);
  UnivariateConfig cfg;
  cfg.max_samples = 200000;
  const auto res = basic_univariate(src, 1, 0.1, 0.1, cfg);
  ASSERT_EQ(res.estimate.k(), 1);
  EXPECT_LE(std::abs(res.estimate.comp(0).g.mu), 0.1);
  EXPECT_LE(std::abs(res.estimate.comp(0).g.sigma2 - 1.0), 0.1);
  EXPECT_TRUE(res.warnings.empty());
}

TEST(BasicUnivariate, TwoComponentRecovery) {
  // Mixture variance 1.5 sits inside the assumed [1/2, 2] range.
  const auto truth = uni2(0.5, -1, 0.5, 1, 0.5);
  int successes = 0;
  for (int seed = 0; seed < 5; ++seed) {
    ModelSource1D src(truth, 9000 + seed);
    UnivariateConfig cfg;
    cfg.max_samples = 200000;
    const auto res = basic_univariate(src, 2, 0.1, 0.1, cfg);
    if (res.estimate.k() != 2) continue;
    const auto rep = is_eps_close(res.estimate, truth, 0.1);
    successes += rep.close ? 1 : 0;
  }
  EXPECT_GE(successes, 4);
}

TEST(BasicUnivariate, PreconditionGuardLogsAndProceeds) {
  ModelSource1D src(uni1(0, 4.0), 77);  // variance outside [0.4, 2.2]
  UnivariateConfig cfg;
  cfg.max_samples = 50000;
  const auto res = basic_univariate(src, 1, 0.2, 0.1, cfg);
  ASSERT_FALSE(res.warnings.empty());
  EXPECT_NE(res.warnings.front().find("PreconditionWarning"),
            std::string::npos);
  EXPECT_NEAR(res.estimate.comp(0).g.sigma2, 4.0, 0.4);
}

TEST(BasicUnivariate, FaithfulModeFindsMeshCandidate) {
  ModelSource1D src(uni1(0, 1), 31);
  UnivariateConfig cfg;
  cfg.mode = SearchMode::faithful;
  cfg.gamma_override = 0.25;
  cfg.max_samples = 100000;
  const auto res = basic_univariate(src, 1, 0.5, 0.1, cfg);
  // The accepted candidate lives on the gamma-mesh.
  EXPECT_NEAR(std::remainder(res.estimate.comp(0).g.mu, 0.25), 0.0, 1e-12);
  EXPECT_NEAR(std::remainder(res.estimate.comp(0).g.sigma2, 0.25), 0.0, 1e-12);
  EXPECT_LE(std::abs(res.estimate.comp(0).g.mu), 0.25);
  EXPECT_NEAR(res.estimate.comp(0).g.sigma2, 1.0, 0.3);
}

TEST(BasicUnivariate, NoCandidateCarriesBestDiscrepancy) {
  // Variance 100 cannot be represented inside the mesh bound 2/eps = 4.
  ModelSource1D src(uni1(0, 100.0), 13);
  UnivariateConfig cfg;
  cfg.mode = SearchMode::faithful;
  cfg.gamma_override = 0.5;
  cfg.max_samples = 20000;
  try {
    basic_univariate(src, 1, 0.5, 0.1, cfg);
    FAIL() << "expected NoCandidateError";
  } catch (const NoCandidateError& e) {
    EXPECT_GT(e.best_discrepancy, 50.0);
  }
}

TEST(BasicUnivariate, OutputSatisfiesMeshConstraints) {
  const auto truth = uni2(0.5, -1, 0.5, 1, 0.5);
  ModelSource1D src(truth, 555);
  UnivariateConfig cfg;
  cfg.max_samples = 100000;
  const double eps = 0.1;
  const auto res = basic_univariate(src, 2, eps, 0.1, cfg);
  for (const auto& c : res.estimate.components()) {
    EXPECT_GE(c.w, eps / 2 - 1e-12);
  }
  for (int i = 0; i < res.estimate.k(); ++i) {
    for (int j = i + 1; j < res.estimate.k(); ++j) {
      EXPECT_GE(param_distance(res.estimate.comp(i).g, res.estimate.comp(j).g),
                eps / 2 - 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// Chains
// ---------------------------------------------------------------------------

TEST(Chain, BaseCases) {
  const auto f = uni2(0.5, 0, 1, 5, 1);
  EXPECT_TRUE(is_correct_chain({f}, 0.1));
  EXPECT_TRUE(is_correct_chain({f, f}, 0.1));
}

TEST(Chain, UncoverableComponentBreaksChain) {
  const auto f = uni2(0.5, 0, 1, 5, 1);
  EXPECT_FALSE(is_correct_chain({f, uni1(0, 1)}, 0.1));
}

TEST(Chain, ComponentCountIncreaseIsFalse) {
  const auto f = uni1(0, 1);
  EXPECT_FALSE(is_correct_chain({f, uni2(0.5, 0, 1, 5, 1)}, 0.1));
}

// ---------------------------------------------------------------------------
// General Univariate Algorithm
// ---------------------------------------------------------------------------

TEST(GeneralUnivariate, SingleGaussian) {
  ModelSource1D src(uni1(0, 1), 2024);
  UnivariateConfig cfg;
  cfg.max_samples = 150000;
  const auto res = general_univariate(src, 1, 0.1, 0.1, cfg);
  ASSERT_EQ(res.estimate.k(), 1);
  EXPECT_LE(std::abs(res.estimate.comp(0).g.mu), 0.1);
  EXPECT_LE(std::abs(res.estimate.comp(0).g.sigma2 - 1.0), 0.1);
  EXPECT_EQ(static_cast<int>(res.schedule.size()), 1);
  EXPECT_EQ(res.winning_subset.size(), 1u);
}

TEST(GeneralUnivariate, MergesIndistinguishablePair) {
  // Subdivision semantics: the two components 1e-7 apart come back as one.
  ModelSource1D src(uni2(0.5, 0, 1, 1e-7, 1), 808);
  UnivariateConfig cfg;
  cfg.max_samples = 150000;
  const auto res = general_univariate(src, 2, 0.1, 0.1, cfg);
  ASSERT_EQ(res.estimate.k(), 1);
  EXPECT_NEAR(res.estimate.comp(0).w, 1.0, 0.05);
  EXPECT_LE(std::abs(res.estimate.comp(0).g.mu), 0.1);
}

TEST(GeneralUnivariate, SeparatedPairAfterRescaling) {
  // (1/2)N(-2, 1/2) + (1/2)N(2, 1/2) rescaled to unit overall variance.
  const double s = 1.0 / std::sqrt(4.5);
  const auto truth = uni2(0.5, -2.0 * s, 0.5 * s * s, 2.0 * s, 0.5 * s * s);
  ModelSource1D src(truth, 616);
  UnivariateConfig cfg;
  cfg.max_samples = 200000;
  const auto res = general_univariate(src, 2, 0.1, 0.1, cfg);
  ASSERT_EQ(res.estimate.k(), 2);
  const auto rep = is_eps_subdivision(truth, res.estimate, 0.1);
  EXPECT_TRUE(rep.correct);
  // Every returned weight exceeds eps / 2; component cap holds.
  for (const auto& c : res.estimate.components()) EXPECT_GT(c.w, 0.05);
}

TEST(GeneralUnivariate, ScheduleHasSquaredWindows) {
  ModelSource1D src(uni1(0, 1), 5);
  UnivariateConfig cfg;
  cfg.max_samples = 30000;
  const auto res = general_univariate(src, 2, 0.2, 0.1, cfg);
  EXPECT_EQ(res.schedule.size(), 4u);
  for (std::size_t i = 0; i + 1 < res.schedule.size(); ++i) {
    EXPECT_LT(res.schedule[i + 1], res.schedule[i]);
  }
}

// ---------------------------------------------------------------------------
// Empirical robust identifiability (moment discrepancy of standard pairs)
// ---------------------------------------------------------------------------

TEST(Identifiability, StandardPairsHaveMomentGap) {
  // Random eps-standard pairs at eps = 0.2 show a strictly positive max
  // discrepancy across the first 2(n + k - 1) moments. The 1e-4 baseline is
  // a frozen regression value from the first run of this generator.
  Rng rng(271828);
  int made = 0;
  while (made < 40) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 3);
    const int k = 1 + static_cast<int>(rng.next_u64() % 3);
    const auto f = testsup::random_mixture_1d(rng, n, 3.0, 0.2, 1.0);
    const auto g = testsup::random_mixture_1d(rng, k, 3.0, 0.2, 1.0);
    if (!is_eps_standard(f, g, 0.2).standard) continue;
    ++made;
    double worst = 0.0;
    for (int i = 1; i <= 2 * (n + k - 1); ++i) {
      worst = std::max(worst,
                       std::abs(mixture_moment(f, i) - mixture_moment(g, i)));
    }
    EXPECT_GT(worst, 1e-4);
  }
}

TEST(Identifiability, MonotoneEpsDependence) {
  // Pulling one mean further away grows the max moment discrepancy.
  const auto base = uni1(0.0, 0.5);
  double prev = 0.0;
  for (double t : {0.3, 0.6, 0.9, 1.2}) {
    const auto moved = uni1(t, 0.5);
    double worst = 0.0;
    for (int i = 1; i <= 4; ++i) {
      worst = std::max(
          worst, std::abs(mixture_moment(base, i) - mixture_moment(moved, i)));
    }
    EXPECT_GT(worst, prev);
    prev = worst;
  }
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <queue>
#include <vector>

namespace gmm {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

namespace detail {

// 15-point Kronrod nodes/weights on [-1, 1] with the embedded 7-point Gauss
// rule (abscissae.txt values from the QUADPACK dqk15 tables).
inline constexpr double kKronrodX[15] = {
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0,                0.207784955007898,
    0.405845151377397,  0.586087235467691,  0.741531185599394,
    0.864864423359769,  0.949107912342759,  0.991455371120813};

inline constexpr double kKronrodW[15] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728, 0.204432940075298,
    0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529};

inline constexpr double kGaussW[4] = {0.129484966168870, 0.279705391489277,
                                      0.381830050505119, 0.417959183673469};

template <typename F>
inline void gk15(const F& f, double a, double b, double& kron, double& err) {
  const double h = 0.5 * (b - a);
  const double c = 0.5 * (a + b);
  double fk = 0.0, fg = 0.0;
  double fx[15];
  for (int i = 0; i < 15; ++i) {
    fx[i] = f(c + h * kKronrodX[i]);
    fk += kKronrodW[i] * fx[i];
  }
  // Gauss points are the odd Kronrod indices.
  fg = kGaussW[3] * fx[7];
  for (int i = 0; i < 3; ++i) {
    fg += kGaussW[i] * (fx[2 * i + 1] + fx[13 - 2 * i]);
  }
  kron = h * fk;
  err = std::abs(h * (fk - fg));
}

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

}  // namespace detail

/// Adaptive Gauss--Kronrod bisection quadrature of f over [a, b] to absolute
/// tolerance tol. `breakpoints` pre-splits the interval (pass component means
/// so narrow spikes are not missed by the coarse pass).
template <typename F>
QuadResult integrate_adaptive(const F& f, double a, double b, double tol,
                              const std::vector<double>& breakpoints = {},
                              std::size_t max_segments = 20000) {
  QuadResult res;
  if (!(b > a)) {
    res.converged = true;
    return res;
  }
  std::vector<double> pts{a, b};
  for (double p : breakpoints) {
    if (p > a && p < b) pts.push_back(p);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  std::priority_queue<detail::Segment> queue;
  double total = 0.0, total_err = 0.0;
  auto push_segment = [&](double lo, double hi) {
    double v, e;
    detail::gk15(f, lo, hi, v, e);
    res.evaluations += 15;
    total += v;
    total_err += e;
    queue.push({lo, hi, v, e});
  };
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    push_segment(pts[i], pts[i + 1]);
  }

  while (total_err > tol && queue.size() < max_segments) {
    detail::Segment s = queue.top();
    queue.pop();
    total -= s.value;
    total_err -= s.error;
    const double mid = 0.5 * (s.a + s.b);
    if (mid <= s.a || mid >= s.b) {  // interval at floating-point resolution
      total += s.value;
      total_err += s.error;
      break;
    }
    push_segment(s.a, mid);
    push_segment(mid, s.b);
  }
  res.value = total;
  res.error = total_err;
  res.converged = total_err <= tol;
  return res;
}

}  // namespace gmm

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace pbbench {

struct NmResult {
  std::vector<double> x;
  double fx = 0;
  int iterations = 0;
  bool converged = false;
};

// Derivative-free simplex minimizer. Deterministic: fixed coefficients, fixed
// initial simplex (x0 plus `step` along each axis), stable tie-breaking.
template <class F>
NmResult nelder_mead(F&& f, const std::vector<double>& x0, double step = 0.25,
                     double tol = 1e-8, int max_iter = 2000) {
  const std::size_t n = x0.size();
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

  std::vector<std::vector<double>> pts(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(pts[i]);

  std::vector<std::size_t> order(n + 1);
  NmResult res;
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });

    double size = 0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        size = std::max(size, std::abs(pts[order[i]][j] - pts[order[0]][j]));
    if (size < tol && std::abs(fv[order[n]] - fv[order[0]]) < tol) {
      res.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[order[i]][j] / n;

    auto point = [&](double coef) {
      std::vector<double> p(n);
      for (std::size_t j = 0; j < n; ++j)
        p[j] = centroid[j] + coef * (centroid[j] - pts[order[n]][j]);
      return p;
    };

    auto xr = point(alpha);
    double fr = f(xr);
    if (fr < fv[order[0]]) {
      auto xe = point(gamma);
      double fe = f(xe);
      if (fe < fr) {
        pts[order[n]] = std::move(xe);
        fv[order[n]] = fe;
      } else {
        pts[order[n]] = std::move(xr);
        fv[order[n]] = fr;
      }
    } else if (fr < fv[order[n - 1]]) {
      pts[order[n]] = std::move(xr);
      fv[order[n]] = fr;
    } else {
      auto xc = point(fr < fv[order[n]] ? rho : -rho);
      double fc = f(xc);
      if (fc < std::min(fr, fv[order[n]])) {
        pts[order[n]] = std::move(xc);
        fv[order[n]] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t j = 0; j < n; ++j)
            pts[order[i]][j] = pts[order[0]][j] + sigma * (pts[order[i]][j] - pts[order[0]][j]);
          fv[order[i]] = f(pts[order[i]]);
        }
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (fv[i] < fv[best]) best = i;
  res.x = pts[best];
  res.fx = fv[best];
  return res;
}

}  // namespace pbbench

#pragma once

// Independent brute-force reference implementations used as test oracles.
// These deliberately share no code with the production paths they check:
// everything is literal loops over the defining formulas.

#include "psir/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace oracle {

using psir::Complex;
using psir::Index;

// O(n^2) centered orthonormal DFT straight from the definition:
// X(k) = (1/sqrt(MN)) sum_x x(r,c) exp(-2*pi*i*(kr*(r-r0)/M + kc*(c-c0)/N)),
// with both the spatial and frequency origins at (floor(M/2), floor(N/2)).
inline psir::ComplexImage dft2c(const psir::ComplexImage& img, int sign) {
  const Index rows = img.rows, cols = img.cols;
  const Index r0 = rows / 2, c0 = cols / 2;
  psir::ComplexImage out(rows, cols);
  const double scale = 1.0 / std::sqrt(double(rows * cols));
  for (Index kr = 0; kr < rows; ++kr)
    for (Index kc = 0; kc < cols; ++kc) {
      Complex acc = 0;
      for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) {
          const double phase =
              sign * 2.0 * M_PI *
              (double((kr - r0) * (r - r0)) / rows + double((kc - c0) * (c - c0)) / cols);
          acc += img(r, c) * Complex(std::cos(phase), std::sin(phase));
        }
      out(kr, kc) = acc * scale;
    }
  return out;
}

// Exact Wilcoxon signed-rank p-value by literal 2^m sign enumeration with
// Pratt zeros and midranks. Feasible for m <= ~20 nonzero differences.
enum class Tail { Greater, Less };

inline double wilcoxon_enumerate(const std::vector<double>& d, Tail tail) {
  const std::size_t n = d.size();
  // midranks of |d| including zeros
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(d[a]) < std::abs(d[b]);
  });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
    const double mid = 0.5 * double((i + 1) + j);
    for (std::size_t t = i; t < j; ++t) rank[order[t]] = mid;
    i = j;
  }
  // drop zeros, keep their ranks consumed
  std::vector<double> ranks;
  double w_obs = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (d[t] == 0.0) continue;
    ranks.push_back(rank[t]);
    if (d[t] > 0.0) w_obs += rank[t];
  }
  const std::size_t m = ranks.size();
  if (m == 0) throw std::runtime_error("oracle: all differences zero");
  std::size_t hits = 0;
  const std::size_t total = std::size_t{1} << m;
  for (std::size_t bits = 0; bits < total; ++bits) {
    double w = 0;
    for (std::size_t b = 0; b < m; ++b)
      if (bits & (std::size_t{1} << b)) w += ranks[b];
    if (tail == Tail::Greater ? (w >= w_obs) : (w <= w_obs)) ++hits;
  }
  return double(hits) / double(total);
}

// Mean local SSIM computed window by window from the definition in
// double loops (11x11 Gaussian weights, valid positions only).
inline double ssim_loops(const psir::RealImage& x, const psir::RealImage& y,
                         double k1, double k2, int win, double sigma,
                         double range) {
  std::vector<double> w(win * win);
  const double mid = (win - 1) / 2.0;
  double wsum = 0;
  for (int a = 0; a < win; ++a)
    for (int b = 0; b < win; ++b) {
      const double g = std::exp(-((a - mid) * (a - mid) + (b - mid) * (b - mid)) /
                                (2.0 * sigma * sigma));
      w[a * win + b] = g;
      wsum += g;
    }
  for (auto& v : w) v /= wsum;

  const double c1 = (k1 * range) * (k1 * range);
  const double c2 = (k2 * range) * (k2 * range);
  double acc = 0;
  Index count = 0;
  for (Index r = 0; r + win <= x.rows; ++r)
    for (Index c = 0; c + win <= x.cols; ++c) {
      double mx = 0, my = 0;
      for (int a = 0; a < win; ++a)
        for (int b = 0; b < win; ++b) {
          mx += w[a * win + b] * x(r + a, c + b);
          my += w[a * win + b] * y(r + a, c + b);
        }
      double sxx = 0, syy = 0, sxy = 0;
      for (int a = 0; a < win; ++a)
        for (int b = 0; b < win; ++b) {
          const double dx = x(r + a, c + b) - mx;
          const double dy = y(r + a, c + b) - my;
          sxx += w[a * win + b] * dx * dx;
          syy += w[a * win + b] * dy * dy;
          sxy += w[a * win + b] * dx * dy;
        }
      // weighted second moments about the weighted mean differ from
      // E[x^2]-E[x]^2 by nothing: identical algebra, summed directly
      acc += ((2 * mx * my + c1) * (2 * sxy + c2)) /
             ((mx * mx + my * my + c1) * (sxx + syy + c2));
      ++count;
    }
  return acc / double(count);
}

// Drop-half retention from the definition: medoid by total distance (ties to
// the lowest index), Euclidean displacement, keep ceil(n/2) smallest with
// index tie-breaks.
inline std::vector<Index> drop_half(const std::vector<double>& dy,
                                    const std::vector<double>& dx) {
  const std::size_t n = dy.size();
  std::size_t medoid = 0;
  double best = 1e300;
  for (std::size_t i = 0; i < n; ++i) {
    double tot = 0;
    for (std::size_t j = 0; j < n; ++j)
      tot += std::sqrt((dy[i] - dy[j]) * (dy[i] - dy[j]) +
                       (dx[i] - dx[j]) * (dx[i] - dx[j]));
    if (tot < best) {
      best = tot;
      medoid = i;
    }
  }
  std::vector<std::pair<double, std::size_t>> keyed;
  for (std::size_t i = 0; i < n; ++i)
    keyed.emplace_back(std::sqrt((dy[i] - dy[medoid]) * (dy[i] - dy[medoid]) +
                                 (dx[i] - dx[medoid]) * (dx[i] - dx[medoid])),
                       i);
  std::sort(keyed.begin(), keyed.end());
  std::vector<Index> retained;
  for (std::size_t i = 0; i < (n + 1) / 2; ++i)
    retained.push_back(static_cast<Index>(keyed[i].second));
  std::sort(retained.begin(), retained.end());
  return retained;
}

} // namespace oracle

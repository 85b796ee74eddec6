#pragma once

// Planar Delaunay triangulation (Bowyer-Watson) and point generators for
// unstructured test meshes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "emdec/error.hpp"
#include "emdec/maxwell.hpp"
#include "emdec/mesh.hpp"

namespace emdec {

// Triangles (vertex triples) of the Delaunay triangulation of `pts`.
// Quadratic time; meant for meshes of a few thousand points.
inline std::vector<std::array<std::size_t, 3>> delaunay_triangles(const std::vector<Eigen::Vector2d>& pts) {
  const std::size_t n = pts.size();
  if (n < 3) throw invalid_argument("delaunay: need at least 3 points");
  Eigen::Vector2d lo = pts[0], hi = pts[0];
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double span = std::max((hi - lo).maxCoeff(), 1e-300);
  const Eigen::Vector2d mid = 0.5 * (lo + hi);
  std::vector<Eigen::Vector2d> P = pts;
  // Far super-triangle; its vertices are n, n+1, n+2.
  const double big = 1e3 * span;
  P.emplace_back(mid.x() - big, mid.y() - big);
  P.emplace_back(mid.x() + big, mid.y() - big);
  P.emplace_back(mid.x(), mid.y() + big);

  struct Tri {
    std::array<std::size_t, 3> v;
    Eigen::Vector2d c;
    double r2;
  };
  auto make = [&](std::size_t a, std::size_t b, std::size_t c) {
    const Eigen::Vector2d A = P[a], B = P[b], C = P[c];
    const double d = 2.0 * (A.x() * (B.y() - C.y()) + B.x() * (C.y() - A.y()) + C.x() * (A.y() - B.y()));
    Tri t{{a, b, c}, Eigen::Vector2d::Zero(), std::numeric_limits<double>::infinity()};
    if (d != 0.0) {
      const double a2 = A.squaredNorm(), b2 = B.squaredNorm(), c2 = C.squaredNorm();
      t.c = Eigen::Vector2d((a2 * (B.y() - C.y()) + b2 * (C.y() - A.y()) + c2 * (A.y() - B.y())) / d,
                            (a2 * (C.x() - B.x()) + b2 * (A.x() - C.x()) + c2 * (B.x() - A.x())) / d);
      t.r2 = (A - t.c).squaredNorm();
    }
    return t;
  };
  std::vector<Tri> tris{make(n, n + 1, n + 2)};
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& p = P[i];
    std::map<std::pair<std::size_t, std::size_t>, int> edge_count;
    std::vector<Tri> keep;
    keep.reserve(tris.size());
    for (auto& t : tris) {
      if ((p - t.c).squaredNorm() < t.r2 * (1.0 - 1e-12)) {
        for (int k = 0; k < 3; ++k) {
          std::size_t a = t.v[static_cast<std::size_t>(k)], b = t.v[static_cast<std::size_t>((k + 1) % 3)];
          if (a > b) std::swap(a, b);
          ++edge_count[{a, b}];
        }
      } else {
        keep.push_back(std::move(t));
      }
    }
    if (edge_count.empty()) throw numeric_error("delaunay: point " + std::to_string(i) + " duplicates an earlier point");
    for (const auto& [e, cnt] : edge_count)
      if (cnt == 1) keep.push_back(make(e.first, e.second, i));
    tris = std::move(keep);
  }
  std::vector<std::array<std::size_t, 3>> out;
  for (const auto& t : tris) {
    if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
    auto v = t.v;
    std::sort(v.begin(), v.end());
    const Eigen::Vector2d e1 = pts[v[1]] - pts[v[0]], e2 = pts[v[2]] - pts[v[0]];
    const double area2 = std::abs(e1.x() * e2.y() - e1.y() * e2.x());
    if (area2 <= 1e-14 * span * span) continue;  // collinear hull triples
    out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline CellComplex delaunay_mesh(const std::vector<Eigen::Vector2d>& pts) {
  std::vector<Eigen::VectorXd> P;
  for (const auto& p : pts) P.emplace_back(Eigen::VectorXd(p));
  std::vector<std::vector<std::size_t>> cells;
  for (const auto& t : delaunay_triangles(pts)) cells.push_back({t[0], t[1], t[2]});
  return build_simplicial(std::move(P), cells);
}

// The four corners of [0,w]x[0,h] plus `count` uniform random interior points.
inline std::vector<Eigen::Vector2d> random_points(std::size_t count, double w, double h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Vector2d> pts{{0.0, 0.0}, {w, 0.0}, {0.0, h}, {w, h}};
  for (std::size_t i = 0; i < count; ++i) {
    const double x = unit_uniform(rng) * w;
    const double y = unit_uniform(rng) * h;
    pts.emplace_back(x, y);
  }
  return pts;
}

// Boundary-refined point cloud on [0,w]x[0,h]: boundary points at spacing
// h_min, interior points by dart throwing with a spacing that grows
// linearly from h_min at the boundary to h_max at distance `layer`.
inline std::vector<Eigen::Vector2d> refined_points(double w, double h, double h_min, double h_max, double layer,
                                                   std::uint64_t seed, std::size_t attempts = 30) {
  if (!(h_min > 0.0 && h_max >= h_min && layer > 0.0)) throw invalid_argument("refined_points: bad spacing");
  std::vector<Eigen::Vector2d> pts;
  auto segment = [&](Eigen::Vector2d a, Eigen::Vector2d b) {
    const double len = (b - a).norm();
    const auto m = static_cast<std::size_t>(std::max(1.0, std::round(len / h_min)));
    for (std::size_t i = 0; i < m; ++i) pts.push_back(a + (b - a) * (static_cast<double>(i) / static_cast<double>(m)));
  };
  segment({0.0, 0.0}, {w, 0.0});
  segment({w, 0.0}, {w, h});
  segment({w, h}, {0.0, h});
  segment({0.0, h}, {0.0, 0.0});
  auto spacing = [&](const Eigen::Vector2d& p) {
    const double d = std::min({p.x(), w - p.x(), p.y(), h - p.y()});
    return h_min + (h_max - h_min) * std::min(1.0, d / layer);
  };
  // Background grid for neighbour queries.
  const double cell = h_min;
  const auto gx = static_cast<std::size_t>(std::ceil(w / cell)) + 1;
  const auto gy = static_cast<std::size_t>(std::ceil(h / cell)) + 1;
  std::vector<std::vector<std::size_t>> grid(gx * gy);
  auto slot = [&](const Eigen::Vector2d& p) {
    const auto i = std::min(gx - 1, static_cast<std::size_t>(std::max(0.0, p.x() / cell)));
    const auto j = std::min(gy - 1, static_cast<std::size_t>(std::max(0.0, p.y() / cell)));
    return std::make_pair(i, j);
  };
  for (std::size_t k = 0; k < pts.size(); ++k) {
    auto [i, j] = slot(pts[k]);
    grid[i + gx * j].push_back(k);
  }
  auto accept = [&](const Eigen::Vector2d& p) {
    const double r = spacing(p);
    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(h_max / cell));
    auto [ci, cj] = slot(p);
    for (std::ptrdiff_t dj = -reach; dj <= reach; ++dj)
      for (std::ptrdiff_t di = -reach; di <= reach; ++di) {
        const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(ci) + di, j = static_cast<std::ptrdiff_t>(cj) + dj;
        if (i < 0 || j < 0 || i >= static_cast<std::ptrdiff_t>(gx) || j >= static_cast<std::ptrdiff_t>(gy)) continue;
        for (std::size_t k : grid[static_cast<std::size_t>(i) + gx * static_cast<std::size_t>(j)]) {
          const double rk = std::min(r, spacing(pts[k]));
          if ((pts[k] - p).squaredNorm() < rk * rk) return false;
        }
      }
    return true;
  };
  // Bridson-style active list seeded from the boundary.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> active(pts.size());
  for (std::size_t k = 0; k < active.size(); ++k) active[k] = k;
  while (!active.empty()) {
    const auto pick = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(active.size()));
    const std::size_t k = active[pick];
    bool placed = false;
    for (std::size_t a = 0; a < attempts; ++a) {
      const double r = spacing(pts[k]);
      const double rad = r * (1.0 + unit_uniform(rng));
      const double ang = 2.0 * 3.14159265358979323846 * unit_uniform(rng);
      const Eigen::Vector2d q = pts[k] + rad * Eigen::Vector2d(std::cos(ang), std::sin(ang));
      const double margin = 0.5 * h_min;
      if (q.x() < margin || q.y() < margin || q.x() > w - margin || q.y() > h - margin) continue;
      if (!accept(q)) continue;
      pts.push_back(q);
      auto [i, j] = slot(q);
      grid[i + gx * j].push_back(pts.size() - 1);
      active.push_back(pts.size() - 1);
      placed = true;
      break;
    }
    if (!placed) {
      active[pick] = active.back();
      active.pop_back();
    }
  }
  return pts;
}

// Optimal-Delaunay-style smoothing: each point not on the rectangle's
// boundary moves to the density-weighted mean of the circumcenters of its
// triangles. Density 1/spacing^2 keeps a graded mesh graded.
template <class Spacing>
std::vector<Eigen::Vector2d> smooth_points(std::vector<Eigen::Vector2d> pts, double w, double h, Spacing spacing,
                                           int iterations) {
  const double tol = 1e-12 * std::max(w, h);
  auto fixed = [&](const Eigen::Vector2d& p) {
    return p.x() <= tol || p.y() <= tol || p.x() >= w - tol || p.y() >= h - tol;
  };
  for (int it = 0; it < iterations; ++it) {
    const auto tris = delaunay_triangles(pts);
    std::vector<Eigen::Vector2d> acc(pts.size(), Eigen::Vector2d::Zero());
    std::vector<double> wsum(pts.size(), 0.0);
    for (const auto& t : tris) {
      const Eigen::Vector2d A = pts[t[0]], B = pts[t[1]], C = pts[t[2]];
      const double area = 0.5 * std::abs((B - A).x() * (C - A).y() - (B - A).y() * (C - A).x());
      const double d = 2.0 * (A.x() * (B.y() - C.y()) + B.x() * (C.y() - A.y()) + C.x() * (A.y() - B.y()));
      const double a2 = A.squaredNorm(), b2 = B.squaredNorm(), c2 = C.squaredNorm();
      const Eigen::Vector2d cc((a2 * (B.y() - C.y()) + b2 * (C.y() - A.y()) + c2 * (A.y() - B.y())) / d,
                               (a2 * (C.x() - B.x()) + b2 * (A.x() - C.x()) + c2 * (B.x() - A.x())) / d);
      const Eigen::Vector2d centroid = (A + B + C) / 3.0;
      const double s = spacing(centroid);
      const double wt = area / (s * s);
      for (std::size_t v : t) {
        acc[v] += wt * cc;
        wsum[v] += wt;
      }
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (fixed(pts[i]) || wsum[i] == 0.0) continue;
      Eigen::Vector2d q = acc[i] / wsum[i];
      q.x() = std::clamp(q.x(), 0.25 * spacing(pts[i]), w - 0.25 * spacing(pts[i]));
      q.y() = std::clamp(q.y(), 0.25 * spacing(pts[i]), h - 0.25 * spacing(pts[i]));
      pts[i] = q;
    }
  }
  return pts;
}

// Smoothed, boundary-refined Delaunay mesh of [0,w]x[0,h].
inline CellComplex refined_mesh(double w, double h, double h_min, double h_max, double layer, std::uint64_t seed,
                                int smoothing = 30) {
  auto spacing = [&](const Eigen::Vector2d& p) {
    const double d = std::max(0.0, std::min({p.x(), w - p.x(), p.y(), h - p.y()}));
    return h_min + (h_max - h_min) * std::min(1.0, d / layer);
  };
  auto pts = smooth_points(refined_points(w, h, h_min, h_max, layer, seed), w, h, spacing, smoothing);
  return delaunay_mesh(pts);
}

} // namespace emdec

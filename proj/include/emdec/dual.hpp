#pragma once

// Cell geometry (circumcenters, measures, quality) and the circumcentric
// dual restricted to the domain.
//
// Dual measures are signed sums over flags sigma_k < sigma_{k+1} < ... <
// sigma_n. Consecutive circumcenters along a flag are mutually orthogonal,
// so each flag spans a right simplex of volume prod|c_{j+1} - c_j| / (n-k)!.
// A step is negative when c_{j+1} falls on the far side of sigma_j, which
// is how obtuse elements end up with signed (possibly negative) lengths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "emdec/error.hpp"
#include "emdec/mesh.hpp"

namespace emdec {

// Condition number above which a circumcenter system counts as degenerate.
inline constexpr double kCircumcenterCond = 1e12;

struct Circumsphere {
  Eigen::VectorXd center;
  double radius = 0.0;
  double condition = 1.0;
  bool degenerate = false;
};

// Circumcenter of a simplex given by its vertex points (any k <= ambient).
inline Circumsphere simplex_circumsphere(const std::vector<Eigen::VectorXd>& p) {
  Circumsphere s;
  s.center = p.front();
  const Eigen::Index k = static_cast<Eigen::Index>(p.size()) - 1;
  if (k == 0) return s;
  Eigen::MatrixXd M(k, p.front().size());
  for (Eigen::Index i = 0; i < k; ++i) M.row(i) = (p[static_cast<std::size_t>(i) + 1] - p[0]).transpose();
  const Eigen::MatrixXd G = M * M.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
  const auto& sv = svd.singularValues();
  const double smax = sv(0), smin = sv(sv.size() - 1);
  s.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(s.condition <= kCircumcenterCond)) {
    s.degenerate = true;
    s.radius = std::numeric_limits<double>::infinity();
    return s;
  }
  // |c - v_i|^2 = |c - v_0|^2  <=>  (v_i - v_0) . (c - v_0) = |v_i - v_0|^2 / 2
  const Eigen::VectorXd rhs = 0.5 * G.diagonal();
  const Eigen::VectorXd lambda = G.ldlt().solve(rhs);
  s.center = p[0] + M.transpose() * lambda;
  s.radius = (s.center - p[0]).norm();
  return s;
}

// Unsigned k-volume of a simplex.
inline double simplex_volume(const std::vector<Eigen::VectorXd>& p) {
  const Eigen::Index k = static_cast<Eigen::Index>(p.size()) - 1;
  if (k == 0) return 1.0;
  Eigen::MatrixXd M(k, p.front().size());
  for (Eigen::Index i = 0; i < k; ++i) M.row(i) = (p[static_cast<std::size_t>(i) + 1] - p[0]).transpose();
  const double g = (M * M.transpose()).determinant();
  double fact = 1.0;
  for (Eigen::Index i = 2; i <= k; ++i) fact *= static_cast<double>(i);
  return std::sqrt(std::max(g, 0.0)) / fact;
}

inline std::vector<Eigen::VectorXd> cell_points(const CellComplex& K, int k, std::size_t i) {
  std::vector<Eigen::VectorXd> p;
  for (std::size_t v : K.cell_vertices(k, i)) p.push_back(K.point(v));
  return p;
}

// Side lengths of a box cell along its free axes (tensor order).
inline std::vector<double> box_extents(const CellComplex& K, int k, std::size_t i) {
  auto v = K.cell_vertices(k, i);
  std::vector<double> ext;
  for (int b = 0; b < k; ++b)
    ext.push_back((K.point(v[std::size_t{1} << b]) - K.point(v[0])).norm());
  return ext;
}

inline double cell_measure(const CellComplex& K, int k, std::size_t i) {
  if (k == 0) return 1.0;
  if (K.shape() == CellShape::box) {
    double m = 1.0;
    for (double e : box_extents(K, k, i)) m *= e;
    return m;
  }
  return simplex_volume(cell_points(K, k, i));
}

inline Circumsphere cell_circumsphere(const CellComplex& K, int k, std::size_t i) {
  if (K.shape() == CellShape::simplex) return simplex_circumsphere(cell_points(K, k, i));
  Circumsphere s;
  auto pts = cell_points(K, k, i);
  s.center = Eigen::VectorXd::Zero(pts.front().size());
  for (const auto& p : pts) s.center += p;
  s.center /= static_cast<double>(pts.size());
  s.radius = (s.center - pts.front()).norm();
  return s;
}

// Contribution of one top cell to a dual measure.
struct DualPiece {
  std::size_t top;
  double volume;
};

class DualComplex {
public:
  int dim() const noexcept { return n_; }

  double primal_measure(int k, std::size_t i) const { return primal_[idx(k)][i]; }
  // Signed measure |*sigma| of the restricted dual cell.
  double dual_measure(int k, std::size_t i) const { return dual_[idx(k)][i]; }
  const Eigen::VectorXd& circumcenter(int k, std::size_t i) const { return center_[idx(k)][i]; }
  // Per-top-cell signed pieces of |*sigma| (segment-wise materials).
  const std::vector<DualPiece>& pieces(int k, std::size_t i) const { return pieces_[idx(k)][i]; }

  // True for dual cells of boundary cells (these are cut by the boundary).
  bool restricted(int k, std::size_t i) const { return restricted_[idx(k)][i] != 0; }
  // Measure of the dual cell's face lying in the boundary, i.e. the dual of
  // sigma inside the boundary complex. Zero for interior cells.
  double boundary_dual_measure(int k, std::size_t i) const { return bdual_[idx(k)][i]; }

  // Dual vertices of *sigma: circumcenters of the top cells containing sigma,
  // followed by those of boundary (n-1)-cells containing sigma.
  std::vector<Eigen::VectorXd> dual_vertices(const CellComplex& K, int k, std::size_t i) const {
    std::vector<Eigen::VectorXd> out;
    for (std::size_t t : K.incident_top_cells(k, i)) out.push_back(center_[idx(n_)][t]);
    if (K.on_boundary(k, i) && k < n_) {
      std::vector<std::size_t> cur{i};
      for (int j = k; j < n_ - 1; ++j) {
        std::vector<std::size_t> next;
        for (std::size_t c : cur)
          for (const Incidence& inc : K.cofaces(j, c))
            if (K.on_boundary(j + 1, inc.cell)) next.push_back(inc.cell);
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end()), next.end());
        cur = std::move(next);
      }
      for (std::size_t f : cur) out.push_back(center_[idx(n_ - 1)][f]);
    }
    return out;
  }

  // (k, cell) pairs whose dual measure came out negative.
  const std::vector<std::pair<int, std::size_t>>& negative_duals() const noexcept { return negative_; }

private:
  std::size_t idx(int k) const {
    if (k < 0 || k > n_) throw invalid_argument("dual: dimension out of range");
    return static_cast<std::size_t>(k);
  }

  int n_ = 0;
  std::vector<std::vector<double>> primal_, dual_, bdual_;
  std::vector<std::vector<Eigen::VectorXd>> center_;
  std::vector<std::vector<std::vector<DualPiece>>> pieces_;
  std::vector<std::vector<char>> restricted_;
  std::vector<std::pair<int, std::size_t>> negative_;

  friend DualComplex circumcentric_dual(const CellComplex& K);
};

namespace detail {

inline double factorial(int m) {
  double f = 1.0;
  for (int i = 2; i <= m; ++i) f *= i;
  return f;
}

// Signed step length from the circumcenter of `lower` to that of `upper`.
inline double flag_step(const CellComplex& K, const std::vector<std::vector<Eigen::VectorXd>>& c,
                        int j, std::size_t lower, std::size_t upper) {
  const Eigen::VectorXd u = c[static_cast<std::size_t>(j) + 1][upper] - c[static_cast<std::size_t>(j)][lower];
  const double len = u.norm();
  if (len == 0.0) return 0.0;
  auto lv = K.cell_vertices(j, lower);
  for (std::size_t w : K.cell_vertices(j + 1, upper)) {
    if (std::find(lv.begin(), lv.end(), w) != lv.end()) continue;
    const double s = u.dot(K.point(w) - c[static_cast<std::size_t>(j)][lower]);
    return s < 0.0 ? -len : len;
  }
  return len;
}

} // namespace detail

// Builds the circumcentric dual restricted to K. Throws DegenerateMeshError
// for cells without a well-defined circumcenter or with zero volume.
inline DualComplex circumcentric_dual(const CellComplex& K) {
  DualComplex D;
  const int n = K.dim();
  D.n_ = n;
  const std::size_t levels = static_cast<std::size_t>(n) + 1;
  D.primal_.resize(levels);
  D.dual_.resize(levels);
  D.bdual_.resize(levels);
  D.center_.resize(levels);
  D.pieces_.resize(levels);
  D.restricted_.resize(levels);

  for (int k = 0; k <= n; ++k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    const std::size_t m = K.num_cells(k);
    D.primal_[kk].resize(m);
    D.center_[kk].resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      Circumsphere s = cell_circumsphere(K, k, i);
      if (s.degenerate)
        throw DegenerateMeshError(k, i, "circumcenter system ill-conditioned (cond " +
                                            std::to_string(s.condition) + ")");
      const double vol = cell_measure(K, k, i);
      if (!(vol > 0.0)) throw DegenerateMeshError(k, i, "zero volume");
      D.primal_[kk][i] = vol;
      D.center_[kk][i] = std::move(s.center);
    }
  }

  // Flags inside K.
  for (int k = 0; k <= n; ++k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    const std::size_t m = K.num_cells(k);
    D.dual_[kk].assign(m, 0.0);
    D.pieces_[kk].resize(m);
    D.restricted_[kk].resize(m);
    const double norm = detail::factorial(n - k);
    for (std::size_t i = 0; i < m; ++i) {
      D.restricted_[kk][i] = K.on_boundary(k, i) ? 1 : 0;
      std::vector<DualPiece> acc;
      // Depth-first walk over flags starting at (k, i).
      struct Frame { int j; std::size_t cell; double prod; };
      std::vector<Frame> stack{{k, i, 1.0}};
      while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        if (f.j == n) {
          auto it = std::find_if(acc.begin(), acc.end(), [&](const DualPiece& p) { return p.top == f.cell; });
          if (it == acc.end()) acc.push_back({f.cell, f.prod / norm});
          else it->volume += f.prod / norm;
          continue;
        }
        for (const Incidence& inc : K.cofaces(f.j, f.cell))
          stack.push_back({f.j + 1, inc.cell, f.prod * detail::flag_step(K, D.center_, f.j, f.cell, inc.cell)});
      }
      std::sort(acc.begin(), acc.end(), [](const DualPiece& a, const DualPiece& b) { return a.top < b.top; });
      double total = 0.0;
      for (const auto& p : acc) total += p.volume;
      D.dual_[kk][i] = total;
      D.pieces_[kk][i] = std::move(acc);
      if (total < 0.0) D.negative_.emplace_back(k, i);
    }
  }

  // Flags inside the boundary: sigma_k < ... < sigma_{n-1}, all boundary cells.
  for (int k = 0; k <= n; ++k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    const std::size_t m = K.num_cells(k);
    D.bdual_[kk].assign(m, 0.0);
    if (k == n) continue;
    const double norm = detail::factorial(n - 1 - k);
    for (std::size_t i = 0; i < m; ++i) {
      if (!K.on_boundary(k, i)) continue;
      struct Frame { int j; std::size_t cell; double prod; };
      std::vector<Frame> stack{{k, i, 1.0}};
      double total = 0.0;
      while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        if (f.j == n - 1) {
          total += f.prod;
          continue;
        }
        for (const Incidence& inc : K.cofaces(f.j, f.cell))
          if (K.on_boundary(f.j + 1, inc.cell))
            stack.push_back({f.j + 1, inc.cell, f.prod * detail::flag_step(K, D.center_, f.j, f.cell, inc.cell)});
      }
      D.bdual_[kk][i] = total / norm;
    }
  }
  return D;
}

// Per-top-cell quality record.
struct CellQuality {
  std::size_t cell = 0;
  bool circumcenter_inside = true;
  bool degenerate = false;
  double min_edge = 0.0;
  double circumradius = 0.0;
  double inradius = 0.0;
  double aspect_ratio = 1.0;
};

struct MeshQualityReport {
  std::vector<CellQuality> cells;
  std::vector<std::string> warnings;

  std::size_t outside_count() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(),
                                                  [](const CellQuality& q) { return !q.circumcenter_inside; }));
  }
  std::size_t degenerate_count() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(),
                                                  [](const CellQuality& q) { return q.degenerate; }));
  }
};

// Quality diagnostics. Simplices: aspect ratio R / (n r), 1 for regular
// simplices. Boxes: longest over shortest side. Never throws on bad cells.
inline MeshQualityReport quality(const CellComplex& K) {
  MeshQualityReport rep;
  const int n = K.dim();
  for (std::size_t t = 0; t < K.num_cells(n); ++t) {
    CellQuality q;
    q.cell = t;
    auto pts = cell_points(K, n, t);
    // Edges of the top cell.
    std::vector<std::size_t> cur{t};
    for (int j = n; j > 1; --j) {
      std::vector<std::size_t> next;
      for (std::size_t c : cur)
        for (const Incidence& inc : K.boundary(j, c)) next.push_back(inc.cell);
      std::sort(next.begin(), next.end());
      next.erase(std::unique(next.begin(), next.end()), next.end());
      cur = std::move(next);
    }
    q.min_edge = std::numeric_limits<double>::infinity();
    for (std::size_t e : cur) q.min_edge = std::min(q.min_edge, cell_measure(K, 1, e));

    if (K.shape() == CellShape::box) {
      auto ext = box_extents(K, n, t);
      const double lo = *std::min_element(ext.begin(), ext.end());
      const double hi = *std::max_element(ext.begin(), ext.end());
      double diag2 = 0.0;
      for (double e : ext) diag2 += e * e;
      q.circumradius = 0.5 * std::sqrt(diag2);
      q.inradius = 0.5 * lo;
      q.aspect_ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
      q.degenerate = !(lo > 0.0);
    } else {
      Circumsphere s = simplex_circumsphere(pts);
      const double vol = simplex_volume(pts);
      double facet_area = 0.0;
      for (const Incidence& inc : K.boundary(n, t)) facet_area += cell_measure(K, n - 1, inc.cell);
      q.inradius = facet_area > 0.0 ? n * vol / facet_area : 0.0;
      q.degenerate = s.degenerate || !(vol > 0.0);
      if (q.degenerate) {
        q.circumradius = std::numeric_limits<double>::infinity();
        q.aspect_ratio = std::numeric_limits<double>::infinity();
        q.circumcenter_inside = false;
        rep.warnings.push_back("cell " + std::to_string(t) + ": degenerate (no circumcenter)");
        rep.cells.push_back(q);
        continue;
      }
      q.circumradius = s.radius;
      q.aspect_ratio = q.inradius > 0.0 ? s.radius / (n * q.inradius) : std::numeric_limits<double>::infinity();
      // Barycentric coordinates of the circumcenter.
      const Eigen::Index m = pts.front().size();
      Eigen::MatrixXd A(m + 1, n + 1);
      for (int c = 0; c <= n; ++c) {
        A.block(0, c, m, 1) = pts[static_cast<std::size_t>(c)];
        A(m, c) = 1.0;
      }
      Eigen::VectorXd rhs(m + 1);
      rhs.head(m) = s.center;
      rhs(m) = 1.0;
      const Eigen::VectorXd bary = A.colPivHouseholderQr().solve(rhs);
      q.circumcenter_inside = bary.minCoeff() >= -1e-12;
    }
    if (!q.circumcenter_inside && !q.degenerate)
      rep.warnings.push_back("cell " + std::to_string(t) + ": circumcenter outside cell");
    rep.cells.push_back(q);
  }
  return rep;
}

} // namespace emdec

#pragma once

// Oriented cell complexes: construction, loading and boundary extraction.
//
// A CellComplex stores, for every dimension k = 0..n, an ordered list of
// k-cells. Each cell is a list of vertex indices in canonical order:
//   simplex: ascending vertex index;
//   box:     tensor order over its free axes (bit i of the corner index set
//            means "upper side along the i-th free axis, axes ascending").
// Lower cells carry the canonical orientation. Top cells additionally carry
// a sign relative to canonical so that they agree with the ambient
// orientation. All incidence signs derive from these two rules.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "emdec/error.hpp"

namespace emdec {

enum class CellShape { simplex, box };

// Signed incidence between a cell and one of its facets or cofaces.
struct Incidence {
  std::size_t cell;
  int sign;
};

// Top cell as handed to the assembler. `orientation` is relative to the
// canonical vertex order; 0 derives it from the ambient orientation.
struct TopCell {
  std::vector<std::size_t> vertices;
  int orientation = 0;
};

class CellComplex;
CellComplex assemble_complex(std::vector<Eigen::VectorXd> points, int dim,
                             CellShape shape, std::vector<TopCell> tops);

class CellComplex {
public:
  CellComplex() = default;

  int dim() const noexcept { return dim_; }
  int ambient_dim() const noexcept { return ambient_dim_; }
  CellShape shape() const noexcept { return shape_; }

  std::size_t num_vertices() const noexcept { return points_.size(); }
  std::size_t num_cells(int k) const { return level(k).count(); }

  const Eigen::VectorXd& point(std::size_t v) const { return points_.at(v); }
  const std::vector<Eigen::VectorXd>& points() const noexcept { return points_; }

  std::span<const std::size_t> cell_vertices(int k, std::size_t i) const {
    const Level& l = level(k);
    return {l.vertices.data() + l.vertex_offsets[i],
            l.vertex_offsets[i + 1] - l.vertex_offsets[i]};
  }

  // Signed (k-1)-facets of a k-cell, k >= 1.
  std::span<const Incidence> boundary(int k, std::size_t i) const {
    const Level& l = level(k);
    return {l.facets.data() + l.facet_offsets[i],
            l.facet_offsets[i + 1] - l.facet_offsets[i]};
  }

  // Signed (k+1)-cofaces of a k-cell, k < n.
  std::span<const Incidence> cofaces(int k, std::size_t i) const {
    const Level& l = level(k);
    return {l.cofaces.data() + l.coface_offsets[i],
            l.coface_offsets[i + 1] - l.coface_offsets[i]};
  }

  // True when the cell lies in the topological boundary of the complex.
  bool on_boundary(int k, std::size_t i) const { return level(k).on_boundary[i] != 0; }

  // Sign of a top cell relative to its canonical vertex order.
  int orientation(std::size_t top) const { return top_orientation_.at(top); }

  // Top cells whose closure contains the given k-cell, ascending.
  std::vector<std::size_t> incident_top_cells(int k, std::size_t i) const {
    std::vector<std::size_t> current{i};
    for (int j = k; j < dim_; ++j) {
      std::vector<std::size_t> next;
      for (std::size_t c : current)
        for (const Incidence& inc : cofaces(j, c)) next.push_back(inc.cell);
      std::sort(next.begin(), next.end());
      next.erase(std::unique(next.begin(), next.end()), next.end());
      current = std::move(next);
    }
    return current;
  }

  // Number of cells with on_boundary() set at dimension k.
  std::size_t num_boundary_cells(int k) const {
    const auto& b = level(k).on_boundary;
    return static_cast<std::size_t>(std::count(b.begin(), b.end(), char{1}));
  }

  // Index of the k-cell with the given canonical vertex list, or npos.
  std::size_t find_cell(int k, const std::vector<std::size_t>& canonical) const {
    const Level& l = level(k);
    // Cells below the top level are stored in lexicographic order.
    if (k < dim_ || k == 0) {
      std::size_t lo = 0, hi = l.count();
      while (lo < hi) {
        std::size_t mid = (lo + hi) / 2;
        auto v = cell_vertices(k, mid);
        if (std::lexicographical_compare(v.begin(), v.end(), canonical.begin(),
                                         canonical.end()))
          lo = mid + 1;
        else
          hi = mid;
      }
      if (lo < l.count()) {
        auto v = cell_vertices(k, lo);
        if (std::equal(v.begin(), v.end(), canonical.begin(), canonical.end())) return lo;
      }
      return npos;
    }
    for (std::size_t i = 0; i < l.count(); ++i) {
      auto v = cell_vertices(k, i);
      if (std::equal(v.begin(), v.end(), canonical.begin(), canonical.end())) return i;
    }
    return npos;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
  struct Level {
    std::vector<std::size_t> vertices;
    std::vector<std::size_t> vertex_offsets{0};
    std::vector<Incidence> facets;
    std::vector<std::size_t> facet_offsets{0};
    std::vector<Incidence> cofaces;
    std::vector<std::size_t> coface_offsets{0};
    std::vector<char> on_boundary;

    std::size_t count() const noexcept { return vertex_offsets.size() - 1; }
  };

  const Level& level(int k) const {
    if (k < 0 || k > dim_) throw invalid_argument("cell dimension " + std::to_string(k) + " out of range");
    return levels_[static_cast<std::size_t>(k)];
  }

  int dim_ = 0;
  int ambient_dim_ = 0;
  CellShape shape_ = CellShape::simplex;
  std::vector<Eigen::VectorXd> points_;
  std::vector<Level> levels_;
  std::vector<int> top_orientation_;

  friend CellComplex assemble_complex(std::vector<Eigen::VectorXd>, int, CellShape,
                                      std::vector<TopCell>);
};

namespace detail {

using Key = std::vector<std::size_t>;

inline int permutation_parity(std::vector<std::size_t> v) {
  int parity = 1;
  for (std::size_t i = 0; i < v.size(); ++i)
    while (v[i] != i) {
      std::swap(v[i], v[v[i]]);
      parity = -parity;
    }
  return parity;
}

// Sorts simplex vertices; returns the parity of the sorting permutation.
inline int canonical_simplex(Key& verts) {
  std::vector<std::size_t> order(verts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return verts[a] < verts[b]; });
  Key sorted(verts.size());
  for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = verts[order[i]];
  verts = std::move(sorted);
  for (std::size_t i = 1; i < verts.size(); ++i)
    if (verts[i] == verts[i - 1]) return 0;
  return permutation_parity(order);
}

// Free axes of a canonical box, one per corner bit.
inline std::vector<int> box_axes(const std::vector<Eigen::VectorXd>& pts, const Key& corners) {
  std::vector<int> axes;
  const std::size_t k = static_cast<std::size_t>(std::countr_zero(corners.size()));
  for (std::size_t i = 0; i < k; ++i) {
    Eigen::VectorXd delta = pts[corners[std::size_t{1} << i]] - pts[corners[0]];
    Eigen::Index axis = 0;
    delta.cwiseAbs().maxCoeff(&axis);
    axes.push_back(static_cast<int>(axis));
  }
  return axes;
}

// Reorders box corners into tensor order. Returns false when the corners
// are not an axis-aligned box of the expected dimension.
inline bool canonical_box(const std::vector<Eigen::VectorXd>& pts, Key& corners, int k) {
  if (corners.size() != (std::size_t{1} << k)) return false;
  const int m = static_cast<int>(pts[corners[0]].size());
  Eigen::VectorXd lo = pts[corners[0]], hi = pts[corners[0]];
  for (std::size_t c : corners) {
    lo = lo.cwiseMin(pts[c]);
    hi = hi.cwiseMax(pts[c]);
  }
  const double scale = std::max(1.0, (hi - lo).cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;
  std::vector<int> free;
  for (int a = 0; a < m; ++a)
    if (hi[a] - lo[a] > tol) free.push_back(a);
  if (static_cast<int>(free.size()) != k) return false;
  Key ordered(corners.size(), static_cast<std::size_t>(-1));
  for (std::size_t c : corners) {
    std::size_t bits = 0;
    for (int a = 0; a < m; ++a) {
      const double x = pts[c][a];
      const bool at_lo = std::abs(x - lo[a]) <= tol;
      const bool at_hi = std::abs(x - hi[a]) <= tol;
      if (!at_lo && !at_hi) return false;
      auto it = std::find(free.begin(), free.end(), a);
      if (it != free.end() && at_hi && !at_lo)
        bits |= std::size_t{1} << static_cast<std::size_t>(it - free.begin());
    }
    if (ordered[bits] != static_cast<std::size_t>(-1)) return false;
    ordered[bits] = c;
  }
  corners = std::move(ordered);
  return true;
}

// Signed facets of a canonical, positively oriented cell.
inline std::vector<std::pair<Key, int>> facets_of(CellShape shape, const Key& cell) {
  std::vector<std::pair<Key, int>> out;
  if (shape == CellShape::simplex) {
    for (std::size_t i = 0; i < cell.size(); ++i) {
      Key f;
      f.reserve(cell.size() - 1);
      for (std::size_t j = 0; j < cell.size(); ++j)
        if (j != i) f.push_back(cell[j]);
      out.emplace_back(std::move(f), (i % 2 == 0) ? 1 : -1);
    }
    return out;
  }
  const std::size_t k = static_cast<std::size_t>(std::countr_zero(cell.size()));
  for (std::size_t i = 0; i < k; ++i) {
    Key lower, upper;
    for (std::size_t b = 0; b < cell.size(); ++b)
      ((b >> i) & 1u ? upper : lower).push_back(cell[b]);
    const int s = (i % 2 == 0) ? 1 : -1;
    out.emplace_back(std::move(lower), -s);
    out.emplace_back(std::move(upper), s);
  }
  return out;
}

inline double simplex_orientation_det(const std::vector<Eigen::VectorXd>& pts, const Key& cell) {
  const Eigen::Index m = pts[cell[0]].size();
  if (static_cast<Eigen::Index>(cell.size()) - 1 != m) return 1.0;
  Eigen::MatrixXd M(m, m);
  for (Eigen::Index i = 0; i < m; ++i) M.col(i) = pts[cell[static_cast<std::size_t>(i) + 1]] - pts[cell[0]];
  return M.determinant();
}

} // namespace detail

// Builds a complex from its top cells, deriving every lower cell and all
// incidences. Lower cells are ordered lexicographically by canonical
// vertex list; top cells keep their input order.
inline CellComplex assemble_complex(std::vector<Eigen::VectorXd> points, int dim,
                                    CellShape shape, std::vector<TopCell> tops) {
  if (dim < 1) throw invalid_argument("complex dimension must be >= 1");
  if (points.empty()) throw invalid_argument("complex has no vertices");
  const int ambient = static_cast<int>(points.front().size());
  if (ambient < dim) throw invalid_argument("ambient dimension smaller than complex dimension");
  for (const auto& p : points)
    if (p.size() != ambient) throw invalid_argument("inconsistent vertex coordinate dimension");

  CellComplex K;
  K.dim_ = dim;
  K.ambient_dim_ = ambient;
  K.shape_ = shape;
  K.levels_.resize(static_cast<std::size_t>(dim) + 1);

  const std::size_t n = static_cast<std::size_t>(dim);
  std::vector<std::vector<detail::Key>> cells(n + 1);

  // Canonicalize top cells.
  std::map<detail::Key, std::size_t> seen_top;
  for (std::size_t t = 0; t < tops.size(); ++t) {
    detail::Key key = tops[t].vertices;
    for (std::size_t v : key)
      if (v >= points.size())
        throw invalid_argument("top cell " + std::to_string(t) + " references vertex " +
                               std::to_string(v) + " of " + std::to_string(points.size()));
    int sign = tops[t].orientation;
    if (shape == CellShape::simplex) {
      if (key.size() != n + 1)
        throw invalid_argument("simplex " + std::to_string(t) + " has wrong vertex count");
      if (detail::canonical_simplex(key) == 0)
        throw invalid_argument("simplex " + std::to_string(t) + " repeats a vertex");
      if (sign == 0) {
        const double det = detail::simplex_orientation_det(points, key);
        double scale = 0.0;
        for (std::size_t v = 1; v < key.size(); ++v) scale = std::max(scale, (points[key[v]] - points[key[0]]).norm());
        // Flat simplex: leave 0 and borrow the orientation from a neighbour below.
        if (std::abs(det) > 1e-12 * std::pow(scale, static_cast<double>(n))) sign = det < 0.0 ? -1 : 1;
      }
    } else {
      if (!detail::canonical_box(points, key, dim))
        throw invalid_argument("cell " + std::to_string(t) + " is not an axis-aligned box");
      if (sign == 0) sign = 1;
    }
    if (!seen_top.emplace(key, t).second)
      throw invalid_argument("duplicate top cell " + std::to_string(t) + " (same as cell " +
                             std::to_string(seen_top[key]) + ")");
    cells[n].push_back(std::move(key));
    K.top_orientation_.push_back(sign);
  }

  if (std::count(K.top_orientation_.begin(), K.top_orientation_.end(), 0) > 0) {
    std::map<detail::Key, std::vector<std::pair<std::size_t, int>>> by_facet;
    for (std::size_t t = 0; t < cells[n].size(); ++t)
      for (auto& [key, s] : detail::facets_of(shape, cells[n][t])) by_facet[key].emplace_back(t, s);
    for (bool changed = true; changed;) {
      changed = false;
      for (const auto& [key, inc] : by_facet) {
        if (inc.size() != 2) continue;
        auto& oa = K.top_orientation_[inc[0].first];
        auto& ob = K.top_orientation_[inc[1].first];
        if ((oa == 0) == (ob == 0)) continue;
        // Neighbours induce opposite orientations on the shared facet.
        if (oa == 0) oa = -ob * inc[1].second * inc[0].second;
        else ob = -oa * inc[0].second * inc[1].second;
        changed = true;
      }
    }
    for (int& o : K.top_orientation_)
      if (o == 0) o = 1;
  }

  // Derive lower levels top-down.
  std::vector<std::vector<std::vector<std::pair<detail::Key, int>>>> raw_facets(n + 1);
  for (std::size_t k = n; k >= 1; --k) {
    std::map<detail::Key, std::size_t> lower;
    raw_facets[k].reserve(cells[k].size());
    for (std::size_t c = 0; c < cells[k].size(); ++c) {
      auto f = detail::facets_of(shape, cells[k][c]);
      const int orient = (k == n) ? K.top_orientation_[c] : 1;
      for (auto& [key, s] : f) {
        s *= orient;
        lower.emplace(key, 0);
      }
      raw_facets[k].push_back(std::move(f));
    }
    if (k == 1) break;
    std::size_t idx = 0;
    for (auto& [key, i] : lower) {
      i = idx++;
      cells[k - 1].push_back(key);
    }
  }
  for (std::size_t v = 0; v < points.size(); ++v) cells[0].push_back({v});

  // Flatten vertex lists and resolve facet indices.
  for (std::size_t k = 0; k <= n; ++k) {
    auto& lvl = K.levels_[k];
    for (const auto& key : cells[k]) {
      lvl.vertices.insert(lvl.vertices.end(), key.begin(), key.end());
      lvl.vertex_offsets.push_back(lvl.vertices.size());
    }
    lvl.on_boundary.assign(cells[k].size(), 0);
  }
  K.points_ = std::move(points);
  for (std::size_t k = 1; k <= n; ++k) {
    auto& lvl = K.levels_[k];
    for (const auto& f : raw_facets[k]) {
      for (const auto& [key, s] : f) {
        const std::size_t idx = K.find_cell(static_cast<int>(k) - 1, key);
        lvl.facets.push_back({idx, s});
      }
      lvl.facet_offsets.push_back(lvl.facets.size());
    }
  }

  // Cofaces (transpose of the facet lists).
  for (std::size_t k = 0; k < n; ++k) {
    auto& lvl = K.levels_[k];
    const auto& up = K.levels_[k + 1];
    std::vector<std::vector<Incidence>> co(lvl.count());
    for (std::size_t c = 0; c < up.count(); ++c)
      for (std::size_t j = up.facet_offsets[c]; j < up.facet_offsets[c + 1]; ++j)
        co[up.facets[j].cell].push_back({c, up.facets[j].sign});
    for (auto& list : co) {
      lvl.cofaces.insert(lvl.cofaces.end(), list.begin(), list.end());
      lvl.coface_offsets.push_back(lvl.cofaces.size());
    }
  }
  K.levels_[n].coface_offsets.assign(K.levels_[n].count() + 1, 0);
  K.levels_[0].facet_offsets.assign(K.levels_[0].count() + 1, 0);

  // Manifold check on (n-1)-cells, then boundary flags.
  for (std::size_t f = 0; f < K.num_cells(dim - 1); ++f) {
    auto co = K.cofaces(dim - 1, f);
    if (co.empty()) continue;  // isolated lower cell cannot occur; vertices handled below
    if (co.size() > 2)
      throw invalid_argument("non-manifold: " + std::to_string(dim - 1) + "-cell " +
                             std::to_string(f) + " has " + std::to_string(co.size()) + " cofaces");
    if (co.size() == 2 && co[0].sign == co[1].sign)
      throw invalid_argument("non-manifold or inconsistently oriented: " +
                             std::to_string(dim - 1) + "-cell " + std::to_string(f) +
                             " has cofaces " + std::to_string(co[0].cell) + " and " +
                             std::to_string(co[1].cell) + " inducing the same orientation");
    if (co.size() == 1) K.levels_[n - 1].on_boundary[f] = 1;
  }
  for (std::size_t k = n - 1; k >= 1; --k)
    for (std::size_t c = 0; c < K.num_cells(static_cast<int>(k)); ++c)
      if (K.levels_[k].on_boundary[c])
        for (const Incidence& inc : K.boundary(static_cast<int>(k), c))
          K.levels_[k - 1].on_boundary[inc.cell] = 1;
  return K;
}

// Tensor-product grid from per-axis node coordinates (strictly increasing).
inline CellComplex build_tensor_grid(const std::vector<std::vector<double>>& axes) {
  const std::size_t d = axes.size();
  if (d != 2 && d != 3) throw invalid_argument("grid dimension must be 2 or 3");
  std::vector<std::size_t> nodes(d);
  for (std::size_t a = 0; a < d; ++a) {
    if (axes[a].size() < 2) throw invalid_argument("each axis needs at least one cell");
    for (std::size_t i = 1; i < axes[a].size(); ++i)
      if (!(axes[a][i] > axes[a][i - 1]))
        throw invalid_argument("grid coordinates must be strictly increasing");
    nodes[a] = axes[a].size();
  }
  // Vertex index = i + nx*(j + ny*k), x fastest.
  std::vector<Eigen::VectorXd> pts;
  const std::size_t nz = d == 3 ? nodes[2] : 1;
  for (std::size_t k = 0; k < nz; ++k)
    for (std::size_t j = 0; j < nodes[1]; ++j)
      for (std::size_t i = 0; i < nodes[0]; ++i) {
        Eigen::VectorXd p(static_cast<Eigen::Index>(d));
        p[0] = axes[0][i];
        p[1] = axes[1][j];
        if (d == 3) p[2] = axes[2][k];
        pts.push_back(std::move(p));
      }
  auto vid = [&](std::size_t i, std::size_t j, std::size_t k) {
    return i + nodes[0] * (j + nodes[1] * k);
  };
  std::vector<TopCell> tops;
  const std::size_t cz = d == 3 ? nodes[2] - 1 : 1;
  for (std::size_t k = 0; k < cz; ++k)
    for (std::size_t j = 0; j + 1 < nodes[1]; ++j)
      for (std::size_t i = 0; i + 1 < nodes[0]; ++i) {
        TopCell c;
        const std::size_t corners = std::size_t{1} << d;
        for (std::size_t b = 0; b < corners; ++b)
          c.vertices.push_back(vid(i + (b & 1u), j + ((b >> 1) & 1u), k + ((b >> 2) & 1u)));
        c.orientation = 1;
        tops.push_back(std::move(c));
      }
  return assemble_complex(std::move(pts), static_cast<int>(d), CellShape::box, std::move(tops));
}

// Uniform axis-aligned grid over [0, extents] with the given cell counts.
inline CellComplex build_rect_grid(const std::vector<double>& extents,
                                   const std::vector<std::size_t>& counts) {
  if (extents.size() != counts.size())
    throw invalid_argument("extents and counts must have the same length");
  if (extents.size() != 2 && extents.size() != 3)
    throw invalid_argument("grid dimension must be 2 or 3");
  std::vector<std::vector<double>> axes;
  for (std::size_t a = 0; a < extents.size(); ++a) {
    if (!(extents[a] > 0.0) || !std::isfinite(extents[a]))
      throw invalid_argument("grid extent must be positive");
    if (counts[a] < 1) throw invalid_argument("grid cell count must be >= 1");
    std::vector<double> x(counts[a] + 1);
    for (std::size_t i = 0; i <= counts[a]; ++i)
      x[i] = extents[a] * static_cast<double>(i) / static_cast<double>(counts[a]);
    axes.push_back(std::move(x));
  }
  return build_tensor_grid(axes);
}

// Random partition of [0, length] into `count` cells whose relative widths
// are drawn uniformly from [1 - spread, 1 + spread].
inline std::vector<double> random_axis_partition(double length, std::size_t count, double spread,
                                                 std::mt19937_64& rng) {
  if (!(spread >= 0.0 && spread < 1.0)) throw invalid_argument("partition spread must be in [0, 1)");
  std::vector<double> w(count);
  for (auto& x : w) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x = 1.0 - spread + 2.0 * spread * u;
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<double> nodes(count + 1, 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    acc += w[i];
    nodes[i + 1] = length * acc / total;
  }
  nodes.back() = length;
  return nodes;
}

// Triangle/tetrahedron mesh from explicit coordinates and simplices.
inline CellComplex build_simplicial(std::vector<Eigen::VectorXd> points,
                                    const std::vector<std::vector<std::size_t>>& simplices) {
  if (points.empty()) throw invalid_argument("mesh has no vertices");
  const int dim = static_cast<int>(points.front().size());
  std::vector<TopCell> tops;
  tops.reserve(simplices.size());
  for (const auto& s : simplices) tops.push_back({s, 0});
  return assemble_complex(std::move(points), dim, CellShape::simplex, std::move(tops));
}

// Reads the line-oriented mesh format:
//   dim <n>
//   v x1 .. xn
//   c k i1 .. i(k+1)     simplex top cell
//   r i1 .. i(2^n)       axis-aligned box top cell
// `#` starts a comment. Lower cells are derived.
inline CellComplex load_mesh(std::istream& in) {
  int dim = 0;
  std::size_t dim_line = 0;
  std::vector<Eigen::VectorXd> pts;
  std::vector<TopCell> tops;
  std::vector<std::size_t> top_lines;
  int shape = -1;  // 0 simplex, 1 box
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    auto read_index = [&](const char* what) {
      long long v = 0;
      if (!(ls >> v)) throw ParseError(lineno, std::string("expected ") + what);
      if (v < 0) throw ParseError(lineno, "negative vertex index");
      return static_cast<std::size_t>(v);
    };
    auto expect_end = [&]() {
      std::string extra;
      if (ls >> extra) throw ParseError(lineno, "unexpected trailing token '" + extra + "'");
    };
    if (tag == "dim") {
      if (dim != 0) throw ParseError(lineno, "duplicate dim header");
      if (!(ls >> dim) || dim < 1 || dim > 3) throw ParseError(lineno, "dim must be 1, 2 or 3");
      expect_end();
      dim_line = lineno;
    } else if (tag == "v") {
      if (dim == 0) throw ParseError(lineno, "vertex before dim header");
      Eigen::VectorXd p(dim);
      for (int a = 0; a < dim; ++a) {
        std::string tok;
        if (!(ls >> tok)) throw ParseError(lineno, "vertex needs " + std::to_string(dim) + " coordinates");
        try {
          std::size_t used = 0;
          p[a] = std::stod(tok, &used);
          if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
          throw ParseError(lineno, "bad coordinate '" + tok + "'");
        }
        if (!std::isfinite(p[a])) throw ParseError(lineno, "non-finite coordinate");
      }
      expect_end();
      pts.push_back(std::move(p));
    } else if (tag == "c" || tag == "r") {
      if (dim == 0) throw ParseError(lineno, "cell before dim header");
      const int this_shape = tag == "c" ? 0 : 1;
      if (shape != -1 && shape != this_shape)
        throw ParseError(lineno, "mixing simplex and box cells is not supported");
      shape = this_shape;
      TopCell c;
      std::size_t count = 0;
      if (tag == "c") {
        const std::size_t k = read_index("cell dimension");
        if (k != static_cast<std::size_t>(dim))
          throw ParseError(lineno, "only top cells (k = " + std::to_string(dim) + ") may be listed");
        count = k + 1;
      } else {
        count = std::size_t{1} << dim;
      }
      for (std::size_t i = 0; i < count; ++i) c.vertices.push_back(read_index("vertex index"));
      expect_end();
      tops.push_back(std::move(c));
      top_lines.push_back(lineno);
    } else {
      throw ParseError(lineno, "unknown record '" + tag + "'");
    }
  }
  if (dim == 0) throw ParseError(lineno + 1, "missing dim header");
  if (pts.empty()) throw ParseError(dim_line, "mesh has no vertices");
  if (tops.empty()) throw ParseError(dim_line, "mesh has no cells");
  for (std::size_t t = 0; t < tops.size(); ++t)
    for (std::size_t v : tops[t].vertices)
      if (v >= pts.size())
        throw ParseError(top_lines[t], "vertex index " + std::to_string(v) + " out of range (" +
                                           std::to_string(pts.size()) + " vertices)");
  try {
    return assemble_complex(std::move(pts), dim, shape == 1 ? CellShape::box : CellShape::simplex,
                            std::move(tops));
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("mesh: ") + e.what());
  }
}

inline CellComplex load_mesh_string(const std::string& text) {
  std::istringstream in(text);
  return load_mesh(in);
}

// Writes a complex back in the mesh file format (top cells only).
inline void write_mesh(std::ostream& out, const CellComplex& K) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "dim " << K.ambient_dim() << '\n';
  for (const auto& p : K.points()) {
    buf << 'v';
    for (Eigen::Index a = 0; a < p.size(); ++a) buf << ' ' << p[a];
    buf << '\n';
  }
  const int n = K.dim();
  for (std::size_t t = 0; t < K.num_cells(n); ++t) {
    auto v = K.cell_vertices(n, t);
    if (K.shape() == CellShape::simplex) {
      buf << "c " << n;
      std::vector<std::size_t> verts(v.begin(), v.end());
      if (K.orientation(t) < 0 && verts.size() >= 2) std::swap(verts[0], verts[1]);
      for (std::size_t x : verts) buf << ' ' << x;
    } else {
      buf << 'r';
      for (std::size_t x : v) buf << ' ' << x;
    }
    buf << '\n';
  }
  out << buf.str();
}

// The boundary of an n-complex as a closed (n-1)-complex, with index maps
// back to the parent's cells at every dimension.
struct BoundaryComplex {
  CellComplex complex;
  std::vector<std::vector<std::size_t>> to_parent;
};

inline BoundaryComplex boundary_complex(const CellComplex& K) {
  const int n = K.dim();
  if (n < 2) throw invalid_argument("boundary complex needs dimension >= 2");
  std::vector<std::size_t> old_of_new;
  std::vector<std::size_t> new_of_old(K.num_vertices(), CellComplex::npos);
  for (std::size_t v = 0; v < K.num_vertices(); ++v)
    if (K.on_boundary(0, v)) {
      new_of_old[v] = old_of_new.size();
      old_of_new.push_back(v);
    }
  std::vector<Eigen::VectorXd> pts;
  for (std::size_t v : old_of_new) pts.push_back(K.point(v));
  std::vector<TopCell> tops;
  std::vector<std::size_t> top_parent;
  for (std::size_t f = 0; f < K.num_cells(n - 1); ++f) {
    if (!K.on_boundary(n - 1, f)) continue;
    TopCell c;
    for (std::size_t v : K.cell_vertices(n - 1, f)) c.vertices.push_back(new_of_old[v]);
    // Induced orientation: the sign with which the facet appears in the
    // boundary of its single coface.
    c.orientation = K.cofaces(n - 1, f)[0].sign;
    tops.push_back(std::move(c));
    top_parent.push_back(f);
  }
  BoundaryComplex B{assemble_complex(std::move(pts), n - 1, K.shape(), std::move(tops)), {}};
  B.to_parent.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    auto& map = B.to_parent[static_cast<std::size_t>(k)];
    if (k == n - 1) {
      map = top_parent;
      continue;
    }
    for (std::size_t c = 0; c < B.complex.num_cells(k); ++c) {
      std::vector<std::size_t> key;
      for (std::size_t v : B.complex.cell_vertices(k, c)) key.push_back(old_of_new[v]);
      map.push_back(K.find_cell(k, key));
    }
  }
  return B;
}

} // namespace emdec

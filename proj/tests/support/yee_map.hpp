#pragma once

// Geometric bridge between DEC cochains on a uniform box grid and the point
// values of yee_reference.hpp. Edge value = E . (p1 - p0); face value =
// B . (oriented area normal). Cells are located by their midpoints only.

#include <cmath>
#include <functional>
#include <utility>

#include <Eigen/Dense>

#include "emdec/mesh.hpp"
#include "support/yee_reference.hpp"

namespace yee {

struct Slot {
  double* value;
  double scale;  // cochain = scale * point value
};

inline std::size_t idx(double x, double h, double shift) {
  return static_cast<std::size_t>(std::lround(x / h - shift));
}

inline Eigen::Vector3d pad(const Eigen::VectorXd& p) {
  Eigen::Vector3d q = Eigen::Vector3d::Zero();
  for (Eigen::Index i = 0; i < p.size(); ++i) q[i] = p[i];
  return q;
}

inline int major_axis(const Eigen::Vector3d& v) {
  int a = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(v[i]) > std::abs(v[a])) a = i;
  return a;
}

inline Slot edge_slot(const emdec::CellComplex& K, std::size_t e, Grid2D& g) {
  auto v = K.cell_vertices(1, e);
  const Eigen::Vector3d p0 = pad(K.point(v[0])), p1 = pad(K.point(v[1]));
  const Eigen::Vector3d m = 0.5 * (p0 + p1), d = p1 - p0;
  if (major_axis(d) == 0) return {&g.Ex(idx(m.x(), g.dx, 0.5), idx(m.y(), g.dy, 0.0)), d.x()};
  return {&g.Ey(idx(m.x(), g.dx, 0.0), idx(m.y(), g.dy, 0.5)), d.y()};
}

inline Eigen::Vector3d face_normal(const emdec::CellComplex& K, std::size_t f) {
  auto v = K.cell_vertices(2, f);
  const Eigen::Vector3d p0 = pad(K.point(v[0]));
  Eigen::Vector3d n = (pad(K.point(v[1])) - p0).cross(pad(K.point(v[2])) - p0);
  if (K.dim() == 2) n *= K.orientation(f);
  return n;
}

inline Slot face_slot(const emdec::CellComplex& K, std::size_t f, Grid2D& g) {
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
  auto v = K.cell_vertices(2, f);
  for (auto i : v) m += pad(K.point(i));
  m /= static_cast<double>(v.size());
  return {&g.Bz(idx(m.x(), g.dx, 0.5), idx(m.y(), g.dy, 0.5)), face_normal(K, f).z()};
}

inline Slot edge_slot(const emdec::CellComplex& K, std::size_t e, Grid3D& g) {
  auto v = K.cell_vertices(1, e);
  const Eigen::Vector3d p0 = pad(K.point(v[0])), p1 = pad(K.point(v[1]));
  const Eigen::Vector3d m = 0.5 * (p0 + p1), d = p1 - p0;
  switch (major_axis(d)) {
    case 0: return {&g.Ex(idx(m.x(), g.dx, 0.5), idx(m.y(), g.dy, 0), idx(m.z(), g.dz, 0)), d.x()};
    case 1: return {&g.Ey(idx(m.x(), g.dx, 0), idx(m.y(), g.dy, 0.5), idx(m.z(), g.dz, 0)), d.y()};
    default: return {&g.Ez(idx(m.x(), g.dx, 0), idx(m.y(), g.dy, 0), idx(m.z(), g.dz, 0.5)), d.z()};
  }
}

inline Slot face_slot(const emdec::CellComplex& K, std::size_t f, Grid3D& g) {
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
  auto v = K.cell_vertices(2, f);
  for (auto i : v) m += pad(K.point(i));
  m /= static_cast<double>(v.size());
  const Eigen::Vector3d n = face_normal(K, f);
  switch (major_axis(n)) {
    case 0: return {&g.Bx(idx(m.x(), g.dx, 0), idx(m.y(), g.dy, 0.5), idx(m.z(), g.dz, 0.5)), n.x()};
    case 1: return {&g.By(idx(m.x(), g.dx, 0.5), idx(m.y(), g.dy, 0), idx(m.z(), g.dz, 0.5)), n.y()};
    default: return {&g.Bz(idx(m.x(), g.dx, 0.5), idx(m.y(), g.dy, 0.5), idx(m.z(), g.dz, 0)), n.z()};
  }
}

template <class G>
void load(const emdec::CellComplex& K, const Eigen::VectorXd& E, const Eigen::VectorXd& B, G& g) {
  for (std::size_t e = 0; e < K.num_cells(1); ++e) {
    Slot s = edge_slot(K, e, g);
    *s.value = E[static_cast<Eigen::Index>(e)] / s.scale;
  }
  for (std::size_t f = 0; f < K.num_cells(2); ++f) {
    Slot s = face_slot(K, f, g);
    *s.value = B[static_cast<Eigen::Index>(f)] / s.scale;
  }
}

template <class G>
std::pair<Eigen::VectorXd, Eigen::VectorXd> store(const emdec::CellComplex& K, G& g) {
  Eigen::VectorXd E(static_cast<Eigen::Index>(K.num_cells(1))), B(static_cast<Eigen::Index>(K.num_cells(2)));
  for (std::size_t e = 0; e < K.num_cells(1); ++e) {
    Slot s = edge_slot(K, e, g);
    E[static_cast<Eigen::Index>(e)] = *s.value * s.scale;
  }
  for (std::size_t f = 0; f < K.num_cells(2); ++f) {
    Slot s = face_slot(K, f, g);
    B[static_cast<Eigen::Index>(f)] = *s.value * s.scale;
  }
  return {E, B};
}

// Maximum |DEC - Yee| over all edge and face values after `steps` leapfrog
// steps from (E0, B0), using the same half-step bootstrap as run_sync and
// comparing the state at every whole step.
template <class G, class Dec>
double max_trajectory_gap(const emdec::CellComplex& K, G& g, const Eigen::VectorXd& E0, const Eigen::VectorXd& B0,
                          double dt, std::size_t steps, Dec&& dec_snapshots) {
  load(K, E0, B0, g);
  g.step_e(0.5 * dt);  // bootstrap E^{1/2}
  double gap = 0.0;
  const auto& snaps = dec_snapshots;
  for (std::size_t n = 0; n <= steps; ++n) {
    auto [E, B] = store(K, g);
    gap = std::max(gap, (E - snaps[n].E).cwiseAbs().maxCoeff());
    gap = std::max(gap, (B - snaps[n].B).cwiseAbs().maxCoeff());
    if (n == steps) break;
    g.step_b(dt);
    if (n + 1 < steps) g.step_e(dt);  // the closing step advances B only
  }
  return gap;
}

} // namespace yee

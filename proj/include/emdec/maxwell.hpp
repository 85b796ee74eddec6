#pragma once

// Electromagnetic state on a spatial complex.
//
// E lives on primal edges, B on primal faces. The constitutive stars map
// them to dual quantities:
//   D = eps_star E   (entries eps |*e| / |e|, summed per dual segment)
//   H = inv_mu_star B (entries (1/mu) |*f| / |f|)
// Charge rho sits on dual cells of vertices, current J on dual cells of
// edges (flux through them).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "emdec/dec.hpp"
#include "emdec/dual.hpp"
#include "emdec/error.hpp"
#include "emdec/expression.hpp"
#include "emdec/mesh.hpp"

namespace emdec {

// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw. Spelled
// out instead of std::uniform_real_distribution so streams match across
// standard libraries.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Permittivity and permeability, either one value (uniform) or one value
// per top cell.
struct MaterialParams {
  std::vector<double> epsilon{1.0};
  std::vector<double> mu{1.0};

  double eps_at(std::size_t top) const { return epsilon.size() == 1 ? epsilon[0] : epsilon.at(top); }
  double mu_at(std::size_t top) const { return mu.size() == 1 ? mu[0] : mu.at(top); }

  void validate(std::size_t tops) const {
    for (const auto* v : {&epsilon, &mu}) {
      if (v->size() != 1 && v->size() != tops)
        throw invalid_argument("material: need one value or one per top cell");
      for (double x : *v)
        if (!(x > 0.0) || !std::isfinite(x)) throw invalid_argument("material: epsilon and mu must be positive");
    }
  }
};

// Diagonals of the constitutive stars.
struct ConstitutiveStars {
  Eigen::VectorXd eps;     // per edge
  Eigen::VectorXd inv_mu;  // per face

  OperatorMatrix eps_star() const { return as_diagonal(eps); }
  OperatorMatrix inv_mu_star() const { return as_diagonal(inv_mu); }

  static OperatorMatrix as_diagonal(const Eigen::VectorXd& v) {
    SparseMatrix S(v.size(), v.size());
    S.reserve(Eigen::VectorXi::Constant(v.size(), 1));
    for (Eigen::Index i = 0; i < v.size(); ++i) S.insert(i, i) = v[i];
    S.makeCompressed();
    return {OperatorKind::diagonal, std::move(S)};
  }
};

// Segment-wise material stars: every top cell's piece of a dual cell is
// weighted by that cell's own material.
inline ConstitutiveStars constitutive_stars(const CellComplex& K, const DualComplex& D, const MaterialParams& mat) {
  const int n = K.dim();
  if (n < 2) throw invalid_argument("maxwell: spatial dimension must be 2 or 3");
  mat.validate(K.num_cells(n));
  ConstitutiveStars s;
  s.eps.resize(static_cast<Eigen::Index>(K.num_cells(1)));
  s.inv_mu.resize(static_cast<Eigen::Index>(K.num_cells(2)));
  for (std::size_t e = 0; e < K.num_cells(1); ++e) {
    double acc = 0.0;
    for (const DualPiece& p : D.pieces(1, e)) acc += mat.eps_at(p.top) * p.volume;
    s.eps[static_cast<Eigen::Index>(e)] = acc / D.primal_measure(1, e);
  }
  for (std::size_t f = 0; f < K.num_cells(2); ++f) {
    double acc = 0.0;
    for (const DualPiece& p : D.pieces(2, f)) acc += p.volume / mat.mu_at(p.top);
    s.inv_mu[static_cast<Eigen::Index>(f)] = acc / D.primal_measure(2, f);
  }
  return s;
}

struct FieldState {
  Eigen::VectorXd E, D;  // edges
  Eigen::VectorXd B, H;  // faces
  Eigen::VectorXd rho;   // vertices (dual cells)
  double time_E = 0.0;
  double time_B = 0.0;
};

inline FieldState zero_state(const CellComplex& K) {
  FieldState s;
  s.E = s.D = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K.num_cells(1)));
  s.B = s.H = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K.num_cells(2)));
  s.rho = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K.num_cells(0)));
  return s;
}

// Zeroes E and D on boundary edges.
inline FieldState apply_pec(FieldState s, const CellComplex& K) {
  for (std::size_t e = 0; e < K.num_cells(1); ++e)
    if (K.on_boundary(1, e)) {
      s.E[static_cast<Eigen::Index>(e)] = 0.0;
      if (s.D.size() == s.E.size()) s.D[static_cast<Eigen::Index>(e)] = 0.0;
    }
  return s;
}

// E uniform in [-1, 1] on interior edges (edge order), B = 0, PEC applied.
inline FieldState init_random_E(const CellComplex& K, const ConstitutiveStars& stars, std::uint64_t seed) {
  FieldState s = zero_state(K);
  std::mt19937_64 rng(seed);
  for (std::size_t e = 0; e < K.num_cells(1); ++e) {
    if (K.on_boundary(1, e)) continue;
    s.E[static_cast<Eigen::Index>(e)] = 2.0 * unit_uniform(rng) - 1.0;
  }
  s.D = stars.eps.cwiseProduct(s.E);
  return apply_pec(std::move(s), K);
}

// Gaussian magnetic pulse g(x) = exp(-|x - center|^2 / (2 width^2)), E = 0.
// In 2-D B is g at the circumcenter times the face area; in 3-D B = d1 A with A = g z on interior
// edges, so div B vanishes exactly.
inline FieldState init_pulse_B(const CellComplex& K, const Eigen::VectorXd& center, double width) {
  if (center.size() != K.ambient_dim()) throw invalid_argument("pulse: center has the wrong dimension");
  if (!(width > 0.0)) throw invalid_argument("pulse: width must be positive");
  FieldState s = zero_state(K);
  auto g = [&](const Eigen::VectorXd& x) { return std::exp(-(x - center).squaredNorm() / (2.0 * width * width)); };
  if (K.dim() == 2) {
    for (std::size_t f = 0; f < K.num_cells(2); ++f) {
      // Sampled at the dual vertex: H = *B then sees differences of g along
      // dual edges, so near-cocircular pairs do not kick the stiff modes.
      const Eigen::VectorXd c = cell_circumsphere(K, 2, f).center;
      s.B[static_cast<Eigen::Index>(f)] = g(c) * cell_measure(K, 2, f);
    }
  } else {
    Eigen::VectorXd A = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K.num_cells(1)));
    for (std::size_t e = 0; e < K.num_cells(1); ++e) {
      if (K.on_boundary(1, e)) continue;
      const auto v = K.cell_vertices(1, e);
      const Eigen::VectorXd a = K.point(v[0]), b = K.point(v[1]);
      A[static_cast<Eigen::Index>(e)] = g(0.5 * (a + b)) * (b[2] - a[2]);
    }
    s.B = exterior_derivative(K, 1).matrix * A;
  }
  return s;
}

// Electrostatic state E = d0 phi with phi uniform in [-1, 1] on interior
// vertices and zero on the boundary (so PEC holds and B stays zero).
inline FieldState init_electrostatic(const CellComplex& K, const ConstitutiveStars& stars, std::uint64_t seed) {
  FieldState s = zero_state(K);
  std::mt19937_64 rng(seed);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K.num_cells(0)));
  for (std::size_t v = 0; v < K.num_cells(0); ++v)
    if (!K.on_boundary(0, v)) phi[static_cast<Eigen::Index>(v)] = 2.0 * unit_uniform(rng) - 1.0;
  s.E = exterior_derivative(K, 0).matrix * phi;
  s.D = stars.eps.cwiseProduct(s.E);
  return apply_pec(std::move(s), K);
}

// Current through the dual cell of each edge. A zero source is inactive.
class CurrentSource {
public:
  CurrentSource() = default;
  explicit CurrentSource(std::function<double(std::size_t, double)> per_edge)
      : fn_(std::move(per_edge)) {}

  bool active() const noexcept { return static_cast<bool>(fn_); }
  double operator()(std::size_t edge, double t) const { return fn_ ? fn_(edge, t) : 0.0; }

  Eigen::VectorXd values(std::size_t edges, double t) const {
    Eigen::VectorXd J = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(edges));
    if (fn_)
      for (std::size_t e = 0; e < edges; ++e) J[static_cast<Eigen::Index>(e)] = fn_(e, t);
    return J;
  }

private:
  std::function<double(std::size_t, double)> fn_;
};

// J_e(t) = J(midpoint_e, t) . tangent_e * |*e| from a vector field given as
// component expressions. Boundary edges carry no current under PEC.
inline CurrentSource current_from_expressions(const CellComplex& K, const DualComplex& D,
                                              const std::vector<Expression>& comps) {
  bool all_zero = true;
  for (const auto& c : comps) all_zero = all_zero && c.is_zero();
  if (all_zero) return {};
  struct EdgeGeom {
    Eigen::Vector3d mid, tangent;
    double dual;
    bool boundary;
  };
  auto geom = std::make_shared<std::vector<EdgeGeom>>();
  for (std::size_t e = 0; e < K.num_cells(1); ++e) {
    auto v = K.cell_vertices(1, e);
    const Eigen::VectorXd a = K.point(v[0]), b = K.point(v[1]);
    EdgeGeom g{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), D.dual_measure(1, e), K.on_boundary(1, e)};
    for (Eigen::Index i = 0; i < a.size() && i < 3; ++i) {
      g.mid[i] = 0.5 * (a[i] + b[i]);
      g.tangent[i] = b[i] - a[i];
    }
    g.tangent.normalize();
    geom->push_back(g);
  }
  auto exprs = std::make_shared<std::vector<Expression>>(comps);
  exprs->resize(3);
  return CurrentSource([geom, exprs](std::size_t e, double t) {
    const EdgeGeom& g = (*geom)[e];
    if (g.boundary) return 0.0;
    double acc = 0.0;
    for (int i = 0; i < 3; ++i)
      if (g.tangent[i] != 0.0) acc += (*exprs)[static_cast<std::size_t>(i)](g.mid[0], g.mid[1], g.mid[2], t) * g.tangent[i];
    return acc * g.dual;
  });
}

// max |(rho_next - rho_prev)/dt + div J| with div J = -d0^T J.
inline double continuity_residual(const Eigen::VectorXd& rho_prev, const Eigen::VectorXd& rho_next,
                                  const Eigen::VectorXd& J, double dt, const SparseMatrix& d0) {
  if (!(dt > 0.0)) throw invalid_argument("continuity residual needs dt > 0");
  const Eigen::VectorXd r = (rho_next - rho_prev) / dt - SparseMatrix(d0.transpose()) * J;
  return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

// Everything the integrators need about one spatial discretization.
struct Discretization {
  std::shared_ptr<const CellComplex> mesh;
  DualComplex dual;
  MaterialParams material;
  ConstitutiveStars stars;
  SparseMatrix d0, d1, d2;  // d2 empty in 2-D
  SparseMatrix d0T, d1T;
  Eigen::VectorXd eps_inv;  // zero on boundary edges
  std::vector<char> interior_edge, interior_vertex;
  std::vector<std::string> warnings;

  const CellComplex& K() const { return *mesh; }
  std::size_t num_edges() const { return K().num_cells(1); }
  std::size_t num_faces() const { return K().num_cells(2); }
};

inline Discretization make_discretization(std::shared_ptr<const CellComplex> mesh, MaterialParams mat = {}) {
  if (!mesh) throw invalid_argument("discretization needs a mesh");
  const CellComplex& K = *mesh;
  if (K.dim() != 2 && K.dim() != 3) throw invalid_argument("maxwell: spatial dimension must be 2 or 3");
  if (K.ambient_dim() != K.dim()) throw invalid_argument("maxwell: mesh must fill its ambient space");
  Discretization d{mesh, circumcentric_dual(K), std::move(mat), {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
  d.stars = constitutive_stars(K, d.dual, d.material);
  d.d0 = exterior_derivative(K, 0).matrix;
  d.d1 = exterior_derivative(K, 1).matrix;
  if (K.dim() == 3) d.d2 = exterior_derivative(K, 2).matrix;
  d.d0T = d.d0.transpose();
  d.d1T = d.d1.transpose();
  const std::size_t ne = K.num_cells(1);
  d.eps_inv = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ne));
  d.interior_edge.assign(ne, 0);
  for (std::size_t e = 0; e < ne; ++e) {
    if (K.on_boundary(1, e)) continue;
    d.interior_edge[e] = 1;
    const double eps = d.stars.eps[static_cast<Eigen::Index>(e)];
    if (eps == 0.0) throw DegenerateMeshError(1, e, "interior edge has zero dual length");
    if (eps < 0.0) d.warnings.push_back("edge " + std::to_string(e) + ": negative dual length");
    d.eps_inv[static_cast<Eigen::Index>(e)] = 1.0 / eps;
  }
  d.interior_vertex.assign(K.num_cells(0), 0);
  for (std::size_t v = 0; v < K.num_cells(0); ++v) d.interior_vertex[v] = K.on_boundary(0, v) ? 0 : 1;
  return d;
}

inline Discretization make_discretization(CellComplex K, MaterialParams mat = {}) {
  return make_discretization(std::make_shared<const CellComplex>(std::move(K)), std::move(mat));
}

} // namespace emdec

#pragma once

// Cochains and the DEC operators d, star, delta and the boundary pairing,
// all as sparse matrices over the canonical cell order of a CellComplex.

#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "emdec/csv.hpp"
#include "emdec/dual.hpp"
#include "emdec/error.hpp"
#include "emdec/mesh.hpp"

namespace emdec {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using IntSparseMatrix = Eigen::SparseMatrix<int, Eigen::RowMajor>;

enum class Placement { primal, dual };

// A discrete k-form: one value per (primal k- or dual k-) cell.
class Cochain {
public:
  Cochain(int degree, Placement placement, Eigen::VectorXd values)
      : degree_(degree), placement_(placement), values_(std::move(values)) {
    if (!values_.allFinite()) throw invalid_argument("cochain values must be finite");
  }

  static Cochain zeros(const CellComplex& K, int degree, Placement p = Placement::primal) {
    const int cells = p == Placement::primal ? degree : K.dim() - degree;
    return Cochain(degree, p, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K.num_cells(cells))));
  }

  int degree() const noexcept { return degree_; }
  Placement placement() const noexcept { return placement_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

private:
  int degree_;
  Placement placement_;
  Eigen::VectorXd values_;
};

enum class OperatorKind { incidence, diagonal, general };

struct OperatorMatrix {
  OperatorKind kind = OperatorKind::general;
  SparseMatrix matrix;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }
  Eigen::VectorXd operator*(const Eigen::VectorXd& x) const { return matrix * x; }
  Eigen::VectorXd diagonal() const { return Eigen::VectorXd(matrix.diagonal()); }
};

// Signed incidence d_k: k-cochains -> (k+1)-cochains, as an integer matrix.
inline IntSparseMatrix incidence_matrix(const CellComplex& K, int k) {
  if (k < 0 || k >= K.dim())
    throw invalid_argument("exterior derivative degree " + std::to_string(k) + " out of range [0, " +
                           std::to_string(K.dim()) + ")");
  std::vector<Eigen::Triplet<int>> trip;
  for (std::size_t c = 0; c < K.num_cells(k + 1); ++c)
    for (const Incidence& inc : K.boundary(k + 1, c))
      trip.emplace_back(static_cast<int>(c), static_cast<int>(inc.cell), inc.sign);
  IntSparseMatrix d(static_cast<Eigen::Index>(K.num_cells(k + 1)), static_cast<Eigen::Index>(K.num_cells(k)));
  d.setFromTriplets(trip.begin(), trip.end());
  return d;
}

inline OperatorMatrix exterior_derivative(const CellComplex& K, int k) {
  return {OperatorKind::incidence, incidence_matrix(K, k).cast<double>()};
}

// True when d_{k+1} d_k vanishes exactly for every k.
inline bool d_squared_is_zero(const CellComplex& K) {
  for (int k = 0; k + 2 <= K.dim(); ++k) {
    IntSparseMatrix p = incidence_matrix(K, k + 1) * incidence_matrix(K, k);
    p.prune(0);
    if (p.nonZeros() != 0) return false;
  }
  return true;
}

// Diagonal Hodge star on primal k-cells: kappa |*s| / |s|.
// `causality` may be empty (all +1) or hold one sign per k-cell.
inline OperatorMatrix hodge_star(const CellComplex& K, const DualComplex& D, int k,
                                 const std::vector<int>& causality = {}) {
  if (k < 0 || k > K.dim()) throw invalid_argument("hodge star degree out of range");
  const std::size_t m = K.num_cells(k);
  if (!causality.empty() && causality.size() != m)
    throw invalid_argument("causality vector length mismatch");
  SparseMatrix S(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  S.reserve(Eigen::VectorXi::Constant(static_cast<Eigen::Index>(m), 1));
  for (std::size_t i = 0; i < m; ++i) {
    const double p = D.primal_measure(k, i);
    if (p == 0.0) throw numeric_error("hodge star: zero primal measure on " + std::to_string(k) + "-cell " + std::to_string(i));
    const int kap = causality.empty() ? 1 : causality[i];
    if (kap != 1 && kap != -1) throw invalid_argument("causality sign must be +1 or -1");
    S.insert(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = kap * D.dual_measure(k, i) / p;
  }
  S.makeCompressed();
  return {OperatorKind::diagonal, std::move(S)};
}

// Elementwise inverse of a diagonal star. Zero entries (flat boundary
// shells) stay zero; they are never inverted by the schemes.
inline OperatorMatrix inverse_diagonal(const OperatorMatrix& star) {
  if (star.kind != OperatorKind::diagonal) throw invalid_argument("inverse_diagonal needs a diagonal operator");
  SparseMatrix S = star.matrix;
  for (int o = 0; o < S.outerSize(); ++o)
    for (SparseMatrix::InnerIterator it(S, o); it; ++it)
      it.valueRef() = it.value() != 0.0 ? 1.0 / it.value() : 0.0;
  return {OperatorKind::diagonal, std::move(S)};
}

// (alpha, beta) = alpha^T star beta.
inline double inner_product(const OperatorMatrix& star, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != star.cols() || b.size() != star.cols())
    throw invalid_argument("inner product: cochain length does not match star");
  return a.dot(star.matrix * b);
}

inline double inner_product(const CellComplex& K, const DualComplex& D, const Cochain& a, const Cochain& b,
                            const std::vector<int>& causality = {}) {
  if (a.degree() != b.degree() || a.placement() != b.placement())
    throw invalid_argument("inner product: degree or placement mismatch");
  if (a.placement() != Placement::primal) throw invalid_argument("inner product defined on primal cochains");
  return inner_product(hodge_star(K, D, a.degree(), causality), a.values(), b.values());
}

// delta_k: k-cochains -> (k-1)-cochains,
//   delta_k = star_{k-1}^{-1} P d_{k-1}^T star_k
// where P zeroes rows of boundary (k-1)-cells. The boundary rows are what
// the boundary pairing picks up in integration by parts.
inline OperatorMatrix codifferential(const CellComplex& K, const DualComplex& D, int k) {
  if (k < 1 || k > K.dim()) throw invalid_argument("codifferential degree out of range");
  const OperatorMatrix sk = hodge_star(K, D, k);
  const OperatorMatrix skm1 = hodge_star(K, D, k - 1);
  const std::size_t m = K.num_cells(k - 1);
  SparseMatrix P(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < m; ++i) {
    if (K.on_boundary(k - 1, i)) continue;
    const double s = skm1.matrix.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    if (s == 0.0)
      throw numeric_error("codifferential: zero dual measure on interior " + std::to_string(k - 1) + "-cell " +
                          std::to_string(i));
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0 / s);
  }
  P.setFromTriplets(trip.begin(), trip.end());
  const SparseMatrix dT = SparseMatrix(exterior_derivative(K, k - 1).matrix.transpose());
  SparseMatrix out = P * dT * sk.matrix;
  return {OperatorKind::general, std::move(out)};
}

// Boundary pairing <alpha ^ *beta, dK>: alpha on boundary (k-1)-cells
// against star beta collected over the cofaces of each boundary cell.
inline double boundary_pairing(const CellComplex& K, const DualComplex& D, const Eigen::VectorXd& alpha,
                               const Eigen::VectorXd& beta, int k) {
  double sum = 0.0;
  for (std::size_t t = 0; t < K.num_cells(k - 1); ++t) {
    if (!K.on_boundary(k - 1, t)) continue;
    double flux = 0.0;
    for (const Incidence& inc : K.cofaces(k - 1, t))
      flux += inc.sign * (D.dual_measure(k, inc.cell) / D.primal_measure(k, inc.cell)) *
              beta[static_cast<Eigen::Index>(inc.cell)];
    sum += alpha[static_cast<Eigen::Index>(t)] * flux;
  }
  return sum;
}

// (d alpha, beta) - (alpha, delta beta) - <alpha ^ *beta, dK>, alpha a
// (k-1)-cochain and beta a k-cochain.
inline double ibp_residual(const CellComplex& K, const DualComplex& D, const Eigen::VectorXd& alpha,
                           const Eigen::VectorXd& beta, int k) {
  if (k < 1 || k > K.dim()) throw invalid_argument("ibp: degree out of range");
  if (static_cast<std::size_t>(alpha.size()) != K.num_cells(k - 1) ||
      static_cast<std::size_t>(beta.size()) != K.num_cells(k))
    throw invalid_argument("ibp: cochain length mismatch");
  const Eigen::VectorXd dalpha = exterior_derivative(K, k - 1).matrix * alpha;
  const double lhs = inner_product(hodge_star(K, D, k), dalpha, beta);
  const Eigen::VectorXd dbeta = codifferential(K, D, k).matrix * beta;
  const double rhs = inner_product(hodge_star(K, D, k - 1), alpha, dbeta);
  return lhs - rhs - boundary_pairing(K, D, alpha, beta, k);
}

// Cochain dump: cell_index,value.
inline void write_cochain_csv(std::ostream& out, const Eigen::VectorXd& v) {
  out << "cell_index,value\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) out << i << ',' << format_double(v[i]) << '\n';
}

// Operator dump: row,col,value triples in row-major order.
inline void write_operator_csv(std::ostream& out, const SparseMatrix& M) {
  out << "row,col,value\n";
  for (int r = 0; r < M.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(M, r); it; ++it)
      out << it.row() << ',' << it.col() << ',' << format_double(it.value()) << '\n';
}

} // namespace emdec

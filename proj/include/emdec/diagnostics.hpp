#pragma once

// Energy, constraint residuals, the multisymplectic boundary residual,
// periodogram spectra and energy-drift analysis.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>

#include "emdec/error.hpp"
#include "emdec/maxwell.hpp"

namespace emdec {

struct EnergySample {
  double time = 0.0;
  double electric = 0.0;
  double magnetic = 0.0;
  double total = 0.0;
};

// 1/2 Ebar^T eps Ebar + 1/2 B^T inv_mu B, with Ebar the average of the
// two half-step values bracketing the sample time.
inline EnergySample energy(double time, const Eigen::VectorXd& E_prev, const Eigen::VectorXd& E,
                           const Eigen::VectorXd& B, const ConstitutiveStars& stars) {
  EnergySample s;
  s.time = time;
  const Eigen::VectorXd Ebar = 0.5 * (E_prev + E);
  s.electric = 0.5 * Ebar.dot(stars.eps.cwiseProduct(Ebar));
  s.magnetic = 0.5 * B.dot(stars.inv_mu.cwiseProduct(B));
  s.total = s.electric + s.magnetic;
  return s;
}

inline EnergySample energy(double time, const FieldState& s, const ConstitutiveStars& stars) {
  return energy(time, s.E, s.E, s.B, stars);
}

// max over interior vertices of |div D - rho|, div D = -d0^T D.
inline double gauss_residual(const Eigen::VectorXd& D, const Eigen::VectorXd& rho, const Discretization& disc) {
  const Eigen::VectorXd divD = -(disc.d0T * D);
  double r = 0.0;
  for (std::size_t v = 0; v < disc.interior_vertex.size(); ++v)
    if (disc.interior_vertex[v]) {
      const double rv = rho.size() ? rho[static_cast<Eigen::Index>(v)] : 0.0;
      r = std::max(r, std::abs(divD[static_cast<Eigen::Index>(v)] - rv));
    }
  return r;
}

// max |d2 B| over 3-cells; 0 in two dimensions where the identity is vacuous.
inline double divb_residual(const Eigen::VectorXd& B, const Discretization& disc) {
  if (disc.K().dim() < 3) return 0.0;
  const Eigen::VectorXd r = disc.d2 * B;
  return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

// ---------------------------------------------------------------------------
// Multisymplectic form formula.

// Potential levels A^0..A^N at uniform spacing dt (source free, B = d1 A).
struct PotentialHistory {
  double dt = 0.0;
  std::vector<Eigen::VectorXd> A;
};

// Spacetime block: spatial top cells R times levels n0..n1.
struct SpacetimeBlock {
  std::vector<std::size_t> cells;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
};

// max |Euler-Lagrange residual| at interior edges and interior levels.
inline double el_residual(const Discretization& disc, const PotentialHistory& h) {
  const auto& A = h.A;
  double r = 0.0;
  for (std::size_t n = 1; n + 1 < A.size(); ++n) {
    const Eigen::VectorXd Ep = -(A[n + 1] - A[n]) / h.dt;
    const Eigen::VectorXd Em = -(A[n] - A[n - 1]) / h.dt;
    const Eigen::VectorXd H = disc.stars.inv_mu.cwiseProduct(disc.d1 * A[n]);
    const Eigen::VectorXd g = disc.stars.eps.cwiseProduct(Ep - Em) - h.dt * (disc.d1T * H);
    for (std::size_t e = 0; e < disc.num_edges(); ++e)
      if (disc.interior_edge[e]) r = std::max(r, std::abs(g[static_cast<Eigen::Index>(e)]));
  }
  return r;
}

namespace detail {

struct RestrictedStars {
  Eigen::VectorXd eps, inv_mu;
  std::vector<char> r_interior;
};

inline RestrictedStars restrict_stars(const Discretization& disc, const std::vector<std::size_t>& cells) {
  const CellComplex& K = disc.K();
  const int n = K.dim();
  std::vector<char> in(K.num_cells(n), 0);
  for (std::size_t c : cells) {
    if (c >= in.size()) throw invalid_argument("block cell index out of range");
    in[c] = 1;
  }
  RestrictedStars s;
  s.eps = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K.num_cells(1)));
  s.inv_mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K.num_cells(2)));
  s.r_interior.assign(K.num_cells(1), 0);
  for (std::size_t e = 0; e < K.num_cells(1); ++e) {
    double acc = 0.0;
    for (const DualPiece& p : disc.dual.pieces(1, e))
      if (in[p.top]) acc += disc.material.eps_at(p.top) * p.volume;
    s.eps[static_cast<Eigen::Index>(e)] = acc / disc.dual.primal_measure(1, e);
    if (!K.on_boundary(1, e)) {
      auto tops = K.incident_top_cells(1, e);
      s.r_interior[e] = std::all_of(tops.begin(), tops.end(), [&](std::size_t t) { return in[t] != 0; });
    }
  }
  for (std::size_t f = 0; f < K.num_cells(2); ++f) {
    double acc = 0.0;
    for (const DualPiece& p : disc.dual.pieces(2, f))
      if (in[p.top]) acc += p.volume / disc.material.mu_at(p.top);
    s.inv_mu[static_cast<Eigen::Index>(f)] = acc / disc.dual.primal_measure(2, f);
  }
  return s;
}

// Derivative of the block-restricted discrete action with respect to A(e, n).
inline std::vector<Eigen::VectorXd> block_action_gradient(const Discretization& disc, const RestrictedStars& rs,
                                                          const PotentialHistory& h, const SpacetimeBlock& blk) {
  std::vector<Eigen::VectorXd> G;
  for (std::size_t n = blk.n0; n <= blk.n1; ++n) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(disc.num_edges()));
    if (n < blk.n1) g += rs.eps.cwiseProduct(-(h.A[n + 1] - h.A[n]) / h.dt);
    if (n > blk.n0) g -= rs.eps.cwiseProduct(-(h.A[n] - h.A[n - 1]) / h.dt);
    const double w = (n == blk.n0 || n == blk.n1) ? 0.5 : 1.0;
    g -= w * h.dt * (disc.d1T * rs.inv_mu.cwiseProduct(disc.d1 * h.A[n]));
    G.push_back(std::move(g));
  }
  return G;
}

} // namespace detail

// |sum over boundary degrees of freedom of (alpha . G beta - beta . G alpha)|
// where G is the gradient of the action restricted to the block. Boundary
// degrees of freedom are the first and last levels plus every edge that
// is not surrounded by block cells.
inline double multisymplectic_residual(const Discretization& disc, const PotentialHistory& alpha,
                                       const PotentialHistory& beta, const SpacetimeBlock& blk,
                                       double el_tolerance = 1e-8) {
  if (alpha.A.size() != beta.A.size() || alpha.dt != beta.dt)
    throw invalid_argument("multisymplectic: histories must share levels and dt");
  if (!(blk.n0 < blk.n1) || blk.n1 >= alpha.A.size())
    throw invalid_argument("multisymplectic: block levels out of range");
  if (blk.cells.empty()) throw invalid_argument("multisymplectic: empty block");
  for (const auto* h : {&alpha, &beta}) {
    const double r = el_residual(disc, *h);
    if (!(r <= el_tolerance))
      throw invalid_argument("multisymplectic: input is not a discrete solution (residual " + std::to_string(r) + ")");
  }
  const auto rs = detail::restrict_stars(disc, blk.cells);
  const auto Ga = detail::block_action_gradient(disc, rs, alpha, blk);
  const auto Gb = detail::block_action_gradient(disc, rs, beta, blk);
  double sum = 0.0;
  for (std::size_t n = blk.n0; n <= blk.n1; ++n) {
    const bool end_level = n == blk.n0 || n == blk.n1;
    const auto& a = alpha.A[n];
    const auto& b = beta.A[n];
    const auto& ga = Ga[n - blk.n0];
    const auto& gb = Gb[n - blk.n0];
    for (std::size_t e = 0; e < disc.num_edges(); ++e) {
      if (!end_level && rs.r_interior[e]) continue;
      const auto i = static_cast<Eigen::Index>(e);
      sum += a[i] * gb[i] - b[i] * ga[i];
    }
  }
  return std::abs(sum);
}

// ---------------------------------------------------------------------------
// Spectra.

struct Spectrum {
  double bin = 0.0;
  std::vector<double> frequency;  // bins 1..N/2
  std::vector<double> power;
  std::vector<double> peaks;  // ascending
};

namespace detail {

inline std::vector<std::size_t> prominent_peaks(const std::vector<double>& p, double threshold) {
  std::vector<std::size_t> out;
  const std::size_t m = p.size();
  for (std::size_t i = 0; i < m; ++i) {
    const bool left_ok = i == 0 || p[i] > p[i - 1];
    const bool right_ok = i + 1 == m || p[i] >= p[i + 1];
    if (!left_ok || !right_ok) continue;
    // Topographic prominence: drop to the higher of the two saddles.
    double left_min = p[i], right_min = p[i];
    std::size_t j = i;
    while (j > 0 && p[j - 1] <= p[i]) left_min = std::min(left_min, p[--j]);
    j = i;
    while (j + 1 < m && p[j + 1] <= p[i]) right_min = std::min(right_min, p[++j]);
    const double base = std::max(left_min, right_min);
    if (p[i] - base >= threshold) out.push_back(i);
  }
  return out;
}

} // namespace detail

// Periodogram of the mean-removed series: power_k = |X_k|^2 / N at
// frequency k / (N dt), k = 1..N/2. Peaks are local maxima whose
// prominence is at least `prominence_factor` times the median power.
inline Spectrum spectrum(const std::vector<double>& series, double dt, double prominence_factor = 10.0) {
  const std::size_t N = series.size();
  if (N < 16) throw invalid_argument("spectrum: need at least 16 samples, got " + std::to_string(N));
  if (!(dt > 0.0)) throw invalid_argument("spectrum: sample spacing must be positive");
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(N);
  std::vector<double> in(N);
  for (std::size_t i = 0; i < N; ++i) in[i] = series[i] - mean;
  std::vector<std::complex<double>> out(N / 2 + 1);
  {
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(N), in.data(),
                                          reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    if (!plan) throw numeric_error("spectrum: FFT plan creation failed");
    std::unique_ptr<std::remove_pointer_t<fftw_plan>, decltype(&fftw_destroy_plan)> guard(plan, &fftw_destroy_plan);
    // FFTW_ESTIMATE planning leaves `in` untouched; fill happened above.
    fftw_execute(plan);
  }
  Spectrum s;
  s.bin = 1.0 / (static_cast<double>(N) * dt);
  for (std::size_t k = 1; k <= N / 2; ++k) {
    s.frequency.push_back(static_cast<double>(k) * s.bin);
    s.power.push_back(std::norm(out[k]) / static_cast<double>(N));
  }
  std::vector<double> sorted = s.power;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double median = sorted[sorted.size() / 2];
  // Powers at round-off level relative to the raw series are never peaks.
  double sumsq = 0.0;
  for (double x : series) sumsq += x * x;
  const double floor = 1e-20 * sumsq;
  for (std::size_t i : detail::prominent_peaks(s.power, std::max(prominence_factor * median, floor)))
    s.peaks.push_back(s.frequency[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Energy drift.

struct DriftReport {
  double slope = 0.0;          // least-squares d(energy)/dt
  double mean = 0.0;
  double drift_fraction = 0.0; // |slope| * duration / mean
  double max_excursion = 0.0;  // max |e - e0| / mean

  bool pass(double drift_tol = 0.01, double excursion_tol = 0.10) const {
    return drift_fraction < drift_tol && max_excursion < excursion_tol;
  }
};

inline DriftReport analyze_drift(const std::vector<double>& t, const std::vector<double>& e) {
  if (t.size() != e.size() || t.size() < 2) throw invalid_argument("drift: need at least two samples");
  const double n = static_cast<double>(t.size());
  const double tm = std::accumulate(t.begin(), t.end(), 0.0) / n;
  const double em = std::accumulate(e.begin(), e.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sxy += (t[i] - tm) * (e[i] - em);
    sxx += (t[i] - tm) * (t[i] - tm);
  }
  DriftReport r;
  r.mean = em;
  r.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  const double duration = t.back() - t.front();
  if (em != 0.0) {
    r.drift_fraction = std::abs(r.slope) * duration / std::abs(em);
    for (double x : e) r.max_excursion = std::max(r.max_excursion, std::abs(x - e.front()) / std::abs(em));
  }
  return r;
}

} // namespace emdec

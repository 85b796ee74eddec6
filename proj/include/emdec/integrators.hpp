#pragma once

// Time integrators over one spatial discretization:
//   run_sync  leapfrog with a uniform step (Yee on grids, Bossavit-Kettunen
//             on unstructured meshes; same code path)
//   run_avi   asynchronous variational integrator, one time set per face,
//             driven by a priority queue of face events.
// Both sample probes, energy and constraint residuals on a uniform output
// clock with zero-order hold.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "emdec/diagnostics.hpp"
#include "emdec/error.hpp"
#include "emdec/maxwell.hpp"

namespace emdec {

// ---------------------------------------------------------------------------
// Stability limits.

// Largest generalized eigenvalue of curl-curl K x = lambda eps x restricted
// to interior edges, by power iteration on eps^{-1} K.
inline double curl_curl_lambda_max(const Discretization& disc, std::uint64_t seed = 0x5eedULL,
                                   int max_iter = 10000, double tol = 1e-6) {
  const auto ne = static_cast<Eigen::Index>(disc.num_edges());
  for (Eigen::Index e = 0; e < ne; ++e)
    if (disc.interior_edge[static_cast<std::size_t>(e)] && !(disc.stars.eps[e] > 0.0))
      throw numeric_error("cfl: non-positive permittivity star on interior edge " + std::to_string(e) +
                          " (mesh not well centered)");
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(ne);
  for (Eigen::Index e = 0; e < ne; ++e) mask[e] = disc.interior_edge[static_cast<std::size_t>(e)] ? 1.0 : 0.0;
  if (mask.sum() == 0.0) throw numeric_error("cfl: mesh has no interior edges");
  std::mt19937_64 rng(seed);
  Eigen::VectorXd x(ne);
  for (Eigen::Index e = 0; e < ne; ++e) x[e] = mask[e] * (2.0 * unit_uniform(rng) - 1.0);
  auto apply_K = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd y = disc.d1T * disc.stars.inv_mu.cwiseProduct(disc.d1 * v);
    return Eigen::VectorXd(y.cwiseProduct(mask));
  };
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd Kx = apply_K(x);
    const double num = x.dot(Kx);
    const double den = x.dot(disc.stars.eps.cwiseProduct(x));
    const double next = num / den;
    Eigen::VectorXd y = disc.eps_inv.cwiseProduct(Kx);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    x = y / norm;
    if (it > 0 && std::abs(next - lambda) <= tol * std::abs(next)) return next;
    lambda = next;
  }
  throw numeric_error("cfl: power iteration did not converge in " + std::to_string(max_iter) + " iterations");
}

// Global stability limit 2 / sqrt(lambda_max).
inline double cfl_dt(const Discretization& disc, std::uint64_t seed = 0x5eedULL) {
  const double lam = curl_curl_lambda_max(disc, seed);
  if (!(lam > 0.0)) return std::numeric_limits<double>::infinity();
  return 2.0 / std::sqrt(lam);
}

// Per-face limits from Gershgorin row sums of the same operator, taken over
// the face's interior edges. Faces without interior edges get the global
// value passed in.
inline std::vector<double> local_cfl_dt(const Discretization& disc, double fallback) {
  const CellComplex& K = disc.K();
  const std::size_t ne = disc.num_edges();
  std::vector<double> row(ne, 0.0);
  for (std::size_t e = 0; e < ne; ++e) {
    if (!disc.interior_edge[e]) continue;
    double acc = 0.0;
    for (const Incidence& f : K.cofaces(1, e)) {
      double cnt = 0.0;
      for (const Incidence& g : K.boundary(2, f.cell)) cnt += disc.interior_edge[g.cell] ? 1.0 : 0.0;
      acc += std::abs(disc.stars.inv_mu[static_cast<Eigen::Index>(f.cell)]) * cnt;
    }
    row[e] = acc * std::abs(disc.eps_inv[static_cast<Eigen::Index>(e)]);
  }
  std::vector<double> out(disc.num_faces(), fallback);
  for (std::size_t f = 0; f < disc.num_faces(); ++f) {
    double lam = 0.0;
    for (const Incidence& g : K.boundary(2, f)) lam = std::max(lam, row[g.cell]);
    if (lam > 0.0) out[f] = 2.0 / std::sqrt(lam);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared run plumbing.

struct Probe {
  enum class Kind { edge, face } kind = Kind::face;
  std::size_t index = 0;
};

struct Snapshot {
  double time = 0.0;
  Eigen::VectorXd E, B;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> probes;  // one row per tick
  std::vector<EnergySample> energy;
  std::vector<double> gauss;
  std::vector<double> divb;
  std::vector<Snapshot> snapshots;
  FieldState final_state;
  std::size_t events = 0;
};

struct OutputOptions {
  double interval = 0.0;  // <= 0: one tick per (global) step
  std::vector<Probe> probes;
  std::size_t snapshot_every = 0;  // ticks between snapshots, 0 = none
  double blowup_factor = 1e6;
};

// Raised when the field max-norm exceeds blowup_factor x its initial value.
class BlowUpError : public Error {
public:
  BlowUpError(double time, std::size_t events, double norm, double limit)
      : Error(ErrorKind::numeric, "instability: field max-norm " + std::to_string(norm) + " exceeds " +
                                      std::to_string(limit) + " at t = " + std::to_string(time) + " after " +
                                      std::to_string(events) + " updates"),
        time_(time), events_(events) {}
  double time() const noexcept { return time_; }
  std::size_t events() const noexcept { return events_; }

private:
  double time_;
  std::size_t events_;
};

namespace detail {

// Uniform output clock. A tick at T is emitted just before the first event
// later than T, so events at exactly T are already applied.
class OutputClock {
public:
  OutputClock(double t0, double t_final, double interval)
      : t0_(t0), t_final_(t_final), h_(interval), slack_(1e-9 * interval) {}

  template <class Fn>
  void advance_to(double t_event, Fn&& sample) {
    while (has_tick() && tick_time() < t_event - slack_) emit(sample);
  }
  template <class Fn>
  void finish(Fn&& sample) {
    while (has_tick()) emit(sample);
  }

private:
  bool has_tick() const { return tick_time() <= t_final_ + slack_; }
  double tick_time() const { return t0_ + static_cast<double>(k_) * h_; }
  template <class Fn>
  void emit(Fn& sample) {
    sample(std::min(tick_time(), std::max(t_final_, t0_)), k_);
    ++k_;
  }

  double t0_, t_final_, h_, slack_;
  std::size_t k_ = 0;
};

inline double max_norm(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double m = 0.0;
  if (a.size()) m = std::max(m, a.cwiseAbs().maxCoeff());
  if (b.size()) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

inline void check_probes(const Discretization& disc, const std::vector<Probe>& probes) {
  for (const Probe& p : probes) {
    const std::size_t lim = p.kind == Probe::Kind::edge ? disc.num_edges() : disc.num_faces();
    if (p.index >= lim)
      throw invalid_argument(std::string("probe ") + (p.kind == Probe::Kind::edge ? "edge:" : "face:") +
                             std::to_string(p.index) + " out of range (" + std::to_string(lim) + ")");
  }
}

// Records one tick from the current representative vectors.
struct Recorder {
  const Discretization& disc;
  const OutputOptions& opts;
  Trajectory& traj;

  void operator()(double t, std::size_t k, const Eigen::VectorXd& E_prev, const Eigen::VectorXd& E,
                  const Eigen::VectorXd& B, const Eigen::VectorXd& rho) const {
    traj.times.push_back(t);
    std::vector<double> row;
    for (const Probe& p : opts.probes)
      row.push_back(p.kind == Probe::Kind::edge ? E[static_cast<Eigen::Index>(p.index)]
                                                : B[static_cast<Eigen::Index>(p.index)]);
    traj.probes.push_back(std::move(row));
    traj.energy.push_back(energy(t, E_prev, E, B, disc.stars));
    traj.gauss.push_back(gauss_residual(disc.stars.eps.cwiseProduct(E), rho, disc));
    traj.divb.push_back(divb_residual(B, disc));
    if (opts.snapshot_every > 0 && k % opts.snapshot_every == 0) traj.snapshots.push_back({t, E, B});
  }
};

} // namespace detail

// ---------------------------------------------------------------------------
// Synchronous leapfrog.

// E^{1/2} = E^0 + (h/2) eps^{-1} (d1^T H^0 - J^0) on interior edges, with the
// matching half-step of charge. `h` is the first step.
inline FieldState bootstrap_half_step(FieldState s, const Discretization& disc, double h,
                                      const Eigen::VectorXd& J0) {
  s.H = disc.stars.inv_mu.cwiseProduct(s.B);
  Eigen::VectorXd rhs = disc.d1T * s.H;
  if (J0.size()) {
    rhs -= J0;
    s.rho += 0.5 * h * (disc.d0T * J0);
  }
  s.E += 0.5 * h * disc.eps_inv.cwiseProduct(rhs);
  s = apply_pec(std::move(s), disc.K());
  s.D = disc.stars.eps.cwiseProduct(s.E);
  s.time_E = s.time_B + 0.5 * h;
  return s;
}

// One leapfrog step: B^{n+1}, H^{n+1}, then (unless update_E is false)
// D and E at n+3/2. `J_next` is J^{n+1} (may be empty for no source).
inline FieldState leapfrog_step(FieldState s, double dt, const Discretization& disc, const Eigen::VectorXd& J_next,
                                bool update_E = true) {
  const double expect = s.time_B + 0.5 * dt;
  if (std::abs(s.time_E - expect) > 1e-9 * std::max({1.0, std::abs(expect)}))
    throw invalid_argument("leapfrog: E must sit half a step after B (E at " + std::to_string(s.time_E) +
                           ", B at " + std::to_string(s.time_B) + ")");
  s.B -= dt * (disc.d1 * s.E);
  s.H = disc.stars.inv_mu.cwiseProduct(s.B);
  s.time_B += dt;
  if (!update_E) return s;
  Eigen::VectorXd rhs = disc.d1T * s.H;
  if (J_next.size()) {
    rhs -= J_next;
    s.rho += dt * (disc.d0T * J_next);
  }
  for (std::size_t e = 0; e < disc.num_edges(); ++e) {
    const auto i = static_cast<Eigen::Index>(e);
    if (disc.interior_edge[e]) {
      s.D[i] += dt * rhs[i];
      s.E[i] = s.D[i] * disc.eps_inv[i];
    } else {
      s.D[i] = 0.0;
      s.E[i] = 0.0;
    }
  }
  s.time_E += dt;
  return s;
}

struct SyncPlan {
  std::size_t steps = 0;
  double dt = 0.0;
};

// Number of steps and the step actually used: t_final is hit exactly and
// the step never exceeds the requested one.
inline SyncPlan plan_sync(double t0, double t_final, double dt) {
  if (!(dt > 0.0)) throw invalid_argument("time step must be positive");
  SyncPlan p;
  const double span = t_final - t0;
  if (!(span > 0.0)) return {0, dt};
  p.steps = static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
  if (p.steps == 0) p.steps = 1;
  p.dt = span / static_cast<double>(p.steps);
  return p;
}

// Leapfrog from t0 to t_final. The last step advances B only, so the final
// state carries B(t_final) and the last half-step E, matching run_avi.
inline Trajectory run_sync(const Discretization& disc, FieldState s, double t0, double t_final, double dt,
                           const OutputOptions& opts = {}, const CurrentSource& src = {}) {
  detail::check_probes(disc, opts.probes);
  const SyncPlan plan = plan_sync(t0, t_final, dt);
  const double h = plan.dt;
  Trajectory traj;
  detail::Recorder rec{disc, opts, traj};
  s = apply_pec(std::move(s), disc.K());
  s.time_B = s.time_E = t0;
  s.H = disc.stars.inv_mu.cwiseProduct(s.B);
  s.D = disc.stars.eps.cwiseProduct(s.E);
  if (s.rho.size() == 0) s.rho = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(disc.K().num_cells(0)));
  const double limit = opts.blowup_factor * detail::max_norm(s.E, s.B);
  const std::size_t ne = disc.num_edges();
  auto J_at = [&](double t) { return src.active() ? src.values(ne, t) : Eigen::VectorXd(); };

  Eigen::VectorXd E_prev = s.E;
  if (plan.steps > 0) {
    const Eigen::VectorXd E0 = s.E;
    s = bootstrap_half_step(std::move(s), disc, h, J_at(t0));
    E_prev = 2.0 * E0 - s.E;  // so the t0 sample averages back to E^0
  }
  detail::OutputClock clock(t0, t_final, opts.interval > 0.0 ? opts.interval : h);
  auto sample = [&](double t, std::size_t k) { rec(t, k, E_prev, s.E, s.B, s.rho); };

  for (std::size_t n = 1; n <= plan.steps; ++n) {
    const double t = t0 + static_cast<double>(n) * h;
    clock.advance_to(t, sample);
    const bool last = n == plan.steps;
    Eigen::VectorXd E_old = s.E;
    s = leapfrog_step(std::move(s), h, disc, last ? Eigen::VectorXd() : J_at(t), !last);
    // On the closing step E is not advanced; both schedulers then hold E.
    E_prev = last ? s.E : std::move(E_old);
    ++traj.events;
    if (limit > 0.0) {
      const double m = detail::max_norm(s.E, s.B);
      if (!(m <= limit)) throw BlowUpError(t, traj.events, m, limit);
    }
  }
  if (plan.steps > 0) s.time_B = t_final;
  clock.finish(sample);
  traj.final_state = std::move(s);
  return traj;
}

// Source-free potential history: A^{n+1} from A^n, A^{n-1} by the discrete
// Euler-Lagrange equations (boundary edges held at zero).
inline PotentialHistory solve_potential_history(const Discretization& disc, const Eigen::VectorXd& A0,
                                                const Eigen::VectorXd& A1, std::size_t levels, double dt) {
  PotentialHistory h;
  h.dt = dt;
  auto pin = [&](Eigen::VectorXd a) {
    for (std::size_t e = 0; e < disc.num_edges(); ++e)
      if (!disc.interior_edge[e]) a[static_cast<Eigen::Index>(e)] = 0.0;
    return a;
  };
  h.A.push_back(pin(A0));
  if (levels > 1) h.A.push_back(pin(A1));
  while (h.A.size() < levels) {
    const std::size_t n = h.A.size() - 1;
    const Eigen::VectorXd Em = -(h.A[n] - h.A[n - 1]) / dt;
    const Eigen::VectorXd H = disc.stars.inv_mu.cwiseProduct(disc.d1 * h.A[n]);
    const Eigen::VectorXd Ep = Em + dt * disc.eps_inv.cwiseProduct(disc.d1T * H);
    h.A.push_back(pin(h.A[n] - dt * Ep));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Asynchronous schedules.

// Per-face arithmetic time sets Theta_f = { t0 + j dt_f <= t_final }. A
// time within 1e-12 (relative) of t_final is snapped onto it.
class TimeSchedule {
public:
  TimeSchedule() = default;
  TimeSchedule(double t0, double t_final, std::vector<double> face_dt)
      : t0_(t0), t_final_(t_final), dt_(std::move(face_dt)) {
    for (std::size_t f = 0; f < dt_.size(); ++f)
      if (!(dt_[f] > 0.0) || !std::isfinite(dt_[f]))
        throw invalid_argument("schedule: non-positive step for face " + std::to_string(f));
    steps_.resize(dt_.size(), 0);
    for (std::size_t f = 0; f < dt_.size(); ++f) {
      if (!(t_final_ > t0_)) continue;
      std::size_t j = static_cast<std::size_t>(std::floor((t_final_ - t0_) / dt_[f]));
      while (raw(f, j + 1) <= t_final_ + tol()) ++j;
      while (j > 0 && raw(f, j) > t_final_ + tol()) --j;
      steps_[f] = j;
    }
  }

  double t0() const noexcept { return t0_; }
  double t_final() const noexcept { return t_final_; }
  std::size_t num_faces() const noexcept { return dt_.size(); }
  double face_dt(std::size_t f) const { return dt_.at(f); }
  const std::vector<double>& face_dts() const noexcept { return dt_; }
  // Number of times after t0 in Theta_f.
  std::size_t num_steps(std::size_t f) const { return steps_.at(f); }

  double time(std::size_t f, std::size_t j) const {
    if (j == 0) return t0_;
    const double t = raw(f, j);
    return std::abs(t - t_final_) <= tol() ? t_final_ : t;
  }

  std::vector<double> face_times(std::size_t f) const {
    std::vector<double> out;
    for (std::size_t j = 0; j <= steps_.at(f); ++j) out.push_back(time(f, j));
    return out;
  }

  // Theta_e: sorted union of the times of the faces containing the edge.
  std::vector<double> edge_times(const CellComplex& K, std::size_t e) const {
    std::vector<double> out{t0_};
    for (const Incidence& f : K.cofaces(1, e)) {
      auto ft = face_times(f.cell);
      out.insert(out.end(), ft.begin(), ft.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Theta'_e: midpoints of consecutive edge times.
  std::vector<double> edge_midpoints(const CellComplex& K, std::size_t e) const {
    auto t = edge_times(K, e);
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) out.push_back(0.5 * (t[i] + t[i + 1]));
    return out;
  }

  std::size_t total_events() const {
    std::size_t n = 0;
    for (std::size_t s : steps_) n += s;
    return n;
  }

  // True when no two faces share a time other than t0.
  bool asynchronous() const {
    std::vector<std::pair<double, std::size_t>> all;
    all.reserve(total_events());
    for (std::size_t f = 0; f < dt_.size(); ++f)
      for (std::size_t j = 1; j <= steps_[f]; ++j) all.emplace_back(time(f, j), f);
    std::sort(all.begin(), all.end());
    for (std::size_t i = 1; i < all.size(); ++i)
      if (all[i].first == all[i - 1].first && all[i].second != all[i - 1].second) return false;
    return true;
  }

private:
  double raw(std::size_t f, std::size_t j) const { return t0_ + static_cast<double>(j) * dt_[f]; }
  double tol() const { return 1e-12 * std::max(1.0, std::abs(t_final_)); }

  double t0_ = 0.0, t_final_ = 0.0;
  std::vector<double> dt_;
  std::vector<std::size_t> steps_;
};

// Applies distinct multiplicative jitter factors in [1, 1 + jitter) drawn
// from the seeded generator, in face order.
inline TimeSchedule build_schedule(std::vector<double> face_dt, double t0, double t_final, double jitter,
                                   std::uint64_t seed) {
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw invalid_argument("schedule: jitter must be >= 0");
  if (jitter > 0.0) {
    std::mt19937_64 rng(seed);
    std::set<double> used;
    for (double& dt : face_dt) {
      double f;
      do f = 1.0 + jitter * unit_uniform(rng);
      while (!used.insert(f).second);
      dt *= f;
    }
  }
  return TimeSchedule(t0, t_final, std::move(face_dt));
}

// ---------------------------------------------------------------------------
// Asynchronous variational integrator.

inline Trajectory run_avi(const Discretization& disc, const TimeSchedule& sched, FieldState s,
                          const OutputOptions& opts = {}, const CurrentSource& src = {}) {
  const CellComplex& K = disc.K();
  detail::check_probes(disc, opts.probes);
  const std::size_t ne = disc.num_edges(), nf = disc.num_faces();
  if (sched.num_faces() != nf) throw invalid_argument("avi: schedule has the wrong number of faces");
  const double t0 = sched.t0(), t_final = sched.t_final();

  s = apply_pec(std::move(s), K);
  if (s.rho.size() == 0) s.rho = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K.num_cells(0)));
  const double limit = opts.blowup_factor * detail::max_norm(s.E, s.B);

  const Eigen::VectorXd B0 = s.B;
  Eigen::VectorXd A = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ne));
  Eigen::VectorXd E = s.E, B = s.B;
  Eigen::VectorXd H = disc.stars.inv_mu.cwiseProduct(B);
  Eigen::VectorXd rho = s.rho;
  std::vector<double> tau_e(ne, t0), tau_f(nf, t0);

  // Per-edge bootstrap over the edge's first interval.
  Eigen::VectorXd E_prev = E;
  {
    const Eigen::VectorXd curl = disc.d1T * H;
    for (std::size_t e = 0; e < ne; ++e) {
      if (!disc.interior_edge[e]) continue;
      double h = std::numeric_limits<double>::infinity();
      for (const Incidence& f : K.cofaces(1, e))
        if (sched.num_steps(f.cell) > 0) h = std::min(h, sched.time(f.cell, 1) - t0);
      if (!std::isfinite(h)) continue;
      const auto i = static_cast<Eigen::Index>(e);
      double rhs = curl[i];
      if (src.active()) {
        const double j = src(e, t0);
        rhs -= j;
        for (const Incidence& v : K.boundary(1, e)) rho[static_cast<Eigen::Index>(v.cell)] += v.sign * 0.5 * h * j;
      }
      const double e0 = E[i];
      E[i] = e0 + 0.5 * h * disc.eps_inv[i] * rhs;
      E_prev[i] = 2.0 * e0 - E[i];
    }
  }

  using Event = std::pair<double, std::size_t>;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue;
  std::vector<std::size_t> next_j(nf, 1);
  for (std::size_t f = 0; f < nf; ++f)
    if (sched.num_steps(f) > 0) queue.emplace(sched.time(f, 1), f);

  Trajectory traj;
  detail::Recorder rec{disc, opts, traj};
  double out_h = opts.interval;
  if (!(out_h > 0.0)) {
    out_h = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < nf; ++f) out_h = std::min(out_h, sched.face_dt(f));
  }
  detail::OutputClock clock(t0, t_final, out_h);
  auto sample = [&](double t, std::size_t k) { rec(t, k, E_prev, E, B, rho); };

  std::vector<double> fresh_h(ne, 0.0);
  std::vector<std::size_t> fresh;
  double last_t = t0;
  while (!queue.empty()) {
    const auto [t, f] = queue.top();
    queue.pop();
    if (t < last_t) throw std::logic_error("avi: event queue popped out of time order");
    last_t = t;
    clock.advance_to(t, sample);

    auto edges = K.boundary(2, f);
    fresh.clear();
    for (const Incidence& g : edges) {
      const auto i = static_cast<Eigen::Index>(g.cell);
      if (t > tau_e[g.cell]) {
        E_prev[i] = E[i];
        A[i] -= E[i] * (t - tau_e[g.cell]);
        fresh_h[g.cell] = t - tau_e[g.cell];
        fresh.push_back(g.cell);
        tau_e[g.cell] = t;
      }
    }
    if (t < t_final) {
      double b = B0[static_cast<Eigen::Index>(f)];
      for (const Incidence& g : edges) b += g.sign * A[static_cast<Eigen::Index>(g.cell)];
      B[static_cast<Eigen::Index>(f)] = b;
      const double hf = disc.stars.inv_mu[static_cast<Eigen::Index>(f)] * b;
      H[static_cast<Eigen::Index>(f)] = hf;
      const double dt_f = t - tau_f[f];
      for (const Incidence& g : edges) {
        if (!disc.interior_edge[g.cell]) continue;
        const auto i = static_cast<Eigen::Index>(g.cell);
        double d = disc.stars.eps[i] * E[i];
        if (src.active() && std::find(fresh.begin(), fresh.end(), g.cell) != fresh.end()) {
          const double j = src(g.cell, t) * fresh_h[g.cell];
          d -= j;
          for (const Incidence& v : K.boundary(1, g.cell)) rho[static_cast<Eigen::Index>(v.cell)] += v.sign * j;
        }
        d += g.sign * hf * dt_f;
        E[i] = d * disc.eps_inv[i];
        if (limit > 0.0 && !(std::abs(E[i]) <= limit)) throw BlowUpError(t, traj.events + 1, std::abs(E[i]), limit);
      }
      if (limit > 0.0 && !(std::abs(b) <= limit)) throw BlowUpError(t, traj.events + 1, std::abs(b), limit);
      tau_f[f] = t;
      if (++next_j[f] <= sched.num_steps(f)) queue.emplace(sched.time(f, next_j[f]), f);
    }
    ++traj.events;
  }

  // Flush: bring every edge to t_final and refresh all faces.
  if (t_final > t0) {
    for (std::size_t e = 0; e < ne; ++e)
      if (tau_e[e] < t_final) {
        A[static_cast<Eigen::Index>(e)] -= E[static_cast<Eigen::Index>(e)] * (t_final - tau_e[e]);
        tau_e[e] = t_final;
      }
    B = B0 + disc.d1 * A;
    H = disc.stars.inv_mu.cwiseProduct(B);
  }
  clock.finish(sample);

  s.E = E;
  s.D = disc.stars.eps.cwiseProduct(E);
  s.B = B;
  s.H = H;
  s.rho = rho;
  s.time_B = std::max(t0, t_final);
  s.time_E = last_t;
  traj.final_state = std::move(s);
  return traj;
}

} // namespace emdec

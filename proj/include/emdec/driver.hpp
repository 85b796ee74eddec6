#pragma once

// Glue behind the `emdec` subcommands: build the mesh a config describes,
// run the selected scheme, and write CSV artifacts plus a manifest.

#include <algorithm>
#include <limits>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "emdec/config.hpp"
#include "emdec/csv.hpp"
#include "emdec/dec.hpp"
#include "emdec/delaunay.hpp"
#include "emdec/diagnostics.hpp"
#include "emdec/dual.hpp"
#include "emdec/integrators.hpp"
#include "emdec/maxwell.hpp"
#include "emdec/mesh.hpp"

namespace emdec {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument:
    case ErrorKind::parse: return kExitConfig;
    case ErrorKind::degenerate_mesh:
    case ErrorKind::numeric: return kExitNumeric;
    case ErrorKind::io: return kExitIo;
  }
  return kExitNumeric;
}

// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// Independent PRNG streams derived from run.seed.
namespace seed_stream {
inline std::uint64_t partition(std::uint64_t s) { return s; }
inline std::uint64_t fields(std::uint64_t s) { return s + 1; }
inline std::uint64_t jitter(std::uint64_t s) { return s + 2; }
inline std::uint64_t mesh(std::uint64_t s) { return s + 3; }
} // namespace seed_stream

inline std::shared_ptr<const CellComplex> build_mesh(const Config& c) {
  switch (c.mesh_kind) {
    case MeshKind::grid: {
      if (!c.random_partition) return std::make_shared<const CellComplex>(build_rect_grid(c.extents, c.counts));
      std::mt19937_64 rng(seed_stream::partition(c.seed));
      std::vector<std::vector<double>> axes;
      for (std::size_t a = 0; a < c.extents.size(); ++a)
        axes.push_back(random_axis_partition(c.extents[a], c.counts[a], c.partition_spread, rng));
      return std::make_shared<const CellComplex>(build_tensor_grid(axes));
    }
    case MeshKind::file: {
      std::ifstream in(c.mesh_file, std::ios::binary);
      if (!in) throw Error(ErrorKind::io, "cannot open " + c.mesh_file.string());
      try {
        return std::make_shared<const CellComplex>(load_mesh(in));
      } catch (const ParseError& e) {
        throw Error(ErrorKind::parse, c.mesh_file.filename().string() + ": " + e.what());
      }
    }
    case MeshKind::refined: {
      const double w = c.extents.size() > 0 ? c.extents[0] : 1.0;
      const double h = c.extents.size() > 1 ? c.extents[1] : 1.0;
      return std::make_shared<const CellComplex>(refined_mesh(w, h, c.refine_h_min, c.refine_h_max, c.refine_layer,
                                                              seed_stream::mesh(c.seed), c.refine_smoothing));
    }
  }
  throw invalid_argument("unknown mesh kind");
}

// ---------------------------------------------------------------------------
// run

struct RunSummary {
  std::filesystem::path output_dir;
  std::vector<std::string> files;
  std::size_t events = 0;
  double dt_min = 0.0, dt_max = 0.0, cfl = 0.0;
  bool asynchronous = false;
  std::vector<std::string> warnings;
  std::optional<DriftReport> drift;
};

namespace detail {

inline std::string probe_name(const Probe& p) {
  return (p.kind == Probe::Kind::edge ? "edge_" : "face_") + std::to_string(p.index);
}

inline std::string csv_join(std::initializer_list<std::string> cols) {
  std::string s;
  for (const auto& c : cols) {
    if (!s.empty()) s += ',';
    s += c;
  }
  return s;
}

inline std::string snapshot_csv(const char* form, int degree, double time, const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << "# form=" << form << " degree=" << degree << " time=" << format_double(time) << '\n';
  write_cochain_csv(os, v);
  return os.str();
}

inline std::string spectrum_csv(const Spectrum& sp) {
  std::string a = "frequency,power\n";
  for (std::size_t i = 0; i < sp.frequency.size(); ++i)
    a += format_double(sp.frequency[i]) + "," + format_double(sp.power[i]) + "\n";
  return a;
}

inline std::string peaks_csv(const Spectrum& sp) {
  std::string b = "rank,frequency\n";
  for (std::size_t i = 0; i < sp.peaks.size(); ++i)
    b += std::to_string(i + 1) + "," + format_double(sp.peaks[i]) + "\n";
  return b;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

} // namespace detail

// Runs a validated config and writes its artifacts into `out_dir`.
// Pulse placed off every symmetry line of the bounding box: center at
// (0.3, 0.4, 0.45) of the box, width a tenth of its shortest side.
inline std::pair<Eigen::VectorXd, double> pulse_geometry(const CellComplex& K) {
  const Eigen::Index n = K.ambient_dim();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity()), hi = -lo;
  for (std::size_t v = 0; v < K.num_cells(0); ++v) {
    lo = lo.cwiseMin(K.point(v));
    hi = hi.cwiseMax(K.point(v));
  }
  const double frac[3] = {0.3, 0.4, 0.45};
  Eigen::VectorXd c(n);
  for (Eigen::Index i = 0; i < n; ++i) c[i] = lo[i] + frac[i] * (hi[i] - lo[i]);
  return {c, 0.1 * (hi - lo).minCoeff()};
}

inline RunSummary run_config(const Config& c, const std::filesystem::path& out_dir) {
  RunSummary sum;
  sum.output_dir = out_dir;
  auto mesh = build_mesh(c);
  if (c.scheme == Scheme::yee && mesh->shape() != CellShape::box)
    throw ConfigError(0, "run.scheme = yee requires a rectangular mesh");

  MaterialParams mat;
  mat.epsilon = {c.epsilon};
  mat.mu = {c.mu};
  const Discretization disc = make_discretization(mesh, mat);
  const CellComplex& K = disc.K();
  sum.warnings = disc.warnings;

  OutputOptions opts;
  opts.interval = c.output_interval;
  opts.snapshot_every = c.snapshot_every;
  opts.blowup_factor = c.blowup_factor;
  for (const auto& [is_edge, idx] : c.probes)
    opts.probes.push_back({is_edge ? Probe::Kind::edge : Probe::Kind::face, idx});
  detail::check_probes(disc, opts.probes);

  FieldState s0 = zero_state(K);
  if (c.init == Config::Init::random) s0 = init_random_E(K, disc.stars, seed_stream::fields(c.seed));
  if (c.init == Config::Init::pulse) {
    const auto [center, width] = pulse_geometry(K);
    s0 = init_pulse_B(K, center, width);
  }
  const CurrentSource src = current_from_expressions(K, disc.dual, c.current);

  sum.cfl = cfl_dt(disc);
  const double dt_uniform = c.dt ? *c.dt : c.dt_safety * sum.cfl;
  if (c.dt && *c.dt > sum.cfl)
    sum.warnings.push_back("run.dt = " + format_double(*c.dt) + " exceeds the CFL estimate " + format_double(sum.cfl));

  Trajectory traj;
  if (c.scheme == Scheme::avi) {
    std::vector<double> face_dt(disc.num_faces(), dt_uniform);
    if (c.local_steps) {
      face_dt = local_cfl_dt(disc, sum.cfl);
      for (double& d : face_dt) d *= c.dt_safety;
    }
    const TimeSchedule sched = build_schedule(face_dt, 0.0, c.t_final, c.jitter, seed_stream::jitter(c.seed));
    sum.dt_min = *std::min_element(sched.face_dts().begin(), sched.face_dts().end());
    sum.dt_max = *std::max_element(sched.face_dts().begin(), sched.face_dts().end());
    sum.asynchronous = sched.asynchronous();
    traj = run_avi(disc, sched, std::move(s0), opts, src);
  } else {
    const SyncPlan plan = plan_sync(0.0, c.t_final, dt_uniform);
    sum.dt_min = sum.dt_max = plan.dt;
    traj = run_sync(disc, std::move(s0), 0.0, c.t_final, dt_uniform, opts, src);
  }
  sum.events = traj.events;

  std::filesystem::create_directories(out_dir);
  auto emit = [&](const std::string& name, const std::string& body) {
    write_file_atomic(out_dir / name, body);
    sum.files.push_back(name);
  };

  {
    std::string head = "time";
    for (const Probe& p : opts.probes) head += "," + detail::probe_name(p);
    head += ",E_energy,B_energy,total,gauss,divb\n";
    std::string tr = head, en = "time,E_energy,B_energy,total\n", rs = "time,gauss,divb\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      const std::string t = format_double(traj.times[i]);
      const auto& e = traj.energy[i];
      std::string row = t;
      for (double v : traj.probes[i]) row += "," + format_double(v);
      const std::string energies = detail::csv_join(
          {format_double(e.electric), format_double(e.magnetic), format_double(e.total)});
      const std::string residuals = detail::csv_join({format_double(traj.gauss[i]), format_double(traj.divb[i])});
      tr += row + "," + energies + "," + residuals + "\n";
      en += t + "," + energies + "\n";
      rs += t + "," + residuals + "\n";
    }
    emit("trajectory.csv", tr);
    emit("energy.csv", en);
    emit("residuals.csv", rs);
  }

  if (c.spectrum) {
    std::vector<double> series;
    for (const auto& row : traj.probes) series.push_back(row.at(0));
    if (traj.times.size() < 2) throw numeric_error("output.spectrum: run too short for a spectrum");
    const Spectrum sp = spectrum(series, traj.times[1] - traj.times[0]);
    emit("spectrum.csv", detail::spectrum_csv(sp));
    emit("peaks.csv", detail::peaks_csv(sp));
  }

  if (!traj.snapshots.empty()) {
    std::filesystem::create_directories(out_dir / "snapshots");
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
      const Snapshot& sn = traj.snapshots[i];
      char idx[24];
      std::snprintf(idx, sizeof idx, "%05zu", i);
      emit(std::string("snapshots/E_") + idx + ".csv", detail::snapshot_csv("E", 1, sn.time, sn.E));
      emit(std::string("snapshots/B_") + idx + ".csv", detail::snapshot_csv("B", 2, sn.time, sn.B));
    }
  }

  if (traj.times.size() >= 2) {
    std::vector<double> tot;
    for (const auto& e : traj.energy) tot.push_back(e.total);
    if (std::abs(std::accumulate(tot.begin(), tot.end(), 0.0)) > 0.0) sum.drift = analyze_drift(traj.times, tot);
  }

  std::ostringstream m;
  m << "config_hash = " << hex64(fnv1a(c.text)) << '\n'
    << "seed = " << c.seed << '\n'
    << "scheme = " << scheme_name(c.scheme) << '\n'
    << "init = " << (c.init == Config::Init::random ? "random" : c.init == Config::Init::zero ? "zero" : "pulse") << '\n'
    << "dimension = " << K.dim() << '\n'
    << "mesh_shape = " << (K.shape() == CellShape::box ? "box" : "simplex") << '\n';
  for (int k = 0; k <= K.dim(); ++k)
    m << "cells_" << k << " = " << K.num_cells(k) << " (boundary " << K.num_boundary_cells(k) << ")\n";
  m << "cfl_dt = " << format_double(sum.cfl) << '\n'
    << "dt_min = " << format_double(sum.dt_min) << '\n'
    << "dt_max = " << format_double(sum.dt_max) << '\n'
    << "t_final = " << format_double(c.t_final) << '\n'
    << "events = " << sum.events << '\n'
    << "samples = " << traj.times.size() << '\n';
  if (c.scheme == Scheme::avi) m << "asynchronous = " << (sum.asynchronous ? "true" : "false") << '\n';
  if (sum.drift)
    m << "energy_drift_fraction = " << format_double(sum.drift->drift_fraction) << '\n'
      << "energy_max_excursion = " << format_double(sum.drift->max_excursion) << '\n';
  m << "warnings = " << sum.warnings.size() << '\n';
  for (const auto& w : sum.warnings) m << "warning = " << w << '\n';
  m << "files = ";
  for (std::size_t i = 0; i < sum.files.size(); ++i) m << (i ? "," : "") << sum.files[i];
  m << '\n' << "timestamp = " << detail::utc_timestamp() << '\n';
  emit("manifest.txt", m.str());
  return sum;
}

// ---------------------------------------------------------------------------
// validate

struct CheckRow {
  std::string name;
  enum class Status { pass, warn, fail } status = Status::pass;
  std::string detail;
};

inline const char* status_name(CheckRow::Status s) {
  switch (s) {
    case CheckRow::Status::pass: return "PASS";
    case CheckRow::Status::warn: return "WARN";
    case CheckRow::Status::fail: return "FAIL";
  }
  return "?";
}

struct ValidationReport {
  std::vector<CheckRow> rows;
  bool ok() const {
    for (const auto& r : rows)
      if (r.status == CheckRow::Status::fail) return false;
    return true;
  }
};

namespace detail {

inline std::string id_list(const std::vector<std::size_t>& ids, std::size_t cap = 8) {
  std::string s;
  for (std::size_t i = 0; i < ids.size() && i < cap; ++i) s += (i ? "," : "") + std::to_string(ids[i]);
  if (ids.size() > cap) s += ",...";
  return s;
}

} // namespace detail

// Mesh quality, d^2 = 0, Hodge positivity and a CFL estimate. Findings are
// reported, never thrown.
inline ValidationReport validate_mesh(std::shared_ptr<const CellComplex> mesh, MaterialParams mat = {}) {
  using S = CheckRow::Status;
  ValidationReport rep;
  const CellComplex& K = *mesh;
  {
    std::ostringstream os;
    os << "dim " << K.dim();
    for (int k = 0; k <= K.dim(); ++k) os << (k ? " / " : ", cells ") << K.num_cells(k);
    rep.rows.push_back({"mesh", S::pass, os.str()});
  }

  const MeshQualityReport q = quality(K);
  {
    std::vector<std::size_t> degen, outside;
    double worst = 0.0;
    for (const auto& c : q.cells) {
      if (c.degenerate) degen.push_back(c.cell);
      else if (!c.circumcenter_inside) outside.push_back(c.cell);
      if (!c.degenerate) worst = std::max(worst, c.aspect_ratio);
    }
    if (!degen.empty())
      rep.rows.push_back({"circumcenter", S::fail, "degenerate cell(s) " + detail::id_list(degen)});
    else if (!outside.empty())
      rep.rows.push_back({"circumcenter", S::warn,
                          std::to_string(outside.size()) + " cell(s) with circumcenter outside: " +
                              detail::id_list(outside)});
    else
      rep.rows.push_back({"circumcenter", S::pass, "all circumcenters inside their cells"});
    rep.rows.push_back({"aspect_ratio", S::pass, "worst " + format_double(worst)});
  }

  rep.rows.push_back({"d_squared", d_squared_is_zero(K) ? S::pass : S::fail, "d_{k+1} d_k = 0 in integers"});

  std::optional<Discretization> disc;
  try {
    disc.emplace(make_discretization(mesh, mat));
  } catch (const Error& e) {
    rep.rows.push_back({"hodge", S::fail, e.what()});
  }
  if (disc) {
    std::vector<std::size_t> neg, zero;
    for (std::size_t e = 0; e < disc->num_edges(); ++e) {
      if (!disc->interior_edge[e]) continue;
      const double v = disc->stars.eps[static_cast<Eigen::Index>(e)];
      if (v < 0.0) neg.push_back(e);
    }
    for (std::size_t f = 0; f < disc->num_faces(); ++f)
      if (!(disc->stars.inv_mu[static_cast<Eigen::Index>(f)] > 0.0)) zero.push_back(f);
    if (!zero.empty())
      rep.rows.push_back({"hodge", S::fail, "non-positive face star on face(s) " + detail::id_list(zero)});
    else if (!neg.empty())
      rep.rows.push_back({"hodge", S::warn, "negative dual length on edge(s) " + detail::id_list(neg)});
    else
      rep.rows.push_back({"hodge", S::pass, "all interior star entries positive"});

    if (!neg.empty() || !zero.empty()) {
      rep.rows.push_back({"cfl", S::warn, "not estimated: star has non-positive entries"});
    } else if (std::none_of(disc->interior_edge.begin(), disc->interior_edge.end(), [](char c) { return c != 0; })) {
      rep.rows.push_back({"cfl", S::pass, "unbounded: no interior edges, the fields are pinned to zero"});
    } else {
      try {
        const double dt = cfl_dt(*disc);
        if (std::isfinite(dt) && dt > 0.0) rep.rows.push_back({"cfl", S::pass, "dt_max ~ " + format_double(dt)});
        else rep.rows.push_back({"cfl", S::fail, "estimate is not finite"});
      } catch (const Error& e) {
        rep.rows.push_back({"cfl", S::fail, e.what()});
      }
    }
  }
  return rep;
}

inline void print_report(std::ostream& os, const ValidationReport& rep) {
  std::size_t w = 5;
  for (const auto& r : rep.rows) w = std::max(w, r.name.size());
  os << std::left << std::setw(static_cast<int>(w)) << "check" << "  status  detail\n";
  for (const auto& r : rep.rows)
    os << std::left << std::setw(static_cast<int>(w)) << r.name << "  " << status_name(r.status) << "    "
       << r.detail << '\n';
  os << (rep.ok() ? "result: PASS" : "result: FAIL") << '\n';
}

// True if the text looks like a config (`key = value`) rather than a mesh.
inline bool looks_like_config(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    return line.front() == '[' || line.find('=') != std::string::npos;
  }
  return false;
}

inline ValidationReport validate_path(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (looks_like_config(text)) {
    const Config c = parse_config(text, path.has_parent_path() ? path.parent_path() : ".");
    MaterialParams mat;
    mat.epsilon = {c.epsilon};
    mat.mu = {c.mu};
    return validate_mesh(build_mesh(c), mat);
  }
  return validate_mesh(std::make_shared<const CellComplex>(load_mesh_string(text)));
}

// ---------------------------------------------------------------------------
// spectrum

struct SpectrumJob {
  std::filesystem::path input;
  std::string column;  // empty: first non-time column
  std::filesystem::path out_dir;
  double prominence = 10.0;
};

inline Spectrum spectrum_from_csv(const SpectrumJob& job) {
  const CsvTable tab = parse_csv(read_file(job.input));
  const int tc = tab.column("time");
  if (tc < 0) throw invalid_argument(job.input.string() + ": no 'time' column");
  int vc = -1;
  if (!job.column.empty()) {
    vc = tab.column(job.column);
    if (vc < 0) throw invalid_argument(job.input.string() + ": no column '" + job.column + "'");
  } else {
    for (std::size_t i = 0; i < tab.header.size(); ++i)
      if (static_cast<int>(i) != tc) {
        vc = static_cast<int>(i);
        break;
      }
    if (vc < 0) throw invalid_argument(job.input.string() + ": no data column");
  }
  if (tab.rows.size() < 2) throw invalid_argument(job.input.string() + ": need at least two rows");
  std::vector<double> series;
  const double t0 = tab.rows[0][static_cast<std::size_t>(tc)];
  const double dt = tab.rows[1][static_cast<std::size_t>(tc)] - t0;
  if (!(dt > 0.0)) throw invalid_argument(job.input.string() + ": time column must increase");
  for (std::size_t i = 0; i < tab.rows.size(); ++i) {
    const double expect = t0 + static_cast<double>(i) * dt;
    if (std::abs(tab.rows[i][static_cast<std::size_t>(tc)] - expect) > 1e-6 * dt)
      throw invalid_argument(job.input.string() + ": time column is not uniformly sampled (row " +
                             std::to_string(i + 2) + ")");
    series.push_back(tab.rows[i][static_cast<std::size_t>(vc)]);
  }
  const Spectrum sp = spectrum(series, dt, job.prominence);

  std::filesystem::create_directories(job.out_dir);
  write_file_atomic(job.out_dir / "spectrum.csv", detail::spectrum_csv(sp));
  write_file_atomic(job.out_dir / "peaks.csv", detail::peaks_csv(sp));
  return sp;
}

} // namespace emdec

#pragma once

// Run configuration: line-oriented `key = value`, `#` comments, dotted keys
// (`run.scheme`) or `[section]` headers followed by bare keys.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "emdec/error.hpp"
#include "emdec/expression.hpp"

namespace emdec {

// Configuration error; `line` is 0 when no single line is at fault.
class ConfigError : public Error {
public:
  ConfigError(std::size_t line, const std::string& what)
      : Error(ErrorKind::parse, line ? "config line " + std::to_string(line) + ": " + what : "config: " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

enum class Scheme { yee, bk, avi };
enum class MeshKind { grid, file, refined };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::yee: return "yee";
    case Scheme::bk: return "bk";
    case Scheme::avi: return "avi";
  }
  return "?";
}

struct Config {
  // mesh
  MeshKind mesh_kind = MeshKind::grid;
  std::vector<double> extents{1.0, 1.0};
  std::vector<std::size_t> counts{16, 16};
  bool random_partition = false;
  double partition_spread = 0.5;
  std::filesystem::path mesh_file;
  double refine_h_min = 0.02, refine_h_max = 0.05, refine_layer = 0.2;
  int refine_smoothing = 30;
  // material
  double epsilon = 1.0, mu = 1.0;
  // run
  Scheme scheme = Scheme::yee;
  double t_final = 0.0;
  double dt_safety = 0.5;
  std::optional<double> dt;
  double jitter = 0.0;
  bool local_steps = false;
  std::uint64_t seed = 1;
  enum class Init { random, zero, pulse } init = Init::random;
  double blowup_factor = 1e6;
  // output
  std::filesystem::path output_dir = "out";
  double output_interval = 0.0;
  std::vector<std::pair<bool, std::size_t>> probes;  // (is_edge, index)
  bool spectrum = false;
  std::size_t snapshot_every = 0;
  // source
  std::vector<Expression> current{Expression(), Expression(), Expression()};

  std::string text;  // raw text, for hashing
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& v, std::size_t line, const std::string& key) {
  double x = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(x))
    throw ConfigError(line, key + ": expected a number, got '" + v + "'");
  return x;
}

inline std::uint64_t to_uint(const std::string& v, std::size_t line, const std::string& key) {
  std::uint64_t x = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(line, key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& v, std::size_t line, const std::string& key) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError(line, key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

} // namespace detail

// Parses and validates a configuration. A relative mesh.file resolves
// against `base_dir` and must exist; output.dir stays relative to the cwd.
inline Config parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
  Config c;
  c.text = text;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  std::string section;
  std::map<std::string, std::size_t> seen;
  std::size_t scheme_line = 0, file_line = 0;

  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(lineno, "malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(lineno, "expected 'key = value'");
    std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(lineno, "empty key");
    if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
    if (val.empty()) throw ConfigError(lineno, key + ": empty value");
    if (auto [it, fresh] = seen.emplace(key, lineno); !fresh)
      throw ConfigError(lineno, key + ": duplicate key (first set on line " + std::to_string(it->second) + ")");

    auto number = [&] { return detail::to_double(val, lineno, key); };
    auto positive = [&] {
      const double x = number();
      if (!(x > 0.0)) throw ConfigError(lineno, key + ": must be positive");
      return x;
    };

    if (key == "mesh.kind") {
      if (val == "grid") c.mesh_kind = MeshKind::grid;
      else if (val == "file") c.mesh_kind = MeshKind::file;
      else if (val == "refined") c.mesh_kind = MeshKind::refined;
      else throw ConfigError(lineno, "mesh.kind: expected grid, file or refined, got '" + val + "'");
    } else if (key == "mesh.extents") {
      c.extents.clear();
      for (const auto& s : detail::split_list(val)) {
        const double x = detail::to_double(s, lineno, key);
        if (!(x > 0.0)) throw ConfigError(lineno, "mesh.extents: extents must be positive");
        c.extents.push_back(x);
      }
    } else if (key == "mesh.counts") {
      c.counts.clear();
      for (const auto& s : detail::split_list(val)) {
        const auto x = detail::to_uint(s, lineno, key);
        if (x < 1) throw ConfigError(lineno, "mesh.counts: counts must be >= 1");
        c.counts.push_back(static_cast<std::size_t>(x));
      }
    } else if (key == "mesh.partition") {
      if (val == "uniform") c.random_partition = false;
      else if (val == "random") c.random_partition = true;
      else throw ConfigError(lineno, "mesh.partition: expected uniform or random");
    } else if (key == "mesh.partition_spread") {
      c.partition_spread = number();
      if (!(c.partition_spread >= 0.0 && c.partition_spread < 1.0))
        throw ConfigError(lineno, "mesh.partition_spread: must be in [0, 1)");
    } else if (key == "mesh.file") {
      c.mesh_file = std::filesystem::path(val);
      if (c.mesh_file.is_relative()) c.mesh_file = base_dir / c.mesh_file;
      file_line = lineno;
    } else if (key == "mesh.h_min") {
      c.refine_h_min = positive();
    } else if (key == "mesh.h_max") {
      c.refine_h_max = positive();
    } else if (key == "mesh.layer") {
      c.refine_layer = positive();
    } else if (key == "mesh.smoothing") {
      c.refine_smoothing = static_cast<int>(detail::to_uint(val, lineno, key));
    } else if (key == "material.epsilon") {
      c.epsilon = positive();
    } else if (key == "material.mu") {
      c.mu = positive();
    } else if (key == "run.scheme") {
      if (val == "yee") c.scheme = Scheme::yee;
      else if (val == "bk") c.scheme = Scheme::bk;
      else if (val == "avi") c.scheme = Scheme::avi;
      else throw ConfigError(lineno, "run.scheme: expected yee, bk or avi, got '" + val + "'");
      scheme_line = lineno;
    } else if (key == "run.t_final") {
      c.t_final = number();
      if (c.t_final < 0.0) throw ConfigError(lineno, "run.t_final: must be >= 0");
    } else if (key == "run.dt_safety") {
      c.dt_safety = number();
      if (!(c.dt_safety > 0.0 && c.dt_safety <= 1.0))
        throw ConfigError(lineno, "run.dt_safety: must be in (0, 1], got " + val);
    } else if (key == "run.dt") {
      c.dt = positive();
    } else if (key == "run.jitter") {
      c.jitter = number();
      if (!(c.jitter >= 0.0)) throw ConfigError(lineno, "run.jitter: must be >= 0");
    } else if (key == "run.async") {
      if (val == "local") c.local_steps = true;
      else if (val == "uniform") c.local_steps = false;
      else throw ConfigError(lineno, "run.async: expected local or uniform");
    } else if (key == "run.seed") {
      c.seed = detail::to_uint(val, lineno, key);
    } else if (key == "run.init") {
      if (val == "random") c.init = Config::Init::random;
      else if (val == "zero") c.init = Config::Init::zero;
      else if (val == "pulse") c.init = Config::Init::pulse;
      else throw ConfigError(lineno, "run.init: expected random, zero or pulse");
    } else if (key == "run.blowup_factor") {
      c.blowup_factor = positive();
    } else if (key == "output.dir") {
      c.output_dir = std::filesystem::path(val);  // relative to the working directory
    } else if (key == "output.interval") {
      c.output_interval = positive();
    } else if (key == "output.probes") {
      for (const auto& tok : detail::split_list(val)) {
        const auto colon = tok.find(':');
        if (colon == std::string::npos) throw ConfigError(lineno, "output.probes: expected face:N or edge:N, got '" + tok + "'");
        const std::string kind = tok.substr(0, colon);
        if (kind != "face" && kind != "edge")
          throw ConfigError(lineno, "output.probes: expected face:N or edge:N, got '" + tok + "'");
        c.probes.emplace_back(kind == "edge",
                              static_cast<std::size_t>(detail::to_uint(tok.substr(colon + 1), lineno, key)));
      }
    } else if (key == "output.spectrum") {
      c.spectrum = detail::to_bool(val, lineno, key);
    } else if (key == "output.snapshot_every") {
      c.snapshot_every = static_cast<std::size_t>(detail::to_uint(val, lineno, key));
    } else if (key == "source.jx" || key == "source.jy" || key == "source.jz") {
      try {
        c.current[static_cast<std::size_t>(key.back() - 'x')] = Expression::parse(val);
      } catch (const ExpressionError& e) {
        throw ConfigError(lineno, key + ": " + e.what());
      }
    } else {
      throw ConfigError(lineno, "unknown key '" + key + "'");
    }
  }

  if (!seen.count("run.scheme")) throw ConfigError(0, "missing required key 'run.scheme'");
  if (!seen.count("run.t_final")) throw ConfigError(0, "missing required key 'run.t_final'");
  if (c.mesh_kind == MeshKind::grid) {
    if (c.extents.size() != c.counts.size())
      throw ConfigError(seen.count("mesh.counts") ? seen["mesh.counts"] : 0,
                        "mesh.extents and mesh.counts must have the same length");
    if (c.extents.size() != 2 && c.extents.size() != 3)
      throw ConfigError(seen.count("mesh.extents") ? seen["mesh.extents"] : 0, "grid must be 2-D or 3-D");
  }
  if (c.mesh_kind == MeshKind::file) {
    if (c.mesh_file.empty()) throw ConfigError(0, "mesh.kind = file needs mesh.file");
    if (!std::filesystem::exists(c.mesh_file))
      throw ConfigError(file_line, "mesh.file: no such file " + c.mesh_file.string());
    if (c.scheme == Scheme::yee) {
      // Peek at the first cell record: Yee needs boxes.
      std::ifstream mf(c.mesh_file);
      std::string l;
      while (std::getline(mf, l)) {
        std::istringstream ls(l);
        std::string tag;
        ls >> tag;
        if (tag == "c")
          throw ConfigError(scheme_line, "run.scheme = yee requires a rectangular mesh, but " +
                                             c.mesh_file.filename().string() + " holds simplices");
        if (tag == "r") break;
      }
    }
  }
  if (c.mesh_kind == MeshKind::refined && c.refine_h_max < c.refine_h_min)
    throw ConfigError(seen.count("mesh.h_max") ? seen["mesh.h_max"] : 0, "mesh.h_max must be >= mesh.h_min");
  if (c.scheme == Scheme::yee && c.mesh_kind == MeshKind::refined)
    throw ConfigError(scheme_line, "run.scheme = yee requires a rectangular grid");
  if (c.scheme != Scheme::avi && (seen.count("run.jitter") || seen.count("run.async")))
    throw ConfigError(seen.count("run.jitter") ? seen["run.jitter"] : seen["run.async"],
                      "run.jitter and run.async apply to the avi scheme only");
  if (c.spectrum && c.probes.empty())
    throw ConfigError(seen["output.spectrum"], "output.spectrum needs at least one entry in output.probes");
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

} // namespace emdec

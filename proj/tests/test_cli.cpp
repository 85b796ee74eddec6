#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "emdec/csv.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("emdec_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the tool from `cwd` with an optional output-dir override.
Result tool(const std::string& args, const fs::path& cwd, const std::string& env_out = "") {
  const fs::path o = cwd / "stdout.txt", e = cwd / "stderr.txt";
  std::string cmd = "cd '" + cwd.string() + "' && ";
  cmd += env_out.empty() ? "env -u EMDEC_OUTPUT_DIR " : "EMDEC_OUTPUT_DIR='" + env_out + "' ";
  cmd += "'" + std::string(EMDEC_BINARY) + "' " + args + " >'" + o.string() + "' 2>'" + e.string() + "'";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(o), slurp(e)};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kSmallRun =
    "[mesh]\ncounts = 6, 6\n[run]\nscheme = yee\nt_final = 2\ndt_safety = 0.5\nseed = 3\n"
    "[output]\ndir = res\ninterval = 0.05\nprobes = face:7, edge:20\nspectrum = true\nsnapshot_every = 20\n";

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  auto d = scratch("usage");
  EXPECT_EQ(tool("", d).code, 2);
  EXPECT_EQ(tool("frobnicate", d).code, 2);
  EXPECT_EQ(tool("run", d).code, 2);
  EXPECT_EQ(tool("--help", d).code, 0);
}

TEST(Cli, MissingConfigIsIoError) {
  auto d = scratch("missing");
  auto r = tool("run nope.cfg", d);
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("nope.cfg"), std::string::npos);
}

TEST(Cli, ConfigErrorNamesLine) {
  auto d = scratch("badcfg");
  write(d / "a.cfg", "[run]\nscheme = yee\nt_final = 1\ndt_safety = 1.5\n");
  auto r = tool("run a.cfg", d);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 4"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(d / "out"));
}

TEST(Cli, ZeroFinalTimeWritesInitialState) {
  auto d = scratch("t0");
  write(d / "a.cfg", "[mesh]\ncounts = 3, 3\n[run]\nscheme = bk\nt_final = 0\n[output]\ndir = o\nprobes = face:0\n");
  auto r = tool("run a.cfg", d);
  ASSERT_EQ(r.code, 0) << r.err;
  auto t = emdec::parse_csv(slurp(d / "o" / "trajectory.csv"));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][0], 0.0);
  EXPECT_EQ(t.header.front(), "time");
  EXPECT_EQ(t.column("face_0"), 1);
  EXPECT_TRUE(fs::exists(d / "o" / "energy.csv"));
  EXPECT_TRUE(fs::exists(d / "o" / "manifest.txt"));
}

TEST(Cli, RunWritesArtifactsAndIsDeterministic) {
  auto d = scratch("full");
  write(d / "a.cfg", kSmallRun);
  auto r1 = tool("run a.cfg", d);
  ASSERT_EQ(r1.code, 0) << r1.err;
  const fs::path res = d / "res";
  for (const char* f : {"trajectory.csv", "energy.csv", "residuals.csv", "spectrum.csv", "peaks.csv", "manifest.txt",
                        "snapshots/E_00000.csv", "snapshots/B_00000.csv"})
    EXPECT_TRUE(fs::exists(res / f)) << f;
  auto traj = emdec::parse_csv(slurp(res / "trajectory.csv"));
  EXPECT_EQ(traj.header, (std::vector<std::string>{"time", "face_7", "edge_20", "E_energy", "B_energy", "total",
                                                   "gauss", "divb"}));
  EXPECT_EQ(traj.rows.size(), 41u);
  EXPECT_EQ(slurp(res / "snapshots" / "E_00000.csv").rfind("# form=E degree=1 time=0", 0), 0u);
  const std::string manifest = slurp(res / "manifest.txt");
  EXPECT_NE(manifest.find("scheme = yee"), std::string::npos);
  EXPECT_NE(manifest.find("seed = 3"), std::string::npos);

  fs::rename(res, d / "first");
  auto r2 = tool("run a.cfg", d);
  ASSERT_EQ(r2.code, 0);
  for (const char* f : {"trajectory.csv", "energy.csv", "residuals.csv", "spectrum.csv", "peaks.csv"})
    EXPECT_EQ(slurp(res / f), slurp(d / "first" / f)) << f;
}

TEST(Cli, EnvironmentOverridesOutputDir) {
  auto d = scratch("env");
  write(d / "a.cfg", kSmallRun);
  auto r = tool("run a.cfg", d, (d / "elsewhere").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "elsewhere" / "trajectory.csv"));
  EXPECT_FALSE(fs::exists(d / "res"));
}

TEST(Cli, AviRecipeReportsAsynchrony) {
  auto d = scratch("avi");
  write(d / "a.cfg",
        "[mesh]\ncounts = 8, 8\npartition = random\n[run]\nscheme = avi\nasync = local\njitter = 0.05\n"
        "t_final = 1\ndt_safety = 0.2\nseed = 7\n[output]\ndir = o\ninterval = 0.05\n");
  auto r = tool("run a.cfg", d);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(d / "o" / "manifest.txt").find("asynchronous = true"), std::string::npos);
}

TEST(Cli, Validate) {
  auto d = scratch("validate");
  write(d / "grid.mesh", "dim 2\nv 0 0\nv 1 0\nv 0 1\nv 1 1\nr 0 1 2 3\n");
  write(d / "flat.mesh", "dim 2\nv 0 0\nv 1 0\nv 2 0\nv 1 1\nc 2 0 1 2\nc 2 0 3 1\n");
  write(d / "obtuse.mesh", "dim 2\nv 0 0\nv 4 0\nv 2 0.1\nv 2 -0.1\nc 2 0 1 2\nc 2 0 3 1\n");
  write(d / "bad.mesh", "dim 2\nv 0 0\nc 2 0 1 2\n");
  auto ok = tool("validate grid.mesh", d);
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);
  auto flat = tool("validate flat.mesh", d);
  EXPECT_EQ(flat.code, 3) << flat.out << flat.err;
  EXPECT_NE(flat.out.find("FAIL"), std::string::npos);
  EXPECT_NE(flat.out.find("0"), std::string::npos);
  auto obtuse = tool("validate obtuse.mesh", d);
  EXPECT_EQ(obtuse.code, 0) << obtuse.out;
  EXPECT_NE(obtuse.out.find("WARN"), std::string::npos);
  EXPECT_EQ(obtuse.out.find("FAIL"), std::string::npos);
  auto bad = tool("validate bad.mesh", d);
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("line 3"), std::string::npos) << bad.err;
  write(d / "a.cfg", "[mesh]\ncounts = 4, 4\n[run]\nscheme = yee\nt_final = 1\n");
  EXPECT_EQ(tool("validate a.cfg", d).code, 0);
}

TEST(Cli, SpectrumSubcommand) {
  auto d = scratch("spectrum");
  std::string csv = "time,x\n";
  for (int i = 0; i < 256; ++i)
    csv += emdec::format_double(0.05 * i) + "," + emdec::format_double(std::sin(2 * 3.141592653589793 * 2.0 * 0.05 * i)) + "\n";
  write(d / "s.csv", csv);
  auto r = tool("spectrum s.csv --out sp", d);
  ASSERT_EQ(r.code, 0) << r.err;
  auto peaks = emdec::parse_csv(slurp(d / "sp" / "peaks.csv"));
  ASSERT_FALSE(peaks.rows.empty());
  EXPECT_NEAR(peaks.rows[0][peaks.column("frequency")], 2.0, 1.0 / (256 * 0.05));
  EXPECT_EQ(tool("spectrum s.csv --column nope", d).code, 2);
  write(d / "uneven.csv", "time,x\n0,1\n0.1,2\n0.3,1\n");
  EXPECT_NE(tool("spectrum uneven.csv", d).code, 0);
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "emdec/emdec.hpp"

using namespace emdec;
namespace fs = std::filesystem;

namespace {

std::size_t config_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return static_cast<std::size_t>(-1);
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("emdec_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Expression, Arithmetic) {
  EXPECT_DOUBLE_EQ(Expression::parse("1 + 2*3")(0, 0, 0, 0), 7.0);
  EXPECT_DOUBLE_EQ(Expression::parse("(1 + 2)*3")(0, 0, 0, 0), 9.0);
  EXPECT_DOUBLE_EQ(Expression::parse("-x - -y")(2, 5, 0, 0), 3.0);
  EXPECT_DOUBLE_EQ(Expression::parse("8/2/2")(0, 0, 0, 0), 2.0);
  EXPECT_DOUBLE_EQ(Expression::parse("1.5e1")(0, 0, 0, 0), 15.0);
  EXPECT_NEAR(Expression::parse("sin(pi*t)*cos(0) + exp(z)")(0, 0, 0, 0.5), 2.0, 1e-15);
  EXPECT_NEAR(Expression::parse("e")(0, 0, 0, 0), std::numbers::e, 0);
}

TEST(Expression, ZeroDetectionAndText) {
  EXPECT_TRUE(Expression().is_zero());
  EXPECT_TRUE(Expression::parse("0").is_zero());
  EXPECT_FALSE(Expression::parse("0*x").is_zero());
  EXPECT_EQ(Expression::parse("x + 1").text(), "x + 1");
}

TEST(Expression, ErrorsCarryColumn) {
  for (const char* bad : {"1 +", "sin 2", "foo(1)", "(1", "1 2", "x $ y", ""}) {
    EXPECT_THROW(Expression::parse(bad), ExpressionError) << bad;
  }
  try {
    Expression::parse("1 + foo");
    FAIL();
  } catch (const ExpressionError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse);
    EXPECT_NE(std::string(e.what()).find("foo"), std::string::npos);
  }
}

TEST(Config, MinimalHasDefaults) {
  auto c = parse_config("[run]\nscheme = yee\nt_final = 2\n");
  EXPECT_EQ(c.scheme, Scheme::yee);
  EXPECT_EQ(c.t_final, 2.0);
  EXPECT_EQ(c.mesh_kind, MeshKind::grid);
  EXPECT_EQ(c.extents, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(c.counts, (std::vector<std::size_t>{16, 16}));
  EXPECT_EQ(c.dt_safety, 0.5);
  EXPECT_FALSE(c.dt.has_value());
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.init, Config::Init::random);
  EXPECT_EQ(c.output_dir, fs::path("out"));
  EXPECT_TRUE(c.probes.empty());
  EXPECT_EQ(c.epsilon, 1.0);
}

TEST(Config, DottedKeysAndComments) {
  auto c = parse_config(
      "run.scheme = avi   # trailing\nrun.t_final=1\n[mesh]\ncounts = 4 5\nextents = 2,3\n"
      "[output]\nprobes = face:3, edge:7\n[source]\njx = sin(t)\n");
  EXPECT_EQ(c.scheme, Scheme::avi);
  EXPECT_EQ(c.counts, (std::vector<std::size_t>{4, 5}));
  ASSERT_EQ(c.probes.size(), 2u);
  EXPECT_FALSE(c.probes[0].first);
  EXPECT_EQ(c.probes[1], std::make_pair(true, std::size_t{7}));
  EXPECT_FALSE(c.current[0].is_zero());
  EXPECT_TRUE(c.current[1].is_zero());
}

TEST(Config, RangeErrorsNameTheLine) {
  EXPECT_EQ(config_line("[run]\nscheme = yee\nt_final = 1\ndt_safety = 1.5\n"), 4u);
  EXPECT_EQ(config_line("[run]\nscheme = yee\nt_final = 1\ndt_safety = 0\n"), 4u);
  EXPECT_EQ(config_line("[run]\nscheme = leap\n"), 2u);
  EXPECT_EQ(config_line("[run]\nscheme = yee\nt_final = 1\nbogus = 3\n"), 4u);
  EXPECT_EQ(config_line("[run]\nscheme = yee\nscheme = bk\n"), 3u);
  EXPECT_EQ(config_line("[run]\nscheme = yee\nt_final = -1\n"), 3u);
  EXPECT_EQ(config_line("[run\n"), 1u);
  EXPECT_EQ(config_line("[run]\nscheme = yee\nt_final = 1\n[source]\njx = sin(\n"), 5u);
  EXPECT_EQ(config_line("[run]\nscheme = yee\nt_final = 1\njitter = 0.1\n"), 4u);
  EXPECT_EQ(config_line("[run]\nscheme = yee\nt_final = 1\n[output]\nspectrum = true\n"), 5u);
  EXPECT_EQ(config_line("[run]\nscheme = yee\n"), 0u);  // t_final missing
}

TEST(Config, YeeRejectsSimplicialMeshFile) {
  auto dir = scratch("yee_file");
  std::ofstream(dir / "tri.mesh") << "dim 2\nv 0 0\nv 1 0\nv 0 1\nc 2 0 1 2\n";
  std::ofstream(dir / "box.mesh") << "dim 2\nv 0 0\nv 1 0\nv 0 1\nv 1 1\nr 0 1 2 3\n";
  const std::string head = "[mesh]\nkind = file\nfile = ";
  try {
    parse_config(head + "tri.mesh\n[run]\nscheme = yee\nt_final = 1\n", dir);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 5u);
    EXPECT_NE(std::string(e.what()).find("rectangular"), std::string::npos);
  }
  EXPECT_NO_THROW(parse_config(head + "tri.mesh\n[run]\nscheme = bk\nt_final = 1\n", dir));
  EXPECT_NO_THROW(parse_config(head + "box.mesh\n[run]\nscheme = yee\nt_final = 1\n", dir));
  EXPECT_THROW(parse_config(head + "missing.mesh\n[run]\nscheme = bk\nt_final = 1\n", dir), ConfigError);
  EXPECT_THROW(parse_config("[mesh]\nkind = refined\n[run]\nscheme = yee\nt_final = 1\n"), ConfigError);
}

TEST(Config, LoadMissingFileIsIoError) {
  try {
    load_config("/nonexistent/emdec.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}

TEST(Config, BundledRecipesParse) {
  for (const char* name : {"yee_cavity_2d.cfg", "avi_random_2d.cfg", "cavity_spectrum_2d.cfg",
                           "cavity_spectrum_refined_2d.cfg"}) {
    const fs::path p = fs::path(EMDEC_RECIPE_DIR) / name;
    EXPECT_NO_THROW(load_config(p)) << p;
  }
}

TEST(Csv, FormatRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(3.0), "3");
}

TEST(Csv, ParseTableAndErrors) {
  auto t = parse_csv("# form=E\ntime,a\n0,1.5\n0.1,-2\n");
  ASSERT_EQ(t.header, (std::vector<std::string>{"time", "a"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][1], -2.0);
  EXPECT_EQ(t.column("a"), 1);
  EXPECT_EQ(t.column("zz"), -1);
  EXPECT_THROW(parse_csv("a,b\n1\n"), ParseError);
  EXPECT_THROW(parse_csv("a\nx\n"), ParseError);
  EXPECT_THROW(parse_csv(""), ParseError);
}

TEST(Csv, AtomicWriteReplacesWhole) {
  auto dir = scratch("atomic");
  const auto p = dir / "f.csv";
  write_file_atomic(p, "a\n1\n");
  write_file_atomic(p, "b\n2\n");
  EXPECT_EQ(read_file(p), "b\n2\n");
  EXPECT_FALSE(fs::exists(dir / "f.csv.tmp"));
  EXPECT_THROW(write_file_atomic(dir / "no" / "such" / "f.csv", "x"), Error);
  EXPECT_THROW(read_file(dir / "absent.csv"), Error);
}

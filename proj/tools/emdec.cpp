#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "emdec/emdec.hpp"

namespace fs = std::filesystem;

namespace {

std::optional<fs::path> env_output_dir() {
  const char* v = std::getenv("EMDEC_OUTPUT_DIR");
  if (v && *v) return fs::path(v);
  return std::nullopt;
}

int cmd_run(const fs::path& cfg_path) {
  const emdec::Config cfg = emdec::load_config(cfg_path);
  const fs::path out = env_output_dir().value_or(cfg.output_dir);
  const emdec::RunSummary s = emdec::run_config(cfg, out);
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "scheme " << emdec::scheme_name(cfg.scheme) << ", " << s.events << " updates, dt "
            << emdec::format_double(s.dt_min);
  if (s.dt_max != s.dt_min) std::cout << ".." << emdec::format_double(s.dt_max);
  std::cout << " (cfl " << emdec::format_double(s.cfl) << ")\n";
  if (s.drift)
    std::cout << "energy drift " << emdec::format_double(s.drift->drift_fraction) << ", max excursion "
              << emdec::format_double(s.drift->max_excursion) << '\n';
  std::cout << "wrote " << s.files.size() << " files to " << out.string() << '\n';
  return emdec::kExitOk;
}

int cmd_validate(const fs::path& path) {
  const emdec::ValidationReport rep = emdec::validate_path(path);
  emdec::print_report(std::cout, rep);
  return rep.ok() ? emdec::kExitOk : emdec::kExitNumeric;
}

int cmd_spectrum(emdec::SpectrumJob job, const std::string& out_flag) {
  if (!out_flag.empty()) job.out_dir = out_flag;
  else if (auto e = env_output_dir()) job.out_dir = *e;
  else job.out_dir = job.input.has_parent_path() ? job.input.parent_path() : fs::path(".");
  const emdec::Spectrum sp = emdec::spectrum_from_csv(job);
  std::cout << "bin width " << emdec::format_double(sp.bin) << ", " << sp.peaks.size() << " peaks\n";
  for (std::size_t i = 0; i < sp.peaks.size() && i < 10; ++i)
    std::cout << "  " << i + 1 << "  " << emdec::format_double(sp.peaks[i]) << '\n';
  return emdec::kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete exterior calculus Maxwell solver"};
  app.require_subcommand(1);

  std::string run_cfg;
  auto* run = app.add_subcommand("run", "run a simulation from a config file");
  run->add_option("config", run_cfg, "config file")->required();

  std::string val_path;
  auto* val = app.add_subcommand("validate", "check a mesh file or the mesh a config describes");
  val->add_option("input", val_path, "mesh or config file")->required();

  emdec::SpectrumJob job;
  std::string sp_in, sp_out;
  auto* sp = app.add_subcommand("spectrum", "power spectrum and peaks of a CSV time series");
  sp->add_option("csv", sp_in, "CSV with a time column")->required();
  sp->add_option("--column", job.column, "series column (default: first non-time column)");
  sp->add_option("--out", sp_out, "output directory");
  sp->add_option("--prominence", job.prominence, "peak prominence threshold, multiples of the median power");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : emdec::kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_cfg);
    if (*val) return cmd_validate(val_path);
    job.input = sp_in;
    return cmd_spectrum(job, sp_out);
  } catch (const emdec::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return emdec::exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return emdec::kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return emdec::kExitNumeric;
  }
}

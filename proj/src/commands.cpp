#include "tlm/commands.hpp"

#include "tlm/csv.hpp"
#include "tlm/plasma.hpp"
#include "tlm/solvers.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <ostream>

namespace tlm {

using nlohmann::json;

namespace {

std::string out_dir(const SimulationConfig& config, const RunOptions& options) {
  const std::string dir = options.out_dir.empty() ? config.output_dir : options.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

std::string fmt_fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

struct CellScreen {
  double ampere = std::numeric_limits<double>::quiet_NaN();
  double faraday = std::numeric_limits<double>::quiet_NaN();
  double radius = 0.0;
  bool stable() const { return radius < 1.0; }
};

CellScreen screen(const SimulationConfig& config, const CellSpec& cell) {
  CellScreen s;
  if (cell.kind == "maxwell") {
    HexGeometry g;
    g.B = cell.B;
    const CellStability st =
        screen_cell(g, cell_materials(config, cell), config.tau, cell.y_e, cell.y_m);
    s.ampere = st.ampere_radius;
    s.faraday = st.faraday_radius;
    s.radius = st.radius();
  } else {
    s.radius = cell.N.rows() == 0 ? 0.0 : spectral_radius(cell.N);
  }
  return s;
}

void require_stable(const SimulationConfig& config) {
  for (std::size_t c = 0; c < config.cells.size(); ++c) {
    const CellScreen s = screen(config, config.cells[c]);
    if (!s.stable()) {
      fail(ErrorCode::UnstableCell, "cell " + std::to_string(c) + " has spectral radius " +
                                        format_number(s.radius) + " >= 1");
    }
  }
}

void require_valid_mesh(const Mesh& mesh) {
  const auto v = validate_mesh(mesh);
  if (!v.empty()) fail(ErrorCode::LayoutMismatch, "invalid mesh: " + v.front());
}

int cmd_validate(const SimulationConfig& config, std::ostream& out) {
  const Mesh mesh = build_mesh(config);
  std::vector<std::string> v = validate_mesh(mesh);
  Excitation exc = build_excitation(config, mesh, 0, 0);
  for (auto& s : exc.check(mesh)) v.push_back(std::move(s));
  json report{{"command", "validate"},
              {"valid", v.empty()},
              {"cells", mesh.cell_count()},
              {"ports", mesh.port_count()},
              {"violations", v}};
  out << report.dump() << "\n";
  if (!v.empty()) fail(ErrorCode::LayoutMismatch, "invalid mesh: " + v.front());
  return 0;
}

int cmd_check(const SimulationConfig& config, const std::string& dir, std::ostream& out) {
  CsvTable t;
  t.header = {"cell", "ampere_radius", "faraday_radius", "radius", "margin", "admitted"};
  int rejected = -1;
  for (std::size_t c = 0; c < config.cells.size(); ++c) {
    const CellScreen s = screen(config, config.cells[c]);
    t.add_row({static_cast<double>(c), s.ampere, s.faraday, s.radius, 1.0 - s.radius,
               s.stable() ? 1.0 : 0.0});
    out << "cell " << c << ": " << (s.stable() ? "stable" : "unstable") << ", margin "
        << fmt_fixed(1.0 - s.radius, 6) << " (spectral radius " << fmt_fixed(s.radius, 6) << ")\n";
    if (!s.stable() && rejected < 0) rejected = static_cast<int>(c);
  }
  write_csv(t, dir + "/check.csv");
  if (rejected >= 0) {
    fail(ErrorCode::UnstableCell, "cell " + std::to_string(rejected) + " rejected by the stability gate");
  }
  return 0;
}

std::vector<Probe> default_probes(const Mesh& mesh) {
  std::vector<Probe> p;
  for (int c = 0; c < mesh.cell_count(); ++c) {
    for (int i = 0; i < mesh.ports_of(c); ++i) p.push_back({c, ProbeQuantity::Out, i});
  }
  return p;
}

int cmd_run_plasma(const SimulationConfig& config, const RunOptions& options,
                   const std::string& dir, std::ostream& out) {
  PlasmaMesh pm = build_plasma_mesh(config);
  require_valid_mesh(pm.field_mesh);
  const Excitation exc = build_excitation(config, pm.field_mesh, options.seed, config.run.steps);
  const PlasmaRunRecord rec = run_plasma(pm, exc, config.run.steps, options.threads);
  CsvTable t;
  t.header = {"step", "total_charge"};
  for (int p = 0; p < pm.field_mesh.port_count(); ++p) t.header.push_back("out" + std::to_string(p));
  for (std::size_t k = 0; k < rec.total_charge.size(); ++k) {
    if (k % static_cast<std::size_t>(config.run.record_every) != 0) continue;
    std::vector<double> row{static_cast<double>(k), rec.total_charge[k]};
    row.insert(row.end(), rec.field[k].begin(), rec.field[k].end());
    t.add_row(row);
  }
  write_csv(t, dir + "/time.csv");
  out << "run-time: " << config.run.steps << " coupled steps, " << t.rows.size() << " rows -> "
      << dir << "/time.csv\n";
  return 0;
}

int cmd_run_time(const SimulationConfig& config, const RunOptions& options, const std::string& dir,
                 std::ostream& out) {
  require_stable(config);
  if (config.particles) return cmd_run_plasma(config, options, dir, out);
  const Mesh mesh = build_mesh(config);
  require_valid_mesh(mesh);
  std::vector<DeflectedSystem> cells = build_cell_systems(config);
  const Excitation exc = build_excitation(config, mesh, options.seed, config.run.steps);
  TimeRunConfig tc;
  tc.steps = config.run.steps;
  tc.record_every = config.run.record_every;
  tc.divergence_factor = config.run.divergence_factor;
  tc.probes = config.run.probes.empty() ? default_probes(mesh) : config.run.probes;
  const TimeRunRecord rec = run_time_domain(mesh, cells, exc, tc, options.threads);
  CsvTable t;
  t.header = rec.header;
  for (const auto& r : rec.rows) t.add_row(r);
  write_csv(t, dir + "/time.csv");
  out << "run-time: " << tc.steps << " steps, " << t.rows.size() << " rows -> " << dir
      << "/time.csv\n";
  return 0;
}

struct FreqPrep {
  Mesh mesh;
  std::vector<SBlocks> blocks;
  CVec z_exc;
  std::vector<SParamSpec> sparams;
};

FreqPrep prepare_freq(const SimulationConfig& config) {
  require_stable(config);
  Mesh mesh = build_mesh(config);
  require_valid_mesh(mesh);
  std::vector<SBlocks> blocks = build_cell_blocks(config);
  const Excitation exc = build_excitation(config, mesh, 0, 0);
  CVec z_exc = exc.phasor_vector(mesh.port_count());
  std::vector<SParamSpec> sp = build_sparam_specs(config, mesh);
  return {std::move(mesh), std::move(blocks), std::move(z_exc), std::move(sp)};
}

FreqRunResult solve_at(const FreqPrep& prep, const SimulationConfig& config, double hz, int threads) {
  FreqRunConfig fc;
  fc.omega = angular_frequency(hz);
  fc.tol = config.run.tol;
  fc.max_iter = config.run.max_iter;
  fc.ramp_iters = config.run.ramp_iters;
  fc.sparams = prep.sparams;
  const double theta = fc.omega * config.tau;
  std::vector<CMat> condensed;
  condensed.reserve(prep.blocks.size());
  for (const SBlocks& b : prep.blocks) condensed.push_back(freq_condense(b, theta));
  return run_freq_domain(prep.mesh, condensed, prep.z_exc, fc, threads);
}

int cmd_run_freq(const SimulationConfig& config, const RunOptions& options, const std::string& dir,
                 std::ostream& out) {
  const FreqPrep prep = prepare_freq(config);
  const FreqRunResult res = solve_at(prep, config, config.run.frequency, options.threads);

  CsvTable trace;
  trace.header = {"iteration", "residual"};
  for (const auto& s : prep.sparams) trace.header.push_back(s.label + "_dB");
  for (const FreqIteration& it : res.trace) {
    std::vector<double> row{static_cast<double>(it.iteration), it.residual};
    row.insert(row.end(), it.sparam_db.begin(), it.sparam_db.end());
    trace.add_row(row);
  }
  write_csv(trace, dir + "/freq_trace.csv");

  CsvTable sol;
  sol.header = {"port", "cell", "local", "in_re", "in_im", "out_re", "out_im"};
  for (int c = 0; c < prep.mesh.cell_count(); ++c) {
    for (int i = 0; i < prep.mesh.ports_of(c); ++i) {
      const int p = prep.mesh.offset(c) + i;
      sol.add_row({static_cast<double>(p), static_cast<double>(c), static_cast<double>(i),
                   res.z_in(p).real(), res.z_in(p).imag(), res.z_out(p).real(), res.z_out(p).imag()});
    }
  }
  write_csv(sol, dir + "/freq_solution.csv");

  CsvTable sp;
  sp.header = {"label", "re", "im", "dB"};
  for (const SParamSpec& s : prep.sparams) {
    const SParam v = extract_sparam(res.z_out, prep.z_exc, s);
    sp.rows.push_back({s.label, format_number(v.s.real()), format_number(v.s.imag()), format_number(v.db)});
  }
  write_csv(sp, dir + "/sparams.csv");

  out << "run-freq: " << (res.converged ? "converged" : "not converged") << " after "
      << res.iterations << " iterations, residual " << format_number(res.residual) << "\n";
  if (!res.converged) {
    fail(ErrorCode::MaxIterExceeded, "no convergence within " + std::to_string(config.run.max_iter) +
                                         " iterations (best residual " + format_number(res.residual) + ")");
  }
  return 0;
}

int cmd_sweep(const SimulationConfig& config, const RunOptions& options, const std::string& dir,
              std::ostream& out) {
  if (config.run.frequencies.empty()) fail(ErrorCode::InvalidArgument, "sweep needs run.frequencies");
  const FreqPrep prep = prepare_freq(config);
  CsvTable t;
  t.header = {"frequency", "omega", "iterations", "residual", "converged"};
  for (const auto& s : prep.sparams) t.header.push_back(s.label + "_dB");
  int failures = 0;
  for (double hz : config.run.frequencies) {
    const FreqRunResult res = solve_at(prep, config, hz, options.threads);
    std::vector<double> row{hz, angular_frequency(hz), static_cast<double>(res.iterations),
                            res.residual, res.converged ? 1.0 : 0.0};
    for (const SParamSpec& s : prep.sparams) row.push_back(extract_sparam(res.z_out, prep.z_exc, s).db);
    t.add_row(row);
    if (!res.converged) ++failures;
  }
  write_csv(t, dir + "/sweep.csv");
  out << "sweep: " << config.run.frequencies.size() << " frequencies, " << failures
      << " not converged -> " << dir << "/sweep.csv\n";
  if (failures > 0) {
    fail(ErrorCode::MaxIterExceeded, std::to_string(failures) + " sweep points did not converge");
  }
  return 0;
}

int cmd_impulse(const SimulationConfig& config, const std::string& dir, std::ostream& out) {
  const ImpulseSpec& im = config.run.impulse;
  require_stable(config);
  const std::vector<SBlocks> blocks = build_cell_blocks(config);
  const SBlocks& b = blocks.at(static_cast<std::size_t>(im.cell));
  Vec z0 = Vec::Zero(b.n_in());
  z0(im.port) = 1.0;
  const std::vector<Vec> resp = impulse_response(b, z0, im.steps);
  CsvTable t;
  t.header = {"step"};
  for (Eigen::Index i = 0; i < b.n_out(); ++i) t.header.push_back("out" + std::to_string(i));
  for (std::size_t k = 0; k < resp.size(); ++k) {
    std::vector<double> row{static_cast<double>(k + 1)};
    row.insert(row.end(), resp[k].data(), resp[k].data() + resp[k].size());
    t.add_row(row);
  }
  write_csv(t, dir + "/impulse.csv");
  out << "impulse: cell " << im.cell << " port " << im.port << ", " << resp.size()
      << " steps -> " << dir << "/impulse.csv\n";
  return 0;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"run-time", "run-freq", "sweep",
                                              "impulse",  "check",    "validate"};
  return names;
}

std::string error_record(const Error& e) {
  json j{{"error", std::string(to_string(e.code()))},
         {"message", e.what()},
         {"exit_code", exit_code(e.code())}};
  if (const auto* se = dynamic_cast<const SchemaError*>(&e)) {
    j["issues"] = json::array();
    for (const auto& i : se->issues()) j["issues"].push_back({{"path", i.path}, {"message", i.message}});
  }
  return j.dump();
}

int dispatch(const std::string& command, const SimulationConfig& config, const RunOptions& options,
             std::ostream& out, std::ostream& err) {
  try {
    if (options.threads < 1) fail(ErrorCode::InvalidArgument, "--threads must be >= 1");
    if (command == "validate") return cmd_validate(config, out);
    const std::string dir = out_dir(config, options);
    if (command == "check") return cmd_check(config, dir, out);
    if (command == "run-time") return cmd_run_time(config, options, dir, out);
    if (command == "run-freq") return cmd_run_freq(config, options, dir, out);
    if (command == "sweep") return cmd_sweep(config, options, dir, out);
    if (command == "impulse") return cmd_impulse(config, dir, out);
    fail(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
  } catch (const Error& e) {
    err << error_record(e) << "\n";
    return exit_code(e.code());
  }
}

int run_command(const std::string& command, const std::string& config_path,
                const RunOptions& options, std::ostream& out, std::ostream& err) {
  SimulationConfig config;
  try {
    config = load_config(config_path);
  } catch (const Error& e) {
    err << error_record(e) << "\n";
    return exit_code(e.code());
  }
  return dispatch(command, config, options, out, err);
}

}  // namespace tlm

#include "tlm/solvers.hpp"

#include "tlm/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace tlm {

ProbeQuantity parse_probe_quantity(const std::string& name) {
  if (name == "in") return ProbeQuantity::In;
  if (name == "out") return ProbeQuantity::Out;
  if (name == "node") return ProbeQuantity::Node;
  if (name == "port") return ProbeQuantity::Port;
  if (name == "stub") return ProbeQuantity::Stub;
  fail(ErrorCode::InvalidArgument, "unknown probe quantity '" + name + "'");
}

std::string_view to_string(ProbeQuantity q) {
  switch (q) {
    case ProbeQuantity::In: return "in";
    case ProbeQuantity::Out: return "out";
    case ProbeQuantity::Node: return "node";
    case ProbeQuantity::Port: return "port";
    case ProbeQuantity::Stub: return "stub";
  }
  return "?";
}

std::string Probe::label() const {
  return "c" + std::to_string(cell) + "_" + std::string(to_string(quantity)) +
         std::to_string(index);
}

void TimeRunConfig::validate() const {
  if (steps < 1) fail(ErrorCode::InvalidArgument, "steps must be >= 1");
  if (record_every < 1) fail(ErrorCode::InvalidArgument, "record_every must be >= 1");
}

namespace {

double probe_value(const DeflectedSystem& s, const Probe& p, const Vec& z_in) {
  const Vec* v = nullptr;
  switch (p.quantity) {
    case ProbeQuantity::In: v = &z_in; break;
    case ProbeQuantity::Out: v = &s.last_out(); break;
    case ProbeQuantity::Node: v = &s.node_history().entry(0); break;
    case ProbeQuantity::Port: v = &s.port_history().entry(0); break;
    case ProbeQuantity::Stub: v = &s.stub(); break;
  }
  return (*v)(p.index);
}

Eigen::Index probe_extent(const DeflectedSystem& s, ProbeQuantity q) {
  switch (q) {
    case ProbeQuantity::In: return s.base().n_in();
    case ProbeQuantity::Out: return s.base().n_out();
    case ProbeQuantity::Node:
    case ProbeQuantity::Port: return s.basis().link_dim();
    case ProbeQuantity::Stub: return s.base().n_stub();
  }
  return 0;
}

}  // namespace

TimeRunRecord run_time_domain(const Mesh& mesh, std::vector<DeflectedSystem>& cells,
                              const Excitation& excitation, const TimeRunConfig& config,
                              int threads) {
  config.validate();
  const int ncell = mesh.cell_count();
  if (static_cast<int>(cells.size()) != ncell) {
    fail(ErrorCode::LayoutMismatch, "mesh has " + std::to_string(ncell) + " cells, got " +
                                        std::to_string(cells.size()) + " systems");
  }
  for (int c = 0; c < ncell; ++c) {
    const auto& s = cells[static_cast<std::size_t>(c)];
    if (s.base().n_in() != mesh.ports_of(c) || s.base().n_out() != mesh.ports_of(c)) {
      fail(ErrorCode::LayoutMismatch, "cell " + std::to_string(c) + " port count differs from mesh");
    }
  }
  for (const Probe& p : config.probes) {
    if (p.cell < 0 || p.cell >= ncell || p.index < 0 ||
        p.index >= probe_extent(cells[static_cast<std::size_t>(p.cell)], p.quantity)) {
      fail(ErrorCode::LayoutMismatch, "probe " + p.label() + " is outside the mesh");
    }
  }

  const int n = mesh.port_count();
  std::vector<Vec> drive(static_cast<std::size_t>(config.steps));
  double peak = 0.0;
  for (int k = 0; k < config.steps; ++k) {
    drive[static_cast<std::size_t>(k)] = excitation.values_at(k, n);
    peak = std::max(peak, drive[static_cast<std::size_t>(k)].cwiseAbs().maxCoeff());
  }
  const double ceiling = config.divergence_factor * std::max(1.0, peak);

  TimeRunRecord rec;
  rec.header.push_back("step");
  for (const Probe& p : config.probes) rec.header.push_back(p.label());

  Vec z_out(n);
  for (int c = 0; c < ncell; ++c) {
    z_out.segment(mesh.offset(c), mesh.ports_of(c)) = cells[static_cast<std::size_t>(c)].last_out();
  }
  std::vector<char> diverged(static_cast<std::size_t>(ncell), 0);
  for (int k = 0; k < config.steps; ++k) {
    const Vec z_in = connect(mesh, z_out, drive[static_cast<std::size_t>(k)]);
    parallel_for(static_cast<std::size_t>(ncell), threads, [&](std::size_t c) {
      const int ci = static_cast<int>(c);
      const Vec out = deflected_step(cells[c], z_in.segment(mesh.offset(ci), mesh.ports_of(ci)));
      z_out.segment(mesh.offset(ci), mesh.ports_of(ci)) = out;
      diverged[c] = config.divergence_factor > 0.0 &&
                    !(out.size() == 0 || out.cwiseAbs().maxCoeff() <= ceiling);
    });
    for (int c = 0; c < ncell; ++c) {
      if (diverged[static_cast<std::size_t>(c)]) {
        fail(ErrorCode::DivergenceDetected, "cell " + std::to_string(c) +
                                                " exceeded the divergence ceiling at step " +
                                                std::to_string(k));
      }
    }
    if (k % config.record_every == 0) {
      std::vector<double> row;
      row.reserve(config.probes.size() + 1);
      row.push_back(static_cast<double>(k));
      for (const Probe& p : config.probes) {
        const int off = mesh.offset(p.cell);
        const Vec local_in = z_in.segment(off, mesh.ports_of(p.cell));
        row.push_back(probe_value(cells[static_cast<std::size_t>(p.cell)], p, local_in));
      }
      rec.rows.push_back(std::move(row));
    }
  }
  return rec;
}

cplx PortGroup::combine(const CVec& v) const {
  if (!weights.empty() && weights.size() != ports.size()) {
    fail(ErrorCode::InvalidArgument, "port group weights and ports differ in length");
  }
  cplx sum = 0.0;
  for (std::size_t i = 0; i < ports.size(); ++i) {
    const int p = ports[i];
    if (p < 0 || p >= v.size()) fail(ErrorCode::LayoutMismatch, "port group references a missing port");
    sum += (weights.empty() ? 1.0 : weights[i]) * v(p);
  }
  return sum;
}

void FreqRunConfig::validate() const {
  if (!(tol > 0.0)) fail(ErrorCode::InvalidArgument, "tol must be positive");
  if (ramp_iters < 0) fail(ErrorCode::InvalidArgument, "ramp_iters must be >= 0");
  if (max_iter < 0) fail(ErrorCode::InvalidArgument, "max_iter must be >= 0");
  if (!std::isfinite(omega)) fail(ErrorCode::InvalidArgument, "omega must be finite");
}

double ramp_factor(int k, int ramp_iters) {
  if (k >= ramp_iters) return 1.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * (k + 1) / (ramp_iters + 1)));
}

namespace {

void check_condensed(const Mesh& mesh, const std::vector<CMat>& condensed) {
  if (static_cast<int>(condensed.size()) != mesh.cell_count()) {
    fail(ErrorCode::LayoutMismatch, "one condensed matrix per cell required");
  }
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const CMat& s = condensed[static_cast<std::size_t>(c)];
    if (s.rows() != mesh.ports_of(c) || s.cols() != mesh.ports_of(c)) {
      fail(ErrorCode::LayoutMismatch, "condensed matrix of cell " + std::to_string(c) +
                                          " does not match its port count");
    }
  }
}

CVec scatter_all(const Mesh& mesh, const std::vector<CMat>& condensed, const CVec& z_in,
                 cplx phase, int threads) {
  CVec out(z_in.size());
  parallel_for(condensed.size(), threads, [&](std::size_t c) {
    const int ci = static_cast<int>(c);
    const int off = mesh.offset(ci);
    const int np = mesh.ports_of(ci);
    out.segment(off, np).noalias() = phase * (condensed[c] * z_in.segment(off, np));
  });
  return out;
}

double residual_of(const Mesh& mesh, const std::vector<CMat>& condensed, const CVec& z_in,
                   const CVec& z_exc, cplx phase, double exc_norm, int threads) {
  const CVec z_out = scatter_all(mesh, condensed, z_in, phase, threads);
  const double r = (z_in - connect(mesh, z_out, z_exc)).norm();
  return exc_norm > 0.0 ? r / exc_norm : r;
}

}  // namespace

double freq_residual(const Mesh& mesh, const std::vector<CMat>& condensed, const CVec& z_in,
                     const CVec& z_exc, double theta) {
  check_condensed(mesh, condensed);
  return residual_of(mesh, condensed, z_in, z_exc, std::polar(1.0, -theta), z_exc.norm(), 1);
}

FreqRunResult run_freq_domain(const Mesh& mesh, const std::vector<CMat>& condensed,
                              const CVec& z_exc, const FreqRunConfig& config, int threads) {
  config.validate();
  check_condensed(mesh, condensed);
  const int n = mesh.port_count();
  if (z_exc.size() != n) fail(ErrorCode::LayoutMismatch, "excitation length differs from port count");

  const cplx phase = std::polar(1.0, -config.omega * mesh.tau());
  const double exc_norm = z_exc.norm();

  FreqRunResult res;
  res.homogeneous = exc_norm == 0.0;
  CVec z_out = CVec::Zero(n);
  double best = std::numeric_limits<double>::infinity();

  auto record = [&](int k, const CVec& z_in, const CVec& next_out) {
    const CVec full = scatter_all(mesh, condensed, z_in, phase, threads);
    const double r0 = (z_in - connect(mesh, full, z_exc)).norm();
    const double r = res.homogeneous ? r0 : r0 / exc_norm;
    FreqIteration it;
    it.iteration = k;
    it.residual = r;
    for (const SParamSpec& sp : config.sparams) {
      const cplx inc = sp.input.combine(z_exc);
      it.sparam_db.push_back(inc == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                        : to_db(sp.output.combine(next_out) / inc));
    }
    res.trace.push_back(std::move(it));
    if (r < best) {
      best = r;
      res.z_in = z_in;
      res.z_out = next_out;
      res.residual = r;
      res.iterations = k;
    }
    return r;
  };

  for (int k = 0; k <= config.max_iter; ++k) {
    const CVec z_in = connect(mesh, z_out, CVec(ramp_factor(k, config.ramp_iters) * z_exc));
    const CVec next = scatter_all(mesh, condensed, z_in, phase, threads);
    const double r = record(k, z_in, next);
    if (!std::isfinite(r)) break;
    if (r <= config.tol && k >= config.ramp_iters) {
      res.converged = true;
      res.z_in = z_in;
      res.z_out = next;
      res.residual = r;
      res.iterations = k;
      break;
    }
    if (res.homogeneous && r <= config.tol) {
      res.converged = true;
      break;
    }
    z_out = next;
  }
  return res;
}

double to_db(cplx s) { return 20.0 * std::log10(std::abs(s)); }

SParam extract_sparam(const CVec& z_out, const CVec& z_exc, const SParamSpec& spec) {
  const cplx inc = spec.input.combine(z_exc);
  if (inc == 0.0) fail(ErrorCode::ZeroIncident, "incident phasor of " + spec.label + " is zero");
  SParam s;
  s.s = spec.output.combine(z_out) / inc;
  s.db = to_db(s.s);
  return s;
}

CrossDomainResult cross_domain_check(const SBlocks& blocks, double omega, int steps,
                                     const CVec& z0) {
  blocks.validate();
  if (z0.size() != blocks.n_in()) fail(ErrorCode::DimensionMismatch, "z0 has the wrong length");
  if (steps < 1) fail(ErrorCode::InvalidArgument, "steps must be >= 1");
  if (z0.norm() == 0.0) fail(ErrorCode::ZeroIncident, "zero drive vector");
  const double theta = omega * blocks.tau;
  const CMat s = freq_condense(blocks, theta);
  const CMat K = blocks.K.cast<cplx>();
  const CMat L = blocks.L.cast<cplx>();
  const CMat M = blocks.M.cast<cplx>();
  const CMat N = blocks.N.cast<cplx>();
  CVec stub = CVec::Zero(blocks.n_stub());
  CrossDomainResult res;
  res.per_step.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const CVec a = std::polar(1.0, theta * k) * z0;
    const CVec b = K * a + L * stub;
    stub = N * stub + M * a;
    res.per_step.push_back((b - s * a).norm() / a.norm());
  }
  res.deviation = res.per_step.back();
  return res;
}

}  // namespace tlm

#pragma once

// Global drivers: time-domain marching over a mesh of deflected cells and
// the frequency-domain fixed-point iteration over condensed cells.
//
// Frequency convention: port phasors are sampled at integer times, so a
// harmonic steady state obeys z_out = e^{-j theta} S~ z_in with
// theta = omega tau and the global equation solved is
//
//     z_in = C (e^{-j theta} S~ z_in + z_exc).

#include "tlm/deflection.hpp"
#include "tlm/linalg.hpp"
#include "tlm/mesh.hpp"
#include "tlm/scattering.hpp"

#include <string>
#include <vector>

namespace tlm {

enum class ProbeQuantity { In, Out, Node, Port, Stub };

ProbeQuantity parse_probe_quantity(const std::string& name);
std::string_view to_string(ProbeQuantity q);

struct Probe {
  int cell = 0;
  ProbeQuantity quantity = ProbeQuantity::Out;
  int index = 0;

  std::string label() const;
};

struct TimeRunConfig {
  int steps = 1;
  std::vector<Probe> probes;
  int record_every = 1;
  /// Ceiling relative to max(1, peak excitation); <= 0 disables the check.
  double divergence_factor = 1e12;

  void validate() const;
};

/// Row k holds step k: in = z_in(k), out = z_out(k + 1), node = z^n(k + 1/2),
/// port = z^p(k), stub = s(k + 1).
struct TimeRunRecord {
  std::vector<std::string> header;  // "step" followed by probe labels
  std::vector<std::vector<double>> rows;
};

/// Alternates connect and per-cell deflected_step. Throws DivergenceDetected
/// with the step index when a cell's outgoing vector exceeds the ceiling.
TimeRunRecord run_time_domain(const Mesh& mesh, std::vector<DeflectedSystem>& cells,
                              const Excitation& excitation, const TimeRunConfig& config,
                              int threads = 1);

struct PortGroup {
  std::vector<int> ports;
  std::vector<double> weights;  // empty = all ones

  cplx combine(const CVec& v) const;
};

struct SParamSpec {
  std::string label;  // e.g. "s21"
  PortGroup input;
  PortGroup output;
};

struct FreqRunConfig {
  double omega = 0.0;
  double tol = 1e-8;
  int max_iter = 20000;
  int ramp_iters = 300;
  std::vector<SParamSpec> sparams;

  void validate() const;
};

struct SParam {
  cplx s;
  double db = 0.0;
};

struct FreqIteration {
  int iteration = 0;
  double residual = 0.0;
  std::vector<double> sparam_db;  // NaN while the incident group is zero
};

struct FreqRunResult {
  CVec z_in;
  CVec z_out;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool homogeneous = false;  // zero excitation: absolute homogeneous residual
  std::vector<FreqIteration> trace;
};

/// Raised-cosine onset factor for iteration k (1 once k >= ramp_iters).
double ramp_factor(int k, int ramp_iters);

/// Residual of z_in against the global equation; relative to |z_exc| unless
/// z_exc = 0.
double freq_residual(const Mesh& mesh, const std::vector<CMat>& condensed, const CVec& z_in,
                     const CVec& z_exc, double theta);

/// Fixed-point iteration z_in(k) = C(z_out(k) + r_k z_exc),
/// z_out(k+1) = e^{-j theta} S~ z_in(k). Non-convergence within max_iter is
/// reported through converged = false with the best iterate, not thrown.
FreqRunResult run_freq_domain(const Mesh& mesh, const std::vector<CMat>& condensed,
                              const CVec& z_exc, const FreqRunConfig& config, int threads = 1);

/// s = output(z_out) / input(z_exc). Throws ZeroIncident.
SParam extract_sparam(const CVec& z_out, const CVec& z_exc, const SParamSpec& spec);

double to_db(cplx s);

struct CrossDomainResult {
  double deviation = 0.0;           // at the final step
  std::vector<double> per_step;     // |b(k+1) - S~ a(k)| / |a(k)| for k = 0..steps-1
};

/// Drives the cell with a(k) = e^{j theta k} z0 from rest and compares the
/// transfer to freq_condense at theta = omega tau.
CrossDomainResult cross_domain_check(const SBlocks& blocks, double omega, int steps,
                                     const CVec& z0);

}  // namespace tlm

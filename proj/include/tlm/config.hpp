#pragma once

// JSON simulation configuration. The schema is documented in README.md.

#include "tlm/deflection.hpp"
#include "tlm/error.hpp"
#include "tlm/linalg.hpp"
#include "tlm/maxwell_cell.hpp"
#include "tlm/mesh.hpp"
#include "tlm/plasma.hpp"
#include "tlm/solvers.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tlm {

inline constexpr int kSchemaVersion = 1;

struct SchemaIssue {
  std::string path;  // JSON pointer style, e.g. /cells/0/B
  std::string message;
};

/// SchemaViolation carrying every issue found in one pass.
class SchemaError : public Error {
 public:
  explicit SchemaError(std::vector<SchemaIssue> issues);
  const std::vector<SchemaIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<SchemaIssue> issues_;
};

/// Physical constants used to scale relative material values. SI by default;
/// a "normalization" block replaces them (e.g. c0 = eps0 = mu0 = 1).
struct Normalization {
  bool present = false;
  double c0 = 299792458.0;
  double eps0 = 8.8541878128e-12;
  double mu0 = 1.25663706212e-6;
};

struct PortRef {
  int cell = 0;
  int port = 0;
};

struct CellSpec {
  std::string kind = "maxwell";  // "maxwell" or "blocks"
  // maxwell
  Mat3 B = Mat3::Identity();
  Mat3 eps_r = Mat3::Identity();
  Mat3 mu_r = Mat3::Identity();
  Mat3 kappa_e = Mat3::Zero();  // S/m
  Mat3 kappa_m = Mat3::Zero();  // Ohm/m
  double y_e = 1.0;
  double y_m = 1.0;
  // blocks
  Mat K, L, M, N;

  int port_count() const;
};

struct LinkSpec {
  PortRef a;
  PortRef b;
};

struct BoundarySpec {
  PortRef port;
  cplx reflection = 0.0;
};

struct SignalSpec {
  std::string type = "impulse";  // impulse, step, sine, gaussian, noise
  double amplitude = 1.0;
  long delay = 0;        // impulse, step: first active step
  double omega = 0.0;    // sine, rad/s
  double phase = 0.0;    // sine, rad
  double center = 0.0;   // gaussian, steps
  double width = 1.0;    // gaussian, steps
};

struct ExcitationSpec {
  PortRef port;
  std::optional<SignalSpec> signal;
  std::optional<cplx> phasor;
};

struct ParticleInit {
  int cell = 0;
  double Q = 0.0;
  Vec3 v = Vec3::Zero();
};

struct ParticleSpec {
  ParticleParams params;
  std::vector<ParticleInit> initial;
  std::vector<LinkSpec> face_links;  // port = face index 0..5 (x-, x+, y-, y+, z-, z+)
};

struct PortGroupSpec {
  std::vector<PortRef> ports;
  std::vector<double> weights;
};

struct SParamGroupSpec {
  std::string label;
  PortGroupSpec input;
  PortGroupSpec output;
};

struct ImpulseSpec {
  int cell = 0;
  int port = 0;
  int steps = 100;
};

struct RunSpec {
  std::string mode = "time";  // "time" or "freq"
  // time
  int steps = 100;
  int record_every = 1;
  double divergence_factor = 1e12;
  std::vector<Probe> probes;
  // freq
  double frequency = 0.0;  // Hz
  double tol = 1e-8;
  int max_iter = 20000;
  int ramp_iters = 300;
  std::vector<SParamGroupSpec> sparams;
  std::vector<double> frequencies;  // sweep, Hz
  ImpulseSpec impulse;
};

struct SimulationConfig {
  int schema_version = kSchemaVersion;
  Normalization normalization;
  double tau = 1.0;
  std::vector<CellSpec> cells;
  std::vector<LinkSpec> links;
  std::vector<BoundarySpec> boundaries;
  std::optional<cplx> unlinked_reflection;
  std::vector<ExcitationSpec> excitations;
  std::optional<ParticleSpec> particles;
  RunSpec run;
  std::string output_dir = "out";
};

/// Parses and validates. Throws SchemaError (all issues with paths) or
/// UnitError for an inconsistent normalization block.
SimulationConfig parse_config(const std::string& text);
SimulationConfig load_config(const std::string& path);

/// Canonical JSON text; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const SimulationConfig& config);

// Model construction from a parsed configuration.

Mesh build_mesh(const SimulationConfig& config);
int global_port(const Mesh& mesh, const PortRef& ref);

/// Absolute materials of a maxwell cell.
Materials cell_materials(const SimulationConfig& config, const CellSpec& cell);
CanonicalCell build_canonical_cell(const SimulationConfig& config, const CellSpec& cell);

/// Scattering blocks of every cell.
std::vector<SBlocks> build_cell_blocks(const SimulationConfig& config);

/// Unperturbed time-domain systems of every cell.
std::vector<DeflectedSystem> build_cell_systems(const SimulationConfig& config);

/// Time-domain drive. Noise signals draw from mt19937_64(seed) and are
/// tabulated for the given number of steps.
Excitation build_excitation(const SimulationConfig& config, const Mesh& mesh,
                            std::uint64_t seed, int steps);

std::vector<SParamSpec> build_sparam_specs(const SimulationConfig& config, const Mesh& mesh);
PlasmaMesh build_plasma_mesh(const SimulationConfig& config);

/// omega = 2 pi f.
double angular_frequency(double hz);

}  // namespace tlm

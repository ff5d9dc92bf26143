#pragma once

// Relativistic charged-particle current coupled to a canonical Maxwell cell
// through a deflection of the Ampere law.
//
// Each cell carries its total charge Q, a mean particle velocity v, and six
// face-current channels (characteristic impedance zero) whose total port
// value J_in + J_out is the convection current through the face.

#include "tlm/deflection.hpp"
#include "tlm/linalg.hpp"
#include "tlm/maxwell_cell.hpp"
#include "tlm/mesh.hpp"

#include <array>
#include <vector>

namespace tlm {

struct ParticleParams {
  double m0 = 1.0;    // rest mass, kg
  double q0 = 1.0;    // particle charge, C
  double nu_c = 0.0;  // mean collision frequency, 1/s
  double c0 = 299792458.0;

  void validate() const;
};

using FaceValues = std::array<double, 6>;

struct ParticleState {
  double Q = 0.0;          // total charge in the cell
  Vec3 v = Vec3::Zero();   // mean velocity
  FaceValues J_out{};      // outgoing face-current link values of the last step
};

double relativistic_mass(const ParticleParams& params, const Vec3& v);

/// m (delta_ij + v_i v_j / (c0^2 - v^2)).
Mat3 mass_matrix(const ParticleParams& params, const Vec3& v);

/// q0 (E + v x B) - nu_c m v.
Vec3 lorentz_force(const ParticleParams& params, const Vec3& v, const Vec3& e, const Vec3& b);

/// M^-1 F_L through a Cholesky solve.
Vec3 lorentz_accel(const ParticleParams& params, const Vec3& v, const Vec3& e, const Vec3& b);

/// Explicit Euler step v + tau M^-1 F_L; throws SuperluminalStep when the
/// result is not slower than light.
Vec3 step_velocity(const ParticleParams& params, const Vec3& v, const Vec3& e, const Vec3& b,
                   double tau);

/// 1/4 B^-1 Q v.
Vec3 convection_current(const HexGeometry& geometry, double charge, const Vec3& v);

/// rho v . f_mu for the six inward face vectors.
FaceValues face_currents(const HexGeometry& geometry, double rho, const Vec3& v);

/// Q + tau sum J.
double update_charge(double charge, double tau, const FaceValues& j);

/// Field cell plus particle state.
struct PlasmaCell {
  CanonicalCell cell;
  DeflectedSystem field;
  ParticleState state;
  Vec3 last_jc = Vec3::Zero();  // J_c carried by the current deflection
};

/// Builds the field system (combined Ampere/Faraday blocks, zero-branch
/// deflection) with the deflection seeded from the initial (Q, v). A nonzero
/// Q with q0 = 0 is rejected (InvalidArgument): uncharged particles carry no
/// charge.
PlasmaCell make_plasma_cell(const CanonicalCell& cell, const ParticleParams& params,
                            const ParticleState& initial);

struct CoupledStepResult {
  Vec z_out;         // outgoing field link vector at t + tau (6 entries)
  FaceValues J_out;  // outgoing face currents at t + tau
};

/// One coupled update. Order: field reflection, intermediate charge q,
/// velocity, convection current, deflection, outgoing face currents, charge.
/// Throws SuperluminalStep or TimeStepTooLarge (|dv| >= 0.1 (c0 - |v|)).
CoupledStepResult coupled_step(PlasmaCell& pc, const ParticleParams& params, const Vec& z_in,
                               const FaceValues& j_in);

/// Residual of psi_0 z^p(t) - phi_0 z^n(t+tau/2) - phi_1 z^n(t-tau/2) - J_c
/// for the Ampere law of the cell, evaluated on the histories recorded by
/// the last coupled step and the convection current that produced D(t).
double ampere_residual(const PlasmaCell& pc, const Vec3& jc_at_t);

/// A mesh of plasma cells: field ports (6 per cell) and face ports (6 per
/// cell) connected by two meshes sharing tau. Face links reverse the
/// orientation (J_in = -J_out of the partner), so a boundary reflection of 1
/// on a face port is an impermeable wall.
struct PlasmaMesh {
  Mesh field_mesh;
  Mesh face_mesh;
  std::vector<PlasmaCell> cells;
  ParticleParams params;
};

struct PlasmaRunRecord {
  std::vector<double> total_charge;          // per step, after the update
  std::vector<std::vector<double>> field;    // per step, concatenated outgoing field vectors
};

/// Runs the coupled mesh for the given number of steps with a field drive.
/// Cells are updated in parallel between connection barriers.
PlasmaRunRecord run_plasma(PlasmaMesh& mesh, const Excitation& field_excitation, int steps,
                           int threads = 1);

}  // namespace tlm

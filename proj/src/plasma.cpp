#include "tlm/plasma.hpp"

#include "tlm/error.hpp"

#include <cmath>
#include <string>

namespace tlm {

namespace {

void require_subluminal(const ParticleParams& params, const Vec3& v) {
  if (!v.allFinite() || !(v.norm() < params.c0)) {
    fail(ErrorCode::SuperluminalVelocity,
         "|v| = " + std::to_string(v.norm()) + " is not below c0 = " + std::to_string(params.c0));
  }
}

// Image-space vector of the combined cell model carrying -J_c on the Ampere
// rows (F = J with F = phi_0 z^n+ + phi_1 z^n- - psi_0 z^p).
Vec ampere_perturbation(const Vec3& jc) {
  Vec j = Vec::Zero(12);
  j.head<3>() = -jc;
  return j;
}

}  // namespace

void ParticleParams::validate() const {
  if (!(m0 > 0.0) || !(c0 > 0.0) || !(nu_c >= 0.0) || !std::isfinite(q0)) {
    fail(ErrorCode::InvalidArgument, "particle parameters need m0 > 0, c0 > 0, nu_c >= 0");
  }
}

double relativistic_mass(const ParticleParams& params, const Vec3& v) {
  require_subluminal(params, v);
  const double beta2 = v.squaredNorm() / (params.c0 * params.c0);
  return params.m0 / std::sqrt(1.0 - beta2);
}

Mat3 mass_matrix(const ParticleParams& params, const Vec3& v) {
  const double m = relativistic_mass(params, v);
  const double lambda = 1.0 / (params.c0 * params.c0 - v.squaredNorm());
  return m * (Mat3::Identity() + lambda * v * v.transpose());
}

Vec3 lorentz_force(const ParticleParams& params, const Vec3& v, const Vec3& e, const Vec3& b) {
  const double m = relativistic_mass(params, v);
  return params.q0 * (e + v.cross(b)) - params.nu_c * m * v;
}

Vec3 lorentz_accel(const ParticleParams& params, const Vec3& v, const Vec3& e, const Vec3& b) {
  const Mat3 mm = mass_matrix(params, v);
  return mm.llt().solve(lorentz_force(params, v, e, b));
}

Vec3 step_velocity(const ParticleParams& params, const Vec3& v, const Vec3& e, const Vec3& b,
                   double tau) {
  const Vec3 next = v + tau * lorentz_accel(params, v, e, b);
  if (!next.allFinite() || !(next.norm() < params.c0)) {
    fail(ErrorCode::SuperluminalStep,
         "velocity step reaches |v| = " + std::to_string(next.norm()) + "; reduce the time step");
  }
  return next;
}

Vec3 convection_current(const HexGeometry& geometry, double charge, const Vec3& v) {
  geometry.validate();
  return 0.25 * geometry.B.partialPivLu().solve(Vec3(charge * v));
}

FaceValues face_currents(const HexGeometry& geometry, double rho, const Vec3& v) {
  const auto faces = geometry.face_vectors();
  FaceValues j{};
  for (std::size_t mu = 0; mu < 6; ++mu) j[mu] = rho * v.dot(faces[mu]);
  return j;
}

double update_charge(double charge, double tau, const FaceValues& j) {
  double sum = 0.0;
  for (double x : j) sum += x;
  return charge + tau * sum;
}

PlasmaCell make_plasma_cell(const CanonicalCell& cell, const ParticleParams& params,
                            const ParticleState& initial) {
  params.validate();
  require_subluminal(params, initial.v);
  if (params.q0 == 0.0 && initial.Q != 0.0) {
    fail(ErrorCode::InvalidArgument, "cell charge is nonzero but the particle charge q0 is 0");
  }
  const Vec3 jc0 = convection_current(cell.geometry, initial.Q, initial.v);
  const Vec j0 = ampere_perturbation(jc0);
  Perturbation seed{[j0](long, const History&, const History&) { return j0; }, 1};
  DeflectedSystem field(build_cell_smatrix(cell), cell_link_basis(cell), cell_model_form(cell),
                        std::move(seed));
  return PlasmaCell{cell, std::move(field), initial, jc0};
}

CoupledStepResult coupled_step(PlasmaCell& pc, const ParticleParams& params, const Vec& z_in,
                               const FaceValues& j_in) {
  const double tau = pc.cell.tau;
  ParticleState& st = pc.state;

  CoupledStepResult out;
  out.z_out = pc.field.reflect(z_in);
  const Vec& node = pc.field.node_history().entry(0);

  const double q = update_charge(st.Q, tau, j_in);

  const FieldSample fields = interpret_fields(pc.cell, node);
  const Vec3 b_field = pc.cell.materials.mu * fields.H;
  const Vec3 v_next = step_velocity(params, st.v, fields.E, b_field, tau);
  const double dv = (v_next - st.v).norm();
  const double allowed = 0.1 * (params.c0 - st.v.norm());
  if (!(dv < allowed) && dv > 0.0) {
    fail(ErrorCode::TimeStepTooLarge, "velocity change " + std::to_string(dv) +
                                          " exceeds the step gate " + std::to_string(allowed));
  }

  const Vec3 jc = convection_current(pc.cell.geometry, q, v_next);
  pc.field.advance_deflection(ampere_perturbation(jc));

  const double rho = q / pc.cell.geometry.volume();
  const FaceValues through = face_currents(pc.cell.geometry, rho, v_next);
  for (std::size_t mu = 0; mu < 6; ++mu) out.J_out[mu] = -j_in[mu] + through[mu];

  st.Q = update_charge(q, tau, out.J_out);
  st.v = v_next;
  st.J_out = out.J_out;
  pc.last_jc = jc;
  return out;
}

double ampere_residual(const PlasmaCell& pc, const Vec3& jc_at_t) {
  const Vec f = eval_model_form(pc.field.model(), pc.field.node_history(),
                                pc.field.port_history());
  return (f - ampere_perturbation(jc_at_t)).cwiseAbs().maxCoeff();
}

PlasmaRunRecord run_plasma(PlasmaMesh& mesh, const Excitation& field_excitation, int steps,
                           int threads) {
  const int ncell = static_cast<int>(mesh.cells.size());
  if (mesh.field_mesh.cell_count() != ncell || mesh.face_mesh.cell_count() != ncell) {
    fail(ErrorCode::LayoutMismatch, "plasma meshes and cell list disagree");
  }
  for (int c = 0; c < ncell; ++c) {
    if (mesh.field_mesh.ports_of(c) != 6 || mesh.face_mesh.ports_of(c) != 6) {
      fail(ErrorCode::LayoutMismatch, "plasma cells have 6 field and 6 face ports");
    }
  }
  const int nf = mesh.field_mesh.port_count();
  Vec z_out = Vec::Zero(nf);
  Vec j_out(mesh.face_mesh.port_count());
  for (int c = 0; c < ncell; ++c) {
    z_out.segment<6>(mesh.field_mesh.offset(c)) = mesh.cells[static_cast<std::size_t>(c)].field.last_out();
    for (int mu = 0; mu < 6; ++mu) {
      j_out(mesh.face_mesh.offset(c) + mu) = mesh.cells[static_cast<std::size_t>(c)].state.J_out[static_cast<std::size_t>(mu)];
    }
  }
  const Vec no_face_drive = Vec::Zero(mesh.face_mesh.port_count());

  PlasmaRunRecord rec;
  rec.total_charge.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const Vec z_in = connect(mesh.field_mesh, z_out, field_excitation.values_at(k, nf));
    // inward currents change sign across a shared face: J_in(B) = -J_out(A)
    const Vec j_in = connect(mesh.face_mesh, Vec(-j_out), no_face_drive);
    parallel_for(static_cast<std::size_t>(ncell), threads, [&](std::size_t c) {
      const int ci = static_cast<int>(c);
      FaceValues jin{};
      for (int mu = 0; mu < 6; ++mu) jin[static_cast<std::size_t>(mu)] = j_in(mesh.face_mesh.offset(ci) + mu);
      const CoupledStepResult r = coupled_step(mesh.cells[c], mesh.params,
                                               z_in.segment<6>(mesh.field_mesh.offset(ci)), jin);
      z_out.segment<6>(mesh.field_mesh.offset(ci)) = r.z_out;
      for (int mu = 0; mu < 6; ++mu) j_out(mesh.face_mesh.offset(ci) + mu) = r.J_out[static_cast<std::size_t>(mu)];
    });
    double total = 0.0;
    for (const PlasmaCell& pc : mesh.cells) total += pc.state.Q;
    rec.total_charge.push_back(total);
    rec.field.emplace_back(z_out.data(), z_out.data() + z_out.size());
  }
  return rec;
}

}  // namespace tlm

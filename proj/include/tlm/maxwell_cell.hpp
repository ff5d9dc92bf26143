#pragma once

// Non-orthogonal hexahedral Maxwell cell in the canonical (u, i)
// representation.
//
// Each of the two field laws lives on a 6-dim link space z = (u, i) with the
// incident/outgoing splitting u = a + b, i = y (a - b). S-blocks are stored
// in the reduced (a, b) coordinates: K maps incident voltages a to outgoing
// voltages b. The discretized law is
//
//     i^p(t) = T+ u^n(t + tau/2) + T- u^n(t - tau/2)
//     T+/- = 1/4 det(B) B^-1 (kappa/2 +/- eps/tau) B^-T
//
// and the blocks are fixed in the symmetric gauge
//
//     K = y X - 1,  N = -X^1/2 (y + T-) X^1/2,  L = (y X)^1/2 (1 + N)^1/2,  M = L^T
//
// with X = T+^-1. For kappa = 0 this is L = (1 - N^2)^1/2.
//
// Faraday's law uses the same assembly with (mu, kappa_m, y_m) on the dual
// coordinates z_F = (h, -e).
//
// Combined cell port ordering (6 incident, 6 outgoing, 6 stub coordinates):
//   0..2  Ampere channels,  3..5  Faraday channels.
// Combined total link vector (12 entries):
//   0..2 u (electric),  3..5 i,  6..8 h (magnetic),  9..11 -e.

#include "tlm/deflection.hpp"
#include "tlm/linalg.hpp"
#include "tlm/scattering.hpp"

#include <array>
#include <utility>

namespace tlm {

struct HexGeometry {
  Mat3 B = Mat3::Identity();  // columns are the node (edge) vectors

  double volume() const { return B.determinant(); }
  /// det(B) B^-T; its columns are the face area vectors e2 x e3, e3 x e1, e1 x e2.
  Mat3 area_matrix() const;
  /// Inward face vectors ordered (x-, x+, y-, y+, z-, z+).
  std::array<Vec3, 6> face_vectors() const;
  /// Throws SingularGeometry when det(B) <= 0.
  void validate() const;
};

struct Materials {
  Mat3 eps = Mat3::Identity();
  Mat3 mu = Mat3::Identity();
  Mat3 kappa_e = Mat3::Zero();
  Mat3 kappa_m = Mat3::Zero();

  /// Throws InvalidArgument for non-symmetric or indefinite tensors.
  void validate() const;
};

/// T+ and T- of one field law.
std::pair<Mat3, Mat3> assemble_T(const HexGeometry& geometry, const Mat3& eps,
                                 const Mat3& kappa, double tau);

/// pi_in = 1/2 [[1, z],[y, 1]], pi_out = 1/2 [[1, -z],[-y, 1]] on (u, i).
ProjectionFamily assemble_projections(double y);

/// (u, i) embedding of incident/outgoing voltages for admittance y.
LinkBasis law_link_basis(double y);

/// Model form psi_0 = -[[0,1],[0,0]], phi_0 = [[T+,0],[0,0]], phi_1 = [[T-,0],[0,0]]
/// (F = phi_0 z^n+ + phi_1 z^n- - psi_0^appendix z^p).
ModelForm law_model_form(const Mat3& t_plus, const Mat3& t_minus);

/// Symmetric square root of a PSD matrix; eigenvalues down to -1e-12 are
/// clamped to 0, anything below throws NotPSD.
Mat matrix_sqrt_psd(const Mat& a);

/// N of one law without the square-root factors, for stability screening.
Mat law_stub_operator(const Mat3& t_plus, const Mat3& t_minus, double y);

/// Full S-blocks of one law. Throws InvalidAdmittance, SingularTPlus,
/// StubSqrtDomain.
SBlocks assemble_law_blocks(const Mat3& t_plus, const Mat3& t_minus, double y, double tau);

struct LawSubsystem {
  Mat3 t_plus;
  Mat3 t_minus;
  double admittance = 1.0;
  SBlocks blocks;
  LinkBasis basis;
  ModelForm model;
};

struct CanonicalCell {
  HexGeometry geometry;
  Materials materials;
  double tau = 1.0;
  double y_e = 1.0;  // Ampere characteristic admittance
  double y_m = 1.0;  // Faraday dual admittance
  LawSubsystem ampere;
  LawSubsystem faraday;
};

/// Validates the inputs and assembles both laws.
CanonicalCell make_canonical_cell(const HexGeometry& geometry, const Materials& materials,
                                  double tau, double y_e, double y_m);

SBlocks assemble_ampere_blocks(const CanonicalCell& cell);
SBlocks assemble_faraday_blocks(const CanonicalCell& cell);

/// Spectral radius of N for each law, computed without the square roots.
struct CellStability {
  double ampere_radius = 0.0;
  double faraday_radius = 0.0;
  double radius() const { return std::max(ampere_radius, faraday_radius); }
  bool stable() const { return radius() < 1.0; }
};
CellStability screen_cell(const HexGeometry& geometry, const Materials& materials, double tau,
                          double y_e, double y_m);

/// Block-diagonal direct sum of the two laws (6 in, 6 out, 6 stub).
SBlocks build_cell_smatrix(const CanonicalCell& cell);
LinkBasis cell_link_basis(const CanonicalCell& cell);
/// Block-diagonal model form of both laws (image dimension 12).
ModelForm cell_model_form(const CanonicalCell& cell);

struct FieldSample {
  Vec3 E;
  Vec3 H;
};

/// E = B^-T u, H = B^-T h from a combined 12-entry total node vector.
FieldSample interpret_fields(const CanonicalCell& cell, const Vec& z_node);
/// Inverse map: u = B^T E, h = B^T H (other entries zero).
Vec node_from_fields(const CanonicalCell& cell, const Vec3& e, const Vec3& h);

}  // namespace tlm

#include "tlm/maxwell_cell.hpp"

#include "tlm/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tlm {

namespace {

bool is_symmetric(const Mat3& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
}

// Eigen-decomposition of an SPD matrix; throws when not positive definite.
Eigen::SelfAdjointEigenSolver<Mat3> spd_eigen(const Mat3& t, ErrorCode code, const char* what) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (t + t.transpose()));
  const double lmin = es.eigenvalues()(0);
  const double lmax = es.eigenvalues()(2);
  if (!(lmin > 0.0) || lmax / lmin > 1e14) {
    fail(code, std::string(what) + " is not positive definite (min eigenvalue " +
                   std::to_string(lmin) + ")");
  }
  return es;
}

Mat3 inv_sqrt_spd(const Mat3& t) {
  auto es = spd_eigen(t, ErrorCode::SingularTPlus, "T+");
  const Vec3 d = es.eigenvalues().cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Mat block_diag(const Mat& a, const Mat& b) {
  Mat m = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  m.topLeftCorner(a.rows(), a.cols()) = a;
  m.bottomRightCorner(b.rows(), b.cols()) = b;
  return m;
}

LawSubsystem make_law(const Mat3& t_plus, const Mat3& t_minus, double y, double tau) {
  LawSubsystem law;
  law.t_plus = t_plus;
  law.t_minus = t_minus;
  law.admittance = y;
  law.blocks = assemble_law_blocks(t_plus, t_minus, y, tau);
  law.basis = law_link_basis(y);
  law.model = law_model_form(t_plus, t_minus);
  return law;
}

}  // namespace

Mat3 HexGeometry::area_matrix() const {
  validate();
  return volume() * B.inverse().transpose();
}

std::array<Vec3, 6> HexGeometry::face_vectors() const {
  const Mat3 a = area_matrix();
  return {Vec3(a.col(0)), Vec3(-a.col(0)), Vec3(a.col(1)),
          Vec3(-a.col(1)), Vec3(a.col(2)), Vec3(-a.col(2))};
}

void HexGeometry::validate() const {
  const double det = B.determinant();
  if (!std::isfinite(det) || !(det > 0.0)) {
    fail(ErrorCode::SingularGeometry,
         "node vector matrix must have positive determinant (det = " + std::to_string(det) + ")");
  }
}

void Materials::validate() const {
  const std::pair<const Mat3*, const char*> tensors[] = {
      {&eps, "eps"}, {&mu, "mu"}, {&kappa_e, "kappa_e"}, {&kappa_m, "kappa_m"}};
  for (const auto& [m, name] : tensors) {
    if (!m->allFinite() || !is_symmetric(*m)) {
      fail(ErrorCode::InvalidArgument, std::string(name) + " must be a finite symmetric tensor");
    }
  }
  for (const Mat3* m : {&eps, &mu}) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(*m);
    if (!(es.eigenvalues()(0) > 0.0)) {
      fail(ErrorCode::InvalidArgument, "eps and mu must be positive definite");
    }
  }
  for (const Mat3* m : {&kappa_e, &kappa_m}) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(*m);
    if (es.eigenvalues()(0) < -1e-12 * std::max(1.0, m->cwiseAbs().maxCoeff())) {
      fail(ErrorCode::InvalidArgument, "conductivities must be positive semidefinite");
    }
  }
}

std::pair<Mat3, Mat3> assemble_T(const HexGeometry& geometry, const Mat3& eps,
                                 const Mat3& kappa, double tau) {
  geometry.validate();
  if (!(tau > 0.0)) fail(ErrorCode::InvalidArgument, "time step must be positive");
  const Mat3 b_inv = geometry.B.inverse();
  const double scale = 0.25 * geometry.volume();
  const Mat3 plus = scale * b_inv * (0.5 * kappa + eps / tau) * b_inv.transpose();
  const Mat3 minus = scale * b_inv * (0.5 * kappa - eps / tau) * b_inv.transpose();
  // Symmetrize away the rounding of the congruence.
  return {0.5 * (plus + plus.transpose()), 0.5 * (minus + minus.transpose())};
}

LinkBasis law_link_basis(double y) {
  if (!(y > 0.0) || !std::isfinite(y)) {
    fail(ErrorCode::InvalidAdmittance, "admittance must be positive, got " + std::to_string(y));
  }
  LinkBasis b{Mat::Zero(6, 3), Mat::Zero(6, 3)};
  b.in_embed.topRows(3).setIdentity();
  b.in_embed.bottomRows(3) = y * Mat::Identity(3, 3);
  b.out_embed.topRows(3).setIdentity();
  b.out_embed.bottomRows(3) = -y * Mat::Identity(3, 3);
  return b;
}

ProjectionFamily assemble_projections(double y) {
  if (!(y > 0.0) || !std::isfinite(y)) {
    fail(ErrorCode::InvalidAdmittance, "admittance must be positive, got " + std::to_string(y));
  }
  const double z = 1.0 / y;
  const Mat i3 = Mat::Identity(3, 3);
  Mat pi_in(6, 6), pi_out(6, 6);
  pi_in << i3, z * i3, y * i3, i3;
  pi_out << i3, -z * i3, -y * i3, i3;
  pi_in *= 0.5;
  pi_out *= 0.5;
  // Relative tolerance: the off-diagonal blocks scale with y and 1/y.
  const double tol = 1e-12 * std::max({1.0, y, z});
  return make_projection_family(std::move(pi_in), std::move(pi_out), Mat::Zero(6, 6), tol);
}

ModelForm law_model_form(const Mat3& t_plus, const Mat3& t_minus) {
  ModelForm f;
  f.image_dim = 6;
  Mat phi0 = Mat::Zero(6, 6), phi1 = Mat::Zero(6, 6), psi0 = Mat::Zero(6, 6);
  phi0.topLeftCorner(3, 3) = t_plus;
  phi1.topLeftCorner(3, 3) = t_minus;
  psi0.topRightCorner(3, 3) = -Mat::Identity(3, 3);
  f.phi[0] = phi0;
  f.phi[1] = phi1;
  f.psi[0] = psi0;
  return f;
}

Mat matrix_sqrt_psd(const Mat& a) {
  if (a.rows() != a.cols()) fail(ErrorCode::NonSquare, "square root of a non-square matrix");
  if (a.size() == 0) return a;
  const double scale = std::max(1.0, max_abs(a));
  if (max_abs(Mat(a - a.transpose())) > 1e-10 * scale) {
    fail(ErrorCode::NotPSD, "matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
  Vec ev = es.eigenvalues();
  if (ev(0) < -1e-12) {
    fail(ErrorCode::NotPSD, "matrix has negative eigenvalue " + std::to_string(ev(0)));
  }
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Mat law_stub_operator(const Mat3& t_plus, const Mat3& t_minus, double y) {
  if (!(y > 0.0) || !std::isfinite(y)) {
    fail(ErrorCode::InvalidAdmittance, "admittance must be positive, got " + std::to_string(y));
  }
  const Mat3 xh = inv_sqrt_spd(t_plus);
  const Mat3 n = -xh * (y * Mat3::Identity() + t_minus) * xh;
  return Mat(0.5 * (n + n.transpose()));
}

SBlocks assemble_law_blocks(const Mat3& t_plus, const Mat3& t_minus, double y, double tau) {
  const Mat n = law_stub_operator(t_plus, t_minus, y);
  const Mat3 xh = inv_sqrt_spd(t_plus);
  const Mat3 x = xh * xh;
  Mat root;
  try {
    root = matrix_sqrt_psd(Mat::Identity(3, 3) + n);
  } catch (const Error&) {
    fail(ErrorCode::StubSqrtDomain,
         "stub operator has an eigenvalue below -1 (spectral radius " +
             std::to_string(spectral_radius(n)) + "); reduce the time step or admittance");
  }
  SBlocks b;
  b.tau = tau;
  b.K = y * x - Mat3::Identity();
  b.K = 0.5 * (b.K + b.K.transpose());
  b.N = n;
  b.L = std::sqrt(y) * xh * root;
  b.M = b.L.transpose();
  b.validate();
  return b;
}

CanonicalCell make_canonical_cell(const HexGeometry& geometry, const Materials& materials,
                                  double tau, double y_e, double y_m) {
  geometry.validate();
  materials.validate();
  CanonicalCell cell;
  cell.geometry = geometry;
  cell.materials = materials;
  cell.tau = tau;
  cell.y_e = y_e;
  cell.y_m = y_m;
  const auto [ap, am] = assemble_T(geometry, materials.eps, materials.kappa_e, tau);
  const auto [fp, fm] = assemble_T(geometry, materials.mu, materials.kappa_m, tau);
  cell.ampere = make_law(ap, am, y_e, tau);
  cell.faraday = make_law(fp, fm, y_m, tau);
  return cell;
}

SBlocks assemble_ampere_blocks(const CanonicalCell& cell) {
  const auto [p, m] = assemble_T(cell.geometry, cell.materials.eps, cell.materials.kappa_e, cell.tau);
  return assemble_law_blocks(p, m, cell.y_e, cell.tau);
}

SBlocks assemble_faraday_blocks(const CanonicalCell& cell) {
  const auto [p, m] = assemble_T(cell.geometry, cell.materials.mu, cell.materials.kappa_m, cell.tau);
  return assemble_law_blocks(p, m, cell.y_m, cell.tau);
}

CellStability screen_cell(const HexGeometry& geometry, const Materials& materials, double tau,
                          double y_e, double y_m) {
  geometry.validate();
  materials.validate();
  const auto [ap, am] = assemble_T(geometry, materials.eps, materials.kappa_e, tau);
  const auto [fp, fm] = assemble_T(geometry, materials.mu, materials.kappa_m, tau);
  CellStability s;
  s.ampere_radius = spectral_radius(law_stub_operator(ap, am, y_e));
  s.faraday_radius = spectral_radius(law_stub_operator(fp, fm, y_m));
  return s;
}

SBlocks build_cell_smatrix(const CanonicalCell& cell) {
  const SBlocks& a = cell.ampere.blocks;
  const SBlocks& f = cell.faraday.blocks;
  SBlocks b;
  b.tau = cell.tau;
  b.K = block_diag(a.K, f.K);
  b.L = block_diag(a.L, f.L);
  b.M = block_diag(a.M, f.M);
  b.N = block_diag(a.N, f.N);
  return b;
}

LinkBasis cell_link_basis(const CanonicalCell& cell) {
  return LinkBasis{block_diag(cell.ampere.basis.in_embed, cell.faraday.basis.in_embed),
                   block_diag(cell.ampere.basis.out_embed, cell.faraday.basis.out_embed)};
}

ModelForm cell_model_form(const CanonicalCell& cell) {
  ModelForm f;
  f.image_dim = cell.ampere.model.image_dim + cell.faraday.model.image_dim;
  const auto ld_a = cell.ampere.basis.link_dim(), ld_f = cell.faraday.basis.link_dim();
  for (int mu = 0; mu <= 1; ++mu) {
    f.phi[mu] = block_diag(cell.ampere.model.phi_at(mu, ld_a), cell.faraday.model.phi_at(mu, ld_f));
  }
  f.psi[0] = block_diag(cell.ampere.model.psi_at(0, ld_a), cell.faraday.model.psi_at(0, ld_f));
  return f;
}

FieldSample interpret_fields(const CanonicalCell& cell, const Vec& z_node) {
  if (z_node.size() != 12) {
    fail(ErrorCode::DimensionMismatch, "combined node vector must have 12 entries");
  }
  cell.geometry.validate();
  const auto lu = cell.geometry.B.transpose().partialPivLu();
  return FieldSample{lu.solve(Vec3(z_node.segment<3>(0))), lu.solve(Vec3(z_node.segment<3>(6)))};
}

Vec node_from_fields(const CanonicalCell& cell, const Vec3& e, const Vec3& h) {
  Vec z = Vec::Zero(12);
  z.segment<3>(0) = cell.geometry.B.transpose() * e;
  z.segment<3>(6) = cell.geometry.B.transpose() * h;
  return z;
}

}  // namespace tlm

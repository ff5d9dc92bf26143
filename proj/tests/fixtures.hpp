#pragma once

// Random instances and independent oracles shared by the unit tests and the
// acceptance runner. Nothing here calls back into the library for the
// quantity being checked.

#include "tlm/deflection.hpp"
#include "tlm/linalg.hpp"
#include "tlm/maxwell_cell.hpp"
#include "tlm/scattering.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <random>

namespace fx {

using tlm::CMat;
using tlm::cplx;
using tlm::CVec;
using tlm::Mat;
using tlm::Mat3;
using tlm::Vec;
using tlm::Vec3;

inline Mat randn(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

inline Vec randv(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  return randn(rng, n, 1, scale);
}

inline CVec randcv(std::mt19937_64& rng, Eigen::Index n) {
  return randn(rng, n, 1).cast<cplx>() + cplx(0, 1) * randn(rng, n, 1).cast<cplx>();
}

inline double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int a, int b) {
  return std::uniform_int_distribution<int>(a, b)(rng);
}

inline double rho_of(const Mat& a) {
  if (a.size() == 0) return 0.0;
  return Eigen::EigenSolver<Mat>(a).eigenvalues().cwiseAbs().maxCoeff();
}

/// Random square matrix rescaled to the requested spectral radius.
inline Mat with_radius(std::mt19937_64& rng, Eigen::Index n, double rho) {
  Mat a = randn(rng, n, n);
  const double r = rho_of(a);
  return r > 0 ? Mat(a * (rho / r)) : a;
}

inline tlm::SBlocks random_blocks(std::mt19937_64& rng, int n_in, int n_out, int n_stub,
                                  double rho, double tau = 1.0) {
  tlm::SBlocks b;
  b.K = randn(rng, n_out, n_in);
  b.L = randn(rng, n_out, n_stub);
  b.M = randn(rng, n_stub, n_in);
  b.N = with_radius(rng, n_stub, rho);
  b.tau = tau;
  return b;
}

/// Well-conditioned invertible matrix.
inline Mat random_gauge(std::mt19937_64& rng, Eigen::Index n) {
  return Mat(Mat::Identity(n, n) * 2.0 + randn(rng, n, n, 0.4));
}

/// Truncated Neumann series K + sum_{mu=1..terms} L N^{mu-1} M e^{-j mu theta}.
inline CMat series_condense(const tlm::SBlocks& b, double theta, int terms) {
  CMat s = b.K.cast<cplx>();
  Mat p = b.M;
  for (int mu = 1; mu <= terms; ++mu) {
    s += std::polar(1.0, -theta * mu) * (b.L * p).cast<cplx>();
    p = b.N * p;
  }
  return s;
}

/// Direct convolution of the impulse response: out(k+1) for a pulse at 0.
inline std::vector<Vec> impulse_by_convolution(const tlm::SBlocks& b, const Vec& z0, int steps) {
  std::vector<Vec> out;
  Mat p = b.M;
  for (int k = 0; k < steps; ++k) {
    if (k == 0) {
      out.push_back(b.K * z0);
    } else {
      out.push_back(b.L * p * z0);
      p = b.N * p;
    }
  }
  return out;
}

// A first-order model form together with the unperturbed blocks realizing it
// and a linear perturbation.
struct FirstOrderInstance {
  tlm::ModelForm model;
  tlm::LinkBasis basis;
  tlm::SBlocks blocks;
  Mat jn;  // J = jn z^n(t - tau/2) + jp z^p(t - tau)
  Mat jp;
};

inline FirstOrderInstance random_first_order(std::mt19937_64& rng, int m, bool general_basis,
                                             double rho = 0.8, double coupling = 0.05) {
  FirstOrderInstance f;
  const int d = 2 * m;
  if (general_basis) {
    Mat w = random_gauge(rng, d);
    f.basis.in_embed = w.leftCols(m);
    f.basis.out_embed = w.rightCols(m);
  } else {
    f.basis = tlm::LinkBasis::coordinate(m, m);
  }
  Mat w(d, d);
  w << f.basis.in_embed, f.basis.out_embed;
  const Mat phi0 = randn(rng, m, d);
  const Mat psi0 = randn(rng, m, d);
  const Mat lead = phi0 * f.basis.out_embed;
  const Mat target = with_radius(rng, m, rho);
  // phi1 E_out = -lead N - psi0 E_out; the E_in part is free.
  Mat coords(m, d);
  coords << randn(rng, m, m), Mat(-lead * target - psi0 * f.basis.out_embed);
  const Mat phi1 = coords * w.inverse();
  f.model.image_dim = m;
  f.model.phi[0] = phi0;
  f.model.phi[1] = phi1;
  f.model.psi[0] = psi0;
  // Independent realization: L = I, N from the target, K and M by hand.
  const Mat a_inv = lead.inverse();
  f.blocks.K = -a_inv * (phi0 + psi0) * f.basis.in_embed;
  f.blocks.N = -a_inv * (phi1 + psi0) * f.basis.out_embed;
  const Mat q = -a_inv * phi1 * f.basis.in_embed;
  f.blocks.L = Mat::Identity(m, m);
  f.blocks.M = q + f.blocks.N * f.blocks.K;
  f.blocks.tau = 1.0;
  f.jn = randn(rng, m, d, coupling);
  f.jp = randn(rng, m, d, coupling);
  return f;
}

inline tlm::Perturbation linear_perturbation(const Mat& jn, const Mat& jp) {
  return {[jn, jp](long, const tlm::History& node, const tlm::History& port) {
            return Vec(jn * node.entry(0) + jp * port.entry(0));
          },
          1};
}

/// Hand evaluation of phi_0 n(t+1/2) + phi_1 n(t-1/2) + psi_0 p(t) for a
/// first-order model.
inline Vec first_order_residual_lhs(const tlm::ModelForm& model, const Vec& n_plus,
                                    const Vec& n_minus, const Vec& p) {
  return model.phi.at(0) * n_plus + model.phi.at(1) * n_minus + model.psi.at(0) * p;
}

// Random admissible Maxwell cell.
struct CellInputs {
  tlm::HexGeometry geometry;
  tlm::Materials materials;
  double tau = 1.0;
  double y_e = 0.25;
  double y_m = 0.25;
};

inline Mat3 random_spd(std::mt19937_64& rng, double floor) {
  const Mat3 a = randn(rng, 3, 3);
  return a * a.transpose() * 0.5 + floor * Mat3::Identity();
}

inline Mat3 random_psd(std::mt19937_64& rng, double scale) {
  const Mat a = randn(rng, 3, 2);
  return scale * a * a.transpose();
}

/// T+/- = 1/4 det(B) B^-1 (kappa/2 +/- eps/tau) B^-T, computed independently.
inline std::pair<Mat3, Mat3> oracle_T(const Mat3& b, const Mat3& eps, const Mat3& kappa,
                                      double tau) {
  const Mat3 bi = b.inverse();
  const double det = b.determinant();
  const Mat3 tp = 0.25 * det * bi * (0.5 * kappa + eps / tau) * bi.transpose();
  const Mat3 tm = 0.25 * det * bi * (0.5 * kappa - eps / tau) * bi.transpose();
  return {tp, tm};
}

/// Smallest admissible-bound fraction: y = frac * lambda_min(T+ - T-).
inline double admissible_y(const Mat3& b, const Mat3& eps, const Mat3& kappa, double tau,
                           double frac) {
  const auto [tp, tm] = oracle_T(b, eps, kappa, tau);
  const Mat3 d = 0.5 * ((tp - tm) + (tp - tm).transpose());
  return frac * Eigen::SelfAdjointEigenSolver<Mat3>(d).eigenvalues().minCoeff();
}

inline CellInputs random_cell(std::mt19937_64& rng, bool lossy) {
  CellInputs c;
  Mat3 b;
  do {
    b = Mat3::Identity() + randn(rng, 3, 3, 0.25);
  } while (b.determinant() < 0.3);
  c.geometry.B = b * uniform(rng, 0.5, 2.0);
  c.materials.eps = random_spd(rng, 0.5);
  c.materials.mu = random_spd(rng, 0.5);
  c.materials.kappa_e = lossy ? random_psd(rng, 0.3) : Mat3::Zero();
  c.materials.kappa_m = lossy ? random_psd(rng, 0.3) : Mat3::Zero();
  c.tau = uniform(rng, 0.5, 2.0);
  c.y_e = admissible_y(c.geometry.B, c.materials.eps, c.materials.kappa_e, c.tau,
                       uniform(rng, 0.2, 0.8));
  c.y_m = admissible_y(c.geometry.B, c.materials.mu, c.materials.kappa_m, c.tau,
                       uniform(rng, 0.2, 0.8));
  return c;
}

inline tlm::CanonicalCell make(const CellInputs& c) {
  return tlm::make_canonical_cell(c.geometry, c.materials, c.tau, c.y_e, c.y_m);
}

/// Max residual over 'steps' of the discrete law i^p(k) = T+ u^n(k+1/2) +
/// T- u^n(k-1/2) for one law's blocks driven by a Dirac pulse on port 'port'.
/// Totals are formed by hand: u = a + b, i = y (a - b).
inline double law_impulse_residual(const tlm::SBlocks& blocks, const Mat3& tp, const Mat3& tm,
                                   double y, int port, int steps) {
  Vec a0 = Vec::Zero(3);
  a0(port) = 1.0;
  Vec stub = Vec::Zero(blocks.n_stub());
  std::vector<Vec> a, b;  // a[k], b[k]
  b.push_back(Vec::Zero(3));
  for (int k = 0; k <= steps; ++k) {
    const Vec ak = k == 0 ? a0 : Vec::Zero(3);
    a.push_back(ak);
    b.push_back(blocks.K * ak + blocks.L * stub);
    stub = blocks.N * stub + blocks.M * ak;
  }
  double worst = 0.0;
  for (int k = 0; k < steps; ++k) {
    const Vec u_plus = a[static_cast<std::size_t>(k)] + b[static_cast<std::size_t>(k + 1)];
    const Vec u_minus = k == 0 ? Vec(Vec::Zero(3))
                               : Vec(a[static_cast<std::size_t>(k - 1)] + b[static_cast<std::size_t>(k)]);
    const Vec i_port = y * (a[static_cast<std::size_t>(k)] - b[static_cast<std::size_t>(k)]);
    const Vec r = i_port - tp * u_plus - tm * u_minus;
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace fx

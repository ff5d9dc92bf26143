#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <functional>

namespace tlm {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// Largest eigenvalue modulus. Empty matrices have radius 0.
double spectral_radius(const Mat& a);
double spectral_radius(const CMat& a);

/// Largest singular value.
double induced_two_norm(const Mat& a);

/// Left inverse of a matrix with full column rank, (A^T A)^{-1} A^T computed
/// through a rank-revealing QR. Returns false when A is rank deficient.
bool left_inverse(const Mat& a, Mat& out, double rel_tol = 1e-12);

/// Elementwise max |a_ij|; 0 for empty matrices.
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& a) {
  return a.size() == 0 ? 0.0 : static_cast<double>(a.cwiseAbs().maxCoeff());
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once, so results written per index are independent of
/// the worker count.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace tlm

#include "tlm/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tlm {

double spectral_radius(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_radius(const CMat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::ComplexEigenSolver<CMat> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double induced_two_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

bool left_inverse(const Mat& a, Mat& out, double rel_tol) {
  if (a.cols() == 0) {
    out = Mat::Zero(0, a.rows());
    return true;
  }
  Eigen::ColPivHouseholderQR<Mat> qr(a);
  qr.setThreshold(rel_tol);
  if (qr.rank() < a.cols()) return false;
  // Least-squares solve against the identity gives the Moore-Penrose left
  // inverse for a full-column-rank matrix.
  const Mat at = a.transpose();
  out = (at * a).ldlt().solve(at);
  return true;
}


void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  // The lowest failing index wins so the reported error does not depend on
  // scheduling.
  std::exception_ptr first_error;
  std::size_t first_index = n;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (i < first_index) {
            first_index = i;
            first_error = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace tlm

#include "tlm/mesh.hpp"

#include "tlm/error.hpp"

#include <string>
#include <type_traits>

namespace tlm {

Mesh::Mesh(std::vector<int> ports_per_cell, double tau)
    : ports_(std::move(ports_per_cell)), tau_(tau) {
  offsets_.reserve(ports_.size());
  for (int n : ports_) {
    if (n < 0) fail(ErrorCode::InvalidArgument, "negative port count");
    offsets_.push_back(total_);
    total_ += n;
  }
  partner_.assign(static_cast<std::size_t>(total_), -1);
}

int Mesh::global_index(int cell, int local) const {
  if (cell < 0 || cell >= cell_count() || local < 0 || local >= ports_of(cell)) {
    fail(ErrorCode::LayoutMismatch,
         "no port " + std::to_string(local) + " on cell " + std::to_string(cell));
  }
  return offset(cell) + local;
}

void Mesh::link(int a, int b) {
  if (a < 0 || a >= total_ || b < 0 || b >= total_) {
    fail(ErrorCode::LayoutMismatch, "link references a port outside the mesh");
  }
  // Recorded verbatim; validate_mesh reports self-pairing and conflicts.
  partner_[static_cast<std::size_t>(a)] = b;
  partner_[static_cast<std::size_t>(b)] = a;
}

void Mesh::set_boundary(int port, cplx reflection) {
  if (port < 0 || port >= total_) {
    fail(ErrorCode::LayoutMismatch, "boundary references a port outside the mesh");
  }
  boundary_[port] = reflection;
}

bool Mesh::all_boundaries_real() const {
  for (const auto& [p, r] : boundary_) {
    if (r.imag() != 0.0) return false;
  }
  return true;
}

std::vector<std::string> validate_mesh(const Mesh& mesh) {
  std::vector<std::string> v;
  if (!(mesh.tau() > 0.0)) v.push_back("time step must be positive");
  const auto& bnd = mesh.boundaries();
  for (int p = 0; p < mesh.port_count(); ++p) {
    const int q = mesh.partner(p);
    const bool is_boundary = bnd.count(p) > 0;
    if (q == p) {
      v.push_back("self-paired port " + std::to_string(p));
    } else if (q >= 0 && mesh.partner(q) != p) {
      v.push_back("non-involutive pairing at port " + std::to_string(p));
    }
    if (q >= 0 && is_boundary) {
      v.push_back("port " + std::to_string(p) + " is both linked and a boundary");
    }
    if (q < 0 && !is_boundary) v.push_back("dangling port " + std::to_string(p));
  }
  return v;
}

namespace {

template <typename V>
V connect_impl(const Mesh& mesh, const V& z_out, const V& z_exc) {
  const int n = mesh.port_count();
  if (z_out.size() != n || z_exc.size() != n) {
    fail(ErrorCode::LayoutMismatch, "port vectors have length " + std::to_string(z_out.size()) +
                                        "/" + std::to_string(z_exc.size()) + ", mesh has " +
                                        std::to_string(n) + " ports");
  }
  V z_in = V::Zero(n);
  for (int p = 0; p < n; ++p) {
    const int q = mesh.partner(p);
    if (q >= 0) z_in(p) = z_out(q);
  }
  for (const auto& [p, rho] : mesh.boundaries()) {
    if constexpr (std::is_same_v<typename V::Scalar, double>) {
      z_in(p) = rho.real() * z_out(p) + z_exc(p);
    } else {
      z_in(p) = rho * z_out(p) + z_exc(p);
    }
  }
  return z_in;
}

}  // namespace

Vec connect(const Mesh& mesh, const Vec& z_out, const Vec& z_exc) {
  if (!mesh.all_boundaries_real()) {
    fail(ErrorCode::LayoutMismatch, "complex boundary reflection in a real-valued connection");
  }
  return connect_impl(mesh, z_out, z_exc);
}

CVec connect(const Mesh& mesh, const CVec& z_out, const CVec& z_exc) {
  return connect_impl(mesh, z_out, z_exc);
}

CMat connection_matrix(const Mesh& mesh) {
  const int n = mesh.port_count();
  CMat c = CMat::Zero(n, n);
  for (int p = 0; p < n; ++p) {
    const int q = mesh.partner(p);
    if (q >= 0) c(p, q) = 1.0;
  }
  for (const auto& [p, rho] : mesh.boundaries()) c(p, p) = rho;
  return c;
}

Vec Excitation::values_at(long step, int port_count) const {
  Vec v = Vec::Zero(port_count);
  for (const auto& [p, signal] : signals) {
    if (p < 0 || p >= port_count) fail(ErrorCode::LayoutMismatch, "excitation port outside mesh");
    v(p) += signal(step);
  }
  return v;
}

CVec Excitation::phasor_vector(int port_count) const {
  CVec v = CVec::Zero(port_count);
  for (const auto& [p, a] : phasors) {
    if (p < 0 || p >= port_count) fail(ErrorCode::LayoutMismatch, "excitation port outside mesh");
    v(p) += a;
  }
  return v;
}

std::vector<std::string> Excitation::check(const Mesh& mesh) const {
  std::vector<std::string> v;
  auto check_port = [&](int p) {
    if (p < 0 || p >= mesh.port_count()) {
      v.push_back("excitation references missing port " + std::to_string(p));
    } else if (mesh.boundaries().count(p) == 0) {
      v.push_back("excitation on non-boundary port " + std::to_string(p));
    }
  };
  for (const auto& [p, s] : signals) check_port(p);
  for (const auto& [p, a] : phasors) check_port(p);
  return v;
}

}  // namespace tlm

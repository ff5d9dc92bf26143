#pragma once

// Global topology: the connection map between cell ports.
//
// Ports are indexed globally by flattening (cell, local port)
// lexicographically. Every port is either paired with exactly one partner
// port (a link) or is a boundary port with a scalar reflection coefficient.

#include "tlm/linalg.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace tlm {

class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<int> ports_per_cell, double tau);

  /// Pairs two global ports.
  void link(int a, int b);
  void set_boundary(int port, cplx reflection);

  int cell_count() const { return static_cast<int>(ports_.size()); }
  int port_count() const { return total_; }
  int ports_of(int cell) const { return ports_.at(static_cast<std::size_t>(cell)); }
  int offset(int cell) const { return offsets_.at(static_cast<std::size_t>(cell)); }
  int global_index(int cell, int local) const;
  double tau() const { return tau_; }

  /// -1 when the port is not linked.
  int partner(int port) const { return partner_.at(static_cast<std::size_t>(port)); }
  const std::vector<int>& partners() const { return partner_; }
  const std::map<int, cplx>& boundaries() const { return boundary_; }

  bool all_boundaries_real() const;

 private:
  std::vector<int> ports_;
  std::vector<int> offsets_;
  std::vector<int> partner_;
  std::map<int, cplx> boundary_;
  int total_ = 0;
  double tau_ = 1.0;
};

/// Mesh violations, empty when the mesh is valid.
std::vector<std::string> validate_mesh(const Mesh& mesh);

/// z_in = C(z_out, z_exc): partner's outgoing value on linked ports,
/// rho_b z_out + z_exc on boundary ports. Throws LayoutMismatch.
Vec connect(const Mesh& mesh, const Vec& z_out, const Vec& z_exc);
CVec connect(const Mesh& mesh, const CVec& z_out, const CVec& z_exc);

/// Dense matrix of the linear part of C (z_exc = 0).
CMat connection_matrix(const Mesh& mesh);

/// Time-step drive signal for one port.
using DriveSignal = std::function<double(long)>;

/// Excitation on boundary ports: time-domain signals and/or steady-state
/// phasors.
struct Excitation {
  std::map<int, DriveSignal> signals;
  std::map<int, cplx> phasors;

  Vec values_at(long step, int port_count) const;
  CVec phasor_vector(int port_count) const;

  /// Violations for ports that do not exist or are not boundary ports.
  std::vector<std::string> check(const Mesh& mesh) const;
};

}  // namespace tlm

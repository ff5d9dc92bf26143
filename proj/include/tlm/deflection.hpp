#pragma once

// Model equations and the deflection recursion.
//
// A model equation relates histories of total node and port vectors,
//
//     F[z+^n][z^p] = sum_mu phi_mu z^n(t + tau/2 - mu tau) + psi_mu z^p(t - mu tau),
//
// and a linear TLM cell "generates solutions" of F = 0 when every incident
// sequence produces totals satisfying it. A DeflectedSystem adds a causal
// deflection D to the outgoing vectors of such a cell so that the totals
// satisfy the perturbed equation F = J instead:
//
//     phi_0 D_t = J_t - sum_{mu >= 1} (phi_mu + psi_{mu-1}) D_{t - mu tau}
//
// with phi_0 restricted to the outgoing subspace inverted on its range.

#include "tlm/linalg.hpp"
#include "tlm/scattering.hpp"

#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace tlm {

/// Fixed-depth history of vectors spaced by one time step.
/// entry(0) is the newest; entries older than the depth (or than the process
/// start) read as zero.
class History {
 public:
  History() = default;
  History(int depth, Eigen::Index dim);

  void push(const Vec& v);
  const Vec& entry(int mu) const;

  int depth() const { return static_cast<int>(slots_.size()); }
  Eigen::Index dim() const { return zero_.size(); }
  long pushes() const { return pushes_; }

 private:
  std::vector<Vec> slots_;
  Vec zero_;
  int head_ = 0;
  long pushes_ = 0;
};

struct ModelForm {
  std::map<int, Mat> phi;  // node coefficients, lag mu
  std::map<int, Mat> psi;  // port coefficients, lag mu
  Eigen::Index image_dim = 0;

  int max_phi_lag() const { return phi.empty() ? -1 : phi.rbegin()->first; }
  int max_psi_lag() const { return psi.empty() ? -1 : psi.rbegin()->first; }

  /// Zero matrix of the right shape when the lag is absent.
  Mat phi_at(int mu, Eigen::Index link_dim) const;
  Mat psi_at(int mu, Eigen::Index link_dim) const;

  /// Throws DimensionMismatch if some coefficient does not map link_dim
  /// vectors into the image space.
  void validate(Eigen::Index link_dim) const;
};

/// node_plus.entry(mu) = z^n(t + tau/2 - mu tau), port.entry(mu) = z^p(t - mu tau).
Vec eval_model_form(const ModelForm& model, const History& node_plus, const History& port);

/// Blocks of the linear first-order cell solving
///   phi_0 z^n(t+tau/2) + phi_1 z^n(t-tau/2) + psi_0 z^p(t) = 0
/// in the realization L = Id, M = Q + N K (Q the coefficient of the
/// twice-delayed input). Throws NonInvertibleLeadCoefficient if phi_0 is not
/// injective on the outgoing subspace.
SBlocks first_order_blocks(const ModelForm& model, const LinkBasis& basis, double tau);

/// Perturbation J_t. Arguments: step index t, node history with entry(0) =
/// z^n(t - tau/2), port history with entry(0) = z^p(t - tau). Must return a
/// vector in the model's image space.
using PerturbationFn = std::function<Vec(long, const History&, const History&)>;

struct Perturbation {
  PerturbationFn evaluate;
  int lookback = 1;  // history depth the function reads

  static Perturbation none(Eigen::Index image_dim);
};

/// Linear cell plus deflection state. Single-owner mutable state; distinct
/// systems may be stepped concurrently.
class DeflectedSystem {
 public:
  DeflectedSystem(SBlocks base, LinkBasis basis, ModelForm model, Perturbation perturbation);

  /// Step (1) of the update order: z_out(t+tau) = R[z_in] + D(t). Also forms
  /// and records z^n(t + tau/2) and z^p(t).
  Vec reflect(const Vec& z_in);

  /// Step (4): D(t+tau) from the supplied J_{t+tau}.
  void advance_deflection(const Vec& j_next);

  /// Evaluates J_{t+tau} on the recorded histories (after reflect).
  Vec evaluate_perturbation() const;

  const SBlocks& base() const { return base_; }
  const LinkBasis& basis() const { return basis_; }
  const ModelForm& model() const { return model_; }
  const Mat& lead_inverse() const { return lead_inverse_; }

  const Vec& deflection() const { return d_history_.entry(0); }
  const History& deflection_history() const { return d_history_; }
  const Vec& current_j() const { return current_j_; }
  const Vec& interaction() const { return interaction_; }
  const Vec& stub() const { return stub_; }
  const Vec& last_out() const { return last_out_; }
  const History& node_history() const { return node_; }
  const History& port_history() const { return port_; }
  long time_index() const { return t_; }

  /// Embeds an image-space vector supported on the given rows.
  Eigen::Index image_dim() const { return model_.image_dim; }

 private:
  SBlocks base_;
  LinkBasis basis_;
  ModelForm model_;
  Perturbation perturbation_;
  Mat lead_inverse_;                  // (phi_0 out_embed)^+, n_out x image_dim
  std::vector<Mat> deflection_coeff_;  // index mu-1: phi_mu + psi_{mu-1} applied to out_embed
  Vec stub_;
  Vec last_out_;  // z_out(t), outgoing vector emitted by the previous step
  History d_history_;
  History node_;
  History port_;
  Vec current_j_;    // J_t used for D_t
  Vec interaction_;  // I_t = (phi_0 pi_out)^+ J_t
  long t_ = 0;
  bool active_ = false;  // any nonzero deflection so far
};

/// Full update of one step in the order reflect, record totals, evaluate J,
/// advance D. Returns z_out(t + tau).
Vec deflected_step(DeflectedSystem& system, const Vec& z_in);

/// D_t for the current histories (read-only recomputation of the recursion
/// from the stored D history and the given J_t).
Vec deflection_recursion(const DeflectedSystem& system, const Vec& j_t);

struct DeflectionCheck {
  double max_residual = 0.0;
  bool passed = true;
  std::vector<double> residuals;
};

/// Runs a copy of the system on the incident sequence excitation(t) for the
/// given number of steps and reports max_t |F[z+^n][z^p] - J_t|.
DeflectionCheck verify_deflection(const DeflectedSystem& system,
                                  const std::function<Vec(long)>& excitation, int steps,
                                  double tol);

}  // namespace tlm

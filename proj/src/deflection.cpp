#include "tlm/deflection.hpp"

#include "tlm/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tlm {

History::History(int depth, Eigen::Index dim)
    : slots_(static_cast<std::size_t>(std::max(depth, 1)), Vec::Zero(dim)),
      zero_(Vec::Zero(dim)) {}

void History::push(const Vec& v) {
  if (v.size() != dim()) {
    fail(ErrorCode::DimensionMismatch, "history entry has length " + std::to_string(v.size()) +
                                           ", expected " + std::to_string(dim()));
  }
  head_ = (head_ + depth() - 1) % depth();
  slots_[static_cast<std::size_t>(head_)] = v;
  ++pushes_;
}

const Vec& History::entry(int mu) const {
  if (mu < 0) fail(ErrorCode::InvalidArgument, "history read from the future");
  if (mu >= depth() || mu >= pushes_) return zero_;
  return slots_[static_cast<std::size_t>((head_ + mu) % depth())];
}

Mat ModelForm::phi_at(int mu, Eigen::Index link_dim) const {
  auto it = phi.find(mu);
  return it == phi.end() ? Mat::Zero(image_dim, link_dim) : it->second;
}

Mat ModelForm::psi_at(int mu, Eigen::Index link_dim) const {
  auto it = psi.find(mu);
  return it == psi.end() ? Mat::Zero(image_dim, link_dim) : it->second;
}

void ModelForm::validate(Eigen::Index link_dim) const {
  for (const auto* family : {&phi, &psi}) {
    for (const auto& [mu, m] : *family) {
      if (mu < 0) fail(ErrorCode::InvalidArgument, "model form lag must be >= 0");
      if (m.rows() != image_dim || m.cols() != link_dim) {
        fail(ErrorCode::DimensionMismatch,
             "model coefficient at lag " + std::to_string(mu) + " is " +
                 std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                 std::to_string(image_dim) + "x" + std::to_string(link_dim));
      }
    }
  }
}

Vec eval_model_form(const ModelForm& model, const History& node_plus, const History& port) {
  Vec f = Vec::Zero(model.image_dim);
  for (const auto& [mu, m] : model.phi) {
    if (mu >= node_plus.depth()) {
      fail(ErrorCode::DimensionMismatch, "node history too shallow for the model form");
    }
    if (m.cols() != node_plus.dim()) fail(ErrorCode::DimensionMismatch, "node history dimension");
    f += m * node_plus.entry(mu);
  }
  for (const auto& [mu, m] : model.psi) {
    if (mu >= port.depth()) {
      fail(ErrorCode::DimensionMismatch, "port history too shallow for the model form");
    }
    if (m.cols() != port.dim()) fail(ErrorCode::DimensionMismatch, "port history dimension");
    f += m * port.entry(mu);
  }
  return f;
}

namespace {

Mat lead_inverse_of(const ModelForm& model, const LinkBasis& basis) {
  const Mat lead = model.phi_at(0, basis.link_dim()) * basis.out_embed;
  Mat inv;
  if (!left_inverse(lead, inv)) {
    fail(ErrorCode::NonInvertibleLeadCoefficient,
         "phi_0 is not injective on the outgoing subspace");
  }
  return inv;
}

}  // namespace

SBlocks first_order_blocks(const ModelForm& model, const LinkBasis& basis, double tau) {
  const auto d = basis.link_dim();
  model.validate(d);
  if (model.max_phi_lag() > 1 || model.max_psi_lag() > 0) {
    fail(ErrorCode::InvalidArgument, "first_order_blocks needs phi lags <= 1 and psi lag 0");
  }
  const Mat a_inv = lead_inverse_of(model, basis);
  const Mat phi0 = model.phi_at(0, d), phi1 = model.phi_at(1, d), psi0 = model.psi_at(0, d);
  SBlocks b;
  b.tau = tau;
  b.K = -a_inv * (phi0 + psi0) * basis.in_embed;
  b.N = -a_inv * (phi1 + psi0) * basis.out_embed;
  const Mat q = -a_inv * phi1 * basis.in_embed;
  b.L = Mat::Identity(basis.n_out(), basis.n_out());
  b.M = q + b.N * b.K;
  return b;
}

Perturbation Perturbation::none(Eigen::Index image_dim) {
  return Perturbation{[image_dim](long, const History&, const History&) {
                        return Vec(Vec::Zero(image_dim));
                      },
                      1};
}

DeflectedSystem::DeflectedSystem(SBlocks base, LinkBasis basis, ModelForm model,
                                 Perturbation perturbation)
    : base_(std::move(base)),
      basis_(std::move(basis)),
      model_(std::move(model)),
      perturbation_(std::move(perturbation)) {
  base_.validate();
  if (basis_.n_in() != base_.n_in() || basis_.n_out() != base_.n_out() ||
      basis_.out_embed.rows() != basis_.link_dim()) {
    fail(ErrorCode::DimensionMismatch, "link basis does not match the S-block dimensions");
  }
  const auto d = basis_.link_dim();
  model_.validate(d);
  lead_inverse_ = lead_inverse_of(model_, basis_);

  const int max_lag = std::max({model_.max_phi_lag(), model_.max_psi_lag() + 1, 1});
  for (int mu = 1; mu <= max_lag; ++mu) {
    deflection_coeff_.push_back((model_.phi_at(mu, d) + model_.psi_at(mu - 1, d)) *
                                basis_.out_embed);
  }
  const int look = std::max(perturbation_.lookback, 1);
  d_history_ = History(max_lag, base_.n_out());
  node_ = History(std::max(model_.max_phi_lag() + 1, look), d);
  port_ = History(std::max(model_.max_psi_lag() + 1, look), d);
  stub_ = Vec::Zero(base_.n_stub());
  last_out_ = Vec::Zero(base_.n_out());

  // D_0 from J_0 on the empty (all-zero) pre-start histories.
  Vec j0 = perturbation_.evaluate ? perturbation_.evaluate(0, node_, port_)
                                  : Vec(Vec::Zero(model_.image_dim));
  if (j0.size() != model_.image_dim) {
    fail(ErrorCode::DimensionMismatch, "perturbation output outside the model image space");
  }
  current_j_ = j0;
  interaction_ = lead_inverse_ * j0;
  active_ = !interaction_.isZero(0.0);
  d_history_.push(interaction_);
}

Vec DeflectedSystem::reflect(const Vec& z_in) {
  ScatterResult r = scatter_step(base_, z_in, stub_);
  // Adding an all-zero deflection is skipped so an unperturbed branch stays
  // bit-identical to the base cell (x + 0.0 would turn -0.0 into +0.0).
  if (active_) r.z_out += d_history_.entry(0);
  port_.push(basis_.total(z_in, last_out_));
  node_.push(basis_.total(z_in, r.z_out));
  stub_ = std::move(r.stub);
  last_out_ = r.z_out;
  return r.z_out;
}

Vec DeflectedSystem::evaluate_perturbation() const {
  if (!perturbation_.evaluate) return Vec::Zero(model_.image_dim);
  Vec j = perturbation_.evaluate(t_ + 1, node_, port_);
  if (j.size() != model_.image_dim) {
    fail(ErrorCode::DimensionMismatch, "perturbation output outside the model image space");
  }
  return j;
}

Vec deflection_recursion(const DeflectedSystem& system, const Vec& j_t) {
  if (j_t.size() != system.image_dim()) {
    fail(ErrorCode::DimensionMismatch, "J has the wrong image dimension");
  }
  Vec rhs = j_t;
  const auto& hist = system.deflection_history();
  const Eigen::Index d = system.basis().link_dim();
  const ModelForm& model = system.model();
  const int max_lag = hist.depth();
  for (int mu = 1; mu <= max_lag; ++mu) {
    const Mat coeff = (model.phi_at(mu, d) + model.psi_at(mu - 1, d)) * system.basis().out_embed;
    rhs -= coeff * hist.entry(mu - 1);
  }
  return system.lead_inverse() * rhs;
}

void DeflectedSystem::advance_deflection(const Vec& j_next) {
  if (j_next.size() != model_.image_dim) {
    fail(ErrorCode::DimensionMismatch, "J has the wrong image dimension");
  }
  interaction_ = lead_inverse_ * j_next;
  Vec d = interaction_;
  for (std::size_t i = 0; i < deflection_coeff_.size(); ++i) {
    d.noalias() -= lead_inverse_ * (deflection_coeff_[i] * d_history_.entry(static_cast<int>(i)));
  }
  if (!active_ && !d.isZero(0.0)) active_ = true;
  d_history_.push(d);
  current_j_ = j_next;
  ++t_;
}

Vec deflected_step(DeflectedSystem& system, const Vec& z_in) {
  Vec out = system.reflect(z_in);
  system.advance_deflection(system.evaluate_perturbation());
  return out;
}

DeflectionCheck verify_deflection(const DeflectedSystem& system,
                                  const std::function<Vec(long)>& excitation, int steps,
                                  double tol) {
  DeflectedSystem sys = system;
  DeflectionCheck check;
  check.residuals.reserve(static_cast<std::size_t>(std::max(steps, 0)));
  for (int k = 0; k < steps; ++k) {
    const Vec j_t = sys.current_j();
    sys.reflect(excitation(sys.time_index()));
    const Vec f = eval_model_form(sys.model(), sys.node_history(), sys.port_history());
    const double r = (f - j_t).cwiseAbs().maxCoeff();
    check.residuals.push_back(r);
    check.max_residual = std::max(check.max_residual, r);
    sys.advance_deflection(sys.evaluate_perturbation());
  }
  check.passed = check.max_residual < tol;
  return check;
}

}  // namespace tlm

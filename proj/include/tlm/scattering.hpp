#pragma once

// State-space algebra of a single TLM cell and its K/L/M/N scattering
// representation.
//
// A cell state splits into incident link coordinates, outgoing link
// coordinates and stub (gauge) coordinates. The reflection map of a linear
// cell is stored in rolling form
//
//     z_out(t + tau) = K z_in(t) + L s(t)
//     s(t + tau)     = N s(t)    + M z_in(t)
//
// which, started from s = 0, reproduces the geometric convolution
// z_out = K z_in + L sum_mu N^mu M z_in(t - (mu + 1) tau).

#include "tlm/linalg.hpp"

#include <vector>

namespace tlm {

enum class ScalarField { Real, Complex };

struct StateSpace {
  int n_in = 0;
  int n_out = 0;
  int n_stub = 0;
  ScalarField field = ScalarField::Real;

  int dim() const { return n_in + n_out + n_stub; }
};

/// Three complementary projections on a cell state space.
struct ProjectionFamily {
  Mat pi_in;
  Mat pi_out;
  Mat pi_s;

  Eigen::Index dim() const { return pi_in.rows(); }
  Mat pi_link() const { return pi_in + pi_out; }
};

inline constexpr double kStructuralTol = 1e-12;

/// Coordinate-aligned family: incident coordinates first, then outgoing, then
/// stub.
ProjectionFamily make_projection_family(const StateSpace& space);

/// Validates arbitrary operators against the projection algebra (idempotent,
/// mutually annihilating, summing to identity). Throws NotIdempotent or
/// NotComplementary.
ProjectionFamily make_projection_family(Mat pi_in, Mat pi_out, Mat pi_s,
                                        double tol = kStructuralTol);

/// Embedding of incident/outgoing coordinates into total link vectors.
///
/// A total link vector is z = in_embed * a + out_embed * b where a holds the
/// incident and b the outgoing coordinates. The coordinate basis is the
/// identity split; the Maxwell cell uses (u, i) = (a + b, y (a - b)).
struct LinkBasis {
  Mat in_embed;   // link_dim x n_in
  Mat out_embed;  // link_dim x n_out

  static LinkBasis coordinate(int n_in, int n_out);

  Eigen::Index link_dim() const { return in_embed.rows(); }
  Eigen::Index n_in() const { return in_embed.cols(); }
  Eigen::Index n_out() const { return out_embed.cols(); }

  Vec total(const Vec& incident, const Vec& outgoing) const {
    return in_embed * incident + out_embed * outgoing;
  }

  /// Projections pi_in, pi_out on the link space (pi_s = 0). Throws
  /// DimensionMismatch if the two embeddings do not span the link space.
  ProjectionFamily projections() const;
};

struct SBlocks {
  Mat K;  // n_out x n_in
  Mat L;  // n_out x n_stub
  Mat M;  // n_stub x n_in
  Mat N;  // n_stub x n_stub
  double tau = 1.0;

  Eigen::Index n_in() const { return K.cols(); }
  Eigen::Index n_out() const { return K.rows(); }
  Eigen::Index n_stub() const { return N.rows(); }
  StateSpace space() const;

  /// Throws DimensionMismatch unless all block shapes agree.
  void validate() const;
};

struct ScatterResult {
  Vec z_out;
  Vec stub;
};

ScatterResult scatter_step(const SBlocks& blocks, const Vec& z_in,
                           const Vec& stub);

/// Outgoing vectors for a Dirac pulse z0 at step 0:
/// (K z0, L M z0, L N M z0, ..., L N^{steps-2} M z0).
std::vector<Vec> impulse_response(const SBlocks& blocks, const Vec& z0,
                                  int steps);

/// L' = L G^-1, M' = G M, N' = G N G^-1. Throws SingularGauge.
SBlocks gauge_transform(const SBlocks& blocks, const Mat& gauge);

enum class NormKind { Sup, SpectralRadius };

/// Sup is the induced 2-norm; SpectralRadius needs a square operator
/// (NonSquare otherwise).
double operator_norm(const Mat& a, NormKind kind);

struct StabilityReport {
  bool stable = true;
  double margin = 1.0;  // 1 - norm
  double norm = 0.0;
};

StabilityReport check_stability(const SBlocks& blocks,
                                NormKind kind = NormKind::SpectralRadius);

/// S~ = K + L (e^{j theta} Id - N)^{-1} M with theta = omega tau.
CMat freq_condense(const SBlocks& blocks, double theta);

/// Stub contribution S_g~ = L (e^{j theta} Id - N)^{-1} M.
CMat gauge_contribution(const SBlocks& blocks, double theta);

struct Stage {
  Mat L;
  Mat M;
  Mat N;
};

/// Stage kappa (1-based) contributes L_k sum_mu N_k^mu M_k z_in(t-(mu+k)tau).
struct MultiStageSBlocks {
  Mat K;
  std::vector<Stage> stages;
  double tau = 1.0;

  static MultiStageSBlocks from(const SBlocks& blocks);
  void validate() const;
};

StabilityReport check_stability(const MultiStageSBlocks& blocks,
                                NormKind kind = NormKind::SpectralRadius);

/// Per-stage rolling state: the stub vector and the last kappa incident
/// vectors (newest first).
struct StageState {
  Vec stub;
  std::vector<Vec> queue;
};

std::vector<StageState> zero_stage_states(const MultiStageSBlocks& blocks);

struct MultiStageResult {
  Vec z_out;
  std::vector<StageState> states;
};

MultiStageResult multi_stage_step(const MultiStageSBlocks& blocks,
                                  const Vec& z_in,
                                  const std::vector<StageState>& states);

}  // namespace tlm

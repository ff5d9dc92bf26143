#include "tlm/scattering.hpp"

#include "tlm/error.hpp"

#include <cmath>
#include <string>

namespace tlm {

namespace {

std::string shape(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_len(const Vec& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    fail(ErrorCode::DimensionMismatch, std::string(what) + " has length " +
                                           std::to_string(v.size()) + ", expected " +
                                           std::to_string(n));
  }
}

CMat resolvent(const Mat& n, double theta) {
  const auto k = n.rows();
  CMat a = std::polar(1.0, theta) * CMat::Identity(k, k) - n.cast<cplx>();
  Eigen::FullPivLU<CMat> lu(a);
  // e^{j theta} in the spectrum of N shows up as a vanishing pivot.
  const double scale = std::max(1.0, max_abs(n));
  if (k > 0 && lu.rank() < k) {
    fail(ErrorCode::ResolventSingular,
         "e^{j theta} lies on the spectrum of N (theta = " + std::to_string(theta) + ")");
  }
  CMat inv = lu.inverse();
  if (!inv.allFinite() || max_abs(inv) * 1e-13 > scale) {
    fail(ErrorCode::ResolventSingular,
         "resolvent of N numerically singular at theta = " + std::to_string(theta));
  }
  return inv;
}

}  // namespace

ProjectionFamily make_projection_family(const StateSpace& space) {
  if (space.n_in < 0 || space.n_out < 0 || space.n_stub < 0) {
    fail(ErrorCode::InvalidArgument, "negative state-space dimension");
  }
  const int d = space.dim();
  ProjectionFamily p{Mat::Zero(d, d), Mat::Zero(d, d), Mat::Zero(d, d)};
  for (int i = 0; i < space.n_in; ++i) p.pi_in(i, i) = 1.0;
  for (int i = 0; i < space.n_out; ++i) p.pi_out(space.n_in + i, space.n_in + i) = 1.0;
  for (int i = 0; i < space.n_stub; ++i) {
    const int j = space.n_in + space.n_out + i;
    p.pi_s(j, j) = 1.0;
  }
  return p;
}

ProjectionFamily make_projection_family(Mat pi_in, Mat pi_out, Mat pi_s, double tol) {
  const auto d = pi_in.rows();
  for (const Mat* m : {&pi_in, &pi_out, &pi_s}) {
    if (m->rows() != d || m->cols() != d) {
      fail(ErrorCode::DimensionMismatch, "projection operators must share one square shape");
    }
  }
  const char* names[] = {"pi_in", "pi_out", "pi_s"};
  const Mat* ops[] = {&pi_in, &pi_out, &pi_s};
  for (int i = 0; i < 3; ++i) {
    const double err = max_abs(Mat(*ops[i] * *ops[i] - *ops[i]));
    if (err > tol) {
      fail(ErrorCode::NotIdempotent,
           std::string(names[i]) + " is not idempotent (|P^2 - P| = " + std::to_string(err) + ")");
    }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      const double err = max_abs(Mat(*ops[i] * *ops[j]));
      if (err > tol) {
        fail(ErrorCode::NotComplementary,
             std::string(names[i]) + " * " + names[j] + " does not vanish");
      }
    }
  }
  const double err = max_abs(Mat(pi_in + pi_out + pi_s - Mat::Identity(d, d)));
  if (err > tol) {
    fail(ErrorCode::NotComplementary, "projections do not sum to the identity");
  }
  return ProjectionFamily{std::move(pi_in), std::move(pi_out), std::move(pi_s)};
}

LinkBasis LinkBasis::coordinate(int n_in, int n_out) {
  const int d = n_in + n_out;
  LinkBasis b{Mat::Zero(d, n_in), Mat::Zero(d, n_out)};
  b.in_embed.topRows(n_in).setIdentity();
  b.out_embed.bottomRows(n_out).setIdentity();
  return b;
}

ProjectionFamily LinkBasis::projections() const {
  const auto d = link_dim();
  if (n_in() + n_out() != d || out_embed.rows() != d) {
    fail(ErrorCode::DimensionMismatch, "link basis embeddings must span the link space");
  }
  Mat basis(d, d);
  basis << in_embed, out_embed;
  Eigen::FullPivLU<Mat> lu(basis);
  if (!lu.isInvertible()) {
    fail(ErrorCode::DimensionMismatch, "link basis embeddings are linearly dependent");
  }
  const Mat coords = lu.inverse();
  Mat pi_in = in_embed * coords.topRows(n_in());
  Mat pi_out = out_embed * coords.bottomRows(n_out());
  return make_projection_family(std::move(pi_in), std::move(pi_out), Mat::Zero(d, d), 1e-10);
}

StateSpace SBlocks::space() const {
  return StateSpace{static_cast<int>(n_in()), static_cast<int>(n_out()),
                    static_cast<int>(n_stub()), ScalarField::Real};
}

void SBlocks::validate() const {
  const auto ni = K.cols(), no = K.rows(), ns = N.rows();
  if (N.cols() != ns || L.rows() != no || L.cols() != ns || M.rows() != ns || M.cols() != ni) {
    fail(ErrorCode::DimensionMismatch, "inconsistent S-blocks: K " + shape(K) + ", L " +
                                           shape(L) + ", M " + shape(M) + ", N " + shape(N));
  }
  if (!(tau > 0.0)) fail(ErrorCode::InvalidArgument, "time step must be positive");
}

ScatterResult scatter_step(const SBlocks& blocks, const Vec& z_in, const Vec& stub) {
  require_len(z_in, blocks.n_in(), "z_in");
  require_len(stub, blocks.n_stub(), "stub state");
  ScatterResult r;
  r.z_out = blocks.K * z_in + blocks.L * stub;
  r.stub = blocks.N * stub + blocks.M * z_in;
  return r;
}

std::vector<Vec> impulse_response(const SBlocks& blocks, const Vec& z0, int steps) {
  if (steps < 1) fail(ErrorCode::InvalidArgument, "impulse response needs steps >= 1");
  blocks.validate();
  require_len(z0, blocks.n_in(), "z0");
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(steps));
  const Vec zero = Vec::Zero(blocks.n_in());
  Vec stub = Vec::Zero(blocks.n_stub());
  for (int k = 0; k < steps; ++k) {
    ScatterResult r = scatter_step(blocks, k == 0 ? z0 : zero, stub);
    out.push_back(std::move(r.z_out));
    stub = std::move(r.stub);
  }
  return out;
}

SBlocks gauge_transform(const SBlocks& blocks, const Mat& gauge) {
  blocks.validate();
  if (gauge.rows() != blocks.n_stub() || gauge.cols() != blocks.n_stub()) {
    fail(ErrorCode::DimensionMismatch, "gauge must act on the stub space");
  }
  if (blocks.n_stub() == 0) return blocks;
  Eigen::JacobiSVD<Mat> svd(gauge);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || sv(0) / smin > 1e12) {
    fail(ErrorCode::SingularGauge, "gauge transformation is numerically singular");
  }
  const Mat inv = gauge.partialPivLu().inverse();
  SBlocks out = blocks;
  out.L = blocks.L * inv;
  out.M = gauge * blocks.M;
  out.N = gauge * blocks.N * inv;
  return out;
}

double operator_norm(const Mat& a, NormKind kind) {
  if (kind == NormKind::Sup) return induced_two_norm(a);
  if (a.rows() != a.cols()) {
    fail(ErrorCode::NonSquare, "spectral radius needs a square operator, got " + shape(a));
  }
  return spectral_radius(a);
}

StabilityReport check_stability(const SBlocks& blocks, NormKind kind) {
  StabilityReport r;
  r.norm = operator_norm(blocks.N, kind);
  r.margin = 1.0 - r.norm;
  r.stable = r.norm < 1.0;
  return r;
}

CMat gauge_contribution(const SBlocks& blocks, double theta) {
  blocks.validate();
  if (blocks.n_stub() == 0) return CMat::Zero(blocks.n_out(), blocks.n_in());
  return blocks.L.cast<cplx>() * resolvent(blocks.N, theta) * blocks.M.cast<cplx>();
}

CMat freq_condense(const SBlocks& blocks, double theta) {
  return blocks.K.cast<cplx>() + gauge_contribution(blocks, theta);
}

MultiStageSBlocks MultiStageSBlocks::from(const SBlocks& blocks) {
  return MultiStageSBlocks{blocks.K, {Stage{blocks.L, blocks.M, blocks.N}}, blocks.tau};
}

void MultiStageSBlocks::validate() const {
  if (stages.empty()) fail(ErrorCode::InvalidArgument, "multi-stage blocks need k >= 1");
  for (const Stage& s : stages) {
    SBlocks{K, s.L, s.M, s.N, tau}.validate();
  }
}

StabilityReport check_stability(const MultiStageSBlocks& blocks, NormKind kind) {
  StabilityReport r;
  r.norm = 0.0;
  for (const Stage& s : blocks.stages) r.norm = std::max(r.norm, operator_norm(s.N, kind));
  r.margin = 1.0 - r.norm;
  r.stable = r.norm < 1.0;
  return r;
}

std::vector<StageState> zero_stage_states(const MultiStageSBlocks& blocks) {
  std::vector<StageState> states;
  for (std::size_t k = 0; k < blocks.stages.size(); ++k) {
    StageState st;
    st.stub = Vec::Zero(blocks.stages[k].N.rows());
    st.queue.assign(k + 1, Vec::Zero(blocks.K.cols()));
    states.push_back(std::move(st));
  }
  return states;
}

MultiStageResult multi_stage_step(const MultiStageSBlocks& blocks, const Vec& z_in,
                                  const std::vector<StageState>& states) {
  blocks.validate();
  require_len(z_in, blocks.K.cols(), "z_in");
  if (states.size() != blocks.stages.size()) {
    fail(ErrorCode::DimensionMismatch, "one stage state per stage required");
  }
  MultiStageResult r;
  r.z_out = blocks.K * z_in;
  r.states.reserve(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Stage& stage = blocks.stages[k];
    const StageState& st = states[k];
    require_len(st.stub, stage.N.rows(), "stage stub");
    if (st.queue.size() != k + 1) {
      fail(ErrorCode::DimensionMismatch, "stage queue depth must equal its delay multiplicity");
    }
    r.z_out += stage.L * st.stub;
    StageState next;
    next.queue.reserve(k + 1);
    next.queue.push_back(z_in);
    for (std::size_t i = 0; i + 1 < st.queue.size(); ++i) next.queue.push_back(st.queue[i]);
    // The oldest queued entry is z_in(t - k tau); it enters the stub now so
    // that it reaches the output after (k + 1) steps.
    next.stub = stage.N * st.stub + stage.M * next.queue.back();
    r.states.push_back(std::move(next));
  }
  return r;
}

}  // namespace tlm

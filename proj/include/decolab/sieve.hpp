#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "decolab/bipartite.hpp"
#include "decolab/common.hpp"
#include "decolab/linops.hpp"

namespace decolab {

// ---------------------------------------------------------------------------
// Predictability sieve: entropy loss under a system-environment interaction
// and its equivalence with potential accessibility for pure states.
// ---------------------------------------------------------------------------

/// Von Neumann entropy -Tr(rho ln rho), in nats. Eigenvalues below the
/// positivity slack contribute zero (the 0 ln 0 limit).
inline double von_neumann_entropy(const Mat& rho) {
  if (!is_hermitian(rho))
    throw NumericalError("entropy: state is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es((rho + rho.adjoint()) / 2.0);
  const RVec& ev = es.eigenvalues();
  if (ev.minCoeff() < -tol::psd)
    throw NumericalError("entropy: state is not positive semidefinite");
  if (std::abs(rho.trace().real() - 1.0) > 1e-9)
    throw NumericalError("entropy: state does not have unit trace");
  double s = 0.0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > tol::psd) s -= ev(i) * std::log(ev(i));
  return s;
}

/// Entropy gained by the system marginal across the interaction:
/// S(Tr_G U(rho_S ⊗ rho_F) U†) - S(rho_S).
inline double predictability_loss(const UnitaryChannel& ch, const Mat& rho_f,
                                  const Mat& rho_s) {
  if (rho_s.rows() != ch.dim_s || rho_f.rows() != ch.dim_f)
    throw DimensionError("predictability_loss: state dimensions mismatch");
  if (!is_state(rho_s) || !is_state(rho_f))
    throw NumericalError("predictability_loss: inputs must be states");
  Mat out = ch.pushforward(kron_mat(rho_s, rho_f));
  Mat rho_t = partial_trace_mat(out, {ch.dim_t, ch.dim_g}, {0});
  return von_neumann_entropy(rho_t) - von_neumann_entropy(rho_s);
}

struct EnvironmentLoss {
  std::string rho_f_id;
  double loss_nats = 0.0;
};

struct SieveReport {
  std::string state_id;
  std::vector<EnvironmentLoss> losses;
  bool zero_loss_all = false;  // loss below epsilon for every sampled rho_F
  bool in_pacc = false;        // |psi><psi| lies in S_pacc
  bool equivalent = false;     // the two verdicts agree
  double epsilon = 0.0;
};

/// Per-pure-state sieve reports: compares zero loss (decided at
/// rho_F = I/dim_F, reported for extra sampled environment states too)
/// against membership of |psi><psi| in the potentially accessible algebra.
inline std::vector<SieveReport> sieve_check(
    const UnitaryChannel& ch, const std::vector<std::pair<std::string, Vec>>& states,
    int extra_env_samples = 3, std::uint64_t seed = kDefaultSeed,
    double epsilon = 1e-8) {
  if (ch.dim_s != ch.dim_t || ch.dim_f != ch.dim_g)
    throw DimensionError(
        "sieve_check requires dim_S = dim_T and dim_F = dim_G");
  OperatorAlgebra pacc = pacc_algebra(ch);

  std::vector<std::pair<std::string, Mat>> envs;
  envs.emplace_back("maximally_mixed",
                    Mat::Identity(ch.dim_f, ch.dim_f) / ch.dim_f);
  Rng rng(seed);
  for (int i = 0; i < extra_env_samples; ++i)
    envs.emplace_back("sampled_" + std::to_string(i),
                      random_density(ch.dim_f, rng));

  std::vector<SieveReport> out;
  for (const auto& [id, psi] : states) {
    if (psi.size() != ch.dim_s)
      throw DimensionError("sieve_check: state dimension mismatch");
    Vec unit = psi / psi.norm();
    SieveReport rep;
    rep.state_id = id;
    rep.epsilon = epsilon;
    rep.zero_loss_all = true;
    for (const auto& [env_id, rho_f] : envs) {
      double loss = predictability_loss(ch, rho_f, projector(unit));
      rep.losses.push_back({env_id, loss});
      if (std::abs(loss) >= epsilon) rep.zero_loss_all = false;
    }
    rep.in_pacc = contains(pacc, projector(unit));
    rep.equivalent = (rep.in_pacc == rep.zero_loss_all);
    out.push_back(std::move(rep));
  }
  return out;
}

/// Default sample set: computational basis, uniform superposition, and
/// seeded random pure states.
inline std::vector<std::pair<std::string, Vec>> sieve_sample_states(
    int dim, int random_count, std::uint64_t seed = kDefaultSeed) {
  std::vector<std::pair<std::string, Vec>> states;
  for (int k = 0; k < dim; ++k) {
    Vec v = Vec::Zero(dim);
    v(k) = 1;
    states.emplace_back("basis_" + std::to_string(k), v);
  }
  states.emplace_back("uniform", Vec::Ones(dim) / std::sqrt(double(dim)));
  Rng rng(seed);
  for (int i = 0; i < random_count; ++i)
    states.emplace_back("random_" + std::to_string(i),
                        random_state_vector(dim, rng));
  return states;
}

}  // namespace decolab

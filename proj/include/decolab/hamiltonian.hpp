#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "decolab/bipartite.hpp"
#include "decolab/common.hpp"
#include "decolab/linops.hpp"
#include "decolab/vnalgebra.hpp"

namespace decolab {

// ---------------------------------------------------------------------------
// Continuous-time decoherence of a bipartite Hamiltonian H on S⊗F.
// ---------------------------------------------------------------------------

struct HamiltonianModel {
  Mat h;        // full Hamiltonian on S⊗F
  int dim_s = 1;
  int dim_f = 1;
  Mat h_local;  // H_S, the unique local part with Tr_F(H - H_S⊗I) = 0
  Mat h_int;    // H_I = H - H_S⊗I

  HamiltonianModel(Mat hamiltonian, int ds, int df)
      : h(std::move(hamiltonian)), dim_s(ds), dim_f(df) {
    if (h.rows() != ds * df || h.cols() != ds * df)
      throw DimensionError("Hamiltonian does not match dim_S*dim_F");
    if (!is_hermitian(h))
      throw NumericalError("Hamiltonian is not Hermitian within tolerance " +
                           std::to_string(tol::herm));
    h_local = partial_trace_mat(h, {ds, df}, {0}) / df;
    h_int = h - kron_mat(h_local, Mat::Identity(df, df));
  }

  /// e^{-iHt} as a channel S⊗F -> S⊗F.
  UnitaryChannel evolution(double t) const {
    return UnitaryChannel::square(exp_i_hermitian_mat(h, t), dim_s, dim_f);
  }
};

namespace detail {

inline std::vector<Mat> lifted_units(int ds, int df) {
  std::vector<Mat> out;
  Mat id_f = Mat::Identity(df, df) / std::sqrt(static_cast<double>(df));
  for (const Mat& e : matrix_units(ds)) out.push_back(kron_mat(e, id_f));
  return out;
}

}  // namespace detail

/// Potentially accessible algebra of the Hamiltonian: the largest subspace of
/// S-operators whose full adjoint-action orbit under H stays inside S⊗I_F.
/// Computed as a greatest fixed point of K -> {X in K : [H, X] in K-lifted}.
inline OperatorAlgebra pacc_h(const HamiltonianModel& m) {
  const int ds = m.dim_s, df = m.dim_f;
  const int n = ds * ds;
  const int dd = (ds * df) * (ds * df);
  const double hnorm = std::max(1.0, m.h.norm());
  std::vector<Mat> lifted = detail::lifted_units(ds, df);

  Mat coeff = Mat::Identity(n, n);  // columns span the current K
  int stable_rounds = 0;
  const int cap = dd * dd;
  for (int round = 0; round < cap && stable_rounds < 2; ++round) {
    const int k = static_cast<int>(coeff.cols());
    if (k == 0) break;
    // Current lifted orthonormal span of K.
    std::vector<Mat> span_ops;
    for (int c = 0; c < k; ++c) {
      Mat op = Mat::Zero(ds * df, ds * df);
      for (int i = 0; i < n; ++i) op += coeff(i, c) * lifted[i];
      span_ops.push_back(std::move(op));
    }
    // Residuals of [H, X_c] outside the lifted span of K.
    Mat rows(dd, k);
    for (int c = 0; c < k; ++c) {
      Mat w = comm(m.h, span_ops[c]) / hnorm;
      for (const Mat& b : span_ops) w -= hs_inner(b, w) * b;
      rows.col(c) = Eigen::Map<const Vec>(w.data(), dd);
    }
    Mat null = kernel_basis(rows);
    if (null.cols() == k)
      ++stable_rounds;
    else
      stable_rounds = 0;
    coeff = (coeff * null).eval();
  }

  std::vector<Mat> basis;
  for (int c = 0; c < coeff.cols(); ++c) {
    Vec v = coeff.col(c);
    basis.push_back(Eigen::Map<const Mat>(v.data(), ds, ds));
  }
  return algebra_from_orthonormal({ds}, detail::orthonormalize(basis));
}

/// Accessible algebra: relative commutant of pacc_h within S.
inline OperatorAlgebra acc_h(const HamiltonianModel& m) {
  return commutant(pacc_h(m));
}

struct HamiltonianDecoherence {
  OperatorAlgebra pacc;
  OperatorAlgebra acc;
  OperatorAlgebra dec;
  SubspaceDecomposition decomposition;
};

inline HamiltonianDecoherence dec_h(const HamiltonianModel& m,
                                    std::uint64_t seed = kDefaultSeed) {
  HamiltonianDecoherence out;
  out.pacc = pacc_h(m);
  out.acc = commutant(out.pacc);
  out.dec = intersect(out.acc, out.pacc);
  out.decomposition = subspace_decomposition(block_structure(out.dec, seed));
  validate_decomposition(out.decomposition);
  return out;
}

/// Robust algebra {H}' ∩ S: S-operators invariant under the evolution.
inline OperatorAlgebra robust_algebra(const HamiltonianModel& m) {
  const int n = m.dim_s * m.dim_s;
  const int dd = (m.dim_s * m.dim_f) * (m.dim_s * m.dim_f);
  const double hnorm = std::max(1.0, m.h.norm());
  std::vector<Mat> lifted = detail::lifted_units(m.dim_s, m.dim_f);
  KernelAccumulator acc(n);
  Mat rows(dd, n);
  for (int i = 0; i < n; ++i) {
    Mat c = comm(m.h, lifted[i]) / hnorm;
    rows.col(i) = Eigen::Map<const Vec>(c.data(), dd);
  }
  acc.add_rows(rows);
  return algebra_from_orthonormal(
      {m.dim_s}, detail::mats_from_coefficients(acc.kernel(), m.dim_s));
}

/// Robustness in the rotating frame that absorbs H_S: the commutant within S
/// of the Krylov closure {ad_{H_S}^n(H_I)}, which spans {H_I(t) : t}.
inline OperatorAlgebra rotating_frame_robust(const HamiltonianModel& m) {
  const int ds = m.dim_s, df = m.dim_f;
  const int d = ds * df;
  const int dd = d * d;
  Mat hs_lift = kron_mat(m.h_local, Mat::Identity(df, df));

  std::vector<Mat> orbit;
  if (m.h_int.norm() > 1e-300)
    orbit.push_back(m.h_int / m.h_int.norm());
  size_t frontier = 0;
  const size_t cap = static_cast<size_t>(dd);
  while (frontier < orbit.size() && orbit.size() <= cap) {
    Mat next = comm(hs_lift, orbit[frontier]);
    ++frontier;
    detail::add_to_span(orbit, next);
  }

  const int n = ds * ds;
  std::vector<Mat> lifted = detail::lifted_units(ds, df);
  KernelAccumulator acc(n);
  for (const Mat& g : orbit) {
    Mat rows(dd, n);
    for (int i = 0; i < n; ++i) {
      Mat c = comm(g, lifted[i]);
      rows.col(i) = Eigen::Map<const Vec>(c.data(), dd);
    }
    acc.add_rows(rows);
  }
  return algebra_from_orthonormal(
      {ds}, detail::mats_from_coefficients(acc.kernel(), ds));
}

struct HamiltonianControlForm {
  std::vector<Vec> control_basis;  // |psi_k> on S
  std::vector<Mat> conditionals;   // Hermitian H^(k) on F
};

inline Mat assemble_hamiltonian_control_form(const HamiltonianControlForm& cf) {
  const int ds = static_cast<int>(cf.control_basis.size());
  const int df = static_cast<int>(cf.conditionals[0].rows());
  Mat h = Mat::Zero(ds * df, ds * df);
  for (int k = 0; k < ds; ++k)
    h += kron_mat(projector(cf.control_basis[k]), cf.conditionals[k]);
  return h;
}

/// Control form of a maximally decohering Hamiltonian, or nullopt.
inline std::optional<HamiltonianControlForm> detect_control_form_h(
    const HamiltonianModel& m, std::uint64_t seed = kDefaultSeed) {
  HamiltonianDecoherence an = dec_h(m, seed);
  if (an.dec.dim() != m.dim_s) return std::nullopt;

  HamiltonianControlForm cf;
  Mat id_f = Mat::Identity(m.dim_f, m.dim_f);
  for (const Mat& p : an.decomposition.projectors) {
    Vec psi = projector_unit_vector(p);
    Mat hk = kron_mat(psi.adjoint(), id_f) * m.h * kron_mat(psi, id_f);
    cf.control_basis.push_back(std::move(psi));
    cf.conditionals.push_back(std::move(hk));
  }
  if ((assemble_hamiltonian_control_form(cf) - m.h).norm() >
      tol::recon * std::max(1.0, m.h.norm()))
    throw InternalError(
        "Hamiltonian control form does not reassemble the Hamiltonian");
  for (size_t k = 0; k < cf.conditionals.size(); ++k)
    for (size_t l = k + 1; l < cf.conditionals.size(); ++l) {
      Mat diff = cf.conditionals[k] - cf.conditionals[l];
      Mat traceless =
          diff - (diff.trace() / static_cast<double>(m.dim_f)) * id_f;
      if (traceless.norm() <= tol::phase)
        throw InternalError(
            "control-form conditionals differ by a multiple of the identity; "
            "contradicts maximal decoherence");
    }
  return cf;
}

}  // namespace decolab

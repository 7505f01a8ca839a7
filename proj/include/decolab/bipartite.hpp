#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "decolab/common.hpp"
#include "decolab/linops.hpp"
#include "decolab/vnalgebra.hpp"

namespace decolab {

// ---------------------------------------------------------------------------
// Two-input/two-output unitary interactions U: S⊗F -> T⊗G and the causal
// decoherence analysis of the system factor.
// ---------------------------------------------------------------------------

struct UnitaryChannel {
  Mat u;
  int dim_s = 1, dim_f = 1;  // input split
  int dim_t = 1, dim_g = 1;  // output split

  UnitaryChannel() = default;

  UnitaryChannel(Mat matrix, std::pair<int, int> in_split,
                 std::pair<int, int> out_split)
      : u(std::move(matrix)),
        dim_s(in_split.first),
        dim_f(in_split.second),
        dim_t(out_split.first),
        dim_g(out_split.second) {
    if (dim_s * dim_f != u.cols() || dim_t * dim_g != u.rows())
      throw DimensionError("channel splits do not match the unitary shape");
    if (u.rows() != u.cols())
      throw DimensionError("unitary channel matrix must be square");
    if (!is_unitary(u))
      throw NumericalError("channel matrix is not unitary within tolerance " +
                           std::to_string(tol::unitary));
  }

  static UnitaryChannel square(Mat matrix, int ds, int df) {
    return UnitaryChannel(std::move(matrix), {ds, df}, {ds, df});
  }

  int total_dim() const { return dim_s * dim_f; }

  /// The inverse channel U⁻¹: T⊗G -> S⊗F.
  UnitaryChannel inverse() const {
    return UnitaryChannel(u.adjoint(), {dim_t, dim_g}, {dim_s, dim_f});
  }

  /// Heisenberg pullback U† n U of an output-space operator.
  Mat pullback(const Mat& n) const {
    if (n.rows() != u.rows() || n.cols() != u.rows())
      throw DimensionError("pullback operand does not match the output space");
    return u.adjoint() * n * u;
  }

  /// Pushforward U m U† of an input-space operator.
  Mat pushforward(const Mat& m) const {
    if (m.rows() != u.cols() || m.cols() != u.cols())
      throw DimensionError("pushforward operand does not match the input space");
    return u * m * u.adjoint();
  }
};

/// Whether m (input space) influences n (output space) through the channel:
/// the commutator of m with the Heisenberg pullback of n is nonzero at the
/// scale-free threshold.
inline bool influences_op(const Mat& m, const Mat& n,
                          const UnitaryChannel& ch) {
  if (m.rows() != ch.total_dim() || m.cols() != ch.total_dim())
    throw DimensionError("influences_op: operand dimension mismatch");
  double nm = m.norm(), nn = n.norm();
  if (nm < 1e-300 || nn < 1e-300) return false;
  return comm(ch.pullback(n), m).norm() > tol::inf * nm * nn;
}

namespace detail {

/// HS-orthonormal matrix units of a d-dimensional factor, column-major order
/// so that coefficient vectors reshape straight into matrices.
inline std::vector<Mat> matrix_units(int d) {
  std::vector<Mat> units;
  units.reserve(d * d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) {
      Mat e = Mat::Zero(d, d);
      e(i, j) = 1;
      units.push_back(std::move(e));
    }
  return units;
}

inline std::vector<Mat> mats_from_coefficients(const Mat& coeff_kernel,
                                               int d) {
  std::vector<Mat> out;
  out.reserve(coeff_kernel.cols());
  for (int c = 0; c < coeff_kernel.cols(); ++c) {
    Vec v = coeff_kernel.col(c);
    out.push_back(Eigen::Map<const Mat>(v.data(), d, d));
  }
  return out;
}

/// Pullbacks of an operator basis of the environment output factor.
inline std::vector<Mat> pulled_env_ops(const UnitaryChannel& ch) {
  std::vector<Mat> pulled;
  Mat id_t = Mat::Identity(ch.dim_t, ch.dim_t);
  for (const Mat& n : matrix_units(ch.dim_g))
    pulled.push_back(ch.pullback(kron_mat(id_t, n)));
  return pulled;
}

}  // namespace detail

/// M_S -> G: some environment-output operator is influenced by m ⊗ I_F.
inline bool influences_op_to_env(const Mat& m, const UnitaryChannel& ch) {
  if (m.rows() != ch.dim_s || m.cols() != ch.dim_s)
    throw DimensionError("operand must be local to the system input factor");
  Mat lifted = kron_mat(m, Mat::Identity(ch.dim_f, ch.dim_f));
  double nm = lifted.norm();
  if (nm < 1e-300) return false;
  for (const Mat& p : detail::pulled_env_ops(ch))
    if (comm(p, lifted).norm() > tol::inf * nm * p.norm()) return true;
  return false;
}

/// S -> N: the pullback of n fails to commute with the system input algebra,
/// i.e. it has a component outside I_S ⊗ F.
inline bool influences_system_to_op(const Mat& n, const UnitaryChannel& ch) {
  Mat pulled = ch.pullback(n);
  Mat local_f = partial_trace_mat(pulled, {ch.dim_s, ch.dim_f}, {1});
  Mat proj = kron_mat(Mat::Identity(ch.dim_s, ch.dim_s), local_f) /
             static_cast<double>(ch.dim_s);
  return (pulled - proj).norm() > tol::inf * std::max(1e-300, n.norm());
}

/// S -> G: some system operator influences some environment-output operator.
inline bool influences_system_to_env(const UnitaryChannel& ch) {
  for (const Mat& e : detail::matrix_units(ch.dim_s))
    if (influences_op_to_env(e, ch)) return true;
  return false;
}

/// Potentially accessible algebra S_pacc = U⁻¹(G)' ∩ S, re-expressed on S.
/// Cross-checked against the locality characterization
/// U(M ⊗ I_F)U† ∈ T ⊗ I_G; disagreement raises InternalError.
inline OperatorAlgebra pacc_algebra(const UnitaryChannel& ch) {
  const int ds = ch.dim_s, df = ch.dim_f, dg = ch.dim_g;
  const int n = ds * ds;
  std::vector<Mat> units = detail::matrix_units(ds);
  Mat id_f = Mat::Identity(df, df);

  std::vector<Mat> lifted;
  lifted.reserve(n);
  for (const Mat& e : units) lifted.push_back(kron_mat(e, id_f));

  // Route 1: commutation with the pulled-back environment algebra.
  KernelAccumulator acc1(n);
  const int dd = ch.total_dim() * ch.total_dim();
  for (const Mat& p : detail::pulled_env_ops(ch)) {
    Mat block(dd, n);
    for (int i = 0; i < n; ++i) {
      Mat c = comm(lifted[i], p) / std::sqrt(static_cast<double>(df));
      block.col(i) = Eigen::Map<const Vec>(c.data(), dd);
    }
    acc1.add_rows(block);
  }
  std::vector<Mat> basis1 = detail::mats_from_coefficients(acc1.kernel(), ds);

  // Route 2: image under the channel is local to the system output factor.
  KernelAccumulator acc2(n);
  {
    Mat block(dd, n);
    for (int i = 0; i < n; ++i) {
      Mat w = ch.pushforward(lifted[i]);
      Mat local_t = partial_trace_mat(w, {ch.dim_t, dg}, {0}) / dg;
      Mat r = (w - kron_mat(local_t, Mat::Identity(dg, dg))) /
              std::sqrt(static_cast<double>(df));
      block.col(i) = Eigen::Map<const Vec>(r.data(), dd);
    }
    acc2.add_rows(block);
  }
  std::vector<Mat> basis2 = detail::mats_from_coefficients(acc2.kernel(), ds);

  OperatorAlgebra out = algebra_from_orthonormal({ds}, std::move(basis1));
  OperatorAlgebra alt = algebra_from_orthonormal({ds}, std::move(basis2));
  if (!equals(out, alt))
    throw InternalError(
        "pacc_algebra: commutant and locality characterizations disagree "
        "beyond tolerance");
  return out;
}

/// Accessible algebra: the commutant of S_pacc within S.
inline OperatorAlgebra acc_algebra(const UnitaryChannel& ch) {
  return commutant(pacc_algebra(ch));
}

struct BipartiteAnalysis {
  OperatorAlgebra acc;
  OperatorAlgebra pacc;
  OperatorAlgebra dec;
  SubspaceDecomposition decomposition;
  BlockStructure acc_blocks;
  BlockStructure pacc_blocks;
};

inline BipartiteAnalysis analyze(const UnitaryChannel& ch,
                                 std::uint64_t seed = kDefaultSeed) {
  BipartiteAnalysis out;
  out.pacc = pacc_algebra(ch);
  out.acc = commutant(out.pacc);
  out.dec = intersect(out.acc, out.pacc);
  out.decomposition = subspace_decomposition(block_structure(out.dec, seed));
  validate_decomposition(out.decomposition);
  out.acc_blocks = block_structure(out.acc, seed);
  out.pacc_blocks = block_structure(out.pacc, seed);
  return out;
}

/// Analysis of the inverse channel: decoherence read with time reversed,
/// i.e. implementable / potentially implementable generators on T.
inline BipartiteAnalysis dual_analyze(const UnitaryChannel& ch,
                                      std::uint64_t seed = kDefaultSeed) {
  return analyze(ch.inverse(), seed);
}

struct ControlForm {
  std::vector<Vec> control_basis;  // |psi_k> on S
  std::vector<Vec> image_basis;    // |psi~_k> on T
  std::vector<Mat> conditionals;   // V^(k): F -> G
};

/// Reassembles sum_k |psi~_k><psi_k| ⊗ V^(k).
inline Mat assemble_control_form(const ControlForm& cf) {
  const int ds = static_cast<int>(cf.control_basis[0].size());
  const int dt = static_cast<int>(cf.image_basis[0].size());
  const int df = static_cast<int>(cf.conditionals[0].cols());
  const int dg = static_cast<int>(cf.conditionals[0].rows());
  Mat u = Mat::Zero(dt * dg, ds * df);
  for (size_t k = 0; k < cf.control_basis.size(); ++k)
    u += kron_mat(cf.image_basis[k] * cf.control_basis[k].adjoint(),
                  cf.conditionals[k]);
  return u;
}

/// Coherent-control form of a maximally decohering channel, or nullopt when
/// the channel is not maximally decohering. Requires dim_S = dim_T.
inline std::optional<ControlForm> detect_control_form(
    const UnitaryChannel& ch, std::uint64_t seed = kDefaultSeed) {
  if (ch.dim_s != ch.dim_t)
    throw DimensionError(
        "detect_control_form requires dim_S = dim_T (theorem hypothesis)");
  BipartiteAnalysis an = analyze(ch, seed);
  if (an.dec.dim() != ch.dim_s) return std::nullopt;

  ControlForm cf;
  Mat id_f = Mat::Identity(ch.dim_f, ch.dim_f);
  for (const Mat& p : an.decomposition.projectors) {
    Vec psi = projector_unit_vector(p);
    Mat w = ch.pushforward(kron_mat(projector(psi), id_f));
    Mat image_proj =
        partial_trace_mat(w, {ch.dim_t, ch.dim_g}, {0}) / ch.dim_g;
    Vec psi_t = projector_unit_vector(image_proj);
    Mat v = kron_mat(psi_t.adjoint(), Mat::Identity(ch.dim_g, ch.dim_g)) *
            ch.u * kron_mat(psi, id_f);
    if (!is_unitary(v))
      throw InternalError("control-form conditional is not unitary");
    cf.control_basis.push_back(std::move(psi));
    cf.image_basis.push_back(std::move(psi_t));
    cf.conditionals.push_back(std::move(v));
  }
  for (size_t k = 0; k < cf.conditionals.size(); ++k)
    for (size_t l = k + 1; l < cf.conditionals.size(); ++l) {
      double overlap =
          std::abs(hs_inner(cf.conditionals[k], cf.conditionals[l]));
      if (overlap >= ch.dim_f * (1.0 - tol::phase))
        throw InternalError(
            "control-form conditionals are phase-equivalent; contradicts "
            "maximal decoherence");
    }
  if ((assemble_control_form(cf) - ch.u).norm() >
      tol::recon * std::max(1.0, ch.u.norm()))
    throw InternalError("control form does not reassemble the unitary");
  return cf;
}

/// Off-diagonal suppression factor |Tr(V^(l)† V^(k) rho_F)| in [0, 1].
inline double suppression_factor(const ControlForm& cf, const Mat& rho_f,
                                 int k, int l) {
  if (k < 0 || l < 0 || k >= static_cast<int>(cf.conditionals.size()) ||
      l >= static_cast<int>(cf.conditionals.size()))
    throw DimensionError("suppression_factor: index out of range");
  if (!is_state(rho_f))
    throw NumericalError("suppression_factor: rho_F is not a density operator");
  return std::abs(
      (cf.conditionals[l].adjoint() * cf.conditionals[k] * rho_f).trace());
}

/// Dephasing channel sum_k pi_k rho pi_k in the given projector family.
inline Mat dephase(const Mat& rho, const SubspaceDecomposition& dec) {
  Mat out = Mat::Zero(rho.rows(), rho.cols());
  for (const Mat& p : dec.projectors) out += p * rho * p;
  return out;
}

}  // namespace decolab

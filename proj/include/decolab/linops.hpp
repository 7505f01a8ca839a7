#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "decolab/common.hpp"

namespace decolab {

// ---------------------------------------------------------------------------
// Dense complex operators over explicitly factored spaces.
//
// Tensor convention, fixed globally: the leftmost factor is the most
// significant digit of the row/column index.
// ---------------------------------------------------------------------------

struct Operator {
  Mat m;
  Dims row_factors;
  Dims col_factors;

  Operator() = default;

  Operator(Mat matrix, Dims rf, Dims cf)
      : m(std::move(matrix)),
        row_factors(std::move(rf)),
        col_factors(std::move(cf)) {
    if (product(row_factors) != m.rows() || product(col_factors) != m.cols())
      throw DimensionError("operator factors " + dims_to_string(row_factors) +
                           "x" + dims_to_string(col_factors) +
                           " do not match matrix shape " +
                           std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()));
    if (!m.allFinite())
      throw NumericalError("operator entries must be finite");
  }

  static Operator square(Mat matrix, Dims factors) {
    Dims cf = factors;
    return Operator(std::move(matrix), std::move(factors), std::move(cf));
  }

  int rows() const { return static_cast<int>(m.rows()); }
  int cols() const { return static_cast<int>(m.cols()); }
  bool is_square() const {
    return m.rows() == m.cols() && row_factors == col_factors;
  }
};

inline Mat dagger(const Mat& a) { return a.adjoint(); }

inline Mat comm(const Mat& a, const Mat& b) { return a * b - b * a; }

/// Hilbert-Schmidt inner product Tr(a† b).
inline cxd hs_inner(const Mat& a, const Mat& b) {
  return (a.conjugate().cwiseProduct(b)).sum();
}

inline double fro(const Mat& a) { return a.norm(); }

inline bool is_hermitian(const Mat& a, double tau = tol::herm) {
  return a.rows() == a.cols() &&
         (a - a.adjoint()).norm() <= tau * std::max(1.0, a.norm());
}

inline bool is_unitary(const Mat& a, double tau = tol::unitary) {
  if (a.rows() != a.cols()) return false;
  return (a.adjoint() * a - Mat::Identity(a.cols(), a.cols())).norm() <=
         tau * std::sqrt(static_cast<double>(a.cols()));
}

// ---------------------------------------------------------------------------
// kron / permutation / partial trace
// ---------------------------------------------------------------------------

inline Mat kron_mat(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Operator kron(const Operator& a, const Operator& b) {
  Dims rf = a.row_factors;
  rf.insert(rf.end(), b.row_factors.begin(), b.row_factors.end());
  Dims cf = a.col_factors;
  cf.insert(cf.end(), b.col_factors.begin(), b.col_factors.end());
  return Operator(kron_mat(a.m, b.m), std::move(rf), std::move(cf));
}

namespace detail {

/// digits[k] = digit of index i in the mixed-radix system over dims.
inline void decompose_index(int i, const Dims& dims, std::vector<int>& digits) {
  digits.resize(dims.size());
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    digits[k] = i % dims[k];
    i /= dims[k];
  }
}

inline int compose_index(const std::vector<int>& digits, const Dims& dims) {
  int i = 0;
  for (size_t k = 0; k < dims.size(); ++k) i = i * dims[k] + digits[k];
  return i;
}

}  // namespace detail

/// Conjugation by the subsystem-permutation unitary; the factor at new
/// position k is the old factor perm[k].
inline Mat permute_subsystems_mat(const Mat& a, const Dims& dims,
                                  const std::vector<int>& perm) {
  const int n = static_cast<int>(dims.size());
  if (static_cast<int>(perm.size()) != n)
    throw DimensionError("permutation length " + std::to_string(perm.size()) +
                         " does not match factor count " + std::to_string(n));
  std::vector<bool> seen(n, false);
  for (int p : perm) {
    if (p < 0 || p >= n || seen[p])
      throw DimensionError("invalid subsystem permutation");
    seen[p] = true;
  }
  Dims new_dims(n);
  for (int k = 0; k < n; ++k) new_dims[k] = dims[perm[k]];
  const int d = static_cast<int>(a.rows());
  std::vector<int> map(d);
  std::vector<int> digits, new_digits(n);
  for (int i = 0; i < d; ++i) {
    detail::decompose_index(i, dims, digits);
    for (int k = 0; k < n; ++k) new_digits[k] = digits[perm[k]];
    map[i] = detail::compose_index(new_digits, new_dims);
  }
  Mat out(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) out(map[r], map[c]) = a(r, c);
  return out;
}

inline Operator permute_subsystems(const Operator& a,
                                   const std::vector<int>& perm) {
  if (!a.is_square())
    throw DimensionError("permute_subsystems requires a square operator");
  Dims new_dims(perm.size());
  for (size_t k = 0; k < perm.size(); ++k) {
    if (perm[k] < 0 || perm[k] >= static_cast<int>(a.row_factors.size()))
      throw DimensionError("invalid subsystem permutation");
    new_dims[k] = a.row_factors[perm[k]];
  }
  return Operator::square(permute_subsystems_mat(a.m, a.row_factors, perm),
                          new_dims);
}

/// Precomputed index bookkeeping for a subset of tensor factors.
/// idx[a * rest_dim + b] is the global index whose digits on `pos` form the
/// sub-index a and whose remaining digits form b.
struct EmbedPlan {
  int sub_dim = 1;
  int rest_dim = 1;
  std::vector<int> idx;
};

inline EmbedPlan make_embed_plan(const Dims& dims, const std::vector<int>& pos) {
  const int n = static_cast<int>(dims.size());
  std::vector<bool> bound(n, false);
  for (int p : pos) {
    if (p < 0 || p >= n) throw DimensionError("factor index out of range");
    if (bound[p]) throw DimensionError("repeated factor index");
    bound[p] = true;
  }
  EmbedPlan plan;
  for (int p : pos) plan.sub_dim *= dims[p];
  const int d = product(dims);
  plan.rest_dim = d / plan.sub_dim;
  plan.idx.resize(d);
  std::vector<int> digits;
  Dims sub_dims;
  for (int p : pos) sub_dims.push_back(dims[p]);
  std::vector<int> sub_digits(pos.size());
  for (int i = 0; i < d; ++i) {
    detail::decompose_index(i, dims, digits);
    for (size_t k = 0; k < pos.size(); ++k) sub_digits[k] = digits[pos[k]];
    int a = detail::compose_index(sub_digits, sub_dims);
    int b = 0;
    for (int k = 0; k < n; ++k)
      if (!bound[k]) b = b * dims[k] + digits[k];
    plan.idx[a * plan.rest_dim + b] = i;
  }
  return plan;
}

/// x <- (g embedded on pos) * x
inline void embedded_left_mul(Mat& x, const Mat& g, const EmbedPlan& p) {
  Mat buf(p.sub_dim, x.cols());
  for (int b = 0; b < p.rest_dim; ++b) {
    for (int a = 0; a < p.sub_dim; ++a)
      buf.row(a) = x.row(p.idx[a * p.rest_dim + b]);
    buf = (g * buf).eval();
    for (int a = 0; a < p.sub_dim; ++a)
      x.row(p.idx[a * p.rest_dim + b]) = buf.row(a);
  }
}

/// x <- x * (g embedded on pos)
inline void embedded_right_mul(Mat& x, const Mat& g, const EmbedPlan& p) {
  Mat buf(x.rows(), p.sub_dim);
  for (int b = 0; b < p.rest_dim; ++b) {
    for (int a = 0; a < p.sub_dim; ++a)
      buf.col(a) = x.col(p.idx[a * p.rest_dim + b]);
    buf = (buf * g).eval();
    for (int a = 0; a < p.sub_dim; ++a)
      x.col(p.idx[a * p.rest_dim + b]) = buf.col(a);
  }
}

/// Pushforward (g⊗I) x (g⊗I)† of x by a gate g on the factors in pos,
/// or the pullback (g⊗I)† x (g⊗I) when inverse is set.
inline Mat conjugate_embedded(const Mat& x, const Mat& g, const EmbedPlan& p,
                              bool inverse = false) {
  Mat out = x;
  Mat gd = g.adjoint();
  if (!inverse) {
    embedded_left_mul(out, g, p);
    embedded_right_mul(out, gd, p);
  } else {
    embedded_left_mul(out, gd, p);
    embedded_right_mul(out, g, p);
  }
  return out;
}

/// Dense g ⊗ I arranged on the given factor positions.
inline Mat embed_mat(const Mat& g, const Dims& dims,
                     const std::vector<int>& pos) {
  EmbedPlan p = make_embed_plan(dims, pos);
  const int d = product(dims);
  Mat out = Mat::Zero(d, d);
  for (int a = 0; a < p.sub_dim; ++a)
    for (int a2 = 0; a2 < p.sub_dim; ++a2) {
      if (g(a, a2) == cxd(0, 0)) continue;
      for (int b = 0; b < p.rest_dim; ++b)
        out(p.idx[a * p.rest_dim + b], p.idx[a2 * p.rest_dim + b]) = g(a, a2);
    }
  return out;
}

inline Mat partial_trace_mat(const Mat& a, const Dims& dims,
                             const std::vector<int>& kept) {
  for (size_t k = 1; k < kept.size(); ++k)
    if (kept[k] <= kept[k - 1])
      throw DimensionError("kept factor indices must be strictly increasing");
  EmbedPlan p = make_embed_plan(dims, kept);
  Mat out = Mat::Zero(p.sub_dim, p.sub_dim);
  for (int i = 0; i < p.sub_dim; ++i)
    for (int j = 0; j < p.sub_dim; ++j) {
      cxd s = 0;
      for (int b = 0; b < p.rest_dim; ++b)
        s += a(p.idx[i * p.rest_dim + b], p.idx[j * p.rest_dim + b]);
      out(i, j) = s;
    }
  return out;
}

inline Operator partial_trace(const Operator& a, const std::vector<int>& kept) {
  if (!a.is_square())
    throw DimensionError("partial_trace requires a square operator");
  Mat out = partial_trace_mat(a.m, a.row_factors, kept);
  Dims kept_dims;
  for (int k : kept) kept_dims.push_back(a.row_factors[k]);
  if (kept_dims.empty()) kept_dims.push_back(1);
  return Operator::square(std::move(out), std::move(kept_dims));
}

// ---------------------------------------------------------------------------
// Eigendecomposition / kernels / exponentials
// ---------------------------------------------------------------------------

struct HermitianEig {
  RVec values;   // descending
  Mat vectors;   // columns, orthonormal, aligned with values
};

inline HermitianEig hermitian_eig_mat(const Mat& a) {
  if (!is_hermitian(a))
    throw NumericalError(
        "hermitian_eig: input is not Hermitian within tolerance " +
        std::to_string(tol::herm));
  Eigen::SelfAdjointEigenSolver<Mat> solver((a + a.adjoint()) / 2.0);
  if (solver.info() != Eigen::Success)
    throw InternalError("hermitian_eig: eigensolver failed to converge");
  HermitianEig out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  Mat recon = out.vectors * out.values.asDiagonal() * out.vectors.adjoint();
  if ((recon - a).norm() > tol::recon * std::max(1.0, a.norm()))
    throw InternalError("hermitian_eig: reconstruction residual too large");
  return out;
}

inline HermitianEig hermitian_eig(const Operator& a) {
  return hermitian_eig_mat(a.m);
}

/// Orthonormal basis (columns) of the numerical null space: right singular
/// vectors with sigma <= tol::rank * max(1, sigma_max).
inline Mat kernel_basis(const Mat& m, double tau = tol::rank) {
  if (m.rows() == 0 || m.cols() == 0) return Mat::Identity(m.cols(), m.cols());
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double cutoff = tau * std::max(1.0, sv.size() ? sv(0) : 0.0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  return svd.matrixV().rightCols(m.cols() - rank);
}

/// Incrementally QR-compresses a tall stack of constraint rows so the null
/// space of the full stack can be read off a cols x cols triangular factor.
/// Avoids forming Gram matrices (which would square the condition number).
class KernelAccumulator {
 public:
  explicit KernelAccumulator(int cols) : cols_(cols), r_(Mat::Zero(0, cols)) {}

  void add_rows(const Mat& rows) {
    if (rows.cols() != cols_)
      throw DimensionError("constraint row width mismatch");
    Mat stacked(r_.rows() + rows.rows(), cols_);
    if (r_.rows() > 0) stacked.topRows(r_.rows()) = r_;
    stacked.bottomRows(rows.rows()) = rows;
    Eigen::HouseholderQR<Mat> qr(stacked);
    int keep = std::min<int>(cols_, static_cast<int>(stacked.rows()));
    r_ = qr.matrixQR()
             .topRows(keep)
             .template triangularView<Eigen::Upper>()
             .toDenseMatrix();
  }

  /// Orthonormal basis (columns) of the null space of the accumulated stack.
  Mat kernel(double tau = tol::rank) const {
    if (r_.rows() == 0) return Mat::Identity(cols_, cols_);
    return kernel_basis(r_, tau);
  }

 private:
  int cols_;
  Mat r_;
};

inline Mat exp_i_hermitian_mat(const Mat& h, double t) {
  HermitianEig eig = hermitian_eig_mat(h);
  Vec phases(eig.values.size());
  for (int i = 0; i < eig.values.size(); ++i)
    phases(i) = std::exp(cxd(0, -eig.values(i) * t));
  Mat u = eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
  if (!is_unitary(u))
    throw InternalError("exp_i_hermitian: result is not unitary");
  return u;
}

/// e^{-i h t}; h must be Hermitian.
inline Operator exp_i_hermitian(const Operator& h, double t) {
  return Operator::square(exp_i_hermitian_mat(h.m, t), h.row_factors);
}

/// Clusters of (already descending) eigenvalues; values closer than
/// tau_eff = tol::gap * max(1, |lambda|_max) are grouped.
struct EigenvalueClusters {
  std::vector<std::pair<int, int>> ranges;  // [first, last) per cluster
  bool ambiguous = false;  // a gap fell between tau_eff and 10*tau_eff
};

inline EigenvalueClusters cluster_eigenvalues(const RVec& values,
                                              double tau = tol::gap) {
  EigenvalueClusters out;
  if (values.size() == 0) return out;
  double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  double tau_eff = tau * scale;
  int start = 0;
  for (int i = 1; i <= values.size(); ++i) {
    double gap = i < values.size() ? values(i - 1) - values(i) : 2 * tau_eff * 11;
    if (i == values.size() || gap > tau_eff) {
      if (i < values.size() && gap <= 10 * tau_eff) out.ambiguous = true;
      out.ranges.emplace_back(start, i);
      start = i;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standard operators and deterministic random ensembles
// ---------------------------------------------------------------------------

inline Mat identity_mat(int d) { return Mat::Identity(d, d); }

inline Mat pauli_x() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline Mat pauli_y() {
  Mat m(2, 2);
  m << 0, cxd(0, -1), cxd(0, 1), 0;
  return m;
}

inline Mat pauli_z() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

inline Mat hadamard_mat() {
  Mat m(2, 2);
  double s = 1.0 / std::sqrt(2.0);
  m << s, s, s, -s;
  return m;
}

inline Mat cnot_mat() {
  Mat m = Mat::Zero(4, 4);
  m(0, 0) = 1;
  m(1, 1) = 1;
  m(2, 3) = 1;
  m(3, 2) = 1;
  return m;
}

/// Swap of two factors with dimensions d1 and d2.
inline Mat swap_mat(int d1, int d2) {
  Mat m = Mat::Zero(d1 * d2, d1 * d2);
  for (int i = 0; i < d1; ++i)
    for (int j = 0; j < d2; ++j) m(j * d1 + i, i * d2 + j) = 1;
  return m;
}

/// sum_k |k><k| ⊗ branches[k]; the control is the first factor.
inline Mat controlled_mat(const std::vector<Mat>& branches) {
  if (branches.empty()) throw DimensionError("controlled gate needs branches");
  const int db = static_cast<int>(branches[0].rows());
  const int dc = static_cast<int>(branches.size());
  Mat m = Mat::Zero(dc * db, dc * db);
  for (int k = 0; k < dc; ++k) {
    if (branches[k].rows() != db || branches[k].cols() != db)
      throw DimensionError("controlled gate branches must share dimensions");
    m.block(k * db, k * db, db, db) = branches[k];
  }
  return m;
}

inline Mat projector(const Vec& v) { return v * v.adjoint(); }

inline Mat random_ginibre(int rows, int cols, Rng& rng) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.gaussian_cxd();
  return m;
}

inline Mat random_hermitian(int d, Rng& rng) {
  Mat g = random_ginibre(d, d, rng);
  return (g + g.adjoint()) / 2.0;
}

/// Haar-distributed unitary via QR of a Ginibre matrix with phase-fixed R.
inline Mat random_unitary(int d, Rng& rng) {
  Mat g = random_ginibre(d, d, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(d, d);
  Mat r = q.adjoint() * g;
  for (int i = 0; i < d; ++i) {
    cxd p = r(i, i);
    q.col(i) *= (std::abs(p) > 0) ? p / std::abs(p) : cxd(1, 0);
  }
  return q;
}

inline Vec random_state_vector(int d, Rng& rng) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.gaussian_cxd();
  return v / v.norm();
}

inline Mat random_density(int d, Rng& rng) {
  Mat g = random_ginibre(d, d, rng);
  Mat rho = g * g.adjoint();
  return rho / rho.trace().real();
}

/// Rotates v so its first component above the relative threshold is real
/// and positive.
inline Vec fix_phase(const Vec& v, double rel = 1e-9) {
  double scale = v.cwiseAbs().maxCoeff();
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > rel * scale) {
      cxd p = v(i) / std::abs(v(i));
      return v * std::conj(p);
    }
  }
  return v;
}

inline bool is_state(const Mat& rho, double tau = tol::psd) {
  if (!is_hermitian(rho)) return false;
  if (std::abs(rho.trace().real() - 1.0) > 1e-9) return false;
  Eigen::SelfAdjointEigenSolver<Mat> es((rho + rho.adjoint()) / 2.0);
  return es.eigenvalues().minCoeff() >= -tau;
}

}  // namespace decolab

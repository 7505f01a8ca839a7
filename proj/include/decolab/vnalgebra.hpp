#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "decolab/common.hpp"
#include "decolab/linops.hpp"

namespace decolab {

// ---------------------------------------------------------------------------
// Finite-dimensional von Neumann algebras, stored as orthonormal operator
// bases under the Hilbert-Schmidt inner product <A,B> = Tr(A† B).
// ---------------------------------------------------------------------------

struct OperatorAlgebra {
  Dims factors;                 // ambient tensor factorization
  std::vector<Mat> basis;       // HS-orthonormal spanning set
  std::vector<Mat> generators;  // adjoint-closed generating set

  int ambient_dim() const { return product(factors); }
  int dim() const { return static_cast<int>(basis.size()); }
  bool is_trivial() const { return dim() == 1; }
};

struct SubspaceDecomposition {
  Dims factors;
  std::vector<Mat> projectors;
  std::vector<int> labels;

  int size() const { return static_cast<int>(projectors.size()); }
};

struct Block {
  Mat central_projector;
  int left_dim = 1;
  int right_dim = 1;
  Mat isometry;  // (left_dim*right_dim) x ambient, rows map block to L⊗R
};

struct BlockStructure {
  Dims factors;
  std::vector<Block> blocks;
};

namespace detail {

/// Modified Gram-Schmidt with one re-orthogonalization pass. Returns true
/// if v had a component outside the current span and was appended.
inline bool add_to_span(std::vector<Mat>& basis, Mat v,
                        double tau = tol::rank) {
  double scale = std::max(1.0, v.norm());
  for (int pass = 0; pass < 2; ++pass)
    for (const Mat& b : basis) v -= hs_inner(b, v) * b;
  if (v.norm() <= tau * scale) return false;
  basis.push_back(v / v.norm());
  return true;
}

inline std::vector<Mat> orthonormalize(const std::vector<Mat>& ops,
                                       double tau = tol::rank) {
  std::vector<Mat> basis;
  for (const Mat& v : ops) add_to_span(basis, v, tau);
  return basis;
}

inline void check_same_ambient(const OperatorAlgebra& a,
                               const OperatorAlgebra& b) {
  if (a.ambient_dim() != b.ambient_dim())
    throw DimensionError("algebras live on different ambient spaces");
}

inline void cross_check_double_commutant(const OperatorAlgebra& a);

}  // namespace detail

inline OperatorAlgebra algebra_from_orthonormal(Dims factors,
                                                std::vector<Mat> basis) {
  OperatorAlgebra a;
  a.factors = std::move(factors);
  a.basis = basis;
  a.generators = std::move(basis);
  return a;
}

inline OperatorAlgebra trivial_algebra(Dims factors) {
  int d = product(factors);
  Mat id = Mat::Identity(d, d) / std::sqrt(static_cast<double>(d));
  return algebra_from_orthonormal(std::move(factors), {id});
}

inline OperatorAlgebra full_algebra(Dims factors) {
  int d = product(factors);
  std::vector<Mat> basis;
  basis.reserve(d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      Mat e = Mat::Zero(d, d);
      e(i, j) = 1;
      basis.push_back(std::move(e));
    }
  return algebra_from_orthonormal(std::move(factors), std::move(basis));
}

inline bool contains(const OperatorAlgebra& a, const Mat& m) {
  if (m.rows() != a.ambient_dim() || m.cols() != a.ambient_dim())
    throw DimensionError("operator does not match the algebra's ambient");
  Mat r = m;
  for (const Mat& b : a.basis) r -= hs_inner(b, m) * b;
  return r.norm() <= tol::rank * std::max(m.norm(), 1e-300);
}

/// Span equality through the Hilbert-Schmidt projectors onto the two spans:
/// equal dimensions plus residual-free containment of one orthonormal basis
/// in the other span. Residuals are compared directly so the check does not
/// lose half the available precision to squaring.
inline bool equals(const OperatorAlgebra& a, const OperatorAlgebra& b) {
  detail::check_same_ambient(a, b);
  if (a.dim() != b.dim()) return false;
  for (const Mat& x : a.basis) {
    Mat r = x;
    for (const Mat& y : b.basis) r -= hs_inner(y, x) * y;
    if (r.norm() >= tol::rank) return false;
  }
  return true;
}

/// Closure of seed ∪ {I} under adjoints, products and linear span.
inline OperatorAlgebra generate(const std::vector<Mat>& seeds, Dims factors) {
  const int d = product(factors);
  for (const Mat& s : seeds)
    if (s.rows() != d || s.cols() != d)
      throw DimensionError("seed operator does not match ambient dimension " +
                           std::to_string(d));
  OperatorAlgebra a;
  a.factors = std::move(factors);
  a.basis.push_back(Mat::Identity(d, d) / std::sqrt(static_cast<double>(d)));
  a.generators.push_back(Mat::Identity(d, d));
  for (const Mat& s : seeds) {
    detail::add_to_span(a.basis, s);
    detail::add_to_span(a.basis, s.adjoint());
    a.generators.push_back(s);
    a.generators.push_back(s.adjoint());
  }
  const int max_rounds = d * d + 1;
  for (int round = 0; round < max_rounds; ++round) {
    bool grew = false;
    const size_t snapshot = a.basis.size();
    for (size_t i = 0; i < snapshot; ++i) {
      grew |= detail::add_to_span(a.basis, a.basis[i].adjoint());
      for (size_t j = 0; j < snapshot; ++j)
        grew |= detail::add_to_span(a.basis, a.basis[i] * a.basis[j]);
    }
    if (!grew) break;
  }
  detail::cross_check_double_commutant(a);
  return a;
}

/// Commutant {M : [M, G] = 0 for all generators G}, via the kernel of the
/// stacked commutator superoperator over vectorized operators.
inline OperatorAlgebra commutant(const std::vector<Mat>& generators,
                                 Dims factors) {
  const int d = product(factors);
  std::vector<Mat> gens;
  for (const Mat& g : generators) {
    if (g.rows() != d || g.cols() != d)
      throw DimensionError("commutant generator dimension mismatch");
    double n = g.norm();
    if (n < 1e-300) continue;
    gens.push_back(g / n);
    gens.push_back(g.adjoint() / n);
  }
  if (gens.empty()) return full_algebra(std::move(factors));
  const int dd = d * d;
  Mat stacked(static_cast<int>(gens.size()) * dd, dd);
  Mat id = Mat::Identity(d, d);
  for (size_t k = 0; k < gens.size(); ++k) {
    // vec(GX - XG) = (I⊗G - Gᵀ⊗I) vec(X), column-major vec.
    stacked.block(static_cast<int>(k) * dd, 0, dd, dd) =
        kron_mat(id, gens[k]) - kron_mat(gens[k].transpose(), id);
  }
  Mat null_cols = kernel_basis(stacked);
  std::vector<Mat> basis;
  basis.reserve(null_cols.cols());
  for (int c = 0; c < null_cols.cols(); ++c) {
    Mat x = Eigen::Map<const Mat>(null_cols.col(c).data(), d, d);
    basis.push_back(std::move(x));
  }
  return algebra_from_orthonormal(std::move(factors), std::move(basis));
}

inline OperatorAlgebra commutant(const OperatorAlgebra& a) {
  return commutant(a.generators, a.factors);
}

/// Subspace intersection; for *-closed spans the result is again an algebra.
inline OperatorAlgebra intersect(const OperatorAlgebra& a,
                                 const OperatorAlgebra& b) {
  detail::check_same_ambient(a, b);
  const int d = a.ambient_dim();
  const int dd = d * d;
  Mat va(dd, a.dim()), vb(dd, b.dim());
  for (int i = 0; i < a.dim(); ++i)
    va.col(i) = Eigen::Map<const Vec>(a.basis[i].data(), dd);
  for (int i = 0; i < b.dim(); ++i)
    vb.col(i) = Eigen::Map<const Vec>(b.basis[i].data(), dd);
  Mat joint(dd, a.dim() + b.dim());
  joint.leftCols(a.dim()) = va;
  joint.rightCols(b.dim()) = -vb;
  Mat null_cols = kernel_basis(joint);
  std::vector<Mat> members;
  for (int c = 0; c < null_cols.cols(); ++c) {
    Vec x = va * null_cols.col(c).head(a.dim());
    members.push_back(Eigen::Map<const Mat>(x.data(), d, d));
  }
  OperatorAlgebra out;
  out.factors = a.factors;
  out.basis = detail::orthonormalize(members);
  if (out.basis.empty())
    throw InternalError("intersection of unital algebras lost the identity");
  out.generators = out.basis;
  return out;
}

/// The algebra generated by a and b together.
inline OperatorAlgebra join(const OperatorAlgebra& a,
                            const OperatorAlgebra& b) {
  detail::check_same_ambient(a, b);
  std::vector<Mat> seeds = a.basis;
  seeds.insert(seeds.end(), b.basis.begin(), b.basis.end());
  OperatorAlgebra out = generate(seeds, a.factors);
  out.generators = a.generators;
  out.generators.insert(out.generators.end(), b.generators.begin(),
                        b.generators.end());
  return out;
}

inline OperatorAlgebra center(const OperatorAlgebra& a) {
  return intersect(a, commutant(a));
}

namespace detail {

/// Two independent routes (span closure vs. double commutant) catch
/// tolerance failures; skipped where the stacked kernel would be large.
inline void cross_check_double_commutant(const OperatorAlgebra& a) {
  if (a.ambient_dim() > 16 || a.generators.size() > 48) return;
  OperatorAlgebra dc = commutant(commutant(a));
  if (!equals(dc, a))
    throw InternalError(
        "generate: span closure disagrees with the double commutant");
}

}  // namespace detail

/// Orthonormal basis of the Hermitian elements of an orthonormal span.
/// Solved as a real-linear kernel problem (coefficients c with
/// Y = sum_k (c_k + i c_{g+k}) B_k satisfying Y = Y†), which keeps the
/// Hermitian directions well-conditioned even when the given basis elements
/// are far from Hermitian themselves.
inline std::vector<Mat> hermitian_basis_of_span(const std::vector<Mat>& basis) {
  if (basis.empty()) return {};
  const int d = static_cast<int>(basis[0].rows());
  const int g = static_cast<int>(basis.size());
  const int dd = d * d;
  Eigen::MatrixXd constraints(2 * dd, 2 * g);
  for (int k = 0; k < g; ++k) {
    Mat dk = basis[k] - basis[k].adjoint();
    Mat dk_i = cxd(0, 1) * (basis[k] + basis[k].adjoint());
    Eigen::Map<const Eigen::VectorXd> re_k(
        reinterpret_cast<const double*>(dk.data()), 2 * dd);
    Eigen::Map<const Eigen::VectorXd> re_ki(
        reinterpret_cast<const double*>(dk_i.data()), 2 * dd);
    constraints.col(k) = re_k;
    constraints.col(g + k) = re_ki;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(constraints, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double cutoff = tol::rank * std::max(1.0, sv.size() ? sv(0) : 0.0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  std::vector<Mat> herm;
  for (int c = 2 * g - 1; c >= rank; --c) {
    Eigen::VectorXd coeff = svd.matrixV().col(c);
    Mat y = Mat::Zero(d, d);
    for (int k = 0; k < g; ++k)
      y += cxd(coeff(k), coeff(g + k)) * basis[k];
    herm.push_back((y + y.adjoint()) / 2.0);
  }
  return detail::orthonormalize(herm);
}

/// Real-orthonormal basis of the Hermitian elements of a; spans a over C.
inline std::vector<Mat> hermitian_basis(const OperatorAlgebra& a) {
  return hermitian_basis_of_span(a.basis);
}

/// Invariant checks for a freshly constructed algebra; used by tests and by
/// generate()'s double-commutant cross-check.
inline void validate_algebra(const OperatorAlgebra& a) {
  const int d = a.ambient_dim();
  if (!contains(a, Mat::Identity(d, d)))
    throw InternalError("algebra does not contain the identity");
  for (int i = 0; i < a.dim(); ++i) {
    if (!contains(a, a.basis[i].adjoint()))
      throw InternalError("algebra span is not adjoint-closed");
    for (int j = 0; j < a.dim(); ++j) {
      Mat p = a.basis[i] * a.basis[j];
      Mat r = p;
      for (const Mat& b : a.basis) r -= hs_inner(b, p) * b;
      if (r.norm() > tol::alg * std::max(1.0, p.norm()))
        throw InternalError("algebra span is not closed under products");
    }
    for (int j = 0; j < a.dim(); ++j) {
      cxd g = hs_inner(a.basis[i], a.basis[j]);
      double want = (i == j) ? 1.0 : 0.0;
      if (std::abs(g - want) > tol::orth)
        throw InternalError("algebra basis is not orthonormal");
    }
  }
}

namespace detail {

struct BlockSeed {
  Mat projector;
  std::vector<int> members;  // eigenvector indices
};

/// Deterministic ordering: descending subspace dimension, then the first
/// standard-basis index carrying projector weight, then a lexicographic
/// comparison of entries (larger first) to break exact-diagonal ties.
inline bool block_order(const Mat& pa, const Mat& pb) {
  int ra = static_cast<int>(std::lround(pa.trace().real()));
  int rb = static_cast<int>(std::lround(pb.trace().real()));
  if (ra != rb) return ra > rb;
  const int d = static_cast<int>(pa.rows());
  auto first_weight = [&](const Mat& p) {
    for (int j = 0; j < d; ++j)
      if (p(j, j).real() > 1e-9) return j;
    return d;
  };
  int fa = first_weight(pa), fb = first_weight(pb);
  if (fa != fb) return fa < fb;
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      if (std::abs(pa(r, c).real() - pb(r, c).real()) > 1e-9)
        return pa(r, c).real() > pb(r, c).real();
      if (std::abs(pa(r, c).imag() - pb(r, c).imag()) > 1e-9)
        return pa(r, c).imag() > pb(r, c).imag();
    }
  return false;
}

inline Mat random_hermitian_combination(const std::vector<Mat>& herm,
                                        Rng& rng) {
  Mat g = Mat::Zero(herm[0].rows(), herm[0].cols());
  for (const Mat& h : herm) g += rng.gaussian() * h;
  return g;
}

}  // namespace detail

/// Artin-Wedderburn block structure. Minimal central projectors come from
/// clustering the spectrum of a generic Hermitian central element; the
/// per-block isometry rotates the block onto an explicit L⊗R product space.
inline BlockStructure block_structure(const OperatorAlgebra& a,
                                      std::uint64_t seed = kDefaultSeed) {
  const int d = a.ambient_dim();
  OperatorAlgebra z = center(a);
  std::vector<Mat> herm = hermitian_basis(z);
  if (static_cast<int>(herm.size()) != z.dim())
    throw InternalError("center is not spanned by its Hermitian elements");

  std::vector<Mat> projectors;
  bool ok = false;
  std::string failure = "clustering ambiguity";
  for (int attempt = 0; attempt < 5 && !ok; ++attempt) {
    Rng rng(seed + 0x9e3779b9u * attempt);
    Mat g = detail::random_hermitian_combination(herm, rng);
    HermitianEig eig = hermitian_eig_mat(g);
    EigenvalueClusters clusters = cluster_eigenvalues(eig.values);
    if (clusters.ambiguous) continue;
    if (static_cast<int>(clusters.ranges.size()) != z.dim()) continue;
    projectors.clear();
    ok = true;
    for (auto [first, last] : clusters.ranges) {
      Mat p = Mat::Zero(d, d);
      for (int k = first; k < last; ++k)
        p += eig.vectors.col(k) * eig.vectors.col(k).adjoint();
      if (!contains(z, p)) {
        ok = false;
        failure = "central projector fell outside the centre";
        break;
      }
      projectors.push_back(std::move(p));
    }
  }
  if (!ok)
    throw NumericalError(
        "block_structure: " + failure +
        " after 5 resamples; review the clustering tolerance (tol::gap)");

  std::sort(projectors.begin(), projectors.end(), detail::block_order);

  BlockStructure out;
  out.factors = a.factors;
  int total = 0;
  for (const Mat& p : projectors) {
    Block blk;
    blk.central_projector = p;
    HermitianEig peig = hermitian_eig_mat(p);
    int di = 0;
    while (di < peig.values.size() && peig.values(di) > 0.5) ++di;
    Mat q = peig.vectors.leftCols(di);  // d x di block basis

    // Span of the block-restricted algebra has dimension left_dim^2.
    std::vector<Mat> restricted;
    for (const Mat& b : a.basis) restricted.push_back(q.adjoint() * b * q);
    restricted = detail::orthonormalize(restricted);
    int nl = static_cast<int>(std::lround(std::sqrt(
        static_cast<double>(restricted.size()))));
    if (nl * nl != static_cast<int>(restricted.size()) || di % nl != 0)
      throw InternalError("block-restricted algebra is not a factor");
    int nr = di / nl;
    blk.left_dim = nl;
    blk.right_dim = nr;

    // Matrix-unit construction of the L⊗R frame inside the block.
    std::vector<Vec> frame;  // nl*nr ambient vectors, index k*nr + r
    bool built = false;
    for (int attempt = 0; attempt < 5 && !built; ++attempt) {
      Rng rng((seed ^ (0xabcdefULL + 0x9e3779b9u * attempt)) + total);
      std::vector<Mat> herm_res = hermitian_basis_of_span(restricted);
      Mat g = detail::random_hermitian_combination(herm_res, rng);
      HermitianEig geig = hermitian_eig_mat(g);
      EigenvalueClusters cl = cluster_eigenvalues(geig.values);
      if (cl.ambiguous || static_cast<int>(cl.ranges.size()) != nl) continue;
      std::vector<Mat> minimal;
      bool sizes_ok = true;
      for (auto [first, last] : cl.ranges) {
        if (last - first != nr) sizes_ok = false;
        Mat p = Mat::Zero(di, di);
        for (int k = first; k < last; ++k)
          p += geig.vectors.col(k) * geig.vectors.col(k).adjoint();
        minimal.push_back(std::move(p));
      }
      if (!sizes_ok) continue;
      Mat probe = detail::random_hermitian_combination(herm_res, rng);
      HermitianEig p0 = hermitian_eig_mat(minimal[0]);
      Mat e0 = p0.vectors.leftCols(nr);  // ONB of range(p_0)
      frame.clear();
      built = true;
      for (int k = 0; k < nl && built; ++k) {
        Mat u;
        if (k == 0) {
          u = minimal[0];
        } else {
          Mat t = minimal[k] * probe * minimal[0];
          double s = std::sqrt(std::max(
              0.0, (t.adjoint() * t).trace().real() / nr));
          if (s < 1e-10) {
            built = false;
            break;
          }
          u = t / s;
          if ((u.adjoint() * u - minimal[0]).norm() > tol::alg * di ||
              (u * u.adjoint() - minimal[k]).norm() > tol::alg * di) {
            built = false;
            break;
          }
        }
        for (int r = 0; r < nr; ++r) frame.push_back(q * (u * e0.col(r)));
      }
    }
    if (!built)
      throw InternalError("block_structure: matrix-unit construction failed");

    Mat w(nl * nr, d);
    for (int i = 0; i < nl * nr; ++i) w.row(i) = frame[i].adjoint();
    if ((w * w.adjoint() - Mat::Identity(nl * nr, nl * nr)).norm() >
        tol::orth * nl * nr)
      throw InternalError("block_structure: isometry frame not orthonormal");
    blk.isometry = std::move(w);
    total += nl * nr;
    out.blocks.push_back(std::move(blk));
  }
  if (total != d)
    throw InternalError("block dimensions do not add up to the ambient");
  return out;
}

inline SubspaceDecomposition subspace_decomposition(const BlockStructure& bs) {
  SubspaceDecomposition out;
  out.factors = bs.factors;
  for (size_t i = 0; i < bs.blocks.size(); ++i) {
    out.projectors.push_back(bs.blocks[i].central_projector);
    out.labels.push_back(static_cast<int>(i));
  }
  return out;
}

inline void validate_decomposition(const SubspaceDecomposition& dec) {
  if (dec.projectors.empty())
    throw InternalError("empty subspace decomposition");
  const int d = static_cast<int>(dec.projectors[0].rows());
  Mat sum = Mat::Zero(d, d);
  for (size_t i = 0; i < dec.projectors.size(); ++i) {
    const Mat& p = dec.projectors[i];
    if ((p - p.adjoint()).norm() > tol::alg * d ||
        (p * p - p).norm() > tol::alg * d)
      throw InternalError("decomposition element is not a projector");
    for (size_t j = i + 1; j < dec.projectors.size(); ++j)
      if ((p * dec.projectors[j]).norm() > tol::alg * d)
        throw InternalError("decomposition projectors are not orthogonal");
    sum += p;
  }
  if ((sum - Mat::Identity(d, d)).norm() > tol::alg * d)
    throw InternalError("decomposition projectors do not sum to identity");
}

/// Unit vector spanning a rank-1 projector, with the fixed phase convention.
inline Vec projector_unit_vector(const Mat& p) {
  HermitianEig eig = hermitian_eig_mat(p);
  if (eig.values.size() < 1 || std::abs(eig.values(0) - 1.0) > 1e-6 ||
      (eig.values.size() > 1 && std::abs(eig.values(1)) > 1e-6))
    throw NumericalError("projector is not rank one");
  return fix_phase(eig.vectors.col(0));
}

}  // namespace decolab

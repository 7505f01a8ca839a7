#include <catch2/catch_amalgamated.hpp>

#include "decolab/linops.hpp"

using namespace decolab;

namespace {

Operator qubit_op(const Mat& m) { return Operator::square(m, {2}); }

/// Quadruple-loop tensor product, independent of the library path.
Mat naive_kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      for (int k = 0; k < b.rows(); ++k)
        for (int l = 0; l < b.cols(); ++l)
          out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

Vec basis_ket(int d, int k) {
  Vec v = Vec::Zero(d);
  v(k) = 1;
  return v;
}

}  // namespace

TEST_CASE("kron basics", "[linops]") {
  Mat i2 = identity_mat(2);
  CHECK((kron(qubit_op(i2), qubit_op(i2)).m - identity_mat(4)).norm() == 0.0);

  Mat zz = kron(qubit_op(pauli_z()), qubit_op(pauli_z())).m;
  Vec ket01 = naive_kron(basis_ket(2, 0), basis_ket(2, 1));
  CHECK((zz * ket01 + ket01).norm() < 1e-14);

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Mat a = random_ginibre(2, 2, rng), b = random_ginibre(2, 2, rng);
    Mat c = random_ginibre(2, 2, rng), d = random_ginibre(2, 2, rng);
    Mat lhs = kron_mat(a, b) * kron_mat(c, d);
    Mat rhs = kron_mat(a * c, b * d);
    CHECK((lhs - rhs).norm() < 1e-12);
    CHECK((kron_mat(a, b) - naive_kron(a, b)).norm() == 0.0);
  }

  Operator ab = kron(qubit_op(pauli_x()), qubit_op(pauli_y()));
  CHECK(ab.row_factors == Dims{2, 2});

  // Associativity up to factor-list flattening.
  Rng rng2(12);
  for (int trial = 0; trial < 10; ++trial) {
    Mat a = random_ginibre(2, 2, rng2), b = random_ginibre(3, 3, rng2),
        c = random_ginibre(2, 2, rng2);
    Mat lhs = kron_mat(kron_mat(a, b), c);
    Mat rhs = kron_mat(a, kron_mat(b, c));
    CHECK((lhs - rhs).norm() < 1e-12);
  }
}

TEST_CASE("permute_subsystems", "[linops]") {
  Operator xz = kron(qubit_op(pauli_x()), qubit_op(pauli_z()));
  Operator zx = kron(qubit_op(pauli_z()), qubit_op(pauli_x()));
  Operator swapped = permute_subsystems(xz, {1, 0});
  CHECK((swapped.m - zx.m).norm() < 1e-14);

  CHECK((permute_subsystems(xz, {0, 1}).m - xz.m).norm() == 0.0);

  Rng rng(5);
  Mat a = random_ginibre(4, 4, rng);
  Operator op = Operator::square(a, {2, 2});
  Operator twice = permute_subsystems(permute_subsystems(op, {1, 0}), {1, 0});
  CHECK((twice.m - a).norm() == 0.0);

  // Spectrum is preserved.
  Mat h = random_hermitian(8, rng);
  Operator hop = Operator::square(h, {2, 2, 2});
  Operator perm = permute_subsystems(hop, {2, 0, 1});
  RVec ev1 = hermitian_eig(hop).values;
  RVec ev2 = hermitian_eig(perm).values;
  CHECK((ev1 - ev2).cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(permute_subsystems(op, {0}), DimensionError);
  CHECK_THROWS_AS(permute_subsystems(op, {0, 0}), DimensionError);
}

TEST_CASE("partial_trace", "[linops]") {
  Vec ket00 = naive_kron(basis_ket(2, 0), basis_ket(2, 0));
  Operator rho00 = Operator::square(projector(ket00), {2, 2});
  Mat reduced = partial_trace(rho00, {0}).m;
  CHECK((reduced - projector(basis_ket(2, 0))).norm() < 1e-14);

  Vec bell = (naive_kron(basis_ket(2, 0), basis_ket(2, 0)) +
              naive_kron(basis_ket(2, 1), basis_ket(2, 1))) /
             std::sqrt(2.0);
  Mat bell_red = partial_trace(Operator::square(projector(bell), {2, 2}), {0}).m;
  CHECK((bell_red - identity_mat(2) / 2.0).norm() < 1e-14);

  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    Mat a = random_ginibre(4, 4, rng);
    Operator op = Operator::square(a, {2, 2});
    CHECK(std::abs(partial_trace(op, {0}).m.trace() - a.trace()) < 1e-12);
    CHECK(std::abs(partial_trace(op, {1}).m.trace() - a.trace()) < 1e-12);
    CHECK(std::abs(partial_trace(op, {}).m(0, 0) - a.trace()) < 1e-12);
  }

  // Tr_right(a ⊗ b) = Tr(b) a.
  for (int trial = 0; trial < 20; ++trial) {
    Mat a = random_ginibre(2, 2, rng), b = random_ginibre(3, 3, rng);
    Operator op = Operator::square(kron_mat(a, b), {2, 3});
    CHECK((partial_trace(op, {0}).m - b.trace() * a).norm() < 1e-12);
  }

  CHECK_THROWS_AS(
      partial_trace(Operator::square(identity_mat(4), {2, 2}), {2}),
      DimensionError);
}

TEST_CASE("hermitian_eig", "[linops]") {
  HermitianEig ez = hermitian_eig(qubit_op(pauli_z()));
  CHECK(ez.values(0) == Catch::Approx(1.0));
  CHECK(ez.values(1) == Catch::Approx(-1.0));
  CHECK(std::abs(ez.vectors.col(0)(0)) == Catch::Approx(1.0));
  CHECK(std::abs(ez.vectors.col(1)(1)) == Catch::Approx(1.0));

  HermitianEig ex = hermitian_eig(qubit_op(pauli_x()));
  Vec plus = (basis_ket(2, 0) + basis_ket(2, 1)) / std::sqrt(2.0);
  Vec minus = (basis_ket(2, 0) - basis_ket(2, 1)) / std::sqrt(2.0);
  CHECK(std::abs(plus.adjoint().dot(ex.vectors.col(0))) ==
        Catch::Approx(1.0).margin(1e-12));
  CHECK(std::abs(minus.adjoint().dot(ex.vectors.col(1))) ==
        Catch::Approx(1.0).margin(1e-12));

  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    Mat h = random_hermitian(8, rng);
    HermitianEig eig = hermitian_eig(Operator::square(h, {8}));
    Mat recon = eig.vectors * eig.values.asDiagonal() * eig.vectors.adjoint();
    CHECK((recon - h).norm() < 1e-10);
    CHECK((eig.vectors.adjoint() * eig.vectors - identity_mat(8)).norm() <
          1e-12);
    for (int i = 1; i < eig.values.size(); ++i)
      CHECK(eig.values(i - 1) >= eig.values(i));
  }

  Mat notherm = random_ginibre(3, 3, rng);
  notherm(0, 1) += cxd(0, 5);
  CHECK_THROWS_AS(hermitian_eig(Operator::square(notherm, {3})),
                  NumericalError);
  CHECK_THROWS_WITH(hermitian_eig(Operator::square(notherm, {3})),
                    Catch::Matchers::ContainsSubstring("tolerance"));
}

TEST_CASE("kernel_basis", "[linops]") {
  Mat d10 = Mat::Zero(2, 2);
  d10(0, 0) = 1;
  Mat k = kernel_basis(d10);
  REQUIRE(k.cols() == 1);
  CHECK(std::abs(k(1, 0)) == Catch::Approx(1.0));

  Rng rng(17);
  Mat inv = random_unitary(4, rng);
  CHECK(kernel_basis(inv).cols() == 0);

  // Rank-nullity on random rank-deficient matrices.
  for (int trial = 0; trial < 20; ++trial) {
    int d = 6, r = 1 + rng.index(4);
    Mat m = random_ginibre(d, r, rng) * random_ginibre(r, d, rng);
    Mat kb = kernel_basis(m);
    CHECK(kb.cols() == d - r);
    CHECK((m * kb).norm() < 1e-9);
    CHECK((kb.adjoint() * kb - identity_mat(d - r)).norm() < 1e-12);
  }
}

TEST_CASE("exp_i_hermitian", "[linops]") {
  Mat u = exp_i_hermitian(qubit_op(pauli_z()), M_PI / 2).m;
  CHECK((u - cxd(0, -1) * pauli_z()).norm() < 1e-14);

  Mat ux = exp_i_hermitian(qubit_op(pauli_x()), M_PI / 2).m;
  Vec out = ux * basis_ket(2, 0);
  CHECK((out - cxd(0, -1) * basis_ket(2, 1)).norm() < 1e-14);

  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    Mat h = random_hermitian(4, rng);
    Operator hop = Operator::square(h, {4});
    double t = 10 * (rng.uniform() - 0.5);
    Mat a = exp_i_hermitian(hop, t).m;
    Mat b = exp_i_hermitian(hop, -t).m;
    CHECK((a * b - identity_mat(4)).norm() < 1e-10);

    double t1 = 5 * (rng.uniform() - 0.5), t2 = 5 * (rng.uniform() - 0.5);
    Mat lhs = exp_i_hermitian(hop, t1 + t2).m;
    Mat rhs = exp_i_hermitian(hop, t1).m * exp_i_hermitian(hop, t2).m;
    CHECK((lhs - rhs).norm() < 1e-9);
  }

  CHECK_THROWS_AS(exp_i_hermitian(qubit_op(random_ginibre(2, 2, rng)), 1.0),
                  NumericalError);
}

TEST_CASE("embedded gate application matches dense oracle", "[linops]") {
  Rng rng(23);
  Dims dims = {2, 3, 2};
  int d = product(dims);
  for (auto pos : std::vector<std::vector<int>>{{0}, {1}, {2}, {0, 2}, {2, 0},
                                                {1, 2}, {0, 1, 2}}) {
    int dg = 1;
    for (int p : pos) dg *= dims[p];
    Mat g = random_unitary(dg, rng);
    Mat x = random_ginibre(d, d, rng);
    Mat dense = embed_mat(g, dims, pos);
    EmbedPlan plan = make_embed_plan(dims, pos);

    Mat via_plan = conjugate_embedded(x, g, plan);
    CHECK((via_plan - dense * x * dense.adjoint()).norm() < 1e-11);

    Mat pulled = conjugate_embedded(x, g, plan, /*inverse=*/true);
    CHECK((pulled - dense.adjoint() * x * dense).norm() < 1e-11);

    Mat left = x;
    embedded_left_mul(left, g, plan);
    CHECK((left - dense * x).norm() < 1e-11);

    Mat right = x;
    embedded_right_mul(right, g, plan);
    CHECK((right - x * dense).norm() < 1e-11);
  }
}

TEST_CASE("kernel accumulator matches direct stacking", "[linops]") {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 6;
    Mat a = random_ginibre(4, n, rng);
    Mat b = random_ginibre(5, n, rng) * 0.0;  // rows of zeros keep rank low
    Mat c = random_ginibre(3, n, rng);
    Mat stacked(12, n);
    stacked << a, b, c;
    KernelAccumulator acc(n);
    acc.add_rows(a);
    acc.add_rows(b);
    acc.add_rows(c);
    Mat k1 = acc.kernel();
    Mat k2 = kernel_basis(stacked);
    REQUIRE(k1.cols() == k2.cols());
    CHECK((stacked * k1).norm() < 1e-10);
  }
}

TEST_CASE("standard gates", "[linops]") {
  CHECK(is_unitary(cnot_mat()));
  CHECK(is_unitary(hadamard_mat()));
  CHECK(is_unitary(swap_mat(2, 2)));
  CHECK(is_unitary(swap_mat(2, 3)));

  // CNOT |10> = |11>.
  Vec in = naive_kron(basis_ket(2, 1), basis_ket(2, 0));
  Vec out = naive_kron(basis_ket(2, 1), basis_ket(2, 1));
  CHECK((cnot_mat() * in - out).norm() < 1e-14);

  // controlled(I, X) equals CNOT.
  CHECK((controlled_mat({identity_mat(2), pauli_x()}) - cnot_mat()).norm() ==
        0.0);

  // SWAP on 2x3: swap_mat maps |i>|j> -> |j>|i>.
  Mat s = swap_mat(2, 3);
  Vec v = naive_kron(basis_ket(2, 1), basis_ket(3, 2));
  Vec w = naive_kron(basis_ket(3, 2), basis_ket(2, 1));
  CHECK((s * v - w).norm() < 1e-14);
}

TEST_CASE("operator validation", "[linops]") {
  CHECK_THROWS_AS(Operator(identity_mat(4), {2}, {2, 2}), DimensionError);
  Mat bad = identity_mat(2);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(Operator::square(bad, {2}), NumericalError);
}

#include <catch2/catch_amalgamated.hpp>

#include "decolab/linops.hpp"
#include "decolab/vnalgebra.hpp"

using namespace decolab;

namespace {

OperatorAlgebra pauli_span(const std::vector<Mat>& paulis, Dims factors) {
  std::vector<Mat> basis;
  for (const Mat& p : paulis) basis.push_back(p / p.norm());
  return algebra_from_orthonormal(std::move(factors), std::move(basis));
}

Mat xx() { return kron_mat(pauli_x(), pauli_x()); }
Mat yx() { return kron_mat(pauli_y(), pauli_x()); }
Mat zi() { return kron_mat(pauli_z(), identity_mat(2)); }
Mat ix() { return kron_mat(identity_mat(2), pauli_x()); }
Mat zz() { return kron_mat(pauli_z(), pauli_z()); }

}  // namespace

TEST_CASE("generate", "[vnalgebra]") {
  OperatorAlgebra za = generate({pauli_z()}, {2});
  CHECK(za.dim() == 2);
  CHECK(contains(za, identity_mat(2)));
  CHECK(contains(za, pauli_z()));
  CHECK_FALSE(contains(za, pauli_x()));

  CHECK(generate({pauli_x(), pauli_z()}, {2}).dim() == 4);
  OperatorAlgebra none = generate({}, {2});
  CHECK(none.dim() == 1);
  CHECK(contains(none, identity_mat(2)));

  CHECK_THROWS_AS(generate({identity_mat(3)}, {2}), DimensionError);

  // Idempotence: generate(a.basis) = a.
  OperatorAlgebra again = generate(za.basis, {2});
  CHECK(equals(again, za));

  validate_algebra(za);
  validate_algebra(generate({pauli_x(), pauli_z()}, {2}));
}

TEST_CASE("commutant", "[vnalgebra]") {
  OperatorAlgebra cfull = commutant(full_algebra({4}));
  CHECK(cfull.dim() == 1);

  OperatorAlgebra cz = commutant({pauli_z()}, {2});
  CHECK(cz.dim() == 2);
  CHECK(equals(cz, generate({pauli_z()}, {2})));

  // commutant({X_F, Z_S Z_F}) = span{I, Z_S, X_S X_F, Y_S X_F}.
  OperatorAlgebra c = commutant({ix(), zz()}, {2, 2});
  OperatorAlgebra expected =
      pauli_span({identity_mat(4), zi(), xx(), yx()}, {2, 2});
  CHECK(c.dim() == 4);
  CHECK(equals(c, expected));

  // Its system-local part is the algebra generated by Z_S.
  OperatorAlgebra s_local = pauli_span({identity_mat(4), zi()}, {2, 2});
  OperatorAlgebra inter = intersect(c, s_local);
  CHECK(inter.dim() == 2);
  CHECK(contains(inter, zi()));
}

TEST_CASE("commutant agrees when restricted to Hermitian generators",
          "[vnalgebra]") {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    Mat g1 = random_ginibre(4, 4, rng);
    Mat g2 = random_ginibre(4, 4, rng);
    OperatorAlgebra full_gens = commutant({g1, g2}, {2, 2});
    OperatorAlgebra herm_gens = commutant(
        {(g1 + g1.adjoint()) / 2.0, cxd(0, 1) * (g1 - g1.adjoint()) / 2.0,
         (g2 + g2.adjoint()) / 2.0, cxd(0, 1) * (g2 - g2.adjoint()) / 2.0},
        {2, 2});
    CHECK(equals(full_gens, herm_gens));
  }
}

TEST_CASE("center", "[vnalgebra]") {
  CHECK(center(full_algebra({2, 2})).dim() == 1);

  OperatorAlgebra za = generate({pauli_z()}, {2});
  CHECK(equals(center(za), za));

  // M2 ⊕ M1 block algebra on C^3.
  std::vector<Mat> seeds;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      Mat e = Mat::Zero(3, 3);
      e(i, j) = 1;
      seeds.push_back(e);
    }
  OperatorAlgebra blockalg = generate(seeds, {3});
  CHECK(blockalg.dim() == 5);
  OperatorAlgebra z = center(blockalg);
  CHECK(z.dim() == 2);
  Mat p2 = Mat::Zero(3, 3);
  p2(0, 0) = p2(1, 1) = 1;
  Mat p1 = Mat::Zero(3, 3);
  p1(2, 2) = 1;
  CHECK(contains(z, p2));
  CHECK(contains(z, p1));

  // Center elements commute with the whole algebra.
  for (const Mat& c : z.basis)
    for (const Mat& b : blockalg.basis) CHECK(comm(c, b).norm() < tol::alg);
}

TEST_CASE("intersect and join", "[vnalgebra]") {
  OperatorAlgebra full = full_algebra({2});
  OperatorAlgebra triv = trivial_algebra({2});
  OperatorAlgebra za = generate({pauli_z()}, {2});
  OperatorAlgebra xa = generate({pauli_x()}, {2});

  CHECK(equals(intersect(za, za), za));
  CHECK(equals(intersect(full, triv), triv));
  CHECK(equals(intersect(za, xa), triv));

  CHECK(equals(join(xa, za), full));
  CHECK(equals(join(za, triv), za));

  // Disjoint tensor factors: dimensions multiply.
  OperatorAlgebra a0 = generate({zi()}, {2, 2});
  OperatorAlgebra a1 = generate({ix()}, {2, 2});
  CHECK(join(a0, a1).dim() == 4);
  OperatorAlgebra f0 = generate({zi(), kron_mat(pauli_x(), identity_mat(2))},
                                {2, 2});
  OperatorAlgebra f1 = generate({ix(), kron_mat(identity_mat(2), pauli_z())},
                                {2, 2});
  CHECK(f0.dim() == 4);
  CHECK(join(f0, f1).dim() == 16);

  CHECK_THROWS_AS(intersect(generate({}, {2}), generate({}, {3})),
                  DimensionError);
}

TEST_CASE("equals and contains", "[vnalgebra]") {
  CHECK(equals(generate({pauli_z()}, {2}), commutant({pauli_z()}, {2})));
  Rng rng(37);
  OperatorAlgebra full = full_algebra({2, 2});
  for (int trial = 0; trial < 5; ++trial)
    CHECK(contains(full, random_ginibre(4, 4, rng)));
  CHECK_FALSE(contains(generate({pauli_z()}, {2}), pauli_x()));
}

TEST_CASE("double commutant idempotence", "[vnalgebra]") {
  Rng rng(41);
  for (int trial = 0; trial < 8; ++trial) {
    int nseeds = 1 + rng.index(2);
    std::vector<Mat> seeds;
    for (int s = 0; s < nseeds; ++s) seeds.push_back(random_ginibre(4, 4, rng));
    OperatorAlgebra a = generate(seeds, {2, 2});
    CHECK(equals(commutant(commutant(a)), a));
  }
  // Projector-generated algebra exercises the degenerate-spectrum path.
  Mat p = Mat::Zero(4, 4);
  p(0, 0) = p(1, 1) = 1;
  OperatorAlgebra a = generate({p}, {2, 2});
  CHECK(equals(commutant(commutant(a)), a));
}

TEST_CASE("hermitian span", "[vnalgebra]") {
  Rng rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    OperatorAlgebra a = generate({random_ginibre(4, 4, rng)}, {2, 2});
    std::vector<Mat> herm = hermitian_basis(a);
    CHECK(static_cast<int>(herm.size()) == a.dim());
    for (const Mat& h : herm) {
      CHECK((h - h.adjoint()).norm() < 1e-10);
      CHECK(contains(a, h));
    }
  }
}

TEST_CASE("block_structure qubit diagonal", "[vnalgebra]") {
  BlockStructure bs = block_structure(generate({pauli_z()}, {2}));
  REQUIRE(bs.blocks.size() == 2);
  CHECK(bs.blocks[0].left_dim == 1);
  CHECK(bs.blocks[0].right_dim == 1);
  // Deterministic order: |0><0| block first.
  CHECK(bs.blocks[0].central_projector(0, 0).real() ==
        Catch::Approx(1.0).margin(1e-10));
  CHECK(bs.blocks[1].central_projector(1, 1).real() ==
        Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("block_structure trivial and full", "[vnalgebra]") {
  BlockStructure triv = block_structure(trivial_algebra({4}));
  REQUIRE(triv.blocks.size() == 1);
  CHECK(triv.blocks[0].left_dim == 1);
  CHECK(triv.blocks[0].right_dim == 4);

  BlockStructure full = block_structure(full_algebra({4}));
  REQUIRE(full.blocks.size() == 1);
  CHECK(full.blocks[0].left_dim == 4);
  CHECK(full.blocks[0].right_dim == 1);
}

TEST_CASE("block_structure M2+M1 with isometry check", "[vnalgebra]") {
  std::vector<Mat> seeds;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      Mat e = Mat::Zero(3, 3);
      e(i, j) = 1;
      seeds.push_back(e);
    }
  OperatorAlgebra a = generate(seeds, {3});
  BlockStructure bs = block_structure(a);
  REQUIRE(bs.blocks.size() == 2);
  CHECK(bs.blocks[0].left_dim == 2);
  CHECK(bs.blocks[0].right_dim == 1);
  CHECK(bs.blocks[1].left_dim == 1);
  CHECK(bs.blocks[1].right_dim == 1);

  // Conjugating by the isometry yields L(H_L) ⊗ I_R on each block.
  for (const Block& blk : bs.blocks) {
    int nl = blk.left_dim, nr = blk.right_dim;
    std::vector<Mat> lefts;
    for (const Mat& b : a.basis) {
      Mat c = blk.isometry * b * blk.isometry.adjoint();
      Mat left = partial_trace_mat(c, {nl, nr}, {0}) / nr;
      CHECK((c - kron_mat(left, identity_mat(nr))).norm() < tol::alg * 10);
      lefts.push_back(left);
    }
    CHECK(static_cast<int>(detail::orthonormalize(lefts).size()) == nl * nl);
  }

  SubspaceDecomposition dec = subspace_decomposition(bs);
  validate_decomposition(dec);
}

TEST_CASE("block_structure on entangled-basis commutative algebra",
          "[vnalgebra]") {
  // Algebra generated by a projector onto an entangled state.
  Vec bell(4);
  bell << 1 / std::sqrt(2.0), 0, 0, 1 / std::sqrt(2.0);
  OperatorAlgebra a = generate({projector(bell)}, {2, 2});
  CHECK(a.dim() == 2);
  BlockStructure bs = block_structure(a);
  REQUIRE(bs.blocks.size() == 2);
  // Ordering: the rank-3 complement block first (larger subspace).
  CHECK(bs.blocks[0].right_dim == 3);
  CHECK(bs.blocks[1].right_dim == 1);
  CHECK((bs.blocks[1].central_projector - projector(bell)).norm() < 1e-9);
}

#include <catch2/catch_amalgamated.hpp>

#include "decolab/hamiltonian.hpp"

using namespace decolab;

namespace {

HamiltonianModel zz_model() {
  return HamiltonianModel(kron_mat(pauli_z(), pauli_z()), 2, 2);
}

HamiltonianModel local_z_model() {
  return HamiltonianModel(kron_mat(pauli_z(), identity_mat(2)), 2, 2);
}

Vec ket(int d, int k) {
  Vec v = Vec::Zero(d);
  v(k) = 1;
  return v;
}

}  // namespace

TEST_CASE("model splitting", "[hamiltonian]") {
  Rng rng(83);
  for (int trial = 0; trial < 10; ++trial) {
    HamiltonianModel m(random_hermitian(4, rng), 2, 2);
    CHECK((m.h - kron_mat(m.h_local, identity_mat(2)) - m.h_int).norm() <
          1e-12);
    CHECK(partial_trace_mat(m.h_int, {2, 2}, {0}).norm() < tol::alg);
    CHECK(is_hermitian(m.h_local));
  }
  CHECK_THROWS_AS(HamiltonianModel(random_ginibre(4, 4, rng), 2, 2),
                  NumericalError);
  CHECK_THROWS_AS(HamiltonianModel(identity_mat(4), 2, 3), DimensionError);
}

TEST_CASE("pacc_h fixed point", "[hamiltonian]") {
  CHECK(equals(pacc_h(zz_model()), generate({pauli_z()}, {2})));
  CHECK(equals(pacc_h(local_z_model()), full_algebra({2})));

  HamiltonianModel xxzz(
      kron_mat(pauli_x(), pauli_x()) + kron_mat(pauli_z(), pauli_z()), 2, 2);
  CHECK(equals(pacc_h(xxzz), trivial_algebra({2})));
}

TEST_CASE("acc dec for benchmark Hamiltonians", "[hamiltonian]") {
  HamiltonianDecoherence zz = dec_h(zz_model());
  OperatorAlgebra zalg = generate({pauli_z()}, {2});
  CHECK(equals(zz.acc, zalg));
  CHECK(equals(zz.dec, zalg));
  REQUIRE(zz.decomposition.size() == 2);

  HamiltonianDecoherence lz = dec_h(local_z_model());
  CHECK(equals(lz.acc, trivial_algebra({2})));
  CHECK(equals(lz.dec, trivial_algebra({2})));

  // Nondegenerate M_S ⊗ N_F with N_F not proportional to I: maximally
  // decohering; with N_F = I it is not decohering at all.
  Rng rng(89);
  Mat ms = random_hermitian(2, rng);
  HamiltonianModel vn(kron_mat(ms, pauli_x()), 2, 2);
  CHECK(dec_h(vn).dec.dim() == 2);
  HamiltonianModel vn_id(kron_mat(ms, identity_mat(2)), 2, 2);
  CHECK(dec_h(vn_id).dec.dim() == 1);
}

TEST_CASE("robust_algebra", "[hamiltonian]") {
  OperatorAlgebra zalg = generate({pauli_z()}, {2});
  CHECK(equals(robust_algebra(zz_model()), zalg));
  CHECK(equals(robust_algebra(HamiltonianModel(Mat::Zero(4, 4), 2, 2)),
               full_algebra({2})));

  // H = Z_S ⊗ I: robust is <Z_S> while pacc is all of S.
  CHECK(equals(robust_algebra(local_z_model()), zalg));
  CHECK(equals(pacc_h(local_z_model()), full_algebra({2})));
}

TEST_CASE("rotating frame robustness", "[hamiltonian]") {
  CHECK(equals(rotating_frame_robust(local_z_model()), full_algebra({2})));
  CHECK(equals(rotating_frame_robust(zz_model()), generate({pauli_z()}, {2})));

  // Thm C.2: pacc_h = rotating-frame robustness, on random Hamiltonians.
  Rng rng(97);
  for (int trial = 0; trial < 10; ++trial) {
    HamiltonianModel m(random_hermitian(4, rng), 2, 2);
    CHECK(equals(pacc_h(m), rotating_frame_robust(m)));
  }
}

TEST_CASE("dec = acc ∩ robust", "[hamiltonian]") {
  Rng rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    HamiltonianModel m(random_hermitian(4, rng), 2, 2);
    HamiltonianDecoherence an = dec_h(m);
    CHECK(equals(an.dec, intersect(an.acc, robust_algebra(m))));
  }
  HamiltonianDecoherence lz = dec_h(local_z_model());
  CHECK(equals(lz.dec, intersect(lz.acc, robust_algebra(local_z_model()))));
}

TEST_CASE("consistency with discrete-time pacc", "[hamiltonian]") {
  Rng rng(103);
  std::vector<double> times = {0.1, 0.7, 1.3, M_PI};
  for (int trial = 0; trial < 5; ++trial) {
    HamiltonianModel m(random_hermitian(4, rng), 2, 2);
    OperatorAlgebra cont = pacc_h(m);
    OperatorAlgebra inter = full_algebra({2});
    for (double t : times) {
      OperatorAlgebra pt = pacc_algebra(m.evolution(t));
      for (const Mat& b : cont.basis) CHECK(contains(pt, b));
      inter = intersect(inter, pt);
    }
    CHECK(equals(cont, inter));
  }
}

TEST_CASE("Hamiltonian control form", "[hamiltonian]") {
  auto cf = detect_control_form_h(zz_model());
  REQUIRE(cf.has_value());
  REQUIRE(cf->control_basis.size() == 2);
  CHECK(std::abs(cf->control_basis[0](0)) == Catch::Approx(1.0));
  CHECK(std::abs(cf->control_basis[1](1)) == Catch::Approx(1.0));
  CHECK((cf->conditionals[0] - pauli_z()).norm() < 1e-9);
  CHECK((cf->conditionals[1] + pauli_z()).norm() < 1e-9);

  CHECK_FALSE(detect_control_form_h(local_z_model()).has_value());

  // Conditionals differing by a multiple of the identity: not maximal.
  Rng rng(107);
  Mat h0 = random_hermitian(2, rng);
  Mat planted = kron_mat(projector(ket(2, 0)), h0) +
                kron_mat(projector(ket(2, 1)), h0 + 2.0 * identity_mat(2));
  CHECK_FALSE(
      detect_control_form_h(HamiltonianModel(planted, 2, 2)).has_value());

  // Planted generic control Hamiltonian is recovered.
  Mat basis = random_unitary(2, rng);
  HamiltonianControlForm planted_cf;
  planted_cf.control_basis = {basis.col(0), basis.col(1)};
  planted_cf.conditionals = {random_hermitian(2, rng),
                             random_hermitian(2, rng)};
  HamiltonianModel pm(assemble_hamiltonian_control_form(planted_cf), 2, 2);
  auto rec = detect_control_form_h(pm);
  REQUIRE(rec.has_value());
  for (const Vec& v : rec->control_basis) {
    double best = std::max(std::abs(planted_cf.control_basis[0].dot(v)),
                           std::abs(planted_cf.control_basis[1].dot(v)));
    CHECK(best >= 1.0 - 1e-9);
  }
}

TEST_CASE("noiseless subsystem block reading", "[hamiltonian]") {
  // H_I acts only on the left qubit of a two-qubit system factor: the right
  // qubit stays protected, and the rotating-frame robust algebra acts on it.
  Mat h = kron_mat(kron_mat(pauli_z(), identity_mat(2)), pauli_x());
  HamiltonianModel m(h, 4, 2);
  OperatorAlgebra rob = rotating_frame_robust(m);
  BlockStructure bs = block_structure(rob);
  int total_right = 0;
  for (const Block& blk : bs.blocks) total_right += blk.right_dim;
  CHECK(total_right >= 2);

  // The interaction-generated evolution leaves every robust operator alone.
  for (double t : {0.3, 1.1}) {
    Mat u = exp_i_hermitian_mat(m.h_int, t);
    for (const Mat& b : rob.basis) {
      Mat lifted = kron_mat(b, identity_mat(2));
      Mat evolved = u.adjoint() * lifted * u;
      CHECK((evolved - lifted).norm() < 1e-9);
    }
  }
}

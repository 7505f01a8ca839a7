#include <catch2/catch_amalgamated.hpp>

#include "decolab/bipartite.hpp"

using namespace decolab;

namespace {

UnitaryChannel cnot_channel() { return UnitaryChannel::square(cnot_mat(), 2, 2); }
UnitaryChannel swap_channel() {
  return UnitaryChannel::square(swap_mat(2, 2), 2, 2);
}
UnitaryChannel identity_channel() {
  return UnitaryChannel::square(identity_mat(4), 2, 2);
}

Mat on_s(const Mat& m) { return kron_mat(m, identity_mat(2)); }
Mat on_f(const Mat& m) { return kron_mat(identity_mat(2), m); }

/// Planted coherent-control unitary sum_k |psi~_k><psi_k| ⊗ V^(k).
struct Planted {
  ControlForm cf;
  UnitaryChannel ch;
};

Planted plant_control(int ds, int df, Rng& rng, bool degenerate_pair = false) {
  Planted out;
  Mat cb = random_unitary(ds, rng);
  Mat ib = random_unitary(ds, rng);
  for (int k = 0; k < ds; ++k) {
    out.cf.control_basis.push_back(cb.col(k));
    out.cf.image_basis.push_back(ib.col(k));
    out.cf.conditionals.push_back(random_unitary(df, rng));
  }
  if (degenerate_pair && ds >= 2) {
    cxd phase = std::exp(cxd(0, 2 * M_PI * rng.uniform()));
    out.cf.conditionals[1] = phase * out.cf.conditionals[0];
  }
  out.ch = UnitaryChannel(assemble_control_form(out.cf), {ds, df}, {ds, df});
  return out;
}

}  // namespace

TEST_CASE("CNOT influence truth table", "[bipartite]") {
  UnitaryChannel ch = cnot_channel();
  Mat xg = on_f(pauli_x()), zg = on_f(pauli_z());

  CHECK_FALSE(influences_op(on_s(pauli_x()), xg, ch));
  CHECK_FALSE(influences_op(on_s(pauli_y()), xg, ch));
  CHECK_FALSE(influences_op(on_s(pauli_z()), xg, ch));
  CHECK(influences_op(on_s(pauli_x()), zg, ch));
  CHECK(influences_op(on_s(pauli_y()), zg, ch));
  CHECK_FALSE(influences_op(on_s(pauli_z()), zg, ch));

  // CNOT pullbacks: X_G -> X_F, Z_G -> Z_S Z_F.
  CHECK((ch.pullback(xg) - on_f(pauli_x())).norm() < 1e-14);
  CHECK((ch.pullback(zg) - kron_mat(pauli_z(), pauli_z())).norm() < 1e-14);
}

TEST_CASE("influence variants", "[bipartite]") {
  UnitaryChannel ch = cnot_channel();
  // M_S -> G iff [M_S, Z_S] != 0, over the Pauli basis.
  CHECK(influences_op_to_env(pauli_x(), ch));
  CHECK(influences_op_to_env(pauli_y(), ch));
  CHECK_FALSE(influences_op_to_env(pauli_z(), ch));
  CHECK_FALSE(influences_op_to_env(identity_mat(2), ch));

  // Identity channel: no system operator influences G.
  UnitaryChannel id = identity_channel();
  CHECK_FALSE(influences_op_to_env(pauli_x(), id));
  CHECK_FALSE(influences_system_to_env(id));

  // SWAP: every nontrivial M_S influences G.
  UnitaryChannel sw = swap_channel();
  CHECK(influences_op_to_env(pauli_x(), sw));
  CHECK(influences_op_to_env(pauli_y(), sw));
  CHECK(influences_op_to_env(pauli_z(), sw));
  CHECK(influences_system_to_env(sw));

  // S -> N variants through the CNOT.
  CHECK(influences_system_to_op(on_f(pauli_z()), ch));   // Z_G is influenced
  CHECK_FALSE(influences_system_to_op(on_f(pauli_x()), ch));
}

TEST_CASE("time symmetry of influence", "[bipartite]") {
  Rng rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    UnitaryChannel ch = UnitaryChannel::square(random_unitary(4, rng), 2, 2);
    Mat m = random_ginibre(4, 4, rng);
    Mat n = random_ginibre(4, 4, rng);
    CHECK(influences_op(m, n, ch) == influences_op(n, m, ch.inverse()));
  }
}

TEST_CASE("pacc/acc/dec for identity, SWAP, CNOT", "[bipartite]") {
  OperatorAlgebra full = full_algebra({2});
  OperatorAlgebra triv = trivial_algebra({2});
  OperatorAlgebra zalg = generate({pauli_z()}, {2});

  BipartiteAnalysis id = analyze(identity_channel());
  CHECK(equals(id.acc, triv));
  CHECK(equals(id.pacc, full));
  CHECK(equals(id.dec, triv));
  CHECK(id.decomposition.size() == 1);

  BipartiteAnalysis sw = analyze(swap_channel());
  CHECK(equals(sw.acc, full));
  CHECK(equals(sw.pacc, triv));
  CHECK(equals(sw.dec, triv));

  BipartiteAnalysis cn = analyze(cnot_channel());
  CHECK(equals(cn.acc, zalg));
  CHECK(equals(cn.pacc, zalg));
  CHECK(equals(cn.dec, zalg));
  REQUIRE(cn.decomposition.size() == 2);
  CHECK((cn.decomposition.projectors[0] -
         (identity_mat(2) + pauli_z()) / 2.0).norm() < 1e-9);
  CHECK((cn.decomposition.projectors[1] -
         (identity_mat(2) - pauli_z()) / 2.0).norm() < 1e-9);
}

TEST_CASE("Thm 3.7 structure on random channels", "[bipartite]") {
  Rng rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    UnitaryChannel ch = UnitaryChannel::square(random_unitary(4, rng), 2, 2);
    BipartiteAnalysis an = analyze(ch);
    CHECK(equals(an.acc, commutant(an.pacc)));
    CHECK(equals(an.pacc, commutant(an.acc)));
    CHECK(equals(an.dec, center(an.acc)));
    CHECK(equals(an.dec, center(an.pacc)));
    for (const Mat& a : an.dec.basis)
      for (const Mat& b : an.dec.basis) CHECK(comm(a, b).norm() < tol::alg);
  }
}

TEST_CASE("rectangular splits are supported", "[bipartite]") {
  Rng rng(59);
  // dim_S=4, dim_F=2 in; dim_T=2, dim_G=4 out.
  UnitaryChannel ch(random_unitary(8, rng), {4, 2}, {2, 4});
  OperatorAlgebra pacc = pacc_algebra(ch);
  CHECK(pacc.ambient_dim() == 4);
  OperatorAlgebra acc = acc_algebra(ch);
  CHECK(equals(acc, commutant(pacc)));
  CHECK_THROWS_AS(detect_control_form(ch), DimensionError);
}

TEST_CASE("dual analysis", "[bipartite]") {
  BipartiteAnalysis dual = dual_analyze(cnot_channel());
  CHECK(equals(dual.dec, generate({pauli_z()}, {2})));
  CHECK(equals(dual_analyze(identity_channel()).dec, trivial_algebra({2})));
}

TEST_CASE("Thm 4.3: dec algebra invariant under inversion", "[bipartite]") {
  Rng rng(61);
  auto check_channel = [](const UnitaryChannel& ch) {
    BipartiteAnalysis fwd = analyze(ch);
    BipartiteAnalysis dual = dual_analyze(ch);
    // Push S_dec through U and compare with T_dec ⊗ I_G on the output space.
    std::vector<Mat> pushed;
    Mat id_f = Mat::Identity(ch.dim_f, ch.dim_f);
    for (const Mat& b : fwd.dec.basis)
      pushed.push_back(ch.pushforward(kron_mat(b, id_f)));
    std::vector<Mat> lifted;
    Mat id_g = Mat::Identity(ch.dim_g, ch.dim_g);
    for (const Mat& b : dual.dec.basis)
      lifted.push_back(kron_mat(b, id_g) / std::sqrt(1.0 * ch.dim_g));
    OperatorAlgebra lhs = algebra_from_orthonormal(
        {ch.dim_t, ch.dim_g}, detail::orthonormalize(pushed));
    OperatorAlgebra rhs = algebra_from_orthonormal(
        {ch.dim_t, ch.dim_g}, detail::orthonormalize(lifted));
    CHECK(equals(lhs, rhs));
  };
  check_channel(cnot_channel());
  for (int trial = 0; trial < 10; ++trial) {
    Rng local(1000 + trial);
    Planted p = plant_control(2, 2, local);
    check_channel(p.ch);
  }
}

TEST_CASE("detect_control_form on CNOT", "[bipartite]") {
  auto cf = detect_control_form(cnot_channel());
  REQUIRE(cf.has_value());
  REQUIRE(cf->control_basis.size() == 2);
  CHECK(std::abs(cf->control_basis[0](0)) == Catch::Approx(1.0));
  CHECK(std::abs(cf->control_basis[1](1)) == Catch::Approx(1.0));
  CHECK((cf->conditionals[0] - identity_mat(2)).norm() < 1e-10);
  CHECK((cf->conditionals[1] - pauli_x()).norm() < 1e-10);
  CHECK((assemble_control_form(*cf) - cnot_mat()).norm() < 1e-9);
}

TEST_CASE("detect_control_form planted and negatives", "[bipartite]") {
  Rng rng(67);
  for (int trial = 0; trial < 5; ++trial) {
    Planted p = plant_control(2, 2, rng);
    auto cf = detect_control_form(p.ch);
    REQUIRE(cf.has_value());
    CHECK((assemble_control_form(*cf) - p.ch.u).norm() < 1e-9);
    // Recovered basis matches the planted one up to phase and order.
    for (const Vec& rec : cf->control_basis) {
      double best = 0;
      for (const Vec& pl : p.cf.control_basis)
        best = std::max(best, std::abs(pl.dot(rec)));
      CHECK(best >= 1.0 - 1e-9);
    }
  }
  // Phase-equivalent conditionals: not maximally decohering.
  for (int trial = 0; trial < 3; ++trial) {
    Planted p = plant_control(2, 2, rng, /*degenerate_pair=*/true);
    CHECK_FALSE(detect_control_form(p.ch).has_value());
  }
  CHECK_FALSE(detect_control_form(swap_channel()).has_value());
}

TEST_CASE("suppression factor", "[bipartite]") {
  auto cf = detect_control_form(cnot_channel());
  REQUIRE(cf.has_value());
  Mat rho0 = projector(Vec(Vec::Zero(2)));
  rho0(0, 0) = 1;
  Rng rng(71);
  Mat rho_rand = random_density(2, rng);
  CHECK(suppression_factor(*cf, rho0, 0, 0) == Catch::Approx(1.0));
  CHECK(suppression_factor(*cf, rho_rand, 1, 1) == Catch::Approx(1.0));
  CHECK(suppression_factor(*cf, rho0, 0, 1) == Catch::Approx(0.0).margin(1e-12));

  Vec plus(2);
  plus << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  CHECK(suppression_factor(*cf, projector(plus), 0, 1) == Catch::Approx(1.0));

  // Strict suppression for full-rank environment states.
  for (int trial = 0; trial < 10; ++trial) {
    Planted p = plant_control(2, 2, rng);
    auto pcf = detect_control_form(p.ch);
    REQUIRE(pcf.has_value());
    Mat rho = random_density(2, rng);
    CHECK(suppression_factor(*pcf, rho, 0, 1) < 1.0);
  }

  Mat not_state = identity_mat(2);
  CHECK_THROWS_AS(suppression_factor(*cf, not_state, 0, 1), NumericalError);
}

TEST_CASE("dephasing equivalence for maximally decohering channels",
          "[bipartite]") {
  Rng rng(73);
  for (int trial = 0; trial < 10; ++trial) {
    Planted p = plant_control(2, 2, rng);
    BipartiteAnalysis an = analyze(p.ch);
    REQUIRE(an.dec.dim() == 2);
    Mat rho_s = random_density(2, rng);
    Mat rho_f = random_density(2, rng);
    Mat in = kron_mat(rho_s, rho_f);
    Mat out = p.ch.pushforward(in);
    Mat in_deph = kron_mat(dephase(rho_s, an.decomposition), rho_f);
    Mat out_deph = p.ch.pushforward(in_deph);
    Mat env = partial_trace_mat(out, {2, 2}, {1});
    Mat env_deph = partial_trace_mat(out_deph, {2, 2}, {1});
    CHECK((env - env_deph).norm() < 1e-9);
  }
}

TEST_CASE("Thm 3.5 three-way equivalence", "[bipartite]") {
  Rng rng(79);
  std::vector<Mat> paulis1 = {identity_mat(2), pauli_x(), pauli_y(), pauli_z()};
  for (int trial = 0; trial < 10; ++trial) {
    UnitaryChannel ch = UnitaryChannel::square(random_unitary(4, rng), 2, 2);
    OperatorAlgebra pacc = pacc_algebra(ch);
    for (const Mat& p : paulis1) {
      bool in_pacc = contains(pacc, p);
      bool no_influence = !influences_op_to_env(p, ch);
      Mat w = ch.pushforward(on_s(p));
      Mat local = partial_trace_mat(w, {2, 2}, {0}) / 2.0;
      bool lands_local =
          (w - kron_mat(local, identity_mat(2))).norm() < 1e-8 * w.norm();
      CHECK(in_pacc == no_influence);
      CHECK(no_influence == lands_local);
    }
  }
}

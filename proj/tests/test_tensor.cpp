// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#include "qcomb/choi.hpp"
#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace qcomb;
namespace tu = qcomb::testutil;

namespace {
LabeledOperator rand_op(FactorLabel l, const AlgebraShape& s, std::mt19937_64& rng) {
  return LabeledOperator(TensorSpace::single(l, s), tu::random_alg_matrix(s, rng));
}
}  // namespace

TEST_CASE("tensor product", "[tensor]") {
  const AlgebraShape q2({2});
  const auto i0 = LabeledOperator::lift(FactorLabel{0}, identity(q2));
  const auto i1 = LabeledOperator::lift(FactorLabel{1}, identity(q2));
  REQUIRE(tensor(i0, i1).matrix().isApprox(Mat::Identity(4, 4)));
  REQUIRE_THROWS_AS(tensor(i0, i0), std::invalid_argument);

  std::mt19937_64 rng(23);
  for (int t = 0; t < 10; ++t) {
    const auto x = rand_op(FactorLabel{0}, q2, rng);
    const auto y = rand_op(FactorLabel{1}, q2, rng);
    REQUIRE(std::abs(tensor(x, y).trace() - x.trace() * y.trace()) < 1e-12);
  }

  const AlgebraShape m21({2, 1});
  const LabeledOperator rho(TensorSpace::single(FactorLabel{0}, m21), tu::random_psd(m21, rng));
  const LabeledOperator sig(TensorSpace::single(FactorLabel{1}, q2), tu::random_psd(q2, rng));
  REQUIRE(detail::is_psd(tensor(rho, sig).matrix(), 1e-9));
}

TEST_CASE("partial trace", "[tensor]") {
  const AlgebraShape q2({2});
  std::mt19937_64 rng(29);
  const auto a = rand_op(FactorLabel{0}, q2, rng);
  const auto b = rand_op(FactorLabel{1}, q2, rng);
  const auto ab = tensor(a, b);

  const auto red = partial_trace(ab, {FactorLabel{0}});
  REQUIRE(red.matrix().isApprox(a.trace() * b.matrix()));
  REQUIRE(red.space().factor(0).label == FactorLabel{1});

  const auto full = partial_trace(ab, {FactorLabel{0}, FactorLabel{1}});
  REQUIRE(full.dim() == 1);
  REQUIRE(std::abs(full.matrix()(0, 0) - ab.trace()) < 1e-12);

  // trace of the result equals the trace of the input
  REQUIRE(std::abs(red.trace() - ab.trace()) < 1e-12);

  // Choi of the identity channel reduces to I
  const auto psi = max_entangled(FactorLabel{1}, FactorLabel{0}, q2);
  REQUIRE(partial_trace(psi, {FactorLabel{1}}).matrix().isApprox(Mat::Identity(2, 2)));

  REQUIRE_THROWS_AS(partial_trace(ab, {FactorLabel{9}}), std::invalid_argument);
}

TEST_CASE("partial transpose", "[tensor]") {
  const AlgebraShape q2({2});
  std::mt19937_64 rng(31);
  const auto x = tensor(rand_op(FactorLabel{0}, q2, rng), rand_op(FactorLabel{1}, q2, rng));

  REQUIRE(partial_transpose(x, {}).matrix().isApprox(x.matrix()));
  REQUIRE(partial_transpose(x, {FactorLabel{0}, FactorLabel{1}})
              .matrix()
              .isApprox(x.matrix().transpose()));
  // involution
  const auto pt = partial_transpose(x, {FactorLabel{1}});
  REQUIRE(partial_transpose(pt, {FactorLabel{1}}).matrix().isApprox(x.matrix()));

  // (Ψ₂)^{T₀} is the swap, by entrywise construction
  const auto psi = max_entangled(FactorLabel{1}, FactorLabel{0}, q2);
  Mat swap = Mat::Zero(4, 4);
  for (Index a = 0; a < 2; ++a)
    for (Index b = 0; b < 2; ++b) swap(a * 2 + b, b * 2 + a) = cx(1, 0);
  REQUIRE(partial_transpose(psi, {FactorLabel{0}}).matrix().isApprox(swap));
}

TEST_CASE("link product special cases", "[tensor]") {
  const AlgebraShape q2({2});
  std::mt19937_64 rng(37);
  const auto x = rand_op(FactorLabel{0}, q2, rng);
  const auto y = rand_op(FactorLabel{1}, q2, rng);

  // disjoint labels: X*Y = X⊗Y
  REQUIRE(link_product(x, y).matrix().isApprox(tensor(x, y).matrix()));

  // identical label sets: X*Y = Tr(Y^T X)
  const auto y0 = rand_op(FactorLabel{0}, q2, rng);
  const auto z = link_product(x, y0);
  REQUIRE(z.dim() == 1);
  REQUIRE(std::abs(z.matrix()(0, 0) - (y0.matrix().transpose() * x.matrix()).trace()) < 1e-12);
}

TEST_CASE("link product composes Choi matrices", "[tensor]") {
  // Choi(T_Y) * Choi(T_X) over the shared middle label equals the Choi of
  // the composition, checked against direct matrix-function composition.
  const AlgebraShape q2({2});
  std::mt19937_64 rng(41);
  const TensorSpace s0 = TensorSpace::single(FactorLabel{0}, q2);
  const TensorSpace s1 = TensorSpace::single(FactorLabel{1}, q2);
  const TensorSpace s2 = TensorSpace::single(FactorLabel{2}, q2);
  for (int t = 0; t < 10; ++t) {
    const Mat act_x = tu::ginibre(4, 4, rng);
    const Mat act_y = tu::ginibre(4, 4, rng);
    const CpMapChoi X = choi_of_action(act_x, s1, s0);
    const CpMapChoi Y = choi_of_action(act_y, s2, s1);
    const LabeledOperator composed = link_product(Y.choi(), X.choi());
    const CpMapChoi direct = choi_of_action(act_y * act_x, s2, s0);
    REQUIRE((composed.matrix() - direct.choi().matrix()).norm() < 1e-10);
  }
}

TEST_CASE("link product laws", "[tensor]") {
  // associativity with empty triple intersection, commutativity up to swap,
  // positivity
  std::mt19937_64 rng(43);
  const AlgebraShape q2({2});
  for (int t = 0; t < 25; ++t) {
    // labels: X1 on {0,1}, X2 on {1,2}, X3 on {2,3} — triple intersection empty
    const TensorSpace sp1({Factor{FactorLabel{0}, q2}, Factor{FactorLabel{1}, q2}});
    const TensorSpace sp2({Factor{FactorLabel{1}, q2}, Factor{FactorLabel{2}, q2}});
    const TensorSpace sp3({Factor{FactorLabel{2}, q2}, Factor{FactorLabel{3}, q2}});
    const LabeledOperator x1(sp1, tu::random_space_matrix(sp1, rng));
    const LabeledOperator x2(sp2, tu::random_space_matrix(sp2, rng));
    const LabeledOperator x3(sp3, tu::random_space_matrix(sp3, rng));
    const auto lhs = link_product(link_product(x1, x2), x3);
    const auto rhs = link_product(x1, link_product(x2, x3));
    REQUIRE((lhs.matrix() - rhs.matrix()).norm() < 1e-9);

    // commutativity: Y*X = E (X*Y) E for the factor swap
    const auto xy = link_product(x1, x2);  // factors (0, 2)
    const auto yx = link_product(x2, x1);  // factors (2, 0)
    const auto swapped = permute_factors(xy, {1, 0});
    REQUIRE((yx.matrix() - swapped.matrix()).norm() < 1e-9);
  }
  for (int t = 0; t < 10; ++t) {
    const TensorSpace sp1({Factor{FactorLabel{0}, q2}, Factor{FactorLabel{1}, q2}});
    const TensorSpace sp2({Factor{FactorLabel{1}, q2}, Factor{FactorLabel{2}, q2}});
    const LabeledOperator x(sp1, tu::random_space_psd(sp1, rng));
    const LabeledOperator y(sp2, tu::random_space_psd(sp2, rng));
    REQUIRE(detail::is_psd(link_product(x, y).matrix(), 1e-9));
  }
}

TEST_CASE("link value on the shared space", "[tensor]") {
  // for X carrying exactly the shared labels, Y*X = T_Y(X)
  const AlgebraShape q2({2});
  std::mt19937_64 rng(47);
  const TensorSpace s0 = TensorSpace::single(FactorLabel{0}, q2);
  const TensorSpace s1 = TensorSpace::single(FactorLabel{1}, q2);
  for (int t = 0; t < 10; ++t) {
    const CpMapChoi Y = choi_of_action(tu::ginibre(4, 4, rng), s1, s0);
    const LabeledOperator X(s0, tu::random_alg_matrix(q2, rng));
    const auto via_link = link_product(Y.choi(), X);
    const auto via_map = apply_map(Y, X);
    REQUIRE((via_link.matrix() - via_map.matrix()).norm() < 1e-12);
  }
}

TEST_CASE("block metadata propagates through links", "[tensor]") {
  // a direct-sum factor keeps its central-block support through contraction
  const AlgebraShape m21({2, 1});
  const AlgebraShape q2({2});
  std::mt19937_64 rng(53);
  const TensorSpace spx({Factor{FactorLabel{0}, m21}, Factor{FactorLabel{1}, q2}});
  const TensorSpace spy({Factor{FactorLabel{1}, q2}, Factor{FactorLabel{2}, m21}});
  const LabeledOperator x(spx, tu::random_space_psd(spx, rng));
  const LabeledOperator y(spy, tu::random_space_psd(spy, rng));
  const auto z = link_product(x, y);
  REQUIRE(z.space().factor(0).shape == m21);
  REQUIRE(z.space().factor(1).shape == m21);
  for (Index r = 0; r < z.dim(); ++r)
    for (Index c = 0; c < z.dim(); ++c)
      if (!z.space().cell_allowed(r, c)) REQUIRE(z.matrix()(r, c) == cx(0, 0));
}

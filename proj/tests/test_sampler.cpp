// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#include "qcomb/sampler.hpp"
#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace qcomb;

namespace {
const AlgebraShape q2({2});
}

TEST_CASE("random states", "[sampler]") {
  for (const AlgebraShape& shape : {AlgebraShape({2}), AlgebraShape({2, 3})}) {
    for (uint64_t s = 1; s <= 50; ++s) {
      const AlgOperator rho = random_state(shape, Seed{s});
      REQUIRE(is_positive(rho, 1e-12));
      REQUIRE(std::abs(rho.trace() - cx(1, 0)) < 1e-12);
    }
  }
  // determinism
  const AlgOperator a = random_state(AlgebraShape({2, 3}), Seed{77});
  const AlgOperator b = random_state(AlgebraShape({2, 3}), Seed{77});
  REQUIRE(a.matrix() == b.matrix());
}

TEST_CASE("random channels", "[sampler]") {
  for (uint64_t s = 1; s <= 50; ++s) {
    const CpMapChoi m = random_channel(q2, q2, 2, Seed{s});
    REQUIRE(is_cp(m, 1e-10));
    REQUIRE(is_tp(m, 1e-10));
  }
  // kraus_rank 1 with square dimensions is a unitary conjugation
  const CpMapChoi u = random_channel(q2, q2, 1, Seed{5});
  REQUIRE(kraus(u).size() == 1);
  // direct sums
  const CpMapChoi ds = random_channel(AlgebraShape({2, 1}), AlgebraShape({1, 1}), 2, Seed{6});
  REQUIRE(is_cp(ds, 1e-10));
  REQUIRE(is_tp(ds, 1e-10));
  REQUIRE_THROWS_AS(random_channel(q2, q2, 0, Seed{1}), std::invalid_argument);
}

TEST_CASE("random section elements", "[sampler]") {
  // full state space
  const SectionSpec full = SectionSpec::full_states(TensorSpace::single(FactorLabel{0}, q2));
  for (uint64_t s = 1; s <= 100; ++s)
    REQUIRE(section_contains(full.J, random_section_element(full, Seed{s}), 1e-9));

  // channel section: elements are normalized Choi matrices of channels
  const TensorSpace cb({Factor{FactorLabel{1}, q2}, Factor{FactorLabel{0}, q2}});
  const SectionSpec chan = SectionSpec::channel_section(cb, 1);
  for (uint64_t s = 1; s <= 100; ++s) {
    const LabeledOperator sig = random_section_element(chan, Seed{s});
    REQUIRE(section_contains(chan.J, sig, 1e-9));
    // t·σ is the Choi matrix of a channel
    const CpMapChoi as_chan = CpMapChoi::from_operator(
        LabeledOperator(cb, 2.0 * sig.matrix()), 1);
    REQUIRE(is_channel(as_chan, 1e-8));
  }

  // fixed statistics of a PVM
  Mat e0 = Mat::Zero(2, 2), e1 = Mat::Zero(2, 2);
  e0(0, 0) = cx(1, 0);
  e1(1, 1) = cx(1, 0);
  const TensorSpace s0 = TensorSpace::single(FactorLabel{0}, q2);
  Mat rho_ref(2, 2);
  rho_ref << cx(0.6, 0), cx(0.1, 0.05), cx(0.1, -0.05), cx(0.4, 0);
  const SectionSpec fixed = SectionSpec::fixed_povm_section(
      {LabeledOperator(s0, e0), LabeledOperator(s0, e1)}, LabeledOperator(s0, rho_ref));
  for (uint64_t s = 1; s <= 100; ++s) {
    const LabeledOperator sig = random_section_element(fixed, Seed{s});
    REQUIRE(section_contains(fixed.J, sig, 1e-9));
    REQUIRE(std::abs((e0 * sig.matrix()).trace() - cx(0.6, 0)) < 1e-8);
  }
}

TEST_CASE("random generalized channels", "[sampler]") {
  const TensorSpace cb({Factor{FactorLabel{1}, q2}, Factor{FactorLabel{0}, q2}});
  const SectionSpec chan = SectionSpec::channel_section(cb, 1);
  const TensorSpace outb = TensorSpace::single(FactorLabel{9}, q2);
  for (uint64_t s = 1; s <= 60; ++s)
    REQUIRE(is_generalized_channel(random_generalized_channel(chan, outb, Seed{s}), chan, 1e-9));
  // full section reduces to ordinary channels
  const SectionSpec full = SectionSpec::full_states(TensorSpace::single(FactorLabel{0}, q2));
  for (uint64_t s = 1; s <= 30; ++s) {
    const CpMapChoi m = random_generalized_channel(full, outb, Seed{s});
    REQUIRE(is_channel(m, 1e-9));
  }
}

TEST_CASE("random combs pass their verifiers", "[sampler]") {
  std::vector<SupermapSpec> specs;
  specs.push_back(comb_spec({q2, q2, q2}));
  specs.push_back(comb_spec({q2, q2, q2, q2}));
  for (const auto& spec : specs) {
    for (uint64_t s = 1; s <= 60; ++s) {
      const auto [x, dec] = random_comb(spec, Seed{s});
      REQUIRE(membership_by_subspace(x, spec, spec.levels(), 1e-9));
      REQUIRE(membership_by_chain(x, spec, spec.levels(), 1e-9).ok);
    }
  }
}

TEST_CASE("seed forking decorrelates streams", "[sampler]") {
  const Seed root{12345};
  const AlgOperator a = random_state(q2, root.fork(0));
  const AlgOperator b = random_state(q2, root.fork(1));
  REQUIRE((a.matrix() - b.matrix()).norm() > 1e-3);
}

// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#include "qcomb/io.hpp"
#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>

using namespace qcomb;
namespace tu = qcomb::testutil;

namespace {
const AlgebraShape q2({2});
}

TEST_CASE("operator round trip is bit exact", "[io]") {
  std::mt19937_64 rng(271);
  const TensorSpace sp({Factor{FactorLabel{1}, AlgebraShape({2, 1})}, Factor{FactorLabel{0}, q2}});
  const LabeledOperator op(sp, tu::random_space_matrix(sp, rng));
  const io::json j = io::operator_to_json(op);
  // through text, as the CLI would write it
  const io::json j2 = io::json::parse(j.dump());
  const LabeledOperator back = io::operator_from_json(j2);
  REQUIRE(back.space().same_factors(op.space()));
  REQUIRE(back.matrix() == op.matrix());
}

TEST_CASE("malformed operator files are rejected", "[io]") {
  io::json j = io::operator_to_json(
      LabeledOperator(TensorSpace::single(FactorLabel{0}, q2), Mat::Identity(2, 2)));
  io::json bad = j;
  bad["matrix"]["re"][0][0] = "oops";
  REQUIRE_THROWS(io::operator_from_json(bad));
  bad = j;
  bad["matrix"]["re"][0].erase(1);
  REQUIRE_THROWS_AS(io::operator_from_json(bad), error);
  bad = j;
  bad["matrix"]["re"][0][0] = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(io::operator_from_json(bad), error);
  bad = j;
  bad["matrix"]["im"][0][0] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(io::operator_from_json(bad), error);
  bad = j;
  bad.erase("factors");
  REQUIRE_THROWS_AS(io::operator_from_json(bad), error);
  // off-block support is caught by the operator constructor
  bad = io::operator_to_json(LabeledOperator(
      TensorSpace::single(FactorLabel{0}, AlgebraShape({1, 1})), Mat::Identity(2, 2)));
  bad["matrix"]["re"][0][1] = 0.5;
  REQUIRE_THROWS_AS(io::operator_from_json(bad), error);
}

TEST_CASE("choi files keep their role metadata", "[io]") {
  const CpMapChoi m = random_channel(q2, q2, 2, Seed{31});
  const io::json j = io::choi_to_json(m);
  REQUIRE(j.at("role") == "choi");
  const CpMapChoi back = io::choi_from_json(io::json::parse(j.dump()));
  REQUIRE(back.choi().matrix() == m.choi().matrix());
  REQUIRE(back.out_space().same_factors(m.out_space()));
  REQUIRE(back.in_space().same_factors(m.in_space()));
  // wrong label split is rejected
  io::json bad = j;
  bad["output_labels"] = {99};
  REQUIRE_THROWS_AS(io::choi_from_json(bad), error);
}

TEST_CASE("subspace files orthonormalize on load", "[io]") {
  const TensorSpace sp = TensorSpace::single(FactorLabel{0}, q2);
  // redundant, unnormalized generators
  const std::vector<LabeledOperator> gens{
      LabeledOperator(sp, 3.0 * Mat::Identity(2, 2)),
      LabeledOperator(sp, Mat::Identity(2, 2)),
      LabeledOperator(sp, tu::pauli_x())};
  io::json arr = io::json::array();
  for (const auto& g : gens) arr.push_back(io::operator_to_json(g));
  const io::json j = {{"subspace", arr}};
  const Subspace s = io::subspace_from_json(j);
  REQUIRE(s.dim() == 2);
  REQUIRE(s.contains(tu::pauli_x()));
}

TEST_CASE("section and spec files", "[io]") {
  // named channel section
  const io::json chan = {
      {"section", "channel"},
      {"factors",
       {{{"label", 1}, {"blocks", {2}}}, {{"label", 0}, {"blocks", {2}}}}},
      {"out_factors", 1}};
  const SectionSpec sec = io::section_from_json(chan);
  REQUIRE(sec.tau_in_K);
  REQUIRE(sec.J.dim() == 13);

  // full spec file with a tester chain
  const io::json spec_json = {
      {"kind", "tester"},
      {"base", {{"section", "full"}, {"factors", {{{"label", 0}, {"blocks", {2}}}}}}},
      {"chain", {io::json{{"blocks", {2}}}}},
      {"outcomes", 2}};
  const io::SpecFile sf = io::spec_from_json(spec_json);
  REQUIRE(sf.kind == "tester");
  REQUIRE(sf.spec.levels() == 2);
  REQUIRE(sf.spec.c[2] == 2.0);

  // explicit basis section round trip
  const io::json round = io::section_to_json(sec);
  const SectionSpec sec2 = io::section_from_json(round);
  REQUIRE(sec2.J.equals(sec.J, 1e-8));
}

TEST_CASE("file io round trip", "[io]") {
  const std::string path = "/tmp/qcomb_io_test.json";
  const CpMapChoi m = random_channel(q2, q2, 2, Seed{32});
  io::save_file(path, io::choi_to_json(m));
  const io::json j = io::load_file(path);
  REQUIRE(io::choi_from_json(j).choi().matrix() == m.choi().matrix());
  std::remove(path.c_str());
  REQUIRE_THROWS_AS(io::load_file("/tmp/qcomb_does_not_exist.json"), error);
}

// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#ifndef QCOMB_IO_HPP
#define QCOMB_IO_HPP

#include "qcomb/sampler.hpp"

#include <json.hpp>

#include <fstream>

namespace qcomb::io {

using nlohmann::json;

// Operators are stored with split re/im float arrays, row-major over the
// full tensor space; the first listed factor is most significant in the
// Kronecker layout. Choi matrices additionally record their role and the
// output/input label split.

inline json shape_to_json(const AlgebraShape& s) {
  json b = json::array();
  for (Index d : s.blocks()) b.push_back(d);
  return b;
}

inline AlgebraShape shape_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw error("io: algebra blocks must be a non-empty array");
  std::vector<Index> blocks;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<Index>() < 1)
      throw error("io: block dimensions must be positive integers");
    blocks.push_back(v.get<Index>());
  }
  return AlgebraShape(blocks);
}

inline json factors_to_json(const TensorSpace& s) {
  json out = json::array();
  for (const auto& f : s.factors())
    out.push_back({{"label", f.label.id}, {"blocks", shape_to_json(f.shape)}});
  return out;
}

inline TensorSpace factors_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw error("io: factors must be a non-empty array");
  std::vector<Factor> fs;
  for (const auto& v : j) {
    if (!v.contains("label") || !v.contains("blocks"))
      throw error("io: factor entries need label and blocks");
    fs.push_back(Factor{FactorLabel{v.at("label").get<int>()}, shape_from_json(v.at("blocks"))});
  }
  return TensorSpace(fs);
}

inline json matrix_to_json(const Mat& m) {
  json re = json::array(), im = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json rr = json::array(), ri = json::array();
    for (Index c = 0; c < m.cols(); ++c) {
      rr.push_back(m(r, c).real());
      ri.push_back(m(r, c).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ri));
  }
  return {{"re", std::move(re)}, {"im", std::move(im)}};
}

inline Mat matrix_from_json(const json& j, Index dim) {
  if (!j.contains("re") || !j.contains("im")) throw error("io: matrix needs re and im parts");
  const json& re = j.at("re");
  const json& im = j.at("im");
  if (static_cast<Index>(re.size()) != dim || static_cast<Index>(im.size()) != dim)
    throw error("io: matrix dimensions do not match the factor product");
  Mat m(dim, dim);
  for (Index r = 0; r < dim; ++r) {
    const auto& rr = re.at(static_cast<size_t>(r));
    const auto& ri = im.at(static_cast<size_t>(r));
    if (static_cast<Index>(rr.size()) != dim || static_cast<Index>(ri.size()) != dim)
      throw error("io: matrix rows have the wrong length");
    for (Index c = 0; c < dim; ++c) {
      const double a = rr.at(static_cast<size_t>(c)).get<double>();
      const double b = ri.at(static_cast<size_t>(c)).get<double>();
      if (!std::isfinite(a) || !std::isfinite(b)) throw error("io: non-finite matrix entry");
      m(r, c) = cx(a, b);
    }
  }
  return m;
}

inline json operator_to_json(const LabeledOperator& op) {
  return {{"factors", factors_to_json(op.space())}, {"matrix", matrix_to_json(op.matrix())}};
}

inline LabeledOperator operator_from_json(const json& j, double tol = kDefaultTol) {
  if (!j.contains("factors") || !j.contains("matrix"))
    throw error("io: operator file needs factors and matrix");
  const TensorSpace space = factors_from_json(j.at("factors"));
  return LabeledOperator(space, matrix_from_json(j.at("matrix"), space.dim()), tol);
}

inline json choi_to_json(const CpMapChoi& m) {
  json j = operator_to_json(m.choi());
  j["role"] = "choi";
  json outl = json::array(), inl = json::array();
  for (const auto& f : m.out_space().factors()) outl.push_back(f.label.id);
  for (const auto& f : m.in_space().factors()) inl.push_back(f.label.id);
  j["output_labels"] = std::move(outl);
  j["input_labels"] = std::move(inl);
  return j;
}

inline CpMapChoi choi_from_json(const json& j, double tol = kDefaultTol) {
  const LabeledOperator op = operator_from_json(j, tol);
  Index out_count = 1;
  if (j.contains("output_labels")) {
    const auto& outl = j.at("output_labels");
    out_count = static_cast<Index>(outl.size());
    for (Index i = 0; i < out_count; ++i)
      if (op.space().factor(i).label.id != outl.at(static_cast<size_t>(i)).get<int>())
        throw error("io: output labels must name the leading factors in order");
  }
  return CpMapChoi::from_operator(op, out_count);
}

inline json elements_to_json(const std::vector<LabeledOperator>& elems) {
  json arr = json::array();
  for (const auto& e : elems) arr.push_back(operator_to_json(e));
  return {{"elements", std::move(arr)}};
}

inline std::vector<LabeledOperator> elements_from_json(const json& j, double tol = kDefaultTol) {
  if (!j.contains("elements") || !j.at("elements").is_array() || j.at("elements").empty())
    throw error("io: element list file needs a non-empty elements array");
  std::vector<LabeledOperator> out;
  for (const auto& v : j.at("elements")) out.push_back(operator_from_json(v, tol));
  return out;
}

inline json subspace_to_json(const Subspace& s) {
  json arr = json::array();
  for (Index k = 0; k < s.dim(); ++k) arr.push_back(operator_to_json(s.basis_op(k)));
  return {{"subspace", std::move(arr)}};
}

inline Subspace subspace_from_json(const json& j, double tol = kDefaultTol) {
  if (!j.contains("subspace") || !j.at("subspace").is_array() || j.at("subspace").empty())
    throw error("io: subspace file needs a non-empty basis array");
  std::vector<LabeledOperator> ops;
  for (const auto& v : j.at("subspace")) ops.push_back(operator_from_json(v, tol));
  return Subspace::span(ops, tol);
}

// Sections come either as an explicit basis (plus a designated rho) or as
// one of the named constructions.
inline SectionSpec section_from_json(const json& j, double tol = kDefaultTol) {
  if (j.contains("section")) {
    const std::string kind = j.at("section").get<std::string>();
    const TensorSpace space = factors_from_json(j.at("factors"));
    if (kind == "full") return SectionSpec::full_states(space);
    if (kind == "channel") {
      const Index of = j.value("out_factors", 1);
      return SectionSpec::channel_section(space, of, tol);
    }
    if (kind == "fixed-povm") {
      const auto povm = elements_from_json(j.at("povm"), tol);
      const LabeledOperator rho = operator_from_json(j.at("rho"), tol);
      return SectionSpec::fixed_povm_section(povm, rho, tol);
    }
    throw error("io: unknown section kind '" + kind + "'");
  }
  const Subspace jsub = subspace_from_json(j, tol);
  LabeledOperator rho =
      j.contains("rho")
          ? operator_from_json(j.at("rho"), tol)
          : LabeledOperator(jsub.space(), Mat::Identity(jsub.space().dim(), jsub.space().dim()) /
                                              static_cast<double>(jsub.space().dim()));
  if (!rho.space().same_factors(jsub.space()))
    rho = LabeledOperator(jsub.space(), rho.matrix());
  const Mat tau = Mat::Identity(jsub.space().dim(), jsub.space().dim()) /
                  static_cast<double>(jsub.space().dim());
  SectionSpec s{jsub, rho, jsub.contains(tau, tol)};
  s.validate(tol);
  return s;
}

inline json section_to_json(const SectionSpec& s) {
  json j = subspace_to_json(s.J);
  j["rho"] = operator_to_json(s.rho);
  return j;
}

struct SpecFile {
  SupermapSpec spec;
  std::string kind;  // supermap | comb | tester
};

inline SpecFile spec_from_json(const json& j, double tol = kDefaultTol, Index budget = 64) {
  if (!j.contains("chain")) throw error("io: spec file needs a chain");
  std::vector<AlgebraShape> chain;
  for (const auto& v : j.at("chain"))
    chain.push_back(shape_from_json(v.is_object() ? v.at("blocks") : v));
  const std::string kind = j.value("kind", std::string("supermap"));
  SectionSpec base = j.contains("base_subspace")
                         ? section_from_json(j.at("base_subspace"), tol)
                         : section_from_json(j.at("base"), tol);
  if (kind == "tester") {
    const Index outcomes = j.at("outcomes").get<Index>();
    chain.push_back(AlgebraShape::classical(outcomes));
  }
  return SpecFile{build_spec(base, chain, tol, budget), kind};
}

inline json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error("io: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw error("io: parse failure in '" + path + "': " + e.what());
  }
  return j;
}

inline void save_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw error("io: cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace qcomb::io

#endif

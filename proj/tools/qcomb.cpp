// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.
//
// Command-line entry points: verify / decompose / link / apply / equiv /
// sample. Exit codes: 0 = holds, 1 = fails (witness on stderr), 2 =
// malformed input or IO problem. QCOMB_TOL overrides the default tolerance;
// rank cutoffs and similar derived tolerances are fixed multiples of it.

#include "qcomb/qcomb.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

using namespace qcomb;
using nlohmann::json;

namespace {

double default_tol() {
  if (const char* env = std::getenv("QCOMB_TOL")) {
    try {
      const double t = std::stod(env);
      if (t > 0) return t;
    } catch (...) {
    }
  }
  return kDefaultTol;
}

json load_or_die(const std::string& path) {
  try {
    return io::load_file(path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    std::exit(2);
  }
}

// residual of Tr_B X against I + (J^T)^perp, for witness output
double gchannel_residual(const CpMapChoi& x, const SectionSpec& sec) {
  const LabeledOperator red = partial_trace(x.choi(), x.out_labels());
  const Mat diff = red.matrix() - Mat::Identity(x.in_dim(), x.in_dim());
  return sec.J.transposed().component_norm(diff);
}

int report(bool ok, const std::string& kind, const std::string& witness, double residual,
           bool as_json, int rung = -1) {
  if (as_json) {
    json out{{"ok", ok}, {"kind", kind}};
    if (!ok) {
      out["witness"] = witness;
      out["residual"] = residual;
      if (rung >= 0) out["rung"] = rung;
    }
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << kind << ": " << (ok ? "holds" : "fails") << "\n";
  }
  if (!ok) {
    std::cerr << "verification failed: " << witness;
    if (residual > 0) std::cerr << " (residual " << residual << ")";
    if (rung >= 0) std::cerr << " at rung " << rung;
    std::cerr << "\n";
  }
  return ok ? 0 : 1;
}

std::vector<AlgebraShape> comb_shapes_from_operator(const LabeledOperator& op) {
  // operator factors are B_n ... B_0; the chain lists B_0 ... B_n
  std::vector<AlgebraShape> shapes;
  for (Index i = op.space().num_factors(); i-- > 0;) shapes.push_back(op.space().factor(i).shape);
  return shapes;
}

int run_verify(const std::string& kind, const std::string& input, const std::string& section_path,
               const std::string& spec_path, const std::string& method, double tol, bool as_json) {
  const json in = load_or_die(input);

  if (kind == "cp" || kind == "channel") {
    CpMapChoi m = [&] {
      try {
        return io::choi_from_json(in, tol);
      } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        std::exit(2);
      }
    }();
    if (!is_cp(m, tol))
      return report(false, kind, "Choi matrix is not positive semidefinite", 0.0, as_json);
    if (kind == "channel" && !is_tp(m, tol)) {
      const LabeledOperator red = partial_trace(m.choi(), m.out_labels());
      const double r = (red.matrix() - Mat::Identity(m.in_dim(), m.in_dim())).norm();
      return report(false, kind, "partial trace over the output is not the identity", r, as_json);
    }
    return report(true, kind, "", 0.0, as_json);
  }

  if (kind == "gchannel" || kind == "gpovm" || kind == "instrument") {
    if (section_path.empty()) {
      std::cerr << "--section is required for kind " << kind << "\n";
      return 2;
    }
    SectionSpec sec = [&] {
      try {
        return io::section_from_json(load_or_die(section_path), tol);
      } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        std::exit(2);
      }
    }();
    try {
      if (kind == "gchannel") {
        const CpMapChoi m = io::choi_from_json(in, tol);
        if (!is_cp(m, tol))
          return report(false, kind, "Choi matrix is not positive semidefinite", 0.0, as_json);
        const double r = gchannel_residual(m, sec);
        const bool ok = is_generalized_channel(m, sec, tol);
        return report(ok, kind, "reduced Choi matrix leaves I + (K^T)^perp", r, as_json);
      }
      if (kind == "gpovm") {
        GeneralizedPovm povm{io::elements_from_json(in, tol)};
        const bool ok = is_generalized_povm(povm, sec, tol);
        Mat sum = Mat::Zero(sec.space().dim(), sec.space().dim());
        for (const auto& e : povm.elements) sum += e.matrix();
        const double r =
            sec.J.component_norm(sum - Mat::Identity(sec.space().dim(), sec.space().dim()));
        return report(ok, kind, "element sum leaves I + K^perp (or an element is not positive)",
                      r, as_json);
      }
      const CpMapChoi m = io::choi_from_json(in, tol);
      const Index outcomes = m.out_space().factor(0).shape.num_blocks();
      const bool ok = is_generalized_instrument(m, sec, outcomes, tol);
      return report(ok, kind, "tooth sum is not a generalized channel", 0.0, as_json);
    } catch (const std::invalid_argument& e) {
      std::cerr << e.what() << "\n";
      return 2;
    } catch (const error& e) {
      return report(false, kind, e.what(), 0.0, as_json);
    }
  }

  if (kind == "ppovm") {
    try {
      const auto elems = io::elements_from_json(in, tol);
      const TensorSpace& sp = elems.front().space();
      if (sp.num_factors() != 2) {
        std::cerr << "ppovm elements must live on two factors H1 x H0\n";
        return 2;
      }
      const LabeledOperator tester = tester_from_elements(elems);
      const std::vector<AlgebraShape> shapes{sp.factor(1).shape, sp.factor(0).shape};
      const bool ok = is_tester(tester, shapes, static_cast<Index>(elems.size()), tol);
      return report(ok, kind, "elements do not assemble into a 1-tester", 0.0, as_json);
    } catch (const std::invalid_argument& e) {
      std::cerr << e.what() << "\n";
      return 2;
    } catch (const error& e) {
      return report(false, kind, e.what(), 0.0, as_json);
    }
  }

  if (kind == "supermap" || kind == "comb" || kind == "tester") {
    try {
      const LabeledOperator op = io::operator_from_json(in, tol);
      SupermapSpec spec = [&]() {
        if (!spec_path.empty()) return io::spec_from_json(load_or_die(spec_path), tol).spec;
        if (kind == "comb") return comb_spec(comb_shapes_from_operator(op), tol);
        if (kind == "tester") {
          // leading classical factor carries the outcomes
          std::vector<AlgebraShape> shapes = comb_shapes_from_operator(op);
          if (!shapes.back().is_classical()) throw error("tester: leading factor is not classical");
          return comb_spec(shapes, tol);
        }
        throw error("supermap verification needs --spec");
      }();
      const Index level = spec.levels();
      bool ok_sub = true, ok_chain = true;
      double residual = 0;
      int rung = -1;
      std::string witness;
      if (method == "subspace" || method == "both") {
        ok_sub = membership_by_subspace(op, spec, level, tol);
        if (!ok_sub) witness = "operator leaves J_n intersect c_n S(A_n)";
      }
      if (method == "chain" || method == "both") {
        const ChainReport rep = membership_by_chain(op, spec, level, tol);
        ok_chain = rep.ok;
        if (!rep.ok) {
          witness = witness.empty() ? rep.what : witness + "; " + rep.what;
          residual = rep.residual;
          rung = rep.failed_rung;
        }
      }
      return report(ok_sub && ok_chain, kind, witness, residual, as_json, rung);
    } catch (const std::invalid_argument& e) {
      std::cerr << e.what() << "\n";
      return 2;
    } catch (const error& e) {
      std::cerr << e.what() << "\n";
      return 2;
    }
  }

  std::cerr << "unknown kind '" << kind << "'\n";
  return 2;
}

int run_decompose(const std::string& method, const std::string& input,
                  const std::string& section_path, const std::string& spec_path,
                  const std::string& out_dir, double tol) {
  namespace fs = std::filesystem;
  const json in = load_or_die(input);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "cannot create output directory " << out_dir << "\n";
    return 2;
  }
  json manifest{{"method", method}, {"input", input}, {"tol", tol}};

  try {
    if (method == "simple-factor") {
      if (section_path.empty()) {
        std::cerr << "--section is required for simple-factor\n";
        return 2;
      }
      const SectionSpec sec = io::section_from_json(load_or_die(section_path), tol);
      const CpMapChoi x = io::choi_from_json(in, tol);
      const SimpleFactorization f = factor_simple(x, sec, tol);
      const double resid = (recompose_simple(f, tol).choi().matrix() - x.choi().matrix()).norm();
      io::save_file(out_dir + "/c.json", io::operator_to_json(f.c));
      io::save_file(out_dir + "/lambda.json", io::choi_to_json(f.lambda));
      manifest["residual"] = resid;
      manifest["support_rank"] = static_cast<Index>(std::lround(f.support.trace().real()));
      manifest["components"] = {"c.json", "lambda.json"};
      io::save_file(out_dir + "/manifest.json", manifest);
      return resid <= tol * 100 ? 0 : 1;
    }
    if (method == "semilocalize") {
      const LabeledOperator x = io::operator_from_json(in, tol);
      const SemilocalSplit split = semilocalize(x, tol);
      json files = json::array();
      double resid = 0;
      for (size_t n = 0; n < split.x0.size(); ++n) {
        const std::string f = "x0_" + std::to_string(n) + ".json";
        io::save_file(out_dir + "/" + f, io::operator_to_json(split.x0[n]));
        files.push_back(f);
      }
      for (size_t m = 0; m < split.x1.size(); ++m)
        for (size_t n = 0; n < split.x1[m].size(); ++n) {
          const std::string f = "x1_" + std::to_string(m) + "_" + std::to_string(n) + ".json";
          io::save_file(out_dir + "/" + f, io::choi_to_json(split.x1[m][n]));
          files.push_back(f);
        }
      manifest["ancilla_dim"] = split.ancilla_dim;
      manifest["residual"] = resid;  // block reconstructions are verified during the split
      manifest["components"] = files;
      io::save_file(out_dir + "/manifest.json", manifest);
      return 0;
    }
    if (method == "ladder") {
      if (spec_path.empty()) {
        std::cerr << "--spec is required for ladder\n";
        return 2;
      }
      const SupermapSpec spec = io::spec_from_json(load_or_die(spec_path), tol).spec;
      const LabeledOperator x = io::operator_from_json(in, tol);
      const LadderDecomposition dec = ladder_decompose(x, spec, tol);
      const double resid = ladder_reconstruction_residual(dec, x, spec);
      json files = json::array();
      for (size_t m = 0; m < dec.stages.size(); ++m)
        for (const auto& [key, st] : dec.stages[m]) {
          const std::string f =
              "stage" + std::to_string(m + 1) + "_" + std::to_string(key) + ".json";
          io::save_file(out_dir + "/" + f, io::choi_to_json(st));
          files.push_back(f);
        }
      if (dec.x0) {
        io::save_file(out_dir + "/x0.json", io::operator_to_json(*dec.x0));
        files.push_back("x0.json");
      }
      if (dec.x0_chan) {
        io::save_file(out_dir + "/x0.json", io::choi_to_json(*dec.x0_chan));
        files.push_back("x0.json");
      }
      manifest["ancilla_dim"] = dec.ancilla_dim;
      manifest["residual"] = resid;
      manifest["components"] = files;
      io::save_file(out_dir + "/manifest.json", manifest);
      return resid <= tol * 100 ? 0 : 1;
    }
    if (method == "realize") {
      CpMapChoi x = io::choi_from_json(in, tol);
      const ChannelRealization real = realize_on_channels(x, tol);
      io::save_file(out_dir + "/rho.json", io::operator_to_json(real.rho));
      io::save_file(out_dir + "/lambda.json", io::choi_to_json(real.lambda));
      io::save_file(out_dir + "/omega.json", io::operator_to_json(real.omega));
      // residual: evaluate the realization on seeded channels
      double resid = 0;
      const TensorSpace& cb = x.in_space();
      const AlgebraShape h1 = cb.factor(0).shape, h0 = cb.factor(1).shape;
      const double t0 = static_cast<double>(h0.total_dim());
      for (uint64_t s = 1; s <= 20; ++s) {
        const CpMapChoi ch = random_channel(h0, h1, 2, Seed{s});
        const LabeledOperator xe(cb, ch.choi().matrix());
        const Mat lhs = apply_map(x, xe).matrix() / t0;
        const LabeledOperator psiA = max_entangled(
            FactorLabel{700}, real.rho.space().factor(1).label, real.rho.space().factor(1).shape);
        const CpMapChoi chm(TensorSpace::single(FactorLabel{701}, h1),
                            TensorSpace::single(real.rho.space().factor(0).label, h0),
                            ch.choi().matrix());
        LabeledOperator big = tensor(chm.choi(), psiA);
        big = permute_factors(big, {0, 2, 1, 3});
        const CpMapChoi ext = CpMapChoi::from_operator(big, 2);
        const Mat rhs = apply_map(real.lambda, apply_map(ext, real.rho)).matrix();
        resid = std::max(resid, (lhs - rhs).norm());
      }
      manifest["ancilla_dim"] = real.ancilla_dim;
      manifest["residual"] = resid;
      manifest["components"] = {"rho.json", "lambda.json", "omega.json"};
      io::save_file(out_dir + "/manifest.json", manifest);
      return resid <= tol * 100 ? 0 : 1;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const error& e) {
    std::cerr << "decomposition failed: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "unknown decompose method '" << method << "'\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "qcomb: verification and decomposition toolkit for generalized channels,\n"
      "quantum combs and testers on finite-dimensional C*-algebras"};
  app.require_subcommand(1);
  double tol = default_tol();

  auto* verify = app.add_subcommand("verify", "check membership of an operator in a named set");
  std::string v_kind, v_input, v_section, v_spec, v_method = "subspace";
  bool v_json = false;
  verify->add_option("--kind", v_kind,
                     "cp|channel|gchannel|gpovm|instrument|ppovm|supermap|comb|tester")
      ->required();
  verify->add_option("--input", v_input, "operator / Choi / element-list file")->required();
  verify->add_option("--section", v_section, "section file (for gchannel/gpovm/instrument)");
  verify->add_option("--spec", v_spec, "supermap spec file");
  verify->add_option("--tol", tol, "tolerance (default 1e-9, or QCOMB_TOL)");
  verify->add_option("--method", v_method, "subspace|chain|both (supermap kinds)")
      ->check(CLI::IsMember({"subspace", "chain", "both"}));
  verify->add_flag("--json", v_json, "machine-readable result on stdout");

  auto* dec = app.add_subcommand("decompose", "factor an operator into its normal form");
  std::string d_method, d_input, d_section, d_spec, d_out;
  dec->add_option("--method", d_method, "simple-factor|semilocalize|ladder|realize")->required();
  dec->add_option("--input", d_input)->required();
  dec->add_option("--section", d_section);
  dec->add_option("--spec", d_spec);
  dec->add_option("--out", d_out, "output directory")->required();
  dec->add_option("--tol", tol);

  auto* link = app.add_subcommand("link", "link product of two labeled operators");
  std::string l_a, l_b, l_out;
  link->add_option("a", l_a)->required();
  link->add_option("b", l_b)->required();
  link->add_option("-o,--output", l_out)->required();
  link->add_option("--tol", tol);

  auto* apply = app.add_subcommand("apply", "apply a supermap to a member one level down");
  std::string a_super, a_member, a_spec, a_out;
  apply->add_option("super", a_super)->required();
  apply->add_option("member", a_member)->required();
  apply->add_option("--spec", a_spec)->required();
  apply->add_option("-o,--output", a_out);
  apply->add_option("--tol", tol);

  auto* equiv = app.add_subcommand("equiv", "test equivalence of two maps");
  std::string e_a, e_b, e_section, e_spec;
  equiv->add_option("a", e_a)->required();
  equiv->add_option("b", e_b)->required();
  equiv->add_option("--section", e_section);
  equiv->add_option("--spec", e_spec);
  equiv->add_option("--tol", tol);

  auto* sample = app.add_subcommand("sample", "seeded random generation");
  std::string s_kind, s_out, s_section, s_spec;
  uint64_t s_seed = 1;
  std::vector<Index> s_blocks{2}, s_out_blocks{2};
  Index s_rank = 2;
  sample->add_option("--kind", s_kind, "state|channel|section-element|gchannel|comb")->required();
  sample->add_option("--seed", s_seed)->required();
  sample->add_option("-o,--output", s_out)->required();
  sample->add_option("--blocks", s_blocks, "input algebra blocks");
  sample->add_option("--out-blocks", s_out_blocks, "output algebra blocks");
  sample->add_option("--kraus-rank", s_rank);
  sample->add_option("--section", s_section);
  sample->add_option("--spec", s_spec);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) return run_verify(v_kind, v_input, v_section, v_spec, v_method, tol, v_json);
    if (*dec) return run_decompose(d_method, d_input, d_section, d_spec, d_out, tol);
    if (*link) {
      const LabeledOperator a = io::operator_from_json(load_or_die(l_a), tol);
      const LabeledOperator b = io::operator_from_json(load_or_die(l_b), tol);
      io::save_file(l_out, io::operator_to_json(link_product(a, b, tol)));
      return 0;
    }
    if (*apply) {
      const SupermapSpec spec = io::spec_from_json(load_or_die(a_spec), tol).spec;
      const LabeledOperator super = io::operator_from_json(load_or_die(a_super), tol);
      const LabeledOperator member = io::operator_from_json(load_or_die(a_member), tol);
      LabeledOperator out = [&] {
        try {
          return apply_supermap(super, member, spec, tol);
        } catch (const error& e) {
          std::cerr << e.what() << "\n";
          std::exit(1);
        }
      }();
      if (!a_out.empty()) io::save_file(a_out, io::operator_to_json(out));
      if (out.space().factor(0).shape.is_classical()) {
        json probs = json::array();
        for (Index i = 0; i < out.dim(); ++i) probs.push_back(out.matrix()(i, i).real());
        std::cout << probs.dump() << "\n";
      } else {
        std::cout << "state on " << out.dim() << "-dimensional output"
                  << (a_out.empty() ? "" : " written") << "\n";
      }
      return 0;
    }
    if (*equiv) {
      if (!e_section.empty()) {
        const SectionSpec sec = io::section_from_json(load_or_die(e_section), tol);
        const CpMapChoi x1 = io::choi_from_json(load_or_die(e_a), tol);
        const CpMapChoi x2 = io::choi_from_json(load_or_die(e_b), tol);
        try {
          return are_equivalent(x1, x2, sec, tol) ? 0 : 1;
        } catch (const error& e) {
          std::cerr << e.what() << "\n";
          return 1;
        }
      }
      if (!e_spec.empty()) {
        const SupermapSpec spec = io::spec_from_json(load_or_die(e_spec), tol).spec;
        const LabeledOperator x1 = io::operator_from_json(load_or_die(e_a), tol);
        const LabeledOperator x2 = io::operator_from_json(load_or_die(e_b), tol);
        try {
          return supermap_equivalent(x1, x2, spec, spec.levels(), tol) ? 0 : 1;
        } catch (const error& e) {
          std::cerr << e.what() << "\n";
          return 1;
        }
      }
      std::cerr << "equiv needs --section or --spec\n";
      return 2;
    }
    if (*sample) {
      const Seed seed{s_seed};
      if (s_kind == "state") {
        const AlgOperator rho = random_state(AlgebraShape(s_blocks), seed);
        io::save_file(s_out, io::operator_to_json(LabeledOperator::lift(FactorLabel{0}, rho)));
        return 0;
      }
      if (s_kind == "channel") {
        const CpMapChoi m =
            random_channel(AlgebraShape(s_blocks), AlgebraShape(s_out_blocks), s_rank, seed);
        io::save_file(s_out, io::choi_to_json(m));
        return 0;
      }
      if (s_kind == "section-element") {
        const SectionSpec sec = io::section_from_json(load_or_die(s_section), tol);
        io::save_file(s_out, io::operator_to_json(random_section_element(sec, seed)));
        return 0;
      }
      if (s_kind == "gchannel") {
        const SectionSpec sec = io::section_from_json(load_or_die(s_section), tol);
        int maxid = 0;
        for (const auto& f : sec.space().factors()) maxid = std::max(maxid, f.label.id);
        const TensorSpace out =
            TensorSpace::single(FactorLabel{maxid + 1}, AlgebraShape(s_out_blocks));
        io::save_file(s_out, io::choi_to_json(random_generalized_channel(sec, out, seed)));
        return 0;
      }
      if (s_kind == "comb") {
        const SupermapSpec spec = io::spec_from_json(load_or_die(s_spec), tol).spec;
        const auto [x, ladder] = random_comb(spec, seed);
        io::save_file(s_out, io::operator_to_json(x));
        return 0;
      }
      std::cerr << "unknown sample kind '" << s_kind << "'\n";
      return 2;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 2;
}

// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#ifndef QCOMB_COMB_HPP
#define QCOMB_COMB_HPP

#include "qcomb/gchannel.hpp"

#include <map>

namespace qcomb {

//=========================================================================
// The tower of generalized supermaps C_J(B₀,…,B_n)
//
// Level-m members live on A_m = B_m ⊗ … ⊗ B₀ and are cut out by the
// recursion J_m = S_m^{-1}(tilde J_{m-1}) together with the trace constant
// c_m = Π_l t_{B_{m-1-2l}}. Membership is implemented twice: through the
// materialized subspaces and through the partial-trace chain; the two
// routes are cross-checked in the tests.
//=========================================================================

struct SupermapSpec {
  SectionSpec base;                       // over the B₀ space; τ must lie in K
  std::vector<AlgebraShape> chain;        // B₁ … B_n
  std::vector<FactorLabel> chain_labels;  // labels of B₁ … B_n
  std::vector<TensorSpace> spaces;        // spaces[m] = A_m, m = 0..n
  std::vector<Subspace> J;                // J[m] over spaces[m]
  std::vector<double> c;                  // c[m], with c[0] = 1

  Index levels() const { return static_cast<Index>(chain.size()); }

  // unit trace of B_i (i = 0 refers to the base algebra)
  double unit_trace(Index i) const {
    if (i == 0) return static_cast<double>(base.space().dim());
    return static_cast<double>(chain[static_cast<size_t>(i - 1)].total_dim());
  }

  // relabel a shape-compatible operator onto the level-m space
  LabeledOperator at_level(const LabeledOperator& x, Index m) const {
    const TensorSpace& sp = spaces[static_cast<size_t>(m)];
    if (!x.space().shape_compatible(sp))
      throw std::invalid_argument("SupermapSpec: operator does not fit level " +
                                  std::to_string(m));
    return LabeledOperator(sp, x.matrix());
  }
};

// J_n by the recursion, cross-checked against the closed alternating
// S^{-1}/S^* form; c_n from the product formula.
inline SupermapSpec build_spec(const SectionSpec& base, const std::vector<AlgebraShape>& chain,
                               double tol = kDefaultTol, Index dim_budget = 64) {
  if (!base.tau_in_K) throw error("build_spec: the base section must contain the tracial state");
  base.validate(tol);
  SupermapSpec spec;
  spec.base = base;
  spec.chain = chain;

  int maxid = 0;
  for (const auto& f : base.space().factors()) maxid = std::max(maxid, f.label.id);
  const Index n = static_cast<Index>(chain.size());
  for (Index m = 1; m <= n; ++m)
    spec.chain_labels.push_back(FactorLabel{maxid + static_cast<int>(m)});

  spec.spaces.push_back(base.space());
  for (Index m = 1; m <= n; ++m) {
    std::vector<Factor> fs;
    fs.push_back(Factor{spec.chain_labels[static_cast<size_t>(m - 1)],
                        chain[static_cast<size_t>(m - 1)]});
    const auto& prev = spec.spaces.back().factors();
    fs.insert(fs.end(), prev.begin(), prev.end());
    spec.spaces.emplace_back(fs);
    if (spec.spaces.back().dim() > dim_budget)
      throw error("build_spec: level dimension exceeds the budget of " +
                  std::to_string(dim_budget));
  }

  spec.J.push_back(base.J);
  for (Index m = 1; m <= n; ++m) {
    const Subspace tld = tilde(spec.J.back(), tol);
    spec.J.push_back(preimage_of_partial_trace(
        tld, spec.spaces[static_cast<size_t>(m)],
        {spec.chain_labels[static_cast<size_t>(m - 1)]}, tol));
  }

  // closed form: innermost tilde(J) for odd n, J itself for even n, then
  // alternately preimages (parity of m equals parity of n) and I⊗· images
  if (n >= 1) {
    Subspace w = (n % 2 == 1) ? tilde(base.J, tol) : base.J;
    for (Index m = 1; m <= n; ++m) {
      const LabelSet lab = {spec.chain_labels[static_cast<size_t>(m - 1)]};
      const TensorSpace& sp = spec.spaces[static_cast<size_t>(m)];
      if (m % 2 == n % 2)
        w = preimage_of_partial_trace(w, sp, lab, tol);
      else
        w = embed_with_identity(w, sp, lab, tol);
    }
    if (!spec.J.back().equals(w, std::max(tol, 1e-9) * 100))
      throw error("build_spec: recursion and closed form disagree");
  }

  spec.c.push_back(1.0);
  for (Index m = 1; m <= n; ++m) {
    double cm = 1.0;
    for (Index l = 0; 2 * l <= m - 1; ++l) cm *= spec.unit_trace(m - 1 - 2 * l);
    spec.c.push_back(cm);
  }
  return spec;
}

// C_J(B₀,…,B_m) = J_m ∩ c_m 𝔖(A_m), level 0 being the section itself.
inline bool membership_by_subspace(const LabeledOperator& X, const SupermapSpec& spec,
                                   Index level, double tol = kDefaultTol) {
  const LabeledOperator x = spec.at_level(X, level);
  bool herm_ok = true;
  if (!detail::is_psd(x.matrix(), tol, &herm_ok) || !herm_ok) return false;
  const double c = spec.c[static_cast<size_t>(level)];
  if (std::abs(x.trace() - cx(c, 0)) > tol * 10 * std::max(1.0, c)) return false;
  return spec.J[static_cast<size_t>(level)].contains(x.matrix(), tol);
}

struct ChainWitness {
  std::vector<LabeledOperator> rungs;  // Y^(0) = X, …, Y^(k)
};

struct ChainReport {
  bool ok = false;
  int failed_rung = -1;  // index m of the first broken rung, -1 otherwise
  double residual = 0.0;
  std::string what;
  ChainWitness witness;
};

// Thm.-level chain characterization: Tr_{B_{n-2m}} Y^(m) factors as
// I_{B_{n-2m-1}} ⊗ Y^(m+1), with the terminal rung landing in C_J(B₀,B₁)
// (odd level) or in K (even level). The extracted Y^(m+1) is re-verified by
// reconstruction, which keeps the test sound on non-members.
inline ChainReport membership_by_chain(const LabeledOperator& X, const SupermapSpec& spec,
                                       Index level, double tol = kDefaultTol) {
  ChainReport rep;
  LabeledOperator y = spec.at_level(X, level);
  rep.witness.rungs.push_back(y);
  bool herm_ok = true;
  if (!detail::is_psd(y.matrix(), tol, &herm_ok) || !herm_ok) {
    rep.what = "operator is not positive";
    return rep;
  }
  const double scale = std::max(1.0, X.matrix().norm());
  const Index k = level / 2;
  for (Index m = 0; m < k; ++m) {
    const Index top = level - 2 * m;       // B_top gets traced
    const Index next = top - 1;            // I_{B_next} must split off
    const FactorLabel ltop = spec.chain_labels[static_cast<size_t>(top - 1)];
    const FactorLabel lnext = spec.chain_labels[static_cast<size_t>(next - 1)];
    const LabeledOperator t1 = partial_trace(y, {ltop});
    LabeledOperator ynext = partial_trace(t1, {lnext});
    ynext = LabeledOperator(ynext.space(), ynext.matrix() / spec.unit_trace(next));
    const AlgebraShape& next_shape = spec.chain[static_cast<size_t>(next - 1)];
    const Index dn = next_shape.total_dim();
    const LabeledOperator recon =
        tensor(LabeledOperator(TensorSpace::single(lnext, next_shape), Mat::Identity(dn, dn)),
               ynext);
    const double resid = (t1.matrix() - recon.matrix()).norm();
    if (resid > tol * 100 * scale) {
      rep.failed_rung = static_cast<int>(m);
      rep.residual = resid;
      rep.what = "partial trace does not factor through the identity at rung " +
                 std::to_string(m);
      return rep;
    }
    y = ynext;
    rep.witness.rungs.push_back(y);
  }
  // terminal condition
  const Index term = level - 2 * k;  // 0 or 1
  if (!membership_by_subspace(y, spec, term, tol)) {
    rep.what = term == 0 ? "terminal rung is not in the section"
                         : "terminal rung is not a generalized channel";
    return rep;
  }
  rep.ok = true;
  return rep;
}

// Membership for quantum N-combs (K = full over B₀); factors of X are
// expected in the order B_{2N-1}, …, B₀.
inline SupermapSpec comb_spec(const std::vector<AlgebraShape>& shapes, double tol = kDefaultTol,
                              Index dim_budget = 64) {
  if (shapes.empty()) throw std::invalid_argument("comb_spec: no algebras");
  const SectionSpec base =
      SectionSpec::full_states(TensorSpace::single(FactorLabel{0}, shapes[0]));
  std::vector<AlgebraShape> chain(shapes.begin() + 1, shapes.end());
  return build_spec(base, chain, tol, dim_budget);
}

inline bool is_comb(const LabeledOperator& X, const std::vector<AlgebraShape>& shapes,
                    double tol = kDefaultTol) {
  if (shapes.size() % 2 != 0) throw std::invalid_argument("is_comb: odd number of algebras");
  const SupermapSpec spec = comb_spec(shapes, tol);
  return membership_by_subspace(X, spec, spec.levels(), tol);
}

// N-testers are C(B₀,…,B_{2N-1},C^k); the classical factor comes first in
// the operator's factor order.
inline bool is_tester(const LabeledOperator& X, const std::vector<AlgebraShape>& shapes,
                      Index outcomes, double tol = kDefaultTol) {
  std::vector<AlgebraShape> with_cls = shapes;
  with_cls.push_back(AlgebraShape::classical(outcomes));
  const SupermapSpec spec = comb_spec(with_cls, tol);
  return membership_by_subspace(X, spec, spec.levels(), tol);
}

// Tester Choi matrix from generalized-POVM elements: Σ_j |j⟩⟨j| ⊗ M_j^T.
inline LabeledOperator tester_from_elements(const std::vector<LabeledOperator>& elements) {
  if (elements.empty()) throw std::invalid_argument("tester_from_elements: empty");
  const TensorSpace& sp = elements.front().space();
  const Index m = static_cast<Index>(elements.size());
  const Index d = sp.dim();
  int maxid = 0;
  for (const auto& f : sp.factors()) maxid = std::max(maxid, f.label.id);
  std::vector<Factor> fs;
  fs.push_back(Factor{FactorLabel{maxid + 1}, AlgebraShape::classical(m)});
  fs.insert(fs.end(), sp.factors().begin(), sp.factors().end());
  Mat big = Mat::Zero(m * d, m * d);
  for (Index j = 0; j < m; ++j)
    big.block(j * d, j * d, d, d) = elements[static_cast<size_t>(j)].matrix().transpose();
  return LabeledOperator(TensorSpace(fs), std::move(big));
}

namespace detail {

// zero everything outside one central block (q Z q for a minimal central
// projection q given by a multiblock id)
inline Mat mask_multiblock(const TensorSpace& sp, const Mat& z, Index mb) {
  Mat out = Mat::Zero(z.rows(), z.cols());
  for (Index r = 0; r < z.rows(); ++r) {
    if (sp.multiblock_of(r) != mb) continue;
    for (Index c = 0; c < z.cols(); ++c)
      if (sp.multiblock_of(c) == mb) out(r, c) = z(r, c);
  }
  return out;
}

}  // namespace detail

// Φ_Y(X) = Y * X, computed both as one global link product and through the
// central-block expansion ⊕_i Σ_I ((q_i ⊗ q(I))Y) * (q(I)X); the two routes
// must agree, and the result must be a state on B_{n+1}.
inline LabeledOperator apply_supermap(const LabeledOperator& Y, const LabeledOperator& X,
                                      const SupermapSpec& spec, double tol = kDefaultTol) {
  const Index n = spec.levels();
  if (n < 1) throw std::invalid_argument("apply_supermap: spec has no levels");
  if (!membership_by_subspace(Y, spec, n, tol))
    throw error("apply_supermap: Y is not a level-" + std::to_string(n) + " member");
  if (!membership_by_subspace(X, spec, n - 1, tol))
    throw error("apply_supermap: X is not a level-" + std::to_string(n - 1) + " member");
  const LabeledOperator y = spec.at_level(Y, n);
  const LabeledOperator x = spec.at_level(X, n - 1);
  const LabeledOperator global = link_product(y, x);

  const TensorSpace& sy = y.space();
  const TensorSpace& sx = x.space();
  Mat block_sum = Mat::Zero(global.dim(), global.dim());
  for (Index mb = 0; mb < sy.num_multiblocks(); ++mb) {
    // split the A_n block id into (B_n block, lower multiblock)
    const Index lower_blocks = sx.num_multiblocks();
    const Index lower = mb % lower_blocks;
    const LabeledOperator ym(sy, detail::mask_multiblock(sy, y.matrix(), mb));
    const LabeledOperator xm(sx, detail::mask_multiblock(sx, x.matrix(), lower));
    block_sum += link_product(ym, xm).matrix();
  }
  if ((block_sum - global.matrix()).norm() > tol * 100 * std::max(1.0, global.matrix().norm()))
    throw error("apply_supermap: blockwise and global contraction disagree");

  if (std::abs(global.trace() - cx(1, 0)) > tol * 100)
    throw error("apply_supermap: output is not normalized");
  if (!detail::is_psd(global.matrix(), tol * 100))
    throw error("apply_supermap: output is not positive");
  return global;
}

// Equivalence at level m: X₁ − X₂ ∈ B_m ⊗ (J_{m-1}^T)^⊥.
inline bool supermap_equivalent(const LabeledOperator& X1, const LabeledOperator& X2,
                                const SupermapSpec& spec, Index level,
                                double tol = kDefaultTol) {
  if (level < 1 || level > spec.levels())
    throw std::invalid_argument("supermap_equivalent: bad level");
  if (!membership_by_subspace(X1, spec, level, tol) ||
      !membership_by_subspace(X2, spec, level, tol))
    throw error("supermap_equivalent: inputs are not members");
  const Mat diff = spec.at_level(X1, level).matrix() - spec.at_level(X2, level).matrix();
  const Subspace jt = spec.J[static_cast<size_t>(level - 1)].transposed();
  const Index dout = spec.chain[static_cast<size_t>(level - 1)].total_dim();
  return detail::input_side_component_norm(diff, dout, jt) <=
         tol * std::max(1.0, spec.at_level(X1, level).matrix().norm());
}

// Members of the top level having the same value on every equivalence class
// one level down: the extra constraint X ∈ B_{n+1} ⊗ B_n ⊗ J_{n-1}.
inline bool respects_equivalence(const LabeledOperator& X, const SupermapSpec& spec,
                                 double tol = kDefaultTol) {
  const Index n = spec.levels();
  if (n < 2) throw std::invalid_argument("respects_equivalence: need at least two levels");
  if (!membership_by_subspace(X, spec, n, tol)) return false;
  const LabeledOperator x = spec.at_level(X, n);
  const Index dout = spec.chain[static_cast<size_t>(n - 1)].total_dim() *
                     spec.chain[static_cast<size_t>(n - 2)].total_dim();
  const Subspace& w = spec.J[static_cast<size_t>(n - 2)];
  return detail::input_side_projection_residual(x.matrix(), dout, w) <=
         tol * 100 * std::max(1.0, x.matrix().norm());
}

// Cross-check for the full state space: the same set is the intersection
// with a permuted-chain tower (B_n, B_{n+1}, B₀, …) for even argument level,
// (B₀, B_n, B_{n+1}, B₁, …) for odd.
inline bool respects_equivalence_by_permutation(const LabeledOperator& X,
                                                const SupermapSpec& spec,
                                                double tol = kDefaultTol) {
  const Index n = spec.levels();
  if (n < 2) throw std::invalid_argument("respects_equivalence_by_permutation: need two levels");
  if (spec.base.space().num_factors() != 1 ||
      spec.base.J.dim() != spec.base.space().num_cells())
    throw std::invalid_argument(
        "respects_equivalence_by_permutation: only available for K = full states");
  if (!membership_by_subspace(X, spec, n, tol)) return false;
  const Index n_args = n - 1;
  // chain algebras indexed 0..n in tower order
  auto algebra = [&](Index i) -> AlgebraShape {
    return i == 0 ? spec.base.space().factor(0).shape : spec.chain[static_cast<size_t>(i - 1)];
  };
  std::vector<AlgebraShape> permuted;     // B'_0 … B'_n in tower order
  std::vector<Index> source;              // tower index drawn from
  if (n_args % 2 == 0) {
    source = {n - 1, n};
    for (Index i = 0; i <= n - 2; ++i) source.push_back(i);
  } else {
    source = {0, n - 1, n};
    for (Index i = 1; i <= n - 2; ++i) source.push_back(i);
  }
  for (Index i : source) permuted.push_back(algebra(i));
  // operator factor order is B'_n … B'_0; X's factors are B_n … B_0, with
  // tower index i at position n - i
  std::vector<Index> order;
  for (Index slot = n; slot >= 0; --slot) order.push_back(n - source[static_cast<size_t>(slot)]);
  const LabeledOperator xp = permute_factors(spec.at_level(X, n), order);
  const SupermapSpec pspec = comb_spec(permuted, tol);
  return membership_by_subspace(xp, pspec, n, tol);
}

// Comb equivalence: X₁ − X₂ ∈ B_{2N+1} ⊗ (Ĵ_{2N-1}^T)^⊥ ⊗ B₀ with Ĵ built
// over B₁ … B_{2N}; operators carry factors B_{2N+1} … B₀.
inline bool comb_equivalent(const LabeledOperator& X1, const LabeledOperator& X2,
                            const std::vector<AlgebraShape>& shapes,
                            double tol = kDefaultTol) {
  if (shapes.size() % 2 != 0 || shapes.size() < 4)
    throw std::invalid_argument("comb_equivalent: need an even count of at least 4 algebras");
  if (!is_comb(X1, shapes, tol) || !is_comb(X2, shapes, tol))
    throw error("comb_equivalent: inputs are not combs");
  const Index twoN1 = static_cast<Index>(shapes.size()) - 1;  // index of B_{2N+1}
  std::vector<AlgebraShape> inner(shapes.begin() + 1, shapes.end() - 1);
  const SupermapSpec hat = comb_spec(inner, tol);
  const Subspace hat_perp = hat.J.back().transposed().orthocomplement();
  // assemble B_{2N+1} ⊗ (…)^⊥ ⊗ B₀ on the factor order of the comb space
  const SupermapSpec full_spec = comb_spec(shapes, tol);
  const TensorSpace& sp = full_spec.spaces.back();
  const TensorSpace top = TensorSpace::single(sp.factor(0).label, shapes.back());
  const TensorSpace bottom =
      TensorSpace::single(sp.factor(twoN1).label, shapes.front());
  // relabel the middle factors onto the comb space labels
  std::vector<FactorLabel> mid_labels;
  for (Index i = 1; i < twoN1; ++i) mid_labels.push_back(sp.factor(i).label);
  const Subspace mid(hat_perp.space().relabeled(mid_labels), hat_perp.basis());
  const Subspace w =
      tensor_of_subspaces(tensor_of_subspaces(Subspace::full(top), mid), Subspace::full(bottom));
  const Mat diff =
      full_spec.at_level(X1, twoN1).matrix() - full_spec.at_level(X2, twoN1).matrix();
  return w.contains(diff, tol * 10);
}

// Combs acting identically on equivalent combs: membership in the original
// ordering and in Comb(B₀,B₁,B_{2N},B_{2N+1},B₂,…,B_{2N-1}).
inline bool comb_respects_equivalence(const LabeledOperator& X,
                                      const std::vector<AlgebraShape>& shapes,
                                      double tol = kDefaultTol) {
  if (shapes.size() % 2 != 0 || shapes.size() < 4)
    throw std::invalid_argument("comb_respects_equivalence: need ≥ 4 algebras");
  if (!is_comb(X, shapes, tol)) return false;
  const Index m = static_cast<Index>(shapes.size());  // 2N+2
  const Index twoN1 = m - 1;
  // permuted tower order (B'_0 … B'_{2N+1})
  std::vector<Index> source = {0, 1, twoN1 - 1, twoN1};
  for (Index i = 2; i <= twoN1 - 2; ++i) source.push_back(i);
  std::vector<AlgebraShape> permuted;
  for (Index i : source) permuted.push_back(shapes[static_cast<size_t>(i)]);
  // operator factor order: B'_{2N+1} … B'_0; X has B_i at position twoN1 - i
  std::vector<Index> order;
  for (Index slot = twoN1; slot >= 0; --slot)
    order.push_back(twoN1 - source[static_cast<size_t>(slot)]);
  const SupermapSpec full_spec = comb_spec(shapes, tol);
  const LabeledOperator xp = permute_factors(full_spec.at_level(X, twoN1), order);
  return is_comb(xp, permuted, tol);
}

}  // namespace qcomb

#endif

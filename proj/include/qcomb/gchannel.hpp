// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#ifndef QCOMB_GCHANNEL_HPP
#define QCOMB_GCHANNEL_HPP

#include "qcomb/subspace.hpp"

namespace qcomb {

//=========================================================================
// Generalized channels with respect to a section K = J ∩ 𝔖(A)
//
// Convex sets are always represented by a (J, ρ) pair: the spanned subspace
// plus a designated state of K. Membership tests reduce to
//   Tr_B X ∈ I_A + (J^T)^⊥           (generalized channel)
//   X₁ − X₂ ∈ B ⊗ (J^T)^⊥           (equivalence)
//=========================================================================

struct SectionSpec {
  Subspace J;
  LabeledOperator rho;
  bool tau_in_K = false;

  const TensorSpace& space() const { return J.space(); }

  void validate(double tol = kDefaultTol) const {
    if (!rho.space().same_factors(J.space()))
      throw std::invalid_argument("SectionSpec: rho lives on a different space");
    if (!J.contains(rho.matrix(), tol)) throw error("SectionSpec: rho is not in J");
    if (!detail::is_psd(rho.matrix(), tol)) throw error("SectionSpec: rho is not positive");
    if (std::abs(rho.trace() - cx(1, 0)) > 10 * tol)
      throw error("SectionSpec: rho is not normalized");
    if (tau_in_K) {
      const Mat tau = Mat::Identity(J.space().dim(), J.space().dim()) /
                      static_cast<double>(J.space().dim());
      if (!J.contains(tau, tol)) throw error("SectionSpec: tau_in_K set but tau is not in J");
    }
  }

  // K = all states of the space
  static SectionSpec full_states(const TensorSpace& space) {
    const Index d = space.dim();
    SectionSpec s{Subspace::full(space),
                  LabeledOperator(space, Mat::Identity(d, d) / static_cast<double>(d)), true};
    return s;
  }

  // Choi matrices of channels out of the trailing `in` factors, normalized:
  // J = Tr_{out part}^{-1}([I_{in part}]), ρ = τ. The leading
  // `out_factor_count` factors of `space` form B₁, the rest B₀.
  static SectionSpec channel_section(const TensorSpace& space, Index out_factor_count,
                                     double tol = kDefaultTol) {
    if (out_factor_count < 1 || out_factor_count >= space.num_factors())
      throw std::invalid_argument("channel_section: bad factor split");
    LabelSet out_labels;
    std::vector<Factor> in_factors;
    for (Index i = 0; i < space.num_factors(); ++i) {
      if (i < out_factor_count)
        out_labels.insert(space.factor(i).label);
      else
        in_factors.push_back(space.factor(i));
    }
    const TensorSpace in_space{in_factors};
    const Subspace j0 = Subspace::of_identity(in_space);
    const Index d = space.dim();
    SectionSpec s{preimage_of_partial_trace(j0, space, out_labels, tol),
                  LabeledOperator(space, Mat::Identity(d, d) / static_cast<double>(d)), true};
    return s;
  }

  // States with the outcome statistics of `povm` fixed at those of rho_ref:
  // J = S_E^{-1}([λ]), λ_i = Tr(E_i ρ).
  static SectionSpec fixed_povm_section(const std::vector<LabeledOperator>& povm,
                                        const LabeledOperator& rho_ref,
                                        double tol = kDefaultTol) {
    if (povm.empty()) throw std::invalid_argument("fixed_povm_section: empty POVM");
    const TensorSpace& sp = povm.front().space();
    const Index k = static_cast<Index>(povm.size());
    const Index d = sp.dim();
    // Choi of the POVM channel a ↦ (Tr E_i a)_i is Σ_i |i⟩⟨i| ⊗ E_i^T
    int maxid = 0;
    for (const auto& f : sp.factors()) maxid = std::max(maxid, f.label.id);
    const TensorSpace out = TensorSpace::single(FactorLabel{maxid + 1}, AlgebraShape::classical(k));
    Mat choi = Mat::Zero(k * d, k * d);
    for (Index i = 0; i < k; ++i)
      choi.block(i * d, i * d, d, d) = povm[static_cast<size_t>(i)].matrix().transpose();
    const CpMapChoi se(out, sp, std::move(choi));
    // [λ] as a one-dimensional subspace of the classical output
    Mat lambda = Mat::Zero(k, k);
    for (Index i = 0; i < k; ++i)
      lambda(i, i) = (povm[static_cast<size_t>(i)].matrix().adjoint() * rho_ref.matrix()).trace();
    const Subspace j0 = Subspace::span(out, {lambda}, tol);
    SectionSpec s{preimage_under_map(se, j0, tol), rho_ref, false};
    // τ qualifies iff the reference statistics are those of τ
    const Mat tau = Mat::Identity(d, d) / static_cast<double>(d);
    s.tau_in_K = s.J.contains(tau, tol);
    return s;
  }
};

namespace detail {

// ‖(id_out ⊗ P_W) big‖ for big laid out on out ⊗ W.space()
inline double input_side_component_norm(const Mat& big, Index dout, const Subspace& W) {
  const TensorSpace& ws = W.space();
  const Index din = ws.dim();
  double acc = 0.0;
  for (Index j = 0; j < W.dim(); ++j) {
    const Mat wj = devectorize(ws, W.basis().col(j));
    for (Index o = 0; o < dout; ++o)
      for (Index op = 0; op < dout; ++op) {
        cx s(0, 0);
        for (Index t = 0; t < ws.num_cells(); ++t) {
          const auto [u, v] = ws.cell(t);
          s += std::conj(wj(u, v)) * big(o * din + u, op * din + v);
        }
        acc += std::norm(s);
      }
  }
  return std::sqrt(acc);
}

// ‖big − (id_out ⊗ P_W) big‖
inline double input_side_projection_residual(const Mat& big, Index dout, const Subspace& W) {
  const TensorSpace& ws = W.space();
  const Index din = ws.dim();
  Mat proj = Mat::Zero(big.rows(), big.cols());
  for (Index j = 0; j < W.dim(); ++j) {
    const Mat wj = devectorize(ws, W.basis().col(j));
    for (Index o = 0; o < dout; ++o)
      for (Index op = 0; op < dout; ++op) {
        cx s(0, 0);
        for (Index t = 0; t < ws.num_cells(); ++t) {
          const auto [u, v] = ws.cell(t);
          s += std::conj(wj(u, v)) * big(o * din + u, op * din + v);
        }
        for (Index t = 0; t < ws.num_cells(); ++t) {
          const auto [u, v] = ws.cell(t);
          proj(o * din + u, op * din + v) += s * wj(u, v);
        }
      }
  }
  return (big - proj).norm();
}

}  // namespace detail

// Thm.-level membership: X ⪰ 0 and Tr_B X_Φ ∈ I_A + (K^T)^⊥.
inline bool is_generalized_channel(const CpMapChoi& X, const SectionSpec& K,
                                   double tol = kDefaultTol) {
  if (!X.in_space().shape_compatible(K.space()))
    throw std::invalid_argument("is_generalized_channel: input space mismatch with section");
  if (!is_cp(X, tol)) return false;
  const LabeledOperator red = partial_trace(X.choi(), X.out_labels());
  const Mat diff = red.matrix() - Mat::Identity(X.in_dim(), X.in_dim());
  const Subspace jt = K.J.transposed();
  return jt.component_norm(diff) <= tol * std::max(1.0, red.matrix().norm());
}

// Equal restriction to K for two cp maps: X₁ − X₂ ∈ B ⊗ (K^T)^⊥.
inline bool are_equivalent(const CpMapChoi& X1, const CpMapChoi& X2, const SectionSpec& K,
                           double tol = kDefaultTol) {
  if (!X1.in_space().shape_compatible(X2.in_space()) ||
      !X1.out_space().shape_compatible(X2.out_space()) ||
      !X1.in_space().shape_compatible(K.space()))
    throw std::invalid_argument("are_equivalent: map shapes differ");
  if (!is_cp(X1, tol) || !is_cp(X2, tol))
    throw error("are_equivalent: inputs are not cp maps");
  const Mat diff = X1.choi().matrix() - X2.choi().matrix();
  const Subspace jt = K.J.transposed();
  return detail::input_side_component_norm(diff, X1.out_dim(), jt) <=
         tol * std::max(1.0, X1.choi().matrix().norm());
}

struct GeneralizedPovm {
  std::vector<LabeledOperator> elements;
  Index outcomes() const { return static_cast<Index>(elements.size()); }
};

// Σ_j M_j ∈ I_A + K^⊥ with every element positive.
inline bool is_generalized_povm(const GeneralizedPovm& M, const SectionSpec& K,
                                double tol = kDefaultTol) {
  if (M.elements.empty()) return false;
  Mat sum = Mat::Zero(K.space().dim(), K.space().dim());
  for (const auto& e : M.elements) {
    if (!e.space().shape_compatible(K.space()))
      throw std::invalid_argument("is_generalized_povm: element space mismatch");
    bool herm_ok = true;
    if (!detail::is_psd(e.matrix(), tol, &herm_ok) || !herm_ok) return false;
    sum += e.matrix();
  }
  const Mat diff = sum - Mat::Identity(K.space().dim(), K.space().dim());
  return K.J.component_norm(diff) <= tol * std::max(1.0, sum.norm());
}

// M_j − N_j ∈ K^⊥ for every outcome.
inline bool povm_equivalent(const GeneralizedPovm& M, const GeneralizedPovm& N,
                            const SectionSpec& K, double tol = kDefaultTol) {
  if (M.outcomes() != N.outcomes())
    throw std::invalid_argument("povm_equivalent: outcome counts differ");
  for (const auto& e : M.elements)
    if (!e.space().shape_compatible(K.space()))
      throw std::invalid_argument("povm_equivalent: element space mismatch");
  for (const auto& e : N.elements)
    if (!e.space().shape_compatible(K.space()))
      throw std::invalid_argument("povm_equivalent: element space mismatch");
  for (Index j = 0; j < M.outcomes(); ++j) {
    const Mat diff = M.elements[static_cast<size_t>(j)].matrix() -
                     N.elements[static_cast<size_t>(j)].matrix();
    if (K.J.component_norm(diff) > tol * std::max(1.0, diff.norm() + 1.0)) return false;
  }
  return true;
}

// Output algebra ℂ^m ⊗ B(K₁): the first output factor is classical with m
// outcomes, X block-decomposes as Σ_j |j⟩⟨j| ⊗ X_j, and Σ_j X_j must be a
// generalized channel Choi matrix.
inline bool is_generalized_instrument(const CpMapChoi& X, const SectionSpec& K, Index m,
                                      double tol = kDefaultTol) {
  const TensorSpace& out = X.out_space();
  const AlgebraShape& first = out.factor(0).shape;
  if (!first.is_classical() || first.num_blocks() != m)
    throw std::invalid_argument("is_generalized_instrument: output is not of instrument form");
  if (!is_cp(X, tol)) return false;
  // non-classical remainder of the output
  std::vector<Factor> rest(out.factors().begin() + 1, out.factors().end());
  TensorSpace k1_space =
      rest.empty() ? TensorSpace::single(FactorLabel{out.factor(0).label.id + 1000},
                                         AlgebraShape::matrix(1))
                   : TensorSpace(rest);
  const Index dk = k1_space.dim();
  const Index din = X.in_dim();
  Mat sum = Mat::Zero(dk * din, dk * din);
  const Mat& big = X.choi().matrix();
  for (Index j = 0; j < m; ++j) {
    // out global index = j*dk + k
    for (Index a = 0; a < dk * din; ++a)
      for (Index b = 0; b < dk * din; ++b) {
        const Index k1 = a / din, i = a % din, k2 = b / din, i2 = b % din;
        sum(a, b) += big((j * dk + k1) * din + i, (j * dk + k2) * din + i2);
      }
  }
  const CpMapChoi total(k1_space, X.in_space(), std::move(sum));
  return is_generalized_channel(total, K, tol);
}

// Choi matrix of the simple generalized channel χ_c, c ∈ (I + K^⊥) ∩ A⁺.
inline CpMapChoi make_simple(const LabeledOperator& c, const SectionSpec& K,
                             double tol = kDefaultTol) {
  if (!c.space().shape_compatible(K.space()))
    throw std::invalid_argument("make_simple: c lives on the wrong space");
  if (!detail::is_psd(c.matrix(), tol)) throw error("make_simple: c is not positive");
  const Mat diff = c.matrix() - Mat::Identity(c.dim(), c.dim());
  if (K.J.component_norm(diff) > tol * std::max(1.0, c.matrix().norm()))
    throw error("make_simple: c is not in I + K^perp");
  int maxid = 0;
  for (const auto& f : c.space().factors()) maxid = std::max(maxid, f.label.id);
  std::vector<FactorLabel> fresh;
  for (Index i = 0; i < c.space().num_factors(); ++i)
    fresh.push_back(FactorLabel{maxid + 1 + static_cast<int>(i)});
  const TensorSpace out = c.space().relabeled(fresh);
  const Mat s = detail::psd_sqrt(c.matrix(), tol);
  const Index d = c.dim();
  Mat sI(d * d, d * d);
  for (Index r = 0; r < d; ++r)
    for (Index cc = 0; cc < d; ++cc) sI.block(r * d, cc * d, d, d) = s(r, cc) * Mat::Identity(d, d);
  const Mat psi = max_entangled_matrix(c.space());
  return CpMapChoi(out, c.space(), sI * psi * sI);
}

// Prop.-preproc factorization Φ = Λ ∘ χ_c with c = Φ*(I_B); Λ is the
// canonical extension of Λ_p = Φ ∘ χ_{c^{-1}} off supp(c) by the tracial
// state of the output.
struct SimpleFactorization {
  LabeledOperator c;
  CpMapChoi lambda;
  Mat support;  // p = supp(c)
};

inline SimpleFactorization factor_simple(const CpMapChoi& X, const SectionSpec& K,
                                         double tol = kDefaultTol) {
  if (!is_generalized_channel(X, K, tol))
    throw error("factor_simple: X is not a generalized channel for this section");
  const LabeledOperator red = partial_trace(X.choi(), X.out_labels());
  LabeledOperator c(X.in_space(), red.matrix().transpose());
  detail::HermEig eig = detail::eig_hermitian(c.matrix(), tol, "factor_simple");
  const double cut = tol * std::max(1.0, std::abs(eig.values.size() ? eig.values(0) : 0.0));
  Mat p = Mat::Zero(c.dim(), c.dim());
  for (Index k = 0; k < eig.values.size(); ++k)
    if (eig.values(k) > cut) p += eig.vectors.col(k) * eig.vectors.col(k).adjoint();
  const Mat h = detail::psd_pinv_sqrt(c.matrix(), tol);
  const Index din = X.in_dim(), dout = X.out_dim();
  Mat ih(dout * din, dout * din);
  const Mat ht = h.transpose();
  for (Index r = 0; r < dout; ++r)
    for (Index cc = 0; cc < dout; ++cc)
      ih.block(r * din, cc * din, din, din) = (r == cc ? 1.0 : 0.0) * ht;
  Mat xl = ih * X.choi().matrix() * ih;
  // extension off the support: Λ(a) = Λ_p(pap) + τ_B · Tr a(1−p)
  const Mat tau_b = Mat::Identity(dout, dout) / static_cast<double>(dout);
  const Mat rest = (Mat::Identity(din, din) - p).transpose();
  for (Index r = 0; r < dout; ++r)
    for (Index cc = 0; cc < dout; ++cc)
      xl.block(r * din, cc * din, din, din) += tau_b(r, cc) * rest;
  SimpleFactorization out{std::move(c), CpMapChoi(X.out_space(), X.in_space(), std::move(xl)),
                          std::move(p)};
  // recomposition must return X
  const Mat s = detail::psd_sqrt(out.c.matrix(), tol);
  Mat is(dout * din, dout * din);
  const Mat st = s.transpose();
  for (Index r = 0; r < dout; ++r)
    for (Index cc = 0; cc < dout; ++cc)
      is.block(r * din, cc * din, din, din) = (r == cc ? 1.0 : 0.0) * st;
  const double resid = (is * out.lambda.choi().matrix() * is - X.choi().matrix()).norm();
  if (resid > 100 * tol * std::max(1.0, X.choi().matrix().norm()))
    throw error("factor_simple: recomposition failed (residual " + std::to_string(resid) + ")");
  return out;
}

// Recompose Λ ∘ χ_c from a factorization (mostly for tests and the CLI).
inline CpMapChoi recompose_simple(const SimpleFactorization& f, double tol = kDefaultTol) {
  const Index din = f.lambda.in_dim(), dout = f.lambda.out_dim();
  const Mat s = detail::psd_sqrt(f.c.matrix(), tol);
  Mat is(dout * din, dout * din);
  const Mat st = s.transpose();
  for (Index r = 0; r < dout; ++r)
    for (Index cc = 0; cc < dout; ++cc)
      is.block(r * din, cc * din, din, din) = (r == cc ? 1.0 : 0.0) * st;
  return CpMapChoi(f.lambda.out_space(), f.lambda.in_space(),
                   is * f.lambda.choi().matrix() * is);
}

}  // namespace qcomb

#endif

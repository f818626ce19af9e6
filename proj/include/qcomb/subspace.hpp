// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#ifndef QCOMB_SUBSPACE_HPP
#define QCOMB_SUBSPACE_HPP

#include "qcomb/choi.hpp"

namespace qcomb {

//=========================================================================
// Self-adjoint operator subspaces under the trace inner product.
//
// A subspace carries an orthonormal basis in the cell coordinates of its
// ambient space (the supported matrix units, which are orthonormal), so the
// Hilbert–Schmidt geometry is the standard one on coefficient vectors.
//=========================================================================

class Subspace {
 public:
  Subspace() = default;

  Subspace(TensorSpace space, Mat orthonormal_basis, double tol = kDefaultTol)
      : space_(std::move(space)), basis_(std::move(orthonormal_basis)) {
    if (basis_.rows() != space_.num_cells())
      throw std::invalid_argument("Subspace: basis/space dimension mismatch");
    if (basis_.cols() > 0) {
      const Mat gram = basis_.adjoint() * basis_;
      if ((gram - Mat::Identity(basis_.cols(), basis_.cols())).norm() >
          tol * std::max(1.0, std::sqrt((double)basis_.cols())))
        throw error("Subspace: basis is not orthonormal");
    }
    check_self_adjoint(tol);
  }

  static Subspace span(const TensorSpace& space, const std::vector<Mat>& ops,
                       double tol = kDefaultTol) {
    if (ops.empty()) return zero(space);
    Mat stack(space.num_cells(), static_cast<Index>(ops.size()));
    for (size_t i = 0; i < ops.size(); ++i) {
      if (ops[i].rows() != space.dim() || ops[i].cols() != space.dim())
        throw std::invalid_argument("span: operator dimension mismatch");
      stack.col(static_cast<Index>(i)) = vectorize(space, ops[i]);
    }
    return from_generators(space, stack, tol);
  }
  static Subspace span(const std::vector<LabeledOperator>& ops, double tol = kDefaultTol) {
    if (ops.empty()) throw std::invalid_argument("span: empty input with no space");
    std::vector<Mat> ms;
    for (const auto& o : ops) {
      if (!o.space().same_factors(ops.front().space()))
        throw std::invalid_argument("span: mixed spaces");
      ms.push_back(o.matrix());
    }
    return span(ops.front().space(), ms, tol);
  }

  static Subspace full(const TensorSpace& space) {
    Subspace s;
    s.space_ = space;
    s.basis_ = Mat::Identity(space.num_cells(), space.num_cells());
    return s;
  }
  static Subspace zero(const TensorSpace& space) {
    Subspace s;
    s.space_ = space;
    s.basis_ = Mat(space.num_cells(), 0);
    return s;
  }
  // span of the unit alone
  static Subspace of_identity(const TensorSpace& space) {
    return span(space, {Mat::Identity(space.dim(), space.dim())});
  }

  const TensorSpace& space() const { return space_; }
  const Mat& basis() const { return basis_; }
  Index dim() const { return basis_.cols(); }
  Index ambient_dim() const { return space_.num_cells(); }

  LabeledOperator basis_op(Index k) const {
    return LabeledOperator(space_, devectorize(space_, basis_.col(k)));
  }

  // distance of x from the subspace (Frobenius)
  double residual(const Mat& x) const {
    const Vec v = vectorize(space_, x);
    if (!basis_.cols()) return v.norm();
    return (v - basis_ * (basis_.adjoint() * v)).norm();
  }
  // norm of the component inside the subspace
  double component_norm(const Mat& x) const {
    if (!basis_.cols()) return 0.0;
    return (basis_.adjoint() * vectorize(space_, x)).norm();
  }
  bool contains(const Mat& x, double tol = kDefaultTol) const {
    return residual(x) <= tol * std::max(1.0, x.norm());
  }
  bool contains(const LabeledOperator& x, double tol = kDefaultTol) const {
    return contains(x.matrix(), tol);
  }
  Mat project(const Mat& x) const {
    if (!basis_.cols()) return Mat::Zero(space_.dim(), space_.dim());
    return devectorize(space_, basis_ * (basis_.adjoint() * vectorize(space_, x)));
  }

  Subspace orthocomplement() const {
    const Index n = ambient_dim(), k = dim();
    if (k == 0) return full(space_);
    if (k == n) return zero(space_);
    Eigen::HouseholderQR<Mat> qr(basis_);
    Mat tail = Mat::Zero(n, n - k);
    tail.bottomRows(n - k).setIdentity();
    Mat comp = qr.householderQ() * tail;
    Subspace s;
    s.space_ = space_;
    s.basis_ = std::move(comp);
    return s;
  }

  Subspace transposed() const {
    Mat b(basis_.rows(), basis_.cols());
    for (Index k = 0; k < space_.num_cells(); ++k) {
      const auto [r, c] = space_.cell(k);
      b.row(space_.cell_index(c, r)) = basis_.row(k);
    }
    Subspace s;
    s.space_ = space_;
    s.basis_ = std::move(b);
    return s;
  }

  double projector_distance(const Subspace& o) const {
    if (!space_.same_factors(o.space_))
      throw std::invalid_argument("projector_distance: space mismatch");
    // ‖P1−P2‖_F via residuals of each basis against the other projector;
    // the closed form k1+k2−2‖B1†B2‖² cancels catastrophically near zero
    const double r1 = (basis_ - o.basis_ * (o.basis_.adjoint() * basis_)).squaredNorm();
    const double r2 = (o.basis_ - basis_ * (basis_.adjoint() * o.basis_)).squaredNorm();
    return std::sqrt(r1 + r2);
  }
  bool equals(const Subspace& o, double tol = kDefaultTol) const {
    return dim() == o.dim() &&
           projector_distance(o) <= tol * std::max(1.0, std::sqrt((double)ambient_dim()));
  }

 private:
  static Subspace from_generators(const TensorSpace& space, const Mat& stack, double tol) {
    Eigen::JacobiSVD<Mat> svd(stack, Eigen::ComputeThinU);
    const Index r = detail::numerical_rank(svd.singularValues(), tol);
    Subspace s;
    s.space_ = space;
    s.basis_ = svd.matrixU().leftCols(r);
    s.check_self_adjoint(tol);
    return s;
  }

  void check_self_adjoint(double tol) const {
    for (Index k = 0; k < basis_.cols(); ++k) {
      const Mat op = devectorize(space_, basis_.col(k));
      if (residual(op.adjoint()) > tol * std::max(1.0, op.norm()))
        throw error("Subspace: span is not self-adjoint");
    }
  }

  friend Subspace join(const Subspace&, const Subspace&, double);
  friend Subspace meet(const Subspace&, const Subspace&, double);
  friend Subspace tensor_of_subspaces(const Subspace&, const Subspace&, double);
  friend Subspace embed_with_identity(const Subspace&, const TensorSpace&, const LabelSet&,
                                      double);
  friend Subspace preimage_of_partial_trace(const Subspace&, const TensorSpace&,
                                            const LabelSet&, double);

  TensorSpace space_;
  Mat basis_;
};

// L1 ∨ L2, the smallest subspace containing both
inline Subspace join(const Subspace& a, const Subspace& b, double tol = kDefaultTol) {
  if (!a.space().same_factors(b.space()))
    throw std::invalid_argument("join: space mismatch");
  Mat stack(a.ambient_dim(), a.dim() + b.dim());
  stack.leftCols(a.dim()) = a.basis();
  stack.rightCols(b.dim()) = b.basis();
  Eigen::JacobiSVD<Mat> svd(stack, Eigen::ComputeThinU);
  const Index r = detail::numerical_rank(svd.singularValues(), tol);
  Subspace s;
  s.space_ = a.space();
  s.basis_ = svd.matrixU().leftCols(r);
  return s;
}

// L1 ∧ L2 = L1 ∩ L2, from the null space of [B1 | −B2]
inline Subspace meet(const Subspace& a, const Subspace& b, double tol = kDefaultTol) {
  if (!a.space().same_factors(b.space()))
    throw std::invalid_argument("meet: space mismatch");
  if (a.dim() == 0 || b.dim() == 0) return Subspace::zero(a.space());
  Mat m(a.ambient_dim(), a.dim() + b.dim());
  m.leftCols(a.dim()) = a.basis();
  m.rightCols(b.dim()) = -b.basis();
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const Index r = detail::numerical_rank(svd.singularValues(), tol);
  const Index null_dim = a.dim() + b.dim() - r;
  if (null_dim <= 0) return Subspace::zero(a.space());
  Mat gen(a.ambient_dim(), null_dim);
  for (Index i = 0; i < null_dim; ++i)
    gen.col(i) = a.basis() * svd.matrixV().col(r + i).head(a.dim());
  Eigen::JacobiSVD<Mat> svd2(gen, Eigen::ComputeThinU);
  const Index r2 = detail::numerical_rank(svd2.singularValues(), tol);
  Subspace s;
  s.space_ = a.space();
  s.basis_ = svd2.matrixU().leftCols(r2);
  return s;
}

// J_left ⊗ J_right on the concatenated space
inline Subspace tensor_of_subspaces(const Subspace& l, const Subspace& r,
                                    double tol = kDefaultTol) {
  std::vector<Factor> fs = l.space().factors();
  fs.insert(fs.end(), r.space().factors().begin(), r.space().factors().end());
  TensorSpace space(fs);
  (void)tol;
  const Index dl = l.space().dim();
  const Index dr = r.space().dim();
  Mat basis(space.num_cells(), l.dim() * r.dim());
  Index col = 0;
  for (Index i = 0; i < l.dim(); ++i) {
    const Mat li = devectorize(l.space(), l.basis().col(i));
    for (Index j = 0; j < r.dim(); ++j) {
      const Mat rj = devectorize(r.space(), r.basis().col(j));
      Mat op(dl * dr, dl * dr);
      for (Index a = 0; a < dl; ++a)
        for (Index b = 0; b < dl; ++b)
          op.block(a * dr, b * dr, dr, dr) = li(a, b) * rj;
      basis.col(col++) = vectorize(space, op);
    }
  }
  Subspace s;
  s.space_ = space;
  s.basis_ = std::move(basis);
  return s;
}

// Image of J0 under x ↦ I ⊗ x, the adjoint of the partial trace over the
// factors named in `added` (at their positions in `big`).
inline Subspace embed_with_identity(const Subspace& J0, const TensorSpace& big,
                                    const LabelSet& added, double tol = kDefaultTol) {
  (void)tol;
  const auto pos = detail::positions_of_labels(big, added, "embed_with_identity");
  detail::SplitIndexer ix(big, pos);
  std::vector<Factor> kept;
  for (Index p : ix.rest) kept.push_back(big.factor(p));
  if (!J0.space().shape_compatible(TensorSpace(kept)))
    throw std::invalid_argument("embed_with_identity: kept factors do not match J0 space");
  const double scale = 1.0 / std::sqrt(static_cast<double>(ix.sel_dim));
  Mat basis(big.num_cells(), J0.dim());
  for (Index j = 0; j < J0.dim(); ++j) {
    const Mat w = devectorize(J0.space(), J0.basis().col(j));
    Mat op = Mat::Zero(big.dim(), big.dim());
    for (Index r = 0; r < ix.rest_dim; ++r)
      for (Index c = 0; c < ix.rest_dim; ++c) {
        if (w(r, c) == cx(0, 0)) continue;
        for (Index s = 0; s < ix.sel_dim; ++s)
          op(ix.global(r, s), ix.global(c, s)) = w(r, c);
      }
    basis.col(j) = scale * vectorize(big, op);
  }
  Subspace s;
  s.space_ = big;
  s.basis_ = std::move(basis);
  return s;
}

// {x on big : Tr_traced(x) ∈ J0}
inline Subspace preimage_of_partial_trace(const Subspace& J0, const TensorSpace& big,
                                          const LabelSet& traced, double tol = kDefaultTol) {
  const Subspace constraints = embed_with_identity(J0.orthocomplement(), big, traced, tol);
  return constraints.orthocomplement();
}

// tilde J = [I] ∨ (J^T)^⊥
inline Subspace tilde(const Subspace& J, double tol = kDefaultTol) {
  return join(Subspace::of_identity(J.space()), J.transposed().orthocomplement(), tol);
}

// S^{-1}(J0) = {a : S(a) ∈ J0}
inline Subspace preimage_under_map(const CpMapChoi& S, const Subspace& J0,
                                   double tol = kDefaultTol) {
  if (!J0.space().shape_compatible(S.out_space()))
    throw std::invalid_argument("preimage_under_map: J0 does not live on the output");
  const CpMapChoi adj = adjoint_map(S);
  const Subspace co = J0.orthocomplement();
  std::vector<Mat> gens;
  for (Index j = 0; j < co.dim(); ++j) {
    const LabeledOperator w(S.out_space(), devectorize(co.space(), co.basis().col(j)));
    gens.push_back(apply_map(adj, w).matrix());
  }
  return Subspace::span(S.in_space(), gens, tol).orthocomplement();
}

// S^*(J0), realized through the adjoint map
inline Subspace adjoint_image(const CpMapChoi& S, const Subspace& J0,
                              double tol = kDefaultTol) {
  if (!J0.space().shape_compatible(S.out_space()))
    throw std::invalid_argument("adjoint_image: J0 does not live on the output");
  const CpMapChoi adj = adjoint_map(S);
  std::vector<Mat> gens;
  for (Index j = 0; j < J0.dim(); ++j) {
    const LabeledOperator w(S.out_space(), devectorize(J0.space(), J0.basis().col(j)));
    gens.push_back(apply_map(adj, w).matrix());
  }
  if (gens.empty()) return Subspace::zero(S.in_space());
  return Subspace::span(S.in_space(), gens, tol);
}

// K = J ∩ 𝔖: x ∈ K iff x ∈ J, x ⪰ 0, Tr x = 1
inline bool section_contains(const Subspace& J, const LabeledOperator& x,
                             double tol = kDefaultTol) {
  if (!J.contains(x.matrix(), tol)) return false;
  bool herm_ok = true;
  if (!detail::is_psd(x.matrix(), tol, &herm_ok) || !herm_ok) return false;
  return std::abs(x.trace() - cx(1, 0)) <= tol * 10.0;
}

// [K] = J ∩ A_p for p = supp(rho), rho a maximal-support element of K;
// equals J itself when rho is faithful.
inline Subspace section_span(const Subspace& J, const LabeledOperator& rho,
                             double tol = kDefaultTol) {
  if (!J.contains(rho.matrix(), tol)) throw error("section_span: rho is not in J");
  if (!detail::is_psd(rho.matrix(), tol)) throw error("section_span: rho is not positive");
  detail::HermEig eig = detail::eig_hermitian(rho.matrix(), tol, "section_span");
  const double cut = tol * std::max(1.0, std::abs(eig.values.size() ? eig.values(0) : 0.0));
  std::vector<Index> keep;
  for (Index k = 0; k < eig.values.size(); ++k)
    if (eig.values(k) > cut) keep.push_back(k);
  if (static_cast<Index>(keep.size()) == rho.dim()) return J;  // faithful
  // orthonormal basis of p A p within the block support
  const TensorSpace& sp = rho.space();
  std::vector<Mat> gens;
  for (Index a : keep)
    for (Index b : keep) {
      // eigenvectors of a block-supported operator live in single multiblocks
      const Vec va = eig.vectors.col(a), vb = eig.vectors.col(b);
      Mat op = va * vb.adjoint();
      // zero numerically tiny off-block parts before constructing
      for (Index r = 0; r < sp.dim(); ++r)
        for (Index c = 0; c < sp.dim(); ++c)
          if (!sp.cell_allowed(r, c)) op(r, c) = cx(0, 0);
      if (op.norm() > tol) gens.push_back(op);
    }
  const Subspace ap = Subspace::span(sp, gens, tol);
  return meet(J, ap, tol);
}

}  // namespace qcomb

#endif

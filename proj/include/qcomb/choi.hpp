// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#ifndef QCOMB_CHOI_HPP
#define QCOMB_CHOI_HPP

#include "qcomb/tensor.hpp"

namespace qcomb {

//=========================================================================
// Choi matrices of maps between finite-dimensional C*-algebras
//
// Factor ordering is fixed as output ⊗ input throughout; for direct sums
// the block structure X_T = ⊕_{i,j} X_{T_ij} is enforced by the central
// block support of the underlying LabeledOperator.
//=========================================================================

class CpMapChoi {
 public:
  CpMapChoi() = default;
  CpMapChoi(TensorSpace out, TensorSpace in, Mat choi, double tol = kDefaultTol)
      : out_(std::move(out)), in_(std::move(in)) {
    for (const auto& f : in_.factors())
      if (out_.position_of(f.label))
        throw std::invalid_argument("CpMapChoi: input/output labels overlap");
    std::vector<Factor> fs = out_.factors();
    fs.insert(fs.end(), in_.factors().begin(), in_.factors().end());
    choi_ = LabeledOperator(TensorSpace(std::move(fs)), std::move(choi), tol);
  }
  static CpMapChoi from_operator(const LabeledOperator& choi, Index out_factors) {
    const Index nf = choi.space().num_factors();
    if (out_factors < 1 || out_factors >= nf)
      throw std::invalid_argument("CpMapChoi: bad output factor count");
    std::vector<Factor> of(choi.space().factors().begin(),
                           choi.space().factors().begin() + out_factors);
    std::vector<Factor> inf(choi.space().factors().begin() + out_factors,
                            choi.space().factors().end());
    return CpMapChoi(TensorSpace(of), TensorSpace(inf), choi.matrix());
  }

  const TensorSpace& in_space() const { return in_; }
  const TensorSpace& out_space() const { return out_; }
  const LabeledOperator& choi() const { return choi_; }
  Index in_dim() const { return in_.dim(); }
  Index out_dim() const { return out_.dim(); }

  LabelSet out_labels() const { return out_.labels(); }
  LabelSet in_labels() const { return in_.labels(); }

 private:
  TensorSpace out_, in_;
  LabeledOperator choi_;
};

// Unnormalized maximally entangled matrix of a (possibly composite) algebra,
// Σ_{mb(i)=mb(j)} |i⟩⟨j| ⊗ |i⟩⟨j|, laid out on space ⊗ space.
inline Mat max_entangled_matrix(const TensorSpace& s) {
  const Index d = s.dim();
  Mat m = Mat::Zero(d * d, d * d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      if (s.multiblock_of(i) == s.multiblock_of(j)) m(i * d + i, j * d + j) = cx(1, 0);
  return m;
}

// Identity channel between two labeled copies of an algebra.
inline CpMapChoi identity_map(FactorLabel out, FactorLabel in, const AlgebraShape& shape) {
  return CpMapChoi(TensorSpace::single(out, shape), TensorSpace::single(in, shape),
                   max_entangled(out, in, shape).matrix());
}

inline CpMapChoi identity_map(const TensorSpace& out, const TensorSpace& in) {
  if (!out.shape_compatible(in))
    throw std::invalid_argument("identity_map: in/out shapes differ");
  return CpMapChoi(out, in, max_entangled_matrix(in));
}

// T_X(a) = Tr_in[(I_out ⊗ a^T) X]; only shape compatibility with the input
// space is required, labels are bookkeeping of the map itself.
inline LabeledOperator apply_map(const CpMapChoi& m, const LabeledOperator& a) {
  if (!a.space().shape_compatible(m.in_space()))
    throw std::invalid_argument("apply_map: operand shape mismatch");
  const Index din = m.in_dim(), dout = m.out_dim();
  const Mat& X = m.choi().matrix();
  Mat out = Mat::Zero(dout, dout);
  for (Index u = 0; u < din; ++u)
    for (Index v = 0; v < din; ++v) {
      const cx a_uv = a.matrix()(u, v);
      if (a_uv == cx(0, 0)) continue;
      for (Index o = 0; o < dout; ++o)
        for (Index op = 0; op < dout; ++op)
          out(o, op) += a_uv * X(o * din + u, op * din + v);
    }
  return LabeledOperator(m.out_space(), std::move(out));
}

inline AlgOperator apply_map(const CpMapChoi& m, const AlgOperator& a) {
  LabeledOperator lifted(m.in_space(), a.matrix());
  return apply_map(m, lifted).as_alg();
}

// Action of the map as a matrix over the supported cells of the input and
// output algebras (matrix units are orthonormal, so the Hilbert–Schmidt
// adjoint is the conjugate transpose in these coordinates).
inline Mat action_matrix(const CpMapChoi& m) {
  const TensorSpace& si = m.in_space();
  const TensorSpace& so = m.out_space();
  const Index din = si.dim();
  Mat act(so.num_cells(), si.num_cells());
  for (Index k = 0; k < si.num_cells(); ++k) {
    const auto [u, v] = si.cell(k);
    for (Index j = 0; j < so.num_cells(); ++j) {
      const auto [o, op] = so.cell(j);
      act(j, k) = m.choi().matrix()(o * din + u, op * din + v);
    }
  }
  return act;
}

// X_T = (T ⊗ id)(Ψ) from the action over input cells.
inline CpMapChoi choi_of_action(const Mat& action, const TensorSpace& out,
                                const TensorSpace& in) {
  if (action.rows() != out.num_cells() || action.cols() != in.num_cells())
    throw std::invalid_argument("choi_of_action: action dimension mismatch");
  const Index din = in.dim(), dout = out.dim();
  Mat X = Mat::Zero(dout * din, dout * din);
  for (Index k = 0; k < in.num_cells(); ++k) {
    const auto [i, j] = in.cell(k);
    for (Index t = 0; t < out.num_cells(); ++t) {
      const auto [o, op] = out.cell(t);
      X(o * din + i, op * din + j) = action(t, k);
    }
  }
  return CpMapChoi(out, in, std::move(X));
}

inline bool is_cp(const CpMapChoi& m, double tol = kDefaultTol) {
  bool herm_ok = true;
  const bool psd = detail::is_psd(m.choi().matrix(), tol, &herm_ok);
  return herm_ok && psd;
}

inline bool is_tp(const CpMapChoi& m, double tol = kDefaultTol) {
  const LabeledOperator red = partial_trace(m.choi(), m.out_labels());
  const Mat id = Mat::Identity(m.in_dim(), m.in_dim());
  return (red.matrix() - id).norm() <= tol * std::max(1.0, std::sqrt((double)m.in_dim()));
}

inline bool is_channel(const CpMapChoi& m, double tol = kDefaultTol) {
  return is_cp(m, tol) && is_tp(m, tol);
}

// Adjoint with respect to ⟨a,b⟩ = Tr(a*b).
inline CpMapChoi adjoint_map(const CpMapChoi& m) {
  return choi_of_action(action_matrix(m).adjoint(), m.in_space(), m.out_space());
}

// S^T(a) = [S(a^T)]^T; the Choi matrix transposes with the map.
inline CpMapChoi transpose_map(const CpMapChoi& m) {
  return CpMapChoi(m.out_space(), m.in_space(), m.choi().matrix().transpose());
}

// Choi matrix of second ∘ first, contracted through the link product.
inline CpMapChoi compose(const CpMapChoi& second, const CpMapChoi& first) {
  if (!first.out_space().shape_compatible(second.in_space()))
    throw std::invalid_argument("compose: intermediate shape mismatch");
  for (const auto& f : first.in_space().factors())
    if (second.out_space().position_of(f.label))
      throw std::invalid_argument("compose: label collision between outer output and inner input");
  // align the intermediate labels
  std::vector<FactorLabel> labels;
  for (const auto& f : second.in_space().factors()) labels.push_back(f.label);
  for (const auto& f : first.in_space().factors()) labels.push_back(f.label);
  const LabeledOperator inner = first.choi().relabeled(labels);
  const LabeledOperator chained = link_product(second.choi(), inner);
  return CpMapChoi(second.out_space(), first.in_space(), chained.matrix());
}

inline std::vector<Mat> kraus(const CpMapChoi& m, double tol = kDefaultTol) {
  if (!is_cp(m, tol)) throw error("kraus: map is not completely positive");
  detail::HermEig eig = detail::eig_hermitian(m.choi().matrix(), tol, "kraus");
  const Index din = m.in_dim(), dout = m.out_dim();
  const double cut = tol * std::max(1.0, std::abs(eig.values.size() ? eig.values(0) : 0.0));
  std::vector<Mat> out;
  for (Index k = 0; k < eig.values.size(); ++k) {
    if (eig.values(k) <= cut) continue;
    Mat K(dout, din);
    for (Index o = 0; o < dout; ++o)
      for (Index i = 0; i < din; ++i) K(o, i) = eig.vectors(o * din + i, k);
    out.push_back(std::sqrt(eig.values(k)) * K);
  }
  return out;
}

// Minimal Stinespring form T(x) = V*(⊕_n I_{E_n} ⊗ x_n)V over the input
// multiblocks; r = Σ_n E_n equals the Choi rank, and V is an isometry
// exactly when the map is unital.
struct StinespringDilation {
  Mat V;                                        // rep_dim × out_dim
  std::vector<Index> multiplicities;            // E_n per input multiblock
  std::vector<std::vector<Index>> block_indices;  // global input indices per multiblock
  Index rank = 0;

  Index rep_dim() const { return V.rows(); }
  // π(x) for an input-space operator x
  Mat representation(const Mat& x) const {
    std::vector<Mat> diag;
    for (size_t n = 0; n < block_indices.size(); ++n) {
      const auto& idx = block_indices[n];
      const Index an = static_cast<Index>(idx.size());
      Mat xn(an, an);
      for (Index r = 0; r < an; ++r)
        for (Index c = 0; c < an; ++c)
          xn(r, c) = x(idx[static_cast<size_t>(r)], idx[static_cast<size_t>(c)]);
      for (Index e = 0; e < multiplicities[n]; ++e) diag.push_back(xn);
    }
    Index d = 0;
    for (const auto& b : diag) d += b.rows();
    Mat out = Mat::Zero(d, d);
    Index off = 0;
    for (const auto& b : diag) {
      out.block(off, off, b.rows(), b.cols()) = b;
      off += b.rows();
    }
    return out;
  }
  Mat evaluate(const Mat& x) const { return V.adjoint() * representation(x) * V; }
};

inline StinespringDilation minimal_stinespring(const CpMapChoi& m, double tol = kDefaultTol) {
  if (!is_cp(m, tol)) throw error("minimal_stinespring: map is not completely positive");
  const TensorSpace& si = m.in_space();
  const Index din = si.dim(), dout = m.out_dim();
  const Index nmb = si.num_multiblocks();

  std::vector<std::vector<Index>> block_indices(static_cast<size_t>(nmb));
  for (Index g = 0; g < din; ++g)
    block_indices[static_cast<size_t>(si.multiblock_of(g))].push_back(g);

  // eigen-Kraus operators per input multiblock (the Choi has no
  // cross-multiblock input support, so this loses nothing)
  const Mat& X = m.choi().matrix();
  const double scale = std::max(1.0, detail::op_norm(X));
  std::vector<std::vector<Mat>> kraus_per_block(static_cast<size_t>(nmb));
  for (Index n = 0; n < nmb; ++n) {
    const auto& idx = block_indices[static_cast<size_t>(n)];
    if (idx.empty()) continue;
    const Index an = static_cast<Index>(idx.size());
    Mat Xn(dout * an, dout * an);
    for (Index o = 0; o < dout; ++o)
      for (Index op = 0; op < dout; ++op)
        for (Index a = 0; a < an; ++a)
          for (Index b = 0; b < an; ++b)
            Xn(o * an + a, op * an + b) =
                X(o * din + idx[static_cast<size_t>(a)], op * din + idx[static_cast<size_t>(b)]);
    detail::HermEig eig = detail::eig_hermitian(Xn, tol, "minimal_stinespring");
    const double cut = tol * scale;
    for (Index k = 0; k < eig.values.size(); ++k) {
      if (eig.values(k) <= cut) continue;
      Mat K(dout, an);
      for (Index o = 0; o < dout; ++o)
        for (Index a = 0; a < an; ++a) K(o, a) = eig.vectors(o * an + a, k);
      kraus_per_block[static_cast<size_t>(n)].push_back(std::sqrt(eig.values(k)) * K);
    }
  }

  StinespringDilation out;
  out.block_indices = block_indices;
  out.multiplicities.resize(static_cast<size_t>(nmb));
  Index rep = 0;
  for (Index n = 0; n < nmb; ++n) {
    out.multiplicities[static_cast<size_t>(n)] =
        static_cast<Index>(kraus_per_block[static_cast<size_t>(n)].size());
    out.rank += out.multiplicities[static_cast<size_t>(n)];
    rep += out.multiplicities[static_cast<size_t>(n)] *
           static_cast<Index>(block_indices[static_cast<size_t>(n)].size());
  }
  out.V = Mat::Zero(rep, dout);
  Index off = 0;
  for (Index n = 0; n < nmb; ++n) {
    const Index an = static_cast<Index>(block_indices[static_cast<size_t>(n)].size());
    for (const Mat& K : kraus_per_block[static_cast<size_t>(n)]) {
      // row (off + a) holds ⟨a| K† = conj(K(·,a))ᵀ acting on H_out
      out.V.block(off, 0, an, dout) = K.adjoint();
      off += an;
    }
  }
  return out;
}

}  // namespace qcomb

#endif

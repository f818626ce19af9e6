// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#ifndef QCOMB_DECOMPOSE_HPP
#define QCOMB_DECOMPOSE_HPP

#include "qcomb/comb.hpp"

#include <optional>

namespace qcomb {

//=========================================================================
// Constructive realizations: the semicausal → semilocalizable split, the
// memory-channel ladder, and the ancilla realization of channels on
// channels.
//=========================================================================

// Solve V = (U ⊗ I_B)(I_A ⊗ W) for an isometry U : H_A ⊗ H_D → H_R.
// V is (R·b) × (a·b'), W is (d·b) × b'. When W is not minimal (its reshaped
// form misses directions of H_D), U is completed to a full isometry by
// Gram–Schmidt over the standard basis in index order.
inline Mat intertwining_isometry(const Mat& V, const Mat& W, Index dim_A, Index dim_B,
                                 double tol = kDefaultTol) {
  if (dim_A < 1 || dim_B < 1) throw std::invalid_argument("intertwining_isometry: bad dims");
  if (W.rows() % dim_B != 0 || V.rows() % dim_B != 0)
    throw std::invalid_argument("intertwining_isometry: row counts not divisible by dim_B");
  const Index bp = W.cols();
  const Index d = W.rows() / dim_B;
  const Index R = V.rows() / dim_B;
  if (V.cols() != dim_A * bp)
    throw std::invalid_argument("intertwining_isometry: V column count mismatch");

  // W̃[x, (β,β')] = W[(x,β), β']
  Mat wt(d, dim_B * bp);
  for (Index x = 0; x < d; ++x)
    for (Index beta = 0; beta < dim_B; ++beta)
      for (Index bpp = 0; bpp < bp; ++bpp) wt(x, beta * bp + bpp) = W(x * dim_B + beta, bpp);

  Eigen::JacobiSVD<Mat> svd(wt, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Index rank = detail::numerical_rank(svd.singularValues(), tol);
  Mat pinv = Mat::Zero(wt.cols(), wt.rows());
  for (Index i = 0; i < rank; ++i)
    pinv += (1.0 / svd.singularValues()(i)) * svd.matrixV().col(i) * svd.matrixU().col(i).adjoint();

  Mat U = Mat::Zero(R, dim_A * d);
  for (Index alpha = 0; alpha < dim_A; ++alpha) {
    Mat vt(R, dim_B * bp);
    for (Index r = 0; r < R; ++r)
      for (Index beta = 0; beta < dim_B; ++beta)
        for (Index bpp = 0; bpp < bp; ++bpp)
          vt(r, beta * bp + bpp) = V(r * dim_B + beta, alpha * bp + bpp);
    U.block(0, alpha * d, R, d) = vt * pinv;
  }

  // factorization residual
  double resid2 = 0.0;
  for (Index r = 0; r < R; ++r)
    for (Index beta = 0; beta < dim_B; ++beta)
      for (Index alpha = 0; alpha < dim_A; ++alpha)
        for (Index bpp = 0; bpp < bp; ++bpp) {
          cx acc(0, 0);
          for (Index x = 0; x < d; ++x)
            acc += U(r, alpha * d + x) * W(x * dim_B + beta, bpp);
          acc -= V(r * dim_B + beta, alpha * bp + bpp);
          resid2 += std::norm(acc);
        }
  if (std::sqrt(resid2) > tol * 100 * std::max(1.0, V.norm()))
    throw error("intertwining_isometry: no solution within tolerance (residual " +
                std::to_string(std::sqrt(resid2)) + ")");

  if (rank < d) {
    // complete the undetermined H_D directions to an isometry
    Mat range_d = svd.matrixU().leftCols(rank);       // determined directions in C^d
    Mat null_d = Mat::Identity(d, d) - range_d * range_d.adjoint();
    Eigen::JacobiSVD<Mat> nsvd(null_d, Eigen::ComputeThinU);
    const Index miss = detail::numerical_rank(nsvd.singularValues(), tol);
    Mat undetermined = nsvd.matrixU().leftCols(miss);  // d × miss
    // orthonormal frame of the already used range
    std::vector<Vec> used;
    for (Index alpha = 0; alpha < dim_A; ++alpha)
      for (Index i = 0; i < rank; ++i) {
        Vec v = Vec::Zero(R);
        for (Index x = 0; x < d; ++x) v += range_d(x, i) * U.col(alpha * d + x);
        if (v.norm() > 0.5) used.push_back(v.normalized());
      }
    for (Index alpha = 0; alpha < dim_A; ++alpha)
      for (Index j = 0; j < miss; ++j) {
        // next deterministic orthonormal vector
        Vec cand;
        bool found = false;
        for (Index t = 0; t < R && !found; ++t) {
          Vec v = Vec::Unit(R, t);
          for (const Vec& u : used) v -= u.dot(v) * u;
          if (v.norm() > 0.3) {
            cand = v.normalized();
            found = true;
          }
        }
        if (!found)
          throw error("intertwining_isometry: representation space too small to complete U");
        used.push_back(cand);
        for (Index x = 0; x < d; ++x) U.col(alpha * d + x) += cand * std::conj(undetermined(x, j));
      }
  }

  if ((U.adjoint() * U - Mat::Identity(dim_A * d, dim_A * d)).norm() >
      tol * 1000 * std::sqrt((double)(dim_A * d)))
    throw error("intertwining_isometry: solution is not an isometry (semicausality violated?)");
  return U;
}

//=========================================================================
// Thm.-apndx split: positive X on A ⊗ B ⊗ C with Tr_A X = I_B ⊗ Y factors
// per (B-block m, C-block n) as X_{m,n} = X1(m,n) * X0(n), with X1(m,n) the
// Choi matrix of a channel B(H_{B_m} ⊗ H_D) → A and X0(n) a rank-one
// purification-type operator on H_D ⊗ H_{C_n} with Tr_D X0(n) = Y_n.
//=========================================================================

struct SemilocalSplit {
  Index ancilla_dim = 1;
  std::vector<std::vector<CpMapChoi>> x1;  // [B-block m][C-multiblock n]
  std::vector<LabeledOperator> x0;         // [C-multiblock n] on (D, C_n)
  LabeledOperator y;                       // extracted Y on the C space
  std::vector<std::vector<Index>> c_block_indices;
  TensorSpace a_space, c_space;
  AlgebraShape b_shape;
  FactorLabel b_label, c_label, d_label;

  // compressed X_{m,n} rebuilt through the link product
  LabeledOperator recompose(Index m, Index n) const {
    return link_product(x1[static_cast<size_t>(m)][static_cast<size_t>(n)].choi(),
                        x0[static_cast<size_t>(n)]);
  }
};

namespace detail {

inline Mat compress(const Mat& big, const std::vector<Index>& rows,
                    const std::vector<Index>& cols) {
  Mat out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < cols.size(); ++c) out(static_cast<Index>(r), static_cast<Index>(c)) = big(rows[r], cols[c]);
  return out;
}

}  // namespace detail

// Generalized worker: the leading `a_factors` factors form the output
// algebra A, the next factor is B, the remaining factors form C.
inline SemilocalSplit semilocalize_general(const LabeledOperator& X, Index a_factors,
                                           double tol = kDefaultTol) {
  const TensorSpace& sp = X.space();
  if (sp.num_factors() < a_factors + 2)
    throw std::invalid_argument("semilocalize: need A, B and C parts");
  if (!detail::is_psd(X.matrix(), tol)) throw error("semilocalize: X is not positive");

  std::vector<Factor> afs(sp.factors().begin(), sp.factors().begin() + a_factors);
  const Factor bf = sp.factor(a_factors);
  std::vector<Factor> cfs(sp.factors().begin() + a_factors + 1, sp.factors().end());
  const TensorSpace a_space(afs);
  const TensorSpace c_space(cfs);
  const double tb = static_cast<double>(bf.shape.total_dim());
  const double scale = std::max(1.0, X.matrix().norm());

  LabelSet a_labels;
  for (const auto& f : afs) a_labels.insert(f.label);

  // condition (i): Tr_A X = I_B ⊗ Y with Y := Tr_{A,B} X / t_B
  const LabeledOperator tra = partial_trace(X, a_labels);
  LabeledOperator y = partial_trace(tra, {bf.label});
  y = LabeledOperator(c_space, y.matrix() / tb);
  const Index db = bf.shape.total_dim();
  const LabeledOperator recon =
      tensor(LabeledOperator(TensorSpace::single(bf.label, bf.shape), Mat::Identity(db, db)), y);
  if ((tra.matrix() - recon.matrix()).norm() > tol * 100 * scale)
    throw error("semilocalize: Tr_A X does not factor as I_B otimes Y");

  // block data
  const Index nb = bf.shape.num_blocks();
  const Index nc = c_space.num_multiblocks();
  std::vector<std::vector<Index>> c_idx(static_cast<size_t>(nc));
  for (Index g = 0; g < c_space.dim(); ++g)
    c_idx[static_cast<size_t>(c_space.multiblock_of(g))].push_back(g);
  std::vector<std::vector<Index>> b_idx(static_cast<size_t>(nb));
  for (Index g = 0; g < db; ++g)
    b_idx[static_cast<size_t>(bf.shape.block_of_index(g))].push_back(g);

  int maxid = 0;
  for (const auto& f : sp.factors()) maxid = std::max(maxid, f.label.id);
  const FactorLabel clabel{maxid + 1}, dlabel{maxid + 2};

  SemilocalSplit out;
  out.a_space = a_space;
  out.c_space = c_space;
  out.b_shape = bf.shape;
  out.b_label = bf.label;
  out.c_label = clabel;
  out.d_label = dlabel;
  out.y = y;
  out.c_block_indices = c_idx;

  // per C-multiblock: W_n from the deterministic eigendecomposition of Y_n^T
  std::vector<Mat> w_n(static_cast<size_t>(nc));
  std::vector<Index> rank_n(static_cast<size_t>(nc));
  Index d_max = 1;
  for (Index n = 0; n < nc; ++n) {
    const auto& idx = c_idx[static_cast<size_t>(n)];
    const Mat yn = detail::compress(y.matrix(), idx, idx);
    const Mat yt = yn.transpose();
    detail::HermEig eig = detail::eig_hermitian(yt, tol, "semilocalize");
    const double cut = tol * std::max(1.0, std::abs(eig.values.size() ? eig.values(0) : 0.0));
    Index r = 0;
    while (r < eig.values.size() && eig.values(r) > cut) ++r;
    rank_n[static_cast<size_t>(n)] = std::max<Index>(r, 1);
    Mat w = Mat::Zero(rank_n[static_cast<size_t>(n)], static_cast<Index>(idx.size()));
    for (Index kk = 0; kk < r; ++kk)
      w.row(kk) = std::sqrt(eig.values(kk)) * eig.vectors.col(kk).adjoint();
    w_n[static_cast<size_t>(n)] = std::move(w);
    d_max = std::max(d_max, rank_n[static_cast<size_t>(n)]);
  }
  out.ancilla_dim = d_max;
  const Index din_full = X.dim();

  // X0(n): purification of Y_n through W_n, padded into the common ancilla
  for (Index n = 0; n < nc; ++n) {
    const auto& idx = c_idx[static_cast<size_t>(n)];
    const Index dn = static_cast<Index>(idx.size());
    const Mat& w = w_n[static_cast<size_t>(n)];
    const TensorSpace x0_space({Factor{dlabel, AlgebraShape::matrix(d_max)},
                                Factor{clabel, AlgebraShape::matrix(dn)}});
    Mat x0 = Mat::Zero(d_max * dn, d_max * dn);
    // (W ⊗ I) Ψ (W ⊗ I)† with W embedded in the top rows
    for (Index x = 0; x < w.rows(); ++x)
      for (Index xp = 0; xp < w.rows(); ++xp)
        for (Index i = 0; i < dn; ++i)
          for (Index j = 0; j < dn; ++j) x0(x * dn + i, xp * dn + j) += w(x, i) * std::conj(w(xp, j));
    out.x0.emplace_back(x0_space, std::move(x0));
    // Tr_D X0 = Y_n
    const Mat td = partial_trace(out.x0.back(), {dlabel}).matrix();
    const Mat yn = detail::compress(y.matrix(), idx, idx);
    if ((td - yn).norm() > tol * 100 * std::max(1.0, yn.norm()))
      throw error("semilocalize: Tr_D X0 deviates from Y");
  }

  // X1(m,n) from the intertwining isometry of the minimal dilations
  out.x1.resize(static_cast<size_t>(nb));
  for (Index m = 0; m < nb; ++m) {
    for (Index n = 0; n < nc; ++n) {
      const auto& bidx = b_idx[static_cast<size_t>(m)];
      const auto& cidx = c_idx[static_cast<size_t>(n)];
      const Index bm = static_cast<Index>(bidx.size());
      const Index cn = static_cast<Index>(cidx.size());
      const Index r = rank_n[static_cast<size_t>(n)];
      // compress X onto (A, B_m, C_n)
      std::vector<Index> rows;
      for (Index a = 0; a < a_space.dim(); ++a)
        for (Index b : bidx)
          for (Index c : cidx) {
            // global index of (a, b, c) in X's row-major layout
            rows.push_back((a * db + b) * c_space.dim() + c);
          }
      (void)din_full;
      const Mat xc = detail::compress(X.matrix(), rows, rows);
      // Choi of Φ : B(H_{B_m} ⊗ H_{C_n}) → A
      std::vector<Factor> cf = a_space.factors();
      cf.push_back(Factor{bf.label, AlgebraShape::matrix(bm)});
      cf.push_back(Factor{clabel, AlgebraShape::matrix(cn)});
      const LabeledOperator xop(TensorSpace(cf), xc);
      const CpMapChoi phi = CpMapChoi::from_operator(xop, a_space.num_factors());
      const CpMapChoi adj = adjoint_map(phi);
      const StinespringDilation dil = minimal_stinespring(adj, tol);
      // U from V = U (I_{B_m} ⊗ W)
      const Mat u = intertwining_isometry(dil.V, w_n[static_cast<size_t>(n)], bm, 1, tol);
      // F(a) = U† π(a) U, acting on H_{B_m} ⊗ C^r; the stage channel is F*
      const TensorSpace f_out({Factor{bf.label, AlgebraShape::matrix(bm)},
                               Factor{dlabel, AlgebraShape::matrix(r)}});
      Mat f_act(f_out.num_cells(), a_space.num_cells());
      for (Index kcell = 0; kcell < a_space.num_cells(); ++kcell) {
        const auto [rr, cc] = a_space.cell(kcell);
        Mat unit = Mat::Zero(a_space.dim(), a_space.dim());
        unit(rr, cc) = cx(1, 0);
        const Mat fa = u.adjoint() * dil.representation(unit) * u;
        f_act.col(kcell) = vectorize(f_out, fa);
      }
      CpMapChoi x1 = choi_of_action(f_act.adjoint(), a_space, f_out);
      // pad the ancilla input up to the common dimension
      if (r < d_max) {
        const TensorSpace in_pad({Factor{bf.label, AlgebraShape::matrix(bm)},
                                  Factor{dlabel, AlgebraShape::matrix(d_max)}});
        const Index dout = a_space.dim();
        Mat big = Mat::Zero(dout * bm * d_max, dout * bm * d_max);
        const Mat& small = x1.choi().matrix();
        // corner embedding of the Choi plus the trace-compensating tail
        for (Index o = 0; o < dout; ++o)
          for (Index op = 0; op < dout; ++op)
            for (Index b1 = 0; b1 < bm; ++b1)
              for (Index b2 = 0; b2 < bm; ++b2)
                for (Index x = 0; x < r; ++x)
                  for (Index xp = 0; xp < r; ++xp)
                    big(o * bm * d_max + b1 * d_max + x, op * bm * d_max + b2 * d_max + xp) =
                        small(o * bm * r + b1 * r + x, op * bm * r + b2 * r + xp);
        const Mat tau = Mat::Identity(dout, dout) / static_cast<double>(dout);
        for (Index o = 0; o < dout; ++o)
          for (Index op = 0; op < dout; ++op)
            for (Index b1 = 0; b1 < bm; ++b1)
              for (Index x = r; x < d_max; ++x)
                big(o * bm * d_max + b1 * d_max + x, op * bm * d_max + b1 * d_max + x) +=
                    tau(o, op);
        x1 = CpMapChoi(a_space, in_pad, std::move(big));
      }
      out.x1[static_cast<size_t>(m)].push_back(std::move(x1));
      // reconstruction check against the compressed block
      const Mat rebuilt = out.recompose(m, n).matrix();
      if ((rebuilt - xc).norm() > tol * 1000 * scale)
        throw error("semilocalize: block reconstruction failed");
    }
  }
  return out;
}

// Spec-level entry point: X on exactly three factors A ⊗ B ⊗ C.
inline SemilocalSplit semilocalize(const LabeledOperator& X, double tol = kDefaultTol) {
  if (X.space().num_factors() != 3)
    throw std::invalid_argument("semilocalize: expected factors A, B, C");
  return semilocalize_general(X, 1, tol);
}

//=========================================================================
// The memory-channel ladder: a level-n member factors per multi-index as
//   q(I)X = I_{D_k} * X_k(I^k) * … * X_1(I^1) * X_0(I_0)
// with one common ancilla H_D, stage channels X_m, and a terminal X_0 that
// is a state over the base (n even) or a generalized channel B₀ → D⊗B₁
// (n odd). Stage channels may depend on the central block of everything
// strictly below their input tooth.
//=========================================================================

struct LadderDecomposition {
  Index ancilla_dim = 1;
  // stages[m-1] is the paper's X_m, keyed by the multiblock id of the part
  // of A_n strictly below B_{2m-1} (n even) / B_{2m} (n odd)
  std::vector<std::map<Index, CpMapChoi>> stages;
  std::optional<LabeledOperator> x0;  // n even: state on (D₀, base)
  std::optional<CpMapChoi> x0_chan;   // n odd: generalized channel B₀ → D₀⊗B₁
  std::vector<FactorLabel> d_labels;  // D₀ … D_k
};

namespace detail {

// multiblock id of the trailing `count` factors of `sp`, read off a full
// multiblock id of sp
inline Index tail_multiblock(const TensorSpace& sp, Index mb, Index count) {
  std::vector<Index> digits;
  for (Index i = sp.num_factors(); i-- > 0;) {
    const Index nb = sp.factor(i).shape.num_blocks();
    digits.push_back(mb % nb);
    mb /= nb;
  }
  // digits are reversed (last factor first)
  Index out = 0;
  for (Index i = count; i-- > 0;) {
    const Index nb = sp.factor(sp.num_factors() - 1 - i).shape.num_blocks();
    out = out * nb + digits[static_cast<size_t>(i)];
  }
  return out;
}

// zero rows/cols of a Choi matrix whose digit at `pos` (in the operator's
// factor list) falls outside block `blk` of that factor
inline Mat mask_factor_block(const LabeledOperator& op, Index pos, Index blk) {
  const TensorSpace& sp = op.space();
  Mat out = op.matrix();
  for (Index g = 0; g < sp.dim(); ++g) {
    const auto dg = sp.digits(g);
    if (sp.factor(pos).shape.block_of_index(dg[static_cast<size_t>(pos)]) != blk) {
      out.row(g).setZero();
      out.col(g).setZero();
    }
  }
  return out;
}

}  // namespace detail

inline LadderDecomposition ladder_decompose(const LabeledOperator& X, const SupermapSpec& spec,
                                            double tol = kDefaultTol) {
  const Index n = spec.levels();
  const ChainReport chain = membership_by_chain(X, spec, n, tol);
  if (!chain.ok) throw error("ladder_decompose: X is not a member (" + chain.what + ")");
  const Index k = n / 2;

  LadderDecomposition dec;
  dec.d_labels.resize(static_cast<size_t>(k + 1));
  int maxid = 0;
  for (const auto& f : spec.spaces.back().factors()) maxid = std::max(maxid, f.label.id);
  for (Index i = 0; i <= k; ++i)
    dec.d_labels[static_cast<size_t>(i)] = FactorLabel{maxid + 1 + static_cast<int>(i)};

  LabeledOperator cur = spec.at_level(X, n);
  if (k == 0) {
    // trivial ladder with a one-dimensional ancilla
    if (n == 0) {
      std::vector<Factor> fs{Factor{dec.d_labels[0], AlgebraShape::matrix(1)}};
      const auto& bf = spec.spaces[0].factors();
      fs.insert(fs.end(), bf.begin(), bf.end());
      dec.x0 = LabeledOperator(TensorSpace(fs), cur.matrix());
    } else {
      std::vector<Factor> of{Factor{dec.d_labels[0], AlgebraShape::matrix(1)},
                             Factor{spec.chain_labels[0], spec.chain[0]}};
      std::vector<Factor> fs = of;
      const auto& bf = spec.spaces[0].factors();
      fs.insert(fs.end(), bf.begin(), bf.end());
      dec.x0_chan = CpMapChoi::from_operator(LabeledOperator(TensorSpace(fs), cur.matrix()), 2);
    }
    return dec;
  }

  dec.stages.resize(static_cast<size_t>(k));
  std::vector<Index> stage_d(static_cast<size_t>(k + 1), 1);  // d of D_{m}

  Index j = n;
  bool has_d = false;
  Index s = 0;  // step counter: stage index m = k - s
  while (j >= 2) {
    const Index m = k - s;
    const SemilocalSplit split = semilocalize_general(cur, has_d ? 2 : 1, tol);
    stage_d[static_cast<size_t>(m - 1)] = split.ancilla_dim;

    // assemble the stage channels: ⊕_i X1(i, ℓ), with the free tracial
    // ancilla tensored on top at the first step
    const Index nb = split.b_shape.num_blocks();
    const Index nc = split.c_space.num_multiblocks();
    std::vector<std::vector<Index>> bidx(static_cast<size_t>(nb));
    for (Index g = 0; g < split.b_shape.total_dim(); ++g)
      bidx[static_cast<size_t>(split.b_shape.block_of_index(g))].push_back(g);
    for (Index l = 0; l < nc; ++l) {
      // in-space of the assembled stage: (B_{j-1} full, D_new)
      const TensorSpace in_space({Factor{split.b_label, split.b_shape},
                                  Factor{dec.d_labels[static_cast<size_t>(m - 1)],
                                         AlgebraShape::matrix(split.ancilla_dim)}});
      const Index db = split.b_shape.total_dim();
      const Index dd = split.ancilla_dim;
      const Index dout = split.a_space.dim();
      Mat big = Mat::Zero(dout * db * dd, dout * db * dd);
      for (Index i = 0; i < nb; ++i) {
        const Mat& small = split.x1[static_cast<size_t>(i)][static_cast<size_t>(l)].choi().matrix();
        const auto& bi = bidx[static_cast<size_t>(i)];
        const Index bm = static_cast<Index>(bi.size());
        for (Index o = 0; o < dout; ++o)
          for (Index op = 0; op < dout; ++op)
            for (Index b1 = 0; b1 < bm; ++b1)
              for (Index b2 = 0; b2 < bm; ++b2)
                for (Index x = 0; x < dd; ++x)
                  for (Index xp = 0; xp < dd; ++xp)
                    big(o * db * dd + bi[static_cast<size_t>(b1)] * dd + x,
                        op * db * dd + bi[static_cast<size_t>(b2)] * dd + xp) =
                        small(o * bm * dd + b1 * dd + x, op * bm * dd + b2 * dd + xp);
      }
      // out-space: (D_m ⊗ A-part); the first step tensors ω_{D_m}
      if (!has_d) {
        const Index dm = 1;  // free ancilla, padded later with everything else
        std::vector<Factor> of{Factor{dec.d_labels[static_cast<size_t>(m)],
                                      AlgebraShape::matrix(dm)}};
        of.insert(of.end(), split.a_space.factors().begin(), split.a_space.factors().end());
        std::vector<Factor> fs = of;
        fs.insert(fs.end(), in_space.factors().begin(), in_space.factors().end());
        dec.stages[static_cast<size_t>(m - 1)].emplace(
            l, CpMapChoi::from_operator(LabeledOperator(TensorSpace(fs), big),
                                        static_cast<Index>(of.size())));
      } else {
        // A-part is already (D_m, B_j); relabel its D factor canonically
        std::vector<Factor> of = split.a_space.factors();
        of[0].label = dec.d_labels[static_cast<size_t>(m)];
        std::vector<Factor> fs = of;
        fs.insert(fs.end(), in_space.factors().begin(), in_space.factors().end());
        dec.stages[static_cast<size_t>(m - 1)].emplace(
            l, CpMapChoi::from_operator(LabeledOperator(TensorSpace(fs), big),
                                        static_cast<Index>(of.size())));
      }
    }

    // next object: ⊕_ℓ X0(ℓ) on (D_new, C-space)
    {
      const Index dd = split.ancilla_dim;
      const Index dc = split.c_space.dim();
      std::vector<Factor> fs{Factor{dec.d_labels[static_cast<size_t>(m - 1)],
                                    AlgebraShape::matrix(dd)}};
      fs.insert(fs.end(), split.c_space.factors().begin(), split.c_space.factors().end());
      Mat big = Mat::Zero(dd * dc, dd * dc);
      for (Index l = 0; l < nc; ++l) {
        const auto& ci = split.c_block_indices[static_cast<size_t>(l)];
        const Index cn = static_cast<Index>(ci.size());
        const Mat& small = split.x0[static_cast<size_t>(l)].matrix();
        for (Index x = 0; x < dd; ++x)
          for (Index xp = 0; xp < dd; ++xp)
            for (Index i = 0; i < cn; ++i)
              for (Index jj = 0; jj < cn; ++jj)
                big(x * dc + ci[static_cast<size_t>(i)], xp * dc + ci[static_cast<size_t>(jj)]) =
                    small(x * cn + i, xp * cn + jj);
      }
      cur = LabeledOperator(TensorSpace(fs), std::move(big));
    }
    has_d = true;
    j -= 2;
    ++s;
  }

  if (j == 0) {
    dec.x0 = cur;
  } else {
    // cur on (D₀, B₁, base): a generalized channel B₀ → D₀ ⊗ B₁
    dec.x0_chan = CpMapChoi::from_operator(cur, 2);
  }

  // common ancilla dimension: pad stage inputs/outputs and the terminal
  Index d_common = 1;
  for (Index i = 0; i <= k; ++i) d_common = std::max(d_common, stage_d[static_cast<size_t>(i)]);
  dec.ancilla_dim = d_common;
  auto pad_out_factor = [&](const CpMapChoi& mch, Index pos, Index newdim) -> CpMapChoi {
    // corner embedding of an output factor
    const TensorSpace& outs = mch.out_space();
    std::vector<Factor> of = outs.factors();
    of[static_cast<size_t>(pos)].shape = AlgebraShape::matrix(newdim);
    const TensorSpace newout(of);
    Mat big = Mat::Zero(newout.dim() * mch.in_dim(), newout.dim() * mch.in_dim());
    for (Index r = 0; r < mch.out_dim(); ++r)
      for (Index c = 0; c < mch.out_dim(); ++c) {
        // re-index r to the padded layout
        auto redigit = [&](Index g) {
          auto dg = outs.digits(g);
          Index out = 0;
          for (Index i = 0; i < newout.num_factors(); ++i)
            out = out * newout.factor(i).shape.total_dim() + dg[static_cast<size_t>(i)];
          return out;
        };
        const Index rp = redigit(r), cp = redigit(c);
        for (Index a = 0; a < mch.in_dim(); ++a)
          for (Index b = 0; b < mch.in_dim(); ++b)
            big(rp * mch.in_dim() + a, cp * mch.in_dim() + b) =
                mch.choi().matrix()(r * mch.in_dim() + a, c * mch.in_dim() + b);
      }
    return CpMapChoi(newout, mch.in_space(), std::move(big));
  };
  auto pad_in_factor = [&](const CpMapChoi& mch, Index pos, Index newdim) -> CpMapChoi {
    // input padding via the canonical extension with the tracial output
    const TensorSpace& ins = mch.in_space();
    std::vector<Factor> inf = ins.factors();
    inf[static_cast<size_t>(pos)].shape = AlgebraShape::matrix(newdim);
    const TensorSpace newin(inf);
    const Index dout = mch.out_dim();
    Mat big = Mat::Zero(dout * newin.dim(), dout * newin.dim());
    auto redigit = [&](Index g) {
      auto dg = ins.digits(g);
      Index out = 0;
      for (Index i = 0; i < newin.num_factors(); ++i)
        out = out * newin.factor(i).shape.total_dim() + dg[static_cast<size_t>(i)];
      return out;
    };
    for (Index r = 0; r < mch.in_dim(); ++r)
      for (Index c = 0; c < mch.in_dim(); ++c) {
        const Index rp = redigit(r), cp = redigit(c);
        for (Index a = 0; a < dout; ++a)
          for (Index b = 0; b < dout; ++b)
            big(a * newin.dim() + rp, b * newin.dim() + cp) =
                mch.choi().matrix()(a * mch.in_dim() + r, b * mch.in_dim() + c);
      }
    // embedded corner support
    std::vector<bool> in_corner(static_cast<size_t>(newin.dim()), false);
    for (Index r = 0; r < mch.in_dim(); ++r) in_corner[static_cast<size_t>(redigit(r))] = true;
    const Mat tau = Mat::Identity(dout, dout) / static_cast<double>(dout);
    for (Index g = 0; g < newin.dim(); ++g) {
      if (in_corner[static_cast<size_t>(g)]) continue;
      for (Index a = 0; a < dout; ++a)
        for (Index b = 0; b < dout; ++b) big(a * newin.dim() + g, b * newin.dim() + g) += tau(a, b);
    }
    return CpMapChoi(mch.out_space(), newin, std::move(big));
  };

  for (Index m = 1; m <= k; ++m) {
    for (auto& [key, st] : dec.stages[static_cast<size_t>(m - 1)]) {
      if (st.out_space().factor(0).shape.total_dim() != d_common) {
        if (m == k && st.out_space().factor(0).shape.total_dim() == 1) {
          // the free top ancilla enters as a tracial state
          std::vector<Factor> of = st.out_space().factors();
          of[0].shape = AlgebraShape::matrix(d_common);
          const Mat tau = Mat::Identity(d_common, d_common) / static_cast<double>(d_common);
          st = CpMapChoi(TensorSpace(of), st.in_space(),
                         detail::kron(tau, st.choi().matrix()));
        } else {
          st = pad_out_factor(st, 0, d_common);
        }
      }
      const Index dpos = st.in_space().num_factors() - 1;
      if (st.in_space().factor(dpos).shape.total_dim() != d_common)
        st = pad_in_factor(st, dpos, d_common);
    }
  }
  if (dec.x0 && dec.x0->space().factor(0).shape.total_dim() != d_common) {
    const TensorSpace& s0 = dec.x0->space();
    std::vector<Factor> fs = s0.factors();
    const Index old = fs[0].shape.total_dim();
    fs[0].shape = AlgebraShape::matrix(d_common);
    const TensorSpace ns(fs);
    Mat big = Mat::Zero(ns.dim(), ns.dim());
    const Index rest = s0.dim() / old;
    big.topLeftCorner(old * rest, old * rest) = dec.x0->matrix();
    dec.x0 = LabeledOperator(ns, std::move(big));
  }
  if (dec.x0_chan && dec.x0_chan->out_space().factor(0).shape.total_dim() != d_common)
    dec.x0_chan = pad_out_factor(*dec.x0_chan, 0, d_common);
  return dec;
}

// Largest per-multi-index reconstruction residual of Eq.-(links) form.
inline double ladder_reconstruction_residual(const LadderDecomposition& dec,
                                             const LabeledOperator& X,
                                             const SupermapSpec& spec) {
  const Index n = spec.levels();
  const Index k = n / 2;
  const LabeledOperator x = spec.at_level(X, n);
  const TensorSpace& sp = x.space();
  double worst = 0.0;

  for (Index mb = 0; mb < sp.num_multiblocks(); ++mb) {
    // digits (block ids) of this multiblock, factor by factor
    std::vector<Index> blk(static_cast<size_t>(sp.num_factors()));
    {
      Index t = mb;
      for (Index i = sp.num_factors(); i-- > 0;) {
        const Index nbk = sp.factor(i).shape.num_blocks();
        blk[static_cast<size_t>(i)] = t % nbk;
        t /= nbk;
      }
    }
    // terminal piece
    LabeledOperator piece = [&]() {
      if (dec.x0) {
        // mask base digits: base factors start at position 1 of x0's space
        LabeledOperator p = *dec.x0;
        const Index base_off = sp.num_factors() - p.space().num_factors() + 1;
        Mat mm = p.matrix();
        for (Index pos = 1; pos < p.space().num_factors(); ++pos)
          mm = detail::mask_factor_block(LabeledOperator(p.space(), mm), pos,
                                         blk[static_cast<size_t>(base_off + pos - 1)]);
        return LabeledOperator(p.space(), mm);
      }
      LabeledOperator p = dec.x0_chan->choi();
      // factors: (D₀, B₁, base…); B₁ sits at x-position n-1 → digit blk[n-1]
      Mat mm = p.matrix();
      const Index nfp = p.space().num_factors();
      for (Index pos = 1; pos < nfp; ++pos) {
        const Index xpos = sp.num_factors() - (nfp - pos);
        mm = detail::mask_factor_block(LabeledOperator(p.space(), mm), pos,
                                       blk[static_cast<size_t>(xpos)]);
      }
      return LabeledOperator(p.space(), mm);
    }();

    LabeledOperator acc = piece;
    for (Index m = 1; m <= k; ++m) {
      // stage key: multiblock of everything strictly below the stage input
      const Index below = (n % 2 == 0) ? (2 * m - 1) : (2 * m);
      // count factors of A_n strictly below chain index `below`:
      // chain factor B_i sits at position n - i; below-part positions are
      // n-below+1 … end
      const Index count = sp.num_factors() - (n - below) - 1;
      const Index key = detail::tail_multiblock(sp, mb, count);
      const CpMapChoi& st = dec.stages[static_cast<size_t>(m - 1)].at(key);
      // mask the stage's B'_{2m} (out pos 1) and B'_{2m-1} (in pos 0) blocks
      const Index top_idx = (n % 2 == 0) ? 2 * m : 2 * m + 1;  // chain index of B'_{2m}
      LabeledOperator stop = st.choi();
      Mat mm = detail::mask_factor_block(stop, 1, blk[static_cast<size_t>(n - top_idx)]);
      mm = detail::mask_factor_block(LabeledOperator(stop.space(), mm),
                                     st.out_space().num_factors(),
                                     blk[static_cast<size_t>(n - (top_idx - 1))]);
      acc = link_product(LabeledOperator(stop.space(), mm), acc);
    }
    // trace out the top ancilla
    const LabeledOperator traced = partial_trace(acc, {dec.d_labels[static_cast<size_t>(k)]});
    const Mat target = detail::mask_multiblock(sp, x.matrix(), mb);
    const LabeledOperator rel = spec.at_level(traced, n);
    worst = std::max(worst, (rel.matrix() - target).norm());
  }
  return worst;
}

//=========================================================================
// Channels on channels: Ξ(X_E) = Λ ∘ (E ⊗ id_{H_A})(ρ) with a pure ρ and
// dim H_A = rank(ω), ω read off the simple part of the factorization.
//=========================================================================

struct ChannelRealization {
  Index ancilla_dim = 1;
  LabeledOperator rho;    // pure state on (H₀, H_A)
  CpMapChoi lambda;       // channel B(H₁ ⊗ H_A) → B
  LabeledOperator omega;  // ω ∈ 𝔖(H₀)
};

inline ChannelRealization realize_on_channels(const CpMapChoi& X, double tol = kDefaultTol) {
  const TensorSpace& in = X.in_space();
  if (in.num_factors() != 2 || !in.factor(0).shape.is_matrix_algebra() ||
      !in.factor(1).shape.is_matrix_algebra())
    throw std::invalid_argument("realize_on_channels: input must be B(H1) ⊗ B(H0)");
  const SectionSpec sec = SectionSpec::channel_section(in, 1, tol);
  if (!is_generalized_channel(X, sec, tol))
    throw error("realize_on_channels: X fails the channel-section condition");
  const SimpleFactorization f = factor_simple(X, sec, tol);
  const Index d1 = in.factor(0).shape.total_dim();
  const Index d0 = in.factor(1).shape.total_dim();
  // c = I_{H1} ⊗ v with Tr v = t_{H0}; ω := v / t_{H0}
  const LabeledOperator cop(in, f.c.matrix());
  Mat v = partial_trace(cop, {in.factor(0).label}).matrix() / static_cast<double>(d1);
  Mat iv(d0 * d1, d0 * d1);
  for (Index i = 0; i < d1; ++i)
    for (Index jj = 0; jj < d1; ++jj)
      iv.block(i * d0, jj * d0, d0, d0) = (i == jj ? 1.0 : 0.0) * v;
  if ((f.c.matrix() - iv).norm() > tol * 100 * std::max(1.0, f.c.matrix().norm()))
    throw error("realize_on_channels: simple part is not of the form I otimes v");
  const Mat omega = v / static_cast<double>(d0);

  detail::HermEig eig = detail::eig_hermitian(omega, tol, "realize_on_channels");
  const double cut = tol * std::max(1.0, std::abs(eig.values.size() ? eig.values(0) : 0.0));
  Index r = 0;
  while (r < eig.values.size() && eig.values(r) > cut) ++r;
  r = std::max<Index>(r, 1);
  // full-rank ω keeps H_A = H₀ with no basis rotation, so degenerate
  // spectra still give the canonical purification
  const Mat p = (r == d0) ? Mat(Mat::Identity(d0, d0)) : Mat(eig.vectors.leftCols(r));
  const Mat msqrt = p.adjoint() * detail::psd_sqrt(omega, tol);  // r × d0

  // ρ = (I ⊗ M) Ψ_{H0} (I ⊗ M)†, a pure state on H₀ ⊗ H_A
  int maxid = 0;
  for (const auto& ff : in.factors()) maxid = std::max(maxid, ff.label.id);
  for (const auto& ff : X.out_space().factors()) maxid = std::max(maxid, ff.label.id);
  const FactorLabel l0{maxid + 1}, lA{maxid + 2};
  const TensorSpace rho_space({Factor{l0, AlgebraShape::matrix(d0)},
                               Factor{lA, AlgebraShape::matrix(r)}});
  Mat rho = Mat::Zero(d0 * r, d0 * r);
  for (Index i = 0; i < d0; ++i)
    for (Index jj = 0; jj < d0; ++jj)
      for (Index a = 0; a < r; ++a)
        for (Index b = 0; b < r; ++b)
          rho(i * r + a, jj * r + b) += msqrt(a, i) * std::conj(msqrt(b, jj));

  // Λ compressed onto B(H₁ ⊗ H_A): z ↦ Λ_ext((I ⊗ P) z (I ⊗ P)†), which on
  // Choi matrices reads X' = (I_B ⊗ V^T) X_Λ (I_B ⊗ V^T)† with V = I ⊗ P
  const TensorSpace lam_in({Factor{in.factor(0).label, AlgebraShape::matrix(d1)},
                            Factor{lA, AlgebraShape::matrix(r)}});
  Mat vmap = Mat::Zero(d1 * d0, d1 * r);  // I_{d1} ⊗ P
  for (Index i = 0; i < d1; ++i) vmap.block(i * d0, i * r, d0, r) = p;
  const Index dout = X.out_dim();
  Mat m1 = Mat::Zero(dout * d1 * r, dout * d1 * d0);
  for (Index o = 0; o < dout; ++o)
    m1.block(o * d1 * r, o * d1 * d0, d1 * r, d1 * d0) = vmap.transpose();
  const Mat lam = m1 * f.lambda.choi().matrix() * m1.adjoint();

  ChannelRealization out{r, LabeledOperator(rho_space, std::move(rho)),
                         CpMapChoi(X.out_space(), lam_in, lam),
                         LabeledOperator(TensorSpace::single(l0, AlgebraShape::matrix(d0)), omega)};
  if (!is_channel(out.lambda, tol * 100))
    throw error("realize_on_channels: compressed map is not a channel");
  return out;
}

// Converse direction: Φ = t_{H0} · Λ ∘ (id_{H1} ⊗ R) with R the map whose
// Choi matrix is ρ; the result is a generalized channel for the section.
inline CpMapChoi from_realization(const LabeledOperator& rho, const CpMapChoi& lambda,
                                  const TensorSpace& chan_space, double tol = kDefaultTol) {
  if (rho.space().num_factors() != 2)
    throw std::invalid_argument("from_realization: rho must live on H0 ⊗ H_A");
  if (!detail::is_psd(rho.matrix(), tol) || std::abs(rho.trace() - cx(1, 0)) > 100 * tol)
    throw error("from_realization: rho is not a state");
  if (!is_channel(lambda, tol * 10)) throw error("from_realization: lambda is not a channel");
  const Index d0 = chan_space.factor(1).shape.total_dim();
  const Index d1 = chan_space.factor(0).shape.total_dim();
  const Index dA = rho.space().factor(1).shape.total_dim();
  if (rho.space().factor(0).shape.total_dim() != d0 ||
      lambda.in_space().factor(0).shape.total_dim() != d1 ||
      lambda.in_space().factor(1).shape.total_dim() != dA)
    throw std::invalid_argument("from_realization: dimension mismatch");

  // Choi of id_{H1} ⊗ R on fresh labels, output (H1', A'), input (H1, H0)
  const FactorLabel l1o{900}, lAo{901};
  const FactorLabel l1 = chan_space.factor(0).label, l0 = chan_space.factor(1).label;
  const LabeledOperator psi1 = max_entangled(l1o, l1, chan_space.factor(0).shape);
  // Choi(R) (output first) is ρ with its factors swapped
  const LabeledOperator rho_named(TensorSpace({Factor{l0, AlgebraShape::matrix(d0)},
                                               Factor{lAo, AlgebraShape::matrix(dA)}}),
                                  rho.matrix());
  const LabeledOperator rchoi = permute_factors(rho_named, {1, 0});
  LabeledOperator idr = tensor(psi1, rchoi);       // (H1', H1, A', H0)
  idr = permute_factors(idr, {0, 2, 1, 3});        // (H1', A', H1, H0)
  const CpMapChoi idr_map = CpMapChoi::from_operator(idr, 2);
  const CpMapChoi lam(lambda.out_space(),
                      TensorSpace({Factor{l1o, AlgebraShape::matrix(d1)},
                                   Factor{lAo, AlgebraShape::matrix(dA)}}),
                      lambda.choi().matrix());
  const CpMapChoi chained = compose(lam, idr_map);
  return CpMapChoi(lambda.out_space(), chan_space,
                   static_cast<double>(d0) * chained.choi().matrix());
}

}  // namespace qcomb

#endif


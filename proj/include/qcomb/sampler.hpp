// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#ifndef QCOMB_SAMPLER_HPP
#define QCOMB_SAMPLER_HPP

#include "qcomb/decompose.hpp"

#include <random>

namespace qcomb {

//=========================================================================
// Seeded random generation for property tests and oracles.
//
// Ginibre-style generation throughout: complex standard normal entries,
// isometries from QR with the R diagonal made positive. Identical seeds
// reproduce identical outputs on one build. Generators are value-semantic;
// there is no global RNG.
//=========================================================================

struct Seed {
  std::uint64_t value = 0;
  Seed fork(std::uint64_t stream) const { return Seed{value * 0x9e3779b97f4a7c15ULL + stream + 1}; }
};

namespace detail {

inline cx sample_normal(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const double re = g(rng), im = g(rng);
  return cx(re, im) / std::sqrt(2.0);
}

inline Mat sample_ginibre(Index rows, Index cols, std::mt19937_64& rng) {
  Mat m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = sample_normal(rng);
  return m;
}

// isometry with positive-diagonal R convention (rows ≥ cols)
inline Mat sample_isometry(Index rows, Index cols, std::mt19937_64& rng) {
  if (rows < cols) throw std::invalid_argument("sample_isometry: rows < cols");
  const Mat g = sample_ginibre(rows, cols, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(rows, cols);
  const Mat r = q.adjoint() * g;
  for (Index c = 0; c < cols; ++c) {
    const cx d = r(c, c);
    if (std::abs(d) > 0) q.col(c) *= d / std::abs(d);
  }
  return q;
}

inline Mat sample_block_ginibre(const TensorSpace& s, std::mt19937_64& rng) {
  Mat m = Mat::Zero(s.dim(), s.dim());
  for (Index k = 0; k < s.num_cells(); ++k) {
    const auto [r, c] = s.cell(k);
    m(r, c) = sample_normal(rng);
  }
  return m;
}

}  // namespace detail

// full-support density operator of an algebra
inline AlgOperator random_state(const AlgebraShape& shape, Seed seed) {
  std::mt19937_64 rng(seed.value);
  const Index d = shape.total_dim();
  Mat m = Mat::Zero(d, d);
  Index off = 0;
  for (Index b : shape.blocks()) {
    const Mat g = detail::sample_ginibre(b, b, rng);
    m.block(off, off, b, b) = g * g.adjoint();
    off += b;
  }
  m /= m.trace().real();
  return AlgOperator(shape, m);
}

inline LabeledOperator random_state(const TensorSpace& space, Seed seed) {
  std::mt19937_64 rng(seed.value);
  const Mat g = detail::sample_block_ginibre(space, rng);
  Mat m = g * g.adjoint();
  m /= m.trace().real();
  return LabeledOperator(space, m);
}

// channel built from a random Stinespring isometry per input block, then
// pinched onto the output block pattern
inline CpMapChoi random_channel(const TensorSpace& out, const TensorSpace& in, Index kraus_rank,
                                Seed seed) {
  if (kraus_rank < 1) throw std::invalid_argument("random_channel: kraus_rank < 1");
  std::mt19937_64 rng(seed.value);
  const Index din = in.dim(), dout = out.dim();
  Mat choi = Mat::Zero(dout * din, dout * din);
  // per input multiblock: V_n : H_n → H_out ⊗ C^r
  std::vector<std::vector<Index>> blocks(static_cast<size_t>(in.num_multiblocks()));
  for (Index g = 0; g < din; ++g) blocks[static_cast<size_t>(in.multiblock_of(g))].push_back(g);
  for (const auto& idx : blocks) {
    if (idx.empty()) continue;
    const Index an = static_cast<Index>(idx.size());
    const Index rank = std::min(kraus_rank, dout * an);  // isometry needs rows ≥ cols
    const Mat v = detail::sample_isometry(dout * rank, an, rng);
    for (Index k = 0; k < rank; ++k) {
      Mat kr = Mat::Zero(dout, din);
      for (Index o = 0; o < dout; ++o)
        for (Index a = 0; a < an; ++a) kr(o, idx[static_cast<size_t>(a)]) = v(o * rank + k, a);
      // pinch the output onto its block pattern
      for (Index ob = 0; ob < out.num_multiblocks(); ++ob) {
        Mat kb = Mat::Zero(dout, din);
        bool nonzero = false;
        for (Index o = 0; o < dout; ++o) {
          if (out.multiblock_of(o) != ob) continue;
          kb.row(o) = kr.row(o);
          if (kb.row(o).norm() > 0) nonzero = true;
        }
        if (!nonzero) continue;
        Vec veck(dout * din);
        for (Index o = 0; o < dout; ++o)
          for (Index i = 0; i < din; ++i) veck(o * din + i) = kb(o, i);
        choi += veck * veck.adjoint();
      }
    }
  }
  return CpMapChoi(out, in, std::move(choi));
}

inline CpMapChoi random_channel(const AlgebraShape& in, const AlgebraShape& out, Index kraus_rank,
                                Seed seed, FactorLabel in_label = FactorLabel{0},
                                FactorLabel out_label = FactorLabel{1}) {
  return random_channel(TensorSpace::single(out_label, out), TensorSpace::single(in_label, in),
                        kraus_rank, seed);
}

// The standard K-sampler: random Hermitian, projected onto J, mixed with ρ
// at half the largest positivity-preserving weight (bisection).
inline LabeledOperator random_section_element(const SectionSpec& K, Seed seed) {
  std::mt19937_64 rng(seed.value);
  const TensorSpace& sp = K.space();
  for (int attempt = 0; attempt < 16; ++attempt) {
    Mat h = detail::sample_block_ginibre(sp, rng);
    h = detail::hermitize(h);
    Mat dir = K.J.project(h);
    dir = detail::hermitize(dir);
    dir -= dir.trace().real() * K.rho.matrix();
    const double n = dir.norm();
    if (n < 1e-12) continue;
    dir /= n;
    // largest weight keeping rho + s·dir positive
    double lo = 0.0, hi = 1.0;
    auto psd_at = [&](double s) {
      Eigen::SelfAdjointEigenSolver<Mat> es(K.rho.matrix() + s * dir, Eigen::EigenvaluesOnly);
      return es.eigenvalues().minCoeff() >= -1e-12;
    };
    while (psd_at(hi) && hi < 1e6) hi *= 2.0;
    for (int it = 0; it < 40; ++it) {
      const double mid = (lo + hi) / 2.0;
      (psd_at(mid) ? lo : hi) = mid;
    }
    if (lo <= 1e-12) continue;
    Mat out = K.rho.matrix() + 0.5 * lo * dir;
    out = detail::hermitize(out);
    out /= out.trace().real();
    return LabeledOperator(sp, out);
  }
  return K.rho;  // the section is a single point (or numerically close to one)
}

// a random simple element c ∈ (I + K^⊥) ∩ A⁺
inline LabeledOperator random_simple_element(const SectionSpec& K, Seed seed) {
  std::mt19937_64 rng(seed.value);
  const TensorSpace& sp = K.space();
  Mat w = K.J.orthocomplement().project(detail::sample_block_ginibre(sp, rng));
  w = detail::hermitize(w);
  Mat c = Mat::Identity(sp.dim(), sp.dim());
  const double n = w.norm();
  if (n > 1e-12) {
    w /= n;
    double lo = 0.0, hi = 1.0;
    auto psd_at = [&](double s) {
      Eigen::SelfAdjointEigenSolver<Mat> es(c + s * w, Eigen::EigenvaluesOnly);
      return es.eigenvalues().minCoeff() >= -1e-12;
    };
    while (psd_at(hi) && hi < 1e6) hi *= 2.0;
    for (int it = 0; it < 40; ++it) {
      const double mid = (lo + hi) / 2.0;
      (psd_at(mid) ? lo : hi) = mid;
    }
    c += 0.5 * lo * w;
    c = detail::hermitize(c);
  }
  return LabeledOperator(sp, c);
}

// Λ ∘ χ_c with a random channel Λ and a random simple element
// (Prop.-preproc converse construction). `out` labels must not collide with
// the section's labels.
inline CpMapChoi random_generalized_channel(const SectionSpec& K, const TensorSpace& out,
                                            Seed seed) {
  std::mt19937_64 rng(seed.value);
  const TensorSpace& sp = K.space();
  const LabeledOperator c = random_simple_element(K, Seed{rng()});
  const CpMapChoi lam = random_channel(out, sp, 2, Seed{rng()});
  const Mat st = detail::psd_sqrt(c.matrix(), kDefaultTol).transpose().eval();
  const Mat is = detail::kron(Mat::Identity(out.dim(), out.dim()), st);
  return CpMapChoi(out, sp, is * lam.choi().matrix() * is);
}

// Chain a random ladder into a level-n member and hand back the generating
// decomposition as a known-good oracle.
inline std::pair<LabeledOperator, LadderDecomposition> random_comb(const SupermapSpec& spec,
                                                                   Seed seed,
                                                                   Index ancilla_dim = 2) {
  std::mt19937_64 rng(seed.value);
  const Index n = spec.levels();
  const Index k = n / 2;

  LadderDecomposition dec;
  dec.ancilla_dim = ancilla_dim;
  int maxid = 0;
  for (const auto& f : spec.spaces.back().factors()) maxid = std::max(maxid, f.label.id);
  for (Index i = 0; i <= k; ++i)
    dec.d_labels.push_back(FactorLabel{maxid + 1 + static_cast<int>(i)});

  // terminal object
  LabeledOperator cur = [&]() {
    if (n % 2 == 0) {
      // classically correlated extension of a section element
      const LabeledOperator s1 = random_section_element(spec.base, Seed{rng()});
      const LabeledOperator s2 = random_section_element(spec.base, Seed{rng()});
      Mat g1 = detail::sample_ginibre(ancilla_dim, ancilla_dim, rng);
      Mat g2 = detail::sample_ginibre(ancilla_dim, ancilla_dim, rng);
      Mat r1 = g1 * g1.adjoint();
      Mat r2 = g2 * g2.adjoint();
      r1 /= r1.trace().real();
      r2 /= r2.trace().real();
      std::vector<Factor> fs{Factor{dec.d_labels[0], AlgebraShape::matrix(ancilla_dim)}};
      const auto& bf = spec.spaces[0].factors();
      fs.insert(fs.end(), bf.begin(), bf.end());
      const Mat big = 0.5 * detail::kron(r1, s1.matrix()) + 0.5 * detail::kron(r2, s2.matrix());
      LabeledOperator x0(TensorSpace(fs), big);
      dec.x0 = x0;
      return x0;
    }
    // generalized channel B₀ → D₀ ⊗ B₁
    const TensorSpace out({Factor{dec.d_labels[0], AlgebraShape::matrix(ancilla_dim)},
                           Factor{spec.chain_labels[0], spec.chain[0]}});
    const CpMapChoi x0 = random_generalized_channel(spec.base, out, Seed{rng()});
    dec.x0_chan = x0;
    return x0.choi();
  }();

  dec.stages.resize(static_cast<size_t>(k));
  for (Index m = 1; m <= k; ++m) {
    const Index lo = (n % 2 == 0) ? 2 * m - 1 : 2 * m;      // chain index of B'_{2m-1}
    const Index hi = lo + 1;                                 // chain index of B'_{2m}
    const TensorSpace out({Factor{dec.d_labels[static_cast<size_t>(m)],
                                  AlgebraShape::matrix(ancilla_dim)},
                           Factor{spec.chain_labels[static_cast<size_t>(hi - 1)],
                                  spec.chain[static_cast<size_t>(hi - 1)]}});
    const TensorSpace in({Factor{spec.chain_labels[static_cast<size_t>(lo - 1)],
                                 spec.chain[static_cast<size_t>(lo - 1)]},
                          Factor{dec.d_labels[static_cast<size_t>(m - 1)],
                                 AlgebraShape::matrix(ancilla_dim)}});
    const CpMapChoi stage = random_channel(out, in, 2, Seed{rng()});
    // snap the link chain together as we go
    cur = link_product(stage.choi(), cur);
    // one global stage serves every lower multiblock
    const TensorSpace key_space = [&]() {
      std::vector<Factor> fs(spec.spaces[static_cast<size_t>(lo - 1)].factors());
      return TensorSpace(fs);
    }();
    for (Index key = 0; key < key_space.num_multiblocks(); ++key)
      dec.stages[static_cast<size_t>(m - 1)].emplace(key, stage);
  }
  const LabeledOperator x =
      spec.at_level(partial_trace(cur, {dec.d_labels[static_cast<size_t>(k)]}), n);
  return {x, dec};
}

}  // namespace qcomb

#endif

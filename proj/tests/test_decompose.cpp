// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#include "qcomb/sampler.hpp"
#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace qcomb;
namespace tu = qcomb::testutil;

namespace {
const AlgebraShape q2({2});

// assemble the full operator from a split by embedding the compressed
// (m, n) blocks back into A ⊗ B ⊗ C
Mat reassemble(const SemilocalSplit& split) {
  const Index da = split.a_space.dim();
  const Index db = split.b_shape.total_dim();
  const Index dc = split.c_space.dim();
  Mat out = Mat::Zero(da * db * dc, da * db * dc);
  std::vector<std::vector<Index>> bidx(static_cast<size_t>(split.b_shape.num_blocks()));
  for (Index g = 0; g < db; ++g)
    bidx[static_cast<size_t>(split.b_shape.block_of_index(g))].push_back(g);
  for (size_t m = 0; m < split.x1.size(); ++m)
    for (size_t n = 0; n < split.x0.size(); ++n) {
      const Mat blk = split.recompose(static_cast<Index>(m), static_cast<Index>(n)).matrix();
      const auto& bi = bidx[m];
      const auto& ci = split.c_block_indices[n];
      const Index bm = static_cast<Index>(bi.size());
      const Index cn = static_cast<Index>(ci.size());
      for (Index a = 0; a < da; ++a)
        for (Index ap = 0; ap < da; ++ap)
          for (Index b = 0; b < bm; ++b)
            for (Index bp = 0; bp < bm; ++bp)
              for (Index c = 0; c < cn; ++c)
                for (Index cp = 0; cp < cn; ++cp)
                  out((a * db + bi[static_cast<size_t>(b)]) * dc + ci[static_cast<size_t>(c)],
                      (ap * db + bi[static_cast<size_t>(bp)]) * dc + ci[static_cast<size_t>(cp)]) =
                      blk((a * bm + b) * cn + c, (ap * bm + bp) * cn + cp);
    }
  return out;
}

// Choi of E ⊗ id acting on the space of rho
CpMapChoi extend_channel(const CpMapChoi& ch, const LabeledOperator& rho) {
  const LabeledOperator psiA = max_entangled(FactorLabel{700}, rho.space().factor(1).label,
                                             rho.space().factor(1).shape);
  const CpMapChoi chm(TensorSpace::single(FactorLabel{701}, q2),
                      TensorSpace::single(rho.space().factor(0).label, q2),
                      ch.choi().matrix());
  LabeledOperator big = tensor(chm.choi(), psiA);
  big = permute_factors(big, {0, 2, 1, 3});
  return CpMapChoi::from_operator(big, 2);
}
}  // namespace

TEST_CASE("intertwining isometry", "[decompose]") {
  std::mt19937_64 rng(233);
  // W = identity: U is V reshaped
  {
    const Mat w = Mat::Identity(2, 2);  // d = 2, b = 1, b' = 2
    const Mat v = tu::ginibre(8, 4, rng);
    Eigen::HouseholderQR<Mat> qr(v);
    const Mat viso = qr.householderQ() * Mat::Identity(8, 4);
    const Mat u = intertwining_isometry(viso, w, 2, 1);
    REQUIRE((u - viso).norm() < 1e-9);
  }
  // d = 1: a single least-squares system per α
  {
    Mat w(1, 2);
    w << cx(0.6, 0), cx(0.8, 0);  // unit row vector, W W† = 1
    Mat u0 = tu::ginibre(3, 2, rng);
    Eigen::HouseholderQR<Mat> qr(u0);
    const Mat uiso = qr.householderQ() * Mat::Identity(3, 2);
    Mat v(3, 4);
    for (Index r = 0; r < 3; ++r)
      for (Index alpha = 0; alpha < 2; ++alpha)
        for (Index bp = 0; bp < 2; ++bp) v(r, alpha * 2 + bp) = uiso(r, alpha) * w(0, bp);
    const Mat u = intertwining_isometry(v, w, 2, 1);
    REQUIRE((u - uiso).norm() < 1e-9);
  }
  // violated semicausality has no solution
  {
    const Mat w = Mat::Identity(2, 2);
    Mat v = 10.0 * tu::ginibre(8, 4, rng);
    REQUIRE_THROWS_AS(intertwining_isometry(v, w, 2, 1), error);
  }
}

TEST_CASE("semilocal split of product operators", "[decompose]") {
  std::mt19937_64 rng(239);
  // X = σ_A ⊗ I_B ⊗ Y: the tensor factors force the split
  Mat sigma = tu::random_psd(q2, rng);
  sigma /= sigma.trace().real();
  const Mat g = tu::ginibre(2, 2, rng);
  const Mat y = g * g.adjoint();
  const TensorSpace sp({Factor{FactorLabel{0}, q2}, Factor{FactorLabel{1}, q2},
                        Factor{FactorLabel{2}, q2}});
  const Mat x = detail::kron(sigma, detail::kron(Mat::Identity(2, 2), y));
  const SemilocalSplit split = semilocalize(LabeledOperator(sp, x));
  REQUIRE(split.ancilla_dim == 2);  // rank of a generic Y
  REQUIRE((split.y.matrix() - y).norm() < 1e-9);
  REQUIRE((reassemble(split) - x).norm() < 1e-8);
  for (const auto& row : split.x1)
    for (const auto& ch : row) REQUIRE(is_channel(ch, 1e-8));
  for (const auto& x0 : split.x0) REQUIRE(detail::is_psd(x0.matrix(), 1e-9));
}

TEST_CASE("semilocal split with a trivial middle factor", "[decompose]") {
  std::mt19937_64 rng(241);
  const TensorSpace sp({Factor{FactorLabel{0}, q2}, Factor{FactorLabel{1}, AlgebraShape({1})},
                        Factor{FactorLabel{2}, q2}});
  // with B trivial, condition (i) only names Y := Tr_A X
  const Mat gg = tu::ginibre(4, 4, rng);
  Mat x = gg * gg.adjoint();
  const SemilocalSplit split = semilocalize(LabeledOperator(sp, x));
  REQUIRE((reassemble(split) - x).norm() < 1e-8 * std::max(1.0, x.norm()));
}

TEST_CASE("semilocal split of constructed semicausal operators", "[decompose]") {
  // random channel linked with a random positive ancilla operator
  std::mt19937_64 rng(251);
  const std::vector<std::pair<AlgebraShape, AlgebraShape>> configs = {
      {AlgebraShape({2}), AlgebraShape({2})},
      {AlgebraShape({2, 1}), AlgebraShape({1, 1})},
  };
  for (const auto& [ashape, bshape] : configs) {
    for (int t = 0; t < 4; ++t) {
      const Index dD = 2;
      const AlgebraShape cshape({2});
      const TensorSpace chan_in({Factor{FactorLabel{1}, bshape},
                                 Factor{FactorLabel{9}, AlgebraShape::matrix(dD)}});
      const TensorSpace chan_out = TensorSpace::single(FactorLabel{0}, ashape);
      const CpMapChoi x1 =
          random_channel(chan_out, chan_in, 2, Seed{static_cast<uint64_t>(4000 + t)});
      const TensorSpace x0_space({Factor{FactorLabel{9}, AlgebraShape::matrix(dD)},
                                  Factor{FactorLabel{2}, cshape}});
      Mat g = tu::ginibre(2 * dD, 2 * dD, rng);
      const LabeledOperator x0(x0_space, g * g.adjoint());
      const LabeledOperator x = link_product(x1.choi(), x0);
      const SemilocalSplit split = semilocalize(x);
      REQUIRE((reassemble(split) - x.matrix()).norm() < 1e-8 * std::max(1.0, x.matrix().norm()));
      // Tr_D X0(n) = Y_n
      for (size_t n = 0; n < split.x0.size(); ++n) {
        const Mat td = partial_trace(split.x0[n], {split.d_label}).matrix();
        const auto& ci = split.c_block_indices[n];
        Mat yn(static_cast<Index>(ci.size()), static_cast<Index>(ci.size()));
        for (size_t r = 0; r < ci.size(); ++r)
          for (size_t c = 0; c < ci.size(); ++c)
            yn(static_cast<Index>(r), static_cast<Index>(c)) = split.y.matrix()(ci[r], ci[c]);
        REQUIRE((td - yn).norm() < 1e-9 * std::max(1.0, yn.norm()) + 1e-12);
      }
    }
  }
}

TEST_CASE("invalid semicausal inputs are rejected", "[decompose]") {
  std::mt19937_64 rng(257);
  const TensorSpace sp({Factor{FactorLabel{0}, q2}, Factor{FactorLabel{1}, q2},
                        Factor{FactorLabel{2}, q2}});
  int rejected = 0;
  for (int t = 0; t < 20; ++t) {
    const Mat g = tu::ginibre(8, 8, rng);
    const Mat x = g * g.adjoint();
    try {
      (void)semilocalize(LabeledOperator(sp, x));
    } catch (const error&) {
      ++rejected;
    }
  }
  REQUIRE(rejected == 20);
  Mat neg = Mat::Identity(8, 8);
  neg(0, 0) = -1.0;
  REQUIRE_THROWS_AS(semilocalize(LabeledOperator(sp, neg)), error);
}

TEST_CASE("ladder decomposition of the uniform comb", "[decompose]") {
  std::vector<AlgebraShape> shapes(4, q2);
  const SupermapSpec spec = comb_spec(shapes);
  const LabeledOperator uniform(spec.spaces[3], Mat::Identity(16, 16) / 4.0);
  const LadderDecomposition dec = ladder_decompose(uniform, spec);
  REQUIRE(ladder_reconstruction_residual(dec, uniform, spec) < 1e-8);
  for (const auto& stage : dec.stages)
    for (const auto& [key, ch] : stage) REQUIRE(is_tp(ch, 1e-9));
  REQUIRE(dec.x0_chan.has_value());
  REQUIRE(is_generalized_channel(*dec.x0_chan, spec.base, 1e-8));
}

TEST_CASE("ladder decomposition round trips sampler combs", "[decompose]") {
  std::vector<SupermapSpec> specs;
  specs.push_back(comb_spec({q2, q2, q2}));                          // n = 2
  specs.push_back(comb_spec({q2, q2, q2, q2}));                      // n = 3
  specs.push_back(comb_spec({q2, q2, AlgebraShape::classical(2)}));  // tester-like
  for (const auto& spec : specs) {
    for (int t = 0; t < 4; ++t) {
      const auto [x, gen] = random_comb(spec, Seed{static_cast<uint64_t>(5000 + t)});
      // the generating ladder reconstructs by construction
      REQUIRE(ladder_reconstruction_residual(gen, x, spec) < 1e-8);
      // and so does the one we compute
      const LadderDecomposition dec = ladder_decompose(x, spec);
      REQUIRE(ladder_reconstruction_residual(dec, x, spec) < 1e-8);
      for (const auto& stage : dec.stages)
        for (const auto& [key, ch] : stage) REQUIRE(is_tp(ch, 1e-9));
      if (spec.levels() % 2 == 0) {
        REQUIRE(dec.x0.has_value());
        REQUIRE(std::abs(dec.x0->trace() - cx(1, 0)) < 1e-8);
        const LabeledOperator red = partial_trace(*dec.x0, {dec.d_labels[0]});
        REQUIRE(section_contains(spec.base.J,
                                 LabeledOperator(spec.base.space(), red.matrix()), 1e-7));
      } else {
        REQUIRE(dec.x0_chan.has_value());
        REQUIRE(is_generalized_channel(*dec.x0_chan, spec.base, 1e-7));
      }
    }
  }
}

TEST_CASE("trivial ladders", "[decompose]") {
  const SupermapSpec spec = comb_spec({q2, q2});
  const CpMapChoi chan = random_channel(q2, q2, 2, Seed{99});
  const LabeledOperator x(spec.spaces[1], chan.choi().matrix());
  const LadderDecomposition dec = ladder_decompose(x, spec);
  REQUIRE(dec.stages.empty());
  REQUIRE(dec.x0_chan.has_value());
  REQUIRE((dec.x0_chan->choi().matrix() - x.matrix()).norm() < 1e-12);
}

TEST_CASE("restriction consistency of ladder stages", "[decompose]") {
  // block-dependent stages: classical teeth and a classical base
  const std::vector<std::vector<AlgebraShape>> chains = {
      {q2, AlgebraShape::classical(2), q2},
      {AlgebraShape::classical(2), q2, q2},
  };
  for (const auto& shapes : chains) {
    const SupermapSpec spec = comb_spec(shapes);
    for (int t = 0; t < 3; ++t) {
      const auto [x, gen] = random_comb(spec, Seed{static_cast<uint64_t>(5100 + t)});
      const LadderDecomposition dec = ladder_decompose(x, spec);
      REQUIRE(ladder_reconstruction_residual(dec, x, spec) < 1e-8);
    }
  }
}

TEST_CASE("corollary factorization through the terminal simple channel", "[decompose]") {
  // odd n: splitting the terminal generalized channel into Λ₀ ∘ χ and
  // recomposing leaves the ladder reconstruction intact
  const SupermapSpec spec = comb_spec({q2, q2, q2, q2});
  const auto [x, gen] = random_comb(spec, Seed{6100});
  LadderDecomposition dec = ladder_decompose(x, spec);
  REQUIRE(dec.x0_chan.has_value());
  const SimpleFactorization f = factor_simple(*dec.x0_chan, spec.base);
  const CpMapChoi rebuilt = recompose_simple(f);
  dec.x0_chan =
      CpMapChoi(dec.x0_chan->out_space(), dec.x0_chan->in_space(), rebuilt.choi().matrix());
  REQUIRE(ladder_reconstruction_residual(dec, x, spec) < 1e-8);
}

TEST_CASE("blockwise supermap application through decomposed pairs", "[decompose]") {
  // the interleaved link chain of the two ladders agrees with the direct
  // contraction Y * X
  const SupermapSpec spec = comb_spec({q2, q2, q2, q2});
  const auto [y, ydec] = random_comb(spec, Seed{6200});
  const SupermapSpec spec2 = comb_spec({q2, q2, q2});
  const auto [x, xdec] = random_comb(spec2, Seed{6300});

  const LabeledOperator direct = apply_supermap(spec.at_level(y, 3), x, spec);

  // keep each ladder's ancillas private before chaining
  auto remap = [](const LabeledOperator& op, const std::vector<FactorLabel>& from, int base) {
    std::vector<FactorLabel> ls;
    for (const auto& f : op.space().factors()) {
      int id = f.label.id;
      for (size_t i = 0; i < from.size(); ++i)
        if (from[i].id == id) id = base + static_cast<int>(i);
      ls.push_back(FactorLabel{id});
    }
    return op.relabeled(ls);
  };
  const LabeledOperator ystage = remap(ydec.stages[0].begin()->second.choi(), ydec.d_labels, 3000);
  const LabeledOperator y0 = remap(ydec.x0_chan->choi(), ydec.d_labels, 3000);
  const LabeledOperator xstage = remap(xdec.stages[0].begin()->second.choi(), xdec.d_labels, 2000);
  const LabeledOperator x0 = remap(*xdec.x0, xdec.d_labels, 2000);

  LabeledOperator chainr = link_product(ystage, xstage);
  chainr = link_product(chainr, y0);
  chainr = link_product(chainr, x0);
  LabelSet anc;
  for (const auto& f : chainr.space().factors())
    if (f.label.id >= 2000) anc.insert(f.label);
  const LabeledOperator traced = partial_trace(chainr, anc);
  REQUIRE((traced.matrix() - direct.matrix()).norm() < 1e-8);
}

TEST_CASE("realization of channels on channels", "[decompose]") {
  const TensorSpace cb({Factor{FactorLabel{1}, q2}, Factor{FactorLabel{0}, q2}});
  const SectionSpec chan = SectionSpec::channel_section(cb, 1);
  const TensorSpace outb = TensorSpace::single(FactorLabel{9}, q2);

  // a simple generalized channel with ω = I/2 realizes through Ψ/2 and the
  // identity channel
  const CpMapChoi chi = make_simple(LabeledOperator(cb, Mat::Identity(4, 4)), chan);
  const ChannelRealization simple = realize_on_channels(chi);
  REQUIRE(simple.ancilla_dim == 2);
  REQUIRE((simple.omega.matrix() - Mat::Identity(2, 2) / 2.0).norm() < 1e-9);
  const Mat psi_half = max_entangled(FactorLabel{0}, FactorLabel{1}, q2).matrix() / 2.0;
  REQUIRE((simple.rho.matrix() - psi_half).norm() < 1e-9);

  // random generalized channels: the realization reproduces the action
  for (int t = 0; t < 6; ++t) {
    const CpMapChoi X =
        random_generalized_channel(chan, outb, Seed{static_cast<uint64_t>(7100 + t)});
    const ChannelRealization real = realize_on_channels(X);
    for (int e = 0; e < 6; ++e) {
      const CpMapChoi ch = random_channel(q2, q2, 2, Seed{static_cast<uint64_t>(40 * t + e)});
      const LabeledOperator xe(cb, ch.choi().matrix());
      const Mat lhs = apply_map(X, xe).matrix() / 2.0;  // Ξ(X_E) = Φ(X_E)/t
      const CpMapChoi e_ext = extend_channel(ch, real.rho);
      const LabeledOperator moved = apply_map(e_ext, real.rho);
      const Mat rhs = apply_map(real.lambda, moved).matrix();
      REQUIRE((lhs - rhs).norm() < 1e-8);
    }
  }

  // constant maps realize with a constant channel
  Mat sigma = Mat::Zero(2, 2);
  sigma(0, 0) = 0.3;
  sigma(1, 1) = 0.7;
  const Mat xc = detail::kron(sigma, Mat::Identity(4, 4));
  const CpMapChoi constant(outb, cb, xc);
  REQUIRE(is_generalized_channel(constant, chan));
  const ChannelRealization creal = realize_on_channels(constant);
  const CpMapChoi ch = random_channel(q2, q2, 2, Seed{321});
  const Mat out =
      apply_map(creal.lambda, apply_map(extend_channel(ch, creal.rho), creal.rho)).matrix();
  REQUIRE((out - sigma).norm() < 1e-8);
}

TEST_CASE("from realization and the round trip", "[decompose]") {
  const TensorSpace cb({Factor{FactorLabel{1}, q2}, Factor{FactorLabel{0}, q2}});
  const SectionSpec chan = SectionSpec::channel_section(cb, 1);
  const TensorSpace outb = TensorSpace::single(FactorLabel{9}, q2);

  // ρ = Ψ/2 with the identity channel gives the simple channel of ω = I/2
  const TensorSpace rho_sp({Factor{FactorLabel{500}, q2}, Factor{FactorLabel{501}, q2}});
  const Mat psi_half = max_entangled_matrix(TensorSpace::single(FactorLabel{0}, q2)) / 2.0;
  const LabeledOperator rho(rho_sp, psi_half);
  const CpMapChoi lam_id =
      identity_map(TensorSpace({Factor{FactorLabel{20}, q2}, Factor{FactorLabel{21}, q2}}),
                   TensorSpace({Factor{FactorLabel{22}, q2}, Factor{FactorLabel{23}, q2}}));
  const CpMapChoi rebuilt = from_realization(rho, lam_id, cb);
  REQUIRE(is_generalized_channel(rebuilt, chan));
  const CpMapChoi chi = make_simple(LabeledOperator(cb, Mat::Identity(4, 4)), chan);
  REQUIRE(are_equivalent(rebuilt, CpMapChoi(rebuilt.out_space(), cb, chi.choi().matrix()), chan));

  // ω = Tr_{H_A} ρ^T, read off the simple part at the section scale
  const LabeledOperator red = partial_trace(rebuilt.choi(), rebuilt.out_labels());
  const LabeledOperator cop(cb, red.matrix().transpose());
  const Mat v = partial_trace(cop, {FactorLabel{1}}).matrix() / 2.0;
  const Mat omega = v / 2.0;
  const Mat rho_t = rho.matrix().transpose();
  Mat tr_a = Mat::Zero(2, 2);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j)
      for (Index a = 0; a < 2; ++a) tr_a(i, j) += rho_t(i * 2 + a, j * 2 + a);
  REQUIRE((omega - tr_a).norm() < 1e-9);

  // round trip: realize, rebuild, compare as generalized channels
  for (int t = 0; t < 6; ++t) {
    const CpMapChoi X =
        random_generalized_channel(chan, outb, Seed{static_cast<uint64_t>(7500 + t)});
    const ChannelRealization real = realize_on_channels(X);
    const CpMapChoi back = from_realization(real.rho, real.lambda, cb);
    const CpMapChoi back_named(X.out_space(), cb, back.choi().matrix());
    REQUIRE(are_equivalent(X, back_named, chan));
  }

  // a product-state ρ makes the supermap depend on E only through E(ρ_{H0})
  std::mt19937_64 rng(263);
  Mat r0 = tu::random_psd(q2, rng);
  r0 /= r0.trace().real();
  Mat rA = tu::random_psd(q2, rng);
  rA /= rA.trace().real();
  const LabeledOperator rho_prod(rho_sp, detail::kron(r0, rA));
  const CpMapChoi lam = random_channel(
      TensorSpace::single(FactorLabel{9}, q2),
      TensorSpace({Factor{FactorLabel{20}, q2}, Factor{FactorLabel{21}, q2}}), 2, Seed{88});
  const CpMapChoi built = from_realization(rho_prod, lam, cb);
  const CpMapChoi e1 = random_channel(q2, q2, 2, Seed{91});
  const Mat e1r0 =
      apply_map(e1, LabeledOperator(TensorSpace::single(FactorLabel{0}, q2), r0)).matrix();
  // constant channel with the same value at r0
  const CpMapChoi e2(TensorSpace::single(FactorLabel{1}, q2),
                     TensorSpace::single(FactorLabel{0}, q2),
                     detail::kron(e1r0, Mat::Identity(2, 2)));
  REQUIRE(is_channel(e2));
  const LabeledOperator x1(cb, e1.choi().matrix());
  const LabeledOperator x2(cb, e2.choi().matrix());
  const Mat o1 = apply_map(built, x1).matrix();
  const Mat o2 = apply_map(built, x2).matrix();
  REQUIRE((o1 - o2).norm() < 1e-8);
}

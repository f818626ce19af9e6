// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#ifndef QCOMB_TENSOR_HPP
#define QCOMB_TENSOR_HPP

#include "qcomb/algebra.hpp"

#include <optional>
#include <set>
#include <utility>

namespace qcomb {

//=========================================================================
// Labeled tensor products of algebras
//=========================================================================

struct FactorLabel {
  int id = 0;
  friend bool operator==(FactorLabel a, FactorLabel b) { return a.id == b.id; }
  friend bool operator!=(FactorLabel a, FactorLabel b) { return a.id != b.id; }
  friend bool operator<(FactorLabel a, FactorLabel b) { return a.id < b.id; }
};

using LabelSet = std::set<FactorLabel>;

struct Factor {
  FactorLabel label;
  AlgebraShape shape;
};

// An ordered list of labeled algebra factors. Operators on the product are
// supported on ⊕_I B(H_I) where I runs over per-factor block multi-indices
// (the minimal central projections q(I)).
class TensorSpace {
 public:
  TensorSpace() = default;
  explicit TensorSpace(std::vector<Factor> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw std::invalid_argument("TensorSpace: no factors");
    for (size_t i = 0; i < factors_.size(); ++i)
      for (size_t j = i + 1; j < factors_.size(); ++j)
        if (factors_[i].label == factors_[j].label)
          throw std::invalid_argument("TensorSpace: duplicate factor label");
    build_tables();
  }
  static TensorSpace single(FactorLabel l, AlgebraShape s) {
    return TensorSpace({Factor{l, std::move(s)}});
  }

  const std::vector<Factor>& factors() const { return factors_; }
  Index num_factors() const { return static_cast<Index>(factors_.size()); }
  Index dim() const { return dim_; }
  const Factor& factor(Index i) const { return factors_[static_cast<size_t>(i)]; }

  std::optional<Index> position_of(FactorLabel l) const {
    for (size_t i = 0; i < factors_.size(); ++i)
      if (factors_[i].label == l) return static_cast<Index>(i);
    return std::nullopt;
  }
  LabelSet labels() const {
    LabelSet s;
    for (const auto& f : factors_) s.insert(f.label);
    return s;
  }

  // multi-index block id of a global Hilbert index (row-major over factors,
  // first factor most significant)
  Index multiblock_of(Index g) const { return multiblock_of_[static_cast<size_t>(g)]; }
  Index num_multiblocks() const { return num_multiblocks_; }
  bool cell_allowed(Index r, Index c) const { return multiblock_of(r) == multiblock_of(c); }

  // enumeration of supported cells (r,c), row-major
  Index num_cells() const { return static_cast<Index>(cells_.size()); }
  std::pair<Index, Index> cell(Index k) const { return cells_[static_cast<size_t>(k)]; }
  Index cell_index(Index r, Index c) const { return cell_index_[static_cast<size_t>(r * dim_ + c)]; }

  // same factor shapes in the same order (labels may differ)
  bool shape_compatible(const TensorSpace& o) const {
    if (factors_.size() != o.factors_.size()) return false;
    for (size_t i = 0; i < factors_.size(); ++i)
      if (!(factors_[i].shape == o.factors_[i].shape)) return false;
    return true;
  }
  bool same_factors(const TensorSpace& o) const {
    if (!shape_compatible(o)) return false;
    for (size_t i = 0; i < factors_.size(); ++i)
      if (factors_[i].label != o.factors_[i].label) return false;
    return true;
  }

  TensorSpace relabeled(const std::vector<FactorLabel>& labels) const {
    if (labels.size() != factors_.size())
      throw std::invalid_argument("relabeled: label count mismatch");
    std::vector<Factor> fs = factors_;
    for (size_t i = 0; i < fs.size(); ++i) fs[i].label = labels[i];
    return TensorSpace(std::move(fs));
  }

  // decompose a global index into per-factor digits
  std::vector<Index> digits(Index g) const {
    std::vector<Index> d(factors_.size());
    for (size_t i = factors_.size(); i-- > 0;) {
      const Index fd = factors_[i].shape.total_dim();
      d[i] = g % fd;
      g /= fd;
    }
    return d;
  }
  Index from_digits(const std::vector<Index>& d) const {
    Index g = 0;
    for (size_t i = 0; i < factors_.size(); ++i)
      g = g * factors_[i].shape.total_dim() + d[i];
    return g;
  }

 private:
  void build_tables() {
    dim_ = 1;
    for (const auto& f : factors_) dim_ *= f.shape.total_dim();
    multiblock_of_.assign(static_cast<size_t>(dim_), 0);
    for (Index g = 0; g < dim_; ++g) {
      const auto dg = digits(g);
      Index mb = 0;
      for (size_t i = 0; i < factors_.size(); ++i)
        mb = mb * factors_[i].shape.num_blocks() +
             factors_[i].shape.block_of_index(dg[i]);
      multiblock_of_[static_cast<size_t>(g)] = mb;
    }
    num_multiblocks_ = 1;
    for (const auto& f : factors_) num_multiblocks_ *= f.shape.num_blocks();
    cell_index_.assign(static_cast<size_t>(dim_ * dim_), -1);
    cells_.clear();
    for (Index r = 0; r < dim_; ++r)
      for (Index c = 0; c < dim_; ++c)
        if (cell_allowed(r, c)) {
          cell_index_[static_cast<size_t>(r * dim_ + c)] = static_cast<Index>(cells_.size());
          cells_.emplace_back(r, c);
        }
  }

  std::vector<Factor> factors_;
  Index dim_ = 0;
  Index num_multiblocks_ = 0;
  std::vector<Index> multiblock_of_;
  std::vector<std::pair<Index, Index>> cells_;
  std::vector<Index> cell_index_;
};

// Operator on a labeled tensor product, supported on the central blocks.
class LabeledOperator {
 public:
  LabeledOperator() = default;
  LabeledOperator(TensorSpace space, Mat matrix, double tol = kDefaultTol)
      : space_(std::move(space)), mat_(std::move(matrix)) {
    if (mat_.rows() != space_.dim() || mat_.cols() != space_.dim())
      throw std::invalid_argument("LabeledOperator: matrix/space dimension mismatch");
    if (!mat_.allFinite())
      throw std::invalid_argument("LabeledOperator: non-finite entries");
    const double cut = tol * std::max(1.0, mat_.norm());
    for (Index r = 0; r < mat_.rows(); ++r)
      for (Index c = 0; c < mat_.cols(); ++c) {
        if (space_.cell_allowed(r, c)) continue;
        if (std::abs(mat_(r, c)) > cut)
          throw error("LabeledOperator: support leaks outside the central blocks");
        mat_(r, c) = cx(0, 0);
      }
  }
  static LabeledOperator lift(FactorLabel l, const AlgOperator& a) {
    return LabeledOperator(TensorSpace::single(l, a.shape()), a.matrix());
  }
  static LabeledOperator identity(const TensorSpace& s) {
    return LabeledOperator(s, Mat::Identity(s.dim(), s.dim()));
  }

  const TensorSpace& space() const { return space_; }
  const Mat& matrix() const { return mat_; }
  Index dim() const { return mat_.rows(); }
  cx trace() const { return mat_.trace(); }

  AlgOperator as_alg() const {
    if (space_.num_factors() != 1)
      throw std::invalid_argument("as_alg: more than one factor");
    return AlgOperator(space_.factor(0).shape, mat_);
  }
  LabeledOperator relabeled(const std::vector<FactorLabel>& labels) const {
    return LabeledOperator(space_.relabeled(labels), mat_);
  }

 private:
  TensorSpace space_;
  Mat mat_;
};

namespace detail {

inline std::vector<Index> positions_of_labels(const TensorSpace& s, const LabelSet& over,
                                              const char* who) {
  std::vector<Index> pos;
  for (FactorLabel l : over) {
    auto p = s.position_of(l);
    if (!p) throw std::invalid_argument(std::string(who) + ": unknown label");
    pos.push_back(*p);
  }
  std::sort(pos.begin(), pos.end());
  return pos;
}

// Row-major index over the sub-tuple of factors at `pos`, embedded back into
// a full index with the remaining digits given by `other`.
struct SplitIndexer {
  std::vector<Index> pos;        // selected factor positions (sorted)
  std::vector<Index> rest;       // remaining positions (sorted)
  std::vector<Index> fdims;      // all factor dims
  Index sel_dim = 1, rest_dim = 1;

  SplitIndexer(const TensorSpace& s, const std::vector<Index>& selected) {
    pos = selected;
    const Index nf = s.num_factors();
    std::vector<bool> in_sel(static_cast<size_t>(nf), false);
    for (Index p : pos) in_sel[static_cast<size_t>(p)] = true;
    for (Index i = 0; i < nf; ++i) {
      fdims.push_back(s.factor(i).shape.total_dim());
      if (!in_sel[static_cast<size_t>(i)]) rest.push_back(i);
    }
    for (Index p : pos) sel_dim *= fdims[static_cast<size_t>(p)];
    for (Index p : rest) rest_dim *= fdims[static_cast<size_t>(p)];
  }

  Index global(Index rest_idx, Index sel_idx) const {
    std::vector<Index> dg(fdims.size(), 0);
    for (size_t i = pos.size(); i-- > 0;) {
      const Index fd = fdims[static_cast<size_t>(pos[i])];
      dg[static_cast<size_t>(pos[i])] = sel_idx % fd;
      sel_idx /= fd;
    }
    for (size_t i = rest.size(); i-- > 0;) {
      const Index fd = fdims[static_cast<size_t>(rest[i])];
      dg[static_cast<size_t>(rest[i])] = rest_idx % fd;
      rest_idx /= fd;
    }
    Index g = 0;
    for (size_t i = 0; i < fdims.size(); ++i) g = g * fdims[i] + dg[i];
    return g;
  }
};

}  // namespace detail

inline LabeledOperator tensor(const LabeledOperator& x, const LabeledOperator& y) {
  for (const auto& f : y.space().factors())
    if (x.space().position_of(f.label))
      throw std::invalid_argument("tensor: overlapping labels");
  std::vector<Factor> fs = x.space().factors();
  fs.insert(fs.end(), y.space().factors().begin(), y.space().factors().end());
  const Index dx = x.dim(), dy = y.dim();
  Mat m(dx * dy, dx * dy);
  for (Index r = 0; r < dx; ++r)
    for (Index c = 0; c < dx; ++c)
      m.block(r * dy, c * dy, dy, dy) = x.matrix()(r, c) * y.matrix();
  return LabeledOperator(TensorSpace(std::move(fs)), std::move(m));
}

inline LabeledOperator partial_trace(const LabeledOperator& x, const LabelSet& over) {
  if (over.empty()) return x;
  const auto pos = detail::positions_of_labels(x.space(), over, "partial_trace");
  detail::SplitIndexer ix(x.space(), pos);
  std::vector<Factor> kept;
  for (Index p : ix.rest) kept.push_back(x.space().factor(p));
  if (kept.empty()) {
    // trace over everything: scalar result kept as a 1×1 operator on a
    // trivial factor so downstream code stays uniform
    Mat m(1, 1);
    m(0, 0) = x.trace();
    return LabeledOperator(TensorSpace::single(FactorLabel{-1}, AlgebraShape::matrix(1)),
                           std::move(m));
  }
  Mat m = Mat::Zero(ix.rest_dim, ix.rest_dim);
  for (Index r = 0; r < ix.rest_dim; ++r)
    for (Index c = 0; c < ix.rest_dim; ++c) {
      cx acc(0, 0);
      for (Index s = 0; s < ix.sel_dim; ++s)
        acc += x.matrix()(ix.global(r, s), ix.global(c, s));
      m(r, c) = acc;
    }
  return LabeledOperator(TensorSpace(std::move(kept)), std::move(m));
}

inline LabeledOperator partial_transpose(const LabeledOperator& x, const LabelSet& over) {
  if (over.empty()) return x;
  const auto pos = detail::positions_of_labels(x.space(), over, "partial_transpose");
  detail::SplitIndexer ix(x.space(), pos);
  Mat m(x.dim(), x.dim());
  for (Index r = 0; r < ix.rest_dim; ++r)
    for (Index c = 0; c < ix.rest_dim; ++c)
      for (Index sr = 0; sr < ix.sel_dim; ++sr)
        for (Index sc = 0; sc < ix.sel_dim; ++sc)
          m(ix.global(r, sr), ix.global(c, sc)) = x.matrix()(ix.global(r, sc), ix.global(c, sr));
  return LabeledOperator(x.space(), std::move(m));
}

// Permute the factor list to `order` (a permutation of 0..n-1 giving, for
// each output slot, the input factor position).
inline LabeledOperator permute_factors(const LabeledOperator& x, const std::vector<Index>& order) {
  const Index nf = x.space().num_factors();
  if (static_cast<Index>(order.size()) != nf)
    throw std::invalid_argument("permute_factors: bad permutation");
  std::vector<Factor> fs;
  for (Index i : order) fs.push_back(x.space().factor(i));
  TensorSpace out_space(fs);
  const Index d = x.dim();
  Mat m(d, d);
  for (Index r = 0; r < d; ++r) {
    const auto rd = out_space.digits(r);
    std::vector<Index> rin(static_cast<size_t>(nf));
    for (Index i = 0; i < nf; ++i) rin[static_cast<size_t>(order[static_cast<size_t>(i)])] = rd[static_cast<size_t>(i)];
    const Index rg = x.space().from_digits(rin);
    for (Index c = 0; c < d; ++c) {
      const auto cd = out_space.digits(c);
      std::vector<Index> cin(static_cast<size_t>(nf));
      for (Index i = 0; i < nf; ++i) cin[static_cast<size_t>(order[static_cast<size_t>(i)])] = cd[static_cast<size_t>(i)];
      m(r, c) = x.matrix()(rg, x.space().from_digits(cin));
    }
  }
  return LabeledOperator(std::move(out_space), std::move(m));
}

// The link product X*Y = Tr_{M∩N}[(I_{M\N} ⊗ Y^{T_{M∩N}})(X ⊗ I_{N\M})],
// contracted by index reshaping rather than by materializing the embeddings.
// Result factors: surviving factors of X in their original order, then
// surviving factors of Y.
inline LabeledOperator link_product(const LabeledOperator& x, const LabeledOperator& y,
                                    double tol = kDefaultTol) {
  // shared labels in X's factor order
  std::vector<Index> xs, ys, xa, yb;
  for (Index i = 0; i < x.space().num_factors(); ++i) {
    const auto& f = x.space().factor(i);
    auto p = y.space().position_of(f.label);
    if (p) {
      if (!(y.space().factor(*p).shape == f.shape))
        throw std::invalid_argument("link_product: shape mismatch on shared label");
      xs.push_back(i);
      ys.push_back(*p);
    } else {
      xa.push_back(i);
    }
  }
  for (Index i = 0; i < y.space().num_factors(); ++i)
    if (!x.space().position_of(y.space().factor(i).label)) yb.push_back(i);

  if (xs.empty()) return tensor(x, y);

  // SplitIndexer keeps the given position order, so passing ys in the order
  // matched to xs makes the two sel-index enumerations agree digit by digit.
  detail::SplitIndexer ixx(x.space(), xs);  // rest = A part
  detail::SplitIndexer ixy(y.space(), ys);  // rest = B part
  const Index da = ixx.rest_dim, ds = ixx.sel_dim, db = ixy.rest_dim;

  // Z[(a,b),(a',b')] = Σ_{u,v} X[(a,u),(a',v)] · Y[(u,b),(v,b')]
  Mat xr(da * da, ds * ds), yr(ds * ds, db * db);
  for (Index a = 0; a < da; ++a)
    for (Index ap = 0; ap < da; ++ap)
      for (Index u = 0; u < ds; ++u)
        for (Index v = 0; v < ds; ++v)
          xr(a * da + ap, u * ds + v) = x.matrix()(ixx.global(a, u), ixx.global(ap, v));
  for (Index u = 0; u < ds; ++u)
    for (Index v = 0; v < ds; ++v)
      for (Index b = 0; b < db; ++b)
        for (Index bp = 0; bp < db; ++bp)
          yr(u * ds + v, b * db + bp) = y.matrix()(ixy.global(b, u), ixy.global(bp, v));
  Mat zr = xr * yr;

  std::vector<Factor> fs;
  for (Index p : xa) fs.push_back(x.space().factor(p));
  for (Index p : yb) fs.push_back(y.space().factor(p));
  if (fs.empty()) {
    Mat m(1, 1);
    m(0, 0) = zr(0, 0);
    return LabeledOperator(TensorSpace::single(FactorLabel{-1}, AlgebraShape::matrix(1)),
                           std::move(m));
  }
  Mat m(da * db, da * db);
  for (Index a = 0; a < da; ++a)
    for (Index ap = 0; ap < da; ++ap)
      for (Index b = 0; b < db; ++b)
        for (Index bp = 0; bp < db; ++bp)
          m(a * db + b, ap * db + bp) = zr(a * da + ap, b * db + bp);
  return LabeledOperator(TensorSpace(std::move(fs)), std::move(m), tol);
}

// Coefficients of an operator against the supported matrix units (an
// orthonormal family), in the cell enumeration order of the space.
inline Vec vectorize(const TensorSpace& s, const Mat& m) {
  Vec v(s.num_cells());
  for (Index k = 0; k < s.num_cells(); ++k) {
    const auto [r, c] = s.cell(k);
    v(k) = m(r, c);
  }
  return v;
}

inline Mat devectorize(const TensorSpace& s, const Vec& v) {
  Mat m = Mat::Zero(s.dim(), s.dim());
  for (Index k = 0; k < s.num_cells(); ++k) {
    const auto [r, c] = s.cell(k);
    m(r, c) = v(k);
  }
  return m;
}

// Unnormalized maximally entangled operator Ψ of an algebra between two
// labeled copies: Σ_blocks Σ_{i,j∈block} |i⟩⟨j| ⊗ |i⟩⟨j|.
inline LabeledOperator max_entangled(FactorLabel first, FactorLabel second,
                                     const AlgebraShape& shape) {
  const Index d = shape.total_dim();
  Mat m = Mat::Zero(d * d, d * d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      if (shape.block_of_index(i) == shape.block_of_index(j))
        m(i * d + i, j * d + j) = cx(1, 0);
  return LabeledOperator(
      TensorSpace({Factor{first, shape}, Factor{second, shape}}), std::move(m));
}

}  // namespace qcomb

#endif

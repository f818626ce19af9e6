// This code is part of qcomb.
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// this license at http://www.apache.org/licenses/LICENSE-2.0.

#ifndef QCOMB_ALGEBRA_HPP
#define QCOMB_ALGEBRA_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcomb {

using cx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kDefaultTol = 1e-9;

// Thrown when a numeric contract is violated (non-positive input, leakage
// outside the block support, failed reconstruction, ...).
class error : public std::runtime_error {
 public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

//=========================================================================
// Finite-dimensional C*-algebras  A = ⊕_j B(H_j)
//=========================================================================

// Ordered list of matrix-block dimensions. Elements of the algebra are
// block-diagonal matrices on the enveloping space H = ⊕_j H_j.
class AlgebraShape {
 public:
  AlgebraShape() = default;
  explicit AlgebraShape(std::vector<Index> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw std::invalid_argument("AlgebraShape: no blocks");
    for (Index b : blocks_)
      if (b < 1) throw std::invalid_argument("AlgebraShape: block dim < 1");
  }
  static AlgebraShape matrix(Index d) { return AlgebraShape({d}); }
  static AlgebraShape classical(Index m) {
    return AlgebraShape(std::vector<Index>(static_cast<size_t>(m), 1));
  }

  const std::vector<Index>& blocks() const { return blocks_; }
  Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
  Index total_dim() const {
    return std::accumulate(blocks_.begin(), blocks_.end(), Index(0));
  }
  // t_A = Tr(I_A); for block-diagonal algebras this equals the total dim.
  Index unit_trace() const { return total_dim(); }
  Index block_offset(Index j) const {
    Index off = 0;
    for (Index i = 0; i < j; ++i) off += blocks_[static_cast<size_t>(i)];
    return off;
  }
  Index block_of_index(Index g) const {
    Index off = 0;
    for (size_t j = 0; j < blocks_.size(); ++j) {
      off += blocks_[j];
      if (g < off) return static_cast<Index>(j);
    }
    throw std::invalid_argument("AlgebraShape: index out of range");
  }
  // complex dimension of the algebra as a vector space, Σ_j d_j^2
  Index space_dim() const {
    Index s = 0;
    for (Index b : blocks_) s += b * b;
    return s;
  }
  bool is_matrix_algebra() const { return blocks_.size() == 1; }
  bool is_classical() const {
    return std::all_of(blocks_.begin(), blocks_.end(), [](Index b) { return b == 1; });
  }

  friend bool operator==(const AlgebraShape& a, const AlgebraShape& b) {
    return a.blocks_ == b.blocks_;
  }
  friend bool operator!=(const AlgebraShape& a, const AlgebraShape& b) {
    return !(a == b);
  }

 private:
  std::vector<Index> blocks_;
};

namespace detail {

inline bool is_block_supported(const AlgebraShape& shape, const Mat& m, double tol) {
  const Index d = shape.total_dim();
  if (m.rows() != d || m.cols() != d) return false;
  const double cut = tol * std::max(1.0, m.norm());
  for (Index r = 0; r < d; ++r)
    for (Index c = 0; c < d; ++c)
      if (shape.block_of_index(r) != shape.block_of_index(c) &&
          std::abs(m(r, c)) > cut)
        return false;
  return true;
}

inline void zero_off_blocks(const AlgebraShape& shape, Mat& m) {
  const Index d = shape.total_dim();
  for (Index r = 0; r < d; ++r)
    for (Index c = 0; c < d; ++c)
      if (shape.block_of_index(r) != shape.block_of_index(c)) m(r, c) = cx(0, 0);
}

}  // namespace detail

// An element of a finite-dimensional C*-algebra, stored as the full d×d
// matrix over the enveloping space with the block pattern enforced.
class AlgOperator {
 public:
  AlgOperator() = default;
  AlgOperator(AlgebraShape shape, Mat matrix, double tol = kDefaultTol)
      : shape_(std::move(shape)), mat_(std::move(matrix)) {
    if (mat_.rows() != shape_.total_dim() || mat_.cols() != shape_.total_dim())
      throw std::invalid_argument("AlgOperator: matrix/shape dimension mismatch");
    if (!mat_.allFinite()) throw std::invalid_argument("AlgOperator: non-finite entries");
    if (!detail::is_block_supported(shape_, mat_, tol))
      throw error("AlgOperator: support leaks outside the block pattern");
    detail::zero_off_blocks(shape_, mat_);
  }

  const AlgebraShape& shape() const { return shape_; }
  const Mat& matrix() const { return mat_; }
  Index dim() const { return mat_.rows(); }
  cx trace() const { return mat_.trace(); }

 private:
  AlgebraShape shape_;
  Mat mat_;
};

inline AlgOperator identity(const AlgebraShape& shape) {
  return AlgOperator(shape, Mat::Identity(shape.total_dim(), shape.total_dim()));
}

// τ_A = t_A^{-1} I_A
inline AlgOperator tracial_state(const AlgebraShape& shape) {
  const Index d = shape.total_dim();
  return AlgOperator(shape, Mat::Identity(d, d) / static_cast<double>(shape.unit_trace()));
}

// ⟨a,b⟩ = Tr(a* b)
inline cx hs_inner(const AlgOperator& a, const AlgOperator& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("hs_inner: shape mismatch");
  return (a.matrix().adjoint() * b.matrix()).trace();
}

inline AlgOperator transpose(const AlgOperator& a) {
  return AlgOperator(a.shape(), a.matrix().transpose());
}

namespace detail {

inline double herm_violation(const Mat& m) { return (m - m.adjoint()).norm(); }

// aliasing-safe (a + a*)/2
inline Mat hermitize(const Mat& m) { return (m + m.adjoint()) / 2.0; }

// Symmetrizes to (x + x*)/2 when the defect is within tol·‖x‖, rejects
// otherwise. Every spectral routine below goes through this gate.
inline Mat require_hermitian(const Mat& m, double tol, const char* who) {
  const double viol = herm_violation(m);
  if (viol > tol * std::max(1.0, m.norm()))
    throw error(std::string(who) + ": input is not Hermitian (defect " +
                std::to_string(viol) + ")");
  return (m + m.adjoint()) / 2.0;
}

struct HermEig {
  RVec values;   // descending
  Mat vectors;   // columns, phase-fixed
};

// Eigenvalues sorted descending; each eigenvector's phase is fixed by making
// its first component of largest modulus real and positive.
inline HermEig eig_hermitian(const Mat& m, double tol, const char* who = "eig") {
  const Mat h = require_hermitian(m, tol, who);
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  if (es.info() != Eigen::Success) throw error(std::string(who) + ": eigensolver failed");
  const Index d = h.rows();
  HermEig out;
  out.values.resize(d);
  out.vectors.resize(d, d);
  for (Index k = 0; k < d; ++k) {
    out.values(k) = es.eigenvalues()(d - 1 - k);
    Vec v = es.eigenvectors().col(d - 1 - k);
    Index imax = 0;
    double best = -1.0;
    for (Index i = 0; i < d; ++i) {
      const double a = std::abs(v(i));
      if (a > best) { best = a; imax = i; }
    }
    if (best > 0.0) v *= std::conj(v(imax)) / std::abs(v(imax));
    out.vectors.col(k) = v;
  }
  return out;
}

inline double op_norm(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

inline bool is_psd(const Mat& m, double tol, bool* hermitian_ok = nullptr) {
  const double viol = herm_violation(m);
  if (viol > tol * std::max(1.0, m.norm())) {
    if (hermitian_ok) { *hermitian_ok = false; return false; }
    throw error("is_positive: input is not Hermitian");
  }
  if (hermitian_ok) *hermitian_ok = true;
  const Mat h = (m + m.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().size() ? es.eigenvalues().minCoeff() : 0.0;
  const double hi = es.eigenvalues().size() ? es.eigenvalues().maxCoeff() : 0.0;
  return lo >= -tol * std::max(1.0, std::max(std::abs(hi), std::abs(lo)));
}

// Matrix function of a Hermitian PSD input through its eigensystem.
// Negative dust below the cutoff is clamped to zero.
template <class F>
Mat psd_function(const Mat& m, double tol, F&& f, const char* who) {
  HermEig eig = eig_hermitian(m, tol, who);
  const double cut = tol * std::max(1.0, std::abs(eig.values.size() ? eig.values(0) : 0.0));
  if (eig.values.size() && eig.values(eig.values.size() - 1) < -cut)
    throw error(std::string(who) + ": input is not positive");
  Mat out = Mat::Zero(m.rows(), m.cols());
  for (Index k = 0; k < eig.values.size(); ++k) {
    const double lam = std::max(0.0, eig.values(k));
    out += f(lam) * eig.vectors.col(k) * eig.vectors.col(k).adjoint();
  }
  return out;
}

inline Mat psd_sqrt(const Mat& m, double tol) {
  return psd_function(m, tol, [](double l) { return std::sqrt(l); }, "sqrt");
}

// pseudo-inverse square root on the support
inline Mat psd_pinv_sqrt(const Mat& m, double tol) {
  HermEig eig = eig_hermitian(m, tol, "pinv_sqrt");
  const double cut = tol * std::max(1.0, std::abs(eig.values.size() ? eig.values(0) : 0.0));
  Mat out = Mat::Zero(m.rows(), m.cols());
  for (Index k = 0; k < eig.values.size(); ++k)
    if (eig.values(k) > cut)
      out += (1.0 / std::sqrt(eig.values(k))) * eig.vectors.col(k) * eig.vectors.col(k).adjoint();
  return out;
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index r = 0; r < a.rows(); ++r)
    for (Index c = 0; c < a.cols(); ++c)
      out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
  return out;
}

inline Index numerical_rank(const RVec& singular, double tol) {
  if (!singular.size()) return 0;
  const double cut = tol * std::max(1.0, singular(0));
  Index r = 0;
  while (r < singular.size() && singular(r) > cut) ++r;
  return r;
}

}  // namespace detail

// Membership test for the positive cone A⁺. Non-Hermitian input is flagged
// distinctly (exception) rather than reported as "not positive".
inline bool is_positive(const AlgOperator& a, double tol = kDefaultTol) {
  return detail::is_psd(a.matrix(), tol);
}

// Projection onto supp(a) for positive a; rank = #eigenvalues above tol·‖a‖.
inline AlgOperator support_projection(const AlgOperator& a, double tol = kDefaultTol) {
  detail::HermEig eig = detail::eig_hermitian(a.matrix(), tol, "support_projection");
  const double top = eig.values.size() ? eig.values(0) : 0.0;
  const double cut = tol * std::max(1.0, std::abs(top));
  if (eig.values.size() && eig.values(eig.values.size() - 1) < -cut)
    throw error("support_projection: input is not positive");
  Mat p = Mat::Zero(a.dim(), a.dim());
  for (Index k = 0; k < eig.values.size(); ++k)
    if (eig.values(k) > cut) p += eig.vectors.col(k) * eig.vectors.col(k).adjoint();
  return AlgOperator(a.shape(), p);
}

// χ_c : a ↦ c^{1/2} a c^{1/2}
inline AlgOperator conjugate_by_sqrt(const AlgOperator& c, const AlgOperator& a,
                                     double tol = kDefaultTol) {
  if (c.shape() != a.shape())
    throw std::invalid_argument("conjugate_by_sqrt: shape mismatch");
  const Mat s = detail::psd_sqrt(c.matrix(), tol);
  return AlgOperator(c.shape(), s * a.matrix() * s);
}

}  // namespace qcomb

#endif

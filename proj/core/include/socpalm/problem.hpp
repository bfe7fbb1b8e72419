#pragma once

#include <socpalm/cone.hpp>
#include <socpalm/linsys.hpp>
#include <socpalm/types.hpp>

namespace socpalm {

/// Data of the primal-dual pair
///   (P) min 1/2 <x1, H x1> - <b, x2>   s.t. -H x1 + A^T x2 + x3 = c, x3 in K
///   (D) max -1/2 <y, H y> - <c, y>      s.t. A y = b, y in K
/// H is trusted to be PSD; only its symmetry is enforced.
class ProblemData {
 public:
  ProblemData() = default;
  ProblemData(SparseSymmetric h, SpMat a, Vec b, Vec c, ConeSpec cone);
  /// Linear case, H = 0.
  ProblemData(SpMat a, Vec b, Vec c, ConeSpec cone);

  const SparseSymmetric& H() const noexcept { return h_; }
  const SpMat& A() const noexcept { return a_; }
  const Vec& b() const noexcept { return b_; }
  const Vec& c() const noexcept { return c_; }
  const ConeSpec& cone() const noexcept { return cone_; }

  Index m() const noexcept { return a_.rows(); }
  Index n() const noexcept { return a_.cols(); }
  bool linear() const noexcept { return h_.is_zero(); }

  double h_frobenius() const noexcept { return h_fro_; }
  double b_norm() const noexcept { return b_norm_; }
  double c_norm() const noexcept { return c_norm_; }

  bool operator==(const ProblemData& other) const;

 private:
  SparseSymmetric h_;
  SpMat a_;
  Vec b_;
  Vec c_;
  ConeSpec cone_;
  double h_fro_ = 0.0;
  double b_norm_ = 0.0;
  double c_norm_ = 0.0;
};

}  // namespace socpalm

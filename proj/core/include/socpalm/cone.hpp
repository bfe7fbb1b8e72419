#pragma once

#include <socpalm/types.hpp>

#include <vector>

namespace socpalm {

enum class BlockKind { NonNeg, SecondOrder };

struct ConeBlock {
  BlockKind kind;
  Index dim;
  Index offset;  // first coordinate of the block inside the stacked vector
};

/// Cartesian product of at most one nonnegative orthant and any number of
/// second-order (Lorentz) cones { (x0, xt) : x0 >= ||xt|| }, in a fixed order.
class ConeSpec {
 public:
  ConeSpec() = default;

  ConeSpec& add_nonneg(Index dim);
  ConeSpec& add_second_order(Index dim);
  /// Appends `count` second-order blocks of dimension `dim`.
  ConeSpec& add_second_order(Index dim, Index count);

  const std::vector<ConeBlock>& blocks() const noexcept { return blocks_; }
  Index total_dim() const noexcept { return total_dim_; }
  Index num_second_order() const noexcept { return num_soc_; }
  bool has_nonneg() const noexcept { return nonneg_index_ >= 0; }
  /// Dimension of the nonnegative block, or 0 when there is none.
  Index nonneg_dim() const noexcept;

  bool operator==(const ConeSpec& other) const;

 private:
  std::vector<ConeBlock> blocks_;
  Index total_dim_ = 0;
  Index num_soc_ = 0;
  long nonneg_index_ = -1;
};

/// Euclidean projection onto the cone, block by block.
Vec project(const ConeSpec& cone, const Eigen::Ref<const Vec>& x);

/// Same as `project`, writing into `out` (resized as needed).
void project_into(const ConeSpec& cone, const Eigen::Ref<const Vec>& x, Vec& out);

double dist_to_cone(const ConeSpec& cone, const Eigen::Ref<const Vec>& x);

// ---------------------------------------------------------------------------
// B-subdifferential elements of the projection.
// ---------------------------------------------------------------------------

/// Shape of one second-order block of an element of the B-subdifferential.
///
///   Zero           0
///   Identity       I
///   Middle         1/2 [[1, w^T], [w, (1+rho) I - rho w w^T]],  |rho| < 1
///   BoundaryUpper  Middle with rho = +1  (x0 = ||xt|| != 0, second choice)
///   BoundaryLower  Middle with rho = -1  (x0 = -||xt|| != 0, second choice)
enum class SocShape { Zero, Identity, Middle, BoundaryUpper, BoundaryLower };

struct SocJacobianBlock {
  SocShape shape = SocShape::Zero;
  double rho = 0.0;  // x0 / ||xt|| for Middle, +-1 for the boundary shapes
  Vec omega;         // unit vector xt / ||xt||, empty for Zero/Identity
};

/// Selection rule at the kinks x0 = +-||xt||.
enum class TieRule {
  Outer,     // Identity on the upper kink and at 0, Zero on the lower kink
  Boundary,  // BoundaryUpper / BoundaryLower on the kinks, Identity at 0
};

/// Block-diagonal element V of the B-subdifferential of the projection,
/// kept in closed form so that V v costs O(n).
class JacobianElement {
 public:
  JacobianElement() = default;
  JacobianElement(ConeSpec cone, Vec nonneg_mask, std::vector<SocJacobianBlock> soc);

  const ConeSpec& cone() const noexcept { return cone_; }
  /// 0/1 diagonal of the nonnegative block (empty if there is none).
  const Vec& nonneg_mask() const noexcept { return nonneg_mask_; }
  /// One entry per second-order block, in block order.
  const std::vector<SocJacobianBlock>& soc_blocks() const noexcept { return soc_; }

  Vec apply(const Eigen::Ref<const Vec>& v) const;
  void apply_into(const Eigen::Ref<const Vec>& v, Vec& out) const;

  /// Dense realization, for tests and small problems.
  Mat densify() const;

 private:
  ConeSpec cone_;
  Vec nonneg_mask_;
  std::vector<SocJacobianBlock> soc_;
};

/// Absolute tolerance used to detect x0 = +-||xt|| and x = 0.
inline constexpr double kTieTolerance = 1e-13;

JacobianElement jacobian_element(const ConeSpec& cone, const Eigen::Ref<const Vec>& x,
                                 TieRule rule = TieRule::Outer);

Vec apply_jacobian(const JacobianElement& jac, const Eigen::Ref<const Vec>& v);

}  // namespace socpalm

#include <socpalm/cone.hpp>

#include <cmath>
#include <string>
#include <utility>

namespace socpalm {

ConeSpec& ConeSpec::add_nonneg(Index dim) {
  require(dim >= 0, "cone: nonnegative block dimension must be >= 0");
  require(nonneg_index_ < 0, "cone: at most one nonnegative block is allowed");
  nonneg_index_ = static_cast<long>(blocks_.size());
  blocks_.push_back({BlockKind::NonNeg, dim, total_dim_});
  total_dim_ += dim;
  return *this;
}

ConeSpec& ConeSpec::add_second_order(Index dim) {
  require(dim >= 2, "cone: second-order block dimension must be >= 2 (declare dimension 1 as nonneg), got " +
                        std::to_string(dim));
  blocks_.push_back({BlockKind::SecondOrder, dim, total_dim_});
  total_dim_ += dim;
  ++num_soc_;
  return *this;
}

ConeSpec& ConeSpec::add_second_order(Index dim, Index count) {
  blocks_.reserve(blocks_.size() + static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) add_second_order(dim);
  return *this;
}

Index ConeSpec::nonneg_dim() const noexcept {
  return nonneg_index_ < 0 ? 0 : blocks_[static_cast<std::size_t>(nonneg_index_)].dim;
}

bool ConeSpec::operator==(const ConeSpec& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].kind != other.blocks_[i].kind || blocks_[i].dim != other.blocks_[i].dim) return false;
  }
  return true;
}

namespace {

void check_length(const ConeSpec& cone, Index len, const char* what) {
  if (len != cone.total_dim()) {
    throw InputError(std::string(what) + ": vector length " + std::to_string(len) +
                     " does not match cone dimension " + std::to_string(cone.total_dim()));
  }
}

}  // namespace

void project_into(const ConeSpec& cone, const Eigen::Ref<const Vec>& x, Vec& out) {
  check_length(cone, x.size(), "project");
  out.resize(x.size());
  for (const ConeBlock& blk : cone.blocks()) {
    auto xb = x.segment(blk.offset, blk.dim);
    auto ob = out.segment(blk.offset, blk.dim);
    if (blk.kind == BlockKind::NonNeg) {
      ob = xb.cwiseMax(0.0);
      continue;
    }
    const double x0 = xb[0];
    const double nt = xb.tail(blk.dim - 1).norm();
    if (nt <= x0) {
      ob = xb;
    } else if (nt <= -x0) {
      ob.setZero();
    } else {
      const double half = 0.5 * (x0 + nt);
      ob[0] = half;
      ob.tail(blk.dim - 1) = (half / nt) * xb.tail(blk.dim - 1);
    }
  }
}

Vec project(const ConeSpec& cone, const Eigen::Ref<const Vec>& x) {
  Vec out;
  project_into(cone, x, out);
  return out;
}

double dist_to_cone(const ConeSpec& cone, const Eigen::Ref<const Vec>& x) {
  Vec p;
  project_into(cone, x, p);
  return (x - p).norm();
}

// ---------------------------------------------------------------------------

JacobianElement::JacobianElement(ConeSpec cone, Vec nonneg_mask, std::vector<SocJacobianBlock> soc)
    : cone_(std::move(cone)), nonneg_mask_(std::move(nonneg_mask)), soc_(std::move(soc)) {
  require(nonneg_mask_.size() == cone_.nonneg_dim(), "jacobian: nonneg mask length mismatch");
  require(static_cast<Index>(soc_.size()) == cone_.num_second_order(), "jacobian: SOC block count mismatch");
}

void JacobianElement::apply_into(const Eigen::Ref<const Vec>& v, Vec& out) const {
  check_length(cone_, v.size(), "apply_jacobian");
  out.resize(v.size());
  std::size_t s = 0;
  for (const ConeBlock& blk : cone_.blocks()) {
    auto vb = v.segment(blk.offset, blk.dim);
    auto ob = out.segment(blk.offset, blk.dim);
    if (blk.kind == BlockKind::NonNeg) {
      ob = nonneg_mask_.cwiseProduct(vb);
      continue;
    }
    const SocJacobianBlock& jb = soc_[s++];
    switch (jb.shape) {
      case SocShape::Zero:
        ob.setZero();
        break;
      case SocShape::Identity:
        ob = vb;
        break;
      case SocShape::Middle:
      case SocShape::BoundaryUpper:
      case SocShape::BoundaryLower: {
        const Index t = blk.dim - 1;
        const double v0 = vb[0];
        const double wv = jb.omega.dot(vb.tail(t));
        ob[0] = 0.5 * (v0 + wv);
        ob.tail(t) = 0.5 * ((1.0 + jb.rho) * vb.tail(t) + (v0 - jb.rho * wv) * jb.omega);
        break;
      }
    }
  }
}

Vec JacobianElement::apply(const Eigen::Ref<const Vec>& v) const {
  Vec out;
  apply_into(v, out);
  return out;
}

Mat JacobianElement::densify() const {
  const Index n = cone_.total_dim();
  Mat dense = Mat::Zero(n, n);
  std::size_t s = 0;
  for (const ConeBlock& blk : cone_.blocks()) {
    auto db = dense.block(blk.offset, blk.offset, blk.dim, blk.dim);
    if (blk.kind == BlockKind::NonNeg) {
      db.diagonal() = nonneg_mask_;
      continue;
    }
    const SocJacobianBlock& jb = soc_[s++];
    const Index t = blk.dim - 1;
    switch (jb.shape) {
      case SocShape::Zero:
        break;
      case SocShape::Identity:
        db.setIdentity();
        break;
      default:
        db(0, 0) = 0.5;
        db.block(1, 0, t, 1) = 0.5 * jb.omega;
        db.block(0, 1, 1, t) = 0.5 * jb.omega.transpose();
        db.block(1, 1, t, t) = 0.5 * ((1.0 + jb.rho) * Mat::Identity(t, t) - jb.rho * jb.omega * jb.omega.transpose());
        break;
    }
  }
  return dense;
}

JacobianElement jacobian_element(const ConeSpec& cone, const Eigen::Ref<const Vec>& x, TieRule rule) {
  check_length(cone, x.size(), "jacobian_element");
  Vec mask(cone.nonneg_dim());
  std::vector<SocJacobianBlock> soc;
  soc.reserve(static_cast<std::size_t>(cone.num_second_order()));

  for (const ConeBlock& blk : cone.blocks()) {
    auto xb = x.segment(blk.offset, blk.dim);
    if (blk.kind == BlockKind::NonNeg) {
      // Kink at 0 takes derivative 1.
      for (Index i = 0; i < blk.dim; ++i) mask[i] = xb[i] >= 0.0 ? 1.0 : 0.0;
      continue;
    }
    const double x0 = xb[0];
    const double nt = xb.tail(blk.dim - 1).norm();
    SocJacobianBlock jb;
    if (nt <= kTieTolerance && std::abs(x0) <= kTieTolerance) {
      jb.shape = SocShape::Identity;
    } else if (x0 - nt > kTieTolerance) {
      jb.shape = SocShape::Identity;
    } else if (x0 + nt < -kTieTolerance) {
      jb.shape = SocShape::Zero;
    } else if (std::abs(x0 - nt) <= kTieTolerance) {
      if (rule == TieRule::Outer) {
        jb.shape = SocShape::Identity;
      } else {
        jb.shape = SocShape::BoundaryUpper;
        jb.rho = 1.0;
        jb.omega = xb.tail(blk.dim - 1) / nt;
      }
    } else if (std::abs(x0 + nt) <= kTieTolerance) {
      if (rule == TieRule::Outer) {
        jb.shape = SocShape::Zero;
      } else {
        jb.shape = SocShape::BoundaryLower;
        jb.rho = -1.0;
        jb.omega = xb.tail(blk.dim - 1) / nt;
      }
    } else {
      jb.shape = SocShape::Middle;
      jb.rho = x0 / nt;
      jb.omega = xb.tail(blk.dim - 1) / nt;
    }
    soc.push_back(std::move(jb));
  }
  return JacobianElement(cone, std::move(mask), std::move(soc));
}

Vec apply_jacobian(const JacobianElement& jac, const Eigen::Ref<const Vec>& v) { return jac.apply(v); }

}  // namespace socpalm

#include <socpalm/linsys.hpp>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <utility>

namespace socpalm {

// ---------------------------------------------------------------------------
// SparseSymmetric
// ---------------------------------------------------------------------------

SparseSymmetric::SparseSymmetric(Index n) : full_(n, n) {}

SparseSymmetric SparseSymmetric::from_lower_triplets(Index n, const std::vector<Triplet>& lower) {
  std::vector<Triplet> both;
  both.reserve(2 * lower.size());
  for (const Triplet& t : lower) {
    require(t.row() >= 0 && t.row() < n && t.col() >= 0 && t.col() < n,
            "symmetric matrix: index (" + std::to_string(t.row()) + ", " + std::to_string(t.col()) +
                ") out of range for dimension " + std::to_string(n));
    require(t.row() >= t.col(), "symmetric matrix: entry (" + std::to_string(t.row()) + ", " +
                                    std::to_string(t.col()) + ") is above the diagonal; give the lower triangle only");
    both.push_back(t);
    if (t.row() != t.col()) both.emplace_back(t.col(), t.row(), t.value());
  }
  SparseSymmetric s(n);
  s.full_.setFromTriplets(both.begin(), both.end());
  s.full_.prune(0.0);
  s.full_.makeCompressed();
  return s;
}

SparseSymmetric SparseSymmetric::from_dense(const Mat& dense, double symmetry_tol) {
  require(dense.rows() == dense.cols(), "symmetric matrix: dense input must be square");
  const double scale = std::max(1.0, dense.cwiseAbs().maxCoeff());
  require((dense - dense.transpose()).cwiseAbs().maxCoeff() <= symmetry_tol * scale,
          "symmetric matrix: dense input is not symmetric");
  std::vector<Triplet> lower;
  for (Index j = 0; j < dense.cols(); ++j) {
    for (Index i = j; i < dense.rows(); ++i) {
      if (dense(i, j) != 0.0) lower.emplace_back(i, j, dense(i, j));
    }
  }
  return from_lower_triplets(dense.rows(), lower);
}

std::vector<Triplet> SparseSymmetric::lower_triplets() const {
  std::vector<Triplet> out;
  for (Index j = 0; j < full_.outerSize(); ++j) {
    for (SpMat::InnerIterator it(full_, j); it; ++it) {
      if (it.row() >= j) out.emplace_back(it.row(), j, it.value());
    }
  }
  return out;
}

bool SparseSymmetric::operator==(const SparseSymmetric& other) const {
  if (dim() != other.dim() || full_.nonZeros() != other.full_.nonZeros()) return false;
  const std::vector<Triplet> mine = lower_triplets();
  const std::vector<Triplet> theirs = other.lower_triplets();
  return mine.size() == theirs.size() &&
         std::equal(mine.begin(), mine.end(), theirs.begin(), [](const Triplet& a, const Triplet& b) {
           return a.row() == b.row() && a.col() == b.col() && a.value() == b.value();
         });
}

double estimate_lambda_max(const SparseSymmetric& h) {
  if (h.is_zero()) return 0.0;
  const SpMat& a = h.full();
  const Index n = a.rows();

  Vec row_sums = Vec::Zero(n);
  for (Index j = 0; j < a.outerSize(); ++j) {
    for (SpMat::InnerIterator it(a, j); it; ++it) row_sums[it.row()] += std::abs(it.value());
  }
  const double inf_bound = row_sums.maxCoeff();

  std::mt19937_64 gen(0x5eedULL);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = 0.5 + static_cast<double>(gen() >> 11) * 0x1.0p-53;
  v.normalize();

  double theta = 0.0;
  Vec w;
  for (int it = 0; it < 50; ++it) {
    w = a * v;
    const double next = v.dot(w);
    const double wn = w.norm();
    const bool done = it > 0 && std::abs(next - theta) <= 1e-4 * std::abs(next);
    theta = next;
    if (wn == 0.0 || done) break;
    v = w / wn;
  }
  if (theta <= 0.0) return inf_bound;
  return std::min(1.2 * theta, inf_bound);
}

const char* to_string(SpdStrategy s) {
  switch (s) {
    case SpdStrategy::Auto:
      return "auto";
    case SpdStrategy::Augmented:
      return "augmented";
    case SpdStrategy::Dense:
      return "dense";
    case SpdStrategy::MatrixFree:
      return "matrix-free";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// NewtonSystem
// ---------------------------------------------------------------------------

namespace {

constexpr double kFoldTolerance = 1e-12;

void check_partition(const SpMat& a, const JacobianElement& jac) {
  if (a.cols() != jac.cone().total_dim()) {
    throw InputError("newton system: A has " + std::to_string(a.cols()) + " columns but the cone has dimension " +
                     std::to_string(jac.cone().total_dim()));
  }
}

/// Effective shape of a SOC block after folding |rho| ~ 1 into the boundary shapes.
SocShape effective_shape(const SocJacobianBlock& jb) {
  if (jb.shape != SocShape::Middle) return jb.shape;
  if (1.0 - jb.rho <= kFoldTolerance) return SocShape::BoundaryUpper;
  if (1.0 + jb.rho <= kFoldTolerance) return SocShape::BoundaryLower;
  return SocShape::Middle;
}

/// Per-column scaling s with sum_i A_i V_i A_i^T = A diag(s) A^T + low-rank.
Vec diagonal_scaling(const JacobianElement& jac) {
  const ConeSpec& cone = jac.cone();
  Vec s = Vec::Zero(cone.total_dim());
  std::size_t k = 0;
  for (const ConeBlock& blk : cone.blocks()) {
    if (blk.kind == BlockKind::NonNeg) {
      s.segment(blk.offset, blk.dim) = jac.nonneg_mask();
      continue;
    }
    const SocJacobianBlock& jb = jac.soc_blocks()[k++];
    switch (effective_shape(jb)) {
      case SocShape::Zero:
      case SocShape::BoundaryLower:
        break;
      case SocShape::Identity:
      case SocShape::BoundaryUpper:
        s.segment(blk.offset, blk.dim).setOnes();
        break;
      case SocShape::Middle:
        s.segment(blk.offset, blk.dim).setConstant(0.5 * (1.0 + jb.rho));
        break;
    }
  }
  return s;
}

/// Sparse accumulator for one column of length m.
class ColumnAccumulator {
 public:
  explicit ColumnAccumulator(Index m) : values_(Vec::Zero(m)), seen_(static_cast<std::size_t>(m), false) {}

  void add(Index row, double value) {
    if (!seen_[static_cast<std::size_t>(row)]) {
      seen_[static_cast<std::size_t>(row)] = true;
      rows_.push_back(row);
    }
    values_[row] += value;
  }

  /// Emits a*first + b*second style combinations are built by callers; this
  /// flushes the accumulated column into `out` as column `col` and resets.
  void flush(Index col, std::vector<Triplet>& out) {
    std::sort(rows_.begin(), rows_.end());
    for (Index r : rows_) {
      if (values_[r] != 0.0) out.emplace_back(r, col, values_[r]);
      values_[r] = 0.0;
      seen_[static_cast<std::size_t>(r)] = false;
    }
    rows_.clear();
  }

 private:
  Vec values_;
  std::vector<bool> seen_;
  std::vector<Index> rows_;
};

}  // namespace

NewtonSystem NewtonSystem::matrix_free(const SpMat& a, const JacobianElement& jac, double sigma, double eps) {
  check_partition(a, jac);
  require(sigma > 0.0, "newton system: sigma must be positive");
  require(eps >= 0.0, "newton system: eps must be nonnegative");
  NewtonSystem sys;
  sys.dim_ = a.rows();
  sys.num_soc_ = jac.cone().num_second_order();
  sys.assembled_ = false;
  sys.a_ = &a;
  sys.jac_ = jac;
  sys.sigma_ = sigma;
  sys.eps_ = eps;
  return sys;
}

NewtonSystem NewtonSystem::from_parts(SpMat sparse_part, SpMat low_rank, std::vector<CoreBlock> core,
                                      Index num_soc_blocks) {
  require(sparse_part.rows() == sparse_part.cols(), "newton system: sparse part must be square");
  require(low_rank.rows() == sparse_part.rows(), "newton system: low-rank columns have the wrong length");
  Index covered = 0;
  for (const CoreBlock& cb : core) {
    require(cb.col == covered && (cb.size == 1 || cb.size == 2), "newton system: core blocks must tile the columns");
    covered += cb.size;
  }
  require(covered == low_rank.cols(), "newton system: core blocks must cover every low-rank column");
  NewtonSystem sys;
  sys.dim_ = sparse_part.rows();
  sys.num_soc_ = num_soc_blocks;
  sys.sparse_ = std::move(sparse_part);
  sys.low_rank_ = std::move(low_rank);
  sys.core_ = std::move(core);
  sys.sparse_.makeCompressed();
  sys.low_rank_.makeCompressed();
  return sys;
}

NewtonSystem NewtonSystem::assemble_linear(const SpMat& a, const JacobianElement& jac, double sigma, double eps,
                                           const LinsysOptions& opts) {
  check_partition(a, jac);
  require(sigma > 0.0, "newton system: sigma must be positive");
  require(eps >= 0.0, "newton system: eps must be nonnegative");
  const Index m = a.rows();
  const Vec s = diagonal_scaling(jac);

  // Upper bound on nnz(A diag(s) A^T).
  double est = 0.0;
  for (Index j = 0; j < a.outerSize(); ++j) {
    if (s[j] == 0.0) continue;
    const double c = static_cast<double>(a.outerIndexPtr()[j + 1] - a.outerIndexPtr()[j]);
    est += c * c;
  }
  if (est > static_cast<double>(opts.max_assembled_nnz)) return matrix_free(a, jac, sigma, eps);

  // B = A[:, s > 0] diag(sqrt(s)) so that A diag(s) A^T = B B^T.
  std::vector<Triplet> bt;
  bt.reserve(static_cast<std::size_t>(a.nonZeros()));
  Index bcols = 0;
  for (Index j = 0; j < a.outerSize(); ++j) {
    if (s[j] == 0.0) continue;
    const double w = std::sqrt(s[j]);
    for (SpMat::InnerIterator it(a, j); it; ++it) bt.emplace_back(it.row(), bcols, w * it.value());
    ++bcols;
  }
  SpMat b(m, bcols);
  b.setFromTriplets(bt.begin(), bt.end());
  SpMat bbt = SpMat(b * b.transpose()) * sigma;
  SpMat eye(m, m);
  eye.setIdentity();
  SpMat sparse = bbt + eps * eye;

  // Low-rank columns, two per Middle block, one per boundary block.
  std::vector<Triplet> ut;
  std::vector<CoreBlock> core;
  ColumnAccumulator acc(m);
  Index col = 0;
  std::size_t k = 0;
  for (const ConeBlock& blk : jac.cone().blocks()) {
    if (blk.kind == BlockKind::NonNeg) continue;
    const SocJacobianBlock& jb = jac.soc_blocks()[k++];
    const SocShape shape = effective_shape(jb);
    if (shape == SocShape::Zero || shape == SocShape::Identity) continue;

    // head column A_i1 scaled by `head`, plus tail A_i2 * omega scaled by `tail`
    auto emit = [&](double head, double tail) {
      for (SpMat::InnerIterator it(a, blk.offset); it; ++it) acc.add(it.row(), head * it.value());
      for (Index j = 1; j < blk.dim; ++j) {
        const double wj = tail * jb.omega[j - 1];
        if (wj == 0.0) continue;
        for (SpMat::InnerIterator it(a, blk.offset + j); it; ++it) acc.add(it.row(), wj * it.value());
      }
      acc.flush(col, ut);
      ++col;
    };

    CoreBlock cb;
    cb.col = col;
    if (shape == SocShape::Middle) {
      emit(1.0, 0.0);
      emit(0.0, 1.0);
      cb.size = 2;
      cb.value << -jb.rho, 1.0, 1.0, -jb.rho;
      cb.value *= 0.5 * sigma;
    } else if (shape == SocShape::BoundaryUpper) {
      emit(1.0, -1.0);
      cb.size = 1;
      cb.value(0, 0) = -0.5 * sigma;
    } else {  // BoundaryLower
      emit(1.0, 1.0);
      cb.size = 1;
      cb.value(0, 0) = 0.5 * sigma;
    }
    core.push_back(cb);
  }
  SpMat u(m, col);
  u.setFromTriplets(ut.begin(), ut.end());
  return from_parts(std::move(sparse), std::move(u), std::move(core), jac.cone().num_second_order());
}

namespace {

/// t <- D t, blockwise.
void apply_core(const std::vector<CoreBlock>& core, Vec& t) {
  for (const CoreBlock& cb : core) {
    if (cb.size == 1) {
      t[cb.col] *= cb.value(0, 0);
    } else {
      const Eigen::Vector2d v = cb.value * t.segment<2>(cb.col);
      t.segment<2>(cb.col) = v;
    }
  }
}

/// Dense D^{-1} (k x k, block diagonal).
Mat core_inverse(const std::vector<CoreBlock>& core, Index k) {
  Mat dinv = Mat::Zero(k, k);
  for (const CoreBlock& cb : core) {
    if (cb.size == 1) {
      dinv(cb.col, cb.col) = 1.0 / cb.value(0, 0);
    } else {
      dinv.block<2, 2>(cb.col, cb.col) = cb.value.inverse();
    }
  }
  return dinv;
}

/// Quadratic form of one SOC block shape with a vector split as (a0, at).
double soc_quadratic_form(const SocJacobianBlock& jb, double a0, const Vec& at) {
  switch (jb.shape) {
    case SocShape::Zero:
      return 0.0;
    case SocShape::Identity:
      return a0 * a0 + at.squaredNorm();
    default: {
      const double wa = jb.omega.dot(at);
      return 0.5 * (a0 * a0 + 2.0 * a0 * wa + (1.0 + jb.rho) * at.squaredNorm() - jb.rho * wa * wa);
    }
  }
}

/// diag(A V A^T) for block-diagonal V, via the rows of A.
Vec diag_avat(const SpMat& a, const JacobianElement& jac) {
  const ConeSpec& cone = jac.cone();
  const Index m = a.rows();
  Eigen::SparseMatrix<double, Eigen::RowMajor, Index> rows = a;
  std::vector<Index> block_of(static_cast<std::size_t>(cone.total_dim()));
  std::vector<long> soc_index(cone.blocks().size(), -1);
  {
    long k = 0;
    for (std::size_t b = 0; b < cone.blocks().size(); ++b) {
      const ConeBlock& blk = cone.blocks()[b];
      for (Index j = 0; j < blk.dim; ++j) block_of[static_cast<std::size_t>(blk.offset + j)] = static_cast<Index>(b);
      if (blk.kind == BlockKind::SecondOrder) soc_index[b] = k++;
    }
  }
  Vec out = Vec::Zero(m);
  for (Index r = 0; r < m; ++r) {
    double sum = 0.0;
    using RowIt = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>::InnerIterator;
    RowIt it(rows, r);
    while (it) {
      const Index b = block_of[static_cast<std::size_t>(it.col())];
      const ConeBlock& blk = cone.blocks()[static_cast<std::size_t>(b)];
      if (blk.kind == BlockKind::NonNeg) {
        sum += jac.nonneg_mask()[it.col() - blk.offset] * it.value() * it.value();
        ++it;
        continue;
      }
      double a0 = 0.0;
      Vec at = Vec::Zero(blk.dim - 1);
      while (it && it.col() < blk.offset + blk.dim) {
        const Index local = it.col() - blk.offset;
        if (local == 0) {
          a0 = it.value();
        } else {
          at[local - 1] = it.value();
        }
        ++it;
      }
      sum += soc_quadratic_form(jac.soc_blocks()[static_cast<std::size_t>(soc_index[static_cast<std::size_t>(b)])],
                                a0, at);
    }
    out[r] = sum;
  }
  return out;
}

}  // namespace

void NewtonSystem::apply(const Vec& v, Vec& out) const {
  if (!assembled_) {
    Vec atv = a_->transpose() * v;
    Vec vatv;
    jac_.apply_into(atv, vatv);
    out = eps_ * v + sigma_ * (*a_ * vatv);
    return;
  }
  out = sparse_ * v;
  if (low_rank_.cols() > 0) {
    Vec t = low_rank_.transpose() * v;
    apply_core(core_, t);
    out += low_rank_ * t;
  }
}

Vec NewtonSystem::apply(const Vec& v) const {
  Vec out;
  apply(v, out);
  return out;
}

Vec NewtonSystem::diagonal() const {
  if (!assembled_) return Vec::Constant(dim_, eps_) + sigma_ * diag_avat(*a_, jac_);
  Vec d = sparse_.diagonal();
  Vec first = Vec::Zero(dim_);
  for (const CoreBlock& cb : core_) {
    if (cb.size == 1) {
      for (SpMat::InnerIterator it(low_rank_, cb.col); it; ++it) d[it.row()] += cb.value(0, 0) * it.value() * it.value();
      continue;
    }
    for (SpMat::InnerIterator it(low_rank_, cb.col); it; ++it) {
      d[it.row()] += cb.value(0, 0) * it.value() * it.value();
      first[it.row()] = it.value();
    }
    for (SpMat::InnerIterator it(low_rank_, cb.col + 1); it; ++it) {
      d[it.row()] += cb.value(1, 1) * it.value() * it.value() + 2.0 * cb.value(0, 1) * first[it.row()] * it.value();
    }
    for (SpMat::InnerIterator it(low_rank_, cb.col); it; ++it) first[it.row()] = 0.0;
  }
  return d;
}

Mat NewtonSystem::densify() const {
  if (!assembled_) {
    Mat out(dim_, dim_);
    Vec e = Vec::Zero(dim_), col;
    for (Index j = 0; j < dim_; ++j) {
      e[j] = 1.0;
      apply(e, col);
      out.col(j) = col;
      e[j] = 0.0;
    }
    return out;
  }
  Mat out = Mat(sparse_);
  if (low_rank_.cols() > 0) {
    Mat u = Mat(low_rank_);
    Mat ud = u;
    for (const CoreBlock& cb : core_) {
      if (cb.size == 1) {
        ud.col(cb.col) = cb.value(0, 0) * u.col(cb.col);
      } else {
        ud.middleCols(cb.col, 2) = u.middleCols(cb.col, 2) * cb.value.transpose();
      }
    }
    out.noalias() += ud * u.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// solve_spd
// ---------------------------------------------------------------------------

namespace {

struct Attempt {
  bool ok = false;
  Vec d;
  int iterations = 0;
  double residual = 0.0;
  bool direct = false;
  std::vector<double> history;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

LinearOperator as_operator(const NewtonSystem& sys) {
  return [&sys](const Vec& x, Vec& y) { sys.apply(x, y); };
}

/// PSQMR refinement of `d` on the operator itself with the given preconditioner.
void refine(const NewtonSystem& sys, const LinearOperator& precond, const Vec& rhs, double tol, int max_iter,
            Attempt& att) {
  KrylovOptions ko{tol, max_iter};
  KrylovResult kr = psqmr(as_operator(sys), precond, rhs, att.d, ko);
  att.iterations += kr.iterations;
  att.residual = kr.residual;
  att.history.insert(att.history.end(), kr.history.begin(), kr.history.end());
  att.ok = kr.converged;
}

Attempt solve_augmented(const NewtonSystem& sys, const Vec& rhs, double tol, const LinsysOptions& opts) {
  Attempt att;
  const Index m = sys.dim();
  const Index k = sys.rank();

  Eigen::SimplicialLDLT<SpMat> ldlt(sys.sparse_part());
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().size() != m || !(ldlt.vectorD().minCoeff() > 0.0)) return att;

  const SpMat& u = sys.low_rank_columns();
  Mat w;  // M_sp^{-1} U
  Eigen::PartialPivLU<Mat> s_lu;
  if (k > 0) {
    w = ldlt.solve(Mat(u));
    Mat s = core_inverse(sys.core(), k);
    s.noalias() += u.transpose() * w;
    s_lu.compute(s);
    if (!(s_lu.rcond() > 1e-15)) return att;
  }

  // Block-inverse of the augmented matrix [[M_sp, U], [U^T, -D^{-1}]].
  auto precond = [&](const Vec& h, Vec& out) {
    out.resize(m + k);
    Vec lam1 = ldlt.solve(h.head(m));
    if (k == 0) {
      out = lam1;
      return;
    }
    Vec lam2 = s_lu.solve(u.transpose() * lam1 - h.tail(k));
    out.head(m) = lam1 - w * lam2;
    out.tail(k) = lam2;
  };

  Vec d;
  if (k == 0) {
    d = ldlt.solve(rhs);
    att.iterations = 0;
  } else {
    const Mat dinv = core_inverse(sys.core(), k);
    auto aug = [&](const Vec& z, Vec& out) {
      out.resize(m + k);
      out.head(m) = sys.sparse_part() * z.head(m) + u * z.tail(k);
      out.tail(k) = u.transpose() * z.head(m) - dinv * z.tail(k);
    };
    Vec big_rhs = Vec::Zero(m + k);
    big_rhs.head(m) = rhs;
    Vec z = Vec::Zero(m + k);
    KrylovResult kr = psqmr(aug, precond, big_rhs, z, KrylovOptions{0.5 * tol, opts.krylov_max_iter});
    att.iterations = kr.iterations;
    att.history = kr.history;
    d = z.head(m);
  }
  att.d = std::move(d);
  att.direct = true;
  att.residual = (sys.apply(att.d) - rhs).norm();
  att.ok = att.residual <= tol;
  if (!att.ok) {
    // Woodbury inverse of M as preconditioner: first block of the block inverse at (h; 0).
    auto smw = [&](const Vec& h, Vec& out) {
      Vec lam1 = ldlt.solve(h);
      if (k == 0) {
        out = lam1;
        return;
      }
      Vec lam2 = s_lu.solve(u.transpose() * lam1);
      out = lam1 - w * lam2;
    };
    refine(sys, smw, rhs, tol, opts.krylov_max_iter, att);
  }
  return att;
}

Attempt solve_dense(const NewtonSystem& sys, const Vec& rhs, double tol, const LinsysOptions& opts) {
  Attempt att;
  const Mat dense = sys.densify();
  Eigen::LLT<Mat> llt(dense);
  LinearOperator precond;
  Eigen::LDLT<Mat> ldlt;
  if (llt.info() == Eigen::Success) {
    att.d = llt.solve(rhs);
    precond = [&llt](const Vec& h, Vec& out) { out = llt.solve(h); };
  } else {
    ldlt.compute(dense);
    if (ldlt.info() != Eigen::Success) return att;
    att.d = ldlt.solve(rhs);
    precond = [&ldlt](const Vec& h, Vec& out) { out = ldlt.solve(h); };
  }
  if (!att.d.allFinite()) return att;
  att.direct = true;
  att.residual = (sys.apply(att.d) - rhs).norm();
  att.ok = att.residual <= tol;
  if (!att.ok) refine(sys, precond, rhs, tol, opts.krylov_max_iter, att);
  return att;
}

Attempt solve_matrix_free(const NewtonSystem& sys, const Vec& rhs, double tol, const LinsysOptions& opts) {
  Attempt att;
  Vec diag = sys.diagonal();
  for (Index i = 0; i < diag.size(); ++i) {
    if (!(diag[i] > 0.0)) diag[i] = 1.0;
  }
  const Vec inv = diag.cwiseInverse();
  auto precond = [&inv](const Vec& h, Vec& out) { out = inv.cwiseProduct(h); };
  att.d = Vec::Zero(sys.dim());
  refine(sys, precond, rhs, tol, opts.krylov_max_iter, att);
  return att;
}

}  // namespace

SpdSolution solve_spd(const NewtonSystem& sys, const Vec& rhs, double tol, const LinsysOptions& opts) {
  require(rhs.size() == sys.dim(), "solve_spd: rhs has length " + std::to_string(rhs.size()) + ", expected " +
                                       std::to_string(sys.dim()));
  const double rhs_norm = rhs.norm();
  const double tol_eff = std::max(tol, 1e-12 * rhs_norm);
  SpdSolution sol;
  if (rhs_norm == 0.0) {
    sol.d = Vec::Zero(sys.dim());
    sol.stats.converged = true;
    sol.stats.strategy = opts.strategy == SpdStrategy::Auto ? SpdStrategy::Dense : opts.strategy;
    return sol;
  }

  const Index m = sys.dim();
  const Index k = sys.rank();
  const Index cap = opts.dense_col_cap < 0 ? 2 * sys.num_soc_blocks() + 50 : opts.dense_col_cap;

  std::vector<SpdStrategy> plan;
  if (!sys.assembled()) {
    if (opts.strategy == SpdStrategy::Dense) plan.push_back(SpdStrategy::Dense);
    plan.push_back(SpdStrategy::MatrixFree);
  } else if (opts.strategy != SpdStrategy::Auto) {
    plan.push_back(opts.strategy);
    if (opts.strategy != SpdStrategy::MatrixFree) plan.push_back(SpdStrategy::MatrixFree);
  } else {
    if (k <= cap && k <= m && static_cast<double>(m) * static_cast<double>(k) <= opts.max_dense_entries) {
      plan.push_back(SpdStrategy::Augmented);
    }
    if (m <= opts.dense_max_rows) plan.push_back(SpdStrategy::Dense);
    plan.push_back(SpdStrategy::MatrixFree);
  }

  // M is PSD, so ||M|| <= trace(M).
  const double trace = std::max(0.0, sys.diagonal().sum());
  auto at_precision = [&](const Attempt& att) {
    return att.d.size() == m && att.d.allFinite() &&
           att.residual <= 16.0 * std::numeric_limits<double>::epsilon() * (trace * att.d.norm() + rhs_norm);
  };

  double best = std::numeric_limits<double>::infinity();
  Vec best_d;
  int iterations = 0;
  for (SpdStrategy strategy : plan) {
    Attempt att;
    switch (strategy) {
      case SpdStrategy::Augmented:
        att = solve_augmented(sys, rhs, tol_eff, opts);
        break;
      case SpdStrategy::Dense:
        att = solve_dense(sys, rhs, tol_eff, opts);
        break;
      default:
        att = solve_matrix_free(sys, rhs, tol_eff, opts);
        break;
    }
    iterations += att.iterations;
    if (att.d.size() == m && att.residual < best) {
      best = att.residual;
      best_d = att.d;
    }
    if (att.ok || at_precision(att)) {
      sol.d = std::move(att.d);
      sol.stats.strategy = strategy;
      sol.stats.krylov_iterations = iterations;
      sol.stats.residual = att.residual;
      sol.stats.converged = true;
      sol.stats.direct = att.direct;
      sol.stats.residual_history = std::move(att.history);
      return sol;
    }
  }
  throw LinearSolveError("solve_spd: no strategy reached residual " + sci(tol_eff) + " (best " + sci(best) + ")",
                         best);
}

// ---------------------------------------------------------------------------
// Quadratic case
// ---------------------------------------------------------------------------

void apply_quadratic_operator(const SparseSymmetric& h, const SpMat& a, const JacobianElement& jac, double sigma,
                              double eps, const Vec& d1, const Vec& d2, Vec& out1, Vec& out2) {
  Vec t = h.full() * d1;
  t.noalias() -= a.transpose() * d2;
  Vec z;
  jac.apply_into(t, z);
  out1 = d1 + sigma * z;
  out2 = eps * d2;
  out2.noalias() -= sigma * (a * z);
}

namespace {

/// Entry (i, j) of one realized SOC block (local indices).
double soc_entry(const SocJacobianBlock& jb, Index i, Index j) {
  switch (jb.shape) {
    case SocShape::Zero:
      return 0.0;
    case SocShape::Identity:
      return i == j ? 1.0 : 0.0;
    default:
      if (i == 0 && j == 0) return 0.5;
      if (i == 0) return 0.5 * jb.omega[j - 1];
      if (j == 0) return 0.5 * jb.omega[i - 1];
      return 0.5 * ((i == j ? 1.0 + jb.rho : 0.0) - jb.rho * jb.omega[i - 1] * jb.omega[j - 1]);
  }
}

struct BlockLookup {
  std::vector<Index> block_of;  // column -> block index
  std::vector<long> soc_index;  // block index -> SOC ordinal
};

BlockLookup make_lookup(const ConeSpec& cone) {
  BlockLookup lk;
  lk.block_of.resize(static_cast<std::size_t>(cone.total_dim()));
  lk.soc_index.assign(cone.blocks().size(), -1);
  long k = 0;
  for (std::size_t b = 0; b < cone.blocks().size(); ++b) {
    const ConeBlock& blk = cone.blocks()[b];
    for (Index j = 0; j < blk.dim; ++j) lk.block_of[static_cast<std::size_t>(blk.offset + j)] = static_cast<Index>(b);
    if (blk.kind == BlockKind::SecondOrder) lk.soc_index[b] = k++;
  }
  return lk;
}

/// V(i, j) for global indices i, j.
double v_entry(const JacobianElement& jac, const BlockLookup& lk, Index i, Index j) {
  const Index b = lk.block_of[static_cast<std::size_t>(i)];
  if (b != lk.block_of[static_cast<std::size_t>(j)]) return 0.0;
  const ConeBlock& blk = jac.cone().blocks()[static_cast<std::size_t>(b)];
  if (blk.kind == BlockKind::NonNeg) return i == j ? jac.nonneg_mask()[i - blk.offset] : 0.0;
  const auto& jb = jac.soc_blocks()[static_cast<std::size_t>(lk.soc_index[static_cast<std::size_t>(b)])];
  return soc_entry(jb, i - blk.offset, j - blk.offset);
}

/// Structural nonzeros of the realized V.
double nnz_v(const JacobianElement& jac) {
  double nnz = jac.nonneg_mask().sum();
  std::size_t k = 0;
  for (const ConeBlock& blk : jac.cone().blocks()) {
    if (blk.kind == BlockKind::NonNeg) continue;
    const auto& jb = jac.soc_blocks()[k++];
    const double d = static_cast<double>(blk.dim);
    if (jb.shape == SocShape::Identity) nnz += d;
    if (jb.shape != SocShape::Zero && jb.shape != SocShape::Identity) nnz += d * d;
  }
  return nnz;
}

SpMat sparse_v(const JacobianElement& jac) {
  const ConeSpec& cone = jac.cone();
  std::vector<Triplet> tr;
  std::size_t k = 0;
  for (const ConeBlock& blk : cone.blocks()) {
    if (blk.kind == BlockKind::NonNeg) {
      for (Index i = 0; i < blk.dim; ++i) {
        if (jac.nonneg_mask()[i] != 0.0) tr.emplace_back(blk.offset + i, blk.offset + i, 1.0);
      }
      continue;
    }
    const auto& jb = jac.soc_blocks()[k++];
    if (jb.shape == SocShape::Zero) continue;
    for (Index j = 0; j < blk.dim; ++j) {
      for (Index i = 0; i < blk.dim; ++i) {
        const double v = soc_entry(jb, i, j);
        if (v != 0.0) tr.emplace_back(blk.offset + i, blk.offset + j, v);
      }
    }
  }
  SpMat v(cone.total_dim(), cone.total_dim());
  v.setFromTriplets(tr.begin(), tr.end());
  return v;
}

/// Top-left block assembled as I + s V H, etc.; returns the full (n+m) matrix.
SpMat assemble_quadratic_sparse(const SparseSymmetric& h, const SpMat& a, const JacobianElement& jac, double sigma,
                                double eps) {
  const Index n = a.cols();
  const Index m = a.rows();
  const SpMat v = sparse_v(jac);
  const SpMat at = a.transpose();
  const SpMat vh = v * h.full();
  const SpMat vat = v * at;
  const SpMat avh = a * vh;
  const SpMat avat = a * vat;

  std::vector<Triplet> tr;
  tr.reserve(static_cast<std::size_t>(n + m + vh.nonZeros() + vat.nonZeros() + avh.nonZeros() + avat.nonZeros()));
  for (Index i = 0; i < n; ++i) tr.emplace_back(i, i, 1.0);
  for (Index i = 0; i < m; ++i) tr.emplace_back(n + i, n + i, eps);
  auto put = [&](const SpMat& blk, Index r0, Index c0, double scale) {
    for (Index j = 0; j < blk.outerSize(); ++j) {
      for (SpMat::InnerIterator it(blk, j); it; ++it) tr.emplace_back(r0 + it.row(), c0 + j, scale * it.value());
    }
  };
  put(vh, 0, 0, sigma);
  put(vat, 0, n, -sigma);
  put(avh, n, 0, -sigma);
  put(avat, n, n, sigma);
  SpMat out(n + m, n + m);
  out.setFromTriplets(tr.begin(), tr.end());
  out.makeCompressed();
  return out;
}

Mat assemble_quadratic_dense(const SparseSymmetric& h, const SpMat& a, const JacobianElement& jac, double sigma,
                             double eps) {
  const Index n = a.cols();
  const Index m = a.rows();
  const Mat v = jac.densify();
  const Mat vh = v * h.full();
  const Mat vat = v * a.transpose();
  Mat out = Mat::Zero(n + m, n + m);
  out.topLeftCorner(n, n) = Mat::Identity(n, n) + sigma * vh;
  out.topRightCorner(n, m) = -sigma * vat;
  out.bottomLeftCorner(m, n) = -sigma * (a * vh);
  out.bottomRightCorner(m, m) = sigma * (a * vat);
  out.bottomRightCorner(m, m).diagonal().array() += eps;
  return out;
}

}  // namespace

QuadraticSolution solve_quadratic(const SparseSymmetric& h, const SpMat& a, const JacobianElement& jac, double sigma,
                                  double eps, const Vec& r1, const Vec& r2, double tol,
                                  std::optional<double> lambda_max_estimate, const LinsysOptions& opts) {
  const Index n = a.cols();
  const Index m = a.rows();
  check_partition(a, jac);
  require(h.dim() == n, "solve_quadratic: H has dimension " + std::to_string(h.dim()) + ", expected " +
                            std::to_string(n));
  require(r1.size() == n && r2.size() == m, "solve_quadratic: right-hand side has the wrong length");
  require(tol > 0.0, "solve_quadratic: tol must be positive");
  require(sigma > 0.0, "solve_quadratic: sigma must be positive");

  QuadraticSolution sol;
  if (h.is_zero()) {
    // The system is block triangular: solve the linear-case system for d2,
    // then d1 = R1 + sigma V A^T d2.
    NewtonSystem sys = NewtonSystem::assemble_linear(a, jac, sigma, eps, opts);
    SpdSolution s = solve_spd(sys, r2, tol, opts);
    sol.d2 = std::move(s.d);
    sol.d1 = r1 + sigma * jac.apply(a.transpose() * sol.d2);
    sol.stats = std::move(s.stats);
    return sol;
  }

  const double lam = lambda_max_estimate ? *lambda_max_estimate : estimate_lambda_max(h);
  const double rhs_norm = std::sqrt(r1.squaredNorm() + r2.squaredNorm());
  const double tol_eff = std::max(tol / std::max(1.0, lam), 1e-14 * rhs_norm);
  const Index big = n + m;

  Vec rhs(big);
  rhs << r1, r2;
  auto op = [&](const Vec& x, Vec& y) {
    Vec y1, y2;
    apply_quadratic_operator(h, a, jac, sigma, eps, x.head(n), x.tail(m), y1, y2);
    y.resize(big);
    y << y1, y2;
  };
  auto finish = [&](Vec x, LinearSolveStats stats) {
    sol.d1 = x.head(n);
    sol.d2 = x.tail(m);
    sol.stats = std::move(stats);
    return sol;
  };

  LinearSolveStats stats;
  stats.strategy = SpdStrategy::Auto;
  double best_residual = std::numeric_limits<double>::infinity();
  Vec best_x;

  // Direct sparse LU when the block matrix is clearly sparse.
  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  const bool maybe_sparse = nnz_v(jac) <= 0.1 * n2 && static_cast<double>(h.nnz_full()) <= 0.1 * n2;
  if (maybe_sparse) {
    SpMat mhat = assemble_quadratic_sparse(h, a, jac, sigma, eps);
    const double density = static_cast<double>(mhat.nonZeros()) / (static_cast<double>(big) * static_cast<double>(big));
    if (density < 0.1) {
      Eigen::SparseLU<SpMat> lu;
      lu.compute(mhat);
      if (lu.info() == Eigen::Success) {
        Vec x = lu.solve(rhs);
        Vec ax;
        op(x, ax);
        double res = (ax - rhs).norm();
        stats.direct = true;
        if (res > tol_eff && x.allFinite()) {
          LinearOperator pre = [&lu](const Vec& r, Vec& out) { out = lu.solve(r); };
          KrylovResult kr = bicgstab(op, pre, rhs, x, KrylovOptions{tol_eff, opts.krylov_max_iter});
          stats.krylov_iterations += kr.iterations;
          res = kr.residual;
        }
        if (res <= tol_eff) {
          stats.residual = res;
          stats.converged = true;
          return finish(std::move(x), std::move(stats));
        }
        if (res < best_residual && x.allFinite()) {
          best_residual = res;
          best_x = x;
        }
      }
    }
  }

  // Jacobi-preconditioned BiCGSTAB.
  {
    const BlockLookup lk = make_lookup(jac.cone());
    Vec diag(big);
    const SpMat& hf = h.full();
    for (Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (SpMat::InnerIterator it(hf, j); it; ++it) acc += v_entry(jac, lk, j, it.row()) * it.value();
      diag[j] = 1.0 + sigma * acc;
    }
    diag.tail(m) = Vec::Constant(m, eps) + sigma * diag_avat(a, jac);
    for (Index i = 0; i < big; ++i) {
      if (!(std::abs(diag[i]) > 1e-300)) diag[i] = 1.0;
    }
    const Vec inv = diag.cwiseInverse();
    LinearOperator pre = [&inv](const Vec& r, Vec& out) { out = inv.cwiseProduct(r); };
    Vec x = best_x.size() == big ? best_x : Vec::Zero(big);
    KrylovResult kr = bicgstab(op, pre, rhs, x, KrylovOptions{tol_eff, opts.krylov_max_iter});
    stats.krylov_iterations += kr.iterations;
    stats.residual_history = kr.history;
    if (kr.converged) {
      stats.residual = kr.residual;
      stats.converged = true;
      return finish(std::move(x), std::move(stats));
    }
    if (kr.residual < best_residual) {
      best_residual = kr.residual;
      best_x = x;
    }
  }

  // Dense LU for moderate sizes.
  if (big <= 4000) {
    const Mat dense = assemble_quadratic_dense(h, a, jac, sigma, eps);
    Eigen::PartialPivLU<Mat> lu(dense);
    Vec x = lu.solve(rhs);
    if (x.allFinite()) {
      Vec ax;
      op(x, ax);
      double res = (ax - rhs).norm();
      stats.direct = true;
      if (res > tol_eff) {
        LinearOperator pre = [&lu](const Vec& r, Vec& out) { out = lu.solve(r); };
        KrylovResult kr = bicgstab(op, pre, rhs, x, KrylovOptions{tol_eff, opts.krylov_max_iter});
        stats.krylov_iterations += kr.iterations;
        res = kr.residual;
      }
      if (res <= tol_eff) {
        stats.residual = res;
        stats.converged = true;
        return finish(std::move(x), std::move(stats));
      }
      best_residual = std::min(best_residual, res);
    }
  }
  throw LinearSolveError("solve_quadratic: residual " + sci(best_residual) + " above tolerance " + sci(tol_eff),
                         best_residual);
}

}  // namespace socpalm

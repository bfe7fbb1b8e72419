#pragma once

#include <socpalm/cone.hpp>
#include <socpalm/krylov.hpp>
#include <socpalm/types.hpp>

#include <optional>
#include <vector>

namespace socpalm {

/// Symmetric sparse matrix built from its lower triangle. The full pattern is
/// kept for fast products.
class SparseSymmetric {
 public:
  SparseSymmetric() = default;
  /// n x n zero matrix.
  explicit SparseSymmetric(Index n);

  /// Entries with row < col are rejected; duplicates are summed.
  static SparseSymmetric from_lower_triplets(Index n, const std::vector<Triplet>& lower);
  /// Uses the lower triangle of `dense`; the upper triangle must match it.
  static SparseSymmetric from_dense(const Mat& dense, double symmetry_tol = 0.0);

  Index dim() const noexcept { return full_.rows(); }
  bool is_zero() const noexcept { return full_.nonZeros() == 0; }
  const SpMat& full() const noexcept { return full_; }
  /// Lower-triangle entries in column-major order.
  std::vector<Triplet> lower_triplets() const;
  double frobenius_norm() const { return full_.norm(); }
  Index nnz_full() const noexcept { return full_.nonZeros(); }

  Vec operator*(const Eigen::Ref<const Vec>& v) const { return full_ * v; }

  bool operator==(const SparseSymmetric& other) const;

 private:
  SpMat full_;
};

/// Upper estimate of the largest eigenvalue of a symmetric PSD matrix: power
/// iteration (50 steps, relative tolerance 1e-4) inflated by 1.2 and capped by
/// the infinity-norm bound.
double estimate_lambda_max(const SparseSymmetric& h);

enum class SpdStrategy {
  Auto,
  Augmented,   // SMW augmented system + block-inverse preconditioned SQMR
  Dense,       // dense Cholesky of the assembled operator
  MatrixFree,  // diagonally preconditioned SQMR on the operator
};

const char* to_string(SpdStrategy s);

struct LinsysOptions {
  SpdStrategy strategy = SpdStrategy::Auto;
  /// Maximum low-rank column count for the augmented solve; < 0 means 2r + 50.
  Index dense_col_cap = -1;
  /// Auto falls back to a dense factorization when m <= this.
  Index dense_max_rows = 3000;
  /// Auto never forms the m x k dense block M_sp^{-1} U above this many entries.
  Index max_dense_entries = 50'000'000;
  /// Assembling A S A^T is skipped (matrix-free operator) above this many
  /// estimated nonzeros.
  Index max_assembled_nnz = 50'000'000;
  int krylov_max_iter = 500;
};

/// One diagonal block of D in M_sp + U D U^T, acting on columns
/// [col, col + size) of U. size is 1 or 2.
struct CoreBlock {
  Index col = 0;
  int size = 1;
  Eigen::Matrix2d value = Eigen::Matrix2d::Zero();
};

/// The operator eps I + sigma * sum_i A_i V_i A_i^T of the linear-case Newton
/// system, either assembled as M_sp + U D U^T or kept matrix-free.
class NewtonSystem {
 public:
  /// Splits every Middle block into a sparse part ((1+rho)/2) A_i A_i^T and a
  /// rank-2 term built on the columns (A_i1, A_i2 w) with core
  /// (sigma/2) [[-rho, 1], [1, -rho]]. `a` must outlive the system when the
  /// matrix-free form is selected.
  static NewtonSystem assemble_linear(const SpMat& a, const JacobianElement& jac, double sigma, double eps,
                                      const LinsysOptions& opts = {});

  /// Matrix-free form: applies eps v + sigma A (V (A^T v)).
  static NewtonSystem matrix_free(const SpMat& a, const JacobianElement& jac, double sigma, double eps);

  /// Assembled form from explicit parts.
  static NewtonSystem from_parts(SpMat sparse_part, SpMat low_rank, std::vector<CoreBlock> core,
                                 Index num_soc_blocks = 0);

  Index dim() const noexcept { return dim_; }
  bool assembled() const noexcept { return assembled_; }
  Index num_soc_blocks() const noexcept { return num_soc_; }

  const SpMat& sparse_part() const noexcept { return sparse_; }
  const SpMat& low_rank_columns() const noexcept { return low_rank_; }
  const std::vector<CoreBlock>& core() const noexcept { return core_; }
  Index rank() const noexcept { return low_rank_.cols(); }

  void apply(const Vec& v, Vec& out) const;
  Vec apply(const Vec& v) const;
  Vec diagonal() const;
  Mat densify() const;

 private:
  NewtonSystem() = default;

  Index dim_ = 0;
  Index num_soc_ = 0;
  bool assembled_ = true;
  SpMat sparse_;
  SpMat low_rank_;
  std::vector<CoreBlock> core_;
  // matrix-free data
  const SpMat* a_ = nullptr;
  JacobianElement jac_;
  double sigma_ = 1.0;
  double eps_ = 0.0;
};

struct LinearSolveStats {
  SpdStrategy strategy = SpdStrategy::Auto;
  int krylov_iterations = 0;
  double residual = 0.0;
  bool converged = false;
  bool direct = false;
  std::vector<double> residual_history;
};

struct SpdSolution {
  Vec d;
  LinearSolveStats stats;
};

/// Solves M d = rhs to ||M d - rhs|| <= max(tol, 1e-12 ||rhs||). A residual at
/// working precision, 16 u (trace(M) ||d|| + ||rhs||), is also accepted.
/// Throws LinearSolveError when no strategy reaches either bound.
SpdSolution solve_spd(const NewtonSystem& sys, const Vec& rhs, double tol, const LinsysOptions& opts = {});

struct QuadraticSolution {
  Vec d1;
  Vec d2;
  LinearSolveStats stats;
};

/// Applies [[I + s V H, -s V A^T], [-s A V H, eps I + s A V A^T]] to (d1; d2).
void apply_quadratic_operator(const SparseSymmetric& h, const SpMat& a, const JacobianElement& jac, double sigma,
                              double eps, const Vec& d1, const Vec& d2, Vec& out1, Vec& out2);

/// Solves the unsymmetric quadratic-case system above with residual at most
/// tol / max(1, lambda_max_estimate). Sparse LU when the block matrix has
/// density < 10%, Jacobi-preconditioned BiCGSTAB otherwise, dense LU as last
/// resort for moderate sizes.
QuadraticSolution solve_quadratic(const SparseSymmetric& h, const SpMat& a, const JacobianElement& jac, double sigma,
                                  double eps, const Vec& r1, const Vec& r2, double tol,
                                  std::optional<double> lambda_max_estimate = std::nullopt,
                                  const LinsysOptions& opts = {});

}  // namespace socpalm

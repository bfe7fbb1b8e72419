#pragma once

#include <socpalm/types.hpp>

#include <functional>
#include <vector>

namespace socpalm {

/// y <- Op(x). Implementations must resize y.
using LinearOperator = std::function<void(const Vec& x, Vec& y)>;

struct KrylovOptions {
  double tol = 1e-10;  // absolute tolerance on ||b - A x||
  int max_iter = 500;
};

struct KrylovResult {
  int iterations = 0;
  double residual = 0.0;  // true residual norm of the returned iterate
  bool converged = false;
  /// Non-increasing per-iteration residual estimates (QMR quasi-residual for
  /// PSQMR, best residual so far for BiCGSTAB).
  std::vector<double> history;
};

/// Preconditioned symmetric QMR (Freund & Nachtigal) for symmetric, possibly
/// indefinite A with a symmetric preconditioner. `x` holds the initial guess
/// on entry and the solution on exit. An empty `precond` means identity.
KrylovResult psqmr(const LinearOperator& apply_a, const LinearOperator& precond, const Vec& b, Vec& x,
                   const KrylovOptions& opts);

/// Right-preconditioned BiCGSTAB for general square systems. Returns the best
/// iterate seen.
KrylovResult bicgstab(const LinearOperator& apply_a, const LinearOperator& precond, const Vec& b, Vec& x,
                      const KrylovOptions& opts);

}  // namespace socpalm

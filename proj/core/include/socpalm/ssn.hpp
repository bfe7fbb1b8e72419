#pragma once

#include <socpalm/cone.hpp>
#include <socpalm/linsys.hpp>
#include <socpalm/problem.hpp>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace socpalm {

struct NewtonParams {
  double nu_hat = 0.9;
  double tau = 0.5;
  double tau1 = 0.1;
  double tau2 = 0.1;
  double mu = 1e-4;
  double delta = 0.5;
  int max_newton_iters = 200;
  int max_linesearch_steps = 40;
  LinsysOptions linsys;

  /// Throws InputError when a parameter is outside its admissible range.
  void validate() const;
};

/// A point of the inner problem for fixed (y, sigma), with everything the
/// Newton loop needs cached.
///
///   arg  = -sigma * ytilde = y + sigma (A^T x2 - H x1 - c)
///   proj = Pi_K(arg)
struct InnerState {
  Vec x1;
  Vec x2;
  Vec hx1;   // H x1
  Vec atx2;  // A^T x2
  Vec arg;
  Vec proj;
  double psi = 0.0;
  Vec g1;
  Vec g2;

  double grad_norm() const { return std::sqrt(g1.squaredNorm() + g2.squaredNorm()); }
};

struct PsiGrad {
  double psi = 0.0;
  Vec g1;
  Vec g2;
};

/// psi(x1, x2) = 1/2 <x1, H x1> - <b, x2> + (||Pi_K(-sigma ytilde)||^2 - ||y||^2) / (2 sigma)
/// with ytilde = H x1 - A^T x2 - y / sigma + c, and its gradient.
PsiGrad psi_and_grad(const ProblemData& p, const Vec& x1, const Vec& x2, const Vec& y, double sigma);

/// Builds the cached state at (x1, x2). An empty x1 (or x2) means zero.
InnerState make_inner_state(const ProblemData& p, const Vec& y, double sigma, Vec x1, Vec x2);

struct NewtonDirection {
  Vec d1;
  Vec d2;
  double eps = 0.0;
  double nu = 0.0;
  bool escalated = false;  // eps was raised tenfold after a failed solve
  LinearSolveStats stats;
};

/// Approximate solution of (M + eps (0; I)) d = -grad with M in the surrogate
/// generalized Hessian at `state`. In the quadratic case d1 is the
/// unprojected component; only H d1 is meaningful.
/// Throws LinearSolveError if the solve fails even after escalation.
NewtonDirection newton_direction(const ProblemData& p, const InnerState& state, double sigma,
                                 const NewtonParams& params, double lambda_max_estimate);

/// ||(M + eps (0; I)) d + grad|| evaluated by explicit multiplication, with
/// M built from the Jacobian element at state.arg.
double newton_residual(const ProblemData& p, const InnerState& state, double sigma, double eps, const Vec& d1,
                       const Vec& d2);

enum class LineSearchStatus { Accepted, BestEffort, NoDecrease };

struct LineSearchResult {
  double alpha = 1.0;
  int steps = 0;  // m_j, the number of reductions
  LineSearchStatus status = LineSearchStatus::Accepted;
  double directional = 0.0;  // <grad, d>
  double decrease = 0.0;     // psi(new) - psi(old)
  bool steepest_fallback = false;
  // The Armijo test was below rounding level; alpha was chosen by
  // ||grad psi(x + alpha d)|| <= (1 - mu alpha) ||grad psi(x)|| instead.
  bool residual_test = false;
  InnerState state;
};

/// Generic Armijo backtracking on a scalar function of the step length.
/// `phi_diff(alpha)` returns phi(alpha) - phi(0); `slope` is phi'(0) < 0.
/// Returns the accepted exponent m, or -1 when none of
/// m = 0..max_steps satisfies phi(delta^m) - phi(0) <= mu delta^m slope.
int armijo_exponent(const std::function<double(double)>& phi_diff, double slope, double mu, double delta,
                    int max_steps);

/// Armijo line search along d from `state`. Falls back to -grad when d is not
/// a sufficient descent direction, and to a gradient-norm test when |<grad, d>|
/// is below the rounding level of psi differences.
LineSearchResult line_search(const ProblemData& p, const Vec& y, double sigma, const InnerState& state, Vec d1,
                             Vec d2, const NewtonParams& params);

enum class InnerStatus { Converged, MaxIterations, Stagnation, LineSearchFailure, LinearSolveFailure };

const char* to_string(InnerStatus s);

/// One accepted Newton step, kept for post-hoc checks.
struct InnerStepRecord {
  double psi_old = 0.0;
  double psi_new = 0.0;
  double alpha = 0.0;
  double directional = 0.0;
  double decrease = 0.0;
  double grad_norm = 0.0;
  double eps = 0.0;
  double nu = 0.0;
  double newton_residual = 0.0;
  int linesearch_steps = 0;
  bool steepest_fallback = false;
  bool residual_test = false;
};

struct InnerResult {
  InnerState state;
  Vec x3;  // Pi_K(ytilde)
  InnerStatus status = InnerStatus::Converged;
  int newton_iters = 0;
  int krylov_iters = 0;
  int linesearch_steps = 0;
  std::string message;
  std::vector<InnerStepRecord> steps;
};

struct InnerOptions {
  /// Records the explicit Newton residual of every direction (costs a
  /// Jacobian build and a few matvecs per step).
  bool check_newton_residual = false;
};

/// Semismooth Newton loop on psi, stopping at the first iterate with
/// ||grad psi|| <= stop_threshold.
InnerResult run_inner(const ProblemData& p, const Vec& y, double sigma, InnerState start, double stop_threshold,
                      const NewtonParams& params, double lambda_max_estimate, const InnerOptions& opts = {});

}  // namespace socpalm

#pragma once

#include <socpalm/problem.hpp>
#include <socpalm/ssn.hpp>

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace socpalm {

struct AlmOptions {
  double tol = 1e-8;
  int max_outer = 100;
  /// Unset: 1 in the linear case, 1 / max(1, lambda_max(H)) otherwise.
  std::optional<double> sigma0;
  double sigma_growth = 3.0;
  double sigma_max = 1e8;
  double eps_scale = 0.1;  // eps_k = eps_scale * eps_ratio^k
  double eps_ratio = 0.7;
  double delta_scale = 0.1;  // delta_k = delta_scale * delta_ratio^k
  double delta_ratio = 0.7;
  bool use_criterion_b = false;
  /// Limit on threshold tightenings per outer step when the accepted inner
  /// point fails the criterion re-evaluated at the candidate.
  int max_threshold_tightenings = 60;
  NewtonParams newton;
  /// Record the explicit residual of every Newton direction.
  bool check_newton_residuals = false;

  void validate() const;
};

enum class SolveStatus { Optimal, MaxIterations, Stagnation, LinearSolveFailure };

const char* to_string(SolveStatus s);

struct KktResiduals {
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
  double d4 = 0.0;
  double pobj = 0.0;
  double dobj = 0.0;

  double max() const { return std::max(std::max(d1, d2), std::max(d3, d4)); }
};

KktResiduals kkt_residuals(const ProblemData& p, const Vec& x1, const Vec& x2, const Vec& x3, const Vec& y);

/// (H x1 - H y; -b + A y; x3 - Pi_K(x3 - y); H x1 - A^T x2 - x3 + c).
Vec natural_map(const ProblemData& p, const Vec& x1, const Vec& x2, const Vec& x3, const Vec& y);

struct Iterate {
  Vec x1;
  Vec x2;
  Vec x3;
  Vec y;
  double sigma = 1.0;
};

/// Start point x = 0, y = 0.
Iterate zero_iterate(const ProblemData& p, double sigma);

/// Right-hand side of criterion (A') at a candidate (x1, x2, y+):
///   (eps_k^2 / sigma) / C_k * min{1, 1 / (||H y+|| + ||y+ - y|| / sigma + 1 / sigma)}
/// with C_k = 1 + ||(x1, x2, y+)|| + ||y+||. Criterion (B') is this value with
/// delta_k in place of eps_k, times ||y+ - y||^2.
double criterion_threshold(const ProblemData& p, const Vec& x1, const Vec& x2, const Vec& y_plus, const Vec& y,
                           double sigma, double eps_k);

/// What one outer step did.
struct OuterReport {
  int k = 0;
  double sigma = 0.0;
  double psi = 0.0;
  double grad_norm = 0.0;
  double threshold = 0.0;       // the criterion value at the accepted point
  double threshold_a = 0.0;     // (A') right-hand side at the accepted point
  bool criterion_met = false;   // grad_norm <= threshold
  int tightenings = 0;
  int newton_iters = 0;
  int krylov_iters = 0;
  InnerStatus inner_status = InnerStatus::Converged;
  std::string inner_message;
  std::vector<InnerStepRecord> steps;
  KktResiduals kkt;
};

/// One step of the inexact ALM from `it` with penalty it.sigma. Returns the
/// new iterate (sigma unchanged) with x3 = Pi_K(ytilde), y+ = Pi_K(-sigma ytilde).
Iterate outer_step(const ProblemData& p, const Iterate& it, const AlmOptions& opts, int k,
                   double lambda_max_estimate, OuterReport* report = nullptr);

enum class VectorStatus { Zero, Interior, Boundary };

const char* to_string(VectorStatus s);

struct BlockComplementarity {
  Index block = 0;  // SOC ordinal
  VectorStatus x3_status = VectorStatus::Zero;
  VectorStatus y_status = VectorStatus::Zero;
  std::string classification;  // both-boundary-nonzero | one-interior-one-zero | degenerate
  bool strict = false;
  double margin = 0.0;         // (y + x3)_0 - ||(y + x3)_t||
  double inner_product = 0.0;  // <x3_i, y_i>
};

struct SolveResult {
  Vec x1;
  Vec x2;
  Vec x3;
  Vec y;
  double sigma = 0.0;
  KktResiduals kkt;
  double natural_map_norm = 0.0;
  SolveStatus status = SolveStatus::MaxIterations;
  int outer_iters = 0;
  int newton_iters = 0;
  int krylov_iters = 0;
  double solve_seconds = 0.0;
  std::string message;
  std::vector<OuterReport> history;
  std::vector<BlockComplementarity> complementarity;
};

std::vector<BlockComplementarity> diagnose_strict_complementarity(const ProblemData& p, const Vec& x3, const Vec& y);
std::vector<BlockComplementarity> diagnose_strict_complementarity(const ProblemData& p, const SolveResult& r);

/// Called after every outer step with the iterates before and after it.
using IterationCallback =
    std::function<void(const OuterReport& report, const Iterate& before, const Iterate& after)>;

/// Fixed-width log line: iter, sigma, psi, gnorm, newton, d1, d2, d3, d4.
std::string log_header();
std::string log_line(const OuterReport& r);

/// Runs the inexact ALM until max(Delta1..Delta4) < tol or max_outer steps.
SolveResult solve(const ProblemData& p, const AlmOptions& opts = {}, const IterationCallback& callback = {},
                  std::optional<Iterate> start = std::nullopt);

}  // namespace socpalm

#pragma once

#include <socpalm/alm.hpp>
#include <socpalm/problem.hpp>

#include <cstdint>
#include <random>
#include <string>

namespace socpalm {

// ---------------------------------------------------------------------------
// Deterministic random numbers
// ---------------------------------------------------------------------------

struct PrandStep {
  int state = 0;
  double value = 0.0;  // state / 40.96, in [0, 100)
};

/// p_{i+1} = (445 p_i + 1) mod 4096. The sequence used for MEB data starts at p0 = 7.
PrandStep prand_next(int state);

inline constexpr int kPrandSeed = 7;

/// Standard normals from a 64-bit LCG (MMIX constants, top 53 bits,
/// Box-Muller cosine branch). Identical streams on every platform with IEEE
/// doubles and a correctly rounded libm.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on (0, 1).
  double uniform();
  double normal();

 private:
  std::linear_congruential_engine<std::uint64_t, 6364136223846793005ULL, 1442695040888963407ULL, 0ULL> engine_;
};

// ---------------------------------------------------------------------------
// Minimal enclosing ball
// ---------------------------------------------------------------------------

struct MebInstance {
  Index m = 0;
  Index d = 0;
  Mat centers;  // d x m
  Vec radii;    // m
};

struct MebProblem {
  MebInstance instance;
  ProblemData problem;
};

/// Balls B(c_i, r_i); x2 = (r; z) in the resulting problem.
MebProblem build_meb(const Mat& centers, const Vec& radii);

/// m balls in R^d with radius and coordinates filled in the order
/// r1, (c1)_1, ..., (c1)_d, r2, ... from the sequence above.
MebProblem gen_meb(Index m, Index d);

struct MebSolution {
  Vec center;
  double radius = 0.0;
};

MebSolution extract_meb_solution(const MebInstance& inst, const SolveResult& result);

/// max_i (||z - c_i|| + r_i) - radius; <= 0 means every ball is covered.
double meb_covering_gap(const MebInstance& inst, const MebSolution& sol);

// ---------------------------------------------------------------------------
// Trust-region subproblem  min 1/2 <y, H y> + <c, y>  s.t. ||y|| <= 1
// ---------------------------------------------------------------------------

struct TrsInstance {
  Mat H;
  Vec c;
  double lambda_h = 0.0;  // smallest eigenvalue of H
  Vec eigvec;             // unit eigenvector for lambda_h
  double shift = 0.0;     // min(lambda_h, 0)
};

struct TrsProblem {
  TrsInstance instance;
  ProblemData problem;
};

struct EigenPair {
  double value = 0.0;
  Vec vector;
};

/// Smallest eigenpair of a symmetric matrix: dense eigensolver for d <= 500,
/// restarted Lanczos with full reorthogonalization otherwise. Throws
/// std::runtime_error when Lanczos does not converge in 5000 products.
EigenPair smallest_eigenpair(const Mat& h);

/// Variables (s, y) in K^{d+1}, A = (1, 0), b = 1, c = (0, c),
/// quadratic term blockdiag(0, H - min(lambda_h, 0) I).
TrsProblem build_trs(const Mat& h, const Vec& c);

/// H = P diag(e) P^T with P uniform on [0, 1)^{d x d} and e standard normal
/// (one entry made negative if none is), c standard normal.
struct TrsData {
  Mat H;
  Vec c;
};
TrsData generate_trs(Index d, std::uint64_t seed);

struct TrsSolution {
  Vec y;
  double value = 0.0;  // 1/2 <y, H y> + <c, y>
  bool corrected = false;
};

TrsSolution extract_trs_solution(const TrsInstance& inst, const SolveResult& result);

// ---------------------------------------------------------------------------
// Square-root Lasso  min ||B x - w|| + lambda ||x||_1
// ---------------------------------------------------------------------------

struct SrLassoInstance {
  Mat B;
  Vec w;
  double lambda = 0.0;
};

struct SrLassoProblem {
  SrLassoInstance instance;
  ProblemData problem;
};

/// Variables (p, q, t, z) in R+^d x R+^d x K^{m+1}, A = (B, -B, 0, -I),
/// c = (lambda e, lambda e, 1, 0), b = w.
SrLassoProblem build_srlasso(const Mat& b, const Vec& w, double lambda);

/// x = p - q.
Vec extract_srlasso_solution(const SrLassoInstance& inst, const SolveResult& result);

double srlasso_objective(const SrLassoInstance& inst, const Vec& x);

struct SrLassoCertificate {
  bool applicable = false;       // false when B x = w up to residual_tol (the subgradient is not unique)
  double support_violation = 0;  // max |(B^T g)_i + lambda sign(x_i)| on the support
  double off_violation = 0;      // max (|(B^T g)_i| - lambda)_+ off the support
  Index support_size = 0;
};

/// Closed-form subgradient g = (Bx - w) / ||Bx - w|| of the residual norm.
/// The support is {i : |x_i| > support_tol * max(1, ||x||_inf)}. Not applicable
/// when ||Bx - w|| <= residual_tol * max(1, ||w||).
SrLassoCertificate srlasso_certificate(const SrLassoInstance& inst, const Vec& x, double support_tol = 1e-6,
                                       double residual_tol = 1e-6);

/// Inverse standard normal CDF (rational approximation plus one Halley step).
double inverse_normal_cdf(double p);

/// lambda = 1.1 * Phi^{-1}(1 - 1 / (40 n)) * lambda_c.
double lambda_from_lambda_c(double lambda_c, Index n);

struct CsvData {
  Mat B;
  Vec w;
  bool had_header = false;
};

/// Numeric CSV, last column w, remaining columns one row of B; an optional
/// single header line is detected automatically.
CsvData read_csv(const std::string& path);

struct SyntheticRegression {
  Mat B;
  Vec w;
  Vec x_true;
};

/// B with N(0, 1/m) entries, a sparse x_true, w = B x_true + noise_level * N(0, 1).
SyntheticRegression generate_regression(Index m, Index d, Index nonzeros, double noise_level, std::uint64_t seed);

}  // namespace socpalm

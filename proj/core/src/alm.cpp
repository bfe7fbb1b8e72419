#include <socpalm/alm.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

namespace socpalm {

void AlmOptions::validate() const {
  require(tol > 0.0, "alm options: tol must be positive");
  require(max_outer >= 0, "alm options: max_outer must be >= 0");
  require(!sigma0 || *sigma0 > 0.0, "alm options: sigma0 must be positive");
  require(sigma_growth > 1.0, "alm options: sigma growth factor must exceed 1");
  require(sigma_max > 0.0, "alm options: sigma_max must be positive");
  require(eps_scale > 0.0 && eps_ratio > 0.0 && eps_ratio < 1.0,
          "alm options: eps sequence must be positive and geometric with ratio in (0, 1)");
  require(delta_scale > 0.0 && delta_ratio > 0.0 && delta_ratio < 1.0,
          "alm options: delta sequence must be positive and geometric with ratio in (0, 1)");
  require(max_threshold_tightenings >= 0, "alm options: max_threshold_tightenings must be >= 0");
  newton.validate();
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::MaxIterations:
      return "max_iterations";
    case SolveStatus::Stagnation:
      return "stagnation";
    case SolveStatus::LinearSolveFailure:
      return "linear_solve_failure";
  }
  return "?";
}

namespace {

void check_point(const ProblemData& p, const Vec& x1, const Vec& x2, const Vec& x3, const Vec& y) {
  require(x1.size() == p.n() && x3.size() == p.n() && y.size() == p.n(),
          "kkt: x1, x3 and y must have length n = " + std::to_string(p.n()));
  require(x2.size() == p.m(), "kkt: x2 must have length m = " + std::to_string(p.m()));
}

Vec apply_h(const ProblemData& p, const Vec& v) { return p.linear() ? Vec::Zero(p.n()) : Vec(p.H().full() * v); }

}  // namespace

KktResiduals kkt_residuals(const ProblemData& p, const Vec& x1, const Vec& x2, const Vec& x3, const Vec& y) {
  check_point(p, x1, x2, x3, y);
  const Vec hx1 = apply_h(p, x1);
  const Vec hy = apply_h(p, y);
  KktResiduals r;
  r.d1 = std::sqrt((p.A() * y - p.b()).squaredNorm() + (hx1 - hy).squaredNorm()) /
         (1.0 + p.b_norm() + p.h_frobenius());
  r.d2 = (x3 - project(p.cone(), x3 - y)).norm() / (1.0 + y.norm() + x3.norm());
  r.d3 = (-hx1 + p.A().transpose() * x2 + x3 - p.c()).norm() / (1.0 + p.c_norm());
  r.pobj = 0.5 * x1.dot(hx1) - p.b().dot(x2);
  r.dobj = -0.5 * y.dot(hy) - p.c().dot(y);
  r.d4 = std::abs(r.pobj - r.dobj) / (1.0 + std::abs(r.pobj) + std::abs(r.dobj));
  return r;
}

Vec natural_map(const ProblemData& p, const Vec& x1, const Vec& x2, const Vec& x3, const Vec& y) {
  check_point(p, x1, x2, x3, y);
  const Vec hx1 = apply_h(p, x1);
  const Index n = p.n(), m = p.m();
  Vec out(3 * n + m);
  out.segment(0, n) = hx1 - apply_h(p, y);
  out.segment(n, m) = p.A() * y - p.b();
  out.segment(n + m, n) = x3 - project(p.cone(), x3 - y);
  out.segment(2 * n + m, n) = hx1 - p.A().transpose() * x2 - x3 + p.c();
  return out;
}

Iterate zero_iterate(const ProblemData& p, double sigma) {
  return {Vec::Zero(p.n()), Vec::Zero(p.m()), Vec::Zero(p.n()), Vec::Zero(p.n()), sigma};
}

double criterion_threshold(const ProblemData& p, const Vec& x1, const Vec& x2, const Vec& y_plus, const Vec& y,
                           double sigma, double eps_k) {
  const double xt = std::sqrt(x1.squaredNorm() + x2.squaredNorm() + y_plus.squaredNorm());
  const double ck = 1.0 + xt + y_plus.norm();
  const double denom = apply_h(p, y_plus).norm() + (y_plus - y).norm() / sigma + 1.0 / sigma;
  return (eps_k * eps_k / sigma) / ck * std::min(1.0, 1.0 / denom);
}

Iterate outer_step(const ProblemData& p, const Iterate& it, const AlmOptions& opts, int k,
                   double lambda_max_estimate, OuterReport* report) {
  const double sigma = it.sigma;
  const double eps_k = opts.eps_scale * std::pow(opts.eps_ratio, k);
  const double delta_k = opts.delta_scale * std::pow(opts.delta_ratio, k);

  // Rounding level of the gradient at a state: errors in arg carry through the
  // projection into A proj and H proj. (B') shrinks with ||y+ - y||^2 and can
  // fall below it; (A') is never relaxed.
  const double a_fro = p.A().norm();
  const double h_fro = p.linear() ? 0.0 : p.H().full().norm();
  const double y_norm = it.y.norm(), c_norm = p.c().norm();
  auto floor_of = [&](const InnerState& s) {
    const double arg_scale = y_norm + sigma * (a_fro * s.x2.norm() + h_fro * s.x1.norm() + c_norm);
    return 4.0 * std::numeric_limits<double>::epsilon() *
           (p.b().norm() + (a_fro + h_fro) * (s.proj.norm() + arg_scale) + h_fro * s.x1.norm());
  };

  auto thresholds = [&](const InnerState& s, double& a_value) {
    a_value = criterion_threshold(p, s.x1, s.x2, s.proj, it.y, sigma, eps_k);
    if (!opts.use_criterion_b) return a_value;
    const double b_value =
        criterion_threshold(p, s.x1, s.x2, s.proj, it.y, sigma, delta_k) * (s.proj - it.y).squaredNorm();
    return std::min(a_value, std::max(b_value, floor_of(s)));
  };

  InnerState state = make_inner_state(p, it.y, sigma, it.x1, it.x2);
  double a_value = 0.0;
  double thr = thresholds(state, a_value);
  InnerOptions iopts;
  iopts.check_newton_residual = opts.check_newton_residuals;

  OuterReport rep;
  rep.k = k;
  rep.sigma = sigma;
  InnerResult inner;
  for (int t = 0;; ++t) {
    inner = run_inner(p, it.y, sigma, std::move(state), thr, opts.newton, lambda_max_estimate, iopts);
    rep.newton_iters += inner.newton_iters;
    rep.krylov_iters += inner.krylov_iters;
    rep.steps.insert(rep.steps.end(), inner.steps.begin(), inner.steps.end());
    state = std::move(inner.state);

    // The criterion depends on the candidate y+; re-evaluate it there.
    const double actual = thresholds(state, a_value);
    rep.threshold = actual;
    if (state.grad_norm() <= actual) break;
    if (inner.status != InnerStatus::Converged || t >= opts.max_threshold_tightenings) break;
    if (opts.use_criterion_b) {
      // (B') tends to 0 with y+ - y; it is moot once the candidate solves the KKT system.
      const Vec x3 = project(p.cone(), -state.arg / sigma);
      if (kkt_residuals(p, state.x1, state.x2, x3, state.proj).max() < opts.tol) break;
    }
    thr = std::min(0.5 * thr, actual);
    ++rep.tightenings;
  }

  Iterate next;
  next.x1 = state.x1;
  next.x2 = state.x2;
  next.x3 = project(p.cone(), -state.arg / sigma);
  next.y = state.proj;
  next.sigma = sigma;

  rep.psi = state.psi;
  rep.grad_norm = state.grad_norm();
  rep.threshold_a = a_value;
  rep.criterion_met = rep.grad_norm <= rep.threshold;
  rep.inner_status = inner.status;
  rep.inner_message = inner.message;
  rep.kkt = kkt_residuals(p, next.x1, next.x2, next.x3, next.y);
  if (report) *report = std::move(rep);
  return next;
}

const char* to_string(VectorStatus s) {
  switch (s) {
    case VectorStatus::Zero:
      return "zero";
    case VectorStatus::Interior:
      return "interior";
    case VectorStatus::Boundary:
      return "boundary";
  }
  return "?";
}

std::vector<BlockComplementarity> diagnose_strict_complementarity(const ProblemData& p, const Vec& x3, const Vec& y) {
  require(x3.size() == p.n() && y.size() == p.n(), "complementarity: x3 and y must have length n");
  std::vector<BlockComplementarity> out;
  Index ordinal = 0;
  for (const ConeBlock& blk : p.cone().blocks()) {
    if (blk.kind != BlockKind::SecondOrder) continue;
    const auto xb = x3.segment(blk.offset, blk.dim);
    const auto yb = y.segment(blk.offset, blk.dim);
    const double tol = 1e-6 * (1.0 + xb.norm() + yb.norm());
    auto classify = [&](const auto& v) {
      if (v.norm() <= tol) return VectorStatus::Zero;
      return v[0] - v.tail(blk.dim - 1).norm() > tol ? VectorStatus::Interior : VectorStatus::Boundary;
    };
    BlockComplementarity bc;
    bc.block = ordinal++;
    bc.x3_status = classify(xb);
    bc.y_status = classify(yb);
    const Vec sum = xb + yb;
    bc.margin = sum[0] - sum.tail(blk.dim - 1).norm();
    bc.strict = bc.margin > tol;
    bc.inner_product = xb.dot(yb);
    const bool both_boundary = bc.x3_status == VectorStatus::Boundary && bc.y_status == VectorStatus::Boundary;
    const bool interior_zero = (bc.x3_status == VectorStatus::Interior && bc.y_status == VectorStatus::Zero) ||
                               (bc.x3_status == VectorStatus::Zero && bc.y_status == VectorStatus::Interior);
    bc.classification = both_boundary ? "both-boundary-nonzero" : interior_zero ? "one-interior-one-zero" : "degenerate";
    out.push_back(std::move(bc));
  }
  return out;
}

std::vector<BlockComplementarity> diagnose_strict_complementarity(const ProblemData& p, const SolveResult& r) {
  return diagnose_strict_complementarity(p, r.x3, r.y);
}

std::string log_header() {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%5s %10s %16s %10s %6s %10s %10s %10s %10s", "iter", "sigma", "psi", "gnorm",
                "newton", "d1", "d2", "d3", "d4");
  return buf;
}

std::string log_line(const OuterReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%5d %10.3e %16.9e %10.3e %6d %10.3e %10.3e %10.3e %10.3e", r.k, r.sigma, r.psi,
                r.grad_norm, r.newton_iters, r.kkt.d1, r.kkt.d2, r.kkt.d3, r.kkt.d4);
  return buf;
}

SolveResult solve(const ProblemData& p, const AlmOptions& opts, const IterationCallback& callback,
                  std::optional<Iterate> start) {
  opts.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const double lam = p.linear() ? 0.0 : estimate_lambda_max(p.H());
  const double sigma0 = opts.sigma0 ? *opts.sigma0 : (p.linear() ? 1.0 : 1.0 / std::max(1.0, lam));

  Iterate it = start ? *start : zero_iterate(p, sigma0);
  if (!start) it.sigma = sigma0;
  require(it.sigma > 0.0, "solve: starting sigma must be positive");

  SolveResult res;
  res.kkt = kkt_residuals(p, it.x1, it.x2, it.x3, it.y);
  if (res.kkt.max() < opts.tol) {
    res.status = SolveStatus::Optimal;
  } else {
    res.status = SolveStatus::MaxIterations;
    int failures = 0;
    for (int k = 0; k < opts.max_outer; ++k) {
      OuterReport rep;
      Iterate next = outer_step(p, it, opts, k, lam, &rep);
      ++res.outer_iters;
      res.newton_iters += rep.newton_iters;
      res.krylov_iters += rep.krylov_iters;
      res.kkt = rep.kkt;
      if (callback) callback(rep, it, next);
      it = std::move(next);
      const InnerStatus inner = rep.inner_status;
      const std::string message = rep.inner_message;
      const double d1 = rep.kkt.d1, d2 = rep.kkt.d2, d3 = rep.kkt.d3;
      res.history.push_back(std::move(rep));

      if (res.kkt.max() < opts.tol) {
        res.status = SolveStatus::Optimal;
        break;
      }
      if (inner == InnerStatus::LinearSolveFailure) {
        res.status = SolveStatus::LinearSolveFailure;
        res.message = message;
        break;
      }
      failures = inner == InnerStatus::Converged ? 0 : failures + 1;
      if (failures >= 5) {
        res.status = SolveStatus::Stagnation;
        res.message = "inner solves failed in 5 consecutive outer iterations (last: " + message + ")";
        break;
      }
      if (d3 > std::max(d1, d2)) it.sigma = std::min(opts.sigma_growth * it.sigma, opts.sigma_max);
    }
  }
  if (res.status == SolveStatus::MaxIterations && res.message.empty()) res.message = "outer iteration limit reached";

  res.x1 = std::move(it.x1);
  res.x2 = std::move(it.x2);
  res.x3 = std::move(it.x3);
  res.y = std::move(it.y);
  res.sigma = it.sigma;
  res.natural_map_norm = natural_map(p, res.x1, res.x2, res.x3, res.y).norm();
  res.complementarity = diagnose_strict_complementarity(p, res.x3, res.y);
  res.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace socpalm

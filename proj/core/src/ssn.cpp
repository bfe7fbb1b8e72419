#include <socpalm/ssn.hpp>

#include <cmath>
#include <limits>
#include <utility>

namespace socpalm {

void NewtonParams::validate() const {
  require(nu_hat > 0.0 && nu_hat < 1.0, "newton params: nu_hat must lie in (0, 1)");
  require(tau > 0.0 && tau <= 1.0, "newton params: tau must lie in (0, 1]");
  require(tau1 > 0.0 && tau1 < 1.0, "newton params: tau1 must lie in (0, 1)");
  require(tau2 > 0.0 && tau2 < 1.0, "newton params: tau2 must lie in (0, 1)");
  require(mu > 0.0 && mu < 0.5, "newton params: mu must lie in (0, 1/2)");
  require(delta > 0.0 && delta < 1.0, "newton params: delta must lie in (0, 1)");
  require(max_newton_iters >= 0, "newton params: max_newton_iters must be >= 0");
  require(max_linesearch_steps >= 0, "newton params: max_linesearch_steps must be >= 0");
}

namespace {

/// Fills psi and the gradient from x1, x2, hx1, atx2 (arg and proj are recomputed).
void refresh(const ProblemData& p, const Vec& y, double sigma, InnerState& s) {
  s.arg = y + sigma * (s.atx2 - s.hx1 - p.c());
  project_into(p.cone(), s.arg, s.proj);
  s.psi = 0.5 * s.x1.dot(s.hx1) - p.b().dot(s.x2) + (s.proj.squaredNorm() - y.squaredNorm()) / (2.0 * sigma);
  if (p.linear()) {
    s.g1 = Vec::Zero(p.n());
  } else {
    s.g1 = s.hx1 - p.H().full() * s.proj;
  }
  s.g2 = p.A() * s.proj - p.b();
}

}  // namespace

InnerState make_inner_state(const ProblemData& p, const Vec& y, double sigma, Vec x1, Vec x2) {
  require(sigma > 0.0, "inner problem: sigma must be positive");
  require(y.size() == p.n(), "inner problem: y has the wrong length");
  if (x1.size() == 0) x1 = Vec::Zero(p.n());
  if (x2.size() == 0) x2 = Vec::Zero(p.m());
  require(x1.size() == p.n() && x2.size() == p.m(), "inner problem: x1 or x2 has the wrong length");
  InnerState s;
  s.x1 = std::move(x1);
  s.x2 = std::move(x2);
  s.hx1 = p.linear() ? Vec::Zero(p.n()) : Vec(p.H().full() * s.x1);
  s.atx2 = p.A().transpose() * s.x2;
  refresh(p, y, sigma, s);
  return s;
}

PsiGrad psi_and_grad(const ProblemData& p, const Vec& x1, const Vec& x2, const Vec& y, double sigma) {
  InnerState s = make_inner_state(p, y, sigma, x1, x2);
  return {s.psi, std::move(s.g1), std::move(s.g2)};
}

NewtonDirection newton_direction(const ProblemData& p, const InnerState& state, double sigma,
                                 const NewtonParams& params, double lambda_max_estimate) {
  NewtonDirection dir;
  const double gn = state.grad_norm();
  dir.d1 = Vec::Zero(p.n());
  dir.d2 = Vec::Zero(p.m());
  dir.eps = params.tau1 * std::min(params.tau2, gn);
  dir.nu = std::min(params.nu_hat, std::pow(gn, 1.0 + params.tau));
  if (gn == 0.0) {
    dir.stats.converged = true;
    return dir;
  }
  const JacobianElement jac = jacobian_element(p.cone(), state.arg);

  auto attempt = [&](double eps) {
    if (p.linear()) {
      NewtonSystem sys = NewtonSystem::assemble_linear(p.A(), jac, sigma, eps, params.linsys);
      SpdSolution sol = solve_spd(sys, -state.g2, dir.nu, params.linsys);
      dir.d2 = std::move(sol.d);
      dir.stats = std::move(sol.stats);
      return;
    }
    // Shift d1 = R1 + e1 with R1 = proj - x1, so the right-hand side is O(||grad||):
    //   (I + sVH) e1 - sVA^T d2 = s V g1,  -sAVH e1 + (eps + sAVA^T) d2 = -g2 - sAVg1.
    const Vec vg1 = jac.apply(state.g1);
    const Vec r1 = sigma * vg1;
    const Vec r2 = -state.g2 - sigma * (p.A() * vg1);
    QuadraticSolution sol = solve_quadratic(p.H(), p.A(), jac, sigma, eps, r1, r2, dir.nu, lambda_max_estimate,
                                            params.linsys);
    dir.d1 = (state.proj - state.x1) + sol.d1;
    dir.d2 = std::move(sol.d2);
    dir.stats = std::move(sol.stats);
  };

  try {
    attempt(dir.eps);
  } catch (const LinearSolveError&) {
    dir.eps *= 10.0;
    dir.escalated = true;
    attempt(dir.eps);
  }
  return dir;
}

double newton_residual(const ProblemData& p, const InnerState& state, double sigma, double eps, const Vec& d1,
                       const Vec& d2) {
  const JacobianElement jac = jacobian_element(p.cone(), state.arg);
  const Vec hd1 = p.linear() ? Vec::Zero(p.n()) : Vec(p.H().full() * d1);
  const Vec vt = jac.apply(hd1 - p.A().transpose() * d2);
  Vec r1 = state.g1;
  if (!p.linear()) r1 += hd1 + sigma * (p.H().full() * vt);
  const Vec r2 = state.g2 + eps * d2 - sigma * (p.A() * vt);
  return std::sqrt(r1.squaredNorm() + r2.squaredNorm());
}

int armijo_exponent(const std::function<double(double)>& phi_diff, double slope, double mu, double delta,
                    int max_steps) {
  double alpha = 1.0;
  for (int m = 0; m <= max_steps; ++m) {
    if (phi_diff(alpha) <= mu * alpha * slope) return m;
    alpha *= delta;
  }
  return -1;
}

LineSearchResult line_search(const ProblemData& p, const Vec& y, double sigma, const InnerState& state, Vec d1,
                             Vec d2, const NewtonParams& params) {
  LineSearchResult res;
  const double gn = state.grad_norm();
  if (gn == 0.0) {
    res.state = state;
    return res;
  }
  double dn = std::sqrt(d1.squaredNorm() + d2.squaredNorm());
  double gd = state.g1.dot(d1) + state.g2.dot(d2);
  if (!(gd < -1e-18 * gn * dn)) {
    d1 = -state.g1;
    d2 = -state.g2;
    gd = -gn * gn;
    res.steepest_fallback = true;
  }
  res.directional = gd;

  const Vec hd1 = p.linear() ? Vec::Zero(p.n()) : Vec(p.H().full() * d1);
  const Vec atd2 = p.A().transpose() * d2;
  const Vec shift = sigma * (atd2 - hd1);
  const double x1hd1 = state.x1.dot(hd1);
  const double d1hd1 = d1.dot(hd1);
  const double bd2 = p.b().dot(d2);

  const double u = std::numeric_limits<double>::epsilon();
  const double noise = 8.0 * u *
                       (state.arg.norm() * state.proj.norm() / sigma + std::abs(x1hd1) + std::abs(d1hd1) +
                        std::abs(bd2));
  if (-gd <= noise) {
    res.residual_test = true;
    for (int j = 0; j <= params.max_linesearch_steps; ++j) {
      const double a = std::pow(params.delta, j);
      InnerState next;
      next.x1 = state.x1 + a * d1;
      next.x2 = state.x2 + a * d2;
      next.hx1 = state.hx1 + a * hd1;
      next.atx2 = state.atx2 + a * atd2;
      refresh(p, y, sigma, next);
      if (next.grad_norm() <= (1.0 - params.mu * a) * gn) {
        res.alpha = a;
        res.steps = j;
        res.decrease = next.psi - state.psi;
        res.state = std::move(next);
        return res;
      }
    }
    res.steps = params.max_linesearch_steps;
    res.status = LineSearchStatus::NoDecrease;
    res.alpha = 0.0;
    res.state = state;
    return res;
  }

  // psi(x + a d) - psi(x), evaluated as a difference to avoid cancellation.
  Vec trial_arg, trial_proj;
  double best_alpha = 0.0, best_diff = 0.0;
  auto diff = [&](double a) {
    trial_arg = state.arg + a * shift;
    project_into(p.cone(), trial_arg, trial_proj);
    const double quad = a * x1hd1 + 0.5 * a * a * d1hd1 - a * bd2;
    const double proj_part = (trial_proj - state.proj).dot(trial_proj + state.proj) / (2.0 * sigma);
    const double v = quad + proj_part;
    if (v < best_diff) {
      best_diff = v;
      best_alpha = a;
    }
    return v;
  };

  const int m = armijo_exponent(diff, gd, params.mu, params.delta, params.max_linesearch_steps);
  double alpha;
  if (m >= 0) {
    alpha = std::pow(params.delta, m);
    res.steps = m;
    res.status = LineSearchStatus::Accepted;
  } else if (best_alpha > 0.0) {
    alpha = best_alpha;
    res.steps = params.max_linesearch_steps;
    res.status = LineSearchStatus::BestEffort;
  } else {
    res.steps = params.max_linesearch_steps;
    res.status = LineSearchStatus::NoDecrease;
    res.alpha = 0.0;
    res.state = state;
    return res;
  }
  res.alpha = alpha;
  res.decrease = diff(alpha);

  InnerState next;
  next.x1 = state.x1 + alpha * d1;
  next.x2 = state.x2 + alpha * d2;
  next.hx1 = state.hx1 + alpha * hd1;
  next.atx2 = state.atx2 + alpha * atd2;
  refresh(p, y, sigma, next);
  res.state = std::move(next);
  return res;
}

const char* to_string(InnerStatus s) {
  switch (s) {
    case InnerStatus::Converged:
      return "converged";
    case InnerStatus::MaxIterations:
      return "max_iterations";
    case InnerStatus::Stagnation:
      return "stagnation";
    case InnerStatus::LineSearchFailure:
      return "line_search_failure";
    case InnerStatus::LinearSolveFailure:
      return "linear_solve_failure";
  }
  return "?";
}

InnerResult run_inner(const ProblemData& p, const Vec& y, double sigma, InnerState start, double stop_threshold,
                      const NewtonParams& params, double lambda_max_estimate, const InnerOptions& opts) {
  require(stop_threshold > 0.0, "run_inner: stop threshold must be positive");
  params.validate();
  InnerResult out;
  out.state = std::move(start);
  int tiny_steps = 0;

  for (;;) {
    const double gn = out.state.grad_norm();
    if (gn <= stop_threshold) {
      out.status = InnerStatus::Converged;
      break;
    }
    if (out.newton_iters >= params.max_newton_iters) {
      out.status = InnerStatus::MaxIterations;
      out.message = "newton iteration limit reached";
      break;
    }
    NewtonDirection dir;
    try {
      dir = newton_direction(p, out.state, sigma, params, lambda_max_estimate);
    } catch (const LinearSolveError& e) {
      out.status = InnerStatus::LinearSolveFailure;
      out.message = e.what();
      break;
    }
    out.krylov_iters += dir.stats.krylov_iterations;

    InnerStepRecord rec;
    rec.psi_old = out.state.psi;
    rec.grad_norm = gn;
    rec.eps = dir.eps;
    rec.nu = dir.nu;
    if (opts.check_newton_residual) rec.newton_residual = newton_residual(p, out.state, sigma, dir.eps, dir.d1, dir.d2);

    LineSearchResult ls = line_search(p, y, sigma, out.state, dir.d1, dir.d2, params);
    out.linesearch_steps += ls.steps;
    if (ls.status == LineSearchStatus::NoDecrease) {
      out.status = InnerStatus::LineSearchFailure;
      out.message = "no decrease along the search direction";
      break;
    }
    const double step = ls.alpha * std::sqrt(dir.d1.squaredNorm() + dir.d2.squaredNorm());
    rec.alpha = ls.alpha;
    rec.directional = ls.directional;
    rec.decrease = ls.decrease;
    rec.linesearch_steps = ls.steps;
    rec.steepest_fallback = ls.steepest_fallback;
    rec.residual_test = ls.residual_test;
    out.state = std::move(ls.state);
    rec.psi_new = out.state.psi;
    out.steps.push_back(rec);
    ++out.newton_iters;

    tiny_steps = step < 1e-16 ? tiny_steps + 1 : 0;
    if (tiny_steps >= 3) {
      out.status = out.state.grad_norm() <= stop_threshold ? InnerStatus::Converged : InnerStatus::Stagnation;
      if (out.status == InnerStatus::Stagnation) out.message = "step lengths below 1e-16";
      break;
    }
  }
  out.x3 = project(p.cone(), -out.state.arg / sigma);
  return out;
}

}  // namespace socpalm

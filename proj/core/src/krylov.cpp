#include <socpalm/krylov.hpp>

#include <cmath>

namespace socpalm {

namespace {

void apply_or_copy(const LinearOperator& op, const Vec& x, Vec& y) {
  if (op) {
    op(x, y);
  } else {
    y = x;
  }
}

}  // namespace

KrylovResult psqmr(const LinearOperator& apply_a, const LinearOperator& precond, const Vec& b, Vec& x,
                   const KrylovOptions& opts) {
  KrylovResult out;
  const Index n = b.size();
  if (x.size() != n) x = Vec::Zero(n);

  Vec ax;
  apply_a(x, ax);
  Vec r = b - ax;
  Vec res = r;  // true residual, updated recursively
  double err = res.norm();
  out.residual = err;
  out.history.push_back(err);
  if (err <= opts.tol) {
    out.converged = true;
    return out;
  }

  Vec q;
  apply_or_copy(precond, r, q);
  double tau_old = q.norm();
  double rho_old = r.dot(q);
  double theta_old = 0.0;
  Vec d = Vec::Zero(n);
  Vec ad = Vec::Zero(n);
  Vec aq, u;

  Vec best_x = x;
  double best_err = err;

  for (int it = 1; it <= opts.max_iter; ++it) {
    apply_a(q, aq);
    const double sigma = q.dot(aq);
    if (sigma == 0.0 || !std::isfinite(sigma)) break;
    const double alpha = rho_old / sigma;
    r -= alpha * aq;
    apply_or_copy(precond, r, u);

    const double theta = u.norm() / tau_old;
    const double c = 1.0 / std::sqrt(1.0 + theta * theta);
    const double tau = tau_old * theta * c;
    const double gam = c * c * theta_old * theta_old;
    const double eta = c * c * alpha;
    d = gam * d + eta * q;
    x += d;
    ad = gam * ad + eta * aq;
    res -= ad;
    err = res.norm();
    out.iterations = it;
    out.history.push_back(std::min(out.history.back(), tau));
    if (err < best_err) {
      best_err = err;
      best_x = x;
    }
    if (err <= opts.tol) break;
    if (!std::isfinite(err)) break;

    const double rho = r.dot(u);
    if (rho_old == 0.0) break;
    const double beta = rho / rho_old;
    q = u + beta * q;
    rho_old = rho;
    tau_old = tau;
    theta_old = theta;
  }

  // The recursive residual can drift; report the true one of the best iterate.
  if (best_err < err || !std::isfinite(err)) x = best_x;
  apply_a(x, ax);
  out.residual = (b - ax).norm();
  out.converged = out.residual <= opts.tol;
  return out;
}

KrylovResult bicgstab(const LinearOperator& apply_a, const LinearOperator& precond, const Vec& b, Vec& x,
                      const KrylovOptions& opts) {
  KrylovResult out;
  const Index n = b.size();
  if (x.size() != n) x = Vec::Zero(n);

  Vec ax;
  apply_a(x, ax);
  Vec r = b - ax;
  double err = r.norm();
  out.residual = err;
  out.history.push_back(err);
  if (err <= opts.tol) {
    out.converged = true;
    return out;
  }

  Vec r_hat = r;
  double rho_old = 1.0, alpha = 1.0, omega = 1.0;
  Vec v = Vec::Zero(n), p = Vec::Zero(n);
  Vec p_hat, s, s_hat, t;
  Vec best_x = x;
  double best_err = err;

  int restarts = 0;
  bool fresh = true;
  // Restart from the best iterate with the true residual as new shadow vector.
  auto restart = [&]() {
    x = best_x;
    apply_a(x, ax);
    r = b - ax;
    r_hat = r;
    fresh = true;
    return ++restarts <= 5;
  };
  auto accept_if_true_converged = [&]() {
    apply_a(x, ax);
    const double true_err = (b - ax).norm();
    if (true_err < best_err) {
      best_err = true_err;
      best_x = x;
    }
    return true_err <= opts.tol;
  };

  for (int it = 1; it <= opts.max_iter; ++it) {
    out.iterations = it;
    const double rho = r_hat.dot(r);
    if (std::abs(rho) <= 1e-30 * r_hat.squaredNorm() || !std::isfinite(rho)) {
      if (!restart()) break;
      continue;
    }
    if (fresh) {
      p = r;
      fresh = false;
    } else {
      const double beta = (rho / rho_old) * (alpha / omega);
      p = r + beta * (p - omega * v);
    }
    rho_old = rho;
    apply_or_copy(precond, p, p_hat);
    apply_a(p_hat, v);
    const double rv = r_hat.dot(v);
    if (rv == 0.0 || !std::isfinite(rv)) {
      if (!restart()) break;
      continue;
    }
    alpha = rho / rv;
    s = r - alpha * v;
    if (s.norm() <= opts.tol) {
      x += alpha * p_hat;
      const bool done = accept_if_true_converged();
      out.history.push_back(best_err);
      if (done || !restart()) break;
      continue;
    }
    apply_or_copy(precond, s, s_hat);
    apply_a(s_hat, t);
    const double tt = t.squaredNorm();
    omega = tt > 0.0 ? t.dot(s) / tt : 0.0;
    x += alpha * p_hat + omega * s_hat;
    r = s - omega * t;
    err = r.norm();
    if (err < best_err) {
      best_err = err;
      best_x = x;
    }
    out.history.push_back(best_err);
    if (err <= opts.tol) {
      if (accept_if_true_converged() || !restart()) break;
      continue;
    }
    if (omega == 0.0 || !std::isfinite(err)) {
      if (!restart()) break;
    }
  }

  x = best_x;
  apply_a(x, ax);
  out.residual = (b - ax).norm();
  out.converged = out.residual <= opts.tol;
  return out;
}

}  // namespace socpalm

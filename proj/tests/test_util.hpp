#pragma once

#include <socpalm/socpalm.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace testutil {

using socpalm::ConeSpec;
using socpalm::Index;
using socpalm::Mat;
using socpalm::SpMat;
using socpalm::Vec;

inline Vec randn(std::mt19937_64& rng, Index n, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

inline Mat randn_mat(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> nd;
  Mat m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Optional nonneg block followed by 1..max_soc second-order blocks of dim 2..max_dim.
inline ConeSpec random_cone(std::mt19937_64& rng, int max_soc = 4, int max_dim = 6, bool allow_nonneg = true) {
  ConeSpec k;
  if (allow_nonneg && uniform_int(rng, 0, 1) == 1) k.add_nonneg(uniform_int(rng, 1, 5));
  const int nsoc = uniform_int(rng, 1, max_soc);
  for (int i = 0; i < nsoc; ++i) k.add_second_order(uniform_int(rng, 2, max_dim));
  return k;
}

/// A point whose SOC blocks fall into the requested mix of regions: interior
/// of K, interior of -K, and the middle region, chosen at random per block.
inline Vec random_point(std::mt19937_64& rng, const ConeSpec& k) {
  Vec x = randn(rng, k.total_dim());
  for (const auto& blk : k.blocks()) {
    if (blk.kind != socpalm::BlockKind::SecondOrder) continue;
    const double tn = x.segment(blk.offset + 1, blk.dim - 1).norm();
    switch (uniform_int(rng, 0, 2)) {
      case 0: x[blk.offset] = tn * uniform(rng, 1.1, 3.0); break;
      case 1: x[blk.offset] = -tn * uniform(rng, 1.1, 3.0); break;
      default: x[blk.offset] = tn * uniform(rng, -0.9, 0.9); break;
    }
  }
  return x;
}

/// Distance of every SOC block from the kinks x0 = +-||xt|| and from 0, and
/// of every nonneg entry from 0.
inline double kink_distance(const ConeSpec& k, const Vec& x) {
  double d = 1e300;
  for (const auto& blk : k.blocks()) {
    if (blk.kind == socpalm::BlockKind::NonNeg) {
      for (Index i = 0; i < blk.dim; ++i) d = std::min(d, std::abs(x[blk.offset + i]));
    } else {
      const double tn = x.segment(blk.offset + 1, blk.dim - 1).norm();
      const double x0 = x[blk.offset];
      d = std::min({d, std::abs(x0 - tn), std::abs(x0 + tn), tn});
    }
  }
  return d;
}

/// Central differences of the projection applied to v.
inline Vec fd_projection_derivative(const ConeSpec& k, const Vec& x, const Vec& v, double h = 1e-6) {
  return (socpalm::project(k, x + h * v) - socpalm::project(k, x - h * v)) / (2.0 * h);
}

inline SpMat sparse_random(std::mt19937_64& rng, Index r, Index c, double density) {
  std::vector<socpalm::Triplet> t;
  std::normal_distribution<double> nd;
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i)
      if (uniform(rng, 0.0, 1.0) < density) t.emplace_back(i, j, nd(rng));
  SpMat a(r, c);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

inline Mat random_psd(std::mt19937_64& rng, Index n, Index rank) {
  const Mat f = randn_mat(rng, n, rank);
  return f * f.transpose();
}

/// eps v + sum_i A_i (V_i (A_i^T v)), one block of columns at a time.
inline Vec blockwise_newton_apply(const SpMat& a, const socpalm::JacobianElement& jac, double sigma, double eps,
                                  const Vec& v) {
  const Vec atv = a.transpose() * v;
  Vec out = eps * v;
  for (const auto& blk : jac.cone().blocks()) {
    ConeSpec single;
    socpalm::JacobianElement part;
    if (blk.kind == socpalm::BlockKind::NonNeg) {
      single.add_nonneg(blk.dim);
      part = socpalm::JacobianElement(single, jac.nonneg_mask(), {});
    } else {
      single.add_second_order(blk.dim);
      Index ordinal = 0;
      for (const auto& other : jac.cone().blocks()) {
        if (&other == &blk) break;
        if (other.kind == socpalm::BlockKind::SecondOrder) ++ordinal;
      }
      part = socpalm::JacobianElement(single, Vec(), {jac.soc_blocks()[static_cast<std::size_t>(ordinal)]});
    }
    const Vec piece = socpalm::apply_jacobian(part, atv.segment(blk.offset, blk.dim));
    out += sigma * (a.middleCols(blk.offset, blk.dim) * piece);
  }
  return out;
}

/// Global minimizer of 1/2 y^T H y + c^T y over ||y|| <= 1 from a dense
/// eigendecomposition and bisection on the secular equation
/// sum_i chat_i^2 / (lambda_i + mu)^2 = 1, including the hard case.
struct TrsOracle {
  Vec y;
  double value = 0.0;
  double mu = 0.0;
};

inline TrsOracle trs_oracle(const Mat& h, const Vec& c) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  const Vec lam = es.eigenvalues();
  const Mat q = es.eigenvectors();
  const Vec ch = q.transpose() * c;
  const Index d = lam.size();
  const double l1 = lam[0];

  auto ynorm = [&](double mu) {
    long double s = 0;
    for (Index i = 0; i < d; ++i) {
      const long double t = ch[i] / (static_cast<long double>(lam[i]) + mu);
      s += t * t;
    }
    return static_cast<double>(std::sqrt(s));
  };
  auto y_of = [&](double mu) {
    Vec z(d);
    for (Index i = 0; i < d; ++i) z[i] = -ch[i] / (lam[i] + mu);
    return Vec(q * z);
  };

  TrsOracle out;
  const double gap_tol = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  if (l1 > gap_tol && ynorm(0.0) <= 1.0) {
    out.y = y_of(0.0);
  } else {
    const double lo0 = std::max(0.0, -l1);
    // Hard case: chat vanishes on the bottom eigenspace and the remaining part is short.
    double rest = 0.0;
    bool hard = true;
    for (Index i = 0; i < d; ++i) {
      if (lam[i] - l1 <= gap_tol) {
        if (std::abs(ch[i]) > 1e-10 * std::max(1.0, c.norm())) hard = false;
      } else {
        const double t = ch[i] / (lam[i] - l1);
        rest += t * t;
      }
    }
    if (hard && l1 <= 0.0 && std::sqrt(rest) <= 1.0) {
      Vec z = Vec::Zero(d);
      for (Index i = 0; i < d; ++i)
        if (lam[i] - l1 > gap_tol) z[i] = -ch[i] / (lam[i] - l1);
      z[0] = std::sqrt(std::max(0.0, 1.0 - rest));
      out.y = q * z;
      out.mu = -l1;
    } else {
      double lo = lo0, hi = lo0 + c.norm() + 1.0;
      for (int it = 0; it < 400 && hi > lo; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (ynorm(mid) > 1.0) lo = mid; else hi = mid;
      }
      out.mu = hi;
      out.y = y_of(hi);
    }
  }
  out.value = 0.5 * out.y.dot(h * out.y) + c.dot(out.y);
  return out;
}

inline Vec dense_solve_symmetric(const Mat& m, const Vec& rhs) {
  return m.colPivHouseholderQr().solve(rhs);
}

/// H d1 and d2 for the quadratic Newton system, from a dense solve of the
/// symmetric system restricted to Ran(H):
///   [[QᵀHQ + s QᵀHVHQ, -s QᵀHVAᵀ], [-s AVHQ, eps I + s AVAᵀ]] (z; d2) = (QᵀH R1; R2),  H d1 = H Q z.
struct RanHReference {
  Vec hd1;
  Vec d2;
  double asymmetry = 0.0;
};

inline RanHReference ranh_reference(const Mat& hd, const Mat& ad, const Mat& v, double sigma, double eps, const Vec& r1,
                                    const Vec& r2) {
  const Index n = hd.rows(), m = ad.rows();
  Eigen::SelfAdjointEigenSolver<Mat> es(hd);
  const double cut = 1e-10 * std::max(1e-300, es.eigenvalues().maxCoeff());
  std::vector<Index> cols;
  for (Index i = 0; i < n; ++i)
    if (es.eigenvalues()[i] > cut) cols.push_back(i);
  Mat q(n, static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) q.col(static_cast<Index>(c)) = es.eigenvectors().col(cols[c]);
  const Index r = q.cols();
  const Mat qh = q.transpose() * hd;
  Mat sym(r + m, r + m);
  sym << qh * q + sigma * qh * v * hd * q, -sigma * qh * v * ad.transpose(), -sigma * ad * v * hd * q,
      eps * Mat::Identity(m, m) + sigma * ad * v * ad.transpose();
  Vec rhs(r + m);
  rhs << qh * r1, r2;
  const Vec sol = dense_solve_symmetric(sym, rhs);
  RanHReference out;
  out.hd1 = hd * q * sol.head(r);
  out.d2 = sol.tail(m);
  out.asymmetry = (sym - sym.transpose()).norm() / std::max(1e-300, sym.norm());
  return out;
}

/// Linear problem with a strictly feasible dual point (y0 in int K, b = A y0)
/// and a strictly feasible primal slack (c = A^T x2 + s0, s0 in int K).
inline socpalm::ProblemData random_feasible_linear(std::mt19937_64& rng, Index m, const ConeSpec& k) {
  const Index n = k.total_dim();
  const SpMat a = sparse_random(rng, m, n, 0.6);
  Vec y0(n), s0(n);
  for (const auto& blk : k.blocks()) {
    if (blk.kind == socpalm::BlockKind::NonNeg) {
      for (Index i = 0; i < blk.dim; ++i) {
        y0[blk.offset + i] = uniform(rng, 0.5, 2.0);
        s0[blk.offset + i] = uniform(rng, 0.5, 2.0);
      }
    } else {
      Vec t = randn(rng, blk.dim - 1);
      y0.segment(blk.offset + 1, blk.dim - 1) = t;
      y0[blk.offset] = t.norm() + uniform(rng, 0.5, 2.0);
      t = randn(rng, blk.dim - 1);
      s0.segment(blk.offset + 1, blk.dim - 1) = t;
      s0[blk.offset] = t.norm() + uniform(rng, 0.5, 2.0);
    }
  }
  const Vec x2 = randn(rng, m);
  Vec b = a * y0;
  Vec c = a.transpose() * x2 + s0;
  return socpalm::ProblemData(a, b, c, k);
}


/// Post-hoc checks of one outer step, recomputed from the iterates alone.
struct StepInvariants {
  bool complementarity = true;  // x3, y+ in K and |<x3, y+>| small
  bool update_identity = true;  // y+ = y + sigma (-H x1 + A^T x2 + x3 - c)
  bool criterion_a = true;      // ||e^{k+1}|| <= (A') right-hand side
  bool error_vector = true;     // e^{k+1} equals the padded inner gradient
  double ek_norm = 0.0;
  double a_rhs = 0.0;

  bool all() const { return complementarity && update_identity && criterion_a && error_vector; }
};

inline StepInvariants check_step(const socpalm::ProblemData& p, const socpalm::AlmOptions& opts, int k,
                                 const socpalm::Iterate& before, const socpalm::Iterate& after) {
  StepInvariants out;
  const SpMat& a = p.A();
  auto hmul = [&](const Vec& v) { return p.linear() ? Vec(Vec::Zero(p.n())) : Vec(p.H().full() * v); };
  const double sigma = before.sigma;
  const Vec& x1 = after.x1;
  const Vec& x2 = after.x2;
  const Vec& x3 = after.x3;
  const Vec& yp = after.y;

  const double kscale = 1e-14 * (1.0 + x3.norm()) * (1.0 + yp.norm());
  out.complementarity = socpalm::dist_to_cone(p.cone(), x3) <= kscale && socpalm::dist_to_cone(p.cone(), yp) <= kscale &&
                        std::abs(x3.dot(yp)) <= 1e-12 * (1.0 + x3.norm()) * (1.0 + yp.norm());

  const Vec hx1 = hmul(x1);
  const Vec atx2 = a.transpose() * x2;
  const Vec upd = yp - before.y - sigma * (-hx1 + atx2 + x3 - p.c());
  const double uscale = 1.0 + before.y.norm() + yp.norm() + sigma * (hx1.norm() + atx2.norm() + x3.norm() + p.c().norm());
  out.update_identity = upd.norm() <= 1e-12 * uscale;

  // e^k from its definition: ytilde^k = Pi_K[y + sigma(-H x1 + A^T x2 - c)].
  const Vec yt = socpalm::project(p.cone(), Vec(before.y + sigma * (-hx1 + atx2 - p.c())));
  const Vec hyt = hmul(yt);
  Vec e(2 * p.n() + p.m());
  e << hx1 - hyt, -p.b() + a * yt, Vec::Zero(p.n());
  out.ek_norm = e.norm();

  const socpalm::PsiGrad g = socpalm::psi_and_grad(p, x1, x2, before.y, sigma);
  Vec padded(2 * p.n() + p.m());
  padded << g.g1, g.g2, Vec::Zero(p.n());
  const double escale = 1.0 + p.b().norm() + a.norm() * yt.norm() + p.h_frobenius() * (x1.norm() + yt.norm());
  out.error_vector = (padded - e).norm() <= 1e-14 * escale;

  const double eps_k = opts.eps_scale * std::pow(opts.eps_ratio, k);
  const double xt = std::sqrt(x1.squaredNorm() + x2.squaredNorm() + yt.squaredNorm());
  const double ck = 1.0 + xt + yt.norm();
  const double inner = hyt.norm() + (yt - before.y).norm() / sigma + 1.0 / sigma;
  out.a_rhs = (eps_k * eps_k / sigma) / ck * std::min(1.0, 1.0 / inner);
  out.criterion_a = out.ek_norm <= out.a_rhs;
  return out;
}

/// Runs solve and checks every step; counts failures per invariant.
struct InvariantTally {
  int steps = 0;
  int complementarity = 0;
  int update_identity = 0;
  int criterion_a = 0;
  int error_vector = 0;
  int unconverged_inner = 0;  // (A') is not re-checked for these steps
  int failures() const { return complementarity + update_identity + criterion_a + error_vector; }
};

inline socpalm::SolveResult solve_checked(const socpalm::ProblemData& p, const socpalm::AlmOptions& opts,
                                          InvariantTally& tally) {
  return socpalm::solve(p, opts,
                        [&](const socpalm::OuterReport& rep, const socpalm::Iterate& before,
                            const socpalm::Iterate& after) {
                          const StepInvariants s = check_step(p, opts, rep.k, before, after);
                          ++tally.steps;
                          tally.complementarity += !s.complementarity;
                          tally.update_identity += !s.update_identity;
                          tally.error_vector += !s.error_vector;
                          // (A') is only demanded of inner solves that converged.
                          if (rep.inner_status == socpalm::InnerStatus::Converged)
                            tally.criterion_a += !s.criterion_a;
                          else
                            ++tally.unconverged_inner;
                        });
}

}  // namespace testutil

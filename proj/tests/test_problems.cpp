#include <doctest.h>

#include "test_util.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

using namespace socpalm;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  std::ofstream(name) << text;
  return name;
}

// At B x = w: 0 is in the subdifferential iff some ||g|| <= 1 has (B^T g)_i = -lambda sign(x_i) on the
// support and |(B^T g)_i| <= lambda off it. Checks the least-norm g for the support equations.
bool interpolating_optimal(const Mat& b, double lambda, const Vec& x, double tol) {
  std::vector<Index> on;
  for (Index i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) > 1e-6 * std::max(1.0, x.cwiseAbs().maxCoeff())) on.push_back(i);
  Mat bs(b.rows(), static_cast<Index>(on.size()));
  Vec rhs(static_cast<Index>(on.size()));
  for (std::size_t k = 0; k < on.size(); ++k) {
    bs.col(static_cast<Index>(k)) = b.col(on[k]);
    rhs[static_cast<Index>(k)] = -lambda * (x[on[k]] > 0 ? 1.0 : -1.0);
  }
  const Vec g = bs.transpose().completeOrthogonalDecomposition().solve(rhs);
  if ((bs.transpose() * g - rhs).norm() > tol || g.norm() > 1.0 + tol) return false;
  const Vec btg = b.transpose() * g;
  for (Index i = 0; i < x.size(); ++i)
    if (std::find(on.begin(), on.end(), i) == on.end() && std::abs(btg[i]) > lambda + tol) return false;
  return true;
}

double lambda_max_rule(const Mat& b, const Vec& w) { return (b.transpose() * w).cwiseAbs().maxCoeff() / w.norm(); }

}  // namespace

TEST_CASE("prand recurrence") {
  const PrandStep s1 = prand_next(kPrandSeed);
  CHECK(s1.state == 3116);
  CHECK(s1.value == 76.07421875);
  const PrandStep s2 = prand_next(s1.state);
  CHECK(s2.state == 2173);
  CHECK(s2.value == 53.0517578125);
  int st = kPrandSeed;
  for (int i = 0; i < 5000; ++i) {
    const PrandStep s = prand_next(st);
    CHECK(s.value >= 0.0);
    CHECK(s.value < 100.0);
    CHECK(s.value == s.state / 40.96);
    st = s.state;
  }
  CHECK_THROWS_AS(prand_next(4096), InputError);
}

TEST_CASE("normal stream is deterministic and roughly standard") {
  NormalStream a(5), b(5);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
  NormalStream u(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("gen_meb layout") {
  const MebProblem g = gen_meb(2, 1);
  CHECK(g.problem.n() == 4);
  CHECK(g.problem.m() == 2);
  CHECK(g.problem.A().rows() == 2);
  CHECK(g.problem.A().cols() == 4);
  CHECK(g.instance.radii[0] == 76.07421875);
  CHECK(g.instance.centers(0, 0) == 53.0517578125);
  CHECK(g.problem.linear());
  CHECK(g.problem.cone().num_second_order() == 2);
  CHECK(g.problem.b() == (Vec(2) << -1, 0).finished());
  CHECK(g.problem.c()[0] == -76.07421875);

  const MebProblem h = gen_meb(30, 7);
  CHECK(h.problem.n() == 30 * 8);
  CHECK((h.instance.radii.array() >= 0).all());
  CHECK((h.instance.radii.array() < 100).all());
  CHECK((h.instance.centers.array() >= 0).all());
  CHECK((h.instance.centers.array() < 100).all());
  CHECK(gen_meb(30, 7).problem == h.problem);
  CHECK_THROWS_AS(gen_meb(1, 3), InputError);
  CHECK_THROWS_AS(gen_meb(3, 0), InputError);
}

TEST_CASE("MEB extraction on hand-built instances") {
  Mat c(2, 2);
  c << 1, -1, 0, 0;
  const MebProblem two = build_meb(c, Vec::Zero(2));
  const SolveResult r = solve(two.problem);
  REQUIRE(r.status == SolveStatus::Optimal);
  const MebSolution s = extract_meb_solution(two.instance, r);
  CHECK(s.center.norm() <= 1e-7);
  CHECK(s.radius == doctest::Approx(1.0).epsilon(1e-7));

  Mat n(1, 2);
  n << 0.0, 0.5;
  const MebProblem nested = build_meb(n, (Vec(2) << 2.0, 0.5).finished());
  const SolveResult rn = solve(nested.problem);
  REQUIRE(rn.status == SolveStatus::Optimal);
  const MebSolution sn = extract_meb_solution(nested.instance, rn);
  CHECK(std::abs(sn.center[0]) <= 1e-7);
  CHECK(sn.radius == doctest::Approx(2.0).epsilon(1e-7));

  SolveResult bad = r;
  bad.status = SolveStatus::MaxIterations;
  CHECK_THROWS(extract_meb_solution(two.instance, bad));
}

TEST_CASE("MEB covering on a generated instance") {
  const MebProblem g = gen_meb(100, 10);
  const SolveResult r = solve(g.problem);
  REQUIRE(r.status == SolveStatus::Optimal);
  const MebSolution s = extract_meb_solution(g.instance, r);
  CHECK(meb_covering_gap(g.instance, s) <= 1e-6 * (1.0 + s.radius));
}

TEST_CASE("smallest eigenpair") {
  std::mt19937_64 rng(61);
  for (Index d : {5, 40, 600}) {
    Mat h = testutil::randn_mat(rng, d, d);
    h = (h + h.transpose()).eval() / 2.0;
    const EigenPair e = smallest_eigenpair(h);
    const double ref = Eigen::SelfAdjointEigenSolver<Mat>(h, Eigen::EigenvaluesOnly).eigenvalues()[0];
    CHECK(e.value == doctest::Approx(ref).epsilon(1e-9));
    CHECK(std::abs(e.vector.norm() - 1.0) < 1e-12);
    CHECK((h * e.vector - e.value * e.vector).norm() <= 1e-8 * h.norm());
  }
}

TEST_CASE("TRS construction") {
  const Mat h = (Vec(2) << 1, -1).finished().asDiagonal();
  const TrsProblem t = build_trs(h, Vec::Zero(2));
  CHECK(t.instance.lambda_h == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(t.instance.shift == doctest::Approx(-1.0).epsilon(1e-14));
  Mat shifted = Mat(t.problem.H().full()).bottomRightCorner(2, 2);
  CHECK((shifted - Mat((Vec(2) << 2, 0).finished().asDiagonal())).norm() <= 1e-14);
  CHECK(t.problem.m() == 1);
  CHECK(t.problem.n() == 3);
  CHECK(t.problem.cone().num_second_order() == 1);

  const Mat psd = (Vec(2) << 1, 3).finished().asDiagonal();
  const TrsProblem u = build_trs(psd, Vec::Ones(2));
  CHECK(u.instance.lambda_h == doctest::Approx(1.0));
  CHECK(u.instance.shift == 0.0);
  CHECK((Mat(u.problem.H().full()).bottomRightCorner(2, 2) - psd).norm() == 0.0);
  Mat asym = psd;
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(build_trs(asym, Vec::Ones(2)), InputError);
}

TEST_CASE("TRS hard-case example") {
  const Mat h = (Vec(2) << 1, -1).finished().asDiagonal();
  const TrsProblem t = build_trs(h, Vec::Zero(2));
  const SolveResult r = solve(t.problem);
  REQUIRE(r.status == SolveStatus::Optimal);
  const TrsSolution s = extract_trs_solution(t.instance, r);
  CHECK(s.value == doctest::Approx(-0.5).epsilon(1e-7));
  CHECK(std::abs(s.y[0]) <= 1e-6);
  CHECK(s.y.norm() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(testutil::trs_oracle(h, Vec::Zero(2)).value == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("TRS with a PSD matrix keeps the solver point") {
  const Mat h = (Vec(3) << 2, 3, 4).finished().asDiagonal();
  const Vec c = (Vec(3) << 0.1, -0.2, 0.1).finished();
  const TrsProblem t = build_trs(h, c);
  const SolveResult r = solve(t.problem);
  REQUIRE(r.status == SolveStatus::Optimal);
  const TrsSolution s = extract_trs_solution(t.instance, r);
  CHECK_FALSE(s.corrected);
  CHECK((s.y - r.y.tail(3)).norm() == 0.0);
  CHECK(s.value == doctest::Approx(testutil::trs_oracle(h, c).value).epsilon(1e-7));
}

TEST_CASE("random TRS instances agree with the secular-equation oracle") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const TrsData d = generate_trs(50, seed);
    const TrsProblem t = build_trs(d.H, d.c);
    CHECK(t.instance.lambda_h < 0.0);
    const SolveResult r = solve(t.problem);
    REQUIRE(r.status == SolveStatus::Optimal);
    const TrsSolution s = extract_trs_solution(t.instance, r);
    const double ref = testutil::trs_oracle(d.H, d.c).value;
    CHECK(std::abs(s.value - ref) <= 1e-6 * std::abs(ref));
    CHECK(s.y.norm() <= 1.0 + 1e-8);
  }
  const TrsData a = generate_trs(12, 9), b = generate_trs(12, 9);
  CHECK(a.H == b.H);
  CHECK(a.c == b.c);
  CHECK((a.H - a.H.transpose()).norm() == 0.0);
}

TEST_CASE("srLasso construction") {
  Mat b(2, 3);
  b << 1, 2, 3, 4, 5, 6;
  const Vec w = (Vec(2) << 1, -1).finished();
  const SrLassoProblem s = build_srlasso(b, w, 0.5);
  CHECK(s.problem.m() == 2);
  CHECK(s.problem.n() == 9);
  CHECK(s.problem.A().cols() == 9);
  CHECK(s.problem.cone().nonneg_dim() == 6);
  CHECK(s.problem.cone().num_second_order() == 1);
  CHECK(s.problem.cone().blocks().back().dim == 3);
  CHECK_THROWS_AS(build_srlasso(b, w, 0.0), InputError);

  // p = q = 0, z = -w, t = ||w||: feasible with objective ||w||, the model value at x = 0.
  Vec y = Vec::Zero(9);
  y[6] = w.norm();
  y.tail(2) = -w;
  CHECK((s.problem.A() * y - s.problem.b()).norm() == 0.0);
  CHECK(dist_to_cone(s.problem.cone(), y) <= 1e-15);
  CHECK(s.problem.c().dot(y) == doctest::Approx(srlasso_objective(s.instance, Vec::Zero(3))));
}

TEST_CASE("srLasso small instances") {
  // lambda above ||B^T w||_inf / ||w|| gives x = 0.
  std::mt19937_64 rng(62);
  const Mat b = testutil::randn_mat(rng, 4, 3);
  const Vec w = testutil::randn(rng, 4);
  const SrLassoProblem big = build_srlasso(b, w, 1.5 * lambda_max_rule(b, w));
  const SolveResult rb = solve(big.problem);
  REQUIRE(rb.status == SolveStatus::Optimal);
  CHECK(extract_srlasso_solution(big.instance, rb).norm() <= 1e-7);

  // B = I, w = (1, 0), lambda < 1/sqrt(2): the minimizer is w itself.
  const SrLassoProblem id = build_srlasso(Mat::Identity(2, 2), (Vec(2) << 1, 0).finished(), 0.3);
  const SolveResult ri = solve(id.problem);
  REQUIRE(ri.status == SolveStatus::Optimal);
  const Vec xi = extract_srlasso_solution(id.instance, ri);
  CHECK((xi - (Vec(2) << 1, 0).finished()).norm() <= 1e-6);
  CHECK(srlasso_objective(id.instance, xi) == doctest::Approx(0.3).epsilon(1e-6));
  CHECK_FALSE(srlasso_certificate(id.instance, xi).applicable);
  CHECK(interpolating_optimal(Mat::Identity(2, 2), 0.3, xi, 1e-6));
}

TEST_CASE("srLasso 2x2 against a grid and the certificate") {
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 3; ++trial) {
    const Mat b = testutil::randn_mat(rng, 2, 2);
    const Vec w = testutil::randn(rng, 2);
    const SrLassoProblem s = build_srlasso(b, w, 0.7 * lambda_max_rule(b, w));
    const SolveResult r = solve(s.problem);
    REQUIRE(r.status == SolveStatus::Optimal);
    const Vec x = extract_srlasso_solution(s.instance, r);
    const double obj = srlasso_objective(s.instance, x);
    CHECK(obj == doctest::Approx(s.problem.c().dot(r.y)).epsilon(1e-6));
    double grid = 1e300;
    const double span = 2.0 * (x.cwiseAbs().maxCoeff() + 1.0);
    for (int i = 0; i <= 400; ++i)
      for (int j = 0; j <= 400; ++j) {
        const Vec z = (Vec(2) << -span + 2 * span * i / 400.0, -span + 2 * span * j / 400.0).finished();
        grid = std::min(grid, srlasso_objective(s.instance, z));
      }
    CHECK(obj <= grid + 1e-9);
    const SrLassoCertificate cert = srlasso_certificate(s.instance, x);
    if (cert.applicable) {
      CHECK(cert.support_violation <= 1e-6);
      CHECK(cert.off_violation <= 1e-6);
    } else {
      CHECK(interpolating_optimal(b, s.instance.lambda, x, 1e-6));
    }
  }
}

TEST_CASE("srLasso synthetic instance certificate and objective match") {
  const SyntheticRegression g = generate_regression(30, 60, 4, 0.5, 7);
  CHECK(g.B.rows() == 30);
  CHECK(g.B.cols() == 60);
  CHECK((g.x_true.array() != 0).count() == 4);
  const SrLassoProblem s = build_srlasso(g.B, g.w, 0.7 * lambda_max_rule(g.B, g.w));
  const SolveResult r = solve(s.problem);
  REQUIRE(r.status == SolveStatus::Optimal);
  const Vec x = extract_srlasso_solution(s.instance, r);
  CHECK(srlasso_objective(s.instance, x) == doctest::Approx(s.problem.c().dot(r.y)).epsilon(1e-6));
  const SrLassoCertificate cert = srlasso_certificate(s.instance, x);
  CHECK(cert.applicable);
  CHECK(cert.support_violation <= 1e-6);
  CHECK(cert.off_violation <= 1e-6);
  CHECK(cert.support_size >= 1);
}

TEST_CASE("lambda rule") {
  CHECK(inverse_normal_cdf(0.5) == 0.0);
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(inverse_normal_cdf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-10));
  for (double p : {1e-6, 0.01, 0.2, 0.7, 0.99, 1 - 1e-9}) {
    const double x = inverse_normal_cdf(p);
    CHECK(0.5 * std::erfc(-x / std::sqrt(2.0)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(lambda_from_lambda_c(1.0, 1) == doctest::Approx(2.155960).epsilon(1e-5 / 2.155960));
  CHECK(lambda_from_lambda_c(3.0, 17) == doctest::Approx(3.0 * lambda_from_lambda_c(1.0, 17)).epsilon(1e-15));
  CHECK_THROWS_AS(lambda_from_lambda_c(0.0, 1), InputError);
  CHECK_THROWS_AS(inverse_normal_cdf(1.0), InputError);
}

TEST_CASE("CSV input") {
  const std::string plain = write_temp("socpalm_test_plain.csv", "1,2,3\n4,5,6\n");
  const CsvData a = read_csv(plain);
  CHECK_FALSE(a.had_header);
  CHECK(a.B.rows() == 2);
  CHECK(a.B.cols() == 2);
  CHECK(a.B(1, 0) == 4.0);
  CHECK(a.w == (Vec(2) << 3, 6).finished());

  const std::string header = write_temp("socpalm_test_header.csv", "x1,x2,y\n1,2,3\n");
  const CsvData h = read_csv(header);
  CHECK(h.had_header);
  CHECK(h.B.rows() == 1);

  const std::string ragged = write_temp("socpalm_test_ragged.csv", "1,2,3\n4,5\n");
  CHECK_THROWS_WITH_AS(read_csv(ragged), doctest::Contains(":2:"), InputError);
  const std::string text = write_temp("socpalm_test_text.csv", "1,2,3\n4,abc,6\n");
  CHECK_THROWS_AS(read_csv(text), InputError);
  CHECK_THROWS_AS(read_csv("socpalm_no_such_file.csv"), InputError);
  for (const auto& f : {plain, header, ragged, text}) std::remove(f.c_str());
}

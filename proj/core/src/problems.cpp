#include <socpalm/problems.hpp>

#include <Eigen/Eigenvalues>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace socpalm {

PrandStep prand_next(int state) {
  require(state >= 0 && state < 4096, "prand: state must lie in [0, 4096)");
  const int next = (445 * state + 1) % 4096;
  // next * 100 / 4096 is exact in binary, unlike a division by 40.96.
  return {next, static_cast<double>(next * 100) / 4096.0};
}

double NormalStream::uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

double NormalStream::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------

MebProblem build_meb(const Mat& centers, const Vec& radii) {
  const Index d = centers.rows();
  const Index m = centers.cols();
  require(m > 1, "meb: need m > 1 balls, got " + std::to_string(m));
  require(d >= 1, "meb: dimension must be >= 1");
  require(radii.size() == m, "meb: one radius per ball is required");
  require((radii.array() >= 0.0).all(), "meb: radii must be nonnegative");

  const Index block = d + 1;
  const Index n = m * block;
  std::vector<Triplet> tr;
  tr.reserve(static_cast<std::size_t>(n));
  Vec c(n);
  for (Index i = 0; i < m; ++i) {
    c[i * block] = -radii[i];
    c.segment(i * block + 1, d) = -centers.col(i);
    for (Index j = 0; j < block; ++j) tr.emplace_back(j, i * block + j, -1.0);
  }
  SpMat a(block, n);
  a.setFromTriplets(tr.begin(), tr.end());
  Vec b = Vec::Zero(block);
  b[0] = -1.0;
  ConeSpec cone;
  cone.add_second_order(block, m);

  MebProblem out;
  out.instance = {m, d, centers, radii};
  out.problem = ProblemData(std::move(a), std::move(b), std::move(c), std::move(cone));
  return out;
}

MebProblem gen_meb(Index m, Index d) {
  require(m > 1, "meb: need m > 1 balls, got " + std::to_string(m));
  require(d >= 1, "meb: dimension must be >= 1");
  Mat centers(d, m);
  Vec radii(m);
  int state = kPrandSeed;
  auto next = [&state]() {
    const PrandStep s = prand_next(state);
    state = s.state;
    return s.value;
  };
  for (Index i = 0; i < m; ++i) {
    radii[i] = next();
    for (Index j = 0; j < d; ++j) centers(j, i) = next();
  }
  return build_meb(centers, radii);
}

MebSolution extract_meb_solution(const MebInstance& inst, const SolveResult& result) {
  if (result.status != SolveStatus::Optimal) {
    throw std::runtime_error(std::string("meb: solve did not reach optimality (") + to_string(result.status) + ")");
  }
  require(result.x2.size() == inst.d + 1, "meb: result does not match the instance");
  return {result.x2.tail(inst.d), result.x2[0]};
}

double meb_covering_gap(const MebInstance& inst, const MebSolution& sol) {
  double worst = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < inst.m; ++i) {
    worst = std::max(worst, (sol.center - inst.centers.col(i)).norm() + inst.radii[i]);
  }
  return worst - sol.radius;
}

// ---------------------------------------------------------------------------

namespace {

EigenPair lanczos_smallest(const Mat& h) {
  const Index d = h.rows();
  const Index kmax = std::min<Index>(d, 200);
  const double scale = std::max(1.0, h.cwiseAbs().rowwise().sum().maxCoeff());
  NormalStream rng(0x1a2c05ULL);
  Vec v(d);
  for (Index i = 0; i < d; ++i) v[i] = rng.normal();
  v.normalize();

  int matvecs = 0;
  while (matvecs < 5000) {
    Mat basis(d, kmax);
    Vec alpha(kmax), beta(kmax);
    Index k = 0;
    basis.col(0) = v;
    for (; k < kmax; ++k) {
      Vec w = h * basis.col(k);
      ++matvecs;
      alpha[k] = basis.col(k).dot(w);
      for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).transpose() * w);
      beta[k] = w.norm();
      if (k + 1 == kmax || beta[k] <= 1e-14 * scale) {
        ++k;
        break;
      }
      basis.col(k + 1) = w / beta[k];
    }
    Mat t = Mat::Zero(k, k);
    for (Index i = 0; i < k; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(t);
    const double theta = es.eigenvalues()[0];
    Vec x = basis.leftCols(k) * es.eigenvectors().col(0);
    x.normalize();
    const double residual = (h * x - theta * x).norm();
    ++matvecs;
    if (residual <= 1e-10 * scale) return {theta, x};
    v = x;
  }
  throw std::runtime_error("trs: Lanczos did not find the smallest eigenvalue within 5000 products");
}

}  // namespace

EigenPair smallest_eigenpair(const Mat& h) {
  require(h.rows() == h.cols() && h.rows() > 0, "eigenpair: matrix must be square and nonempty");
  if (h.rows() <= 500) {
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    if (es.info() != Eigen::Success) throw std::runtime_error("trs: dense eigensolver failed");
    return {es.eigenvalues()[0], es.eigenvectors().col(0)};
  }
  return lanczos_smallest(h);
}

TrsProblem build_trs(const Mat& h, const Vec& c) {
  const Index d = h.rows();
  require(d >= 1 && h.cols() == d, "trs: H must be square");
  require(c.size() == d, "trs: c must have length d");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  require((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "trs: H must be symmetric");
  const Mat hs = 0.5 * (h + h.transpose());

  TrsProblem out;
  TrsInstance& inst = out.instance;
  inst.H = hs;
  inst.c = c;
  EigenPair ep = smallest_eigenpair(hs);
  inst.lambda_h = ep.value;
  inst.eigvec = std::move(ep.vector);
  inst.shift = std::min(inst.lambda_h, 0.0);

  std::vector<Triplet> lower;
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) {
      const double v = hs(i, j) - (i == j ? inst.shift : 0.0);
      if (v != 0.0) lower.emplace_back(i + 1, j + 1, v);
    }
  }
  SparseSymmetric hq = SparseSymmetric::from_lower_triplets(d + 1, lower);
  SpMat a(1, d + 1);
  a.insert(0, 0) = 1.0;
  Vec cc(d + 1);
  cc << 0.0, c;
  ConeSpec cone;
  cone.add_second_order(d + 1);
  out.problem = ProblemData(std::move(hq), std::move(a), Vec::Ones(1), std::move(cc), std::move(cone));
  return out;
}

TrsData generate_trs(Index d, std::uint64_t seed) {
  require(d >= 1, "trs: dimension must be >= 1");
  NormalStream rng(seed);
  Mat p(d, d);
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < d; ++i) p(i, j) = rng.uniform();
  }
  Vec e(d);
  for (Index i = 0; i < d; ++i) e[i] = rng.normal();
  if ((e.array() >= 0.0).all()) e[0] = -e[0];
  Vec c(d);
  for (Index i = 0; i < d; ++i) c[i] = rng.normal();
  const Mat g = p * e.asDiagonal() * p.transpose();
  Mat h = 0.5 * (g + g.transpose());
  return {std::move(h), std::move(c)};
}

TrsSolution extract_trs_solution(const TrsInstance& inst, const SolveResult& result) {
  if (result.status != SolveStatus::Optimal) {
    throw std::runtime_error(std::string("trs: solve did not reach optimality (") + to_string(result.status) + ")");
  }
  const Index d = inst.H.rows();
  require(result.y.size() == d + 1, "trs: result does not match the instance");
  TrsSolution sol;
  sol.y = result.y.tail(d);
  const double norm = sol.y.norm();
  if (norm > 1.0) {
    sol.y /= norm;
  } else if (inst.lambda_h < 0.0 && norm < 1.0 - 1e-6) {
    // Move to the sphere along the eigenvector; sign chosen so that <c, step> <= 0.
    const Vec& v = inst.eigvec;
    const double yv = sol.y.dot(v);
    const double root = std::sqrt(yv * yv + 1.0 - norm * norm);
    const double tau = inst.c.dot(v) > 0.0 ? -yv - root : -yv + root;
    sol.y += tau * v;
    sol.corrected = true;
  }
  sol.value = 0.5 * sol.y.dot(inst.H * sol.y) + inst.c.dot(sol.y);
  return sol;
}

// ---------------------------------------------------------------------------

SrLassoProblem build_srlasso(const Mat& b, const Vec& w, double lambda) {
  require(lambda > 0.0, "srlasso: lambda must be positive");
  const Index m = b.rows();
  const Index d = b.cols();
  require(m >= 1 && d >= 1, "srlasso: B must be nonempty");
  require(w.size() == m, "srlasso: w must have one entry per row of B");
  const Index n = 2 * d + 1 + m;

  std::vector<Triplet> tr;
  tr.reserve(static_cast<std::size_t>(2 * m * d + m));
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < m; ++i) {
      if (b(i, j) == 0.0) continue;
      tr.emplace_back(i, j, b(i, j));
      tr.emplace_back(i, d + j, -b(i, j));
    }
  }
  for (Index i = 0; i < m; ++i) tr.emplace_back(i, 2 * d + 1 + i, -1.0);
  SpMat a(m, n);
  a.setFromTriplets(tr.begin(), tr.end());
  Vec c = Vec::Zero(n);
  c.head(2 * d).setConstant(lambda);
  c[2 * d] = 1.0;
  ConeSpec cone;
  cone.add_nonneg(2 * d);
  cone.add_second_order(m + 1);

  SrLassoProblem out;
  out.instance = {b, w, lambda};
  out.problem = ProblemData(std::move(a), w, std::move(c), std::move(cone));
  return out;
}

Vec extract_srlasso_solution(const SrLassoInstance& inst, const SolveResult& result) {
  if (result.status != SolveStatus::Optimal) {
    throw std::runtime_error(std::string("srlasso: solve did not reach optimality (") + to_string(result.status) +
                             ")");
  }
  const Index d = inst.B.cols();
  require(result.y.size() == 2 * d + 1 + inst.B.rows(), "srlasso: result does not match the instance");
  return result.y.head(d) - result.y.segment(d, d);
}

double srlasso_objective(const SrLassoInstance& inst, const Vec& x) {
  return (inst.B * x - inst.w).norm() + inst.lambda * x.lpNorm<1>();
}

SrLassoCertificate srlasso_certificate(const SrLassoInstance& inst, const Vec& x, double support_tol,
                                       double residual_tol) {
  SrLassoCertificate cert;
  const Vec r = inst.B * x - inst.w;
  const double rn = r.norm();
  if (!(rn > residual_tol * std::max(1.0, inst.w.norm()))) return cert;
  cert.applicable = true;
  const Vec btg = inst.B.transpose() * (r / rn);
  const double cut = support_tol * std::max(1.0, x.lpNorm<Eigen::Infinity>());
  for (Index i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) > cut) {
      ++cert.support_size;
      const double s = x[i] > 0.0 ? 1.0 : -1.0;
      cert.support_violation = std::max(cert.support_violation, std::abs(btg[i] + inst.lambda * s));
    } else {
      cert.off_violation = std::max(cert.off_violation, std::abs(btg[i]) - inst.lambda);
    }
  }
  cert.off_violation = std::max(cert.off_violation, 0.0);
  return cert;
}

double inverse_normal_cdf(double p) {
  require(p > 0.0 && p < 1.0, "inverse_normal_cdf: p must lie in (0, 1)");
  // Acklam's rational approximation.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double lambda_from_lambda_c(double lambda_c, Index n) {
  require(lambda_c > 0.0, "lambda rule: lambda_c must be positive");
  require(n >= 1, "lambda rule: n must be >= 1");
  return 1.1 * inverse_normal_cdf(1.0 - 1.0 / (40.0 * static_cast<double>(n))) * lambda_c;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_fields(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const std::string t = trim(field);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) return false;
    out.push_back(v);
  }
  if (!line.empty() && line.back() == ',') return false;
  return true;
}

}  // namespace

CsvData read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("csv: cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::vector<double> fields;
  std::string line;
  bool header = false;
  std::size_t width = 0;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    if (!parse_fields(line, fields)) {
      if (rows.empty() && !header) {
        header = true;
        continue;
      }
      throw InputError("csv: " + path + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw InputError("csv: " + path + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                       " fields, found " + std::to_string(fields.size()));
    }
    rows.push_back(fields);
  }
  if (rows.empty()) throw InputError("csv: " + path + ": no data rows");
  if (width < 2) throw InputError("csv: " + path + ": need at least one feature column and the response column");
  CsvData out;
  out.had_header = header;
  const Index m = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(width) - 1;
  out.B.resize(m, d);
  out.w.resize(m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < d; ++j) out.B(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    out.w[i] = rows[static_cast<std::size_t>(i)].back();
  }
  return out;
}

SyntheticRegression generate_regression(Index m, Index d, Index nonzeros, double noise_level, std::uint64_t seed) {
  require(m >= 1 && d >= 1, "regression: dimensions must be positive");
  require(nonzeros >= 0 && nonzeros <= d, "regression: nonzeros must lie in [0, d]");
  NormalStream rng(seed);
  SyntheticRegression out;
  out.B.resize(m, d);
  const double s = 1.0 / std::sqrt(static_cast<double>(m));
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < m; ++i) out.B(i, j) = s * rng.normal();
  }
  out.x_true = Vec::Zero(d);
  for (Index k = 0; k < nonzeros; ++k) {
    const Index j = (k * d) / std::max<Index>(nonzeros, 1);
    out.x_true[j] = (k % 2 == 0 ? 1.0 : -1.0) * (1.0 + rng.uniform());
  }
  out.w = out.B * out.x_true;
  for (Index i = 0; i < m; ++i) out.w[i] += noise_level * rng.normal();
  return out;
}

}  // namespace socpalm

#include <socpalm_cli/cli.hpp>

#include <socpalm/socpalm.hpp>

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>

namespace socpalm::cli {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void print_cone_summary(const ProblemData& p, std::ostream& out) {
  out << "m = " << p.m() << ", n = " << p.n() << ", nnz(A) = " << p.A().nonZeros()
      << ", nnz(H) = " << p.H().nnz_full() << (p.linear() ? " (linear)" : " (quadratic)") << "\n";
  std::map<Index, Index> soc_dims;
  for (const ConeBlock& blk : p.cone().blocks()) {
    if (blk.kind == BlockKind::SecondOrder) ++soc_dims[blk.dim];
  }
  out << "cone: nonneg(" << p.cone().nonneg_dim() << ")";
  for (const auto& [dim, count] : soc_dims) out << " x soc(" << dim << ")^" << count;
  out << ", " << p.cone().num_second_order() << " second-order blocks\n";
}

void print_complementarity(const std::vector<BlockComplementarity>& comp, std::ostream& out) {
  std::map<std::string, int> counts;
  int strict = 0;
  double worst = 0.0;
  for (const BlockComplementarity& bc : comp) {
    ++counts[bc.classification];
    strict += bc.strict ? 1 : 0;
    worst = std::max(worst, std::abs(bc.inner_product));
  }
  out << "complementarity: " << comp.size() << " soc blocks, " << strict << " strictly complementary";
  for (const auto& [name, count] : counts) out << ", " << name << " " << count;
  out << ", max |<x3_i, y_i>| = " << fmt("%.3e", worst) << "\n";
  if (comp.size() > 20) return;
  for (const BlockComplementarity& bc : comp) {
    out << "  block " << bc.block << ": x3 " << to_string(bc.x3_status) << ", y " << to_string(bc.y_status) << ", "
        << bc.classification << ", margin " << fmt("%.3e", bc.margin) << (bc.strict ? ", strict" : "") << "\n";
  }
}

struct SolveArgs {
  std::string problem;
  double tol = 1e-8;
  int max_iter = 100;
  std::optional<double> sigma0;
  bool criterion_b = false;
  std::string out;
  bool solution = false;
  bool quiet = false;
};

int run_solve(const SolveArgs& a, std::ostream& out) {
  const ProblemData p = parse_problem(a.problem);
  AlmOptions opts;
  opts.tol = a.tol;
  opts.max_outer = a.max_iter;
  opts.sigma0 = a.sigma0;
  opts.use_criterion_b = a.criterion_b;
  if (!a.quiet) out << log_header() << "\n";
  const SolveResult r = solve(p, opts, [&](const OuterReport& rep, const Iterate&, const Iterate&) {
    if (!a.quiet) out << log_line(rep) << "\n" << std::flush;
  });
  out << "status: " << to_string(r.status) << "\n";
  out << "outer " << r.outer_iters << ", newton " << r.newton_iters << ", krylov " << r.krylov_iters << "\n";
  out << "pobj " << fmt("%.12e", r.kkt.pobj) << ", dobj " << fmt("%.12e", r.kkt.dobj) << "\n";
  out << "kkt " << fmt("%.3e", r.kkt.max()) << " (d1 " << fmt("%.3e", r.kkt.d1) << ", d2 " << fmt("%.3e", r.kkt.d2)
      << ", d3 " << fmt("%.3e", r.kkt.d3) << ", d4 " << fmt("%.3e", r.kkt.d4) << ")\n";
  out << "time: " << fmt("%.3f", r.solve_seconds) << " s\n";
  if (!a.out.empty()) write_result(r, a.out, {a.solution, true});
  return r.status == SolveStatus::Optimal ? kOk : kNotConverged;
}

int run_diag(const std::string& problem_path, const std::string& result_path, std::ostream& out, std::ostream& err) {
  const ProblemData p = parse_problem(problem_path);
  const ParsedResult pr = parse_result(result_path);
  if (!pr.has_solution) {
    err << "error: " << result_path << " has no solution vectors; rerun solve with --solution\n";
    return kInputError;
  }
  const SolveResult& r = pr.result;
  if (r.x1.size() != p.n() || r.x2.size() != p.m()) {
    err << "error: solution dimensions do not match the problem\n";
    return kInputError;
  }
  const KktResiduals k = kkt_residuals(p, r.x1, r.x2, r.x3, r.y);
  const double nat = natural_map(p, r.x1, r.x2, r.x3, r.y).norm();
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
  double worst = 0.0;
  for (auto [a, b] : {std::pair{k.d1, r.kkt.d1}, {k.d2, r.kkt.d2}, {k.d3, r.kkt.d3}, {k.d4, r.kkt.d4},
                      {k.pobj, r.kkt.pobj}, {k.dobj, r.kkt.dobj}, {nat, r.natural_map_norm}}) {
    if (a != b) worst = std::max(worst, rel(a, b));
  }
  out << "recomputed: d1 " << fmt("%.6e", k.d1) << ", d2 " << fmt("%.6e", k.d2) << ", d3 " << fmt("%.6e", k.d3)
      << ", d4 " << fmt("%.6e", k.d4) << "\n";
  out << "recomputed: pobj " << fmt("%.12e", k.pobj) << ", dobj " << fmt("%.12e", k.dobj) << ", natural map "
      << fmt("%.6e", nat) << "\n";
  out << "max relative difference to the result file: " << fmt("%.3e", worst) << "\n";
  print_complementarity(diagnose_strict_complementarity(p, r.x3, r.y), out);
  return worst <= 1e-12 ? kOk : kNotConverged;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Convex quadratic SOCP solver (inexact ALM + semismooth Newton)", "socpalm"};
  app.require_subcommand(1);

  SolveArgs sa;
  auto* solve_cmd = app.add_subcommand("solve", "Solve a problem file");
  solve_cmd->add_option("problem", sa.problem, "Problem file")->required();
  solve_cmd->add_option("--tol", sa.tol, "Tolerance on max(d1..d4)")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--max-iter", sa.max_iter, "Maximum outer iterations")->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--sigma0", sa.sigma0, "Initial penalty parameter")->check(CLI::PositiveNumber);
  solve_cmd->add_flag("--criterion-b", sa.criterion_b, "Also enforce the (B') inner stopping rule");
  solve_cmd->add_option("--out", sa.out, "Write a result file");
  solve_cmd->add_flag("--solution", sa.solution, "Include solution vectors in the result file");
  solve_cmd->add_flag("-q,--quiet", sa.quiet, "Do not print the iteration log");

  auto* gen_cmd = app.add_subcommand("gen", "Generate a problem file");
  gen_cmd->require_subcommand(1);
  Index meb_m = 0, meb_d = 0, trs_d = 0;
  std::uint64_t trs_seed = 1;
  std::string gen_out, csv_path;
  double lambda_c = 0.0;
  auto* gen_meb_cmd = gen_cmd->add_subcommand("meb", "Minimal enclosing ball of m pseudo-random balls in R^d");
  gen_meb_cmd->add_option("--m", meb_m, "Number of balls (> 1)")->required();
  gen_meb_cmd->add_option("--d", meb_d, "Dimension")->required();
  gen_meb_cmd->add_option("-o,--out", gen_out, "Output problem file")->required();
  auto* gen_trs_cmd = gen_cmd->add_subcommand("trs", "Random trust-region subproblem");
  gen_trs_cmd->add_option("--d", trs_d, "Dimension")->required();
  gen_trs_cmd->add_option("--seed", trs_seed, "Generator seed");
  gen_trs_cmd->add_option("-o,--out", gen_out, "Output problem file")->required();
  auto* gen_sr_cmd = gen_cmd->add_subcommand("srlasso", "Square-root Lasso from CSV data");
  gen_sr_cmd->add_option("--csv", csv_path, "CSV with rows of B followed by w")->required();
  gen_sr_cmd->add_option("--lambda-c", lambda_c, "Scale lambda_c of the lambda rule")
      ->required()
      ->check(CLI::PositiveNumber);
  gen_sr_cmd->add_option("-o,--out", gen_out, "Output problem file")->required();

  std::string check_path;
  auto* check_cmd = app.add_subcommand("check", "Validate a problem file");
  check_cmd->add_option("problem", check_path, "Problem file")->required();

  std::string diag_problem, diag_result;
  auto* diag_cmd = app.add_subcommand("diag", "Recompute residuals and complementarity for a result");
  diag_cmd->add_option("problem", diag_problem, "Problem file")->required();
  diag_cmd->add_option("result", diag_result, "Result file written with --solution")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*solve_cmd) return run_solve(sa, out);
    if (*gen_meb_cmd) {
      write_problem(gen_meb(meb_m, meb_d).problem, gen_out);
      return kOk;
    }
    if (*gen_trs_cmd) {
      const TrsData data = generate_trs(trs_d, trs_seed);
      const TrsProblem tp = build_trs(data.H, data.c);
      write_problem(tp.problem, gen_out);
      out << "lambda_H = " << fmt("%.12e", tp.instance.lambda_h) << "\n";
      return kOk;
    }
    if (*gen_sr_cmd) {
      const CsvData data = read_csv(csv_path);
      const double lambda = lambda_from_lambda_c(lambda_c, data.B.cols());
      write_problem(build_srlasso(data.B, data.w, lambda).problem, gen_out);
      out << "lambda = " << fmt("%.12e", lambda) << "\n";
      return kOk;
    }
    if (*check_cmd) {
      const ProblemData p = parse_problem(check_path);
      out << check_path << ": valid\n";
      print_cone_summary(p, out);
      return kOk;
    }
    if (*diag_cmd) return run_diag(diag_problem, diag_result, out, err);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}

}  // namespace socpalm::cli

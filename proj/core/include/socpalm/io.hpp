#pragma once

#include <socpalm/alm.hpp>
#include <socpalm/problem.hpp>

#include <string>

namespace socpalm {

inline constexpr int kFormatVersion = 1;

/// Problem file (JSON):
///   {"format_version": 1, "m": M, "n": N,
///    "cone": [{"kind": "nonneg" | "soc", "dim": D}, ...],
///    "A": [[row, col, value], ...], "b": [...], "c": [...],
///    "H": [[row, col, value], ...]}        (optional, lower triangle, row >= col)
/// Indices are 0-based. Doubles are written in shortest round-trip form.
ProblemData parse_problem(const std::string& path);
ProblemData parse_problem_text(const std::string& text, const std::string& source = "<text>");

std::string problem_to_text(const ProblemData& p);
void write_problem(const ProblemData& p, const std::string& path);

struct ResultWriteOptions {
  bool include_solution = false;
  bool include_timings = true;
};

std::string result_to_text(const SolveResult& r, const ResultWriteOptions& opts = {});
void write_result(const SolveResult& r, const std::string& path, const ResultWriteOptions& opts = {});

struct ParsedResult {
  SolveResult result;  // history is not stored in result files
  bool has_solution = false;
};

ParsedResult parse_result(const std::string& path);
ParsedResult parse_result_text(const std::string& text, const std::string& source = "<text>");

SolveStatus solve_status_from_string(const std::string& s);

}  // namespace socpalm

#include <socpalm/io.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

namespace socpalm {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw InputError("error while writing '" + path + "'");
}

/// 1-based line of a byte offset.
std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(source + ":" + std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                     ": malformed JSON (" + e.what() + ")");
  }
}

class FieldError {
 public:
  explicit FieldError(std::string source) : source_(std::move(source)) {}
  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw InputError(source_ + ": field '" + field + "': " + what);
  }

 private:
  std::string source_;
};

const json& member(const json& obj, const char* key, const FieldError& err) {
  auto it = obj.find(key);
  if (it == obj.end()) err.fail(key, "missing");
  return *it;
}

Index as_index(const json& v, const std::string& field, const FieldError& err) {
  if (!v.is_number_integer()) err.fail(field, "expected an integer");
  const auto x = v.get<long long>();
  if (x < 0) err.fail(field, "must be nonnegative");
  return static_cast<Index>(x);
}

double as_double(const json& v, const std::string& field, const FieldError& err) {
  if (!v.is_number()) err.fail(field, "expected a finite number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) err.fail(field, "expected a finite number");
  return x;
}

Vec as_vector(const json& v, const std::string& field, Index expected, const FieldError& err) {
  if (!v.is_array()) err.fail(field, "expected an array");
  if (expected >= 0 && static_cast<Index>(v.size()) != expected) {
    err.fail(field, "expected " + std::to_string(expected) + " entries, found " + std::to_string(v.size()));
  }
  Vec out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Index>(i)] = as_double(v[i], field + "[" + std::to_string(i) + "]", err);
  }
  return out;
}

std::vector<Triplet> as_triplets(const json& v, const std::string& field, Index rows, Index cols,
                                 const FieldError& err) {
  if (!v.is_array()) err.fail(field, "expected an array of [row, col, value]");
  std::vector<Triplet> out;
  out.reserve(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const std::string f = field + "[" + std::to_string(k) + "]";
    const json& t = v[k];
    if (!t.is_array() || t.size() != 3) err.fail(f, "expected [row, col, value]");
    const Index r = as_index(t[0], f + ".row", err);
    const Index c = as_index(t[1], f + ".col", err);
    const double x = as_double(t[2], f + ".value", err);
    if (r >= rows) err.fail(f, "row " + std::to_string(r) + " out of range [0, " + std::to_string(rows) + ")");
    if (c >= cols) err.fail(f, "col " + std::to_string(c) + " out of range [0, " + std::to_string(cols) + ")");
    out.emplace_back(r, c, x);
  }
  return out;
}

json vec_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

ProblemData parse_problem_text(const std::string& text, const std::string& source) {
  const json doc = parse_json(text, source);
  const FieldError err(source);
  if (!doc.is_object()) err.fail("<root>", "expected an object");
  const Index version = as_index(member(doc, "format_version", err), "format_version", err);
  if (version != kFormatVersion) err.fail("format_version", "unsupported version " + std::to_string(version));
  const Index m = as_index(member(doc, "m", err), "m", err);
  const Index n = as_index(member(doc, "n", err), "n", err);

  const json& cone_json = member(doc, "cone", err);
  if (!cone_json.is_array()) err.fail("cone", "expected an array of blocks");
  ConeSpec cone;
  for (std::size_t i = 0; i < cone_json.size(); ++i) {
    const std::string f = "cone[" + std::to_string(i) + "]";
    const json& blk = cone_json[i];
    if (!blk.is_object()) err.fail(f, "expected {\"kind\", \"dim\"}");
    auto kind = blk.find("kind");
    if (kind == blk.end() || !kind->is_string()) err.fail(f + ".kind", "expected \"nonneg\" or \"soc\"");
    const Index dim = as_index(member(blk, "dim", err), f + ".dim", err);
    try {
      if (*kind == "nonneg") {
        cone.add_nonneg(dim);
      } else if (*kind == "soc") {
        cone.add_second_order(dim);
      } else {
        err.fail(f + ".kind", "expected \"nonneg\" or \"soc\"");
      }
    } catch (const InputError& e) {
      if (std::string(e.what()).find("field '") != std::string::npos) throw;
      err.fail(f, e.what());
    }
  }
  if (cone.total_dim() != n) {
    err.fail("cone", "block dimensions sum to " + std::to_string(cone.total_dim()) + " but n = " + std::to_string(n));
  }

  const std::vector<Triplet> at = as_triplets(member(doc, "A", err), "A", m, n, err);
  SpMat a(m, n);
  a.setFromTriplets(at.begin(), at.end());
  Vec b = as_vector(member(doc, "b", err), "b", m, err);
  Vec c = as_vector(member(doc, "c", err), "c", n, err);

  SparseSymmetric h(n);
  if (auto it = doc.find("H"); it != doc.end() && !it->is_null()) {
    const std::vector<Triplet> ht = as_triplets(*it, "H", n, n, err);
    for (std::size_t k = 0; k < ht.size(); ++k) {
      if (ht[k].row() < ht[k].col()) {
        err.fail("H[" + std::to_string(k) + "]", "entry above the diagonal (row < col); give the lower triangle only");
      }
    }
    h = SparseSymmetric::from_lower_triplets(n, ht);
  }
  try {
    return ProblemData(std::move(h), std::move(a), std::move(b), std::move(c), std::move(cone));
  } catch (const InputError& e) {
    throw InputError(source + ": " + e.what());
  }
}

ProblemData parse_problem(const std::string& path) { return parse_problem_text(read_file(path), path); }

std::string problem_to_text(const ProblemData& p) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["m"] = p.m();
  doc["n"] = p.n();
  json cone = json::array();
  for (const ConeBlock& blk : p.cone().blocks()) {
    cone.push_back({{"kind", blk.kind == BlockKind::NonNeg ? "nonneg" : "soc"}, {"dim", blk.dim}});
  }
  doc["cone"] = std::move(cone);
  json a = json::array();
  for (Index j = 0; j < p.A().outerSize(); ++j) {
    for (SpMat::InnerIterator it(p.A(), j); it; ++it) a.push_back(json::array({it.row(), j, it.value()}));
  }
  doc["A"] = std::move(a);
  doc["b"] = vec_json(p.b());
  doc["c"] = vec_json(p.c());
  if (!p.linear()) {
    json h = json::array();
    for (const Triplet& t : p.H().lower_triplets()) h.push_back(json::array({t.row(), t.col(), t.value()}));
    doc["H"] = std::move(h);
  }
  return doc.dump() + "\n";
}

void write_problem(const ProblemData& p, const std::string& path) { write_file(path, problem_to_text(p)); }

SolveStatus solve_status_from_string(const std::string& s) {
  for (SolveStatus st : {SolveStatus::Optimal, SolveStatus::MaxIterations, SolveStatus::Stagnation,
                         SolveStatus::LinearSolveFailure}) {
    if (s == to_string(st)) return st;
  }
  throw InputError("unknown status '" + s + "'");
}

std::string result_to_text(const SolveResult& r, const ResultWriteOptions& opts) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["status"] = to_string(r.status);
  doc["message"] = r.message;
  doc["pobj"] = r.kkt.pobj;
  doc["dobj"] = r.kkt.dobj;
  doc["residuals"] = {{"d1", r.kkt.d1}, {"d2", r.kkt.d2}, {"d3", r.kkt.d3}, {"d4", r.kkt.d4}, {"max", r.kkt.max()}};
  doc["natural_map_norm"] = r.natural_map_norm;
  doc["sigma"] = r.sigma;
  doc["counters"] = {{"outer", r.outer_iters}, {"newton", r.newton_iters}, {"krylov", r.krylov_iters}};
  if (opts.include_timings) doc["timings"] = {{"solve_seconds", r.solve_seconds}};
  json comp = json::array();
  for (const BlockComplementarity& bc : r.complementarity) {
    comp.push_back({{"block", bc.block},
                    {"x3", to_string(bc.x3_status)},
                    {"y", to_string(bc.y_status)},
                    {"classification", bc.classification},
                    {"strict", bc.strict},
                    {"margin", bc.margin},
                    {"inner_product", bc.inner_product}});
  }
  doc["complementarity"] = std::move(comp);
  if (opts.include_solution) {
    doc["solution"] = {{"x1", vec_json(r.x1)}, {"x2", vec_json(r.x2)}, {"x3", vec_json(r.x3)}, {"y", vec_json(r.y)}};
  }
  return doc.dump(1) + "\n";
}

void write_result(const SolveResult& r, const std::string& path, const ResultWriteOptions& opts) {
  write_file(path, result_to_text(r, opts));
}

ParsedResult parse_result_text(const std::string& text, const std::string& source) {
  const json doc = parse_json(text, source);
  const FieldError err(source);
  if (!doc.is_object()) err.fail("<root>", "expected an object");
  ParsedResult out;
  SolveResult& r = out.result;
  const json& status = member(doc, "status", err);
  if (!status.is_string()) err.fail("status", "expected a string");
  try {
    r.status = solve_status_from_string(status.get<std::string>());
  } catch (const InputError& e) {
    err.fail("status", e.what());
  }
  if (auto it = doc.find("message"); it != doc.end() && it->is_string()) r.message = it->get<std::string>();
  r.kkt.pobj = as_double(member(doc, "pobj", err), "pobj", err);
  r.kkt.dobj = as_double(member(doc, "dobj", err), "dobj", err);
  const json& res = member(doc, "residuals", err);
  r.kkt.d1 = as_double(member(res, "d1", err), "residuals.d1", err);
  r.kkt.d2 = as_double(member(res, "d2", err), "residuals.d2", err);
  r.kkt.d3 = as_double(member(res, "d3", err), "residuals.d3", err);
  r.kkt.d4 = as_double(member(res, "d4", err), "residuals.d4", err);
  r.natural_map_norm = as_double(member(doc, "natural_map_norm", err), "natural_map_norm", err);
  if (auto it = doc.find("sigma"); it != doc.end()) r.sigma = as_double(*it, "sigma", err);
  const json& counters = member(doc, "counters", err);
  r.outer_iters = static_cast<int>(as_index(member(counters, "outer", err), "counters.outer", err));
  r.newton_iters = static_cast<int>(as_index(member(counters, "newton", err), "counters.newton", err));
  r.krylov_iters = static_cast<int>(as_index(member(counters, "krylov", err), "counters.krylov", err));
  if (auto it = doc.find("timings"); it != doc.end()) {
    r.solve_seconds = as_double(member(*it, "solve_seconds", err), "timings.solve_seconds", err);
  }
  if (auto it = doc.find("solution"); it != doc.end()) {
    const json& s = *it;
    r.x1 = as_vector(member(s, "x1", err), "solution.x1", -1, err);
    r.x2 = as_vector(member(s, "x2", err), "solution.x2", -1, err);
    r.x3 = as_vector(member(s, "x3", err), "solution.x3", r.x1.size(), err);
    r.y = as_vector(member(s, "y", err), "solution.y", r.x1.size(), err);
    out.has_solution = true;
  }
  return out;
}

ParsedResult parse_result(const std::string& path) { return parse_result_text(read_file(path), path); }

}  // namespace socpalm

#include <socpalm/problem.hpp>

#include <string>
#include <utility>

namespace socpalm {

ProblemData::ProblemData(SparseSymmetric h, SpMat a, Vec b, Vec c, ConeSpec cone)
    : h_(std::move(h)), a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), cone_(std::move(cone)) {
  const Index n = a_.cols();
  require(cone_.total_dim() == n, "problem: cone dimension " + std::to_string(cone_.total_dim()) +
                                      " does not match the " + std::to_string(n) + " columns of A");
  require(b_.size() == a_.rows(), "problem: b has length " + std::to_string(b_.size()) + ", expected " +
                                      std::to_string(a_.rows()));
  require(c_.size() == n, "problem: c has length " + std::to_string(c_.size()) + ", expected " + std::to_string(n));
  if (h_.dim() == 0 && n > 0) h_ = SparseSymmetric(n);
  require(h_.dim() == n, "problem: H has dimension " + std::to_string(h_.dim()) + ", expected " + std::to_string(n));
  require(b_.allFinite() && c_.allFinite(), "problem: b and c must be finite");
  a_.makeCompressed();
  h_fro_ = h_.frobenius_norm();
  b_norm_ = b_.norm();
  c_norm_ = c_.norm();
}

ProblemData::ProblemData(SpMat a, Vec b, Vec c, ConeSpec cone)
    : ProblemData(SparseSymmetric(a.cols()), std::move(a), std::move(b), std::move(c), std::move(cone)) {}

bool ProblemData::operator==(const ProblemData& other) const {
  if (!(cone_ == other.cone_) || !(h_ == other.h_)) return false;
  if (b_.size() != other.b_.size() || c_.size() != other.c_.size() || b_ != other.b_ || c_ != other.c_) return false;
  if (a_.rows() != other.a_.rows() || a_.cols() != other.a_.cols() || a_.nonZeros() != other.a_.nonZeros()) {
    return false;
  }
  for (Index j = 0; j < a_.outerSize(); ++j) {
    SpMat::InnerIterator it(a_, j), jt(other.a_, j);
    for (; it && jt; ++it, ++jt) {
      if (it.row() != jt.row() || it.value() != jt.value()) return false;
    }
    if (it || jt) return false;
  }
  return true;
}

}  // namespace socpalm

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace socpalm {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, Index>;
using Triplet = Eigen::Triplet<double, Index>;

/// Malformed or inconsistent input (dimensions, ranges, file contents).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative or direct linear solve that did not reach its tolerance.
class LinearSolveError : public std::runtime_error {
 public:
  LinearSolveError(const std::string& what, double best_residual)
      : std::runtime_error(what), best_residual_(best_residual) {}

  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw InputError(message);
}

}  // namespace socpalm

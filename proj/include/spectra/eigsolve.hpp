#pragma once

// Symmetric eigensolvers used by the spectral layer.
//
// Two paths. Small matrices (n <= kJacobiLimit) get a full cyclic Jacobi
// decomposition. Larger problems go through deflated power iteration on
// the squared operator, which finds eigenpairs in descending magnitude
// order without materializing anything dense; matrix access is abstracted
// behind LinearOperator so sparse adjacencies and preconditioned handles
// share the path.
//
// Power iteration on A^2 converges to an eigenspace of A^2; when that
// space mixes a +sigma/-sigma pair of A, the iterate is split into the
// two A-eigenvectors via v± = normalize(sigma*w ± A*w). Start vectors are
// drawn from a fixed internal stream, so results are deterministic.

#include <cstdint>

#include <Eigen/Dense>

namespace spectra {

// y = A x for a symmetric operator of the given dimension.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual int dim() const = 0;
  virtual void apply(const double* x, double* y) const = 0;
};

class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(const Eigen::MatrixXd& a) : a_(a) {}
  int dim() const override { return static_cast<int>(a_.rows()); }
  void apply(const double* x, double* y) const override {
    Eigen::Map<const Eigen::VectorXd> xv(x, a_.rows());
    Eigen::Map<Eigen::VectorXd> yv(y, a_.rows());
    yv.noalias() = a_ * xv;
  }

 private:
  Eigen::MatrixXd a_;
};

struct EigenDecomposition {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // columns match values
};

inline constexpr int kJacobiLimit = 512;

// Full decomposition by cyclic Jacobi sweeps. Stops when the off-diagonal
// Frobenius mass drops below 1e-11 times the input norm; throws
// ConvergenceError after 10*n sweeps. Values come back in diagonal order
// (unsorted). The input must be symmetric; the caller checks tolerance.
EigenDecomposition jacobi_full(const Eigen::MatrixXd& a);

// Top-L eigenpairs by |eigenvalue| via deflated power iteration on op^2.
// Values are non-increasing in magnitude; at equal magnitude the positive
// one comes first. Throws ConvergenceError when a slot exceeds max_iter.
EigenDecomposition power_top(const LinearOperator& op, int L,
                             double tol = 1e-13, int max_iter = 200000);

}  // namespace spectra

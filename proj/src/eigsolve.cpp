#include "spectra/eigsolve.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spectra/errors.hpp"
#include "spectra/rng.hpp"

namespace spectra {
namespace {

// Frobenius norm of the strictly off-diagonal part.
double off_diagonal_norm(const Eigen::MatrixXd& a) {
  double s = 0.0;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      if (i != j) s += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(s);
}

}  // namespace

EigenDecomposition jacobi_full(const Eigen::MatrixXd& a_in) {
  const int n = static_cast<int>(a_in.rows());
  Eigen::MatrixXd a = (a_in + a_in.transpose()) / 2.0;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  if (n == 1) return {a.diagonal(), v};

  const double target = 1e-11 * std::max(a_in.norm(), 1e-300);
  const int max_sweeps = 10 * n;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_diagonal_norm(a) <= target) {
      return {a.diagonal(), v};
    }
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (theta >= 0.0) {
          t = 1.0 / (theta + std::sqrt(1.0 + theta * theta));
        } else {
          t = -1.0 / (-theta + std::sqrt(1.0 + theta * theta));
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (int i = 0; i < n; ++i) {
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a(p, i);
          const double aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
      }
    }
  }
  if (off_diagonal_norm(a) <= target) {
    return {a.diagonal(), v};
  }
  throw ConvergenceError("jacobi sweep cap reached at n=" + std::to_string(n));
}

EigenDecomposition power_top(const LinearOperator& op, int L, double tol,
                             int max_iter) {
  const int n = op.dim();
  if (L < 1 || L > n) {
    throw ParameterError("power_top: L out of range");
  }
  Eigen::MatrixXd u(n, L);  // found eigenvectors of op
  Eigen::VectorXd vals(L);
  int found = 0;

  Eigen::VectorXd w(n), z(n), tmp(n), r(n);
  const auto apply2 = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    op.apply(x.data(), tmp.data());
    op.apply(tmp.data(), out.data());
  };
  const auto deflate = [&](Eigen::VectorXd& x) {
    if (found == 0) return;
    auto basis = u.leftCols(found);
    x.noalias() -= basis * (basis.transpose() * x);
  };

  // Per-run estimate of ||op^2||, used to scale convergence thresholds.
  double a2_scale = 0.0;

  int slot = 0;
  while (found < L) {
    Rng start(0x5eedf00dcafe17ull, StreamDomain::kPowerStart,
              static_cast<std::uint64_t>(slot));
    ++slot;
    for (int i = 0; i < n; ++i) w[i] = start.gaussian();
    deflate(w);
    deflate(w);
    double nw = w.norm();
    if (nw < 1e-12) continue;  // bad start, next stream
    w /= nw;

    double mu = 0.0;
    bool done = false;
    for (int iter = 0; iter < max_iter && !done; ++iter) {
      apply2(w, z);
      deflate(z);
      mu = w.dot(z);
      a2_scale = std::max(a2_scale, std::abs(mu));
      const double scale = std::max(a2_scale, 1e-300);
      r = z - mu * w;
      if (r.norm() <= tol * scale) {
        done = true;
        break;
      }
      const double nz = z.norm();
      if (nz <= 1e-300 * scale || nz == 0.0) {
        mu = 0.0;  // deflated null space
        done = true;
        break;
      }
      w = z / nz;
    }
    if (!done) {
      throw ConvergenceError("power iteration cap reached on slot " +
                             std::to_string(found));
    }

    const double sigma = std::sqrt(std::max(mu, 0.0));
    op.apply(w.data(), r.data());
    deflate(r);
    const double zero_tol = 1e-10 * std::sqrt(std::max(a2_scale, 1e-300));
    if (sigma <= zero_tol) {
      vals[found] = 0.0;
      u.col(found) = w;
      ++found;
      continue;
    }
    const double split_tol = 1e-6;
    if ((r - sigma * w).norm() <= split_tol * sigma) {
      vals[found] = sigma;
      u.col(found) = w;
      ++found;
    } else if ((r + sigma * w).norm() <= split_tol * sigma) {
      vals[found] = -sigma;
      u.col(found) = w;
      ++found;
    } else {
      // Mixed +/- pair; split. Positive branch first.
      Eigen::VectorXd vp = sigma * w + r;
      Eigen::VectorXd vm = sigma * w - r;
      vp.normalize();
      vm.normalize();
      vals[found] = sigma;
      u.col(found) = vp;
      ++found;
      if (found < L) {
        vals[found] = -sigma;
        u.col(found) = vm;
        ++found;
      }
    }
  }

  // Rayleigh-Ritz polish: the span is A-invariant to working accuracy, so
  // re-extracting pairs inside it removes the +/- splitting error. Falls
  // back to a subspace-iteration step when residuals stay loose.
  const double sigma_max = std::sqrt(std::max(a2_scale, 1e-300));
  Eigen::MatrixXd au(n, L);
  for (int round = 0; round < 4; ++round) {
    for (int j = 0; j < L; ++j) {
      op.apply(u.col(j).data(), au.col(j).data());
    }
    Eigen::MatrixXd t = u.transpose() * au;
    t = ((t + t.transpose()) / 2.0).eval();
    EigenDecomposition small = jacobi_full(t);
    u = (u * small.vectors).eval();
    au = (au * small.vectors).eval();
    vals = small.values;
    double worst = 0.0;
    for (int j = 0; j < L; ++j) {
      worst = std::max(worst, (au.col(j) - vals[j] * u.col(j)).norm());
    }
    if (worst <= 1e-10 * std::max(sigma_max, 1e-300)) break;
    // One squared-operator subspace step, then re-orthonormalize.
    for (int j = 0; j < L; ++j) {
      op.apply(au.col(j).data(), u.col(j).data());
    }
    for (int j = 0; j < L; ++j) {
      for (int k = 0; k < j; ++k) {
        u.col(j) -= u.col(k).dot(u.col(j)) * u.col(k);
      }
      for (int k = 0; k < j; ++k) {
        u.col(j) -= u.col(k).dot(u.col(j)) * u.col(k);
      }
      const double nj = u.col(j).norm();
      if (nj > 1e-300) u.col(j) /= nj;
    }
  }

  // Magnitude order with the positive member of a tie first.
  std::vector<int> order(L);
  for (int i = 0; i < L; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    const double ai = std::abs(vals[i]), aj = std::abs(vals[j]);
    if (ai != aj) return ai > aj;
    return vals[i] > vals[j];
  });
  EigenDecomposition out;
  out.values.resize(L);
  out.vectors.resize(n, L);
  for (int i = 0; i < L; ++i) {
    out.values[i] = vals[order[i]];
    out.vectors.col(i) = u.col(order[i]);
  }
  return out;
}

}  // namespace spectra

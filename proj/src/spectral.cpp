#include "spectra/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "spectra/errors.hpp"
#include "spectra/io.hpp"
#include "spectra/rng.hpp"
#include "spectra/synthdata.hpp"

namespace spectra {
namespace {

void sign_normalize_columns(Eigen::MatrixXd& v) {
  for (int j = 0; j < v.cols(); ++j) {
    const double scale = v.col(j).cwiseAbs().maxCoeff();
    if (scale == 0.0) continue;
    for (int i = 0; i < v.rows(); ++i) {
      if (std::abs(v(i, j)) > 1e-12 * scale) {
        if (v(i, j) < 0.0) v.col(j) = -v.col(j);
        break;
      }
    }
  }
}

// Indices of the top-L entries by |value|, positive first on exact ties,
// stable beyond that.
std::vector<int> top_by_magnitude(const Eigen::VectorXd& values, int L) {
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    const double ai = std::abs(values[i]), aj = std::abs(values[j]);
    if (ai != aj) return ai > aj;
    return values[i] > values[j];
  });
  order.resize(L);
  return order;
}

Spectrum select_pairs(const EigenDecomposition& full, int L) {
  const std::vector<int> order = top_by_magnitude(full.values, L);
  Spectrum out;
  out.values.resize(L);
  out.vectors.resize(full.vectors.rows(), L);
  for (int i = 0; i < L; ++i) {
    out.values[i] = full.values[order[i]];
    out.vectors.col(i) = full.vectors.col(order[i]);
  }
  sign_normalize_columns(out.vectors);
  return out;
}

// Shared centroid mechanics: given a K x K symmetric reduction Msym whose
// unit eigenvectors v map to alpha-normalized eigenvectors y = v / sqrt(a),
// validate the conditions and build the centroid rows.
Centroids centroids_from_reduction(const Eigen::MatrixXd& msym,
                                   const std::vector<double>& alpha, int L,
                                   const char* cond_tag) {
  const int k = static_cast<int>(msym.rows());
  if (L < 1) throw ParameterError("centroids: L must be positive");
  EigenDecomposition full = jacobi_full(msym);
  std::vector<int> order = top_by_magnitude(full.values, k);

  const double top = std::abs(full.values[order[0]]);
  const double rank_tol = 1e-12 * std::max(top, 1e-300);
  int rank = 0;
  for (int i = 0; i < k; ++i) {
    if (std::abs(full.values[order[i]]) > rank_tol) ++rank;
  }
  if (L > rank) {
    throw ParameterError(std::string("centroids: L exceeds rank(") +
                         cond_tag + ")");
  }
  // Spectral gap condition: the top L magnitudes must be separated from
  // each other and from the (L+1)-th.
  for (int i = 0; i < L && i + 1 < k; ++i) {
    const double hi = std::abs(full.values[order[i]]);
    const double lo = std::abs(full.values[order[i + 1]]);
    if (hi - lo <= 1e-9 * std::max(top, 1e-300)) {
      throw DegeneracyError(std::string("centroids: magnitude tie in top ") +
                            cond_tag + " eigenvalues");
    }
  }

  Centroids out;
  out.norm_weights = alpha;
  out.points.resize(k, L);
  for (int j = 0; j < L; ++j) {
    Eigen::VectorXd y = full.vectors.col(order[j]);
    for (int i = 0; i < k; ++i) y[i] /= std::sqrt(alpha[i]);
    double norm_a = 0.0;
    for (int i = 0; i < k; ++i) norm_a += alpha[i] * y[i] * y[i];
    if (norm_a <= 0.0) {
      throw ParameterError("centroids: zero alpha-norm eigenvector");
    }
    y /= std::sqrt(norm_a);
    // Deterministic sign: first non-negligible coordinate positive.
    const double scale = y.cwiseAbs().maxCoeff();
    for (int i = 0; i < k; ++i) {
      if (std::abs(y[i]) > 1e-12 * scale) {
        if (y[i] < 0.0) y = -y;
        break;
      }
    }
    out.points.col(j) = y;
  }
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      if ((out.points.row(i) - out.points.row(j)).norm() <= 1e-9) {
        throw IndistinguishableClassesError(
            "centroids: classes " + std::to_string(i) + " and " +
            std::to_string(j) + " coincide");
      }
    }
  }
  return out;
}

}  // namespace

Spectrum eig_top(const Eigen::MatrixXd& a, int L) {
  const int n = static_cast<int>(a.rows());
  if (a.rows() != a.cols()) throw ParameterError("eig_top: matrix not square");
  if (L < 1 || L > n) throw ParameterError("eig_top: L out of range");
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) {
    throw ParameterError("eig_top: matrix not symmetric (max asymmetry " +
                         format_double(asym) + ")");
  }
  if (n <= kJacobiLimit) {
    return select_pairs(jacobi_full(a), L);
  }
  DenseOperator op(a);
  EigenDecomposition top = power_top(op, L);
  Spectrum out{top.values, top.vectors};
  sign_normalize_columns(out.vectors);
  return out;
}

Spectrum eig_top(const LinearOperator& op, int L) {
  if (L < 1 || L > op.dim()) throw ParameterError("eig_top: L out of range");
  EigenDecomposition top = power_top(op, L);
  Spectrum out{top.values, top.vectors};
  sign_normalize_columns(out.vectors);
  return out;
}

Spectrum svd_top(const SparseGraph& s, int L) {
  if (s.kind() != GraphKind::kBipartite) {
    throw ParameterError("svd_top: graph is not bipartite");
  }
  const int n_users = s.n_left();
  const int total = s.n();
  if (L < 1 || L > std::min(n_users, s.n_right())) {
    throw ParameterError("svd_top: L out of range");
  }
  SparseGraph tau = tau_embed(s);
  // Positive eigenvalues of the embedding come paired with negatives, so
  // the top 2L magnitudes contain the L positives unless rank falls short.
  const int want = std::min(2 * L, total);
  Spectrum pairs;
  if (total <= kJacobiLimit) {
    pairs = select_pairs(jacobi_full(to_dense(tau)), want);
  } else {
    GraphOperator op(tau);
    EigenDecomposition top = power_top(op, want);
    pairs.values = top.values;
    pairs.vectors = top.vectors;
  }
  const double top_mag = std::max(pairs.values.cwiseAbs().maxCoeff(), 1e-300);
  Spectrum out;
  out.values.resize(L);
  out.vectors.resize(n_users, L);
  int got = 0;
  for (int i = 0; i < want && got < L; ++i) {
    if (pairs.values[i] > 1e-12 * top_mag) {
      out.values[got] = pairs.values[i];
      out.vectors.col(got) =
          std::sqrt(2.0) * pairs.vectors.col(i).head(n_users);
      ++got;
    }
  }
  if (got < L) {
    throw DegeneracyError("svd_top: fewer than L positive singular values");
  }
  sign_normalize_columns(out.vectors);
  return out;
}

Embedding embed(const Spectrum& spec) {
  Embedding out;
  out.profiles = std::sqrt(static_cast<double>(spec.n())) * spec.vectors;
  return out;
}

Centroids centroids_similarity(const SimilarityModel& model, int L) {
  model.validate();
  const int k = model.n_classes;
  Eigen::MatrixXd msym(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      msym(i, j) = std::sqrt(model.alpha[i]) * model.b_at(i, j) *
                   std::sqrt(model.alpha[j]);
    }
  }
  return centroids_from_reduction(msym, model.alpha, L, "M");
}

Centroids centroids_rating(const RatingModel& model, int L) {
  model.validate();
  const int k = model.n_user_classes;
  const int kp = model.n_item_classes;
  Eigen::MatrixXd c(k, kp);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < kp; ++j) {
      c(i, j) = std::sqrt(model.alpha[i]) * model.r_at(i, j) *
                std::sqrt(model.beta[j]);
    }
  }
  Eigen::MatrixXd gsym = c * c.transpose();
  return centroids_from_reduction(gsym, model.alpha, L, "G");
}

double subspace_residual(const Eigen::MatrixXd& x, const Spectrum& basis) {
  if (x.rows() != basis.vectors.rows()) {
    throw ParameterError("subspace_residual: row count mismatch");
  }
  const double total = x.squaredNorm();
  if (total == 0.0) return 0.0;
  const Eigen::MatrixXd coeff = basis.vectors.transpose() * x;
  const Eigen::MatrixXd res = x - basis.vectors * coeff;
  return res.squaredNorm() / total;
}

double spectral_radius_ratio(const SimilarityModel& model,
                             std::uint64_t seed) {
  model.validate();
  auto [graph, assign] = gen_similarity(model, seed);
  const int n = graph.n();
  const int k = model.n_classes;
  const double p = model.p();

  // Centered operator Q = A - E A; E A has zero diagonal, applied through
  // per-class sums in O(N + K) per product.
  const auto apply_q = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    graph.multiply(x.data(), y.data());
    std::vector<double> class_sum(k, 0.0);
    for (int u = 0; u < n; ++u) class_sum[assign[u]] += x[u];
    for (int u = 0; u < n; ++u) {
      const int ku = assign[u];
      double mean_part = 0.0;
      for (int l = 0; l < k; ++l) {
        mean_part += model.b_at(ku, l) * class_sum[l];
      }
      mean_part -= model.b_at(ku, ku) * x[u];
      y[u] -= p * mean_part;
    }
  };

  Rng start(seed, StreamDomain::kPowerStart, 0);
  Eigen::VectorXd w(n), z(n), t(n);
  for (int i = 0; i < n; ++i) w[i] = start.gaussian();
  w.normalize();
  double mu = 0.0;
  double prev = -1.0;
  for (int iter = 0; iter < 4000; ++iter) {
    apply_q(w, t);
    apply_q(t, z);
    mu = w.dot(z);
    const double nz = z.norm();
    if (nz == 0.0) return 0.0;
    w = z / nz;
    if (iter % 25 == 24) {
      if (prev > 0.0 && std::abs(mu - prev) <= 1e-10 * mu) break;
      prev = mu;
    }
  }
  return std::sqrt(std::max(mu, 0.0)) / std::sqrt(model.omega);
}

Embedding recombine(const Embedding& emb, const Eigen::MatrixXd& w) {
  const int l = emb.dim();
  if (w.rows() != l || w.cols() != l) {
    throw ParameterError("recombine: w must be L x L");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(w);
  if (!lu.isInvertible()) {
    throw ParameterError("recombine: w is singular");
  }
  Embedding out;
  out.profiles = emb.profiles * w;
  return out;
}

std::vector<int> nearest_centroid_labels(const Embedding& emb,
                                         const Centroids& cents) {
  if (emb.dim() != cents.dim()) {
    throw ParameterError("nearest_centroid_labels: dimension mismatch");
  }
  std::vector<int> labels(emb.n());
  for (int u = 0; u < emb.n(); ++u) {
    int best = 0;
    double best_d = (emb.profiles.row(u) - cents.points.row(0)).squaredNorm();
    for (int c = 1; c < cents.k(); ++c) {
      const double d =
          (emb.profiles.row(u) - cents.points.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    labels[u] = best;
  }
  return labels;
}

ClusterAccuracy cluster_accuracy(const Embedding& emb, const Centroids& cents,
                                 const ClassAssignment& truth, double a) {
  if (emb.n() != truth.size()) {
    throw ParameterError("cluster_accuracy: size mismatch");
  }
  if (emb.dim() != cents.dim()) {
    throw ParameterError("cluster_accuracy: dimension mismatch");
  }
  // Align per-column signs against the true centroids; eigenvector signs
  // carry no information.
  Embedding aligned;
  aligned.profiles = emb.profiles;
  for (int j = 0; j < emb.dim(); ++j) {
    double dot = 0.0;
    for (int u = 0; u < emb.n(); ++u) {
      dot += emb.profiles(u, j) * cents.points(truth[u], j);
    }
    if (dot < 0.0) aligned.profiles.col(j) = -aligned.profiles.col(j);
  }
  int within = 0;
  int correct = 0;
  const std::vector<int> labels = nearest_centroid_labels(aligned, cents);
  for (int u = 0; u < emb.n(); ++u) {
    const double d =
        (aligned.profiles.row(u) - cents.points.row(truth[u])).norm();
    if (d <= a) ++within;
    if (labels[u] == truth[u]) ++correct;
  }
  const double n = static_cast<double>(emb.n());
  return {within / n, correct / n};
}

namespace {
std::vector<std::vector<double>> to_rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> rows(m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    rows[i].assign(m.row(i).begin(), m.row(i).end());
  }
  return rows;
}
}  // namespace

void write_embedding_csv(const Embedding& emb, const std::string& path) {
  write_matrix_csv(path, to_rows(emb.profiles));
}

void write_centroids_csv(const Centroids& cents, const std::string& path) {
  write_matrix_csv(path, to_rows(cents.points));
}

}  // namespace spectra

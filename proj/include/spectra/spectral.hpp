#pragma once

// Centralized spectral pipeline: top eigenpairs and singular pairs, user
// profiles, analytic class centroids, and the diagnostics built on them.
//
// Ordering convention everywhere: eigenvalues descending by magnitude,
// positive before negative on an exact tie, and each vector's first
// coordinate above 1e-12 * ||v||_inf made positive. Centroid extraction
// additionally validates the model conditions and raises DegeneracyError
// or IndistinguishableClassesError instead of picking an order silently.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spectra/eigsolve.hpp"
#include "spectra/graph.hpp"
#include "spectra/models.hpp"

namespace spectra {

struct Spectrum {
  Eigen::VectorXd values;   // L entries, |values| non-increasing
  Eigen::MatrixXd vectors;  // N x L, column-orthonormal
  int dim() const { return static_cast<int>(values.size()); }
  int n() const { return static_cast<int>(vectors.rows()); }
};

struct Embedding {
  Eigen::MatrixXd profiles;  // N x L, row u = sqrt(N) * z_u'
  int dim() const { return static_cast<int>(profiles.cols()); }
  int n() const { return static_cast<int>(profiles.rows()); }
};

struct Centroids {
  Eigen::MatrixXd points;            // K x L, row k = t_k' (or chi_k')
  std::vector<double> norm_weights;  // the alpha used for normalization
  int k() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// Top-L eigenpairs by magnitude of a dense symmetric matrix. Symmetry is
// checked to 1e-10 entrywise. Dense Jacobi up to kJacobiLimit, deflated
// power iteration above.
Spectrum eig_top(const Eigen::MatrixXd& a, int L);

// Same contract for an operator that is only available as a matvec.
Spectrum eig_top(const LinearOperator& op, int L);

// Adapter for sparse adjacencies.
class GraphOperator final : public LinearOperator {
 public:
  explicit GraphOperator(const SparseGraph& g) : g_(&g) {}
  int dim() const override { return g_->n(); }
  void apply(const double* x, double* y) const override {
    g_->multiply(x, y);
  }

 private:
  const SparseGraph* g_;
};

// Top-L left singular pairs of a bipartite incidence: eigenpairs of the
// symmetric embedding restricted to positive eigenvalues, left vector =
// sqrt(2) * first N coordinates. Throws DegeneracyError when fewer than L
// positive eigenvalues exist.
Spectrum svd_top(const SparseGraph& s, int L);

// profiles(u, l) = sqrt(N) * vectors(u, l).
Embedding embed(const Spectrum& spec);

// Analytic centroids of the similarity model: eigenvectors of
// M = B diag(alpha), alpha-normalized, computed through the symmetric
// reduction diag(sqrt a) B diag(sqrt a). Validates L <= rank(M), the
// spectral gap condition, and pairwise row distinctness.
Centroids centroids_similarity(const SimilarityModel& model, int L);

// Analytic centroids of the rating model: eigenvectors of
// G = R diag(beta) R' diag(alpha), same mechanics.
Centroids centroids_rating(const RatingModel& model, int L);

// ||(I - PP')x||_F^2 / ||x||_F^2; zero x gives 0.
double subspace_residual(const Eigen::MatrixXd& x, const Spectrum& basis);

// rho(A - E A) / sqrt(omega) for one sampled graph, via power iteration
// on the centered operator. E A is applied through per-class sums, so no
// dense matrix is formed.
double spectral_radius_ratio(const SimilarityModel& model,
                             std::uint64_t seed);

// profiles * w; w must be full rank (checked by LU).
Embedding recombine(const Embedding& emb, const Eigen::MatrixXd& w);

// Nearest-centroid labels; ties go to the lowest class index.
std::vector<int> nearest_centroid_labels(const Embedding& emb,
                                         const Centroids& cents);

struct ClusterAccuracy {
  double fraction_within;       // share of rows within distance a of truth
  double assignment_accuracy;   // nearest-centroid label == truth
};

// Per-column signs of the embedding are aligned to the centroids using
// the true labels before measuring, since eigenvector signs are arbitrary.
ClusterAccuracy cluster_accuracy(const Embedding& emb, const Centroids& cents,
                                 const ClassAssignment& truth, double a);

// CSV persistence: one row per entity, 17 significant digits.
void write_embedding_csv(const Embedding& emb, const std::string& path);
void write_centroids_csv(const Centroids& cents, const std::string& path);

}  // namespace spectra

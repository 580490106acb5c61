#include "spectra/synthdata.hpp"

#include <algorithm>
#include <cmath>

#include "spectra/errors.hpp"
#include "spectra/rng.hpp"

namespace spectra {

namespace {

// Index of unordered pair (u, v) with u < v in the lexicographic layout:
// pairs (0,1), (0,2), ..., (0,n-1), (1,2), ... This is the documented
// stream-splitting rule for edge sampling.
std::uint64_t pair_index(std::uint64_t u, std::uint64_t v, std::uint64_t n) {
  return u * n - u * (u + 1) / 2 + (v - u - 1);
}

}  // namespace

std::pair<SparseGraph, ClassAssignment> gen_similarity(
    const SimilarityModel& model, std::uint64_t seed) {
  model.validate();
  double p = model.p();
  double bmax = *std::max_element(model.b.begin(), model.b.end());
  if (p * bmax > 1.0)
    throw ParameterError("p * max(b) exceeds 1; not a Bernoulli parameter");
  int n = model.n_users;
  ClassAssignment assign =
      assign_contiguous(apportion_class_sizes(model.alpha, n));
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(0.5 * p * bmax * n * n * 0.5) + 16);
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      double prob = p * model.b_at(assign[u], assign[v]);
      if (prob <= 0.0) continue;
      double x = pair_uniform01(seed, StreamDomain::kSimilarityEdges,
                                pair_index(u, v, n));
      if (x < prob) edges.push_back({u, v, 1.0});
    }
  }
  return {SparseGraph::build(n, std::move(edges)), std::move(assign)};
}

RatingData gen_ratings(const RatingModel& model, std::uint64_t seed) {
  model.validate();
  double p = model.p();
  double rmax = *std::max_element(model.r.begin(), model.r.end());
  if (p * rmax > 1.0)
    throw ParameterError("p * max(r) exceeds 1; not a Bernoulli parameter");
  int n = model.n_users;
  int f = model.n_items;
  RatingData out;
  out.users = assign_contiguous(apportion_class_sizes(model.alpha, n));
  out.items = assign_contiguous(apportion_class_sizes(model.beta, f));
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u) {
    for (int i = 0; i < f; ++i) {
      double prob = p * model.r_at(out.users[u], out.items[i]);
      if (prob <= 0.0) continue;
      double x = pair_uniform01(
          seed, StreamDomain::kRatingEntries,
          static_cast<std::uint64_t>(u) * static_cast<std::uint64_t>(f) + i);
      if (x < prob) edges.push_back({u, n + i, 1.0});
    }
  }
  out.s = SparseGraph::build(n + f, std::move(edges), GraphKind::kBipartite, n);
  return out;
}

Eigen::MatrixXd expected_adjacency(const SimilarityModel& model,
                                   const ClassAssignment& assign,
                                   bool include_diagonal) {
  model.validate();
  int n = model.n_users;
  if (n > 5000) throw SizeGuardError("expected_adjacency is guarded to N <= 5000");
  if (assign.size() != n)
    throw ParameterError("assignment size must match n_users");
  double p = model.p();
  Eigen::MatrixXd out(n, n);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      out(u, v) = p * model.b_at(assign[u], assign[v]);
  if (!include_diagonal) out.diagonal().setZero();
  return out;
}

SparseGraph tau_embed(const SparseGraph& s) {
  if (s.kind() != GraphKind::kBipartite)
    throw ParameterError("tau_embed needs a bipartite graph");
  // The bipartite incidence already is [[0, S], [S', 0]] on N + F nodes;
  // re-badge it as a plain symmetric adjacency.
  return SparseGraph::build(s.n(), s.edge_list());
}

Eigen::MatrixXd to_dense(const SparseGraph& g) {
  if (g.n() > 5000) throw SizeGuardError("dense conversion is guarded to N <= 5000");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g.n(), g.n());
  for (int u = 0; u < g.n(); ++u) {
    auto nb = g.neighbors(u);
    auto w = g.weights(u);
    for (std::size_t i = 0; i < nb.size(); ++i) out(u, nb[i]) = w[i];
  }
  return out;
}

}  // namespace spectra

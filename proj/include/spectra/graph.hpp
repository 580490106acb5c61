#pragma once

// Weighted undirected sparse graphs in CSR form, plus the text edge-list
// format used to persist them.
//
// A graph is either a plain symmetric adjacency ("similarity") or a
// bipartite incidence embedded as a symmetric matrix on n_left + n_right
// nodes ("bipartite"): users occupy ids [0, n_left) and items occupy
// [n_left, n). In the bipartite case every edge crosses the cut, so the
// adjacency IS the block matrix [[0, S], [S', 0]].

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spectra {

struct Edge {
  int u;
  int v;
  double w;
};

enum class GraphKind { kSimilarity, kBipartite };

class SparseGraph {
 public:
  SparseGraph() = default;

  // Edges must satisfy u < v, no duplicates, no self-loops. Both directions
  // are stored; neighbor lists end up sorted by node id.
  static SparseGraph build(int n, std::vector<Edge> edges,
                           GraphKind kind = GraphKind::kSimilarity,
                           int n_left = 0);

  int n() const { return n_; }
  std::int64_t m() const { return m_; }
  GraphKind kind() const { return kind_; }
  int n_left() const { return n_left_; }
  int n_right() const { return n_ - n_left_; }

  int degree(int u) const { return row_ptr_[u + 1] - row_ptr_[u]; }
  std::span<const int> neighbors(int u) const {
    return {col_idx_.data() + row_ptr_[u],
            static_cast<std::size_t>(degree(u))};
  }
  std::span<const double> weights(int u) const {
    return {weights_.data() + row_ptr_[u],
            static_cast<std::size_t>(degree(u))};
  }

  // Adjacency lookup; 0 when (u, v) is not an edge. Binary search.
  double weight(int u, int v) const;
  bool has_edge(int u, int v) const;

  // Undirected edge list with u < v, sorted.
  std::vector<Edge> edge_list() const;

  // y = A x, using the symmetric adjacency.
  void multiply(const double* x, double* y) const;

  // Connected component id per node, 0-based, and the component count.
  std::pair<std::vector<int>, int> components() const;
  bool connected() const;

  // Restriction to the given nodes (ids are remapped to 0..k-1 in the
  // order given); keep must be sorted ascending.
  SparseGraph induced_subgraph(const std::vector<int>& keep) const;

 private:
  int n_ = 0;
  std::int64_t m_ = 0;
  GraphKind kind_ = GraphKind::kSimilarity;
  int n_left_ = 0;
  std::vector<int> row_ptr_;
  std::vector<int> col_idx_;
  std::vector<double> weights_;
};

// Text format: header "n m", then one "u v w" line per undirected edge with
// u < v, 0-indexed. Weights are written with enough digits to round-trip.
void write_edge_list(const SparseGraph& g, const std::string& path);
SparseGraph read_edge_list(const std::string& path,
                           GraphKind kind = GraphKind::kSimilarity,
                           int n_left = 0);

}  // namespace spectra

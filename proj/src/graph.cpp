#include "spectra/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "spectra/errors.hpp"
#include "spectra/io.hpp"

namespace spectra {

SparseGraph SparseGraph::build(int n, std::vector<Edge> edges, GraphKind kind,
                               int n_left) {
  if (n < 0) throw ParameterError("node count must be nonnegative");
  if (kind == GraphKind::kBipartite && (n_left <= 0 || n_left >= n) && n > 0)
    throw ParameterError("bipartite graph needs 0 < n_left < n");
  SparseGraph g;
  g.n_ = n;
  g.kind_ = kind;
  g.n_left_ = kind == GraphKind::kBipartite ? n_left : 0;
  g.m_ = static_cast<std::int64_t>(edges.size());
  g.row_ptr_.assign(n + 1, 0);
  for (const Edge& e : edges) {
    if (e.u < 0 || e.v >= n || e.u >= e.v)
      throw ParameterError("edge endpoints must satisfy 0 <= u < v < n");
    if (!std::isfinite(e.w)) throw ParameterError("edge weight must be finite");
    if (kind == GraphKind::kBipartite && (e.u >= n_left || e.v < n_left))
      throw ParameterError("bipartite edge must cross the cut");
    ++g.row_ptr_[e.u + 1];
    ++g.row_ptr_[e.v + 1];
  }
  for (int i = 0; i < n; ++i) g.row_ptr_[i + 1] += g.row_ptr_[i];
  g.col_idx_.resize(2 * edges.size());
  g.weights_.resize(2 * edges.size());
  std::vector<int> cursor(g.row_ptr_.begin(), g.row_ptr_.end() - 1);
  // Both directions sorted together so every neighbor list ends up ordered.
  struct Half {
    int r;
    int c;
    double w;
  };
  std::vector<Half> halves;
  halves.reserve(2 * edges.size());
  for (const Edge& e : edges) {
    halves.push_back({e.u, e.v, e.w});
    halves.push_back({e.v, e.u, e.w});
  }
  std::sort(halves.begin(), halves.end(), [](const Half& a, const Half& b) {
    return a.r != b.r ? a.r < b.r : a.c < b.c;
  });
  for (const Half& h : halves) {
    g.col_idx_[cursor[h.r]] = h.c;
    g.weights_[cursor[h.r]++] = h.w;
  }
  for (int u = 0; u < n; ++u) {
    auto nb = g.neighbors(u);
    if (std::adjacent_find(nb.begin(), nb.end()) != nb.end())
      throw ParameterError("duplicate edge");
  }
  return g;
}

double SparseGraph::weight(int u, int v) const {
  auto nb = neighbors(u);
  auto it = std::lower_bound(nb.begin(), nb.end(), v);
  if (it == nb.end() || *it != v) return 0.0;
  return weights_[row_ptr_[u] + (it - nb.begin())];
}

bool SparseGraph::has_edge(int u, int v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<Edge> SparseGraph::edge_list() const {
  std::vector<Edge> out;
  out.reserve(static_cast<std::size_t>(m_));
  for (int u = 0; u < n_; ++u) {
    auto nb = neighbors(u);
    auto w = weights(u);
    for (std::size_t i = 0; i < nb.size(); ++i)
      if (u < nb[i]) out.push_back({u, nb[i], w[i]});
  }
  return out;
}

void SparseGraph::multiply(const double* x, double* y) const {
  for (int u = 0; u < n_; ++u) {
    double acc = 0.0;
    for (int i = row_ptr_[u]; i < row_ptr_[u + 1]; ++i)
      acc += weights_[i] * x[col_idx_[i]];
    y[u] = acc;
  }
}

std::pair<std::vector<int>, int> SparseGraph::components() const {
  std::vector<int> comp(n_, -1);
  std::vector<int> stack;
  int count = 0;
  for (int s = 0; s < n_; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = count;
    stack.push_back(s);
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : neighbors(u)) {
        if (comp[v] < 0) {
          comp[v] = count;
          stack.push_back(v);
        }
      }
    }
    ++count;
  }
  return {std::move(comp), count};
}

bool SparseGraph::connected() const {
  if (n_ <= 1) return true;
  return components().second == 1;
}

SparseGraph SparseGraph::induced_subgraph(const std::vector<int>& keep) const {
  std::vector<int> remap(n_, -1);
  for (std::size_t i = 0; i < keep.size(); ++i) remap[keep[i]] = static_cast<int>(i);
  std::vector<Edge> edges;
  for (int u : keep) {
    auto nb = neighbors(u);
    auto w = weights(u);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      int v = nb[i];
      if (u < v && remap[v] >= 0)
        edges.push_back({remap[u], remap[v], w[i]});
    }
  }
  int left = 0;
  if (kind_ == GraphKind::kBipartite)
    for (int u : keep) left += u < n_left_ ? 1 : 0;
  return build(static_cast<int>(keep.size()), std::move(edges), kind_, left);
}

void write_edge_list(const SparseGraph& g, const std::string& path) {
  std::ostringstream out;
  out << g.n() << ' ' << g.m() << '\n';
  char buf[64];
  for (const Edge& e : g.edge_list()) {
    int len = std::snprintf(buf, sizeof buf, "%d %d %.17g\n", e.u, e.v, e.w);
    out.write(buf, len);
  }
  atomic_write_file(path, out.str());
}

SparseGraph read_edge_list(const std::string& path, GraphKind kind,
                           int n_left) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  int n;
  std::int64_t m;
  if (!(in >> n >> m)) throw std::runtime_error("bad edge-list header in " + path);
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    Edge e;
    if (!(in >> e.u >> e.v >> e.w))
      throw std::runtime_error("truncated edge list in " + path);
    edges.push_back(e);
  }
  return SparseGraph::build(n, std::move(edges), kind, n_left);
}

}  // namespace spectra

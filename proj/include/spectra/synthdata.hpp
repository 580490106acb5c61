#pragma once

// Synthetic data generation from the planted class models, plus the exact
// expectations the oracle paths consume.
//
// Sampling is counter-based: each unordered user pair (or user-item pair)
// owns one RNG substream indexed by its pair index, so the generated graph
// is a pure function of (model, seed) and does not depend on traversal
// order. Class labels are contiguous by default (class 0 first); the
// algorithms never read labels, and oracle checks are simplest this way.

#include <cstdint>
#include <utility>

#include <Eigen/Dense>

#include "spectra/graph.hpp"
#include "spectra/models.hpp"

namespace spectra {

// Each unordered pair (u < v) is an edge independently with probability
// p * b_{k(u)k(v)}; the diagonal stays empty. Throws ParameterError when
// p * max(b) > 1.
std::pair<SparseGraph, ClassAssignment> gen_similarity(
    const SimilarityModel& model, std::uint64_t seed);

// S_{ui} = 1 independently with probability p * r_{k(u)k'(i)}. The result
// is the bipartite incidence on N + F nodes (users first).
struct RatingData {
  SparseGraph s;            // bipartite, n_left = N
  ClassAssignment users;    // N labels
  ClassAssignment items;    // F labels
};
RatingData gen_ratings(const RatingModel& model, std::uint64_t seed);

// Block expectation matrix: entry (u, v) = p * b_{k(u)k(v)} for u != v.
// include_diagonal = false zeroes the diagonal (matching E A, since
// A_{uu} = 0); include_diagonal = true keeps p * b_{k(u)k(u)} there, which
// is the block matrix whose top eigenvectors are exactly constant per
// class. Guarded to N <= 5000.
Eigen::MatrixXd expected_adjacency(const SimilarityModel& model,
                                   const ClassAssignment& assign,
                                   bool include_diagonal = false);

// View the bipartite incidence as the symmetric block matrix
// [[0, S], [S', 0]] on N + F nodes. Validates bipartiteness; the returned
// graph is the plain symmetric adjacency.
SparseGraph tau_embed(const SparseGraph& s);

// Dense copy of a sparse adjacency, same N <= 5000 guard.
Eigen::MatrixXd to_dense(const SparseGraph& g);

}  // namespace spectra

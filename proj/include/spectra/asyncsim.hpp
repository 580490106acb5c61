#pragma once

// Event-driven simulation of the asynchronous profiling algorithm.
//
// Each node runs a Poisson clock of rate lambda and alternates between two
// local procedures: refreshing its partial product Pi_u = sum_{v~u} A_uv X_v
// and moving its coordinates by a fixed gain along the preconditioned
// drive (the neighbors' partial products stand in for A^2 X). Each edge
// runs a Poisson clock of rate mu; when it fires, its endpoints average
// their trackers Phi (of mean f^(2)) and Psi (of mean g) and re-inject the
// innovations accumulated since their previous exchange, measured against
// the snapshots X0, Pi0 kept from that moment.
//
// Everything is deterministic in (graph, L, config): clocks draw from
// per-entity substreams, and simultaneous events are ordered by
// (time, kind, index).

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "spectra/graph.hpp"
#include "spectra/rng.hpp"
#include "spectra/trace.hpp"

namespace spectra {

struct AsyncNodeState {
  Eigen::RowVectorXd x;    // X_u
  Eigen::RowVectorXd pi;   // Pi_u, refreshed every other local update
  Eigen::RowVectorXd x0;   // snapshots from the last gossip this node joined
  Eigen::RowVectorXd pi0;
  Eigen::MatrixXd phi;     // L x L tracker of the mean of f^(2)
  double psi = 0.0;        // tracker of the mean of g
  int w = 0;               // 0: next local call refreshes Pi, 1: moves X
};

struct SimConfig {
  double gain = 1e-3;       // gamma
  double node_rate = 0.2;   // lambda
  double edge_rate = 10.0;  // mu, should dominate lambda
  double horizon = 600.0;   // simulated time units
  double noise_std = 0.0;   // optional extra noise on coordinate moves
  std::uint64_t seed = 0;
  double trace_every = 1.0; // sampling period in simulated time
};

// f^(2) evaluated at a partial product row: the L x L outer product.
Eigen::MatrixXd f2_of(const Eigen::RowVectorXd& pi);

// One Update-Local(u) call. Mutates states[u] only; neighbor rows are read
// through the graph. noise_rng, when given together with a positive
// config.noise_std, adds a Gaussian term inside the gain bracket.
void update_local(int u, std::vector<AsyncNodeState>& states,
                  const SparseGraph& g, const SimConfig& config,
                  Rng* noise_rng = nullptr);

// One Gossip(u, v) call on an existing edge (ContractViolation otherwise).
// Averages both trackers, injects both endpoints' innovations, refreshes
// both snapshots.
void gossip(int u, int v, std::vector<AsyncNodeState>& states,
            const SparseGraph& g);

// Full run over a connected similarity graph. Trace columns: t_sim,
// subspace_residual, gram_offdiag_max (largest |cosine| between coordinate
// columns), events_processed. The summary carries the event counts and
// final metrics; a weak timescale separation (mu <= lambda) is recorded as
// a warning, not an error.
Trace run_async(const SparseGraph& graph, int L, const SimConfig& config);

}  // namespace spectra

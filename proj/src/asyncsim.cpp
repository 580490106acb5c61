#include "spectra/asyncsim.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <utility>

#include "spectra/eigsolve.hpp"
#include "spectra/errors.hpp"
#include "spectra/spectral.hpp"

namespace spectra {

namespace {

struct Event {
  double t;
  int kind;  // 0: node update, 1: edge gossip
  int idx;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.t != b.t) return a.t > b.t;
    if (a.kind != b.kind) return a.kind > b.kind;
    return a.idx > b.idx;
  }
};

Eigen::MatrixXd dense_adjacency(const SparseGraph& g) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.n(), g.n());
  for (int u = 0; u < g.n(); ++u) {
    auto nbrs = g.neighbors(u);
    auto ws = g.weights(u);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      a(u, nbrs[i]) = ws[i];
    }
  }
  return a;
}

}  // namespace

Eigen::MatrixXd f2_of(const Eigen::RowVectorXd& pi) {
  return pi.transpose() * pi;
}

void update_local(int u, std::vector<AsyncNodeState>& states,
                  const SparseGraph& g, const SimConfig& config,
                  Rng* noise_rng) {
  AsyncNodeState& s = states[static_cast<std::size_t>(u)];
  const int L = static_cast<int>(s.x.cols());
  auto nbrs = g.neighbors(u);
  auto ws = g.weights(u);

  if (s.w == 1) {
    const double n = static_cast<double>(g.n());
    const double y = std::max(
        {1.0, std::abs(s.psi), s.phi.cwiseAbs().sum() / (n * L * L)});
    Eigen::RowVectorXd drive = Eigen::RowVectorXd::Zero(L);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      drive += ws[i] * states[static_cast<std::size_t>(nbrs[i])].pi;
    }
    drive -= n * (s.x * s.phi);
    if (noise_rng != nullptr && config.noise_std > 0.0) {
      for (int l = 0; l < L; ++l) {
        drive(l) += config.noise_std * noise_rng->gaussian();
      }
    }
    s.x += (config.gain / y) * drive;
  } else {
    s.pi.setZero(L);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      s.pi += ws[i] * states[static_cast<std::size_t>(nbrs[i])].x;
    }
  }
  s.w = 1 - s.w;
}

void gossip(int u, int v, std::vector<AsyncNodeState>& states,
            const SparseGraph& g) {
  if (u == v || !g.has_edge(u, v)) {
    throw ContractViolation("gossip requires an existing edge");
  }
  AsyncNodeState& su = states[static_cast<std::size_t>(u)];
  AsyncNodeState& sv = states[static_cast<std::size_t>(v)];

  // Trackers average, then each endpoint re-injects what its local
  // quantity gained since its previous exchange.
  const Eigen::MatrixXd phi_avg = 0.5 * (su.phi + sv.phi);
  su.phi = phi_avg + f2_of(su.pi) - f2_of(su.pi0);
  sv.phi = phi_avg + f2_of(sv.pi) - f2_of(sv.pi0);

  const double psi_avg = 0.5 * (su.psi + sv.psi);
  su.psi = psi_avg + su.x.squaredNorm() - su.x0.squaredNorm();
  sv.psi = psi_avg + sv.x.squaredNorm() - sv.x0.squaredNorm();

  su.x0 = su.x;
  su.pi0 = su.pi;
  sv.x0 = sv.x;
  sv.pi0 = sv.pi;
}

Trace run_async(const SparseGraph& graph, int L, const SimConfig& config) {
  if (L < 1) {
    throw ParameterError("embedding dimension must be positive");
  }
  if (graph.n() < 2 || graph.m() == 0) {
    throw ParameterError("async run needs a graph with edges");
  }
  if (L > graph.n()) {
    throw ParameterError("embedding dimension exceeds node count");
  }
  if (!graph.connected()) {
    throw ParameterError("async run requires a connected graph");
  }
  if (!(config.gain > 0.0) || !std::isfinite(config.gain)) {
    throw ParameterError("gain must be positive");
  }
  if (config.node_rate < 0.0 || config.edge_rate < 0.0 ||
      !std::isfinite(config.node_rate) || !std::isfinite(config.edge_rate)) {
    throw ParameterError("rates must be non-negative");
  }
  if (config.horizon < 0.0 || !std::isfinite(config.horizon)) {
    throw ParameterError("horizon must be non-negative");
  }
  if (!(config.trace_every > 0.0)) {
    throw ParameterError("trace interval must be positive");
  }
  if (config.noise_std < 0.0) {
    throw ParameterError("noise level must be non-negative");
  }

  const int n = graph.n();

  Trace trace;
  trace.columns = {"t_sim", "subspace_residual", "gram_offdiag_max",
                   "events_processed"};
  if (config.edge_rate <= config.node_rate) {
    trace.warning =
        "gossip rate does not dominate the update rate; trackers will lag";
  }

  Spectrum oracle;
  if (n <= kJacobiLimit) {
    oracle = eig_top(dense_adjacency(graph), L);
  } else {
    oracle = eig_top(GraphOperator(graph), L);
  }

  std::vector<AsyncNodeState> states(static_cast<std::size_t>(n));
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int u = 0; u < n; ++u) {
    auto& s = states[static_cast<std::size_t>(u)];
    Rng rng(config.seed, make_stream(StreamDomain::kAsyncInit,
                                     static_cast<std::uint64_t>(u)));
    s.x.resize(L);
    for (int l = 0; l < L; ++l) {
      s.x(l) = scale * rng.gaussian();
    }
    s.pi = Eigen::RowVectorXd::Zero(L);
    s.x0 = s.x;
    s.pi0 = s.pi;
    // Trackers start at the local quantities of the initial snapshot, so
    // the network sum of each tracker equals the sum of the snapshot
    // quantities at all times.
    s.phi = Eigen::MatrixXd::Zero(L, L);
    s.psi = s.x.squaredNorm();
    s.w = 0;
  }

  const std::vector<Edge> edges = graph.edge_list();
  std::vector<Rng> node_clocks;
  node_clocks.reserve(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    node_clocks.emplace_back(config.seed,
                             make_stream(StreamDomain::kAsyncNodeClock,
                                         static_cast<std::uint64_t>(u)));
  }
  std::vector<Rng> edge_clocks;
  edge_clocks.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    edge_clocks.emplace_back(config.seed,
                             make_stream(StreamDomain::kAsyncEdgeClock,
                                         static_cast<std::uint64_t>(e)));
  }
  std::vector<Rng> noise_rngs;
  if (config.noise_std > 0.0) {
    noise_rngs.reserve(static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) {
      noise_rngs.emplace_back(config.seed,
                              make_stream(StreamDomain::kAsyncNoise,
                                          static_cast<std::uint64_t>(u)));
    }
  }

  std::priority_queue<Event, std::vector<Event>, EventAfter> queue;
  if (config.node_rate > 0.0) {
    for (int u = 0; u < n; ++u) {
      queue.push(Event{node_clocks[static_cast<std::size_t>(u)].exponential(
                           config.node_rate),
                       0, u});
    }
  }
  if (config.edge_rate > 0.0) {
    for (std::size_t e = 0; e < edges.size(); ++e) {
      queue.push(Event{edge_clocks[e].exponential(config.edge_rate), 1,
                       static_cast<int>(e)});
    }
  }

  long long events = 0;
  long long node_events = 0;
  long long edge_events = 0;

  auto emit = [&](double t_sim) {
    Eigen::MatrixXd x(n, L);
    for (int u = 0; u < n; ++u) {
      x.row(u) = states[static_cast<std::size_t>(u)].x;
    }
    const double res = subspace_residual(x, oracle);
    double offdiag = 0.0;
    for (int i = 0; i < L; ++i) {
      const double ni = x.col(i).norm();
      for (int j = i + 1; j < L; ++j) {
        const double nj = x.col(j).norm();
        if (ni > 0.0 && nj > 0.0) {
          offdiag = std::max(
              offdiag, std::abs(x.col(i).dot(x.col(j))) / (ni * nj));
        }
      }
    }
    trace.append({t_sim, res, offdiag, static_cast<double>(events)});
  };

  emit(0.0);
  double next_sample = config.trace_every;

  try {
    while (!queue.empty() && queue.top().t <= config.horizon) {
      const Event ev = queue.top();
      queue.pop();
      while (next_sample < ev.t && next_sample <= config.horizon) {
        emit(next_sample);
        next_sample += config.trace_every;
      }
      if (ev.kind == 0) {
        update_local(ev.idx, states, graph, config,
                     noise_rngs.empty()
                         ? nullptr
                         : &noise_rngs[static_cast<std::size_t>(ev.idx)]);
        ++node_events;
        const auto& xu = states[static_cast<std::size_t>(ev.idx)].x;
        for (int l = 0; l < L; ++l) {
          const double c = xu(l);
          if (!std::isfinite(c) || std::abs(c) > 1e9) {
            std::ostringstream msg;
            msg << "coordinates diverged at simulated time " << ev.t
                << " node=" << ev.idx << " (coordinate " << c << ")";
            throw DivergenceError(msg.str(), events, ev.idx);
          }
        }
        queue.push(Event{
            ev.t + node_clocks[static_cast<std::size_t>(ev.idx)].exponential(
                       config.node_rate),
            0, ev.idx});
      } else {
        const Edge& e = edges[static_cast<std::size_t>(ev.idx)];
        gossip(e.u, e.v, states, graph);
        ++edge_events;
        queue.push(Event{
            ev.t + edge_clocks[static_cast<std::size_t>(ev.idx)].exponential(
                       config.edge_rate),
            1, ev.idx});
      }
      ++events;
    }
  } catch (DivergenceError& err) {
    err.trace_prefix = std::make_shared<Trace>(std::move(trace));
    throw;
  }

  while (next_sample < config.horizon) {
    emit(next_sample);
    next_sample += config.trace_every;
  }
  if (trace.rows.empty() || trace.rows.back()[0] != config.horizon) {
    emit(config.horizon);
  }

  trace.summary["events_processed"] = static_cast<double>(events);
  trace.summary["node_events"] = static_cast<double>(node_events);
  trace.summary["edge_events"] = static_cast<double>(edge_events);
  trace.summary["final_residual"] = trace.last("subspace_residual");
  trace.summary["final_gram_offdiag_max"] = trace.last("gram_offdiag_max");
  return trace;
}

}  // namespace spectra

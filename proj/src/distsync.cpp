#include "spectra/distsync.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <utility>

#include "spectra/eigsolve.hpp"
#include "spectra/errors.hpp"
#include "spectra/rng.hpp"
#include "spectra/spectral.hpp"

namespace spectra {

namespace {

// One application of the one-hop matrix (self weight plus weighted
// neighbors) to a row-major iterate.
void one_hop(const SyncOperator& op, const Eigen::MatrixXd& x,
             Eigen::MatrixXd& y) {
  const int n = op.n();
  y.resize(n, x.cols());
  for (int u = 0; u < n; ++u) {
    y.row(u) = op.self_weight(u) * x.row(u);
    auto nbrs = op.neighbors(u);
    auto ws = op.weights(u);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      y.row(u) += ws[i] * x.row(nbrs[i]);
    }
  }
}

class CsrSyncOperator final : public SyncOperator {
 public:
  CsrSyncOperator(SparseGraph g, bool two_hop, double self)
      : g_(std::move(g)), two_hop_(two_hop), self_(self) {}

  int n() const override { return g_.n(); }
  bool two_hop() const override { return two_hop_; }
  std::span<const int> neighbors(int u) const override {
    return g_.neighbors(u);
  }
  std::span<const double> weights(int u) const override {
    return g_.weights(u);
  }
  double self_weight(int) const override { return self_; }

 private:
  SparseGraph g_;
  bool two_hop_;
  double self_;
};

// Matrix-free view of the effective operator (one or two hops) for the
// oracle eigensolver.
class EffectiveOperator final : public LinearOperator {
 public:
  explicit EffectiveOperator(const SyncOperator& op) : op_(&op) {}

  int dim() const override { return op_->n(); }

  void apply(const double* x, double* y) const override {
    if (op_->two_hop()) {
      tmp_.resize(static_cast<std::size_t>(op_->n()));
      hop(x, tmp_.data());
      hop(tmp_.data(), y);
    } else {
      hop(x, y);
    }
  }

 private:
  void hop(const double* x, double* y) const {
    const int n = op_->n();
    for (int u = 0; u < n; ++u) {
      double acc = op_->self_weight(u) * x[u];
      auto nbrs = op_->neighbors(u);
      auto ws = op_->weights(u);
      for (std::size_t i = 0; i < nbrs.size(); ++i) {
        acc += ws[i] * x[nbrs[i]];
      }
      y[u] = acc;
    }
  }

  const SyncOperator* op_;
  mutable std::vector<double> tmp_;
};

void check_coordinate(double v, long long t, int node) {
  if (!std::isfinite(v) || std::abs(v) > 1e9) {
    std::ostringstream msg;
    msg << "iterate diverged at t=" << t << " node=" << node
        << " (coordinate " << v << ")";
    throw DivergenceError(msg.str(), t, node);
  }
}

}  // namespace

GainSchedule GainSchedule::paper_default() {
  GainSchedule g;
  g.kind = Kind::kPaperDefault;
  g.a = [](long long t) {
    double td = static_cast<double>(t);
    return std::min(1.0, 1.0 / (td * std::log(td + 1.0)));
  };
  g.b = [](long long t) {
    return std::pow(static_cast<double>(t), -2.0 / 3.0);
  };
  return g;
}

GainSchedule GainSchedule::offset(long long t0) {
  if (t0 < 1) {
    throw ParameterError("gain offset must be at least 1");
  }
  GainSchedule g;
  g.kind = Kind::kCustom;
  g.a = [t0](long long t) {
    double s = static_cast<double>(t + t0);
    return 1.0 / (s * std::log(s + 1.0));
  };
  g.b = [t0](long long t) {
    return std::pow(static_cast<double>(t + t0), -2.0 / 3.0);
  };
  return g;
}

GainSchedule GainSchedule::custom(std::function<double(long long)> a,
                                  std::function<double(long long)> b) {
  if (!a || !b) {
    throw ParameterError("custom gain schedule needs both callables");
  }
  GainSchedule g;
  g.kind = Kind::kCustom;
  g.a = std::move(a);
  g.b = std::move(b);
  return g;
}

GainReport validate_gains(const GainSchedule& gains, long long horizon,
                          double k_const) {
  if (!gains.a || !gains.b) {
    throw ParameterError("gain schedule is empty");
  }
  if (horizon < 100) {
    throw ParameterError("gain validation needs a horizon of at least 100");
  }
  if (k_const <= 0.0) {
    throw ParameterError("gain validation constant must be positive");
  }

  GainReport report;
  const long long half = horizon / 2;
  double sum_a2_first_half = 0.0;
  double sum_b2_first_half = 0.0;

  // log of (a/b) e^{K sum a}; kept in logs so huge ratios stay comparable.
  const long long n_checkpoints = 11;
  std::vector<double> tail_log_ratio;
  tail_log_ratio.reserve(n_checkpoints);
  std::vector<long long> checkpoints;
  for (long long i = n_checkpoints - 1; i >= 0; --i) {
    long long t = horizon - i * (horizon / 20) / (n_checkpoints - 1);
    if (checkpoints.empty() || t > checkpoints.back()) {
      checkpoints.push_back(t);
    }
  }
  std::size_t next_cp = 0;
  double last_log_ratio = 0.0;

  for (long long t = 1; t <= horizon; ++t) {
    const double at = gains.a(t);
    const double bt = gains.b(t);
    if (!std::isfinite(at) || !std::isfinite(bt)) {
      throw ParameterError("gain schedule produced a non-finite value");
    }
    if (at < 0.0 || at > 1.0 || bt < 0.0 || bt > 1.0) {
      report.in_unit_interval = false;
    }
    report.sum_a += at;
    report.sum_a2 += at * at;
    report.sum_b2 += bt * bt;
    if (t == half) {
      report.sum_a_first_half = report.sum_a;
      sum_a2_first_half = report.sum_a2;
      sum_b2_first_half = report.sum_b2;
    }
    if (next_cp < checkpoints.size() && t == checkpoints[next_cp]) {
      double log_ratio = (bt > 0.0 && at > 0.0)
                             ? std::log(at) - std::log(bt) +
                                   k_const * report.sum_a
                             : std::numeric_limits<double>::infinity();
      tail_log_ratio.push_back(log_ratio);
      last_log_ratio = log_ratio;
      ++next_cp;
    }
  }

  for (std::size_t i = 1; i < tail_log_ratio.size(); ++i) {
    if (!(tail_log_ratio[i] < tail_log_ratio[i - 1])) {
      report.ratio_tail_monotone = false;
    }
  }
  report.ratio_final = std::exp(last_log_ratio);

  // Divergent partial sums keep growing: the second half must still add a
  // visible fraction. Convergent square sums look the opposite way.
  const double second_half_a = report.sum_a - report.sum_a_first_half;
  report.sum_a_growing =
      report.sum_a > 0.0 && second_half_a > 1e-4 * report.sum_a;
  report.sum_a2_converged =
      report.sum_a2 == 0.0 ||
      (report.sum_a2 - sum_a2_first_half) < 0.05 * report.sum_a2;
  report.sum_b2_converged =
      report.sum_b2 == 0.0 ||
      (report.sum_b2 - sum_b2_first_half) < 0.05 * report.sum_b2;
  return report;
}

PsdMode PsdMode::shifted(double epsilon) {
  if (epsilon <= 0.0) {
    throw ParameterError("diagonal shift epsilon must be positive");
  }
  PsdMode m;
  m.variant = Variant::kDiagonalShift;
  m.epsilon = epsilon;
  return m;
}

PsdMode PsdMode::squared() {
  PsdMode m;
  m.variant = Variant::kSquared;
  return m;
}

SyncPlan psd_precondition(const SparseGraph& g, PsdMode mode) {
  if (g.n() == 0) {
    throw ParameterError("cannot precondition an empty graph");
  }
  if (g.m() == 0) {
    throw ParameterError("cannot precondition a graph with no edges");
  }
  if (mode.variant == PsdMode::Variant::kDiagonalShift &&
      mode.epsilon <= 0.0) {
    throw ParameterError("diagonal shift epsilon must be positive");
  }

  SyncPlan plan;
  SparseGraph work = g;
  plan.node_map.resize(static_cast<std::size_t>(g.n()));
  for (int u = 0; u < g.n(); ++u) {
    plan.node_map[static_cast<std::size_t>(u)] = u;
  }

  auto [comp, n_comp] = g.components();
  if (n_comp > 1) {
    std::vector<int> sizes(static_cast<std::size_t>(n_comp), 0);
    for (int c : comp) {
      ++sizes[static_cast<std::size_t>(c)];
    }
    // First maximum wins; components are labeled in discovery order from
    // node 0 so ties go to the component holding the smallest index.
    int best = 0;
    for (int c = 1; c < n_comp; ++c) {
      if (sizes[static_cast<std::size_t>(c)] >
          sizes[static_cast<std::size_t>(best)]) {
        best = c;
      }
    }
    std::vector<int> keep;
    keep.reserve(static_cast<std::size_t>(sizes[static_cast<std::size_t>(best)]));
    for (int u = 0; u < g.n(); ++u) {
      if (comp[static_cast<std::size_t>(u)] == best) {
        keep.push_back(u);
      }
    }
    work = g.induced_subgraph(keep);
    plan.node_map = keep;
    plan.restricted = true;
    std::ostringstream w;
    w << "graph not connected: restricted to largest component ("
      << keep.size() << " of " << g.n() << " nodes)";
    plan.warning = w.str();
  }

  double self = 0.0;
  const bool two_hop = mode.variant == PsdMode::Variant::kSquared;
  if (mode.variant == PsdMode::Variant::kDiagonalShift) {
    double delta = 0.0;
    for (int u = 0; u < work.n(); ++u) {
      double row = 0.0;
      for (double w : work.weights(u)) {
        row += std::abs(w);
      }
      delta = std::max(delta, row);
    }
    self = delta + mode.epsilon;
  }
  plan.op = std::make_unique<CsrSyncOperator>(std::move(work), two_hop, self);
  return plan;
}

Eigen::MatrixXd dense_operator(const SyncOperator& op) {
  const int n = op.n();
  if (n > 5000) {
    throw SizeGuardError("dense operator capped at 5000 nodes");
  }
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (int u = 0; u < n; ++u) {
    h(u, u) = op.self_weight(u);
    auto nbrs = op.neighbors(u);
    auto ws = op.weights(u);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      h(u, nbrs[i]) = ws[i];
    }
  }
  if (op.two_hop()) {
    return h * h;
  }
  return h;
}

StepStats step_sync(std::vector<NodeState>& states, const SyncOperator& op,
                    long long t, const GainSchedule& gains, double noise_std,
                    std::uint64_t seed, int n_for_update) {
  const int n = op.n();
  if (static_cast<int>(states.size()) != n) {
    throw ParameterError("state count does not match operator size");
  }
  if (t < 1) {
    throw ParameterError("step index starts at 1");
  }
  const int L = static_cast<int>(states[0].x.cols());
  const double n_upd =
      n_for_update > 0 ? static_cast<double>(n_for_update)
                       : static_cast<double>(n);
  const double at = gains.a(t);
  const double bt = gains.b(t);

  Eigen::MatrixXd x(n, L);
  for (int u = 0; u < n; ++u) {
    x.row(u) = states[u].x;
  }

  Eigen::MatrixXd pi;
  one_hop(op, x, pi);
  Eigen::MatrixXd pi2;
  const Eigen::MatrixXd* drive = &pi;
  if (op.two_hop()) {
    one_hop(op, pi, pi2);
    drive = &pi2;
  }

  StepStats stats;
  stats.x_norm_before = x.norm();
  double drive_sq = 0.0;
  double noise_sq = 0.0;

  Eigen::MatrixXd x_next(n, L);
  for (int u = 0; u < n; ++u) {
    const NodeState& s = states[u];
    const double y = std::max(
        {1.0, std::abs(s.psi), s.phi.cwiseAbs().sum() / (n_upd * L * L)});
    Eigen::RowVectorXd f = (drive->row(u) - n_upd * (s.x * s.phi)) / y;
    Eigen::RowVectorXd xi = Eigen::RowVectorXd::Zero(L);
    if (noise_std > 0.0) {
      Rng rng(seed, make_stream(StreamDomain::kSyncStepNoise,
                                static_cast<std::uint64_t>(t) *
                                        static_cast<std::uint64_t>(n) +
                                    static_cast<std::uint64_t>(u)));
      for (int l = 0; l < L; ++l) {
        xi(l) = noise_std * rng.gaussian();
      }
      xi /= y;
    }
    drive_sq += f.squaredNorm();
    noise_sq += xi.squaredNorm();
    x_next.row(u) = s.x + at * (f + xi);
    for (int l = 0; l < L; ++l) {
      check_coordinate(x_next(u, l), t, u);
    }
  }
  stats.drive_norm = std::sqrt(drive_sq);
  stats.noise_norm = std::sqrt(noise_sq);

  // Innovations come from the fresh coordinates.
  Eigen::MatrixXd pi_next;
  one_hop(op, x_next, pi_next);

  std::vector<Eigen::MatrixXd> f_next(static_cast<std::size_t>(n));
  std::vector<double> g_next(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    if (op.two_hop()) {
      f_next[static_cast<std::size_t>(u)] =
          pi_next.row(u).transpose() * pi_next.row(u);
    } else {
      f_next[static_cast<std::size_t>(u)] =
          x_next.row(u).transpose() * pi_next.row(u);
    }
    g_next[static_cast<std::size_t>(u)] = x_next.row(u).squaredNorm();
  }

  // Trackers gossip over the plain edges (unit weights) and absorb the
  // innovations; both read the time-t values only.
  std::vector<Eigen::MatrixXd> phi_next(static_cast<std::size_t>(n));
  std::vector<double> psi_next(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    const NodeState& s = states[u];
    Eigen::MatrixXd acc = s.phi;
    double pacc = s.psi;
    for (int v : op.neighbors(u)) {
      acc += bt * (states[static_cast<std::size_t>(v)].phi - s.phi);
      pacc += bt * (states[static_cast<std::size_t>(v)].psi - s.psi);
    }
    acc += f_next[static_cast<std::size_t>(u)] - s.f_prev;
    pacc += g_next[static_cast<std::size_t>(u)] - s.g_prev;
    if (!acc.allFinite() || !std::isfinite(pacc)) {
      throw DivergenceError("tracker diverged", t, u);
    }
    phi_next[static_cast<std::size_t>(u)] = std::move(acc);
    psi_next[static_cast<std::size_t>(u)] = pacc;
  }

  for (int u = 0; u < n; ++u) {
    auto& s = states[static_cast<std::size_t>(u)];
    s.x = x_next.row(u);
    s.phi = std::move(phi_next[static_cast<std::size_t>(u)]);
    s.psi = psi_next[static_cast<std::size_t>(u)];
    s.f_prev = std::move(f_next[static_cast<std::size_t>(u)]);
    s.g_prev = g_next[static_cast<std::size_t>(u)];
  }
  return stats;
}

Trace run_sync(const SparseGraph& graph, int L, PsdMode mode,
               const GainSchedule& gains, double noise_std,
               long long horizon, std::uint64_t seed, long long trace_every,
               int n_for_update) {
  if (L < 1) {
    throw ParameterError("embedding dimension must be positive");
  }
  if (horizon < 0) {
    throw ParameterError("horizon must be non-negative");
  }
  if (trace_every < 1) {
    throw ParameterError("trace interval must be positive");
  }
  if (horizon > 0 && (!gains.a || !gains.b)) {
    throw ParameterError("gain schedule is empty");
  }

  SyncPlan plan = psd_precondition(graph, mode);
  const SyncOperator& op = *plan.op;
  const int n = op.n();
  if (L > n) {
    throw ParameterError("embedding dimension exceeds node count");
  }

  Trace trace;
  trace.columns = {"t", "subspace_residual", "gram_error", "phi_track_err",
                   "psi_track_err"};
  trace.warning = plan.warning;

  Spectrum oracle;
  if (n <= kJacobiLimit) {
    oracle = eig_top(dense_operator(op), L);
  } else {
    EffectiveOperator wrap(op);
    oracle = eig_top(wrap, L);
  }

  std::vector<NodeState> states(static_cast<std::size_t>(n));
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Eigen::MatrixXd x0(n, L);
  for (int u = 0; u < n; ++u) {
    Rng rng(seed, make_stream(StreamDomain::kSyncInit,
                              static_cast<std::uint64_t>(u)));
    for (int l = 0; l < L; ++l) {
      x0(u, l) = scale * rng.gaussian();
    }
  }
  Eigen::MatrixXd pi0;
  one_hop(op, x0, pi0);
  for (int u = 0; u < n; ++u) {
    auto& s = states[static_cast<std::size_t>(u)];
    s.x = x0.row(u);
    if (op.two_hop()) {
      s.f_prev = pi0.row(u).transpose() * pi0.row(u);
    } else {
      s.f_prev = x0.row(u).transpose() * pi0.row(u);
    }
    s.g_prev = x0.row(u).squaredNorm();
    s.phi = s.f_prev;
    s.psi = s.g_prev;
  }

  const double x1_norm = x0.norm();
  double k1 = 0.0;
  double sum_a = 0.0;
  double m_hat = 0.0;

  auto sample = [&](long long t) {
    Eigen::MatrixXd x(n, L);
    Eigen::MatrixXd f_sum = Eigen::MatrixXd::Zero(L, L);
    double g_sum = 0.0;
    for (int u = 0; u < n; ++u) {
      x.row(u) = states[static_cast<std::size_t>(u)].x;
      f_sum += states[static_cast<std::size_t>(u)].f_prev;
      g_sum += states[static_cast<std::size_t>(u)].g_prev;
    }
    const double res = subspace_residual(x, oracle);
    const double gram_err =
        (x.transpose() * x - Eigen::MatrixXd::Identity(L, L)).norm();
    double phi_err = 0.0;
    double psi_err = 0.0;
    for (int u = 0; u < n; ++u) {
      const auto& s = states[static_cast<std::size_t>(u)];
      phi_err = std::max(phi_err,
                         (static_cast<double>(n) * s.phi - f_sum)
                             .cwiseAbs()
                             .maxCoeff());
      psi_err = std::max(psi_err,
                         std::abs(static_cast<double>(n) * s.psi - g_sum));
    }
    trace.append({static_cast<double>(t), res, gram_err, phi_err, psi_err});
    return x.norm();
  };

  double x_norm_last = x1_norm;
  sample(0);
  try {
    for (long long t = 1; t <= horizon; ++t) {
      StepStats st = step_sync(states, op, t, gains, noise_std, seed,
                               n_for_update);
      const double at = gains.a(t);
      sum_a += at;
      m_hat += at * st.noise_norm;
      if (st.x_norm_before > 1e-300) {
        k1 = std::max(k1, st.drive_norm / st.x_norm_before);
      }
      if (t % trace_every == 0 || t == horizon) {
        x_norm_last = sample(t);
      }
    }
  } catch (DivergenceError& e) {
    e.trace_prefix = std::make_shared<Trace>(std::move(trace));
    throw;
  }

  // Realized form of the a-priori trajectory bound; compared in logs so a
  // large exponent cannot overflow the check itself.
  const double log_rhs = k1 * sum_a + std::log(x1_norm + m_hat);
  if (std::log(std::max(x_norm_last, 1e-300)) > log_rhs + 1e-9) {
    throw ContractViolation("trajectory left its a-priori norm bound");
  }

  trace.summary["k1"] = k1;
  trace.summary["sum_a"] = sum_a;
  trace.summary["m_hat"] = m_hat;
  trace.summary["bound_log_rhs"] = log_rhs;
  trace.summary["final_residual"] = trace.last("subspace_residual");
  trace.summary["final_gram_error"] = trace.last("gram_error");
  trace.summary["final_phi_track_err"] = trace.last("phi_track_err");
  trace.summary["final_psi_track_err"] = trace.last("psi_track_err");
  trace.summary["nodes"] = static_cast<double>(n);
  trace.summary["restricted"] = plan.restricted ? 1.0 : 0.0;
  return trace;
}

Eigen::MatrixXd step_borkar_meyn(const Eigen::MatrixXd& x, double a_t,
                                 const SyncOperator& op, double noise_std,
                                 std::uint64_t seed) {
  const int n = op.n();
  if (static_cast<int>(x.rows()) != n) {
    throw ParameterError("iterate height does not match operator size");
  }
  const int L = static_cast<int>(x.cols());

  Eigen::MatrixXd ax;
  one_hop(op, x, ax);
  if (op.two_hop()) {
    Eigen::MatrixXd ax2;
    one_hop(op, ax, ax2);
    ax = std::move(ax2);
  }

  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(n, L);
  if (noise_std > 0.0) {
    for (int u = 0; u < n; ++u) {
      Rng rng(seed, make_stream(StreamDomain::kBmNoise,
                                static_cast<std::uint64_t>(u)));
      for (int l = 0; l < L; ++l) {
        xi(u, l) = noise_std * rng.gaussian();
      }
    }
  }

  const double z = 1.0 + x.squaredNorm();
  return x + (a_t / z) * (ax - x * (x.transpose() * ax) + xi);
}

}  // namespace spectra

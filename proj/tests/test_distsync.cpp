#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "spectra/distsync.hpp"
#include "spectra/errors.hpp"
#include "spectra/graph.hpp"
#include "spectra/models.hpp"
#include "spectra/synthdata.hpp"

using namespace spectra;

namespace {

SparseGraph five_node() {
  return SparseGraph::build(
      5, {{0, 1, 1.0}, {1, 2, 2.0}, {2, 3, 0.5}, {3, 4, 1.5}, {1, 3, 1.0}});
}

SimilarityModel two_class(int n, double omega) {
  SimilarityModel m;
  m.n_users = n;
  m.n_classes = 2;
  m.alpha = {0.5, 0.5};
  m.b = {1.5, 0.5, 0.5, 1.2};
  m.omega = omega;
  return m;
}

// Plain-loop mirror of one synchronous step, kept free of Eigen matrix
// algebra on purpose. h is the one-hop matrix including the diagonal.
struct MirrorState {
  std::vector<std::vector<double>> x;      // n x L
  std::vector<std::vector<double>> phi;    // n x (L*L) row-major
  std::vector<double> psi;
  std::vector<std::vector<double>> f_prev; // n x (L*L)
  std::vector<double> g_prev;
};

std::vector<std::vector<double>> mirror_hop(
    const SparseGraph& g, double self,
    const std::vector<std::vector<double>>& x) {
  int n = g.n();
  int L = static_cast<int>(x[0].size());
  std::vector<std::vector<double>> y(n, std::vector<double>(L, 0.0));
  for (int u = 0; u < n; ++u) {
    for (int l = 0; l < L; ++l) y[u][l] = self * x[u][l];
    auto nb = g.neighbors(u);
    auto w = g.weights(u);
    for (std::size_t i = 0; i < nb.size(); ++i)
      for (int l = 0; l < L; ++l) y[u][l] += w[i] * x[nb[i]][l];
  }
  return y;
}

void mirror_step(MirrorState& s, const SparseGraph& g, double self,
                 bool two_hop, double at, double bt, double n_upd) {
  int n = g.n();
  int L = static_cast<int>(s.x[0].size());
  auto pi = mirror_hop(g, self, s.x);
  auto drive = two_hop ? mirror_hop(g, self, pi) : pi;

  std::vector<std::vector<double>> x_next(n, std::vector<double>(L, 0.0));
  for (int u = 0; u < n; ++u) {
    double abs_phi = 0.0;
    for (double v : s.phi[u]) abs_phi += std::abs(v);
    double y = std::max({1.0, std::abs(s.psi[u]), abs_phi / (n_upd * L * L)});
    for (int l = 0; l < L; ++l) {
      double xphi = 0.0;
      for (int j = 0; j < L; ++j) xphi += s.x[u][j] * s.phi[u][j * L + l];
      double f = (drive[u][l] - n_upd * xphi) / y;
      x_next[u][l] = s.x[u][l] + at * f;
    }
  }

  auto pi_next = mirror_hop(g, self, x_next);
  std::vector<std::vector<double>> f_next(n, std::vector<double>(L * L, 0.0));
  std::vector<double> g_next(n, 0.0);
  for (int u = 0; u < n; ++u) {
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < L; ++j)
        f_next[u][i * L + j] = two_hop ? pi_next[u][i] * pi_next[u][j]
                                       : x_next[u][i] * pi_next[u][j];
    for (int l = 0; l < L; ++l) g_next[u] += x_next[u][l] * x_next[u][l];
  }

  std::vector<std::vector<double>> phi_next(n);
  std::vector<double> psi_next(n, 0.0);
  for (int u = 0; u < n; ++u) {
    phi_next[u] = s.phi[u];
    psi_next[u] = s.psi[u];
    for (int v : g.neighbors(u)) {
      for (int e = 0; e < L * L; ++e)
        phi_next[u][e] += bt * (s.phi[v][e] - s.phi[u][e]);
      psi_next[u] += bt * (s.psi[v] - s.psi[u]);
    }
    for (int e = 0; e < L * L; ++e)
      phi_next[u][e] += f_next[u][e] - s.f_prev[u][e];
    psi_next[u] += g_next[u] - s.g_prev[u];
  }
  s.x = std::move(x_next);
  s.phi = std::move(phi_next);
  s.psi = std::move(psi_next);
  s.f_prev = std::move(f_next);
  s.g_prev = std::move(g_next);
}

std::vector<NodeState> seeded_states(int n, int L) {
  std::vector<NodeState> states(n);
  for (int u = 0; u < n; ++u) {
    states[u].x.resize(L);
    states[u].phi.resize(L, L);
    states[u].f_prev.resize(L, L);
    for (int l = 0; l < L; ++l) states[u].x(l) = 0.1 * (u + 1) - 0.07 * l;
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < L; ++j) {
        states[u].phi(i, j) = 0.01 * (u + 1) - 0.02 * i + 0.03 * j;
        states[u].f_prev(i, j) = 0.005 * (u - i + 2 * j);
      }
    states[u].psi = 0.05 * u - 0.1;
    states[u].g_prev = 0.02 * u + 0.01;
  }
  return states;
}

MirrorState to_mirror(const std::vector<NodeState>& states) {
  int n = static_cast<int>(states.size());
  int L = static_cast<int>(states[0].x.cols());
  MirrorState m;
  m.x.resize(n);
  m.phi.resize(n);
  m.psi.resize(n);
  m.f_prev.resize(n);
  m.g_prev.resize(n);
  for (int u = 0; u < n; ++u) {
    m.x[u].assign(states[u].x.begin(), states[u].x.end());
    m.phi[u].resize(L * L);
    m.f_prev[u].resize(L * L);
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < L; ++j) {
        m.phi[u][i * L + j] = states[u].phi(i, j);
        m.f_prev[u][i * L + j] = states[u].f_prev(i, j);
      }
    m.psi[u] = states[u].psi;
    m.g_prev[u] = states[u].g_prev;
  }
  return m;
}

}  // namespace

TEST_CASE("gain schedules take their documented values") {
  GainSchedule paper = GainSchedule::paper_default();
  CHECK(paper.a(1) == 1.0);  // raw value exceeds 1, clamp engages
  CHECK(paper.a(2) == doctest::Approx(1.0 / (2.0 * std::log(3.0))).epsilon(1e-15));
  CHECK(paper.b(1) == 1.0);
  CHECK(paper.b(4) == doctest::Approx(std::pow(4.0, -2.0 / 3.0)).epsilon(1e-15));

  GainSchedule off = GainSchedule::offset(500);
  CHECK(off.a(1) == doctest::Approx(1.0 / (501.0 * std::log(502.0))).epsilon(1e-15));
  CHECK(off.b(2) == doctest::Approx(std::pow(502.0, -2.0 / 3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(GainSchedule::offset(0), ParameterError);
  CHECK_THROWS_AS(GainSchedule::custom(nullptr, nullptr), ParameterError);
}

TEST_CASE("gain validation distinguishes good and bad schedules") {
  GainReport ok = validate_gains(GainSchedule::paper_default(), 200000, 1.0);
  CHECK(ok.in_unit_interval);
  CHECK(ok.sum_a_growing);
  CHECK(ok.sum_a2_converged);
  CHECK(ok.sum_b2_converged);
  CHECK(ok.ratio_tail_monotone);
  CHECK(ok.sum_a > 2.0);

  // Constant a: the square sum never settles.
  GainSchedule const_a = GainSchedule::custom(
      [](long long) { return 1.0; },
      [](long long t) { return std::pow(static_cast<double>(t), -2.0 / 3.0); });
  GainReport bad1 = validate_gains(const_a, 10000, 1.0);
  CHECK(bad1.in_unit_interval);
  CHECK_FALSE(bad1.sum_a2_converged);

  // a = b = 1/t: the coupled ratio grows instead of vanishing.
  GainSchedule equal = GainSchedule::custom(
      [](long long t) { return 1.0 / static_cast<double>(t); },
      [](long long t) { return 1.0 / static_cast<double>(t); });
  GainReport bad2 = validate_gains(equal, 10000, 1.0);
  CHECK_FALSE(bad2.ratio_tail_monotone);
  CHECK(bad2.sum_b2_converged);

  GainSchedule big = GainSchedule::custom(
      [](long long) { return 1.5; }, [](long long) { return 0.5; });
  CHECK_FALSE(validate_gains(big, 1000, 1.0).in_unit_interval);

  CHECK_THROWS_AS(validate_gains(GainSchedule{}, 1000, 1.0), ParameterError);
  CHECK_THROWS_AS(validate_gains(const_a, 50, 1.0), ParameterError);
  CHECK_THROWS_AS(validate_gains(const_a, 1000, 0.0), ParameterError);
}

TEST_CASE("psd preconditioning produces the documented operators") {
  CHECK_THROWS_AS(PsdMode::shifted(0.0), ParameterError);
  CHECK_THROWS_AS(PsdMode::shifted(-1.0), ParameterError);

  SparseGraph path = SparseGraph::build(3, {{0, 1, 1.0}, {1, 2, 1.0}});
  SyncPlan shift = psd_precondition(path, PsdMode::shifted(0.1));
  CHECK_FALSE(shift.restricted);
  CHECK(shift.warning.empty());
  CHECK(shift.op->n() == 3);
  CHECK_FALSE(shift.op->two_hop());
  // Max absolute row sum is 2 (middle node), so the shift is 2.1.
  for (int u = 0; u < 3; ++u)
    CHECK(shift.op->self_weight(u) == doctest::Approx(2.1));
  Eigen::MatrixXd hs = dense_operator(*shift.op);
  Eigen::MatrixXd expected(3, 3);
  expected << 2.1, 1.0, 0.0,
              1.0, 2.1, 1.0,
              0.0, 1.0, 2.1;
  CHECK((hs - expected).norm() <= 1e-12);
  // The shifted operator is PSD by construction.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hs);
  CHECK(es.eigenvalues().minCoeff() > 0.0);

  SyncPlan sq = psd_precondition(path, PsdMode::squared());
  CHECK(sq.op->two_hop());
  CHECK(sq.op->self_weight(1) == 0.0);
  Eigen::MatrixXd h2 = dense_operator(*sq.op);
  Eigen::MatrixXd a(3, 3);
  a << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  CHECK((h2 - a * a).norm() <= 1e-12);

  CHECK_THROWS_AS(psd_precondition(SparseGraph::build(0, {}), PsdMode::squared()),
                  ParameterError);
  CHECK_THROWS_AS(psd_precondition(SparseGraph::build(3, {}), PsdMode::squared()),
                  ParameterError);
}

TEST_CASE("disconnected graphs are restricted to the largest component") {
  SparseGraph g = SparseGraph::build(
      6, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}, {3, 4, 1.0}});
  SyncPlan plan = psd_precondition(g, PsdMode::squared());
  CHECK(plan.restricted);
  CHECK(plan.op->n() == 3);
  CHECK(plan.node_map == std::vector<int>{0, 1, 2});
  CHECK(plan.warning.find("3 of 6") != std::string::npos);

  // Equal sizes: the component containing the smallest node wins.
  SparseGraph tie = SparseGraph::build(4, {{1, 3, 1.0}, {0, 2, 1.0}});
  SyncPlan tplan = psd_precondition(tie, PsdMode::squared());
  CHECK(tplan.node_map == std::vector<int>{0, 2});
}

TEST_CASE("zero state is a fixpoint of the step") {
  SparseGraph g = five_node();
  SyncPlan plan = psd_precondition(g, PsdMode::squared());
  int L = 2;
  std::vector<NodeState> states(5);
  for (auto& s : states) {
    s.x = Eigen::RowVectorXd::Zero(L);
    s.phi = Eigen::MatrixXd::Zero(L, L);
    s.f_prev = Eigen::MatrixXd::Zero(L, L);
    s.psi = 0.0;
    s.g_prev = 0.0;
  }
  GainSchedule gains = GainSchedule::paper_default();
  for (long long t = 1; t <= 3; ++t) {
    StepStats st = step_sync(states, *plan.op, t, gains, 0.0, 1);
    CHECK(st.drive_norm == 0.0);
    CHECK(st.x_norm_before == 0.0);
  }
  for (const auto& s : states) {
    CHECK(s.x.norm() == 0.0);
    CHECK(s.phi.norm() == 0.0);
    CHECK(s.psi == 0.0);
  }
}

TEST_CASE("step_sync matches a scalar re-implementation on both modes") {
  for (bool squared : {true, false}) {
    SparseGraph g = five_node();
    PsdMode mode = squared ? PsdMode::squared() : PsdMode::shifted(0.25);
    SyncPlan plan = psd_precondition(g, mode);
    double self = plan.op->self_weight(0);

    std::vector<NodeState> states = seeded_states(5, 2);
    MirrorState mirror = to_mirror(states);

    GainSchedule gains = GainSchedule::custom(
        [](long long t) { return 0.05 / static_cast<double>(t); },
        [](long long t) { return 0.1 + 0.01 * static_cast<double>(t); });
    for (long long t = 1; t <= 3; ++t) {
      step_sync(states, *plan.op, t, gains, 0.0, 9);
      mirror_step(mirror, g, self, squared, gains.a(t), gains.b(t), 5.0);
    }
    for (int u = 0; u < 5; ++u) {
      for (int l = 0; l < 2; ++l)
        CHECK(std::abs(states[u].x(l) - mirror.x[u][l]) <= 1e-13);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          CHECK(std::abs(states[u].phi(i, j) - mirror.phi[u][i * 2 + j]) <=
                1e-13);
      CHECK(std::abs(states[u].psi - mirror.psi[u]) <= 1e-13);
    }
  }
}

TEST_CASE("n_for_update override reaches the update and the normalizer") {
  SparseGraph g = five_node();
  SyncPlan plan = psd_precondition(g, PsdMode::squared());
  std::vector<NodeState> states = seeded_states(5, 2);
  MirrorState mirror = to_mirror(states);
  GainSchedule gains = GainSchedule::custom(
      [](long long) { return 0.03; }, [](long long) { return 0.1; });
  step_sync(states, *plan.op, 1, gains, 0.0, 9, 7);
  mirror_step(mirror, g, 0.0, true, 0.03, 0.1, 7.0);
  for (int u = 0; u < 5; ++u)
    for (int l = 0; l < 2; ++l)
      CHECK(std::abs(states[u].x(l) - mirror.x[u][l]) <= 1e-14);
}

TEST_CASE("a step only reads nearby state") {
  // Path graph: changing node 9's coordinates can influence, in one
  // squared-mode step, x within two hops and trackers within three.
  auto build_path = [] {
    std::vector<Edge> edges;
    for (int u = 0; u < 9; ++u) edges.push_back({u, u + 1, 1.0});
    return SparseGraph::build(10, edges);
  };
  SparseGraph g = build_path();
  SyncPlan plan = psd_precondition(g, PsdMode::squared());
  GainSchedule gains = GainSchedule::custom(
      [](long long) { return 0.05 ; }, [](long long) { return 0.1; });

  std::vector<NodeState> a = seeded_states(10, 2);
  std::vector<NodeState> b = seeded_states(10, 2);
  b[9].x(0) += 0.5;
  step_sync(a, *plan.op, 1, gains, 0.0, 4);
  step_sync(b, *plan.op, 1, gains, 0.0, 4);

  for (int u = 0; u <= 6; ++u) {
    CHECK((a[u].x - b[u].x).norm() == 0.0);
    if (u <= 5) {
      CHECK((a[u].phi - b[u].phi).norm() == 0.0);
      CHECK(a[u].psi == b[u].psi);
    }
  }
  CHECK((a[9].x - b[9].x).norm() != 0.0);
}

TEST_CASE("tracker sums are conserved") {
  SparseGraph g = five_node();
  SyncPlan plan = psd_precondition(g, PsdMode::squared());
  std::vector<NodeState> states = seeded_states(5, 2);
  // Start on the conservation manifold: phi = f_prev as produced by the
  // step's own innovation convention.
  for (auto& s : states) {
    s.phi = s.f_prev;
    s.psi = s.g_prev;
  }
  auto sum_phi = [&] {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
    for (const auto& s : states) acc += s.phi;
    return acc;
  };
  auto sum_f = [&] {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
    for (const auto& s : states) acc += s.f_prev;
    return acc;
  };
  GainSchedule gains = GainSchedule::custom(
      [](long long t) { return 0.04 / static_cast<double>(t); },
      [](long long) { return 0.2; });
  for (long long t = 1; t <= 10; ++t) {
    step_sync(states, *plan.op, t, gains, 1e-3, 5);
    // Gossip moves mass between nodes but Sum phi tracks Sum f exactly.
    CHECK((sum_phi() - sum_f()).cwiseAbs().maxCoeff() <= 1e-12);
    double spsi = 0.0;
    double sg = 0.0;
    for (const auto& s : states) {
      spsi += s.psi;
      sg += s.g_prev;
    }
    CHECK(std::abs(spsi - sg) <= 1e-12);
  }
}

TEST_CASE("run_sync validates inputs and handles a zero horizon") {
  SparseGraph g = five_node();
  Trace t0 = run_sync(g, 2, PsdMode::squared(), GainSchedule::paper_default(),
                      0.0, 0, 3, 1);
  CHECK(t0.rows.size() == 1);
  CHECK(t0.rows[0][0] == 0.0);
  CHECK(t0.summary.count("final_residual") == 1);

  CHECK_THROWS_AS(run_sync(g, 0, PsdMode::squared(),
                           GainSchedule::paper_default(), 0.0, 10, 3, 1),
                  ParameterError);
  CHECK_THROWS_AS(run_sync(g, 6, PsdMode::squared(),
                           GainSchedule::paper_default(), 0.0, 10, 3, 1),
                  ParameterError);
  CHECK_THROWS_AS(run_sync(g, 2, PsdMode::squared(),
                           GainSchedule::paper_default(), 0.0, 10, 3, 0),
                  ParameterError);
  CHECK_THROWS_AS(run_sync(g, 2, PsdMode::squared(), GainSchedule{}, 0.0, 10,
                           3, 1),
                  ParameterError);
}

TEST_CASE("zero gains freeze the iterate") {
  SparseGraph g = five_node();
  GainSchedule zero = GainSchedule::custom([](long long) { return 0.0; },
                                           [](long long) { return 0.0; });
  Trace tr = run_sync(g, 2, PsdMode::squared(), zero, 0.0, 50, 11, 10);
  REQUIRE(tr.rows.size() >= 2);
  // Residual and gram error cannot move when X never moves.
  CHECK(tr.rows.front()[1] == tr.rows.back()[1]);
  CHECK(tr.rows.front()[2] == tr.rows.back()[2]);
}

TEST_CASE("offset gains converge on a well-connected instance") {
  SimilarityModel m = two_class(120, 20.0);
  auto [graph, assign] = gen_similarity(m, 7);
  REQUIRE(graph.connected());
  Trace tr = run_sync(graph, 2, PsdMode::squared(), GainSchedule::offset(500),
                      1e-3, 20000, 7, 5000);
  CHECK(tr.summary.at("final_residual") < 1e-6);
  CHECK(tr.summary.at("final_gram_error") < 1e-4);
  // Tracker errors stay bounded along the run.
  CHECK(tr.summary.at("final_phi_track_err") < 1.0);
  CHECK(tr.summary.at("final_psi_track_err") < 1.0);
  // Bound-echo constants are recorded.
  CHECK(tr.summary.count("k1") == 1);
  CHECK(tr.summary.count("sum_a") == 1);
  CHECK(tr.summary.count("m_hat") == 1);
  CHECK(tr.summary.at("k1") > 0.0);
}

TEST_CASE("raw gains diverge quickly and carry a trace prefix") {
  SimilarityModel m = two_class(80, 15.0);
  auto [graph, assign] = gen_similarity(m, 2);
  bool threw = false;
  try {
    run_sync(graph, 2, PsdMode::squared(), GainSchedule::paper_default(),
             1e-3, 1000, 2, 1);
  } catch (const DivergenceError& e) {
    threw = true;
    CHECK(e.t <= 50);
    REQUIRE(e.trace_prefix != nullptr);
    CHECK(e.trace_prefix->rows.size() >= 1);
    CHECK(e.trace_prefix->columns.size() == 5);
  }
  CHECK(threw);
}

TEST_CASE("restricted runs report the component they kept") {
  SparseGraph g = SparseGraph::build(
      8, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {0, 2, 1.0}, {1, 3, 1.0},
          {4, 5, 1.0}});
  GainSchedule zero = GainSchedule::custom([](long long) { return 0.0; },
                                           [](long long) { return 0.0; });
  Trace tr = run_sync(g, 2, PsdMode::squared(), zero, 0.0, 5, 1, 5);
  CHECK(tr.summary.at("restricted") == 1.0);
  CHECK(tr.summary.at("nodes") == 4.0);
  CHECK_FALSE(tr.warning.empty());
}

TEST_CASE("reference centralized step is stationary at an eigenvector") {
  SparseGraph g = five_node();
  SyncPlan plan = psd_precondition(g, PsdMode::shifted(0.5));
  Eigen::MatrixXd h = dense_operator(*plan.op);
  Spectrum top = eig_top(h, 1);
  Eigen::MatrixXd x = top.vectors;
  Eigen::MatrixXd next = step_borkar_meyn(x, 0.3, *plan.op, 0.0, 1);
  CHECK((next - x).norm() <= 1e-12);

  // Hand-checked two-node formula.
  SparseGraph pair = SparseGraph::build(2, {{0, 1, 1.0}});
  SyncPlan pp = psd_precondition(pair, PsdMode::shifted(1.0));
  // Operator is [[2, 1], [1, 2]].
  Eigen::MatrixXd x2(2, 1);
  x2 << 1.0, 0.0;
  Eigen::MatrixXd got = step_borkar_meyn(x2, 0.1, *pp.op, 0.0, 1);
  // ax = (2, 1); x'ax = 2; update = x + 0.1/2 * (ax - 2x) = (1, 0.05).
  CHECK(got(0, 0) == doctest::Approx(1.0));
  CHECK(got(1, 0) == doctest::Approx(0.05));
}

#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "spectra/asyncsim.hpp"
#include "spectra/errors.hpp"
#include "spectra/graph.hpp"
#include "spectra/models.hpp"
#include "spectra/synthdata.hpp"

using namespace spectra;

namespace {

SparseGraph triangle() {
  return SparseGraph::build(3, {{0, 1, 1.0}, {0, 2, 1.0}, {1, 2, 1.0}});
}

std::vector<AsyncNodeState> triangle_states() {
  std::vector<AsyncNodeState> states(3);
  for (int u = 0; u < 3; ++u) {
    auto& s = states[u];
    s.x.resize(2);
    s.x << 0.1 * (u + 1), -0.2 * u + 0.05;
    s.pi.resize(2);
    s.pi << 0.3 - 0.1 * u, 0.2 * u;
    s.x0 = s.x;
    s.pi0 = s.pi;
    s.phi.resize(2, 2);
    s.phi << 0.01 * u, 0.02, -0.03, 0.04 + 0.01 * u;
    s.psi = 0.1 + 0.05 * u;
    s.w = 0;
  }
  return states;
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

}  // namespace

TEST_CASE("f2_of is the symmetric rank-one square") {
  Eigen::RowVectorXd pi(3);
  pi << 1.0, -2.0, 0.5;
  Eigen::MatrixXd f = f2_of(pi);
  CHECK(f(0, 0) == 1.0);
  CHECK(f(1, 1) == 4.0);
  CHECK(f(0, 1) == -2.0);
  CHECK(f(1, 0) == -2.0);
  CHECK(f.trace() == doctest::Approx(pi.squaredNorm()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f);
  CHECK(es.eigenvalues().minCoeff() >= -1e-15);
}

TEST_CASE("update_local alternates refresh and move") {
  SparseGraph g = triangle();
  SimConfig cfg;
  cfg.gain = 0.01;

  auto states = triangle_states();
  // w = 0: the call refreshes the partial product from neighbor x rows.
  update_local(0, states, g, cfg);
  CHECK(states[0].w == 1);
  Eigen::RowVectorXd want = states[1].x + states[2].x;
  CHECK((states[0].pi - want).norm() == 0.0);
  // Coordinates and neighbors untouched.
  CHECK(states[0].x(0) == 0.1);
  CHECK(states[1].w == 0);

  // w = 1: the call moves x along the tracked drive.
  auto fresh = triangle_states();
  fresh[0].w = 1;
  double y = std::max({1.0, std::abs(fresh[0].psi),
                       fresh[0].phi.cwiseAbs().sum() / (3.0 * 4.0)});
  Eigen::RowVectorXd drive =
      fresh[1].pi + fresh[2].pi - 3.0 * (fresh[0].x * fresh[0].phi);
  Eigen::RowVectorXd expect = fresh[0].x + (cfg.gain / y) * drive;
  update_local(0, fresh, g, cfg);
  CHECK(fresh[0].w == 0);
  CHECK((fresh[0].x - expect).norm() <= 1e-16);
  // The partial product is not refreshed by a move.
  CHECK(fresh[0].pi(0) == 0.3);
}

TEST_CASE("weighted neighbors enter both procedures") {
  SparseGraph g = SparseGraph::build(3, {{0, 1, 2.0}, {0, 2, 0.5}});
  SimConfig cfg;
  auto states = triangle_states();
  update_local(0, states, g, cfg);
  Eigen::RowVectorXd want = 2.0 * states[1].x + 0.5 * states[2].x;
  CHECK((states[0].pi - want).norm() == 0.0);
}

TEST_CASE("gossip averages trackers and re-injects innovations") {
  SparseGraph g = triangle();
  auto states = triangle_states();
  // Let both endpoints drift away from their snapshots first.
  states[0].x << 0.4, -0.1;
  states[0].pi << 0.25, 0.3;
  states[1].pi << -0.2, 0.1;

  Eigen::MatrixXd phi_avg = 0.5 * (states[0].phi + states[1].phi);
  Eigen::MatrixXd want0 =
      phi_avg + f2_of(states[0].pi) - f2_of(states[0].pi0);
  Eigen::MatrixXd want1 =
      phi_avg + f2_of(states[1].pi) - f2_of(states[1].pi0);
  double psi_avg = 0.5 * (states[0].psi + states[1].psi);
  double want_psi0 =
      psi_avg + states[0].x.squaredNorm() - states[0].x0.squaredNorm();

  gossip(0, 1, states, g);
  CHECK((states[0].phi - want0).norm() <= 1e-15);
  CHECK((states[1].phi - want1).norm() <= 1e-15);
  CHECK(states[0].psi == doctest::Approx(want_psi0).epsilon(1e-15));
  // Snapshots refreshed on both sides.
  CHECK((states[0].x0 - states[0].x).norm() == 0.0);
  CHECK((states[0].pi0 - states[0].pi).norm() == 0.0);
  CHECK((states[1].pi0 - states[1].pi).norm() == 0.0);
  // Third node untouched.
  CHECK(states[2].psi == doctest::Approx(0.2));

  CHECK_THROWS_AS(gossip(0, 0, states, g), ContractViolation);
  SparseGraph path = SparseGraph::build(3, {{0, 1, 1.0}, {1, 2, 1.0}});
  CHECK_THROWS_AS(gossip(0, 2, states, path), ContractViolation);
}

TEST_CASE("tracker sums follow the snapshot sums exactly") {
  SparseGraph g = triangle();
  SimConfig cfg;
  cfg.gain = 0.05;
  auto states = triangle_states();
  // Align trackers with the conservation manifold the simulator uses.
  for (auto& s : states) {
    s.phi = f2_of(s.pi0);
    s.psi = s.x0.squaredNorm();
  }

  auto check_conservation = [&] {
    Eigen::MatrixXd phi_sum = Eigen::MatrixXd::Zero(2, 2);
    Eigen::MatrixXd snap_sum = Eigen::MatrixXd::Zero(2, 2);
    double psi_sum = 0.0;
    double g_sum = 0.0;
    for (const auto& s : states) {
      phi_sum += s.phi;
      snap_sum += f2_of(s.pi0);
      psi_sum += s.psi;
      g_sum += s.x0.squaredNorm();
    }
    CHECK((phi_sum - snap_sum).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK(std::abs(psi_sum - g_sum) <= 1e-13);
  };

  int seq[][2] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 2}, {0, 0}, {0, 2},
                  {1, 0}, {2, 0}, {0, 1}};
  for (auto& ev : seq) {
    if (ev[1] == 0 || ev[0] == ev[1]) {
      update_local(ev[0], states, g, cfg);
    } else {
      gossip(ev[0], ev[1], states, g);
    }
    check_conservation();
  }
}

TEST_CASE("run_async is deterministic in its config") {
  SimilarityModel m = two_class(40, 10.0);
  auto [graph, labels] = gen_similarity(m, 6);
  REQUIRE(graph.connected());
  SimConfig cfg;
  cfg.gain = 0.002;
  cfg.horizon = 30.0;
  cfg.trace_every = 5.0;
  cfg.seed = 12;

  Trace a = run_async(graph, 2, cfg);
  Trace b = run_async(graph, 2, cfg);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    for (std::size_t j = 0; j < a.rows[i].size(); ++j)
      CHECK(a.rows[i][j] == b.rows[i][j]);

  cfg.seed = 13;
  Trace c = run_async(graph, 2, cfg);
  CHECK(c.summary.at("events_processed") != a.summary.at("events_processed"));

  // Sampling grid: first row at 0, last row exactly at the horizon.
  CHECK(a.rows.front()[0] == 0.0);
  CHECK(a.rows.back()[0] == 30.0);
  // Event counter column is non-decreasing.
  for (std::size_t i = 1; i < a.rows.size(); ++i)
    CHECK(a.rows[i][3] >= a.rows[i - 1][3]);
}

TEST_CASE("a zero node rate freezes the coordinates") {
  SimilarityModel m = two_class(30, 9.0);
  auto [graph, labels] = gen_similarity(m, 8);
  REQUIRE(graph.connected());
  SimConfig cfg;
  cfg.node_rate = 0.0;
  cfg.horizon = 20.0;
  cfg.seed = 4;
  Trace tr = run_async(graph, 2, cfg);
  CHECK(tr.summary.at("node_events") == 0.0);
  CHECK(tr.summary.at("edge_events") > 0.0);
  CHECK(tr.rows.front()[1] == tr.rows.back()[1]);
}

TEST_CASE("an absurd gain trips the divergence guard with a trace prefix") {
  SimilarityModel m = two_class(30, 9.0);
  auto [graph, labels] = gen_similarity(m, 8);
  REQUIRE(graph.connected());
  SimConfig cfg;
  cfg.gain = 1e12;
  cfg.noise_std = 1.0;
  cfg.horizon = 50.0;
  cfg.seed = 4;
  bool threw = false;
  try {
    run_async(graph, 2, cfg);
  } catch (const DivergenceError& e) {
    threw = true;
    REQUIRE(e.trace_prefix != nullptr);
    CHECK(e.trace_prefix->rows.size() >= 1);
    CHECK(e.node >= 0);
  }
  CHECK(threw);
}

TEST_CASE("weak timescale separation is recorded as a warning") {
  SparseGraph g = triangle();
  SimConfig cfg;
  cfg.node_rate = 1.0;
  cfg.edge_rate = 0.5;
  cfg.horizon = 5.0;
  Trace tr = run_async(g, 1, cfg);
  CHECK_FALSE(tr.warning.empty());

  SimConfig ok;
  ok.horizon = 5.0;
  Trace tr2 = run_async(g, 1, ok);
  CHECK(tr2.warning.empty());
}

TEST_CASE("run_async validates its inputs") {
  SparseGraph g = triangle();
  SimConfig cfg;
  cfg.horizon = 1.0;
  CHECK_THROWS_AS(run_async(g, 0, cfg), ParameterError);
  CHECK_THROWS_AS(run_async(g, 4, cfg), ParameterError);
  SparseGraph disc = SparseGraph::build(4, {{0, 1, 1.0}, {2, 3, 1.0}});
  CHECK_THROWS_AS(run_async(disc, 1, cfg), ParameterError);
  SimConfig bad = cfg;
  bad.gain = 0.0;
  CHECK_THROWS_AS(run_async(g, 1, bad), ParameterError);
  bad = cfg;
  bad.trace_every = 0.0;
  CHECK_THROWS_AS(run_async(g, 1, bad), ParameterError);
  bad = cfg;
  bad.horizon = -1.0;
  CHECK_THROWS_AS(run_async(g, 1, bad), ParameterError);
  bad = cfg;
  bad.noise_std = -0.5;
  CHECK_THROWS_AS(run_async(g, 1, bad), ParameterError);
}

TEST_CASE("the simulated flow drains mass off the orthogonal complement") {
  SimilarityModel m = two_class(60, 14.0);
  auto [graph, labels] = gen_similarity(m, 3);
  REQUIRE(graph.connected());
  SimConfig cfg;
  cfg.gain = 0.002;
  cfg.horizon = 150.0;
  cfg.trace_every = 25.0;
  cfg.seed = 2;
  Trace tr = run_async(graph, 2, cfg);
  CHECK(tr.summary.at("final_residual") < 0.3);
  CHECK(tr.summary.at("final_residual") < tr.rows.front()[1]);
  CHECK(tr.summary.at("final_gram_offdiag_max") <= 1.0);
  CHECK(tr.summary.at("events_processed") > 1000.0);
}

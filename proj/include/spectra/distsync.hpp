#pragma once

// Synchronous distributed Oja + gossip iteration.
//
// Every node u holds coordinates X_u (a row of the N x L iterate), the
// gossiped tracker Phi_u of the mean of f, the tracker Psi_u of the mean
// of g, and the previous f_u, g_u so each step can inject the innovations
// f_u(t+1) - f_u(t) and g_u(t+1) - g_u(t). One step is a pure function of
// the previous state: coordinates move by
//
//   X_u += a(t)/Y_u * [ (op X)_u - N X_u Phi_u + xi_u ]
//
// with Y_u = max(1, |Psi_u|, sum|Phi_u| / (N L^2)), then Phi and Psi
// gossip over the communication edges and absorb the innovations computed
// from the fresh coordinates.
//
// The operator is the PSD preconditioning of the adjacency: either
// A + (Delta + eps) I (so f includes the self-loop term) or A^2 applied
// as two one-hop passes. Node updates read neighbor state only through
// the operator's row accessors, which is what keeps the step local and
// lets a recording double assert it.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spectra/graph.hpp"
#include "spectra/trace.hpp"

namespace spectra {

struct NodeState {
  Eigen::RowVectorXd x;   // X_u
  Eigen::MatrixXd phi;    // Phi_u, L x L
  double psi = 0.0;       // Psi_u
  Eigen::MatrixXd f_prev; // f_u(t)
  double g_prev = 0.0;    // g_u(t)
};

struct GainSchedule {
  enum class Kind { kPaperDefault, kCustom };
  Kind kind = Kind::kCustom;
  std::function<double(long long)> a;
  std::function<double(long long)> b;

  // a(t) = min(1, 1/(t log(t+1))), b(t) = t^(-2/3). The clamp is active
  // only at t = 1, where the raw value exceeds 1.
  static GainSchedule paper_default();
  // Same shapes started t0 steps into their tails:
  // a(t) = 1/((t+t0) log(t+t0+1)), b(t) = (t+t0)^(-2/3). Identical
  // asymptotics with a bounded early phase; the workable preset.
  static GainSchedule offset(long long t0);
  static GainSchedule custom(std::function<double(long long)> a,
                             std::function<double(long long)> b);
};

struct GainReport {
  double sum_a = 0.0;
  double sum_a_first_half = 0.0;
  double sum_a2 = 0.0;
  double sum_b2 = 0.0;
  bool in_unit_interval = true;     // every a(t), b(t) in [0,1]
  bool sum_a_growing = true;        // second-half contribution substantial
  bool sum_a2_converged = true;     // tail of sum a^2 negligible
  bool sum_b2_converged = true;
  bool ratio_tail_monotone = true;  // (a/b) e^{K sum a} decreasing at the end
  double ratio_final = 0.0;
};

// Numerical spot-check of the gain conditions over a finite horizon.
GainReport validate_gains(const GainSchedule& gains, long long horizon,
                          double k_const);

struct PsdMode {
  enum class Variant { kDiagonalShift, kSquared };
  Variant variant = Variant::kSquared;
  double epsilon = 1e-3;  // diagonal_shift only; must be > 0

  static PsdMode shifted(double epsilon = 1e-3);
  static PsdMode squared();
};

// Row view of the preconditioned operator. neighbors/weights expose the
// one-hop structure (the communication edges); self_weight is the shifted
// diagonal (zero in squared mode); two_hop says whether the full operator
// is one application or two.
class SyncOperator {
 public:
  virtual ~SyncOperator() = default;
  virtual int n() const = 0;
  virtual bool two_hop() const = 0;
  virtual std::span<const int> neighbors(int u) const = 0;
  virtual std::span<const double> weights(int u) const = 0;
  virtual double self_weight(int u) const = 0;
};

struct SyncPlan {
  std::unique_ptr<SyncOperator> op;
  std::vector<int> node_map;  // operator index -> input graph index
  bool restricted = false;
  std::string warning;        // non-empty iff restricted
};

// Builds the operator handle. A disconnected graph is restricted to its
// largest component (warning recorded, smallest indices win ties); an
// empty graph is an error.
SyncPlan psd_precondition(const SparseGraph& g, PsdMode mode);

// Dense materialization of the effective operator (shift: A + (D+e)I,
// squared: A^2), for oracle eigenspaces at desk scale. Guarded n <= 5000.
Eigen::MatrixXd dense_operator(const SyncOperator& op);

// One synchronous step of (the preconditioned) dist1-dist6 at time t.
// States are read at time t and replaced; noise is Gaussian(0, noise_std^2)
// per coordinate, drawn from the (seed, t, u) substream so the step is a
// pure function of its arguments. n_for_update overrides the N that
// appears in the update and in Y_u (defaults to op.n()).
// Returns the norms the run-level bound echo needs. Throws DivergenceError
// when a coordinate leaves [-1e9, 1e9] or any state turns non-finite.
struct StepStats {
  double drive_norm = 0.0;       // ||F(t)||_F of the Y-normalized drive
  double noise_norm = 0.0;       // ||xi(t)/Y||_F
  double x_norm_before = 0.0;
};
StepStats step_sync(std::vector<NodeState>& states, const SyncOperator& op,
                    long long t, const GainSchedule& gains, double noise_std,
                    std::uint64_t seed, int n_for_update = -1);

// Full run: seeded init (X entries Gaussian(0, 1/N), Phi = f(1),
// Psi = g(1)), horizon steps, metrics sampled every trace_every steps and
// at both ends. Columns: t, subspace_residual, gram_error, phi_track_err,
// psi_track_err. The summary carries the realized bound-echo constants
// (k1, sum_a, m_hat, bound_rhs) and final metrics. On divergence the
// partial trace rides in the error.
Trace run_sync(const SparseGraph& graph, int L, PsdMode mode,
               const GainSchedule& gains, double noise_std,
               long long horizon, std::uint64_t seed, long long trace_every,
               int n_for_update = -1);

// Centralized reference step: X += a/Z [op X - X X' op X + xi] with
// Z = 1 + sum of squares of X.
Eigen::MatrixXd step_borkar_meyn(const Eigen::MatrixXd& x, double a_t,
                                 const SyncOperator& op, double noise_std,
                                 std::uint64_t seed);

}  // namespace spectra

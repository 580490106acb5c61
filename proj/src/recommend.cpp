#include "spectra/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "spectra/errors.hpp"
#include "spectra/rng.hpp"

namespace spectra {

namespace {

// Resolves the per-column sign ambiguity of an embedding against analytic
// centroids: each column is flipped when the class-mean profiles disagree
// with the centroid column in the dot-product sense.
Eigen::MatrixXd align_to_centroids(const Eigen::MatrixXd& profiles,
                                   const Centroids& cents,
                                   const ClassAssignment& labels) {
  const int k = cents.k();
  const int L = cents.dim();
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(k, L);
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int u = 0; u < labels.size(); ++u) {
    means.row(labels[u]) += profiles.row(u);
    ++sizes[static_cast<std::size_t>(labels[u])];
  }
  for (int c = 0; c < k; ++c) {
    if (sizes[static_cast<std::size_t>(c)] > 0) {
      means.row(c) /= sizes[static_cast<std::size_t>(c)];
    }
  }
  Eigen::MatrixXd aligned = profiles;
  for (int l = 0; l < L; ++l) {
    if (means.col(l).dot(cents.points.col(l)) < 0.0) {
      aligned.col(l) = -aligned.col(l);
    }
  }
  return aligned;
}

// Smallest distance between distinct affinity values of one user class;
// infinity when the class rates every item class identically.
double affinity_gap(const RatingModel& model, int user_class) {
  double gap = std::numeric_limits<double>::infinity();
  for (int l = 0; l < model.n_item_classes; ++l) {
    for (int l2 = l + 1; l2 < model.n_item_classes; ++l2) {
      const double d =
          std::abs(model.r_at(user_class, l) - model.r_at(user_class, l2));
      if (d > 0.0) {
        gap = std::min(gap, d);
      }
    }
  }
  return gap;
}

}  // namespace

std::vector<int> vicinity(const Embedding& emb, int u, double d) {
  if (u < 0 || u >= emb.n()) {
    throw ParameterError("vicinity center out of range");
  }
  if (d < 0.0) {
    throw ParameterError("vicinity radius must be non-negative");
  }
  std::vector<int> ball;
  for (int v = 0; v < emb.n(); ++v) {
    if ((emb.profiles.row(v) - emb.profiles.row(u)).norm() <= d) {
      ball.push_back(v);
    }
  }
  return ball;
}

VoteTally votes(const RatingData& data, const std::vector<int>& vicinity,
                const std::vector<int>& items) {
  const int n_users = data.s.n_left();
  VoteTally tally;
  tally.items = items;
  tally.counts.assign(items.size(), 0);
  tally.vicinity_size = static_cast<int>(vicinity.size());
  for (std::size_t j = 0; j < items.size(); ++j) {
    const int item_node = n_users + items[j];
    if (items[j] < 0 || item_node >= data.s.n()) {
      throw ParameterError("tallied item out of range");
    }
    for (int v : vicinity) {
      if (data.s.has_edge(v, item_node)) {
        ++tally.counts[j];
      }
    }
  }
  return tally;
}

RankCheck rank_consistency(const VoteTally& tally, const RatingModel& model,
                           int user_class, const ClassAssignment& items) {
  if (user_class < 0 || user_class >= model.n_user_classes) {
    throw ParameterError("user class out of range");
  }
  RankCheck check;
  for (std::size_t i = 0; i < tally.items.size(); ++i) {
    for (std::size_t j = i + 1; j < tally.items.size(); ++j) {
      const double ri = model.r_at(user_class, items[tally.items[i]]);
      const double rj = model.r_at(user_class, items[tally.items[j]]);
      if (ri == rj) {
        continue;
      }
      ++check.comparable_pairs;
      const int ci = tally.counts[i];
      const int cj = tally.counts[j];
      const bool ok = ri > rj ? ci > cj : cj > ci;
      if (!ok) {
        ++check.violations;
      }
    }
  }
  check.consistent = check.violations == 0;
  return check;
}

VotingReport evaluate_voting(const RatingData& data, const Embedding& emb,
                             const Centroids& cents, const RatingModel& model,
                             int n_samples, int sample_size,
                             std::uint64_t seed) {
  model.validate();
  const int n_users = data.s.n_left();
  const int n_items = data.s.n_right();
  if (emb.n() != n_users) {
    throw ParameterError("embedding size does not match the rating data");
  }
  if (cents.k() != model.n_user_classes || cents.dim() != emb.dim()) {
    throw ParameterError("centroid shape does not match");
  }
  if (n_samples < 1 || sample_size < 2) {
    throw ParameterError("need at least one user and two items per sample");
  }

  VotingReport report;

  // Vicinity radius: well under half the separation of pure profiles, so
  // a ball around a near-pure profile stays inside one class.
  double min_dist = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cents.k(); ++k) {
    for (int k2 = k + 1; k2 < cents.k(); ++k2) {
      min_dist = std::min(
          min_dist, (cents.points.row(k) - cents.points.row(k2)).norm());
    }
  }
  report.rho0 = cents.k() < 2 ? std::numeric_limits<double>::infinity()
                              : 0.9 * min_dist / 6.0;

  const Eigen::MatrixXd aligned =
      align_to_centroids(emb.profiles, cents, data.users);
  Embedding aligned_emb{aligned};

  std::vector<int> eligible;
  for (int u = 0; u < n_users; ++u) {
    const double dist =
        (aligned.row(u) - cents.points.row(data.users[u])).norm();
    if (dist <= report.rho0) {
      eligible.push_back(u);
    }
  }
  report.excluded_fraction =
      1.0 - static_cast<double>(eligible.size()) / n_users;
  if (eligible.empty()) {
    return report;
  }

  // Seeded selection of the evaluated users.
  Rng pick(seed, make_stream(StreamDomain::kEvaluate, 0));
  for (std::size_t i = eligible.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(
        pick.uniform01() * static_cast<double>(i + 1));
    std::swap(eligible[i], eligible[std::min(j, i)]);
  }
  if (static_cast<int>(eligible.size()) > n_samples) {
    eligible.resize(static_cast<std::size_t>(n_samples));
  }

  long long total_comparable = 0;
  long long total_violations = 0;
  long long total_items = 0;
  long long total_misclassified = 0;
  int consistent_users = 0;

  for (int u : eligible) {
    std::vector<int> ball = vicinity(aligned_emb, u, report.rho0);

    // Seeded distinct item sample (all items when the sample covers them).
    std::vector<int> items(static_cast<std::size_t>(n_items));
    std::iota(items.begin(), items.end(), 0);
    if (sample_size < n_items) {
      Rng rng(seed, make_stream(StreamDomain::kVotingSample,
                                static_cast<std::uint64_t>(u)));
      for (int i = 0; i < sample_size; ++i) {
        const std::size_t j =
            static_cast<std::size_t>(i) +
            static_cast<std::size_t>(
                rng.uniform01() *
                static_cast<double>(n_items - i));
        std::swap(items[static_cast<std::size_t>(i)],
                  items[std::min(j, items.size() - 1)]);
      }
      items.resize(static_cast<std::size_t>(sample_size));
    }

    const VoteTally tally = votes(data, ball, items);
    const RankCheck rc = rank_consistency(tally, model, data.users[u],
                                          data.items);
    total_comparable += rc.comparable_pairs;
    total_violations += rc.violations;
    if (rc.consistent) {
      ++consistent_users;
    }
    report.evaluated_users.push_back(u);
    report.violations_per_user.push_back(rc.violations);

    const double eps = affinity_gap(model, data.users[u]) / 3.0;
    if (std::isfinite(eps)) {
      const double scale =
          static_cast<double>(n_users) /
          (static_cast<double>(tally.vicinity_size) * model.omega);
      for (std::size_t j = 0; j < tally.items.size(); ++j) {
        const double estimate = tally.counts[j] * scale;
        const double truth =
            model.r_at(data.users[u], data.items[tally.items[j]]);
        ++total_items;
        if (std::abs(estimate - truth) > 1.5 * eps) {
          ++total_misclassified;
        }
      }
    }
  }

  report.n_evaluated = static_cast<int>(eligible.size());
  report.consistency =
      static_cast<double>(consistent_users) / report.n_evaluated;
  report.mean_violation_rate =
      total_comparable > 0
          ? static_cast<double>(total_violations) / total_comparable
          : 0.0;
  report.misclassified_fraction =
      total_items > 0
          ? static_cast<double>(total_misclassified) / total_items
          : 0.0;
  return report;
}

AgreementReport agreement_experiment(const RatingData& data, int L,
                                     int max_rank, std::uint64_t seed) {
  if (max_rank < 1) {
    throw ParameterError("agreement needs at least one neighbor rank");
  }
  const int n_users = data.s.n_left();
  const int n_items = data.s.n_right();
  if (n_users < 2 || n_items < 1) {
    throw ParameterError("agreement needs at least two users and one item");
  }

  // Pick one rating to hide per user with at least two of them.
  std::vector<int> hidden(static_cast<std::size_t>(n_users), -1);
  for (int u = 0; u < n_users; ++u) {
    const int deg = data.s.degree(u);
    if (deg < 2) {
      continue;
    }
    Rng rng(seed, make_stream(StreamDomain::kAgreementHide,
                              static_cast<std::uint64_t>(u)));
    const int pick = std::min(
        deg - 1, static_cast<int>(rng.uniform01() * deg));
    hidden[static_cast<std::size_t>(u)] = data.s.neighbors(u)[pick];
  }

  std::vector<Edge> kept;
  for (const Edge& e : data.s.edge_list()) {
    if (hidden[static_cast<std::size_t>(e.u)] != e.v) {
      kept.push_back(e);
    }
  }
  const SparseGraph reduced = SparseGraph::build(
      data.s.n(), std::move(kept), GraphKind::kBipartite, n_users);
  const Embedding emb = embed(svd_top(reduced, L));

  AgreementReport report;
  report.agreement_by_rank.assign(static_cast<std::size_t>(max_rank), 0.0);
  double baseline_sum = 0.0;

  std::vector<std::pair<double, int>> order;
  order.reserve(static_cast<std::size_t>(n_users - 1));
  for (int u = 0; u < n_users; ++u) {
    const int item_node = hidden[static_cast<std::size_t>(u)];
    if (item_node < 0) {
      continue;
    }
    order.clear();
    for (int v = 0; v < n_users; ++v) {
      if (v == u) {
        continue;
      }
      order.emplace_back(
          (emb.profiles.row(v) - emb.profiles.row(u)).norm(), v);
    }
    const std::size_t want =
        std::min(order.size(), static_cast<std::size_t>(max_rank));
    std::partial_sort(order.begin(), order.begin() + want, order.end());
    for (std::size_t r = 0; r < want; ++r) {
      if (data.s.has_edge(order[r].second, item_node)) {
        report.agreement_by_rank[r] += 1.0;
      }
    }
    baseline_sum += static_cast<double>(data.s.degree(item_node) - 1) /
                    static_cast<double>(n_users - 1);
    ++report.n_tested;
  }

  if (report.n_tested > 0) {
    for (double& v : report.agreement_by_rank) {
      v /= report.n_tested;
    }
    report.baseline = baseline_sum / report.n_tested;
  }
  return report;
}

}  // namespace spectra

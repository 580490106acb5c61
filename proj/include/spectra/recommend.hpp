#pragma once

// Recommendation by local voting in profile space.
//
// A user's vicinity is the ball B(u, d) around its profile. Votes for an
// item are the positive ratings found inside the ball; scaled by N/(|B| w)
// they estimate the planted affinity of u's class for the item's class, so
// vote order should reproduce affinity order. evaluate_voting measures
// exactly that on users whose profiles sit close to their class centroid.
// agreement_experiment is the complementary data-driven check: hide one
// known rating per user, re-embed, and ask how often the nearest profile
// neighbors rated the hidden item.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "spectra/models.hpp"
#include "spectra/spectral.hpp"
#include "spectra/synthdata.hpp"

namespace spectra {

// Users within distance d of u's profile, u included, ascending.
std::vector<int> vicinity(const Embedding& emb, int u, double d);

struct VoteTally {
  std::vector<int> items;   // item indices in [0, F)
  std::vector<int> counts;  // positive ratings inside the vicinity
  int vicinity_size = 0;
};

// Tallies votes over the given vicinity for the given items.
VoteTally votes(const RatingData& data, const std::vector<int>& vicinity,
                const std::vector<int>& items);

struct RankCheck {
  bool consistent = true;
  int violations = 0;
  int comparable_pairs = 0;
};

// Compares vote order against the planted affinity order of user class k.
// Item pairs with equal affinity are not comparable; a comparable pair is
// violated when the counts order the wrong way or tie.
RankCheck rank_consistency(const VoteTally& tally, const RatingModel& model,
                           int user_class, const ClassAssignment& items);

struct VotingReport {
  double rho0 = 0.0;                    // vicinity radius used
  double excluded_fraction = 0.0;       // users too far from their centroid
  int n_evaluated = 0;
  double consistency = 0.0;             // fraction with zero violations
  double mean_violation_rate = 0.0;     // violations per comparable pair
  double misclassified_fraction = 0.0;  // scaled votes outside the band
  std::vector<int> evaluated_users;
  std::vector<int> violations_per_user;
};

// Samples up to n_samples users whose profiles lie within rho0 of their
// class centroid (rho0 = 0.9/6 of the minimal centroid distance), tallies
// votes over sample_size items each, and reports rank consistency plus the
// fraction of items whose scaled vote leaves the band of width 1.5 eps_k
// around the planted affinity.
VotingReport evaluate_voting(const RatingData& data, const Embedding& emb,
                             const Centroids& cents, const RatingModel& model,
                             int n_samples, int sample_size,
                             std::uint64_t seed);

struct AgreementReport {
  std::vector<double> agreement_by_rank;  // index r-1: rank-r neighbor
  double baseline = 0.0;                  // popularity of the hidden items
  int n_tested = 0;
};

// For every user with at least two ratings, hides one (seeded), re-embeds
// the remaining bipartite graph, and measures how often the rank-r profile
// neighbor rated the hidden item. Users with fewer than two ratings are
// left out.
AgreementReport agreement_experiment(const RatingData& data, int L,
                                     int max_rank, std::uint64_t seed);

}  // namespace spectra

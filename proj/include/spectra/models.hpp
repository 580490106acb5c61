#pragma once

// Generative model parameters and class assignments.
//
// A similarity model plants K user classes with fractions alpha and class
// pair probabilities b, sampled at probing intensity p = omega / N. A
// rating model plants K user classes and K' item classes with affinity
// matrix r. Entries of b and r are nonnegative; what must be a probability
// is p*b (resp. p*r), which generation checks.

#include <string>
#include <vector>

namespace spectra {

struct SimilarityModel {
  int n_users = 0;                   // N
  int n_classes = 0;                 // K
  std::vector<double> alpha;         // K fractions, sum 1
  std::vector<double> b;             // K x K symmetric, row-major
  double omega = 0.0;                // probing intensity, p = omega / N

  double p() const { return omega / n_users; }
  double b_at(int k, int l) const { return b[k * n_classes + l]; }
  // Throws ParameterError when an invariant fails.
  void validate() const;
};

struct RatingModel {
  int n_users = 0;                   // N
  int n_items = 0;                   // F = round(gamma_ratio * N)
  int n_user_classes = 0;            // K
  int n_item_classes = 0;            // K'
  std::vector<double> alpha;         // K fractions
  std::vector<double> beta;          // K' fractions
  std::vector<double> r;             // K x K', row-major
  double omega = 0.0;
  double gamma_ratio = 0.0;          // F / N in (0, 1)

  double p() const { return omega / n_users; }
  double r_at(int k, int kp) const { return r[k * n_item_classes + kp]; }
  void validate() const;
};

struct ClassAssignment {
  std::vector<int> labels;  // one class index per entity

  int size() const { return static_cast<int>(labels.size()); }
  int operator[](int i) const { return labels[i]; }
  // Entity counts per class.
  std::vector<int> class_sizes(int n_classes) const;
  // Realized fractions (class size / entity count).
  std::vector<double> realized_fractions(int n_classes) const;
};

// Largest-remainder apportionment: sizes round(alpha_k * n) corrected so
// they sum to exactly n. Ties go to the lowest class index.
std::vector<int> apportion_class_sizes(const std::vector<double>& fractions,
                                       int n);

// Contiguous assignment: class 0 gets ids [0, s0), class 1 the next s1 ids,
// and so on. Shuffled assignment permutes those labels with the seeded
// stream; the marginal class sizes are identical.
ClassAssignment assign_contiguous(const std::vector<int>& sizes);
ClassAssignment assign_shuffled(const std::vector<int>& sizes,
                                std::uint64_t seed);

// JSON config ingestion. The document keys are:
//   n_users, classes: [{"fraction": f}, ...], b (row-major), omega
// for similarity models, plus
//   item_classes: [{"fraction": f}, ...], r (row-major), gamma_ratio
// for rating models. Throws ParameterError on schema violations.
SimilarityModel similarity_model_from_json(const std::string& json_text);
RatingModel rating_model_from_json(const std::string& json_text);

}  // namespace spectra

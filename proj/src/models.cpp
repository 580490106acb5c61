#include "spectra/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include <json.hpp>

#include "spectra/errors.hpp"
#include "spectra/rng.hpp"

namespace spectra {

namespace {

void check_fractions(const std::vector<double>& f, const char* name) {
  double sum = 0.0;
  for (double x : f) {
    if (!(x > 0.0)) throw ParameterError(std::string(name) + " fractions must be positive");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw ParameterError(std::string(name) + " fractions must sum to 1 within 1e-12");
}

}  // namespace

void SimilarityModel::validate() const {
  if (n_users <= 0) throw ParameterError("n_users must be positive");
  if (n_classes <= 0) throw ParameterError("n_classes must be positive");
  if (static_cast<int>(alpha.size()) != n_classes)
    throw ParameterError("alpha must have one fraction per class");
  check_fractions(alpha, "alpha");
  if (static_cast<int>(b.size()) != n_classes * n_classes)
    throw ParameterError("b must be K x K");
  for (int k = 0; k < n_classes; ++k)
    for (int l = 0; l < n_classes; ++l) {
      double v = b_at(k, l);
      if (!std::isfinite(v) || v < 0.0)
        throw ParameterError("b entries must be finite and nonnegative");
      if (v != b_at(l, k)) throw ParameterError("b must be symmetric");
    }
  if (!(omega > 0.0)) throw ParameterError("omega must be positive");
  if (omega > n_users) throw ParameterError("omega must not exceed N");
}

void RatingModel::validate() const {
  if (n_users <= 0) throw ParameterError("n_users must be positive");
  if (n_user_classes <= 0 || n_item_classes <= 0)
    throw ParameterError("class counts must be positive");
  if (static_cast<int>(alpha.size()) != n_user_classes)
    throw ParameterError("alpha must have one fraction per user class");
  if (static_cast<int>(beta.size()) != n_item_classes)
    throw ParameterError("beta must have one fraction per item class");
  check_fractions(alpha, "alpha");
  check_fractions(beta, "beta");
  if (static_cast<int>(r.size()) != n_user_classes * n_item_classes)
    throw ParameterError("r must be K x K'");
  for (double v : r)
    if (!std::isfinite(v) || v < 0.0)
      throw ParameterError("r entries must be finite and nonnegative");
  if (!(omega > 0.0)) throw ParameterError("omega must be positive");
  if (omega > n_users) throw ParameterError("omega must not exceed N");
  if (!(gamma_ratio > 0.0 && gamma_ratio < 1.0))
    throw ParameterError("gamma_ratio must lie in (0, 1)");
  int f = static_cast<int>(std::lround(gamma_ratio * n_users));
  if (n_items != f)
    throw ParameterError("n_items must equal round(gamma_ratio * n_users)");
}

std::vector<int> ClassAssignment::class_sizes(int n_classes) const {
  std::vector<int> sizes(n_classes, 0);
  for (int l : labels) ++sizes[l];
  return sizes;
}

std::vector<double> ClassAssignment::realized_fractions(int n_classes) const {
  std::vector<double> f(n_classes);
  auto sizes = class_sizes(n_classes);
  for (int k = 0; k < n_classes; ++k)
    f[k] = static_cast<double>(sizes[k]) / static_cast<double>(labels.size());
  return f;
}

std::vector<int> apportion_class_sizes(const std::vector<double>& fractions,
                                       int n) {
  int k = static_cast<int>(fractions.size());
  std::vector<int> sizes(k);
  std::vector<double> remainder(k);
  int assigned = 0;
  for (int i = 0; i < k; ++i) {
    double target = fractions[i] * n;
    sizes[i] = static_cast<int>(std::floor(target));
    remainder[i] = target - sizes[i];
    assigned += sizes[i];
  }
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return remainder[a] > remainder[b];
  });
  for (int i = 0; i < n - assigned; ++i) ++sizes[order[i]];
  return sizes;
}

ClassAssignment assign_contiguous(const std::vector<int>& sizes) {
  ClassAssignment out;
  for (std::size_t k = 0; k < sizes.size(); ++k)
    out.labels.insert(out.labels.end(), sizes[k], static_cast<int>(k));
  return out;
}

ClassAssignment assign_shuffled(const std::vector<int>& sizes,
                                std::uint64_t seed) {
  ClassAssignment out = assign_contiguous(sizes);
  Rng rng(seed, make_stream(StreamDomain::kShuffle, 0));
  // Fisher-Yates with the seeded substream.
  for (int i = static_cast<int>(out.labels.size()) - 1; i > 0; --i) {
    int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(out.labels[i], out.labels[j]);
  }
  return out;
}

namespace {

using nlohmann::json;

std::vector<double> fractions_from(const json& arr, const char* what) {
  if (!arr.is_array() || arr.empty())
    throw ParameterError(std::string(what) + " must be a nonempty array");
  std::vector<double> out;
  for (const auto& c : arr) {
    if (!c.contains("fraction"))
      throw ParameterError(std::string(what) + " entries need a fraction");
    out.push_back(c.at("fraction").get<double>());
  }
  return out;
}

std::vector<double> matrix_from(const json& arr, int rows, int cols,
                                const char* what) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != rows * cols)
    throw ParameterError(std::string(what) + " must be row-major with " +
                         std::to_string(rows * cols) + " entries");
  return arr.get<std::vector<double>>();
}

json parse(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ParameterError("malformed JSON");
  return doc;
}

}  // namespace

SimilarityModel similarity_model_from_json(const std::string& json_text) {
  json doc = parse(json_text);
  SimilarityModel m;
  try {
    m.n_users = doc.at("n_users").get<int>();
    m.alpha = fractions_from(doc.at("classes"), "classes");
    m.n_classes = static_cast<int>(m.alpha.size());
    m.b = matrix_from(doc.at("b"), m.n_classes, m.n_classes, "b");
    m.omega = doc.at("omega").get<double>();
  } catch (const json::exception& e) {
    throw ParameterError(std::string("similarity model config: ") + e.what());
  }
  m.validate();
  return m;
}

RatingModel rating_model_from_json(const std::string& json_text) {
  json doc = parse(json_text);
  RatingModel m;
  try {
    m.n_users = doc.at("n_users").get<int>();
    m.alpha = fractions_from(doc.at("classes"), "classes");
    m.n_user_classes = static_cast<int>(m.alpha.size());
    m.beta = fractions_from(doc.at("item_classes"), "item_classes");
    m.n_item_classes = static_cast<int>(m.beta.size());
    m.r = matrix_from(doc.at("r"), m.n_user_classes, m.n_item_classes, "r");
    m.omega = doc.at("omega").get<double>();
    m.gamma_ratio = doc.at("gamma_ratio").get<double>();
  } catch (const json::exception& e) {
    throw ParameterError(std::string("rating model config: ") + e.what());
  }
  m.n_items = static_cast<int>(std::lround(m.gamma_ratio * m.n_users));
  m.validate();
  return m;
}

}  // namespace spectra

#include "regionalign/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "regionalign/error.hpp"

namespace regionalign {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

EmbeddingBank::EmbeddingBank(std::vector<std::string> names,
                             std::vector<CategoryKind> kinds, std::size_t channels,
                             std::vector<double> embeddings)
    : names_(std::move(names)),
      kinds_(std::move(kinds)),
      channels_(channels),
      embeddings_(std::move(embeddings)) {
  if (names_.size() < 2) {
    throw Error(ErrorCode::kInvalidConfiguration, "embedding bank needs >= 2 categories");
  }
  if (channels_ == 0 || kinds_.size() != names_.size() ||
      embeddings_.size() != names_.size() * channels_) {
    throw Error(ErrorCode::kShape, "embedding bank sizes are inconsistent");
  }
  std::set<std::string> seen;
  for (const auto& name : names_) {
    if (name.empty()) throw Error(ErrorCode::kMalformed, "empty category name");
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::kDuplicateName, "duplicate category name '" + name + "'");
    }
  }
  for (CategoryKind k : kinds_) {
    if (k != CategoryKind::kThing && k != CategoryKind::kStuff) {
      throw Error(ErrorCode::kMalformed, "unknown category kind");
    }
  }
  for (double v : embeddings_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "non-finite embedding value");
  }
  norms_.reserve(names_.size());
  for (std::size_t j = 0; j < names_.size(); ++j) {
    const double n = l2(embedding(j));
    if (!(n > kMinNorm)) {
      throw Error(ErrorCode::kZeroNorm, "embedding of '" + names_[j] + "' has zero norm");
    }
    norms_.push_back(n);
  }
}

std::span<const double> EmbeddingBank::embedding(std::size_t index) const {
  if (index >= names_.size()) throw Error(ErrorCode::kShape, "category index out of range");
  return std::span<const double>(embeddings_).subspan(index * channels_, channels_);
}

std::vector<std::size_t> EmbeddingBank::indices_of(CategoryKind kind) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < kinds_.size(); ++j) {
    if (kinds_[j] == kind) out.push_back(j);
  }
  return out;
}

std::vector<std::size_t> EmbeddingBank::all_indices() const {
  std::vector<std::size_t> out(size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = j;
  return out;
}

bool EmbeddingBank::has_both_kinds() const {
  return std::count(kinds_.begin(), kinds_.end(), CategoryKind::kThing) > 0 &&
         std::count(kinds_.begin(), kinds_.end(), CategoryKind::kStuff) > 0;
}

bool EmbeddingBank::compatible_with(const EmbeddingBank& other) const {
  return size() == other.size() && channels_ == other.channels_ && kinds_ == other.kinds_ &&
         names_ == other.names_;
}

double cosine(std::span<const double> f, std::span<const double> t) {
  if (f.size() != t.size()) throw Error(ErrorCode::kShape, "cosine of unequal lengths");
  const double nf = l2(f);
  const double nt = l2(t);
  if (!(nf > kMinNorm) || !(nt > kMinNorm)) {
    throw Error(ErrorCode::kZeroNorm, "cosine of a near-zero vector");
  }
  return std::clamp(dot(f, t) / (nf * nt), -1.0, 1.0);
}

std::vector<double> bank_cosines(std::span<const double> f, const EmbeddingBank& bank) {
  if (f.size() != bank.channels()) {
    throw Error(ErrorCode::kShape, "feature length " + std::to_string(f.size()) +
                                       " != bank channels " +
                                       std::to_string(bank.channels()));
  }
  const double nf = l2(f);
  if (!(nf > kMinNorm)) throw Error(ErrorCode::kZeroNorm, "region feature has zero norm");
  std::vector<double> out(bank.size());
  for (std::size_t j = 0; j < bank.size(); ++j) {
    out[j] = std::clamp(dot(f, bank.embedding(j)) / (nf * bank.norm(j)), -1.0, 1.0);
  }
  return out;
}

std::vector<double> softmax_over(std::span<const double> cosines, double tau,
                                 const Support& support) {
  if (!(tau > 0.0)) throw Error(ErrorCode::kInvalidConfiguration, "tau must be > 0");
  if (support.empty()) throw Error(ErrorCode::kInvalidSupport, "empty softmax support");
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i] >= cosines.size() || (i > 0 && support[i] <= support[i - 1])) {
      throw Error(ErrorCode::kInvalidSupport, "support must be sorted, unique, in range");
    }
  }
  double peak = cosines[support.front()] / tau;
  for (std::size_t j : support) peak = std::max(peak, cosines[j] / tau);
  std::vector<double> out(cosines.size(), 0.0);
  double total = 0.0;
  for (std::size_t j : support) {
    out[j] = std::exp(cosines[j] / tau - peak);
    total += out[j];
  }
  for (std::size_t j : support) out[j] /= total;
  return out;
}

std::vector<double> class_probs(std::span<const double> f, const EmbeddingBank& bank,
                                double tau, const Support& support) {
  return softmax_over(bank_cosines(f, bank), tau, support);
}

void validate(const RetrievalConfig& cfg) {
  if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) {
    throw Error(ErrorCode::kInvalidConfiguration, "tau must be a positive finite value");
  }
  if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfiguration, "theta must lie in [0, 1]");
  }
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < values.size(); ++j) {
    if (values[j] > values[best]) best = j;
  }
  return best;
}

std::vector<RegionAssignment> retrieve(std::span<const std::vector<double>> features,
                                       std::span<const RegionSpec> regions,
                                       const EmbeddingBank& bank,
                                       const RetrievalConfig& cfg) {
  validate(cfg);
  if (!regions.empty() && regions.size() != features.size()) {
    throw Error(ErrorCode::kShape, "regions and features differ in count");
  }
  const Support full = bank.all_indices();
  std::vector<RegionAssignment> out;
  out.reserve(features.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    std::vector<double> cosines;
    try {
      cosines = bank_cosines(features[k], bank);
    } catch (const Error& e) {
      throw Error(e.code(), "region " + std::to_string(k) + ": " + e.what());
    }
    const std::vector<double> probs = softmax_over(cosines, cfg.tau, full);
    RegionAssignment a;
    a.region_index = k;
    if (!regions.empty()) a.region = regions[k];
    // Softmax is monotone, so ranking raw cosines avoids ties from exp rounding.
    a.category_index = argmax(cosines);
    a.teacher_max_prob = probs[a.category_index];
    a.kept = a.teacher_max_prob >= cfg.theta;
    out.push_back(a);
  }
  return out;
}

}  // namespace regionalign

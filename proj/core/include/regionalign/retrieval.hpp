#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "regionalign/featmap.hpp"

namespace regionalign {

enum class CategoryKind : std::uint8_t { kThing = 0, kStuff = 1 };

/// Norms at or below this are rejected by cosine and by the bank.
inline constexpr double kMinNorm = 1e-8;

/// Category names, their thing/stuff partition and one text embedding each.
/// Immutable once built; embeddings are kept exactly as given.
class EmbeddingBank {
 public:
  EmbeddingBank() = default;
  /// `embeddings` is row-major D x channels. Validates D >= 2, unique
  /// non-empty names, finite values and per-row norm > kMinNorm.
  EmbeddingBank(std::vector<std::string> names, std::vector<CategoryKind> kinds,
                std::size_t channels, std::vector<double> embeddings);

  std::size_t size() const noexcept { return names_.size(); }
  std::size_t channels() const noexcept { return channels_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<CategoryKind>& kinds() const noexcept { return kinds_; }
  CategoryKind kind(std::size_t index) const { return kinds_.at(index); }
  std::span<const double> embedding(std::size_t index) const;
  std::span<const double> embeddings() const noexcept { return embeddings_; }
  double norm(std::size_t index) const { return norms_.at(index); }

  std::vector<std::size_t> indices_of(CategoryKind kind) const;
  std::vector<std::size_t> all_indices() const;
  bool has_both_kinds() const;

  /// Same D, channel count, kinds and category order.
  bool compatible_with(const EmbeddingBank& other) const;

  friend bool operator==(const EmbeddingBank& a, const EmbeddingBank& b) {
    return a.names_ == b.names_ && a.kinds_ == b.kinds_ && a.channels_ == b.channels_ &&
           a.embeddings_ == b.embeddings_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<CategoryKind> kinds_;
  std::size_t channels_ = 0;
  std::vector<double> embeddings_;
  std::vector<double> norms_;
};

/// Sorted, duplicate-free category indices a softmax runs over.
using Support = std::vector<std::size_t>;

/// (f . t) / (|f| |t|), clamped to [-1, 1]. Throws kZeroNorm.
double cosine(std::span<const double> f, std::span<const double> t);

/// Cosine of `f` against every category in the bank.
std::vector<double> bank_cosines(std::span<const double> f, const EmbeddingBank& bank);

/// Temperature softmax of cos(f, T_j) / tau over `support`. The result has
/// length D with exact zeros outside the support.
std::vector<double> class_probs(std::span<const double> f, const EmbeddingBank& bank,
                                double tau, const Support& support);

/// Same as class_probs, from precomputed cosines.
std::vector<double> softmax_over(std::span<const double> cosines, double tau,
                                 const Support& support);

struct RetrievalConfig {
  double tau = 0.01;
  double theta = 0.3;
};

void validate(const RetrievalConfig& cfg);

struct RegionAssignment {
  std::size_t region_index = 0;
  RegionSpec region;
  std::size_t category_index = 0;
  double teacher_max_prob = 0.0;
  bool kept = false;

  friend bool operator==(const RegionAssignment&, const RegionAssignment&) = default;
};

/// Argmax with lowest-index tie-break.
std::size_t argmax(std::span<const double> values);

/// Assigns each region feature its most probable category under the full
/// bank softmax and keeps it iff that probability >= theta. `regions` may be
/// empty; otherwise it must pair up with `features`.
std::vector<RegionAssignment> retrieve(std::span<const std::vector<double>> features,
                                       std::span<const RegionSpec> regions,
                                       const EmbeddingBank& bank,
                                       const RetrievalConfig& cfg);

}  // namespace regionalign

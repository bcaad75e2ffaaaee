#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "regionalign/featmap.hpp"
#include "regionalign/retrieval.hpp"

namespace regionalign {

enum class RecordKind : std::uint8_t { kBox = 0, kMaskThing = 1, kMaskStuff = 2 };

inline constexpr std::array<RecordKind, 3> kAllRecordKinds = {
    RecordKind::kBox, RecordKind::kMaskThing, RecordKind::kMaskStuff};

/// "boxes", "masks_thing", "masks_stuff".
std::string_view record_kind_name(RecordKind kind);

/// Sparse mask coverage: (location index, weight in [0, 1]).
struct MaskEntry {
  std::uint32_t location = 0;
  double weight = 0.0;
  friend bool operator==(const MaskEntry&, const MaskEntry&) = default;
};

/// One annotated region of one image.
struct EvalRecord {
  RecordKind kind = RecordKind::kBox;
  std::size_t gt_category = 0;
  RegionSpec box;                // used by kBox
  std::vector<MaskEntry> mask;   // used by the mask kinds
  std::size_t image = 0;         // index into the per-image map list

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

/// Throws kShape / kInvalidRegion unless the record fits the map and the bank.
void validate_record(const EvalRecord& record, const FeatureMap& map,
                     const EmbeddingBank& bank);

/// All D categories ordered by probability descending, ties by index.
std::vector<std::size_t> classify_record(const FeatureMap& map, const EvalRecord& record,
                                         const EmbeddingBank& bank, double tau,
                                         int samples_per_axis = kDefaultSamplesPerAxis);

/// Rankings for every record, in record order.
std::vector<std::vector<std::size_t>> rank_records(std::span<const EvalRecord> records,
                                                   std::span<const FeatureMap> maps,
                                                   const EmbeddingBank& bank, double tau);

struct CategoryAccuracy {
  std::size_t category = 0;
  std::size_t records = 0;
  std::size_t hits = 0;
  double accuracy() const { return static_cast<double>(hits) / static_cast<double>(records); }
};

/// Macro (per-category) top-k accuracy for one record kind.
struct KindAccuracy {
  std::size_t records = 0;
  double mean = 0.0;
  std::vector<CategoryAccuracy> categories;  // categories with >= 1 record, ascending
};

/// Per-kind top-k accuracy; a kind with no records is absent.
struct TopKTable {
  std::size_t k = 1;
  std::array<std::optional<KindAccuracy>, 3> kinds;
  const std::optional<KindAccuracy>& operator[](RecordKind kind) const {
    return kinds[static_cast<std::size_t>(kind)];
  }
};

TopKTable mean_accuracy_from_ranks(std::span<const EvalRecord> records,
                                   std::span<const std::vector<std::size_t>> ranks,
                                   std::size_t k);

TopKTable mean_accuracy(std::span<const EvalRecord> records, std::span<const FeatureMap> maps,
                        const EmbeddingBank& bank, double tau, std::size_t k);

/// Top-1 and Top-5 side by side, as reported per kind.
struct AccuracyTable {
  TopKTable top1;
  TopKTable top5;
};

AccuracyTable accuracy_table(std::span<const EvalRecord> records,
                             std::span<const FeatureMap> maps, const EmbeddingBank& bank,
                             double tau);

/// D x D integer counts; rows are ground truth, columns are top-1 predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t categories = 0)
      : size_(categories), counts_(categories * categories, 0) {}

  std::size_t size() const noexcept { return size_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_.at(gt * size_ + pred); }
  void add(std::size_t gt, std::size_t pred) { ++counts_.at(gt * size_ + pred); }
  std::uint64_t row_sum(std::size_t gt) const;
  std::uint64_t diagonal_sum() const;
  std::uint64_t total() const;

 private:
  std::size_t size_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion_from_ranks(std::span<const EvalRecord> records,
                                     std::span<const std::vector<std::size_t>> ranks,
                                     std::size_t categories);

ConfusionMatrix confusion(std::span<const EvalRecord> records,
                          std::span<const FeatureMap> maps, const EmbeddingBank& bank,
                          double tau);

}  // namespace regionalign

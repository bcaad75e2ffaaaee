#include "regionalign/evalkit.hpp"

#include <algorithm>
#include <numeric>

#include "regionalign/error.hpp"

namespace regionalign {

std::string_view record_kind_name(RecordKind kind) {
  switch (kind) {
    case RecordKind::kBox: return "boxes";
    case RecordKind::kMaskThing: return "masks_thing";
    case RecordKind::kMaskStuff: return "masks_stuff";
  }
  return "unknown";
}

void validate_record(const EvalRecord& record, const FeatureMap& map,
                     const EmbeddingBank& bank) {
  if (record.gt_category >= bank.size()) {
    throw Error(ErrorCode::kShape, "ground-truth category " +
                                       std::to_string(record.gt_category) +
                                       " outside bank of size " + std::to_string(bank.size()));
  }
  if (record.kind == RecordKind::kBox) {
    validate_region(record.box, map.height(), map.width());
    return;
  }
  const CategoryKind expected =
      record.kind == RecordKind::kMaskThing ? CategoryKind::kThing : CategoryKind::kStuff;
  if (bank.kind(record.gt_category) != expected) {
    throw Error(ErrorCode::kMalformed, "mask record kind disagrees with its category kind");
  }
  for (const MaskEntry& e : record.mask) {
    if (e.location >= map.locations()) {
      throw Error(ErrorCode::kShape, "mask location " + std::to_string(e.location) +
                                         " outside map of " +
                                         std::to_string(map.locations()) + " locations");
    }
  }
}

namespace {

std::vector<double> pooled_feature(const FeatureMap& map, const EvalRecord& record,
                                   int samples_per_axis) {
  if (record.kind == RecordKind::kBox) return pool_region(map, record.box, samples_per_axis);
  std::vector<double> dense(map.locations(), 0.0);
  for (const MaskEntry& e : record.mask) dense[e.location] += e.weight;
  return pool_mask(map, dense);
}

}  // namespace

std::vector<std::size_t> classify_record(const FeatureMap& map, const EvalRecord& record,
                                         const EmbeddingBank& bank, double tau,
                                         int samples_per_axis) {
  validate_record(record, map, bank);
  if (!(tau > 0.0)) throw Error(ErrorCode::kInvalidConfiguration, "tau must be > 0");
  const std::vector<double> feature = pooled_feature(map, record, samples_per_axis);
  // Probability order is the cosine order; sorting cosines avoids exp ties.
  const std::vector<double> cosines = bank_cosines(feature, bank);
  std::vector<std::size_t> order(bank.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cosines[a] > cosines[b]; });
  return order;
}

std::vector<std::vector<std::size_t>> rank_records(std::span<const EvalRecord> records,
                                                   std::span<const FeatureMap> maps,
                                                   const EmbeddingBank& bank, double tau) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const EvalRecord& r = records[i];
    if (r.image >= maps.size()) {
      throw Error(ErrorCode::kShape, "record " + std::to_string(i) + " refers to image " +
                                         std::to_string(r.image) + " of " +
                                         std::to_string(maps.size()));
    }
    out.push_back(classify_record(maps[r.image], r, bank, tau));
  }
  return out;
}

TopKTable mean_accuracy_from_ranks(std::span<const EvalRecord> records,
                                   std::span<const std::vector<std::size_t>> ranks,
                                   std::size_t k) {
  if (ranks.size() != records.size()) {
    throw Error(ErrorCode::kShape, "ranking count differs from record count");
  }
  if (k == 0) throw Error(ErrorCode::kInvalidConfiguration, "k must be >= 1");
  TopKTable table;
  table.k = k;
  for (RecordKind kind : kAllRecordKinds) {
    std::vector<CategoryAccuracy> per_category;
    std::size_t count = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].kind != kind) continue;
      ++count;
      const std::size_t gt = records[i].gt_category;
      auto it = std::lower_bound(
          per_category.begin(), per_category.end(), gt,
          [](const CategoryAccuracy& c, std::size_t v) { return c.category < v; });
      if (it == per_category.end() || it->category != gt) {
        it = per_category.insert(it, CategoryAccuracy{gt, 0, 0});
      }
      ++it->records;
      const auto& rank = ranks[i];
      const auto top = rank.begin() + static_cast<std::ptrdiff_t>(std::min(k, rank.size()));
      if (std::find(rank.begin(), top, gt) != top) ++it->hits;
    }
    if (count == 0) continue;
    KindAccuracy acc;
    acc.records = count;
    double sum = 0.0;
    for (const CategoryAccuracy& c : per_category) sum += c.accuracy();
    acc.mean = sum / static_cast<double>(per_category.size());
    acc.categories = std::move(per_category);
    table.kinds[static_cast<std::size_t>(kind)] = std::move(acc);
  }
  return table;
}

TopKTable mean_accuracy(std::span<const EvalRecord> records, std::span<const FeatureMap> maps,
                        const EmbeddingBank& bank, double tau, std::size_t k) {
  const auto ranks = rank_records(records, maps, bank, tau);
  return mean_accuracy_from_ranks(records, ranks, k);
}

AccuracyTable accuracy_table(std::span<const EvalRecord> records,
                             std::span<const FeatureMap> maps, const EmbeddingBank& bank,
                             double tau) {
  const auto ranks = rank_records(records, maps, bank, tau);
  return {mean_accuracy_from_ranks(records, ranks, 1),
          mean_accuracy_from_ranks(records, ranks, 5)};
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t gt) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < size_; ++p) s += at(gt, p);
  return s;
}

std::uint64_t ConfusionMatrix::diagonal_sum() const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < size_; ++i) s += at(i, i);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

ConfusionMatrix confusion_from_ranks(std::span<const EvalRecord> records,
                                     std::span<const std::vector<std::size_t>> ranks,
                                     std::size_t categories) {
  if (ranks.size() != records.size()) {
    throw Error(ErrorCode::kShape, "ranking count differs from record count");
  }
  ConfusionMatrix m(categories);
  for (std::size_t i = 0; i < records.size(); ++i) {
    m.add(records[i].gt_category, ranks[i].front());
  }
  return m;
}

ConfusionMatrix confusion(std::span<const EvalRecord> records,
                          std::span<const FeatureMap> maps, const EmbeddingBank& bank,
                          double tau) {
  const auto ranks = rank_records(records, maps, bank, tau);
  return confusion_from_ranks(records, ranks, bank.size());
}

}  // namespace regionalign

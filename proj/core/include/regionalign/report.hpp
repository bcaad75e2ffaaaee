#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "regionalign/evalkit.hpp"
#include "regionalign/retrieval.hpp"
#include "regionalign/student.hpp"
#include "regionalign/synth.hpp"

namespace regionalign::io {

/// JSON configuration: {"world": {WorldConfig fields}, "train": {TrainConfig fields}}.
/// Either section may be omitted; omitted fields keep their defaults and any
/// key not naming a field is rejected.
struct ConfigFile {
  std::optional<WorldConfig> world;
  std::optional<TrainConfig> train;
};

ConfigFile parse_config(std::string_view json_text);
ConfigFile load_config(const std::filesystem::path& path);

std::string to_json(const WorldConfig& cfg);
std::string to_json(const TrainConfig& cfg);

/// {"kinds": {"boxes": {...} | null, "masks_thing": ..., "masks_stuff": ...}}
std::string accuracy_report_json(const AccuracyTable& table, const EmbeddingBank& bank);

/// {"config": {...}, "steps": [{"step", "epoch", "lr", "image_loss", "kept", "discarded"}]}
std::string train_log_json(std::span<const TrainLogEntry> log, const TrainConfig& cfg);

/// Header row of category names; one row per ground-truth category.
std::string confusion_csv(const ConfusionMatrix& matrix, const EmbeddingBank& bank);

std::string retrieval_json(std::span<const RegionAssignment> assignments,
                           const EmbeddingBank& bank, const GridShape& grid);

void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace regionalign::io

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "regionalign/evalkit.hpp"
#include "regionalign/featmap.hpp"
#include "regionalign/retrieval.hpp"
#include "regionalign/student.hpp"

namespace regionalign {

/// Parameters of a synthetic world with foreground-biased teacher features.
struct WorldConfig {
  std::size_t n_thing = 6;
  std::size_t n_stuff = 4;
  std::size_t channels = 32;
  std::size_t map_height = 12;
  std::size_t map_width = 12;
  std::size_t n_train = 200;
  std::size_t n_eval = 50;
  /// Rectangular segments per image (upper bound; small maps may get fewer).
  std::size_t segments = 5;
  double noise_sigma = 0.05;
  /// Teacher stuff cells lean this far toward a co-occurring thing.
  double bias_beta = 0.5;
  /// cooccurrence[s] lists the thing indices (0-based among things) that
  /// appear with stuff s. Empty means stuff s pairs with thing s mod n_thing.
  std::vector<std::vector<std::size_t>> cooccurrence;
  std::uint64_t seed = 0;
};

void validate(const WorldConfig& cfg);

struct SyntheticImage {
  std::vector<std::size_t> labels;  // category per location, row-major
  FeatureMap base;
  FeatureMap teacher;
  std::vector<EvalRecord> records;
};

/// Bank categories are ordered things first, then stuff.
struct SyntheticWorld {
  EmbeddingBank bank;
  std::vector<SyntheticImage> train;
  std::vector<SyntheticImage> eval;
};

/// Deterministic under cfg.seed. Feature values are rounded to binary32 so
/// an in-memory world equals its on-disk form.
SyntheticWorld gen_world(const WorldConfig& cfg);

/// The non-decoupled baseline: every region contrasts against every category.
Support coupled_baseline_support(std::size_t category, const EmbeddingBank& bank);

std::vector<TrainingImage> training_images(const std::vector<SyntheticImage>& images);

/// Records of all images with EvalRecord::image set to the image position.
std::vector<EvalRecord> collect_records(const std::vector<SyntheticImage>& images);

}  // namespace regionalign

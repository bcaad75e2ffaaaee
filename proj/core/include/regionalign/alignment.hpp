#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "regionalign/retrieval.hpp"

namespace regionalign {

/// Stuff regions contrast against every category; thing regions contrast
/// against thing categories only.
Support decoupled_support(std::size_t category, const EmbeddingBank& bank);

/// Teacher and student distributions of one kept region over a shared support.
struct AlignedPair {
  RegionAssignment assignment;
  Support support;
  std::vector<double> teacher_dist;  // length D, zero outside support
  std::vector<double> student_dist;  // length D, zero outside support
};

/// Uses decoupled_support(assignment.category_index).
AlignedPair pair_distributions(std::span<const double> teacher_feat,
                               std::span<const double> student_feat,
                               const RegionAssignment& assignment,
                               const EmbeddingBank& teacher_bank,
                               const EmbeddingBank& student_bank, double tau);

/// Explicit-support variant, used for the coupled comparison runs.
AlignedPair pair_distributions(std::span<const double> teacher_feat,
                               std::span<const double> student_feat,
                               const RegionAssignment& assignment, Support support,
                               const EmbeddingBank& teacher_bank,
                               const EmbeddingBank& student_bank, double tau);

/// Floor applied to student probabilities inside the logarithm.
inline constexpr double kProbFloor = 1e-12;

/// KL(teacher || student) over the pair's support.
double kl_loss(const AlignedPair& pair);

struct LossReport {
  std::vector<std::pair<std::size_t, double>> per_region_losses;
  double image_loss = 0.0;
  std::size_t kept_count = 0;
  std::size_t discarded_count = 0;
  bool empty_batch = false;
};

/// Mean KL over the pairs, in the order given. `pairs` must hold kept
/// regions only; `discarded_count` is carried through for reporting.
LossReport image_loss(std::span<const AlignedPair> pairs, std::size_t discarded_count = 0);

/// Gradient of kl_loss(pair) with respect to the student region feature.
std::vector<double> loss_gradient(const AlignedPair& pair,
                                  std::span<const double> student_feat,
                                  const EmbeddingBank& student_bank, double tau);

}  // namespace regionalign

#include "regionalign/alignment.hpp"

#include <algorithm>
#include <cmath>

#include "regionalign/error.hpp"

namespace regionalign {

Support decoupled_support(std::size_t category, const EmbeddingBank& bank) {
  if (bank.kind(category) == CategoryKind::kStuff) return bank.all_indices();
  return bank.indices_of(CategoryKind::kThing);
}

AlignedPair pair_distributions(std::span<const double> teacher_feat,
                               std::span<const double> student_feat,
                               const RegionAssignment& assignment,
                               const EmbeddingBank& teacher_bank,
                               const EmbeddingBank& student_bank, double tau) {
  return pair_distributions(teacher_feat, student_feat, assignment,
                            decoupled_support(assignment.category_index, teacher_bank),
                            teacher_bank, student_bank, tau);
}

AlignedPair pair_distributions(std::span<const double> teacher_feat,
                               std::span<const double> student_feat,
                               const RegionAssignment& assignment, Support support,
                               const EmbeddingBank& teacher_bank,
                               const EmbeddingBank& student_bank, double tau) {
  if (!teacher_bank.compatible_with(student_bank)) {
    throw Error(ErrorCode::kBankIncompatible,
                "teacher and student banks differ in size, kinds or order");
  }
  if (assignment.category_index >= teacher_bank.size()) {
    throw Error(ErrorCode::kShape, "assigned category out of range");
  }
  AlignedPair pair;
  pair.assignment = assignment;
  pair.teacher_dist = class_probs(teacher_feat, teacher_bank, tau, support);
  pair.student_dist = class_probs(student_feat, student_bank, tau, support);
  pair.support = std::move(support);
  return pair;
}

double kl_loss(const AlignedPair& pair) {
  double total = 0.0;
  for (std::size_t j : pair.support) {
    const double p = pair.teacher_dist[j];
    if (p <= 0.0) continue;
    const double q = std::max(pair.student_dist[j], kProbFloor);
    total += p * std::log(p / q);
  }
  // Rounding can leave a tiny negative residue when p == q.
  return std::max(total, 0.0);
}

LossReport image_loss(std::span<const AlignedPair> pairs, std::size_t discarded_count) {
  LossReport report;
  report.kept_count = pairs.size();
  report.discarded_count = discarded_count;
  report.per_region_losses.reserve(pairs.size());
  double sum = 0.0;
  for (const AlignedPair& pair : pairs) {
    const double loss = kl_loss(pair);
    report.per_region_losses.emplace_back(pair.assignment.region_index, loss);
    sum += loss;
  }
  if (pairs.empty()) {
    report.empty_batch = true;
    report.image_loss = 0.0;
  } else {
    report.image_loss = sum / static_cast<double>(pairs.size());
  }
  return report;
}

std::vector<double> loss_gradient(const AlignedPair& pair,
                                  std::span<const double> student_feat,
                                  const EmbeddingBank& student_bank, double tau) {
  const std::vector<double> cosines = bank_cosines(student_feat, student_bank);
  double sq = 0.0;
  for (double v : student_feat) sq += v * v;
  const double norm = std::sqrt(sq);

  // dKL/dlogit_j = q_j - p_j; logit_j = cos_j / tau;
  // dcos_j/df = t_j / (|f||t_j|) - cos_j f / |f|^2.
  std::vector<double> grad(student_feat.size(), 0.0);
  double radial = 0.0;
  for (std::size_t j : pair.support) {
    const double coeff = (pair.student_dist[j] - pair.teacher_dist[j]) / tau;
    if (coeff == 0.0) continue;
    const auto t = student_bank.embedding(j);
    const double scale = coeff / (norm * student_bank.norm(j));
    for (std::size_t c = 0; c < grad.size(); ++c) grad[c] += scale * t[c];
    radial += coeff * cosines[j];
  }
  const double radial_scale = radial / sq;
  for (std::size_t c = 0; c < grad.size(); ++c) grad[c] -= radial_scale * student_feat[c];
  return grad;
}

}  // namespace regionalign

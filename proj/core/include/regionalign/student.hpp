#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "regionalign/alignment.hpp"
#include "regionalign/featmap.hpp"
#include "regionalign/retrieval.hpp"

namespace regionalign {

/// Trainable per-location projection applied on top of frozen base features.
///
///   y   = W x + b
///   out = y                          (linear head)
///   out = y + V relu(y) + d          (hidden block, always residual)
///
/// All parameters live in one flat vector laid out as [W | b | V | d], with W
/// and V row-major C x C. The identity head (W = I, everything else zero)
/// returns its input unchanged for either architecture.
class StudentHead {
 public:
  StudentHead() = default;
  static StudentHead identity(std::size_t channels, bool hidden = false);

  /// Rebuilds a head from serialized parameters. Throws kShape on a length
  /// mismatch and kNonFinite on NaN/Inf.
  static StudentHead from_parameters(std::size_t channels, bool hidden,
                                     std::vector<double> params);

  std::size_t channels() const noexcept { return channels_; }
  bool hidden() const noexcept { return hidden_; }
  static std::size_t parameter_count(std::size_t channels, bool hidden);

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }

  std::span<const double> weight() const;
  std::span<const double> bias() const;
  std::span<const double> hidden_weight() const;
  std::span<const double> hidden_bias() const;

  friend bool operator==(const StudentHead&, const StudentHead&) = default;

 private:
  std::size_t channels_ = 0;
  bool hidden_ = false;
  std::vector<double> params_;
};

/// Applies the head at every location. Throws kShape on a channel mismatch.
FeatureMap student_forward(const FeatureMap& base, const StudentHead& head);

/// Accumulates d(loss)/d(params) given d(loss)/d(output map).
void student_backward(const FeatureMap& base, const StudentHead& head,
                      const FeatureMap& output_grad, std::span<double> param_grad);

enum class SupportMode : std::uint8_t { kDecoupled, kCoupled };

struct TrainConfig {
  double tau = 0.01;
  double theta = 0.3;
  int max_grid = 6;
  int epochs = 6;
  int batch_size = 1;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double weight_decay = 0.1;
  int warmup_steps = 1000;
  std::uint64_t seed = 0;
  int samples_per_axis = kDefaultSamplesPerAxis;
  SupportMode support = SupportMode::kDecoupled;
  bool hidden = false;
};

void validate(const TrainConfig& cfg);

struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  double base_lr = 0.0;
};

inline constexpr double kAdamEpsilon = 1e-8;

/// Linear warmup to cfg.learning_rate, then cosine decay to zero at total_steps.
double lr_at(std::uint64_t step, const TrainConfig& cfg, std::uint64_t total_steps);

/// One bias-corrected AdamW update with decoupled weight decay. Throws
/// kTrainingDiverged (naming the step) on a non-finite gradient.
void adamw_step(StudentHead& head, std::span<const double> grads, OptimizerState& state,
                double lr, const TrainConfig& cfg);

struct TrainingImage {
  FeatureMap base;     // input to the student head
  FeatureMap teacher;  // frozen teacher features
};

/// Loss and parameter gradient of one image for a fixed grid.
struct ImageObjective {
  LossReport loss;
  std::vector<RegionAssignment> assignments;
  std::vector<double> param_grad;
};

ImageObjective image_objective(const TrainingImage& image, const StudentHead& head,
                               const GridShape& grid, const EmbeddingBank& teacher_bank,
                               const EmbeddingBank& student_bank, const TrainConfig& cfg);

struct TrainLogEntry {
  std::uint64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  double image_loss = 0.0;
  std::size_t kept_count = 0;
  std::size_t discarded_count = 0;

  friend bool operator==(const TrainLogEntry&, const TrainLogEntry&) = default;
};

struct TrainResult {
  StudentHead head;
  OptimizerState optimizer;
  std::vector<TrainLogEntry> log;
};

std::uint64_t total_steps(std::size_t images, const TrainConfig& cfg);

/// Full sampling -> pooling -> retrieval -> alignment -> AdamW loop.
/// Deterministic for a given (dataset, banks, cfg).
TrainResult train(std::span<const TrainingImage> dataset, const EmbeddingBank& teacher_bank,
                  const EmbeddingBank& student_bank, const TrainConfig& cfg);

}  // namespace regionalign

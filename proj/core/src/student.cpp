#include "regionalign/student.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "regionalign/error.hpp"
#include "regionalign/synth.hpp"

namespace regionalign {

StudentHead StudentHead::identity(std::size_t channels, bool hidden) {
  if (channels == 0) throw Error(ErrorCode::kShape, "head needs at least one channel");
  StudentHead head;
  head.channels_ = channels;
  head.hidden_ = hidden;
  head.params_.assign(parameter_count(channels, hidden), 0.0);
  for (std::size_t i = 0; i < channels; ++i) head.params_[i * channels + i] = 1.0;
  return head;
}

StudentHead StudentHead::from_parameters(std::size_t channels, bool hidden,
                                         std::vector<double> params) {
  if (channels == 0 || params.size() != parameter_count(channels, hidden)) {
    throw Error(ErrorCode::kShape, "head parameter count does not match architecture");
  }
  for (double v : params) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "non-finite head parameter");
  }
  StudentHead head;
  head.channels_ = channels;
  head.hidden_ = hidden;
  head.params_ = std::move(params);
  return head;
}

std::size_t StudentHead::parameter_count(std::size_t channels, bool hidden) {
  const std::size_t layer = channels * channels + channels;
  return hidden ? 2 * layer : layer;
}

std::span<const double> StudentHead::weight() const {
  return std::span<const double>(params_).subspan(0, channels_ * channels_);
}

std::span<const double> StudentHead::bias() const {
  return std::span<const double>(params_).subspan(channels_ * channels_, channels_);
}

std::span<const double> StudentHead::hidden_weight() const {
  if (!hidden_) return {};
  return std::span<const double>(params_).subspan(channels_ * channels_ + channels_,
                                                  channels_ * channels_);
}

std::span<const double> StudentHead::hidden_bias() const {
  if (!hidden_) return {};
  return std::span<const double>(params_).subspan(2 * channels_ * channels_ + channels_,
                                                  channels_);
}

namespace {

void check_channels(const FeatureMap& map, const StudentHead& head) {
  if (map.channels() != head.channels()) {
    throw Error(ErrorCode::kShape, "map has " + std::to_string(map.channels()) +
                                       " channels, head expects " +
                                       std::to_string(head.channels()));
  }
}

// y = W x + b
void affine(std::span<const double> w, std::span<const double> b,
            std::span<const double> x, std::span<double> y) {
  const std::size_t c = x.size();
  for (std::size_t i = 0; i < c; ++i) {
    double s = b[i];
    const double* row = w.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) s += row[j] * x[j];
    y[i] = s;
  }
}

}  // namespace

FeatureMap student_forward(const FeatureMap& base, const StudentHead& head) {
  check_channels(base, head);
  const std::size_t c = head.channels();
  FeatureMap out(base.height(), base.width(), c);
  std::vector<double> y(c);
  std::vector<double> h(c);
  for (std::size_t loc = 0; loc < base.locations(); ++loc) {
    auto dst = out.location(loc);
    if (!head.hidden()) {
      affine(head.weight(), head.bias(), base.location(loc), dst);
      continue;
    }
    affine(head.weight(), head.bias(), base.location(loc), y);
    for (std::size_t i = 0; i < c; ++i) h[i] = std::max(y[i], 0.0);
    affine(head.hidden_weight(), head.hidden_bias(), h, dst);
    for (std::size_t i = 0; i < c; ++i) dst[i] += y[i];
  }
  return out;
}

void student_backward(const FeatureMap& base, const StudentHead& head,
                      const FeatureMap& output_grad, std::span<double> param_grad) {
  check_channels(base, head);
  check_channels(output_grad, head);
  if (param_grad.size() != head.parameters().size()) {
    throw Error(ErrorCode::kShape, "parameter gradient has the wrong length");
  }
  const std::size_t c = head.channels();
  double* dw = param_grad.data();
  double* db = dw + c * c;
  double* dv = db + c;
  double* dd = dv + c * c;
  const auto hw = head.hidden_weight();

  std::vector<double> y(c);
  std::vector<double> gy(c);
  for (std::size_t loc = 0; loc < base.locations(); ++loc) {
    const auto g = output_grad.location(loc);
    if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) continue;
    const auto x = base.location(loc);
    if (head.hidden()) {
      affine(head.weight(), head.bias(), x, y);
      for (std::size_t i = 0; i < c; ++i) {
        const double hi = std::max(y[i], 0.0);
        for (std::size_t j = 0; j < c; ++j) dv[j * c + i] += g[j] * hi;
        dd[i] += g[i];
      }
      for (std::size_t i = 0; i < c; ++i) {
        double back = 0.0;
        if (y[i] > 0.0) {
          for (std::size_t j = 0; j < c; ++j) back += hw[j * c + i] * g[j];
        }
        gy[i] = g[i] + back;
      }
    } else {
      std::copy(g.begin(), g.end(), gy.begin());
    }
    for (std::size_t i = 0; i < c; ++i) {
      double* row = dw + i * c;
      for (std::size_t j = 0; j < c; ++j) row[j] += gy[i] * x[j];
      db[i] += gy[i];
    }
  }
}

void validate(const TrainConfig& cfg) {
  validate(RetrievalConfig{cfg.tau, cfg.theta});
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidConfiguration, what);
  };
  if (cfg.max_grid < 2) fail("max_grid must be >= 2");
  if (cfg.epochs < 1) fail("epochs must be >= 1");
  if (cfg.batch_size < 1) fail("batch_size must be >= 1");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    fail("learning_rate must be a finite value >= 0");
  }
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
  if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) fail("beta2 must lie in [0, 1)");
  if (!(cfg.weight_decay >= 0.0) || !std::isfinite(cfg.weight_decay)) {
    fail("weight_decay must be a finite value >= 0");
  }
  if (cfg.warmup_steps < 0) fail("warmup_steps must be >= 0");
  if (cfg.samples_per_axis < 1) fail("samples_per_axis must be >= 1");
}

double lr_at(std::uint64_t step, const TrainConfig& cfg, std::uint64_t total_steps) {
  const double base = cfg.learning_rate;
  const auto warmup = static_cast<std::uint64_t>(cfg.warmup_steps);
  step = std::min(step, total_steps);
  if (step < warmup) {
    return base * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total_steps <= warmup) return base;
  const double progress = static_cast<double>(step - warmup) /
                          static_cast<double>(total_steps - warmup);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void adamw_step(StudentHead& head, std::span<const double> grads, OptimizerState& state,
                double lr, const TrainConfig& cfg) {
  auto params = head.parameters();
  if (grads.size() != params.size()) {
    throw Error(ErrorCode::kShape, "gradient length does not match parameters");
  }
  const std::uint64_t next = state.step + 1;
  for (double g : grads) {
    if (!std::isfinite(g)) {
      throw Error(ErrorCode::kTrainingDiverged,
                  "non-finite gradient at step " + std::to_string(next));
    }
  }
  if (state.first_moment.size() != params.size()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  state.step = next;
  const double t = static_cast<double>(next);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grads[i];
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= lr * (m_hat / (std::sqrt(v_hat) + kAdamEpsilon) + cfg.weight_decay * params[i]);
  }
}

ImageObjective image_objective(const TrainingImage& image, const StudentHead& head,
                               const GridShape& grid, const EmbeddingBank& teacher_bank,
                               const EmbeddingBank& student_bank, const TrainConfig& cfg) {
  const FeatureMap& base = image.base;
  const FeatureMap& teacher = image.teacher;
  if (base.height() != teacher.height() || base.width() != teacher.width()) {
    throw Error(ErrorCode::kShape, "base and teacher maps differ in spatial size");
  }
  if (teacher.channels() != teacher_bank.channels() ||
      base.channels() != student_bank.channels()) {
    throw Error(ErrorCode::kShape, "feature channels do not match the banks");
  }
  const auto regions = partition_regions(base.height(), base.width(), grid);
  std::vector<PoolingWeights> pooling;
  std::vector<std::vector<double>> teacher_feats;
  pooling.reserve(regions.size());
  teacher_feats.reserve(regions.size());
  for (const RegionSpec& r : regions) {
    pooling.push_back(roi_align_weights(base.height(), base.width(), r, cfg.samples_per_axis));
    teacher_feats.push_back(apply_pooling(teacher, pooling.back()));
  }

  ImageObjective out;
  out.assignments = retrieve(teacher_feats, regions, teacher_bank, {cfg.tau, cfg.theta});

  const FeatureMap student = student_forward(base, head);
  std::vector<AlignedPair> pairs;
  std::vector<std::vector<double>> student_feats;
  std::size_t discarded = 0;
  for (const RegionAssignment& a : out.assignments) {
    if (!a.kept) {
      ++discarded;
      continue;
    }
    const std::size_t k = a.region_index;
    student_feats.push_back(apply_pooling(student, pooling[k]));
    Support support = cfg.support == SupportMode::kCoupled
                          ? coupled_baseline_support(a.category_index, teacher_bank)
                          : decoupled_support(a.category_index, teacher_bank);
    pairs.push_back(pair_distributions(teacher_feats[k], student_feats.back(), a,
                                       std::move(support), teacher_bank, student_bank,
                                       cfg.tau));
  }
  out.loss = image_loss(pairs, discarded);
  out.param_grad.assign(head.parameters().size(), 0.0);
  if (pairs.empty()) return out;

  FeatureMap map_grad(base.height(), base.width(), base.channels());
  const double inv_count = 1.0 / static_cast<double>(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::vector<double> g = loss_gradient(pairs[i], student_feats[i], student_bank, cfg.tau);
    for (double& v : g) v *= inv_count;
    scatter_pooling(map_grad, pooling[pairs[i].assignment.region_index], g);
  }
  student_backward(base, head, map_grad, out.param_grad);
  return out;
}

std::uint64_t total_steps(std::size_t images, const TrainConfig& cfg) {
  const auto batch = static_cast<std::uint64_t>(cfg.batch_size);
  const std::uint64_t per_epoch = (images + batch - 1) / batch;
  return per_epoch * static_cast<std::uint64_t>(cfg.epochs);
}

TrainResult train(std::span<const TrainingImage> dataset, const EmbeddingBank& teacher_bank,
                  const EmbeddingBank& student_bank, const TrainConfig& cfg) {
  validate(cfg);
  if (dataset.empty()) throw Error(ErrorCode::kInvalidConfiguration, "empty training set");
  if (!teacher_bank.compatible_with(student_bank)) {
    throw Error(ErrorCode::kBankIncompatible, "teacher and student banks are incompatible");
  }
  const std::uint64_t total = total_steps(dataset.size(), cfg);
  if (static_cast<std::uint64_t>(cfg.warmup_steps) > total) {
    std::ostringstream msg;
    msg << "warmup_steps " << cfg.warmup_steps << " exceeds total steps " << total;
    throw Error(ErrorCode::kInvalidConfiguration, msg.str());
  }

  TrainResult result;
  result.head = StudentHead::identity(student_bank.channels(), cfg.hidden);
  result.optimizer.base_lr = cfg.learning_rate;
  RandomStream rng(cfg.seed);

  std::vector<std::size_t> order(dataset.size());
  std::uint64_t step = 0;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(start + batch, order.size());
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      std::vector<double> grad(result.head.parameters().size(), 0.0);
      TrainLogEntry entry;
      entry.step = step;
      entry.epoch = epoch;
      for (std::size_t i = start; i < stop; ++i) {
        const GridShape grid = sample_grid(rng, cfg.max_grid);
        const ImageObjective obj = image_objective(dataset[order[i]], result.head, grid,
                                                   teacher_bank, student_bank, cfg);
        entry.image_loss += obj.loss.image_loss * inv_batch;
        entry.kept_count += obj.loss.kept_count;
        entry.discarded_count += obj.loss.discarded_count;
        for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += obj.param_grad[p] * inv_batch;
      }
      if (!std::isfinite(entry.image_loss)) {
        throw Error(ErrorCode::kTrainingDiverged,
                    "non-finite loss at step " + std::to_string(step));
      }
      entry.lr = lr_at(step, cfg, total);
      adamw_step(result.head, grad, result.optimizer, entry.lr, cfg);
      result.log.push_back(entry);
      ++step;
    }
  }
  return result;
}

}  // namespace regionalign

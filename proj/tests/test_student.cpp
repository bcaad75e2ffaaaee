#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "regionalign/error.hpp"
#include "regionalign/student.hpp"

namespace regionalign {
namespace {

// Frozen from a reviewed run; libstdc++ distributions.
constexpr double kGoldenFinalLoss = 14.499523865784708;

StudentHead random_head(std::size_t c, bool hidden, std::mt19937_64& rng, double scale = 0.3) {
  auto p = oracle::random_vector(StudentHead::parameter_count(c, hidden), rng);
  for (double& v : p) v *= scale;
  // Keep W near the identity so outputs stay away from zero norm.
  for (std::size_t i = 0; i < c; ++i) p[i * c + i] += 1.0;
  return StudentHead::from_parameters(c, hidden, std::move(p));
}

std::vector<TrainingImage> random_dataset(std::size_t n, std::size_t h, std::size_t w,
                                          std::size_t c, std::mt19937_64& rng) {
  std::vector<TrainingImage> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({oracle::random_map(h, w, c, rng), oracle::random_map(h, w, c, rng)});
  }
  return out;
}

TEST(StudentHead, IdentityIsBitExact) {
  std::mt19937_64 rng(1);
  const FeatureMap base = oracle::random_map(4, 3, 5, rng);
  EXPECT_EQ(student_forward(base, StudentHead::identity(5)), base);
  EXPECT_EQ(student_forward(base, StudentHead::identity(5, true)), base);
}

TEST(StudentHead, ScaledIdentityDoubles) {
  std::mt19937_64 rng(2);
  const FeatureMap base = oracle::random_map(2, 2, 3, rng);
  std::vector<double> p(StudentHead::parameter_count(3, false), 0.0);
  for (std::size_t i = 0; i < 3; ++i) p[i * 3 + i] = 2.0;
  const FeatureMap out = student_forward(base, StudentHead::from_parameters(3, false, p));
  for (std::size_t i = 0; i < base.data().size(); ++i) EXPECT_EQ(out.data()[i], 2.0 * base.data()[i]);
}

TEST(StudentHead, MatchesNaiveMatVec) {
  std::mt19937_64 rng(3);
  for (bool hidden : {false, true}) {
    const std::size_t c = 4;
    const StudentHead head = random_head(c, hidden, rng, 0.8);
    const FeatureMap base = oracle::random_map(3, 3, c, rng);
    const FeatureMap out = student_forward(base, head);
    const auto w = head.weight();
    const auto b = head.bias();
    for (std::size_t l = 0; l < base.locations(); ++l) {
      const auto x = base.location(l);
      std::vector<double> y(c), expect(c);
      for (std::size_t i = 0; i < c; ++i) {
        y[i] = b[i];
        for (std::size_t j = 0; j < c; ++j) y[i] += w[i * c + j] * x[j];
      }
      expect = y;
      if (hidden) {
        const auto v = head.hidden_weight();
        const auto d = head.hidden_bias();
        for (std::size_t i = 0; i < c; ++i) {
          expect[i] += d[i];
          for (std::size_t j = 0; j < c; ++j) expect[i] += v[i * c + j] * std::max(y[j], 0.0);
        }
      }
      for (std::size_t i = 0; i < c; ++i) EXPECT_NEAR(out.location(l)[i], expect[i], 1e-12);
    }
  }
}

TEST(StudentHead, ParameterValidation) {
  EXPECT_EQ(StudentHead::parameter_count(3, false), 12u);
  EXPECT_EQ(StudentHead::parameter_count(3, true), 24u);
  EXPECT_THROW(StudentHead::from_parameters(3, false, std::vector<double>(11)), Error);
  std::vector<double> bad(12, 0.0);
  bad[5] = INFINITY;
  try {
    StudentHead::from_parameters(3, false, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
}

TEST(Schedule, WarmupThenCosine) {
  TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  cfg.warmup_steps = 1000;
  const std::uint64_t total = 10000;
  EXPECT_EQ(lr_at(0, cfg, total), 0.0);
  EXPECT_NEAR(lr_at(500, cfg, total), 5e-5, 1e-15);
  EXPECT_NEAR(lr_at(1000, cfg, total), 1e-4, 1e-15);
  EXPECT_NEAR(lr_at(5500, cfg, total), 5e-5, 1e-9 * 1e-4);
  EXPECT_NEAR(lr_at(total, cfg, total), 0.0, 1e-18);
  double prev = lr_at(1000, cfg, total);
  for (std::uint64_t t = 1001; t <= total; t += 7) {
    const double lr = lr_at(t, cfg, total);
    EXPECT_LE(lr, prev);
    EXPECT_GE(lr, 0.0);
    prev = lr;
  }
  // Continuous across the warmup boundary.
  EXPECT_NEAR(lr_at(999, cfg, total), lr_at(1001, cfg, total), 2e-7);
}

TEST(Schedule, NoWarmup) {
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.warmup_steps = 0;
  EXPECT_EQ(lr_at(0, cfg, 10), 0.5);
  EXPECT_NEAR(lr_at(5, cfg, 10), 0.25, 1e-15);
}

TEST(AdamW, FirstStepHandTrace) {
  // Parameter 1.0, gradient 0.5, lr 0.1, no decay: bias-corrected step is lr * sign(g).
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  StudentHead head = StudentHead::from_parameters(1, false, {1.0, 0.0});
  OptimizerState state;
  const std::vector<double> g{0.5, 0.0};
  adamw_step(head, g, state, 0.1, cfg);
  EXPECT_NEAR(head.parameters()[0], 0.9, 1e-7);
  EXPECT_EQ(head.parameters()[1], 0.0);
  EXPECT_EQ(state.step, 1u);
  EXPECT_NEAR(state.first_moment[0], 0.05, 1e-15);
  EXPECT_NEAR(state.second_moment[0], 0.02 * 0.25, 1e-15);
}

TEST(AdamW, DecoupledDecayWithZeroGradient) {
  TrainConfig cfg;
  cfg.weight_decay = 0.1;
  StudentHead head = StudentHead::from_parameters(1, false, {2.0, -1.0});
  OptimizerState state;
  adamw_step(head, std::vector<double>{0.0, 0.0}, state, 0.1, cfg);
  EXPECT_NEAR(head.parameters()[0], 2.0 * (1 - 0.01), 1e-15);
  EXPECT_NEAR(head.parameters()[1], -1.0 * (1 - 0.01), 1e-15);
  cfg.weight_decay = 0.0;
  const StudentHead before = head;
  adamw_step(head, std::vector<double>{0.0, 0.0}, state, 0.1, cfg);
  EXPECT_EQ(head, before);
}

TEST(AdamW, NonFiniteGradientNamesStep) {
  TrainConfig cfg;
  StudentHead head = StudentHead::identity(1);
  OptimizerState state;
  adamw_step(head, std::vector<double>{0.1, 0.1}, state, 0.1, cfg);
  try {
    adamw_step(head, std::vector<double>{NAN, 0.1}, state, 0.1, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTrainingDiverged);
    EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos);
  }
}

TEST(ImageObjective, FiniteDifferencesOnHeadParameters) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> dim(3, 6);
  int checked = 0;
  for (int t = 0; t < 24; ++t) {
    const bool hidden = t % 2 == 1;
    const std::size_t c = 2 + t % 7;
    const std::size_t h = dim(rng), w = dim(rng);
    const auto bank = oracle::random_bank(2 + rng() % 3, 1 + rng() % 3, c, rng);
    const TrainingImage image{oracle::random_map(h, w, c, rng), oracle::random_map(h, w, c, rng)};
    const StudentHead head = random_head(c, hidden, rng);
    TrainConfig cfg;
    cfg.tau = 0.2;
    cfg.theta = 0.0;
    cfg.hidden = hidden;
    cfg.support = t % 3 == 0 ? SupportMode::kCoupled : SupportMode::kDecoupled;
    const GridShape grid = sample_grid(rng, 3);
    const ImageObjective obj = image_objective(image, head, grid, bank, bank, cfg);
    ASSERT_GT(obj.loss.kept_count, 0u);
    const auto numeric = oracle::central_difference(
        [&](const std::vector<double>& p) {
          const StudentHead perturbed = StudentHead::from_parameters(c, hidden, p);
          return image_objective(image, perturbed, grid, bank, bank, cfg).loss.image_loss;
        },
        std::vector<double>(head.parameters().begin(), head.parameters().end()), 1e-5);
    EXPECT_LE(oracle::relative_error(obj.param_grad, numeric), 1e-3) << "case " << t;
    ++checked;
  }
  EXPECT_EQ(checked, 24);
}

TEST(ImageObjective, NothingKeptGivesEmptyBatch) {
  std::mt19937_64 rng(9);
  const auto bank = oracle::random_bank(2, 2, 3, rng);
  const TrainingImage image{oracle::random_map(4, 4, 3, rng), oracle::random_map(4, 4, 3, rng)};
  TrainConfig cfg;
  cfg.tau = 1.0;
  cfg.theta = 1.0;  // unreachable at this temperature
  const ImageObjective obj =
      image_objective(image, StudentHead::identity(3), {2, 2}, bank, bank, cfg);
  EXPECT_TRUE(obj.loss.empty_batch);
  EXPECT_EQ(obj.loss.discarded_count, 4u);
  for (double g : obj.param_grad) EXPECT_EQ(g, 0.0);
}

TEST(Train, TeacherEqualsBaseIsFixedPoint) {
  std::mt19937_64 rng(10);
  const auto bank = oracle::random_bank(3, 2, 4, rng);
  std::vector<TrainingImage> data;
  for (int i = 0; i < 5; ++i) {
    const FeatureMap m = oracle::random_map(6, 6, 4, rng);
    data.push_back({m, m});
  }
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.warmup_steps = 2;
  cfg.learning_rate = 1e-2;
  cfg.weight_decay = 0.0;
  cfg.theta = 0.0;
  for (bool hidden : {false, true}) {
    cfg.hidden = hidden;
    const TrainResult r = train(data, bank, bank, cfg);
    EXPECT_EQ(r.head, StudentHead::identity(4, hidden));
    for (const auto& e : r.log) EXPECT_LE(e.image_loss, 1e-12);
  }
}

TEST(Train, DeterministicWithFrozenGolden) {
  std::mt19937_64 rng(11);
  const auto bank = oracle::random_bank(3, 2, 4, rng);
  const auto data = random_dataset(6, 6, 6, 4, rng);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.warmup_steps = 4;
  cfg.learning_rate = 1e-2;
  cfg.tau = 0.05;
  cfg.seed = 123;
  const TrainResult a = train(data, bank, bank, cfg);
  const TrainResult b = train(data, bank, bank, cfg);
  EXPECT_EQ(a.head, b.head);
  EXPECT_EQ(a.log, b.log);
  ASSERT_EQ(a.log.size(), 18u);
  EXPECT_EQ(a.log.front().lr, 0.0);
  EXPECT_NEAR(a.log.back().image_loss, kGoldenFinalLoss, 1e-12);
  cfg.seed = 124;
  EXPECT_NE(train(data, bank, bank, cfg).log, a.log);
}

TEST(Train, StartsFromIdentityAndReducesLoss) {
  std::mt19937_64 rng(12);
  const auto bank = oracle::random_bank(3, 2, 4, rng);
  auto data = random_dataset(8, 6, 6, 4, rng);
  // Teacher is a fixed linear transform of the base: reachable by the head.
  for (auto& img : data) {
    std::vector<double> t(img.base.data().begin(), img.base.data().end());
    for (std::size_t l = 0; l < img.base.locations(); ++l) std::swap(t[l * 4], t[l * 4 + 1]);
    img.teacher = FeatureMap(6, 6, 4, t);
  }
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.warmup_steps = 0;
  cfg.learning_rate = 0.0;
  cfg.tau = 0.1;
  cfg.theta = 0.0;
  const double start = train(data, bank, bank, cfg).log.front().image_loss;
  cfg.epochs = 40;
  cfg.learning_rate = 2e-2;
  cfg.warmup_steps = 8;
  cfg.weight_decay = 0.0;
  const TrainResult r = train(data, bank, bank, cfg);
  double tail = 0.0;
  for (std::size_t i = r.log.size() - 8; i < r.log.size(); ++i) tail += r.log[i].image_loss / 8;
  EXPECT_LT(tail, 0.5 * start);
}

TEST(Train, ConfigurationErrors) {
  std::mt19937_64 rng(13);
  const auto bank = oracle::random_bank(2, 2, 3, rng);
  TrainConfig cfg;
  cfg.warmup_steps = 0;
  EXPECT_THROW(train({}, bank, bank, cfg), Error);
  const auto data = random_dataset(3, 4, 4, 3, rng);
  cfg.epochs = 2;
  cfg.warmup_steps = 7;
  try {
    train(data, bank, bank, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidConfiguration);
  }
  cfg.warmup_steps = 0;
  cfg.tau = 0.0;
  EXPECT_THROW(train(data, bank, bank, cfg), Error);
  cfg.tau = 0.01;
  cfg.max_grid = 1;
  EXPECT_THROW(train(data, bank, bank, cfg), Error);
}

}  // namespace
}  // namespace regionalign

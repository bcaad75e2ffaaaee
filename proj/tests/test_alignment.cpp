#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "regionalign/alignment.hpp"
#include "regionalign/error.hpp"

namespace regionalign {
namespace {

EmbeddingBank cat_sky() {
  return EmbeddingBank({"cat", "sky"}, {CategoryKind::kThing, CategoryKind::kStuff}, 2,
                       {1.0, 0.0, 0.0, 1.0});
}

RegionAssignment assigned(std::size_t c) {
  RegionAssignment a;
  a.category_index = c;
  a.kept = true;
  a.teacher_max_prob = 1.0;
  return a;
}

TEST(DecoupledSupport, ThingAndStuffBranches) {
  const auto bank = cat_sky();
  EXPECT_EQ(decoupled_support(1, bank), (Support{0, 1}));
  EXPECT_EQ(decoupled_support(0, bank), (Support{0}));
  const EmbeddingBank all_things({"a", "b", "c"},
                                 {CategoryKind::kThing, CategoryKind::kThing, CategoryKind::kThing},
                                 1, {1.0, 2.0, 3.0});
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(decoupled_support(c, all_things), (Support{0, 1, 2}));
}

TEST(PairDistributions, ThingRegionZeroesStuff) {
  std::mt19937_64 rng(1);
  const auto bank = oracle::random_bank(3, 2, 4, rng);
  const auto t = oracle::random_vector(4, rng);
  const auto s = oracle::random_vector(4, rng);
  const AlignedPair pair = pair_distributions(t, s, assigned(1), bank, bank, 0.01);
  EXPECT_EQ(pair.support, (Support{0, 1, 2}));
  EXPECT_EQ(pair.teacher_dist[3], 0.0);
  EXPECT_EQ(pair.teacher_dist[4], 0.0);
  EXPECT_EQ(pair.student_dist[3], 0.0);
  EXPECT_EQ(pair.student_dist[4], 0.0);
}

TEST(PairDistributions, IdenticalInputsGiveIdenticalDistributions) {
  std::mt19937_64 rng(2);
  const auto bank = oracle::random_bank(2, 2, 3, rng);
  const auto f = oracle::random_vector(3, rng);
  for (std::size_t c = 0; c < bank.size(); ++c) {
    const AlignedPair pair = pair_distributions(f, f, assigned(c), bank, bank, 0.01);
    EXPECT_EQ(pair.teacher_dist, pair.student_dist);
    EXPECT_LE(kl_loss(pair), 1e-9);
  }
}

TEST(PairDistributions, RestrictedSoftmaxOracle) {
  // Orthonormal bank: cosines are the normalized feature coordinates.
  const EmbeddingBank bank({"t0", "t1", "s0"},
                           {CategoryKind::kThing, CategoryKind::kThing, CategoryKind::kStuff}, 3,
                           {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const std::vector<double> teacher{0.6, 0.3, 0.1};
  const std::vector<double> student{0.2, 0.5, 0.4};
  const double tau = 0.5;
  auto logits = [&](const std::vector<double>& f) {
    long double n = 0;
    for (double v : f) n += static_cast<long double>(v) * v;
    n = std::sqrt(n);
    std::vector<long double> out;
    for (double v : f) out.push_back(v / n / tau);
    return out;
  };
  for (std::size_t c : {0u, 2u}) {
    const AlignedPair pair = pair_distributions(teacher, student, assigned(c), bank, bank, tau);
    const Support support = c == 2 ? Support{0, 1, 2} : Support{0, 1};
    const auto p = oracle::restricted_softmax(logits(teacher), support);
    const auto q = oracle::restricted_softmax(logits(student), support);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(pair.teacher_dist[j], p[j], 1e-9);
      EXPECT_NEAR(pair.student_dist[j], q[j], 1e-9);
    }
  }
}

TEST(PairDistributions, BankMismatch) {
  const auto a = cat_sky();
  const EmbeddingBank b({"sky", "cat"}, {CategoryKind::kStuff, CategoryKind::kThing}, 2,
                        {0.0, 1.0, 1.0, 0.0});
  try {
    pair_distributions(std::vector<double>{1, 0}, std::vector<double>{1, 0}, assigned(0), a, b,
                       0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBankIncompatible);
  }
}

TEST(KlLoss, HandValues) {
  AlignedPair pair;
  pair.support = {0, 1};
  pair.teacher_dist = {1.0, 0.0};
  pair.student_dist = {0.5, 0.5};
  EXPECT_NEAR(kl_loss(pair), std::log(2.0), 1e-12);
  pair.student_dist = {1.0, 0.0};
  EXPECT_NEAR(kl_loss(pair), 0.0, 1e-12);
  // A student probability of exactly zero is floored inside the log.
  pair.teacher_dist = {0.0, 1.0};
  EXPECT_NEAR(kl_loss(pair), -std::log(kProbFloor), 1e-9);
}

TEST(KlLoss, NonNegativeOnRandomPairs) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 500; ++t) {
    const auto bank = oracle::random_bank(3, 3, 4, rng);
    const auto a = oracle::random_vector(4, rng);
    const auto b = oracle::random_vector(4, rng);
    const AlignedPair pair = pair_distributions(a, b, assigned(rng() % 6), bank, bank, 0.05);
    EXPECT_GE(kl_loss(pair), 0.0);
  }
}

TEST(ImageLoss, MeanAndEmpty) {
  AlignedPair lo, hi;
  lo.support = hi.support = {0, 1};
  lo.teacher_dist = {1.0, 0.0};
  lo.student_dist = {std::exp(-0.2), 1.0 - std::exp(-0.2)};
  hi.teacher_dist = {1.0, 0.0};
  hi.student_dist = {std::exp(-0.4), 1.0 - std::exp(-0.4)};
  lo.assignment.region_index = 3;
  hi.assignment.region_index = 7;
  const std::vector<AlignedPair> pairs{lo, hi};
  const LossReport single = image_loss(std::span(pairs).first(1));
  EXPECT_NEAR(single.image_loss, 0.2, 1e-12);
  const LossReport both = image_loss(pairs, 5);
  EXPECT_NEAR(both.image_loss, 0.3, 1e-12);
  EXPECT_EQ(both.kept_count, 2u);
  EXPECT_EQ(both.discarded_count, 5u);
  EXPECT_EQ(both.per_region_losses[1].first, 7u);
  const LossReport none = image_loss({}, 4);
  EXPECT_TRUE(none.empty_batch);
  EXPECT_EQ(none.image_loss, 0.0);
}

TEST(ImageLoss, MatchesIndependentSummation) {
  std::mt19937_64 rng(4);
  const auto bank = oracle::random_bank(3, 2, 5, rng);
  std::vector<AlignedPair> pairs;
  for (int k = 0; k < 17; ++k) {
    pairs.push_back(pair_distributions(oracle::random_vector(5, rng), oracle::random_vector(5, rng),
                                       assigned(rng() % 5), bank, bank, 0.1));
    pairs.back().assignment.region_index = k;
  }
  const LossReport r = image_loss(pairs);
  long double sum = 0;
  for (const auto& p : pairs) {
    long double kl = 0;
    for (std::size_t j : p.support) {
      if (p.teacher_dist[j] > 0) {
        kl += p.teacher_dist[j] * std::log(static_cast<long double>(p.teacher_dist[j]) /
                                           std::max(p.student_dist[j], kProbFloor));
      }
    }
    sum += kl;
  }
  EXPECT_NEAR(r.image_loss, static_cast<double>(sum / pairs.size()), 1e-12);
  double direct = 0.0;
  for (const auto& [k, v] : r.per_region_losses) direct += v;
  EXPECT_EQ(r.image_loss, direct / static_cast<double>(pairs.size()));
}

TEST(LossGradient, ZeroWhenDistributionsMatch) {
  std::mt19937_64 rng(5);
  const auto bank = oracle::random_bank(3, 2, 4, rng);
  const auto f = oracle::random_vector(4, rng);
  const AlignedPair pair = pair_distributions(f, f, assigned(4), bank, bank, 0.01);
  for (double g : loss_gradient(pair, f, bank, 0.01)) EXPECT_NEAR(g, 0.0, 1e-9);
}

TEST(LossGradient, FiniteDifferencesBothBranches) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> tau_dist(0.1, 1.0);
  std::uniform_int_distribution<std::size_t> dim(2, 8);
  int thing_cases = 0, stuff_cases = 0;
  for (int t = 0; t < 80; ++t) {
    const std::size_t c = dim(rng);
    const auto bank = oracle::random_bank(2 + rng() % 3, 1 + rng() % 3, c, rng);
    const auto teacher = oracle::random_vector(c, rng);
    const auto student = oracle::random_vector(c, rng);
    const double tau = tau_dist(rng);
    const RegionAssignment a = assigned(rng() % bank.size());
    (bank.kind(a.category_index) == CategoryKind::kThing ? thing_cases : stuff_cases)++;
    const AlignedPair pair = pair_distributions(teacher, student, a, bank, bank, tau);
    const auto analytic = loss_gradient(pair, student, bank, tau);
    const auto numeric = oracle::central_difference(
        [&](const std::vector<double>& f) {
          return kl_loss(pair_distributions(teacher, f, a, bank, bank, tau));
        },
        student, 1e-3);
    EXPECT_LE(oracle::relative_error(analytic, numeric), 1e-4) << "case " << t;
  }
  EXPECT_GT(thing_cases, 10);
  EXPECT_GT(stuff_cases, 10);
}

TEST(LossGradient, OrthogonalToFeatureAndScaleInvariantLoss) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 50; ++t) {
    const auto bank = oracle::random_bank(3, 3, 6, rng);
    const auto teacher = oracle::random_vector(6, rng);
    const auto student = oracle::random_vector(6, rng);
    const RegionAssignment a = assigned(rng() % 6);
    const AlignedPair pair = pair_distributions(teacher, student, a, bank, bank, 0.2);
    auto doubled = student;
    for (double& v : doubled) v *= 2.0;
    EXPECT_NEAR(kl_loss(pair_distributions(teacher, doubled, a, bank, bank, 0.2)),
                kl_loss(pair), 1e-9);
    const auto g = loss_gradient(pair, student, bank, 0.2);
    double along = 0.0, gn = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      along += g[i] * student[i];
      gn += g[i] * g[i];
      fn += student[i] * student[i];
    }
    EXPECT_NEAR(along / std::sqrt(fn), 0.0, 1e-6 * std::max(1.0, std::sqrt(gn)));
  }
}

}  // namespace
}  // namespace regionalign

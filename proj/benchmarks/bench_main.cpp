#include <benchmark/benchmark.h>

#include <random>

#include "regionalign/alignment.hpp"
#include "regionalign/student.hpp"
#include "regionalign/synth.hpp"

namespace ra = regionalign;

namespace {

ra::FeatureMap noise_map(std::size_t h, std::size_t w, std::size_t c) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> data(h * w * c);
  for (double& v : data) v = g(rng);
  return ra::FeatureMap(h, w, c, std::move(data));
}

const ra::SyntheticWorld& world() {
  static const ra::SyntheticWorld w = [] {
    ra::WorldConfig cfg;
    cfg.n_train = 16;
    cfg.n_eval = 0;
    return ra::gen_world(cfg);
  }();
  return w;
}

void BM_PoolRegion(benchmark::State& state) {
  const auto m = noise_map(32, 32, 64);
  const int spa = static_cast<int>(state.range(0));
  const ra::RegionSpec r{3.3, 4.1, 20.7, 17.9};
  for (auto _ : state) benchmark::DoNotOptimize(ra::pool_region(m, r, spa));
}
BENCHMARK(BM_PoolRegion)->Arg(2)->Arg(8)->Arg(64);

void BM_Retrieve(benchmark::State& state) {
  const auto& w = world();
  const auto regions = ra::partition_regions(12, 12, {6, 6});
  std::vector<std::vector<double>> feats;
  for (const auto& r : regions) feats.push_back(ra::pool_region(w.train[0].teacher, r));
  for (auto _ : state) benchmark::DoNotOptimize(ra::retrieve(feats, regions, w.bank, {}));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(feats.size()));
}
BENCHMARK(BM_Retrieve);

void BM_ImageObjective(benchmark::State& state) {
  const auto& w = world();
  const auto images = ra::training_images(w.train);
  ra::TrainConfig cfg;
  cfg.hidden = state.range(0) != 0;
  const auto head = ra::StudentHead::identity(w.bank.channels(), cfg.hidden);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ra::image_objective(images[i++ % images.size()], head, {4, 4}, w.bank, w.bank, cfg));
  }
}
BENCHMARK(BM_ImageObjective)->Arg(0)->Arg(1);

void BM_TrainEpoch(benchmark::State& state) {
  const auto& w = world();
  const auto images = ra::training_images(w.train);
  ra::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.warmup_steps = 4;
  for (auto _ : state) benchmark::DoNotOptimize(ra::train(images, w.bank, w.bank, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(images.size()));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

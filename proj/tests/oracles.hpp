#pragma once

// Independent reference computations for the unit and acceptance suites.
// Nothing here calls into the pooling, softmax or gradient code it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "regionalign/featmap.hpp"
#include "regionalign/retrieval.hpp"

namespace regionalign::oracle {

/// Bilinear sample of one channel at continuous (x, y), clamped to the
/// outermost location centers.
inline double bilinear(const FeatureMap& m, double x, double y, std::size_t ch) {
  const double u = std::min(std::max(x - 0.5, 0.0), static_cast<double>(m.width() - 1));
  const double v = std::min(std::max(y - 0.5, 0.0), static_cast<double>(m.height() - 1));
  const auto c0 = static_cast<std::size_t>(u);
  const auto r0 = static_cast<std::size_t>(v);
  const std::size_t c1 = std::min(c0 + 1, m.width() - 1);
  const std::size_t r1 = std::min(r0 + 1, m.height() - 1);
  const double fx = u - static_cast<double>(c0);
  const double fy = v - static_cast<double>(r0);
  const double top = (1 - fx) * m.at(r0, c0)[ch] + fx * m.at(r0, c1)[ch];
  const double bottom = (1 - fx) * m.at(r1, c0)[ch] + fx * m.at(r1, c1)[ch];
  return (1 - fy) * top + fy * bottom;
}

/// Mean of `points` x `points` bilinear samples at cell midpoints.
inline std::vector<double> dense_pool(const FeatureMap& m, const RegionSpec& r, int points) {
  std::vector<double> out(m.channels(), 0.0);
  for (std::size_t ch = 0; ch < m.channels(); ++ch) {
    double s = 0.0;
    for (int i = 0; i < points; ++i) {
      const double y = r.y0 + (i + 0.5) * (r.y1 - r.y0) / points;
      for (int j = 0; j < points; ++j) {
        s += bilinear(m, r.x0 + (j + 0.5) * (r.x1 - r.x0) / points, y, ch);
      }
    }
    out[ch] = s / (static_cast<double>(points) * points);
  }
  return out;
}

/// Cosine in long double, no clamping.
inline long double cosine_ld(std::span<const double> a, std::span<const double> b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

/// Index of the largest raw cosine, first index on ties.
inline std::size_t brute_force_argmax(std::span<const double> f, const EmbeddingBank& bank) {
  std::size_t best = 0;
  long double best_cos = cosine_ld(f, bank.embedding(0));
  for (std::size_t j = 1; j < bank.size(); ++j) {
    const long double c = cosine_ld(f, bank.embedding(j));
    if (c > best_cos) {
      best_cos = c;
      best = j;
    }
  }
  return best;
}

/// Plain softmax over a support in long double, no max-subtraction.
inline std::vector<double> restricted_softmax(std::span<const long double> logits,
                                              const std::vector<std::size_t>& support) {
  long double total = 0;
  for (std::size_t j : support) total += std::exp(logits[j]);
  std::vector<double> out(logits.size(), 0.0);
  for (std::size_t j : support) out[j] = static_cast<double>(std::exp(logits[j]) / total);
  return out;
}

/// Central differences of f at x with step h.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// |a - b| / max(|a|, |b|), with a floor so that two near-zero vectors agree.
inline double relative_error(std::span<const double> a, std::span<const double> b,
                             double floor = 1e-10) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

inline FeatureMap random_map(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng,
                             double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> data(h * w * c);
  for (double& v : data) v = u(rng);
  return FeatureMap(h, w, c, std::move(data));
}

inline RegionSpec random_region(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(0.0, static_cast<double>(w));
  std::uniform_real_distribution<double> uy(0.0, static_cast<double>(h));
  for (;;) {
    double x0 = ux(rng), x1 = ux(rng), y0 = uy(rng), y1 = uy(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    if (x1 - x0 > 0.05 && y1 - y0 > 0.05) return {x0, y0, x1, y1};
  }
}

/// Gaussian bank with `things` THING entries followed by `stuff` STUFF entries.
inline EmbeddingBank random_bank(std::size_t things, std::size_t stuff, std::size_t channels,
                                 std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::string> names;
  std::vector<CategoryKind> kinds;
  for (std::size_t i = 0; i < things + stuff; ++i) {
    names.push_back((i < things ? "thing" : "stuff") + std::to_string(i));
    kinds.push_back(i < things ? CategoryKind::kThing : CategoryKind::kStuff);
  }
  std::vector<double> emb((things + stuff) * channels);
  for (double& v : emb) v = g(rng);
  return EmbeddingBank(std::move(names), std::move(kinds), channels, std::move(emb));
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

}  // namespace regionalign::oracle

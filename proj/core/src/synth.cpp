#include "regionalign/synth.hpp"

#include <algorithm>
#include <cmath>

#include "regionalign/error.hpp"

namespace regionalign {

void validate(const WorldConfig& cfg) {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidConfiguration, what);
  };
  if (cfg.n_thing < 1 || cfg.n_stuff < 1) fail("n_thing and n_stuff must be >= 1");
  if (cfg.channels < cfg.n_thing + cfg.n_stuff) {
    fail("channels must be >= n_thing + n_stuff for orthogonal category directions");
  }
  if (cfg.map_height < 4 || cfg.map_width < 4) fail("maps must be at least 4x4");
  if (cfg.segments < 2) fail("segments must be >= 2");
  if (!(cfg.noise_sigma >= 0.0) || !std::isfinite(cfg.noise_sigma)) {
    fail("noise_sigma must be a finite value >= 0");
  }
  if (!(cfg.bias_beta >= 0.0 && cfg.bias_beta < 1.0)) fail("bias_beta must lie in [0, 1)");
  if (!cfg.cooccurrence.empty()) {
    if (cfg.cooccurrence.size() != cfg.n_stuff) {
      fail("cooccurrence needs one list per stuff category");
    }
    for (const auto& list : cfg.cooccurrence) {
      if (list.empty()) fail("cooccurrence lists must be non-empty");
      for (std::size_t t : list) {
        if (t >= cfg.n_thing) fail("cooccurrence thing index out of range");
      }
    }
  }
}

Support coupled_baseline_support(std::size_t category, const EmbeddingBank& bank) {
  if (category >= bank.size()) throw Error(ErrorCode::kShape, "category index out of range");
  return bank.all_indices();
}

namespace {

struct Rect {
  std::size_t row0, col0, rows, cols;
  std::size_t area() const { return rows * cols; }
};

float to_binary32(double v) { return static_cast<float>(v); }

// Orthonormal rows from Gaussian draws (modified Gram-Schmidt).
std::vector<double> orthonormal_rows(std::size_t count, std::size_t dim, RandomStream& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> rows(count * dim);
  for (std::size_t i = 0; i < count; ++i) {
    double* row = rows.data() + i * dim;
    for (;;) {
      for (std::size_t c = 0; c < dim; ++c) row[c] = gauss(rng);
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < i; ++j) {
          const double* prev = rows.data() + j * dim;
          double d = 0.0;
          for (std::size_t c = 0; c < dim; ++c) d += row[c] * prev[c];
          for (std::size_t c = 0; c < dim; ++c) row[c] -= d * prev[c];
        }
      }
      double n = 0.0;
      for (std::size_t c = 0; c < dim; ++c) n += row[c] * row[c];
      n = std::sqrt(n);
      if (n > 1e-6) {
        for (std::size_t c = 0; c < dim; ++c) row[c] /= n;
        break;
      }
    }
  }
  // Round to binary32 so the bank survives a file round trip unchanged.
  for (double& v : rows) v = to_binary32(v);
  return rows;
}

std::vector<Rect> guillotine(std::size_t height, std::size_t width, std::size_t target,
                             RandomStream& rng) {
  std::vector<Rect> rects{{0, 0, height, width}};
  while (rects.size() < target) {
    std::size_t pick = rects.size();
    for (std::size_t i = 0; i < rects.size(); ++i) {
      if (std::max(rects[i].rows, rects[i].cols) < 4) continue;
      if (pick == rects.size() || rects[i].area() > rects[pick].area()) pick = i;
    }
    if (pick == rects.size()) break;
    const Rect r = rects[pick];
    bool split_rows = r.rows > r.cols;
    if (r.rows == r.cols) split_rows = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    const std::size_t len = split_rows ? r.rows : r.cols;
    const std::size_t cut = std::uniform_int_distribution<std::size_t>(2, len - 2)(rng);
    Rect a = r;
    Rect b = r;
    if (split_rows) {
      a.rows = cut;
      b.row0 += cut;
      b.rows -= cut;
    } else {
      a.cols = cut;
      b.col0 += cut;
      b.cols -= cut;
    }
    rects[pick] = a;
    rects.push_back(b);
  }
  return rects;
}

SyntheticImage gen_image(const WorldConfig& cfg, const EmbeddingBank& bank,
                         std::uint64_t image_seed) {
  RandomStream rng(image_seed);
  const std::size_t h = cfg.map_height;
  const std::size_t w = cfg.map_width;
  const std::size_t c = cfg.channels;
  const std::size_t n_thing = cfg.n_thing;

  std::vector<Rect> rects = guillotine(h, w, cfg.segments, rng);
  std::vector<std::size_t> by_area(rects.size());
  for (std::size_t i = 0; i < by_area.size(); ++i) by_area[i] = i;
  std::stable_sort(by_area.begin(), by_area.end(), [&](std::size_t a, std::size_t b) {
    return rects[a].area() > rects[b].area();
  });

  // Largest segments become stuff, the rest things drawn from co-occurrence.
  const std::size_t stuff_segments = std::min<std::size_t>(2, rects.size() - 1);
  std::vector<std::size_t> category(rects.size());
  std::uniform_int_distribution<std::size_t> pick_stuff(0, cfg.n_stuff - 1);
  std::vector<std::size_t> stuff_used;
  for (std::size_t s = 0; s < stuff_segments; ++s) {
    std::size_t stuff = pick_stuff(rng);
    if (cfg.n_stuff > 1) {
      while (std::find(stuff_used.begin(), stuff_used.end(), stuff) != stuff_used.end()) {
        stuff = pick_stuff(rng);
      }
    }
    stuff_used.push_back(stuff);
    category[by_area[s]] = n_thing + stuff;
  }
  auto cooc = [&](std::size_t stuff) {
    if (cfg.cooccurrence.empty()) return std::vector<std::size_t>{stuff % n_thing};
    return cfg.cooccurrence[stuff];
  };
  std::vector<std::size_t> pool;
  for (std::size_t stuff : stuff_used) {
    for (std::size_t t : cooc(stuff)) {
      if (std::find(pool.begin(), pool.end(), t) == pool.end()) pool.push_back(t);
    }
  }
  std::vector<std::size_t> things_used;
  for (std::size_t s = stuff_segments; s < rects.size(); ++s) {
    std::vector<std::size_t> fresh;
    for (std::size_t t : pool) {
      if (std::find(things_used.begin(), things_used.end(), t) == things_used.end()) {
        fresh.push_back(t);
      }
    }
    const auto& choices = fresh.empty() ? pool : fresh;
    const std::size_t thing =
        choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
    things_used.push_back(thing);
    category[by_area[s]] = thing;
  }

  SyntheticImage img;
  img.labels.assign(h * w, 0);
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const Rect& r = rects[i];
    for (std::size_t row = r.row0; row < r.row0 + r.rows; ++row) {
      for (std::size_t col = r.col0; col < r.col0 + r.cols; ++col) {
        img.labels[row * w + col] = category[i];
      }
    }
  }

  // Thing each stuff category leans toward in this image.
  std::vector<std::size_t> lean(cfg.n_stuff, things_used.front());
  for (std::size_t stuff : stuff_used) {
    for (std::size_t t : things_used) {
      const auto list = cooc(stuff);
      if (std::find(list.begin(), list.end(), t) != list.end()) {
        lean[stuff] = t;
        break;
      }
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> base(h * w * c);
  std::vector<double> teacher(h * w * c);
  std::vector<double> target(c);
  for (std::size_t loc = 0; loc < h * w; ++loc) {
    const std::size_t cat = img.labels[loc];
    const auto e = bank.embedding(cat);
    if (cat >= n_thing) {
      const auto t = bank.embedding(lean[cat - n_thing]);
      double n = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        target[k] = (1.0 - cfg.bias_beta) * e[k] + cfg.bias_beta * t[k];
        n += target[k] * target[k];
      }
      n = std::sqrt(n);
      for (double& v : target) v /= n;
    } else {
      std::copy(e.begin(), e.end(), target.begin());
    }
    for (std::size_t k = 0; k < c; ++k) {
      base[loc * c + k] = to_binary32(e[k] + cfg.noise_sigma * noise(rng));
    }
    for (std::size_t k = 0; k < c; ++k) {
      teacher[loc * c + k] = to_binary32(target[k] + cfg.noise_sigma * noise(rng));
    }
  }
  img.base = FeatureMap(h, w, c, std::move(base));
  img.teacher = FeatureMap(h, w, c, std::move(teacher));

  for (std::size_t i = 0; i < rects.size(); ++i) {
    const Rect& r = rects[i];
    EvalRecord box;
    box.kind = RecordKind::kBox;
    box.gt_category = category[i];
    box.box = {static_cast<double>(r.col0), static_cast<double>(r.row0),
               static_cast<double>(r.col0 + r.cols), static_cast<double>(r.row0 + r.rows)};
    img.records.push_back(box);

    EvalRecord mask;
    mask.kind = category[i] >= n_thing ? RecordKind::kMaskStuff : RecordKind::kMaskThing;
    mask.gt_category = category[i];
    for (std::size_t row = r.row0; row < r.row0 + r.rows; ++row) {
      for (std::size_t col = r.col0; col < r.col0 + r.cols; ++col) {
        mask.mask.push_back({static_cast<std::uint32_t>(row * w + col), 1.0});
      }
    }
    img.records.push_back(std::move(mask));
  }
  return img;
}

}  // namespace

SyntheticWorld gen_world(const WorldConfig& cfg) {
  validate(cfg);
  RandomStream rng(cfg.seed);
  const std::size_t d = cfg.n_thing + cfg.n_stuff;
  std::vector<std::string> names;
  std::vector<CategoryKind> kinds;
  for (std::size_t i = 0; i < cfg.n_thing; ++i) {
    names.push_back("thing_" + std::to_string(i));
    kinds.push_back(CategoryKind::kThing);
  }
  for (std::size_t i = 0; i < cfg.n_stuff; ++i) {
    names.push_back("stuff_" + std::to_string(i));
    kinds.push_back(CategoryKind::kStuff);
  }
  SyntheticWorld world{
      EmbeddingBank(std::move(names), std::move(kinds), cfg.channels,
                    orthonormal_rows(d, cfg.channels, rng)),
      {},
      {}};
  world.train.reserve(cfg.n_train);
  for (std::size_t i = 0; i < cfg.n_train; ++i) {
    world.train.push_back(gen_image(cfg, world.bank, rng()));
  }
  world.eval.reserve(cfg.n_eval);
  for (std::size_t i = 0; i < cfg.n_eval; ++i) {
    world.eval.push_back(gen_image(cfg, world.bank, rng()));
  }
  return world;
}

std::vector<TrainingImage> training_images(const std::vector<SyntheticImage>& images) {
  std::vector<TrainingImage> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back({img.base, img.teacher});
  return out;
}

std::vector<EvalRecord> collect_records(const std::vector<SyntheticImage>& images) {
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (EvalRecord r : images[i].records) {
      r.image = i;
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace regionalign

#include "regionalign/featmap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "regionalign/error.hpp"

namespace regionalign {

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t channels)
    : FeatureMap(height, width, channels,
                 std::vector<double>(height * width * channels, 0.0)) {}

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t channels,
                       std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (height_ == 0 || width_ == 0 || channels_ == 0) {
    throw Error(ErrorCode::kShape, "feature map dimensions must be positive");
  }
  if (data_.size() != height_ * width_ * channels_) {
    std::ostringstream msg;
    msg << "feature map data length " << data_.size() << " != " << height_ << "x"
        << width_ << "x" << channels_;
    throw Error(ErrorCode::kShape, msg.str());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw Error(ErrorCode::kNonFinite,
                  "feature map value " + std::to_string(i) + " is not finite");
    }
  }
}

std::span<const double> FeatureMap::at(std::size_t row, std::size_t col) const {
  return location(row * width_ + col);
}

std::span<double> FeatureMap::at(std::size_t row, std::size_t col) {
  return location(row * width_ + col);
}

std::span<const double> FeatureMap::location(std::size_t index) const {
  return std::span<const double>(data_).subspan(index * channels_, channels_);
}

std::span<double> FeatureMap::location(std::size_t index) {
  return std::span<double>(data_).subspan(index * channels_, channels_);
}

void validate_region(const RegionSpec& r, std::size_t height, std::size_t width) {
  const bool finite = std::isfinite(r.x0) && std::isfinite(r.y0) &&
                      std::isfinite(r.x1) && std::isfinite(r.y1);
  if (!finite || r.x0 < 0.0 || r.y0 < 0.0 || !(r.x0 < r.x1) || !(r.y0 < r.y1) ||
      r.x1 > static_cast<double>(width) || r.y1 > static_cast<double>(height)) {
    std::ostringstream msg;
    msg << "region (" << r.x0 << "," << r.y0 << "," << r.x1 << "," << r.y1
        << ") is degenerate or outside a " << height << "x" << width << " map";
    throw Error(ErrorCode::kInvalidRegion, msg.str());
  }
}

GridShape sample_grid(RandomStream& rng, int max_grid) {
  if (max_grid < 2) {
    throw Error(ErrorCode::kInvalidConfiguration,
                "max_grid must be >= 2, got " + std::to_string(max_grid));
  }
  std::uniform_int_distribution<int> pick(2, max_grid);
  GridShape grid;
  grid.rows = pick(rng);
  grid.cols = pick(rng);
  return grid;
}

std::vector<RegionSpec> partition_regions(std::size_t height, std::size_t width,
                                          const GridShape& grid) {
  if (height == 0 || width == 0 || grid.rows < 1 || grid.cols < 1) {
    throw Error(ErrorCode::kInvalidConfiguration, "invalid grid or map shape");
  }
  const auto h = static_cast<double>(height);
  const auto w = static_cast<double>(width);
  std::vector<RegionSpec> regions;
  regions.reserve(static_cast<std::size_t>(grid.rows) * grid.cols);
  for (int i = 0; i < grid.rows; ++i) {
    for (int j = 0; j < grid.cols; ++j) {
      regions.push_back({j * w / grid.cols, i * h / grid.rows, (j + 1) * w / grid.cols,
                         (i + 1) * h / grid.rows});
    }
  }
  return regions;
}

namespace {

PoolingWeights compact(const std::vector<double>& dense) {
  PoolingWeights out;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) {
      out.locations.push_back(i);
      out.weights.push_back(dense[i]);
    }
  }
  return out;
}

// Interpolation cell along one axis for a coordinate in map units.
struct AxisTap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

AxisTap axis_tap(double coord, std::size_t extent) {
  const double upper = static_cast<double>(extent - 1);
  const double u = std::clamp(coord - 0.5, 0.0, upper);
  const auto lo = static_cast<std::size_t>(std::floor(u));
  const std::size_t hi = std::min(lo + 1, extent - 1);
  return {lo, hi, u - static_cast<double>(lo)};
}

}  // namespace

PoolingWeights roi_align_weights(std::size_t height, std::size_t width,
                                 const RegionSpec& region, int samples_per_axis) {
  if (samples_per_axis < 1) {
    throw Error(ErrorCode::kInvalidConfiguration, "samples_per_axis must be >= 1");
  }
  validate_region(region, height, width);
  const auto s = static_cast<double>(samples_per_axis);
  const double step_x = (region.x1 - region.x0) / s;
  const double step_y = (region.y1 - region.y0) / s;
  const double point_weight = 1.0 / (s * s);

  std::vector<double> dense(height * width, 0.0);
  for (int iy = 0; iy < samples_per_axis; ++iy) {
    const AxisTap ty = axis_tap(region.y0 + (iy + 0.5) * step_y, height);
    for (int ix = 0; ix < samples_per_axis; ++ix) {
      const AxisTap tx = axis_tap(region.x0 + (ix + 0.5) * step_x, width);
      dense[ty.lo * width + tx.lo] += point_weight * (1.0 - ty.frac) * (1.0 - tx.frac);
      dense[ty.lo * width + tx.hi] += point_weight * (1.0 - ty.frac) * tx.frac;
      dense[ty.hi * width + tx.lo] += point_weight * ty.frac * (1.0 - tx.frac);
      dense[ty.hi * width + tx.hi] += point_weight * ty.frac * tx.frac;
    }
  }
  return compact(dense);
}

std::vector<double> apply_pooling(const FeatureMap& map, const PoolingWeights& weights) {
  std::vector<double> out(map.channels(), 0.0);
  for (std::size_t i = 0; i < weights.locations.size(); ++i) {
    const auto v = map.location(weights.locations[i]);
    const double w = weights.weights[i];
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * v[c];
  }
  return out;
}

void scatter_pooling(FeatureMap& grad, const PoolingWeights& weights,
                     std::span<const double> upstream) {
  if (upstream.size() != grad.channels()) {
    throw Error(ErrorCode::kShape, "upstream gradient length != channels");
  }
  for (std::size_t i = 0; i < weights.locations.size(); ++i) {
    auto g = grad.location(weights.locations[i]);
    const double w = weights.weights[i];
    for (std::size_t c = 0; c < g.size(); ++c) g[c] += w * upstream[c];
  }
}

std::vector<double> pool_region(const FeatureMap& map, const RegionSpec& region,
                                int samples_per_axis) {
  return apply_pooling(map, roi_align_weights(map.height(), map.width(), region,
                                              samples_per_axis));
}

PoolingWeights mask_weights(std::size_t height, std::size_t width,
                            std::span<const double> mask) {
  if (mask.size() != height * width) {
    throw Error(ErrorCode::kShape, "mask length " + std::to_string(mask.size()) +
                                       " != map locations " +
                                       std::to_string(height * width));
  }
  double total = 0.0;
  std::vector<double> dense(mask.size(), 0.0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double w = mask[i];
    if (!std::isfinite(w) || w < 0.0 || w > 1.0) {
      throw Error(ErrorCode::kInvalidRegion,
                  "mask weight at location " + std::to_string(i) + " outside [0,1]");
    }
    if (w >= kMaskWeightFloor) {
      dense[i] = w;
      total += w;
    }
  }
  if (total == 0.0) throw Error(ErrorCode::kEmptyMask, "mask has no positive coverage");
  for (double& w : dense) w /= total;
  return compact(dense);
}

std::vector<double> pool_mask(const FeatureMap& map, std::span<const double> mask) {
  return apply_pooling(map, mask_weights(map.height(), map.width(), mask));
}

}  // namespace regionalign

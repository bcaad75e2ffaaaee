#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace regionalign {

/// Dense per-location feature grid, row-major by location then channel.
/// Values are held in double precision; files store them as binary32.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels);
  /// Throws kShape if the data length disagrees with the dimensions and
  /// kNonFinite if any value is NaN or infinite.
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels,
             std::vector<double> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t locations() const noexcept { return height_ * width_; }

  std::span<const double> at(std::size_t row, std::size_t col) const;
  std::span<double> at(std::size_t row, std::size_t col);
  std::span<const double> location(std::size_t index) const;
  std::span<double> location(std::size_t index);

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

/// Axis-aligned rectangle in feature-map units (x along columns).
struct RegionSpec {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double area() const noexcept { return (x1 - x0) * (y1 - y0); }
  friend bool operator==(const RegionSpec&, const RegionSpec&) = default;
};

/// Throws kInvalidRegion unless 0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height.
void validate_region(const RegionSpec& region, std::size_t height, std::size_t width);

struct GridShape {
  int rows = 2;  // m
  int cols = 2;  // n
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

using RandomStream = std::mt19937_64;

/// Draws rows and cols independently and uniformly from {2, ..., max_grid}.
GridShape sample_grid(RandomStream& rng, int max_grid);

/// Row-major tiling of the map into grid.rows x grid.cols cells with
/// real-valued boundaries.
std::vector<RegionSpec> partition_regions(std::size_t height, std::size_t width,
                                          const GridShape& grid);

/// Sparse linear pooling operator: pooled = sum_i weight_i * map[location_i].
/// Locations are sorted and unique.
struct PoolingWeights {
  std::vector<std::size_t> locations;
  std::vector<double> weights;
};

inline constexpr int kDefaultSamplesPerAxis = 2;

/// RoIAlign weights for a 1x1 output bin: samples_per_axis^2 uniform points,
/// each bilinearly interpolated between location centers (c + 0.5, r + 0.5),
/// clamped at the borders; weights average over the points.
PoolingWeights roi_align_weights(std::size_t height, std::size_t width,
                                 const RegionSpec& region, int samples_per_axis);

std::vector<double> apply_pooling(const FeatureMap& map, const PoolingWeights& weights);

/// Transpose of apply_pooling: grad[location_i] += weight_i * upstream.
void scatter_pooling(FeatureMap& grad, const PoolingWeights& weights,
                     std::span<const double> upstream);

std::vector<double> pool_region(const FeatureMap& map, const RegionSpec& region,
                                int samples_per_axis = kDefaultSamplesPerAxis);

/// Coverage weights below this are treated as zero by pool_mask.
inline constexpr double kMaskWeightFloor = 1e-6;

/// Coverage-weighted mean over locations. `mask` holds one weight in [0, 1]
/// per location. Throws kEmptyMask when no weight reaches kMaskWeightFloor.
PoolingWeights mask_weights(std::size_t height, std::size_t width,
                            std::span<const double> mask);
std::vector<double> pool_mask(const FeatureMap& map, std::span<const double> mask);

}  // namespace regionalign

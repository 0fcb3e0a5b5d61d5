#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pbnn/pendulum.hpp"

namespace pbnn {

inline const std::vector<std::size_t> kDefaultLags = {20, 21, 22, 23, 24};

/// Ordered (x, y) regression pairs, stored row-major in two flat arrays.
class SupervisedDataset {
 public:
  SupervisedDataset() = default;
  SupervisedDataset(std::size_t x_dim, std::size_t y_dim);

  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  std::size_t x_dim() const { return x_dim_; }
  std::size_t y_dim() const { return y_dim_; }

  std::span<const double> x(std::size_t i) const {
    return {xs_.data() + i * x_dim_, x_dim_};
  }
  std::span<const double> y(std::size_t i) const {
    return {ys_.data() + i * y_dim_, y_dim_};
  }
  /// Trajectory index of the target y_i.
  std::size_t time(std::size_t i) const { return times_[i]; }

  void push_back(std::span<const double> x, std::span<const double> y, std::size_t t);

  /// Items [first, first + count).
  SupervisedDataset slice(std::size_t first, std::size_t count) const;
  /// Items at the given indices, in the given order; repeats allowed.
  SupervisedDataset subset(std::span<const std::size_t> indices) const;

  std::vector<double>& raw_x() { return xs_; }
  std::vector<double>& raw_y() { return ys_; }

  friend bool operator==(const SupervisedDataset&, const SupervisedDataset&) = default;

 private:
  std::size_t x_dim_ = 0;
  std::size_t y_dim_ = 0;
  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<std::size_t> times_;
};

/// Item at time t is (concat(y_{t-lag} for lag in lags), y_t) for every t >= max(lags).
SupervisedDataset build_dataset(std::span<const Observation> trajectory,
                                std::span<const std::size_t> lags = kDefaultLags);

/// First n_train items and the remainder, order preserved.
std::pair<SupervisedDataset, SupervisedDataset> split_sequential(const SupervisedDataset& ds,
                                                                 std::size_t n_train);

/// Per-coordinate affine map y -> (y - mean) / scale, fit on training targets.
struct Standardization {
  std::array<double, 4> mean{0.0, 0.0, 0.0, 0.0};
  std::array<double, 4> scale{1.0, 1.0, 1.0, 1.0};

  bool identity() const;
  Observation apply(const Observation& y) const;
};

/// Fits mean and standard deviation on observations [first, first + count).
Standardization fit_standardization(std::span<const Observation> trajectory,
                                    std::size_t first, std::size_t count);

/// Everything needed to regenerate a trajectory file bit-for-bit.
struct DataSpec {
  PendulumParams params;
  PendulumState initial{2.0, 2.5, 0.0, 0.0};
  std::vector<std::size_t> lags = kDefaultLags;
  std::size_t n_train = 2992;
  bool standardize = false;
  std::uint64_t seed = 0;
};

struct TrajectoryFile {
  DataSpec spec;
  Standardization standardization;
  std::vector<Observation> observations;  ///< already standardized if enabled
};

/// Simulates, optionally standardizes on the training window, and returns the result.
TrajectoryFile generate_trajectory(const DataSpec& spec);

/// Writes `<path>` (CSV `t,y1,y2,y3,y4`) and `<path>.json` (sidecar).
void write_trajectory(const std::filesystem::path& path, const TrajectoryFile& file);
TrajectoryFile read_trajectory(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& csv);

}  // namespace pbnn

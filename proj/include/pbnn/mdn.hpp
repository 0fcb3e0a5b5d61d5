#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pbnn/dataset.hpp"
#include "pbnn/rng.hpp"

namespace pbnn {

/// Fully connected tanh network with a heteroscedastic Gaussian head of
/// width 2 * output_dim: the first half is the mean, the second half the raw
/// variance pre-activation.
struct MdnArchitecture {
  std::size_t input_dim = 20;
  std::vector<std::size_t> hidden{10, 10};
  std::size_t output_dim = 4;

  void validate() const;
  /// Sum over layers of (in + 1) * out.
  std::size_t param_count() const;

  friend bool operator==(const MdnArchitecture&, const MdnArchitecture&) = default;
};

nlohmann::json to_json(const MdnArchitecture& arch);
MdnArchitecture architecture_from_json(const nlohmann::json& j);

/// Flat weights and biases. Immutable once built; samplers create new vectors.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vector() const { return values_; }
  bool finite() const;
  double squared_norm() const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

struct MdnOutput {
  std::vector<double> mean;
  std::vector<double> variance;
};

// Bounds of the positive variance map softplus(clamp(raw)) + kVarianceMin.
inline constexpr double kVarianceMin = 1e-6;
inline constexpr double kVarianceMax = 1e6;
inline constexpr double kRawVarianceLow = -30.0;
inline constexpr double kRawVarianceHigh = kVarianceMax - 1.0;

double softplus(double x);
/// softplus(clamp(raw)) + kVarianceMin, always strictly inside (kVarianceMin, kVarianceMax).
double positive_variance(double raw);

class MdnModel {
 public:
  explicit MdnModel(MdnArchitecture arch = {});

  const MdnArchitecture& architecture() const { return arch_; }
  std::size_t param_count() const { return n_params_; }

  /// Weights ~ N(0, scale^2 / fan_in), biases zero except the raw variance
  /// biases, which start at softplus^-1(1) so the initial variance is ~1.
  ParamVector init_params(Rng& rng, double scale = 1.0) const;

  MdnOutput forward(const ParamVector& theta, std::span<const double> x) const;

  /// sum_d -0.5 log(2 pi var_d) - (y_d - mean_d)^2 / (2 var_d)
  double log_likelihood(const ParamVector& theta, std::span<const double> x,
                        std::span<const double> y) const;

  /// out[k] = log p(y_i | x_i, theta) for i = indices[k].
  void log_likelihoods(const ParamVector& theta, const SupervisedDataset& ds,
                       std::span<const std::size_t> indices, std::span<double> out) const;

  /// Sum of per-item log-likelihoods in dataset order.
  double sum_log_likelihood(const ParamVector& theta, const SupervisedDataset& ds) const;

  /// Gradient of -sum_i log p(y_i | x_i, theta), accumulated in dataset order.
  std::vector<double> grad_neg_log_likelihood(const ParamVector& theta,
                                              const SupervisedDataset& batch) const;

  /// Same, restricted to the listed items (repeats count twice).
  std::vector<double> grad_neg_log_likelihood(const ParamVector& theta,
                                              const SupervisedDataset& ds,
                                              std::span<const std::size_t> indices) const;

 private:
  struct Layer {
    std::size_t in;
    std::size_t out;
    std::size_t offset;  // weights [out][in] at offset, biases after
  };

  void check(const ParamVector& theta, std::span<const double> x) const;
  // Runs the network, leaving every layer's activations in `acts`.
  void run(std::span<const double> theta, std::span<const double> x,
           std::vector<std::vector<double>>& acts) const;
  double item_log_likelihood(std::span<const double> theta, std::span<const double> x,
                             std::span<const double> y,
                             std::vector<std::vector<double>>& acts) const;
  void accumulate_grad(std::span<const double> theta, std::span<const double> x,
                       std::span<const double> y, std::vector<std::vector<double>>& acts,
                       std::vector<double>& delta, std::vector<double>& delta_prev,
                       std::vector<double>& grad) const;

  MdnArchitecture arch_;
  std::vector<Layer> layers_;
  std::size_t n_params_ = 0;
};

/// Single-row binary block (JSON header line, float64 LE payload).
void write_params(const std::filesystem::path& path, const MdnArchitecture& arch,
                  const ParamVector& theta);
ParamVector read_params(const std::filesystem::path& path, const MdnArchitecture& expected);

}  // namespace pbnn

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pbnn/dataset.hpp"
#include "pbnn/mdn.hpp"
#include "pbnn/rng.hpp"

namespace pbnn {

/// Gaussian prior p(theta) proportional to exp(-lambda ||theta||^2).
struct PriorSpec {
  double lambda = 1e-5;
  void validate() const;
};

/// -lambda ||theta||^2; the normalizing constant is dropped.
double log_prior(const ParamVector& theta, const PriorSpec& prior);

/// -log p(theta) - sum_i log p(y_i | x_i, theta)
double batch_loss(const MdnModel& model, const ParamVector& theta, const SupervisedDataset& data,
                  const PriorSpec& prior);

/// -log p(theta) - (target_n / |data|) sum_i log p(y_i | x_i, theta)
double weighted_loss(const MdnModel& model, const ParamVector& theta,
                     const SupervisedDataset& data, const PriorSpec& prior,
                     std::size_t target_n);

/// Gradient of weighted_loss with respect to theta, over data[indices].
std::vector<double> weighted_loss_gradient(const MdnModel& model, const ParamVector& theta,
                                           const SupervisedDataset& data,
                                           std::span<const std::size_t> indices,
                                           const PriorSpec& prior, std::size_t target_n);

enum class BatchMode { kWithReplacement, kPartition };

std::string to_string(BatchMode mode);
BatchMode batch_mode_from_string(const std::string& s);

struct MiniBatchPlan {
  std::size_t batch_size = 60;   // N
  std::size_t num_batches = 100;  // M
  BatchMode mode = BatchMode::kWithReplacement;

  /// Throws ArgumentError if the plan cannot be drawn from `train_size` items.
  void validate(std::size_t train_size) const;
};

using IndexBatch = std::vector<std::size_t>;

/// M batches of N indices into a training set of `train_size` items.
///
/// With replacement, every index is an independent uniform draw, so items
/// repeat within and across batches; this shrinks the observed spread of the
/// per-batch losses relative to fresh data. Partition mode shuffles once and
/// slices M disjoint blocks.
std::vector<IndexBatch> draw_batch_indices(std::size_t train_size, const MiniBatchPlan& plan,
                                           Rng& rng);

std::vector<SupervisedDataset> draw_minibatches(const SupervisedDataset& train,
                                                const MiniBatchPlan& plan, Rng& rng);

struct LossDiffEstimate {
  double delta = 0.0;  ///< mean per-batch loss difference
  double chi2 = 0.0;   ///< unbiased variance estimate of delta
  std::size_t num_batches = 0;
  std::vector<double> per_batch_diffs;
};

/// delta = mean(d), chi2 = sum (d_j - delta)^2 / (M (M - 1)). Needs M >= 2.
LossDiffEstimate estimate_from_differences(std::vector<double> diffs);

/// Per-batch loss uses likelihood weight target_n / |batch|; the prior enters
/// every batch loss once and cancels in the spread of the differences.
LossDiffEstimate loss_diff_estimate(const MdnModel& model, const ParamVector& proposed,
                                    const ParamVector& current,
                                    std::span<const SupervisedDataset> batches,
                                    const PriorSpec& prior, std::size_t target_n);

/// Per-item log-likelihoods of one parameter vector over a fixed dataset,
/// computed lazily and kept until `reset`.
class ItemLogLikCache {
 public:
  ItemLogLikCache() = default;
  explicit ItemLogLikCache(std::size_t n) : values_(n, 0.0), stamp_(n, 0) {}

  void reset() { ++generation_; }
  /// Makes values for all `indices` available under `theta`.
  void ensure(const MdnModel& model, const ParamVector& theta, const SupervisedDataset& data,
              std::span<const std::size_t> indices);
  double operator[](std::size_t i) const { return values_[i]; }
  void swap(ItemLogLikCache& other) noexcept;

 private:
  std::vector<double> values_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t generation_ = 1;
  std::vector<std::size_t> missing_;
  std::vector<double> scratch_;
};

/// Same estimate as above, with batches given as indices into `train`.
/// `proposed_ll` and `current_ll` must hold the batch items (see ensure()).
LossDiffEstimate loss_diff_from_cache(const ItemLogLikCache& proposed_ll,
                                      const ItemLogLikCache& current_ll,
                                      std::span<const IndexBatch> batches,
                                      double log_prior_proposed, double log_prior_current,
                                      std::size_t target_n);

LossDiffEstimate loss_diff_estimate(const MdnModel& model, const ParamVector& proposed,
                                    const ParamVector& current, const SupervisedDataset& train,
                                    std::span<const IndexBatch> batches, const PriorSpec& prior,
                                    std::size_t target_n);

}  // namespace pbnn

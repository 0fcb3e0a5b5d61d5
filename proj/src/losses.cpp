#include "pbnn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pbnn/errors.hpp"

namespace pbnn {

void PriorSpec::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ArgumentError("prior lambda must be > 0");
}

double log_prior(const ParamVector& theta, const PriorSpec& prior) {
  return -prior.lambda * theta.squared_norm();
}

double batch_loss(const MdnModel& model, const ParamVector& theta, const SupervisedDataset& data,
                  const PriorSpec& prior) {
  if (data.empty()) throw ArgumentError("loss requested on an empty dataset");
  return -log_prior(theta, prior) - model.sum_log_likelihood(theta, data);
}

namespace {

double likelihood_weight(std::size_t target_n, std::size_t n) {
  if (target_n == 0) throw ArgumentError("target_N must be >= 1");
  if (n == 0) throw ArgumentError("loss requested on an empty dataset");
  return target_n == n ? 1.0 : static_cast<double>(target_n) / static_cast<double>(n);
}

}  // namespace

double weighted_loss(const MdnModel& model, const ParamVector& theta,
                     const SupervisedDataset& data, const PriorSpec& prior,
                     std::size_t target_n) {
  const double w = likelihood_weight(target_n, data.size());
  return -log_prior(theta, prior) - w * model.sum_log_likelihood(theta, data);
}

std::vector<double> weighted_loss_gradient(const MdnModel& model, const ParamVector& theta,
                                           const SupervisedDataset& data,
                                           std::span<const std::size_t> indices,
                                           const PriorSpec& prior, std::size_t target_n) {
  const double w = likelihood_weight(target_n, indices.size());
  std::vector<double> g = model.grad_neg_log_likelihood(theta, data, indices);
  for (std::size_t k = 0; k < g.size(); ++k) {
    g[k] = w * g[k] + 2.0 * prior.lambda * theta[k];
  }
  return g;
}

std::string to_string(BatchMode mode) {
  return mode == BatchMode::kWithReplacement ? "with-replacement" : "partition";
}

BatchMode batch_mode_from_string(const std::string& s) {
  if (s == "with-replacement") return BatchMode::kWithReplacement;
  if (s == "partition") return BatchMode::kPartition;
  throw ConfigError("unknown batch mode '" + s + "'");
}

void MiniBatchPlan::validate(std::size_t train_size) const {
  if (batch_size < 1) throw ArgumentError("batch size N must be >= 1");
  if (num_batches < 2) throw ArgumentError("number of batches M must be >= 2");
  if (train_size == 0) throw ArgumentError("training set is empty");
  if (mode == BatchMode::kPartition && batch_size * num_batches > train_size) {
    throw ArgumentError("partition mode needs M*N <= train size (" +
                        std::to_string(batch_size * num_batches) + " > " +
                        std::to_string(train_size) + ")");
  }
}

std::vector<IndexBatch> draw_batch_indices(std::size_t train_size, const MiniBatchPlan& plan,
                                           Rng& rng) {
  plan.validate(train_size);
  std::vector<IndexBatch> batches(plan.num_batches, IndexBatch(plan.batch_size));
  if (plan.mode == BatchMode::kWithReplacement) {
    std::uniform_int_distribution<std::size_t> pick(0, train_size - 1);
    for (IndexBatch& b : batches) {
      for (std::size_t& i : b) i = pick(rng);
    }
    return batches;
  }
  std::vector<std::size_t> perm(train_size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t j = 0; j < plan.num_batches; ++j) {
    std::copy_n(perm.begin() + static_cast<std::ptrdiff_t>(j * plan.batch_size),
                plan.batch_size, batches[j].begin());
  }
  return batches;
}

std::vector<SupervisedDataset> draw_minibatches(const SupervisedDataset& train,
                                                const MiniBatchPlan& plan, Rng& rng) {
  std::vector<SupervisedDataset> out;
  for (const IndexBatch& b : draw_batch_indices(train.size(), plan, rng)) {
    out.push_back(train.subset(b));
  }
  return out;
}

LossDiffEstimate estimate_from_differences(std::vector<double> diffs) {
  const std::size_t m = diffs.size();
  if (m < 2) throw VarianceUndefinedError("chi-squared needs at least two batches");
  // Shift by the first difference: identical inputs give exactly zero spread.
  const double ref = diffs[0];
  double shifted_sum = 0.0;
  for (double d : diffs) shifted_sum += d - ref;
  const double shifted_mean = shifted_sum / static_cast<double>(m);
  double ss = 0.0;
  for (double d : diffs) {
    const double r = (d - ref) - shifted_mean;
    ss += r * r;
  }
  LossDiffEstimate est;
  est.delta = ref + shifted_mean;
  est.chi2 = ss / (static_cast<double>(m) * static_cast<double>(m - 1));
  est.num_batches = m;
  est.per_batch_diffs = std::move(diffs);
  return est;
}

LossDiffEstimate loss_diff_estimate(const MdnModel& model, const ParamVector& proposed,
                                    const ParamVector& current,
                                    std::span<const SupervisedDataset> batches,
                                    const PriorSpec& prior, std::size_t target_n) {
  if (batches.size() < 2) throw VarianceUndefinedError("chi-squared needs at least two batches");
  std::vector<double> diffs;
  diffs.reserve(batches.size());
  for (const SupervisedDataset& b : batches) {
    diffs.push_back(weighted_loss(model, proposed, b, prior, target_n) -
                    weighted_loss(model, current, b, prior, target_n));
  }
  return estimate_from_differences(std::move(diffs));
}

void ItemLogLikCache::ensure(const MdnModel& model, const ParamVector& theta,
                             const SupervisedDataset& data,
                             std::span<const std::size_t> indices) {
  if (values_.size() != data.size()) {
    values_.assign(data.size(), 0.0);
    stamp_.assign(data.size(), 0);
    generation_ = 1;
  }
  missing_.clear();
  for (std::size_t i : indices) {
    if (stamp_[i] != generation_) {
      stamp_[i] = generation_;
      missing_.push_back(i);
    }
  }
  if (missing_.empty()) return;
  scratch_.resize(missing_.size());
  model.log_likelihoods(theta, data, missing_, scratch_);
  for (std::size_t k = 0; k < missing_.size(); ++k) values_[missing_[k]] = scratch_[k];
}

void ItemLogLikCache::swap(ItemLogLikCache& other) noexcept {
  values_.swap(other.values_);
  stamp_.swap(other.stamp_);
  std::swap(generation_, other.generation_);
}

LossDiffEstimate loss_diff_from_cache(const ItemLogLikCache& proposed_ll,
                                      const ItemLogLikCache& current_ll,
                                      std::span<const IndexBatch> batches,
                                      double log_prior_proposed, double log_prior_current,
                                      std::size_t target_n) {
  if (batches.size() < 2) throw VarianceUndefinedError("chi-squared needs at least two batches");
  std::vector<double> diffs;
  diffs.reserve(batches.size());
  for (const IndexBatch& b : batches) {
    const double w = likelihood_weight(target_n, b.size());
    double ll_new = 0.0;
    double ll_old = 0.0;
    for (std::size_t i : b) {
      ll_new += proposed_ll[i];
      ll_old += current_ll[i];
    }
    diffs.push_back((-log_prior_proposed - w * ll_new) - (-log_prior_current - w * ll_old));
  }
  return estimate_from_differences(std::move(diffs));
}

LossDiffEstimate loss_diff_estimate(const MdnModel& model, const ParamVector& proposed,
                                    const ParamVector& current, const SupervisedDataset& train,
                                    std::span<const IndexBatch> batches, const PriorSpec& prior,
                                    std::size_t target_n) {
  ItemLogLikCache new_ll(train.size());
  ItemLogLikCache old_ll(train.size());
  for (const IndexBatch& b : batches) {
    new_ll.ensure(model, proposed, train, b);
    old_ll.ensure(model, current, train, b);
  }
  return loss_diff_from_cache(new_ll, old_ll, batches, log_prior(proposed, prior),
                              log_prior(current, prior), target_n);
}

}  // namespace pbnn

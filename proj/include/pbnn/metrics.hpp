#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pbnn/dataset.hpp"
#include "pbnn/mdn.hpp"

namespace pbnn {

/// Target one-sigma coverage of a Gaussian, as the 68.2% used for ACE.
inline constexpr double kOneSigmaCoverage = 0.682;

/// Mean and standard deviation of a uniform mixture of diagonal Gaussians.
struct PredictiveMoments {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Combines per-sample heads by the law of total variance.
PredictiveMoments mixture_moments(std::span<const MdnOutput> components);

PredictiveMoments predictive_moments(const MdnModel& model, std::span<const ParamVector> samples,
                                     std::span<const double> x);

/// -(1/L) sum_i log((1/J) sum_j p(y_i | x_i, theta_j)), with the inner mean
/// evaluated by a max-shifted log-sum-exp.
double avg_nll(const MdnModel& model, std::span<const ParamVector> samples,
               const SupervisedDataset& data);

/// log((1/J) sum_j exp(v_j)) without overflow.
double log_mean_exp(std::span<const double> values);

struct Coverage {
  double coverage = 0.0;  ///< fraction of (item, dim) pairs inside mean +- stddev
  double ace = 0.0;       ///< |0.682 - coverage|
};

/// Counts y_d in [mean_d - stddev_d, mean_d + stddev_d].
Coverage coverage_from_moments(std::span<const PredictiveMoments> moments,
                               const SupervisedDataset& data);

Coverage coverage_and_ace(const MdnModel& model, std::span<const ParamVector> samples,
                          const SupervisedDataset& data);

struct EvalReport {
  std::string sampler;
  std::size_t batch_size = 0;
  std::size_t num_batches = 0;
  std::string split;  ///< "train" or "test"
  double avg_nll = 0.0;
  double coverage = 0.0;
  double ace = 0.0;
  double acceptance_rate = 0.0;
  std::size_t num_samples = 0;
  std::uint64_t seed = 0;
};

/// One pass over the data computing avg_nll, coverage and ACE together.
EvalReport evaluate(const MdnModel& model, std::span<const ParamVector> samples,
                    const SupervisedDataset& data);

inline constexpr const char* kEvalReportHeader =
    "sampler,N,M,split,avg_nll,coverage,ace,acceptance_rate,J,seed,config_hash";

std::string eval_report_row(const EvalReport& r, const std::string& config_hash);

}  // namespace pbnn

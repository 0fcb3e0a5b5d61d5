#include "pbnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pbnn/errors.hpp"
#include "pbnn/io.hpp"

namespace pbnn {

PredictiveMoments mixture_moments(std::span<const MdnOutput> components) {
  if (components.empty()) throw ArgumentError("predictive needs at least one sample");
  const std::size_t dims = components.front().mean.size();
  const double inv_j = 1.0 / static_cast<double>(components.size());
  PredictiveMoments m;
  m.mean.assign(dims, 0.0);
  m.stddev.assign(dims, 0.0);
  for (const MdnOutput& c : components) {
    for (std::size_t d = 0; d < dims; ++d) m.mean[d] += c.mean[d];
  }
  for (double& v : m.mean) v *= inv_j;
  // within-component plus between-component variance, two-pass
  for (std::size_t d = 0; d < dims; ++d) {
    double within = 0.0;
    double between = 0.0;
    for (const MdnOutput& c : components) {
      within += c.variance[d];
      const double r = c.mean[d] - m.mean[d];
      between += r * r;
    }
    m.stddev[d] = std::sqrt((within + between) * inv_j);
  }
  return m;
}

PredictiveMoments predictive_moments(const MdnModel& model, std::span<const ParamVector> samples,
                                     std::span<const double> x) {
  std::vector<MdnOutput> heads;
  heads.reserve(samples.size());
  for (const ParamVector& theta : samples) heads.push_back(model.forward(theta, x));
  return mixture_moments(heads);
}

double log_mean_exp(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("log_mean_exp of an empty range");
  const double peak = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(peak)) return peak;
  double s = 0.0;
  for (double v : values) s += std::exp(v - peak);
  return peak + std::log(s / static_cast<double>(values.size()));
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double head_log_likelihood(const MdnOutput& head, std::span<const double> y) {
  double ll = 0.0;
  for (std::size_t d = 0; d < y.size(); ++d) {
    const double r = y[d] - head.mean[d];
    ll += -0.5 * (kLog2Pi + std::log(head.variance[d])) - r * r / (2.0 * head.variance[d]);
  }
  return ll;
}

void check_inputs(std::span<const ParamVector> samples, const SupervisedDataset& data) {
  if (samples.empty()) throw ArgumentError("evaluation needs at least one sample (J >= 1)");
  if (data.empty()) throw ArgumentError("evaluation needs at least one item (L >= 1)");
}

}  // namespace

EvalReport evaluate(const MdnModel& model, std::span<const ParamVector> samples,
                    const SupervisedDataset& data) {
  check_inputs(samples, data);
  std::vector<MdnOutput> heads(samples.size());
  std::vector<double> lls(samples.size());
  double nll_sum = 0.0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.x(i);
    const auto y = data.y(i);
    for (std::size_t j = 0; j < samples.size(); ++j) {
      heads[j] = model.forward(samples[j], x);
      lls[j] = head_log_likelihood(heads[j], y);
    }
    nll_sum -= log_mean_exp(lls);
    const PredictiveMoments m = mixture_moments(heads);
    for (std::size_t d = 0; d < y.size(); ++d) {
      if (y[d] >= m.mean[d] - m.stddev[d] && y[d] <= m.mean[d] + m.stddev[d]) ++covered;
    }
  }
  EvalReport r;
  r.avg_nll = nll_sum / static_cast<double>(data.size());
  r.coverage = static_cast<double>(covered) / static_cast<double>(data.size() * data.y_dim());
  r.ace = std::abs(kOneSigmaCoverage - r.coverage);
  r.num_samples = samples.size();
  return r;
}

double avg_nll(const MdnModel& model, std::span<const ParamVector> samples,
               const SupervisedDataset& data) {
  check_inputs(samples, data);
  std::vector<double> lls(samples.size());
  double nll_sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < samples.size(); ++j) {
      lls[j] = model.log_likelihood(samples[j], data.x(i), data.y(i));
    }
    nll_sum -= log_mean_exp(lls);
  }
  return nll_sum / static_cast<double>(data.size());
}

Coverage coverage_from_moments(std::span<const PredictiveMoments> moments,
                               const SupervisedDataset& data) {
  if (moments.size() != data.size()) throw ArgumentError("one moment set per item required");
  if (data.empty()) throw ArgumentError("coverage of an empty dataset");
  std::size_t covered = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto y = data.y(i);
    for (std::size_t d = 0; d < y.size(); ++d) {
      const double lo = moments[i].mean[d] - moments[i].stddev[d];
      const double hi = moments[i].mean[d] + moments[i].stddev[d];
      if (y[d] >= lo && y[d] <= hi) ++covered;
    }
  }
  Coverage c;
  c.coverage = static_cast<double>(covered) / static_cast<double>(data.size() * data.y_dim());
  c.ace = std::abs(kOneSigmaCoverage - c.coverage);
  return c;
}

Coverage coverage_and_ace(const MdnModel& model, std::span<const ParamVector> samples,
                          const SupervisedDataset& data) {
  check_inputs(samples, data);
  std::vector<PredictiveMoments> moments;
  moments.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    moments.push_back(predictive_moments(model, samples, data.x(i)));
  }
  return coverage_from_moments(moments, data);
}

std::string eval_report_row(const EvalReport& r, const std::string& config_hash) {
  std::string row = r.sampler;
  row += ',' + std::to_string(r.batch_size);
  row += ',' + std::to_string(r.num_batches);
  row += ',' + r.split;
  row += ',' + format_double(r.avg_nll);
  row += ',' + format_double(r.coverage);
  row += ',' + format_double(r.ace);
  row += ',' + format_double(r.acceptance_rate);
  row += ',' + std::to_string(r.num_samples);
  row += ',' + std::to_string(r.seed);
  row += ',' + config_hash;
  return row;
}

}  // namespace pbnn

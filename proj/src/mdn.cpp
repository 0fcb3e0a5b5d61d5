#include "pbnn/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>

#include "pbnn/errors.hpp"
#include "pbnn/io.hpp"

namespace pbnn {

using nlohmann::json;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

}  // namespace

void MdnArchitecture::validate() const {
  if (input_dim == 0 || output_dim == 0) throw ArgumentError("layer widths must be positive");
  for (std::size_t h : hidden) {
    if (h == 0) throw ArgumentError("hidden layer widths must be positive");
  }
}

std::size_t MdnArchitecture::param_count() const {
  std::size_t n = 0;
  std::size_t in = input_dim;
  for (std::size_t h : hidden) {
    n += (in + 1) * h;
    in = h;
  }
  return n + (in + 1) * 2 * output_dim;
}

json to_json(const MdnArchitecture& arch) {
  return json{{"input_dim", arch.input_dim},
              {"hidden", arch.hidden},
              {"output_dim", arch.output_dim},
              {"activation", "tanh"}};
}

MdnArchitecture architecture_from_json(const json& j) {
  MdnArchitecture a;
  a.input_dim = j.at("input_dim");
  a.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  a.output_dim = j.at("output_dim");
  if (j.contains("activation") && j.at("activation") != "tanh") {
    throw ConfigError("only tanh activations are supported");
  }
  a.validate();
  return a;
}

bool ParamVector::finite() const { return all_finite(values_); }

double ParamVector::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double positive_variance(double raw) {
  return softplus(std::clamp(raw, kRawVarianceLow, kRawVarianceHigh)) + kVarianceMin;
}

MdnModel::MdnModel(MdnArchitecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  std::size_t in = arch_.input_dim;
  std::size_t offset = 0;
  auto add = [&](std::size_t out) {
    layers_.push_back({in, out, offset});
    offset += (in + 1) * out;
    in = out;
  };
  for (std::size_t h : arch_.hidden) add(h);
  add(2 * arch_.output_dim);
  n_params_ = offset;
}

ParamVector MdnModel::init_params(Rng& rng, double scale) const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ArgumentError("init scale must be > 0");
  std::vector<double> theta(n_params_, 0.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const Layer& layer : layers_) {
    const double sd = scale / std::sqrt(static_cast<double>(layer.in));
    for (std::size_t k = 0; k < layer.in * layer.out; ++k) {
      theta[layer.offset + k] = sd * normal(rng);
    }
  }
  const Layer& head = layers_.back();
  const double unit_variance_bias = std::log(std::expm1(1.0 - kVarianceMin));
  for (std::size_t d = 0; d < arch_.output_dim; ++d) {
    theta[head.offset + head.in * head.out + arch_.output_dim + d] = unit_variance_bias;
  }
  return ParamVector(std::move(theta));
}

void MdnModel::check(const ParamVector& theta, std::span<const double> x) const {
  if (theta.size() != n_params_) throw ArgumentError("parameter vector has the wrong length");
  if (x.size() != arch_.input_dim) throw ArgumentError("input has the wrong dimension");
  if (!all_finite(x)) throw ArgumentError("input contains non-finite values");
}

void MdnModel::run(std::span<const double> theta, std::span<const double> x,
                   std::vector<std::vector<double>>& acts) const {
  acts.resize(layers_.size() + 1);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const double* w = theta.data() + layer.offset;
    const double* b = w + layer.in * layer.out;
    const std::vector<double>& a = acts[l];
    std::vector<double>& z = acts[l + 1];
    z.resize(layer.out);
    const bool hidden = l + 1 < layers_.size();
    for (std::size_t o = 0; o < layer.out; ++o) {
      double s = b[o];
      const double* row = w + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) s += row[i] * a[i];
      z[o] = hidden ? std::tanh(s) : s;
    }
  }
}

MdnOutput MdnModel::forward(const ParamVector& theta, std::span<const double> x) const {
  check(theta, x);
  std::vector<std::vector<double>> acts;
  run(theta.values(), x, acts);
  const std::vector<double>& head = acts.back();
  const std::size_t k = arch_.output_dim;
  MdnOutput out;
  out.mean.assign(head.begin(), head.begin() + static_cast<std::ptrdiff_t>(k));
  out.variance.resize(k);
  for (std::size_t d = 0; d < k; ++d) out.variance[d] = positive_variance(head[k + d]);
  return out;
}

double MdnModel::item_log_likelihood(std::span<const double> theta, std::span<const double> x,
                                     std::span<const double> y,
                                     std::vector<std::vector<double>>& acts) const {
  run(theta, x, acts);
  const std::vector<double>& head = acts.back();
  const std::size_t k = arch_.output_dim;
  double ll = 0.0;
  for (std::size_t d = 0; d < k; ++d) {
    const double var = positive_variance(head[k + d]);
    const double r = y[d] - head[d];
    ll += -0.5 * (kLog2Pi + std::log(var)) - r * r / (2.0 * var);
  }
  return ll;
}

double MdnModel::log_likelihood(const ParamVector& theta, std::span<const double> x,
                                std::span<const double> y) const {
  check(theta, x);
  if (y.size() != arch_.output_dim) throw ArgumentError("target has the wrong dimension");
  std::vector<std::vector<double>> acts;
  return item_log_likelihood(theta.values(), x, y, acts);
}

void MdnModel::log_likelihoods(const ParamVector& theta, const SupervisedDataset& ds,
                               std::span<const std::size_t> indices,
                               std::span<double> out) const {
  if (theta.size() != n_params_) throw ArgumentError("parameter vector has the wrong length");
  if (ds.x_dim() != arch_.input_dim || ds.y_dim() != arch_.output_dim) {
    throw ArgumentError("dataset dimensions do not match the architecture");
  }
  if (out.size() != indices.size()) throw ArgumentError("output span has the wrong length");
  std::vector<std::vector<double>> acts;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    out[k] = item_log_likelihood(theta.values(), ds.x(i), ds.y(i), acts);
  }
}

double MdnModel::sum_log_likelihood(const ParamVector& theta, const SupervisedDataset& ds) const {
  if (theta.size() != n_params_) throw ArgumentError("parameter vector has the wrong length");
  if (ds.x_dim() != arch_.input_dim || ds.y_dim() != arch_.output_dim) {
    throw ArgumentError("dataset dimensions do not match the architecture");
  }
  std::vector<std::vector<double>> acts;
  double s = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    s += item_log_likelihood(theta.values(), ds.x(i), ds.y(i), acts);
  }
  return s;
}

void MdnModel::accumulate_grad(std::span<const double> theta, std::span<const double> x,
                               std::span<const double> y,
                               std::vector<std::vector<double>>& acts,
                               std::vector<double>& delta, std::vector<double>& delta_prev,
                               std::vector<double>& grad) const {
  run(theta, x, acts);
  const std::size_t k = arch_.output_dim;
  const std::vector<double>& head = acts.back();

  // d(nll)/d(head pre-activation)
  delta.assign(2 * k, 0.0);
  for (std::size_t d = 0; d < k; ++d) {
    const double raw = head[k + d];
    const double var = positive_variance(raw);
    const double r = y[d] - head[d];
    delta[d] = -r / var;
    const double dvar = (raw > kRawVarianceLow && raw < kRawVarianceHigh) ? sigmoid(raw) : 0.0;
    delta[k + d] = (0.5 / var - 0.5 * r * r / (var * var)) * dvar;
  }

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    const double* w = theta.data() + layer.offset;
    double* gw = grad.data() + layer.offset;
    double* gb = gw + layer.in * layer.out;
    const std::vector<double>& a = acts[l];
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double g = delta[o];
      gb[o] += g;
      double* grow = gw + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) grow[i] += g * a[i];
    }
    if (l == 0) break;
    delta_prev.assign(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double g = delta[o];
      const double* row = w + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) delta_prev[i] += row[i] * g;
    }
    for (std::size_t i = 0; i < layer.in; ++i) delta_prev[i] *= 1.0 - a[i] * a[i];
    delta.swap(delta_prev);
  }
}

std::vector<double> MdnModel::grad_neg_log_likelihood(const ParamVector& theta,
                                                      const SupervisedDataset& batch) const {
  std::vector<std::size_t> all(batch.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return grad_neg_log_likelihood(theta, batch, all);
}

std::vector<double> MdnModel::grad_neg_log_likelihood(
    const ParamVector& theta, const SupervisedDataset& ds,
    std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ArgumentError("gradient requested on an empty batch");
  if (theta.size() != n_params_) throw ArgumentError("parameter vector has the wrong length");
  if (ds.x_dim() != arch_.input_dim || ds.y_dim() != arch_.output_dim) {
    throw ArgumentError("dataset dimensions do not match the architecture");
  }
  std::vector<double> grad(n_params_, 0.0);
  std::vector<std::vector<double>> acts;
  std::vector<double> delta;
  std::vector<double> delta_prev;
  for (std::size_t i : indices) {
    accumulate_grad(theta.values(), ds.x(i), ds.y(i), acts, delta, delta_prev, grad);
  }
  return grad;
}

void write_params(const std::filesystem::path& path, const MdnArchitecture& arch,
                  const ParamVector& theta) {
  if (theta.size() != arch.param_count()) {
    throw ArgumentError("parameter vector does not match the architecture");
  }
  const json header{{"format", "pbnn-params"},
                    {"architecture", to_json(arch)},
                    {"count", theta.size()},
                    {"rows", 1}};
  write_binary_block(path, header.dump(), theta.values());
}

ParamVector read_params(const std::filesystem::path& path, const MdnArchitecture& expected) {
  BinaryBlock block = read_binary_block(path);
  try {
    const json header = json::parse(block.header_json);
    if (header.at("format") != "pbnn-params") throw ConfigError("not a parameter file");
    if (architecture_from_json(header.at("architecture")) != expected) {
      throw ConfigError(path.string() + ": architecture mismatch");
    }
    if (header.at("count").get<std::size_t>() != block.values.size()) {
      throw ConfigError(path.string() + ": count does not match payload");
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": bad header: " + e.what());
  }
  if (block.values.size() != expected.param_count()) {
    throw ConfigError(path.string() + ": wrong parameter count");
  }
  return ParamVector(std::move(block.values));
}

}  // namespace pbnn

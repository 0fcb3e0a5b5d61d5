#include "pbnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "pbnn/errors.hpp"
#include "pbnn/io.hpp"

namespace pbnn {

using nlohmann::json;

SupervisedDataset::SupervisedDataset(std::size_t x_dim, std::size_t y_dim)
    : x_dim_(x_dim), y_dim_(y_dim) {}

void SupervisedDataset::push_back(std::span<const double> x, std::span<const double> y,
                                  std::size_t t) {
  if (x.size() != x_dim_ || y.size() != y_dim_) {
    throw ArgumentError("dataset item has the wrong dimension");
  }
  xs_.insert(xs_.end(), x.begin(), x.end());
  ys_.insert(ys_.end(), y.begin(), y.end());
  times_.push_back(t);
}

SupervisedDataset SupervisedDataset::slice(std::size_t first, std::size_t count) const {
  if (first + count > size()) throw ArgumentError("slice out of range");
  SupervisedDataset out(x_dim_, y_dim_);
  out.xs_.assign(xs_.begin() + static_cast<std::ptrdiff_t>(first * x_dim_),
                 xs_.begin() + static_cast<std::ptrdiff_t>((first + count) * x_dim_));
  out.ys_.assign(ys_.begin() + static_cast<std::ptrdiff_t>(first * y_dim_),
                 ys_.begin() + static_cast<std::ptrdiff_t>((first + count) * y_dim_));
  out.times_.assign(times_.begin() + static_cast<std::ptrdiff_t>(first),
                    times_.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

SupervisedDataset SupervisedDataset::subset(std::span<const std::size_t> indices) const {
  SupervisedDataset out(x_dim_, y_dim_);
  out.xs_.reserve(indices.size() * x_dim_);
  out.ys_.reserve(indices.size() * y_dim_);
  for (std::size_t i : indices) {
    if (i >= size()) throw ArgumentError("subset index out of range");
    out.push_back(x(i), y(i), time(i));
  }
  return out;
}

SupervisedDataset build_dataset(std::span<const Observation> trajectory,
                                std::span<const std::size_t> lags) {
  if (lags.empty()) throw ArgumentError("at least one lag is required");
  const std::size_t max_lag = *std::max_element(lags.begin(), lags.end());
  if (trajectory.size() <= max_lag) {
    throw InsufficientDataError("trajectory of length " + std::to_string(trajectory.size()) +
                                " is too short for lag " + std::to_string(max_lag));
  }
  SupervisedDataset ds(4 * lags.size(), 4);
  std::vector<double> x(4 * lags.size());
  for (std::size_t t = max_lag; t < trajectory.size(); ++t) {
    for (std::size_t k = 0; k < lags.size(); ++k) {
      const Observation& past = trajectory[t - lags[k]];
      std::copy(past.begin(), past.end(), x.begin() + static_cast<std::ptrdiff_t>(4 * k));
    }
    ds.push_back(x, trajectory[t], t);
  }
  return ds;
}

std::pair<SupervisedDataset, SupervisedDataset> split_sequential(const SupervisedDataset& ds,
                                                                 std::size_t n_train) {
  if (n_train == 0 || n_train >= ds.size()) {
    throw ArgumentError("n_train must satisfy 0 < n_train < " + std::to_string(ds.size()));
  }
  return {ds.slice(0, n_train), ds.slice(n_train, ds.size() - n_train)};
}

bool Standardization::identity() const {
  for (std::size_t d = 0; d < 4; ++d) {
    if (mean[d] != 0.0 || scale[d] != 1.0) return false;
  }
  return true;
}

Observation Standardization::apply(const Observation& y) const {
  Observation out;
  for (std::size_t d = 0; d < 4; ++d) out[d] = (y[d] - mean[d]) / scale[d];
  return out;
}

Standardization fit_standardization(std::span<const Observation> trajectory, std::size_t first,
                                    std::size_t count) {
  if (count < 2 || first + count > trajectory.size()) {
    throw ArgumentError("standardization window out of range");
  }
  Standardization s;
  for (std::size_t d = 0; d < 4; ++d) {
    double sum = 0.0;
    for (std::size_t i = first; i < first + count; ++i) sum += trajectory[i][d];
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t i = first; i < first + count; ++i) {
      const double r = trajectory[i][d] - mean;
      ss += r * r;
    }
    const double sd = std::sqrt(ss / static_cast<double>(count - 1));
    s.mean[d] = mean;
    s.scale[d] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

TrajectoryFile generate_trajectory(const DataSpec& spec) {
  TrajectoryFile file;
  file.spec = spec;
  std::vector<Observation> raw = simulate(spec.initial, spec.params);
  if (spec.standardize) {
    const std::size_t max_lag = *std::max_element(spec.lags.begin(), spec.lags.end());
    // the training split sees observations [0, max_lag + n_train)
    const std::size_t window = std::min(raw.size(), max_lag + spec.n_train);
    file.standardization = fit_standardization(raw, 0, window);
    for (Observation& y : raw) y = file.standardization.apply(y);
  }
  file.observations = std::move(raw);
  return file;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p += ".json";
  return p;
}

namespace {

json spec_to_json(const TrajectoryFile& f) {
  const DataSpec& s = f.spec;
  return json{
      {"params",
       {{"m1", s.params.m1},
        {"m2", s.params.m2},
        {"l1", s.params.l1},
        {"l2", s.params.l2},
        {"g", s.params.g},
        {"dt", s.params.dt},
        {"record_every", s.params.record_every},
        {"n_observations", s.params.n_observations}}},
      {"initial_state",
       {{"phi1", s.initial.phi1},
        {"phi2", s.initial.phi2},
        {"omega1", s.initial.omega1},
        {"omega2", s.initial.omega2}}},
      {"lags", s.lags},
      {"n_train", s.n_train},
      {"seed", s.seed},
      {"standardize", s.standardize},
      {"standardization", {{"mean", f.standardization.mean}, {"scale", f.standardization.scale}}},
  };
}

}  // namespace

void write_trajectory(const std::filesystem::path& path, const TrajectoryFile& file) {
  std::string csv = "t,y1,y2,y3,y4\n";
  for (std::size_t t = 0; t < file.observations.size(); ++t) {
    csv += std::to_string(t);
    for (double v : file.observations[t]) {
      csv += ',';
      csv += format_double(v);
    }
    csv += '\n';
  }
  write_text_atomic(path, csv);
  write_text_atomic(sidecar_path(path), spec_to_json(file).dump(2) + "\n");
}

TrajectoryFile read_trajectory(const std::filesystem::path& path) {
  TrajectoryFile f;
  json side;
  try {
    side = json::parse(read_text(sidecar_path(path)));
    const json& p = side.at("params");
    f.spec.params.m1 = p.at("m1");
    f.spec.params.m2 = p.at("m2");
    f.spec.params.l1 = p.at("l1");
    f.spec.params.l2 = p.at("l2");
    f.spec.params.g = p.at("g");
    f.spec.params.dt = p.at("dt");
    f.spec.params.record_every = p.at("record_every");
    f.spec.params.n_observations = p.at("n_observations");
    const json& s0 = side.at("initial_state");
    f.spec.initial = {s0.at("phi1"), s0.at("phi2"), s0.at("omega1"), s0.at("omega2")};
    f.spec.lags = side.at("lags").get<std::vector<std::size_t>>();
    f.spec.n_train = side.at("n_train");
    f.spec.seed = side.at("seed");
    f.spec.standardize = side.at("standardize");
    f.standardization.mean = side.at("standardization").at("mean");
    f.standardization.scale = side.at("standardization").at("scale");
  } catch (const json::exception& e) {
    throw ConfigError("malformed dataset sidecar " + sidecar_path(path).string() + ": " +
                      e.what());
  }

  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,y1,y2,y3,y4", 0) != 0) {
    throw ConfigError(path.string() + ": expected header t,y1,y2,y3,y4");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 5) throw ConfigError(path.string() + ": row with wrong column count");
    Observation y;
    for (std::size_t d = 0; d < 4; ++d) y[d] = parse_double(cells[d + 1]);
    f.observations.push_back(y);
  }
  return f;
}

}  // namespace pbnn

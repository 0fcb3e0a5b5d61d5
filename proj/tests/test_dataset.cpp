#include <doctest.h>

#include <filesystem>

#include "pbnn/dataset.hpp"
#include "pbnn/errors.hpp"

using namespace pbnn;

namespace {

std::vector<Observation> ramp(std::size_t n) {
  std::vector<Observation> t;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = static_cast<double>(i);
    t.push_back({v, v + 0.25, v + 0.5, v + 0.75});
  }
  return t;
}

}  // namespace

TEST_CASE("windowing boundary") {
  CHECK_THROWS_AS(build_dataset(ramp(24)), InsufficientDataError);

  const SupervisedDataset ds = build_dataset(ramp(25));
  REQUIRE(ds.size() == 1);
  CHECK(ds.x_dim() == 20);
  CHECK(ds.time(0) == 24);
  // lags 20..24 from t=24 pick observations 4, 3, 2, 1, 0
  const auto x = ds.x(0);
  for (std::size_t k = 0; k < 5; ++k) {
    for (std::size_t d = 0; d < 4; ++d) {
      CHECK(x[4 * k + d] == static_cast<double>(4 - k) + 0.25 * static_cast<double>(d));
    }
  }
  CHECK(ds.y(0)[0] == 24.0);
  CHECK(ds.y(0)[3] == 24.75);
}

TEST_CASE("default trajectory length gives 9975 items") {
  CHECK(build_dataset(ramp(9999)).size() == 9975);
}

TEST_CASE("sequential split") {
  const SupervisedDataset all = build_dataset(ramp(9999));
  const auto [train, test] = split_sequential(all, 2992);
  CHECK(train.size() == 2992);
  CHECK(test.size() == 6983);
  CHECK(test.time(0) == train.time(2991) + 1);

  const SupervisedDataset ten = build_dataset(ramp(34));
  REQUIRE(ten.size() == 10);
  CHECK_THROWS_AS(split_sequential(ten, 10), ArgumentError);
  CHECK_THROWS_AS(split_sequential(ten, 0), ArgumentError);

  const SupervisedDataset three = build_dataset(ramp(27));
  const auto [a, b] = split_sequential(three, 1);
  CHECK(a.size() == 1);
  CHECK(b.size() == 2);
  CHECK(a.time(0) == 24);
  CHECK(b.time(0) == 25);
  CHECK(b.time(1) == 26);
}

TEST_CASE("subset keeps order and repeats") {
  const SupervisedDataset ds = build_dataset(ramp(30));
  const std::vector<std::size_t> idx{3, 0, 3};
  const SupervisedDataset s = ds.subset(idx);
  REQUIRE(s.size() == 3);
  CHECK(s.time(0) == ds.time(3));
  CHECK(s.time(1) == ds.time(0));
  CHECK(s.time(2) == ds.time(3));
}

TEST_CASE("standardization is fit on the training window only") {
  DataSpec spec;
  spec.params.n_observations = 200;
  spec.n_train = 50;
  spec.standardize = true;
  const TrajectoryFile f = generate_trajectory(spec);
  const std::size_t fit_count = 24 + 50;
  double mean = 0.0;
  for (std::size_t i = 0; i < fit_count; ++i) mean += f.observations[i][2];
  CHECK(std::abs(mean / fit_count) < 1e-12);
  CHECK_FALSE(f.standardization.identity());
}

TEST_CASE("trajectory file round trip is exact") {
  DataSpec spec;
  spec.params.n_observations = 300;
  spec.n_train = 100;
  spec.seed = 7;
  const TrajectoryFile f = generate_trajectory(spec);
  const auto dir = std::filesystem::temp_directory_path() / "pbnn_dataset_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "traj.csv";
  write_trajectory(path, f);
  CHECK(std::filesystem::exists(sidecar_path(path)));
  const TrajectoryFile g = read_trajectory(path);
  CHECK(g.observations == f.observations);
  CHECK(g.spec.n_train == 100);
  CHECK(g.spec.seed == 7);
  CHECK(g.spec.lags == spec.lags);
  CHECK(g.spec.initial == spec.initial);
  CHECK(generate_trajectory(spec).observations == f.observations);
  std::filesystem::remove_all(dir);
}

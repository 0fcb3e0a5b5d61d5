#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pbnn/metrics.hpp"

using namespace pbnn;

namespace {

constexpr std::size_t kHeadBias = (20 + 1) * 10 + (10 + 1) * 10 + 10 * 8;

ParamVector constant_head(const std::vector<double>& mean, double var) {
  std::vector<double> t(408, 0.0);
  for (std::size_t d = 0; d < 4; ++d) {
    t[kHeadBias + d] = mean[d];
    t[kHeadBias + 4 + d] = std::log(std::expm1(var - kVarianceMin));
  }
  return ParamVector(t);
}

SupervisedDataset items(const std::vector<std::vector<double>>& ys) {
  SupervisedDataset ds(20, 4);
  for (std::size_t i = 0; i < ys.size(); ++i) ds.push_back(std::vector<double>(20, 0.0), ys[i], i);
  return ds;
}

}  // namespace

TEST_CASE("mixture moments") {
  const MdnOutput one{{0.5, -1.0}, {0.3, 2.0}};
  const auto single = mixture_moments(std::vector<MdnOutput>{one});
  CHECK(single.mean == one.mean);
  CHECK(single.stddev[0] == std::sqrt(0.3));
  CHECK(single.stddev[1] == std::sqrt(2.0));

  const auto two = mixture_moments(std::vector<MdnOutput>{{{0.0}, {1.0}}, {{2.0}, {1.0}}});
  CHECK(two.mean[0] == 1.0);
  CHECK(two.stddev[0] * two.stddev[0] == doctest::Approx(2.0));

  const auto same = mixture_moments(std::vector<MdnOutput>{one, one, one});
  CHECK(same.stddev[0] * same.stddev[0] == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("avg_nll") {
  const MdnModel model;
  const std::vector<double> y{0.2, 0.4, -0.6, 1.0};
  const auto data = items({y, y});
  const std::vector<ParamVector> exact{constant_head(y, 1.0 / (2.0 * std::numbers::pi))};
  CHECK(std::abs(avg_nll(model, exact, data)) < 1e-12);

  const auto data3 = items({{0.0, 0.1, 0.2, 0.3}, {1.0, -1.0, 0.5, 0.0}, {-0.3, 0.3, 0.0, 2.0}});
  const std::vector<ParamVector> two{constant_head({0.1, 0.0, 0.2, 0.5}, 0.8),
                                     constant_head({0.5, -0.4, 0.1, 1.0}, 1.7)};
  std::vector<ParamVector> dup = two;
  dup.insert(dup.end(), two.begin(), two.end());
  CHECK(avg_nll(model, dup, data3) == doctest::Approx(avg_nll(model, two, data3)).epsilon(1e-14));

  // direct mean of densities, no log-sum-exp
  long double total = 0.0L;
  for (std::size_t i = 0; i < 3; ++i) {
    long double p = 0.0L;
    for (const auto& theta : two) {
      p += std::exp(static_cast<long double>(model.log_likelihood(theta, data3.x(i), data3.y(i))));
    }
    total -= std::log(p / 2.0L);
  }
  CHECK(avg_nll(model, two, data3) == doctest::Approx(static_cast<double>(total / 3.0L)).epsilon(1e-13));

  const EvalReport r = evaluate(model, two, data3);
  CHECK(r.avg_nll == doctest::Approx(avg_nll(model, two, data3)).epsilon(1e-14));
  const Coverage c = coverage_and_ace(model, two, data3);
  CHECK(r.coverage == c.coverage);
  CHECK(r.ace == c.ace);
  CHECK(r.num_samples == 2);
}

TEST_CASE("coverage boundaries") {
  const auto data = items({{0.0, 1.0, 2.0, 3.0}});
  const std::vector<PredictiveMoments> wide{{{0.0, 0.0, 0.0, 0.0}, {1e9, 1e9, 1e9, 1e9}}};
  const Coverage all = coverage_from_moments(wide, data);
  CHECK(all.coverage == 1.0);
  CHECK(all.ace == doctest::Approx(0.318));

  const std::vector<PredictiveMoments> narrow{{{5.0, 5.0, 5.0, 5.0}, {1e-9, 1e-9, 1e-9, 1e-9}}};
  const Coverage none = coverage_from_moments(narrow, data);
  CHECK(none.coverage == 0.0);
  CHECK(none.ace == doctest::Approx(0.682));

  const std::vector<PredictiveMoments> half{{{0.0, 1.5, 2.0, 0.0}, {0.1, 0.1, 0.1, 0.1}}};
  const Coverage c = coverage_from_moments(half, data);
  CHECK(c.coverage == 0.5);
  CHECK(c.ace == doctest::Approx(0.182));
}

TEST_CASE("log_mean_exp is stable") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_mean_exp(big) == doctest::Approx(1000.0));
  const std::vector<double> small{-1000.0, -1000.0 + std::log(3.0)};
  CHECK(log_mean_exp(small) == doctest::Approx(-1000.0 + std::log(2.0)));
}

TEST_CASE("report row layout") {
  EvalReport r;
  r.sampler = "pbnn";
  r.batch_size = 60;
  r.num_batches = 100;
  r.split = "test";
  r.avg_nll = -1.5;
  r.coverage = 0.75;
  r.ace = 0.068;
  r.acceptance_rate = 0.25;
  r.num_samples = 3;
  r.seed = 7;
  CHECK(eval_report_row(r, "abc") == "pbnn,60,100,test,-1.5,0.75,0.068,0.25,3,7,abc");
}

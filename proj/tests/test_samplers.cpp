#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <nlohmann/json.hpp>

#include "pbnn/errors.hpp"
#include "pbnn/samplers.hpp"

using namespace pbnn;

namespace {

SupervisedDataset random_items(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  SupervisedDataset ds(20, 4);
  std::vector<double> x(20), y(4);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : x) v = nd(rng);
    for (std::size_t d = 0; d < 4; ++d) y[d] = 0.3 * x[d] + 0.2 * nd(rng);
    ds.push_back(x, y, i);
  }
  return ds;
}

ChainConfig small_chain(SamplerKind kind) {
  ChainConfig c;
  c.sampler = kind;
  c.n_steps = 60;
  c.burn_in = 20;
  c.thin = 4;
  c.seed = 42;
  c.plan = {10, 8, BatchMode::kWithReplacement};
  c.proposal.step = 2e-3;
  c.target_n = 10;
  return c;
}

struct Fixture {
  MdnModel model;
  SupervisedDataset train = random_items(120, 3);
  ParamVector start;
  Fixture() {
    Rng rng(1);
    start = model.init_params(rng);
  }
};

}  // namespace

TEST_CASE("penalized acceptance formula") {
  CHECK(penalty_acceptance({0.0, 0.0, 0.0}) == 1.0);
  CHECK(penalty_acceptance({1.0, 2.0, 0.0}) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  CHECK(penalty_acceptance({-1.5, 3.0, 0.0}) == 1.0);
  CHECK(penalty_acceptance({std::nan(""), 1.0, 0.0}) == 0.0);
  CHECK(accept_move(0.0, 0.999999));
  CHECK_FALSE(accept_move(std::log(0.5), 0.6));
  CHECK(accept_move(std::log(0.5), 0.4));
}

TEST_CASE("forced identical proposals are always accepted") {
  Fixture f;
  for (SamplerKind k : {SamplerKind::kPbnn, SamplerKind::kBatched, SamplerKind::kVanilla,
                        SamplerKind::kTempered}) {
    Sampler s(f.model, f.train, small_chain(k), f.start);
    for (int i = 0; i < 5; ++i) {
      const StepDiagnostics d = s.step_with_proposal(f.start, 0.0);
      CHECK(d.accepted);
      CHECK(d.delta == 0.0);
      CHECK(d.chi2 == 0.0);
    }
  }
}

TEST_CASE("pbnn and batched differ only by the penalty") {
  Fixture f;
  Sampler pbnn(f.model, f.train, small_chain(SamplerKind::kPbnn), f.start);
  Sampler batched(f.model, f.train, small_chain(SamplerKind::kBatched), f.start);
  const StepDiagnostics a = pbnn.step();
  const StepDiagnostics b = batched.step();
  CHECK(a.delta == b.delta);
  CHECK(a.chi2 == b.chi2);
  CHECK(a.chi2 > 0.0);
  CHECK(std::min(0.0, b.log_acceptance - 0.5 * a.chi2) == doctest::Approx(a.log_acceptance));
  CHECK(a.log_acceptance <= b.log_acceptance);
}

TEST_CASE("penalty lowers acceptance on paired runs") {
  Fixture f;
  ChainConfig c = small_chain(SamplerKind::kPbnn);
  c.n_steps = 400;
  c.burn_in = 0;
  c.proposal.step = 2e-2;
  const ChainRecord pen = run_chain(f.model, c, f.train, f.start);
  c.sampler = SamplerKind::kBatched;
  const ChainRecord raw = run_chain(f.model, c, f.train, f.start);
  CHECK(pen.acceptance_rate() < raw.acceptance_rate());
}

TEST_CASE("tempered with the full weight is vanilla") {
  Fixture f;
  ChainConfig c = small_chain(SamplerKind::kTempered);
  c.target_n = f.train.size();
  const ChainRecord tempered = run_chain(f.model, c, f.train, f.start);
  c.sampler = SamplerKind::kVanilla;
  const ChainRecord vanilla = run_chain(f.model, c, f.train, f.start);
  CHECK(tempered.samples == vanilla.samples);
  CHECK(tempered.accept_count == vanilla.accept_count);
}

TEST_CASE("rejected steps repeat the current state") {
  Fixture f;
  ChainConfig c = small_chain(SamplerKind::kVanilla);
  c.proposal.step = 1.0;  // every move is rejected
  c.burn_in = 0;
  c.thin = 1;
  c.n_steps = 5;
  const ChainRecord r = run_chain(f.model, c, f.train, f.start);
  CHECK(r.accept_count == 0);
  for (const auto& s : r.samples) CHECK(s == f.start);
}

TEST_CASE("langevin update and proposal ratio") {
  const std::vector<double> theta{0.5, -1.0};
  const std::vector<double> zero{0.0, 0.0};
  CHECK(langevin_update(theta, zero, 0.1, zero) == theta);
  const std::vector<double> g{2.0, -3.0};
  const std::vector<double> eps{0.7, 0.1};
  const double eta = 0.01;
  const auto next = langevin_update(theta, g, eta, eps);
  CHECK(next[0] == 0.5 - eta * 2.0 + std::sqrt(2.0 * eta) * 0.7);
  CHECK(next[1] == -1.0 + eta * 3.0 + std::sqrt(2.0 * eta) * 0.1);

  const std::vector<double> other{0.1, 0.2};
  CHECK(langevin_log_q_ratio(theta, other, zero, zero, eta) == 0.0);

  // L = t^2 / 2, gradient t; q(b | a) = N(b; a - eta a, 2 eta)
  const double a = 0.8, b = 0.3;
  auto log_q = [&](double to, double from) {
    const double m = from - eta * from;
    return -(to - m) * (to - m) / (4.0 * eta);
  };
  const std::vector<double> va{a}, vb{b}, ga{a}, gb{b};
  CHECK(std::abs(langevin_log_q_ratio(va, vb, ga, gb, eta) - (log_q(a, b) - log_q(b, a))) <
        1e-12);
}

TEST_CASE("langevin noise has variance 2 eta") {
  Rng rng(5);
  std::normal_distribution<double> nd;
  const double eta = 1e-3;
  const std::vector<double> theta{0.0};
  const std::vector<double> grad{0.0};
  double s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> e{nd(rng)};
    const double step = langevin_update(theta, grad, eta, e)[0];
    s2 += step * step;
  }
  const double var = s2 / n;
  // standard error of a variance estimate: var sqrt(2 / n)
  CHECK(std::abs(var - 2.0 * eta) < 4.0 * 2.0 * eta * std::sqrt(2.0 / n));
}

TEST_CASE("MH rule recovers a conjugate posterior") {
  // y_i ~ N(mu, 1), prior mu ~ N(0, 1): posterior N(sum y / (n + 1), 1 / (n + 1)).
  const std::vector<double> y{0.3, 1.1, -0.4, 0.9, 1.6, 0.2, 0.8, 1.3};
  const double n = static_cast<double>(y.size());
  double sy = 0.0;
  for (double v : y) sy += v;
  auto loss = [&](double mu) {
    double l = 0.5 * mu * mu;
    for (double v : y) l += 0.5 * (v - mu) * (v - mu);
    return l;
  };
  Rng prop = make_stream(3, "proposal");
  Rng acc = make_stream(3, "accept");
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double mu = 0.0, s = 0.0, s2 = 0.0;
  const int burn = 5000, steps = 400000;
  for (int t = 0; t < burn + steps; ++t) {
    const double cand = mu + 0.6 * nd(prop);
    const double log_a = log_penalty_acceptance({loss(cand) - loss(mu), 0.0, 0.0});
    if (accept_move(log_a, u(acc))) mu = cand;
    if (t >= burn) {
      s += mu;
      s2 += mu * mu;
    }
  }
  const double mean = s / steps;
  const double var = s2 / steps - mean * mean;
  CHECK(mean == doctest::Approx(sy / (n + 1.0)).epsilon(0.02));
  CHECK(var == doctest::Approx(1.0 / (n + 1.0)).epsilon(0.05));
}

TEST_CASE("retained sample count") {
  Fixture f;
  ChainConfig c = small_chain(SamplerKind::kPbnn);
  c.n_steps = 21;
  c.burn_in = 20;
  c.thin = 1;
  CHECK(run_chain(f.model, c, f.train, f.start).samples.size() == 1);
  CHECK(c.retained_count() == 1);
  c.thin = 2;
  CHECK_THROWS_AS(c.validate(f.train.size()), ArgumentError);
}

TEST_CASE("chains are deterministic for every sampler") {
  Fixture f;
  for (SamplerKind k : {SamplerKind::kPbnn, SamplerKind::kBatched, SamplerKind::kVanilla,
                        SamplerKind::kTempered, SamplerKind::kSgld}) {
    const ChainConfig c = small_chain(k);
    const ChainRecord a = run_chain(f.model, c, f.train, f.start);
    const ChainRecord b = run_chain(f.model, c, f.train, f.start);
    CHECK(a.samples == b.samples);
    CHECK(a.accept_count == b.accept_count);
    CHECK(a.samples.size() == c.retained_count());
  }
}

TEST_CASE("sgld never rejects and langevin proposals are corrected") {
  Fixture f;
  ChainConfig c = small_chain(SamplerKind::kSgld);
  c.sgld_eta = 1e-5;
  const ChainRecord r = run_chain(f.model, c, f.train, f.start);
  CHECK(r.accept_count == c.n_steps);

  ChainConfig m = small_chain(SamplerKind::kPbnn);
  m.proposal = {ProposalKind::kLangevinDrift, 1e-6};
  const ChainRecord mala = run_chain(f.model, m, f.train, f.start);
  bool nonzero_q = false;
  for (const auto& d : mala.step_log) nonzero_q = nonzero_q || d.log_q_ratio != 0.0;
  CHECK(nonzero_q);
}

TEST_CASE("resuming from a checkpoint is bit-identical") {
  Fixture f;
  const ChainConfig c = small_chain(SamplerKind::kPbnn);
  const ChainRecord whole = run_chain(f.model, c, f.train, f.start);

  const auto dir = std::filesystem::temp_directory_path() / "pbnn_ckpt_test";
  std::filesystem::remove_all(dir);
  RunOptions opt;
  opt.checkpoint = dir / "chain.ckpt";
  opt.stop_after = 33;
  const ChainRecord first = run_chain(f.model, c, f.train, f.start, opt);
  CHECK(first.steps() == 33);
  opt.stop_after = 0;
  const ChainRecord resumed = run_chain(f.model, c, f.train, f.start, opt);
  CHECK(resumed.samples == whole.samples);
  CHECK(resumed.accept_count == whole.accept_count);
  CHECK(resumed.steps() == whole.steps());

  ChainConfig other = c;
  other.seed = 43;
  CHECK_THROWS_AS(run_chain(f.model, other, f.train, f.start, opt), ConfigError);

  write_chain_record(dir / "chain.bin", f.model.architecture(), whole, nlohmann::json::object());
  const ChainRecord back = read_chain_record(dir / "chain.bin", f.model.architecture());
  CHECK(back.samples == whole.samples);
  CHECK(back.accept_count == whole.accept_count);
  std::filesystem::remove_all(dir);
}

TEST_CASE("invalid chain settings") {
  Fixture f;
  ChainConfig c = small_chain(SamplerKind::kPbnn);
  c.plan.num_batches = 1;
  CHECK_THROWS_AS(c.validate(f.train.size()), ArgumentError);
  c = small_chain(SamplerKind::kSgld);
  c.sgld_eta = 0.0;
  CHECK_THROWS_AS(c.validate(f.train.size()), ArgumentError);
  c = small_chain(SamplerKind::kTempered);
  c.target_n = 0;
  CHECK_THROWS_AS(c.validate(f.train.size()), ArgumentError);
  CHECK_THROWS_AS(sampler_from_string("hmc"), ConfigError);
}

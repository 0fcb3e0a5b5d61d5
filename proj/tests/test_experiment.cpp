#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pbnn/errors.hpp"
#include "pbnn/experiment.hpp"
#include "pbnn/io.hpp"

using namespace pbnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("PBNN_TEST_TMP");
  const fs::path root = env ? fs::path(env) : fs::temp_directory_path() / "pbnn_experiment_test";
  const fs::path dir = root / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Tiny but complete experiment: short trajectory, short chains.
ExperimentConfig tiny(const fs::path& dir) {
  ExperimentConfig c;
  c.out_dir = dir / "out";
  c.data_path = dir / "data" / "pendulum.csv";
  c.data.params.n_observations = 400;
  c.data.n_train = 150;
  c.preopt_iterations = 20;
  c.tune_rounds = 2;
  c.tune_steps_per_round = 10;
  c.chain.n_steps = 40;
  c.chain.burn_in = 20;
  c.chain.thin = 5;
  c.chain.plan.batch_size = 10;
  c.chain.plan.num_batches = 5;
  c.chain.target_n = 10;
  c.benchmark_seeds = 1;
  c.benchmark_batch_size = 10;
  c.benchmark_num_batches = 5;
  c.sweep_batch_sizes = {10};
  c.prediction_items = 5;
  c.validation.dense_points = 3;
  c.validation.mc_steps = 0;
  return c;
}

std::size_t line_count(const fs::path& p) {
  const std::string s = read_text(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::istringstream in(read_text(p));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  for (auto c : split_csv_line(line)) header.emplace_back(c);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    const auto cells = split_csv_line(line);
    auto& row = rows.emplace_back();
    for (std::size_t k = 0; k < header.size() && k < cells.size(); ++k) {
      row[header[k]] = std::string(cells[k]);
    }
  }
  return rows;
}

}  // namespace

TEST_CASE("config round trip and hash") {
  ExperimentConfig c;
  c.seed = 9;
  c.chain.sampler = SamplerKind::kTempered;
  c.sweep_batch_sizes = {15, 30};
  const ExperimentConfig back = experiment_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(config_hash(back) == config_hash(c));
  ExperimentConfig d = c;
  d.chain.thin = 7;
  CHECK(config_hash(d) != config_hash(c));
  ExperimentConfig moved = c;
  moved.out_dir = "elsewhere";
  moved.data_path = "elsewhere/data.csv";
  moved.workers = 4;
  CHECK(config_hash(moved) == config_hash(c));

  const nlohmann::json partial = {{"chain", {{"n_steps", 1000}}}};
  const ExperimentConfig p = experiment_config_from_json(partial);
  CHECK(p.chain.n_steps == 1000);
  CHECK(p.chain.burn_in == ExperimentConfig{}.chain.burn_in);

  CHECK_THROWS_AS(experiment_config_from_json({{"chain", {{"sampler", "hmc"}}}}), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json({{"workers", 0}}), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json({{"seed", "x"}}), ConfigError);
}

TEST_CASE("generate-data") {
  const fs::path dir = scratch("generate");
  ExperimentConfig c = tiny(dir);
  c.data.params.n_observations = 9999;
  c.data.n_train = 2992;
  CHECK(cmd_generate_data(c) == kExitOk);
  CHECK(line_count(c.data_path) == 10000);
  const TrainTest tt = load_train_test(c);
  CHECK(tt.train.size() + tt.test.size() == 9975);
  const std::string first = read_text(c.data_path);
  CHECK(cmd_generate_data(c) == kExitOk);
  CHECK(read_text(c.data_path) == first);

  c.data.params.n_observations = 24;
  CHECK_THROWS_AS(cmd_generate_data(c), InsufficientDataError);
  c = tiny(dir);
  c.data_path = dir / "missing.csv";
  CHECK_THROWS_AS(load_train_test(c), ConfigError);
}

TEST_CASE("run writes reports and is repeatable") {
  const fs::path dir = scratch("run");
  ExperimentConfig c = tiny(dir);
  REQUIRE(cmd_generate_data(c) == kExitOk);

  c.chain.sampler = SamplerKind::kVanilla;
  CHECK(cmd_run(c) == kExitOk);
  CHECK(line_count(c.out_dir / "vanilla_report.csv") == 3);

  c.chain.sampler = SamplerKind::kPbnn;
  CHECK(cmd_run(c) == kExitOk);
  const std::string steps = read_text(c.out_dir / "pbnn_steps.csv");
  const std::string report = read_text(c.out_dir / "pbnn_report.csv");
  const std::string bands = read_text(c.out_dir / "pbnn_predictions.csv");
  bool chi2_nonzero = false;
  for (std::size_t line = steps.find('\n') + 1; line < steps.size();) {
    const std::size_t end = steps.find('\n', line);
    const auto cells = split_csv_line(std::string_view(steps).substr(line, end - line));
    chi2_nonzero = chi2_nonzero || parse_double(cells[2]) > 0.0;
    line = end + 1;
  }
  CHECK(chi2_nonzero);
  CHECK(line_count(c.out_dir / "pbnn_predictions.csv") == 1 + 5 * 4);

  fs::remove_all(c.out_dir);
  CHECK(cmd_run(c) == kExitOk);
  CHECK(read_text(c.out_dir / "pbnn_steps.csv") == steps);
  CHECK(read_text(c.out_dir / "pbnn_report.csv") == report);
  CHECK(read_text(c.out_dir / "pbnn_predictions.csv") == bands);
}

TEST_CASE("benchmark layout with one seed") {
  const fs::path dir = scratch("benchmark");
  ExperimentConfig c = tiny(dir);
  REQUIRE(cmd_generate_data(c) == kExitOk);
  CHECK(cmd_benchmark(c) == kExitOk);
  const std::string table = read_text(c.out_dir / "benchmark.csv");
  CHECK(line_count(c.out_dir / "benchmark.csv") == 6);
  CHECK(table.find("pbnn,10,5,") != std::string::npos);
  // std columns are empty with a single replicate
  const std::size_t row = table.find("\npbnn,");
  const std::string line = table.substr(row + 1, table.find('\n', row + 1) - row - 1);
  const auto cells = split_csv_line(line);
  CHECK(cells[4].empty());
  CHECK(cells[6].empty());
  CHECK(cells[8].empty());
  // four N=60-group models in the band file
  CHECK(line_count(c.out_dir / "benchmark_predictions.csv") == 1 + 4 * 5 * 4);
}

TEST_CASE("benchmark keeps the other models when one chain diverges") {
  const fs::path dir = scratch("benchmark-diverged");
  ExperimentConfig c = tiny(dir);
  c.chain.sgld_eta = 1e6;
  REQUIRE(cmd_generate_data(c) == kExitOk);
  CHECK(cmd_benchmark(c) == kExitChainDiverged);
  const auto rows = read_csv(c.out_dir / "benchmark.csv");
  REQUIRE(rows.size() == 5);
  for (const auto& row : rows) {
    const bool sgld = row.at("model") == "pseudo-sgld";
    CHECK(row.at("diverged_seeds") == (sgld ? "1" : "0"));
    CHECK(row.at("seeds") == (sgld ? "0" : "1"));
    CHECK(row.at("test_nll_mean").empty() == sgld);
  }
  CHECK(line_count(c.out_dir / "benchmark_runs.csv") == 1 + 4 * 2);
  CHECK(line_count(c.out_dir / "benchmark_predictions.csv") == 1 + 3 * 5 * 4);
}

TEST_CASE("sweep with one batch size gives one row") {
  const fs::path dir = scratch("sweep");
  ExperimentConfig c = tiny(dir);
  REQUIRE(cmd_generate_data(c) == kExitOk);
  CHECK(cmd_sweep(c) == kExitOk);
  CHECK(line_count(c.out_dir / "sweep.csv") == 2);
}

TEST_CASE("validate exit status") {
  const fs::path dir = scratch("validate");
  ExperimentConfig c = tiny(dir);
  CHECK(cmd_validate(c) == kExitOk);
  CHECK(read_text(c.out_dir / "validate.csv").rfind(kValidateHeader, 0) == 0);
}

TEST_CASE("worker pool keeps job order and rethrows") {
  std::vector<int> out(7, 0);
  run_parallel(7, 3, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < 7; ++i) CHECK(out[i] == static_cast<int>(i * i));
  CHECK_THROWS_AS(run_parallel(4, 2,
                               [](std::size_t i) {
                                 if (i == 2) throw ArgumentError("boom");
                               }),
                  ArgumentError);
}

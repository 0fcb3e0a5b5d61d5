#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pbnn/dataset.hpp"
#include "pbnn/mdn.hpp"
#include "pbnn/metrics.hpp"
#include "pbnn/oracles.hpp"
#include "pbnn/samplers.hpp"

namespace pbnn {

/// Process exit codes of the command-line driver.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidationFailed = 1,
  kExitConfigError = 2,
  kExitChainDiverged = 3,
};

/// Resolved configuration of one experiment. Chain lengths, initialization
/// and proposal tuning defaults are sized for a desktop.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  std::filesystem::path data_path = "data/pendulum.csv";
  std::size_t workers = 1;

  DataSpec data;
  MdnArchitecture arch;
  double init_scale = 1.0;
  std::size_t preopt_iterations = 2000;
  double preopt_learning_rate = 1e-2;

  ChainConfig chain;

  bool tune_proposal = true;
  double tune_target_acceptance = 0.25;
  std::size_t tune_rounds = 20;
  std::size_t tune_steps_per_round = 200;

  std::size_t benchmark_seeds = 3;
  std::size_t benchmark_batch_size = 60;
  std::size_t benchmark_num_batches = 100;

  std::vector<std::size_t> sweep_batch_sizes{15, 30, 60, 120, 240};
  std::size_t sweep_seeds = 1;

  /// Test items written to the prediction-band CSVs.
  std::size_t prediction_items = 500;

  ValidationConfig validation;
};

nlohmann::json to_json(const ExperimentConfig& cfg);

/// Starts from the defaults and overrides every key present in `j`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// FNV-1a of the canonical JSON of the resolved configuration, paths and
/// worker count excluded.
std::string config_hash(const ExperimentConfig& cfg);

struct TrainTest {
  SupervisedDataset train;
  SupervisedDataset test;
};

/// Reads the trajectory at cfg.data_path, windows it and splits it.
TrainTest load_train_test(const ExperimentConfig& cfg);

/// Common starting point of every chain of replicate `replicate`.
struct ChainStart {
  ParamVector theta;
  double proposal_step = 0.0;
  double tuned_acceptance = 0.0;
};

ChainStart prepare_start(const ExperimentConfig& cfg, const MdnModel& model,
                         const SupervisedDataset& train, std::size_t replicate);

/// A sampler setting as it appears in the benchmark table.
struct ModelSpec {
  std::string name;
  SamplerKind sampler = SamplerKind::kPbnn;
  std::size_t batch_size = 0;
  std::size_t num_batches = 0;
};

/// Vanilla, tempered, batched, pseudo-SGLD and PBNN, in table order.
std::vector<ModelSpec> benchmark_models(const ExperimentConfig& cfg, std::size_t train_size);

ChainConfig chain_config_for(const ExperimentConfig& cfg, const ModelSpec& spec,
                             std::size_t train_size, std::size_t replicate,
                             double proposal_step);

struct RunOutcome {
  EvalReport train;
  EvalReport test;
  ChainRecord record;
  std::vector<PredictiveMoments> predictions;  ///< first prediction_items test items
};

RunOutcome run_and_evaluate(const ExperimentConfig& cfg, const MdnModel& model,
                            const TrainTest& data, const ModelSpec& spec,
                            const ChainConfig& chain, const ParamVector& initial,
                            const RunOptions& options = {});

/// Runs job(0), ..., job(n - 1) on up to `workers` threads. The first
/// exception (by job index) is rethrown after all jobs finish.
void run_parallel(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& job);

// Subcommands. Each returns an ExitCode and writes its CSVs under cfg.out_dir.
// benchmark and sweep finish every chain, write their tables from the chains
// that did not diverge and return kExitChainDiverged if any did.
int cmd_generate_data(const ExperimentConfig& cfg);
int cmd_run(const ExperimentConfig& cfg);
int cmd_benchmark(const ExperimentConfig& cfg);
int cmd_sweep(const ExperimentConfig& cfg);
int cmd_validate(const ExperimentConfig& cfg);

inline constexpr const char* kStepLogHeader = "step,delta,chi2,accepted,log_q_ratio,config_hash";
inline constexpr const char* kBenchmarkHeader =
    "model,N,M,test_nll_mean,test_nll_std_across_seeds,train_nll_mean,"
    "train_nll_std_across_seeds,test_ace_mean,test_ace_std_across_seeds,test_coverage_mean,"
    "acceptance_rate_mean,seeds,diverged_seeds,config_hash";
inline constexpr const char* kSweepHeader =
    "N,M,test_avg_nll,log10_acceptance,coverage,ace,acceptance_rate,J,seeds,diverged_seeds,"
    "config_hash";
inline constexpr const char* kPredictionHeader =
    "model,t,dim,y_true,mu_star,sigma_star,config_hash";
inline constexpr const char* kValidateHeader =
    "check,delta,sigma,value,reference,tolerance,pass,config_hash";

}  // namespace pbnn

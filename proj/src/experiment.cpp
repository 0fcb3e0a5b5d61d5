#include "pbnn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "pbnn/errors.hpp"
#include "pbnn/io.hpp"
#include "pbnn/losses.hpp"

namespace pbnn {

using nlohmann::json;

json to_json(const ExperimentConfig& cfg) {
  const DataSpec& d = cfg.data;
  json chain = to_json(cfg.chain);
  chain.erase("seed");  // chain seeds are derived from the top-level seed
  return json{
      {"seed", cfg.seed},
      {"out", cfg.out_dir.string()},
      {"data_path", cfg.data_path.string()},
      {"workers", cfg.workers},
      {"data",
       {{"m1", d.params.m1},
        {"m2", d.params.m2},
        {"l1", d.params.l1},
        {"l2", d.params.l2},
        {"g", d.params.g},
        {"dt", d.params.dt},
        {"record_every", d.params.record_every},
        {"n_observations", d.params.n_observations},
        {"initial_state",
         {{"phi1", d.initial.phi1},
          {"phi2", d.initial.phi2},
          {"omega1", d.initial.omega1},
          {"omega2", d.initial.omega2}}},
        {"lags", d.lags},
        {"n_train", d.n_train},
        {"standardize", d.standardize}}},
      {"model", {{"hidden", cfg.arch.hidden}, {"init_scale", cfg.init_scale}}},
      {"init",
       {{"preopt_iterations", cfg.preopt_iterations},
        {"learning_rate", cfg.preopt_learning_rate}}},
      {"chain", chain},
      {"tuning",
       {{"enabled", cfg.tune_proposal},
        {"target_acceptance", cfg.tune_target_acceptance},
        {"rounds", cfg.tune_rounds},
        {"steps_per_round", cfg.tune_steps_per_round}}},
      {"benchmark",
       {{"seeds", cfg.benchmark_seeds},
        {"batch_size", cfg.benchmark_batch_size},
        {"num_batches", cfg.benchmark_num_batches}}},
      {"sweep", {{"batch_sizes", cfg.sweep_batch_sizes}, {"seeds", cfg.sweep_seeds}}},
      {"eval", {{"prediction_items", cfg.prediction_items}}},
      {"validate",
       {{"deltas", cfg.validation.deltas},
        {"sigmas", cfg.validation.sigmas},
        {"dense_points", cfg.validation.dense_points},
        {"mc_steps", cfg.validation.mc_steps},
        {"mc_sigmas", cfg.validation.mc_sigmas},
        {"mc_delta", cfg.validation.mc_delta},
        {"mc_seeds", cfg.validation.mc_seeds}}},
  };
}

namespace {

template <typename T>
void assign_if(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    assign_if(j, "seed", c.seed);
    if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
    if (j.contains("data_path")) c.data_path = j.at("data_path").get<std::string>();
    assign_if(j, "workers", c.workers);
    if (j.contains("data")) {
      const json& d = j.at("data");
      assign_if(d, "m1", c.data.params.m1);
      assign_if(d, "m2", c.data.params.m2);
      assign_if(d, "l1", c.data.params.l1);
      assign_if(d, "l2", c.data.params.l2);
      assign_if(d, "g", c.data.params.g);
      assign_if(d, "dt", c.data.params.dt);
      assign_if(d, "record_every", c.data.params.record_every);
      assign_if(d, "n_observations", c.data.params.n_observations);
      if (d.contains("initial_state")) {
        const json& s = d.at("initial_state");
        assign_if(s, "phi1", c.data.initial.phi1);
        assign_if(s, "phi2", c.data.initial.phi2);
        assign_if(s, "omega1", c.data.initial.omega1);
        assign_if(s, "omega2", c.data.initial.omega2);
      }
      assign_if(d, "lags", c.data.lags);
      assign_if(d, "n_train", c.data.n_train);
      assign_if(d, "standardize", c.data.standardize);
    }
    if (j.contains("model")) {
      assign_if(j.at("model"), "hidden", c.arch.hidden);
      assign_if(j.at("model"), "init_scale", c.init_scale);
    }
    if (j.contains("init")) {
      assign_if(j.at("init"), "preopt_iterations", c.preopt_iterations);
      assign_if(j.at("init"), "learning_rate", c.preopt_learning_rate);
    }
    if (j.contains("chain")) {
      json merged = to_json(c.chain);
      merged.merge_patch(j.at("chain"));
      c.chain = chain_config_from_json(merged);
    }
    if (j.contains("tuning")) {
      const json& t = j.at("tuning");
      assign_if(t, "enabled", c.tune_proposal);
      assign_if(t, "target_acceptance", c.tune_target_acceptance);
      assign_if(t, "rounds", c.tune_rounds);
      assign_if(t, "steps_per_round", c.tune_steps_per_round);
    }
    if (j.contains("benchmark")) {
      assign_if(j.at("benchmark"), "seeds", c.benchmark_seeds);
      assign_if(j.at("benchmark"), "batch_size", c.benchmark_batch_size);
      assign_if(j.at("benchmark"), "num_batches", c.benchmark_num_batches);
    }
    if (j.contains("sweep")) {
      assign_if(j.at("sweep"), "batch_sizes", c.sweep_batch_sizes);
      assign_if(j.at("sweep"), "seeds", c.sweep_seeds);
    }
    if (j.contains("eval")) assign_if(j.at("eval"), "prediction_items", c.prediction_items);
    if (j.contains("validate")) {
      const json& v = j.at("validate");
      assign_if(v, "deltas", c.validation.deltas);
      assign_if(v, "sigmas", c.validation.sigmas);
      assign_if(v, "dense_points", c.validation.dense_points);
      assign_if(v, "mc_steps", c.validation.mc_steps);
      assign_if(v, "mc_sigmas", c.validation.mc_sigmas);
      assign_if(v, "mc_delta", c.validation.mc_delta);
      assign_if(v, "mc_seeds", c.validation.mc_seeds);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad configuration: ") + e.what());
  }
  c.validation.seed = c.seed;
  c.arch.validate();
  c.data.params.validate();
  if (c.workers == 0) throw ConfigError("workers must be >= 1");
  if (c.benchmark_seeds == 0 || c.sweep_seeds == 0) throw ConfigError("seed counts must be >= 1");
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return experiment_config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Locations and thread count do not change any result.
  nlohmann::json j = to_json(cfg);
  j.erase("out");
  j.erase("data_path");
  j.erase("workers");
  return hex64(fnv1a64(j.dump()));
}

TrainTest load_train_test(const ExperimentConfig& cfg) {
  if (!std::filesystem::exists(cfg.data_path)) {
    throw ConfigError("dataset " + cfg.data_path.string() +
                      " not found; run `generate-data` first");
  }
  const TrajectoryFile file = read_trajectory(cfg.data_path);
  const SupervisedDataset all = build_dataset(file.observations, file.spec.lags);
  auto [train, test] = split_sequential(all, file.spec.n_train);
  return {std::move(train), std::move(test)};
}

ChainStart prepare_start(const ExperimentConfig& cfg, const MdnModel& model,
                         const SupervisedDataset& train, std::size_t replicate) {
  const std::string tag = std::to_string(replicate);
  Rng init_rng = make_stream(cfg.seed, "init-" + tag);
  ChainStart start;
  start.theta = pre_optimize(model, train, cfg.chain.prior, model.init_params(init_rng, cfg.init_scale),
                             cfg.preopt_iterations, cfg.preopt_learning_rate);
  start.proposal_step = cfg.chain.proposal.step;
  if (cfg.tune_proposal && cfg.chain.proposal.kind == ProposalKind::kSymmetricGaussian) {
    const TuningResult tuned = tune_proposal_step(
        model, train, cfg.chain.prior, start.theta, cfg.chain.proposal.step,
        cfg.tune_target_acceptance, cfg.tune_rounds, cfg.tune_steps_per_round,
        derive_seed(cfg.seed, "tune-" + tag));
    start.proposal_step = tuned.step;
    start.tuned_acceptance = tuned.acceptance;
  }
  return start;
}

std::vector<ModelSpec> benchmark_models(const ExperimentConfig& cfg, std::size_t train_size) {
  const std::size_t n = cfg.benchmark_batch_size;
  const std::size_t m = cfg.benchmark_num_batches;
  return {{"vanilla", SamplerKind::kVanilla, train_size, 1},
          {"tempered", SamplerKind::kTempered, n, 1},
          {"batched", SamplerKind::kBatched, n, m},
          {"pseudo-sgld", SamplerKind::kSgld, n, 1},
          {"pbnn", SamplerKind::kPbnn, n, m}};
}

ChainConfig chain_config_for(const ExperimentConfig& cfg, const ModelSpec& spec,
                             std::size_t train_size, std::size_t replicate,
                             double proposal_step) {
  ChainConfig c = cfg.chain;
  c.sampler = spec.sampler;
  c.seed = derive_seed(cfg.seed, "chain-" + std::to_string(replicate));
  c.proposal.step = proposal_step;
  switch (spec.sampler) {
    case SamplerKind::kPbnn:
    case SamplerKind::kBatched:
      c.plan.batch_size = spec.batch_size;
      c.plan.num_batches = spec.num_batches;
      break;
    case SamplerKind::kTempered:
      c.target_n = spec.batch_size;
      break;
    case SamplerKind::kSgld:
      c.plan.batch_size = spec.batch_size;
      c.target_n = spec.batch_size;
      break;
    case SamplerKind::kVanilla:
      c.target_n = train_size;
      break;
  }
  return c;
}

RunOutcome run_and_evaluate(const ExperimentConfig& cfg, const MdnModel& model,
                            const TrainTest& data, const ModelSpec& spec,
                            const ChainConfig& chain, const ParamVector& initial,
                            const RunOptions& options) {
  RunOutcome out;
  out.record = run_chain(model, chain, data.train, initial, options);
  const auto label = [&](EvalReport r, const char* split) {
    r.sampler = spec.name;
    r.batch_size = spec.batch_size;
    r.num_batches = spec.num_batches;
    r.split = split;
    r.acceptance_rate = out.record.acceptance_rate();
    r.seed = chain.seed;
    return r;
  };
  out.train = label(evaluate(model, out.record.samples, data.train), "train");
  out.test = label(evaluate(model, out.record.samples, data.test), "test");
  const std::size_t n = std::min(cfg.prediction_items, data.test.size());
  out.predictions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.predictions.push_back(predictive_moments(model, out.record.samples, data.test.x(i)));
  }
  return out;
}

void run_parallel(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), n);
  if (threads <= 1) {
    drain();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(drain);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

std::string step_log_csv(const ChainRecord& record, const std::string& hash) {
  std::string out = std::string(kStepLogHeader) + '\n';
  for (std::size_t t = 0; t < record.step_log.size(); ++t) {
    const StepDiagnostics& d = record.step_log[t];
    out += std::to_string(t + 1) + ',' + format_double(d.delta) + ',' + format_double(d.chi2) +
           ',' + (d.accepted ? "1" : "0") + ',' + format_double(d.log_q_ratio) + ',' + hash +
           '\n';
  }
  return out;
}

void append_predictions(std::string& out, const std::string& model_name,
                        const std::vector<PredictiveMoments>& predictions,
                        const SupervisedDataset& test, const std::string& hash) {
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto y = test.y(i);
    for (std::size_t d = 0; d < y.size(); ++d) {
      out += model_name + ',' + std::to_string(test.time(i)) + ',' + std::to_string(d + 1) + ',' +
             format_double(y[d]) + ',' + format_double(predictions[i].mean[d]) + ',' +
             format_double(predictions[i].stddev[d]) + ',' + hash + '\n';
    }
  }
}

ModelSpec run_spec(const ExperimentConfig& cfg, std::size_t train_size) {
  const ChainConfig& c = cfg.chain;
  switch (c.sampler) {
    case SamplerKind::kVanilla:
      return {"vanilla", c.sampler, train_size, 1};
    case SamplerKind::kTempered:
      return {"tempered", c.sampler, c.target_n, 1};
    case SamplerKind::kSgld:
      return {"pseudo-sgld", c.sampler, c.plan.batch_size, 1};
    case SamplerKind::kBatched:
    case SamplerKind::kPbnn:
      break;
  }
  return {to_string(c.sampler), c.sampler, c.plan.batch_size, c.plan.num_batches};
}

std::string mean_cell(const std::vector<double>& v) {
  if (v.empty()) return "";
  double s = 0.0;
  for (double x : v) s += x;
  return format_double(s / static_cast<double>(v.size()));
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation; empty for a single replicate.
std::string std_cell(const std::vector<double>& v) {
  if (v.size() < 2) return "";
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return format_double(std::sqrt(ss / static_cast<double>(v.size() - 1)));
}

// Runs every chain even when some diverge; diverged[k] marks the failures.
struct Batch {
  std::vector<RunOutcome> outcomes;
  std::vector<char> diverged;
  std::size_t failures() const {
    return static_cast<std::size_t>(std::count(diverged.begin(), diverged.end(), 1));
  }
};

Batch run_all(std::size_t n, std::size_t workers,
              const std::function<RunOutcome(std::size_t)>& job) {
  Batch b;
  b.outcomes.resize(n);
  b.diverged.assign(n, 0);
  std::vector<std::string> messages(n);
  run_parallel(n, workers, [&](std::size_t k) {
    try {
      b.outcomes[k] = job(k);
    } catch (const ChainDivergedError& e) {
      b.diverged[k] = 1;
      messages[k] = e.what();
    }
    b.outcomes[k].record.step_log = {};  // not needed past evaluation
    b.outcomes[k].record.samples = {};
  });
  for (std::size_t k = 0; k < n; ++k) {
    if (b.diverged[k]) std::cerr << "chain " << k << " diverged: " << messages[k] << '\n';
  }
  return b;
}

MdnModel make_model(const ExperimentConfig& cfg, const TrainTest& data) {
  MdnArchitecture arch = cfg.arch;
  arch.input_dim = data.train.x_dim();
  arch.output_dim = data.train.y_dim();
  return MdnModel(arch);
}

std::vector<ChainStart> prepare_starts(const ExperimentConfig& cfg, const MdnModel& model,
                                       const SupervisedDataset& train, std::size_t count) {
  std::vector<ChainStart> starts(count);
  run_parallel(count, cfg.workers,
               [&](std::size_t r) { starts[r] = prepare_start(cfg, model, train, r); });
  return starts;
}

}  // namespace

int cmd_generate_data(const ExperimentConfig& cfg) {
  DataSpec spec = cfg.data;
  spec.seed = cfg.seed;
  const TrajectoryFile file = generate_trajectory(spec);
  const SupervisedDataset all = build_dataset(file.observations, spec.lags);
  split_sequential(all, spec.n_train);  // rejects an infeasible split before anything is written
  write_trajectory(cfg.data_path, file);
  std::cout << "wrote " << cfg.data_path.string() << ": " << file.observations.size()
            << " observations, " << all.size() << " items (" << spec.n_train << " train, "
            << all.size() - spec.n_train << " test)\n";
  return kExitOk;
}

int cmd_run(const ExperimentConfig& cfg) {
  const TrainTest data = load_train_test(cfg);
  const MdnModel model = make_model(cfg, data);
  const ModelSpec spec = run_spec(cfg, data.train.size());
  const std::string hash = config_hash(cfg);
  const std::string stem = spec.name;

  const ChainStart start = prepare_start(cfg, model, data.train, 0);
  const ChainConfig chain = chain_config_for(cfg, spec, data.train.size(), 0, start.proposal_step);
  chain.validate(data.train.size());

  RunOptions options;
  options.checkpoint = cfg.out_dir / (stem + "_" + hash + ".ckpt");
  options.checkpoint_every = 10000;
  const json extra{{"config_hash", hash}, {"sampler", spec.name}, {"seed", chain.seed}};

  RunOutcome outcome;
  try {
    outcome = run_and_evaluate(cfg, model, data, spec, chain, start.theta, options);
  } catch (const ChainDivergedError& e) {
    if (const ChainRecord* partial = e.partial()) {
      write_chain_record(cfg.out_dir / (stem + "_chain.bin"), model.architecture(), *partial,
                         extra);
      write_text_atomic(cfg.out_dir / (stem + "_steps.csv"), step_log_csv(*partial, hash));
    }
    std::cerr << "chain diverged: " << e.what() << '\n';
    return kExitChainDiverged;
  }

  write_chain_record(cfg.out_dir / (stem + "_chain.bin"), model.architecture(), outcome.record,
                     extra);
  write_text_atomic(cfg.out_dir / (stem + "_steps.csv"), step_log_csv(outcome.record, hash));
  const std::string report = std::string(kEvalReportHeader) + '\n' +
                             eval_report_row(outcome.train, hash) + '\n' +
                             eval_report_row(outcome.test, hash) + '\n';
  write_text_atomic(cfg.out_dir / (stem + "_report.csv"), report);
  std::string predictions = std::string(kPredictionHeader) + '\n';
  append_predictions(predictions, spec.name, outcome.predictions, data.test, hash);
  write_text_atomic(cfg.out_dir / (stem + "_predictions.csv"), predictions);
  std::cout << report;
  return kExitOk;
}

int cmd_benchmark(const ExperimentConfig& cfg) {
  const TrainTest data = load_train_test(cfg);
  const MdnModel model = make_model(cfg, data);
  const std::string hash = config_hash(cfg);
  const std::vector<ModelSpec> models = benchmark_models(cfg, data.train.size());
  const std::size_t seeds = cfg.benchmark_seeds;

  const std::vector<ChainStart> starts = prepare_starts(cfg, model, data.train, seeds);
  std::vector<ChainConfig> chains;
  for (std::size_t r = 0; r < seeds; ++r) {
    for (const ModelSpec& spec : models) {
      chains.push_back(chain_config_for(cfg, spec, data.train.size(), r, starts[r].proposal_step));
      chains.back().validate(data.train.size());
    }
  }

  const Batch batch = run_all(chains.size(), cfg.workers, [&](std::size_t k) {
    return run_and_evaluate(cfg, model, data, models[k % models.size()], chains[k],
                            starts[k / models.size()].theta);
  });
  const std::vector<RunOutcome>& outcomes = batch.outcomes;

  std::string runs = std::string(kEvalReportHeader) + '\n';
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    if (batch.diverged[k]) continue;
    runs += eval_report_row(outcomes[k].train, hash) + '\n' +
            eval_report_row(outcomes[k].test, hash) + '\n';
  }
  write_text_atomic(cfg.out_dir / "benchmark_runs.csv", runs);

  // Diverged replicates are left out of the means and counted separately.
  std::string table = std::string(kBenchmarkHeader) + '\n';
  for (std::size_t m = 0; m < models.size(); ++m) {
    std::vector<double> test_nll, train_nll, test_ace, test_cov, acc;
    std::size_t diverged = 0;
    for (std::size_t r = 0; r < seeds; ++r) {
      const std::size_t k = r * models.size() + m;
      if (batch.diverged[k]) {
        ++diverged;
        continue;
      }
      const RunOutcome& o = outcomes[k];
      test_nll.push_back(o.test.avg_nll);
      train_nll.push_back(o.train.avg_nll);
      test_ace.push_back(o.test.ace);
      test_cov.push_back(o.test.coverage);
      acc.push_back(o.test.acceptance_rate);
    }
    table += models[m].name + ',' + std::to_string(models[m].batch_size) + ',' +
             std::to_string(models[m].num_batches) + ',' + mean_cell(test_nll) + ',' +
             std_cell(test_nll) + ',' + mean_cell(train_nll) + ',' + std_cell(train_nll) + ',' +
             mean_cell(test_ace) + ',' + std_cell(test_ace) + ',' + mean_cell(test_cov) + ',' +
             mean_cell(acc) + ',' + std::to_string(test_nll.size()) + ',' +
             std::to_string(diverged) + ',' + hash + '\n';
  }
  write_text_atomic(cfg.out_dir / "benchmark.csv", table);

  // Prediction bands of the N=60 group, first replicate.
  std::string bands = std::string(kPredictionHeader) + '\n';
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (models[m].sampler == SamplerKind::kVanilla || batch.diverged[m]) continue;
    append_predictions(bands, models[m].name, outcomes[m].predictions, data.test, hash);
  }
  write_text_atomic(cfg.out_dir / "benchmark_predictions.csv", bands);
  std::cout << table;
  return batch.failures() == 0 ? kExitOk : kExitChainDiverged;
}

int cmd_sweep(const ExperimentConfig& cfg) {
  const TrainTest data = load_train_test(cfg);
  const MdnModel model = make_model(cfg, data);
  const std::string hash = config_hash(cfg);
  const std::size_t seeds = cfg.sweep_seeds;
  if (cfg.sweep_batch_sizes.empty()) throw ConfigError("sweep needs at least one batch size");

  std::vector<ModelSpec> specs;
  for (std::size_t n : cfg.sweep_batch_sizes) {
    if (n < 1) throw ConfigError("sweep batch sizes must be >= 1");
    // Roughly constant data per step: M * N ~ |train|.
    const std::size_t m = std::max<std::size_t>(2, data.train.size() / n);
    specs.push_back({"pbnn", SamplerKind::kPbnn, n, m});
  }

  const std::vector<ChainStart> starts = prepare_starts(cfg, model, data.train, seeds);
  std::vector<ChainConfig> chains;
  for (std::size_t p = 0; p < specs.size(); ++p) {
    for (std::size_t r = 0; r < seeds; ++r) {
      ChainConfig c = chain_config_for(cfg, specs[p], data.train.size(), r, starts[r].proposal_step);
      c.plan.mode = BatchMode::kWithReplacement;
      c.validate(data.train.size());
      chains.push_back(c);
    }
  }

  ExperimentConfig no_bands = cfg;
  no_bands.prediction_items = 0;
  const Batch batch = run_all(chains.size(), cfg.workers, [&](std::size_t k) {
    return run_and_evaluate(no_bands, model, data, specs[k / seeds], chains[k],
                            starts[k % seeds].theta);
  });

  std::string table = std::string(kSweepHeader) + '\n';
  for (std::size_t p = 0; p < specs.size(); ++p) {
    std::vector<double> nll, cov, ace, acc, j;
    std::size_t diverged = 0;
    for (std::size_t r = 0; r < seeds; ++r) {
      const std::size_t k = p * seeds + r;
      if (batch.diverged[k]) {
        ++diverged;
        continue;
      }
      const RunOutcome& o = batch.outcomes[k];
      nll.push_back(o.test.avg_nll);
      cov.push_back(o.test.coverage);
      ace.push_back(o.test.ace);
      acc.push_back(o.test.acceptance_rate);
      j.push_back(static_cast<double>(o.test.num_samples));
    }
    const std::string log_rate = acc.empty() ? "" : format_double(std::log10(mean_of(acc)));
    table += std::to_string(specs[p].batch_size) + ',' + std::to_string(specs[p].num_batches) +
             ',' + mean_cell(nll) + ',' + log_rate + ',' + mean_cell(cov) + ',' +
             mean_cell(ace) + ',' + mean_cell(acc) + ',' + mean_cell(j) + ',' +
             std::to_string(nll.size()) + ',' + std::to_string(diverged) + ',' + hash + '\n';
  }
  write_text_atomic(cfg.out_dir / "sweep.csv", table);
  std::cout << table;
  return batch.failures() == 0 ? kExitOk : kExitChainDiverged;
}

int cmd_validate(const ExperimentConfig& cfg) {
  const std::string hash = config_hash(cfg);
  const std::vector<ValidationRow> rows = run_validation(cfg.validation);
  std::string table = std::string(kValidateHeader) + '\n';
  std::size_t failed = 0;
  for (const ValidationRow& r : rows) {
    table += r.check + ',' + format_double(r.delta) + ',' + format_double(r.sigma) + ',' +
             format_double(r.value) + ',' + format_double(r.reference) + ',' +
             format_double(r.tolerance) + ',' + (r.pass ? "pass" : "FAIL") + ',' + hash + '\n';
    if (!r.pass) ++failed;
  }
  write_text_atomic(cfg.out_dir / "validate.csv", table);
  std::cout << table;
  std::cout << rows.size() - failed << '/' << rows.size() << " checks passed\n";
  return failed == 0 ? kExitOk : kExitValidationFailed;
}

}  // namespace pbnn

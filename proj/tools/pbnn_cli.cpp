// Command-line driver: generate-data, run, benchmark, sweep, validate.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "pbnn/errors.hpp"
#include "pbnn/experiment.hpp"
#include "pbnn/io.hpp"

namespace {

using nlohmann::json;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> data;
  std::optional<std::string> sampler;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> num_batches;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> burn_in;
  std::optional<std::size_t> thin;
};

pbnn::ExperimentConfig resolve(const Overrides& o) {
  json j = json::object();
  if (!o.config.empty()) {
    try {
      j = json::parse(pbnn::read_text(o.config));
    } catch (const json::exception& e) {
      throw pbnn::ConfigError(o.config + ": " + e.what());
    } catch (const pbnn::IoError& e) {
      throw pbnn::ConfigError(e.what());
    }
    if (!j.is_object()) throw pbnn::ConfigError(o.config + ": top level must be an object");
  }
  if (o.seed) j["seed"] = *o.seed;
  if (o.out) j["out"] = *o.out;
  if (o.data) j["data_path"] = *o.data;
  if (o.workers) j["workers"] = *o.workers;
  if (o.sampler) j["chain"]["sampler"] = *o.sampler;
  if (o.batch_size) {
    j["chain"]["batch_size"] = *o.batch_size;
    j["chain"]["target_n"] = *o.batch_size;
    j["benchmark"]["batch_size"] = *o.batch_size;
  }
  if (o.num_batches) {
    j["chain"]["num_batches"] = *o.num_batches;
    j["benchmark"]["num_batches"] = *o.num_batches;
  }
  if (o.steps) j["chain"]["n_steps"] = *o.steps;
  if (o.burn_in) j["chain"]["burn_in"] = *o.burn_in;
  if (o.thin) j["chain"]["thin"] = *o.thin;
  return pbnn::experiment_config_from_json(j);
}

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON configuration file");
  sub->add_option("--seed", o.seed, "top-level seed");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--data", o.data, "dataset CSV path");
  sub->add_option("--workers", o.workers, "concurrent chains");
}

void add_chain(CLI::App* sub, Overrides& o) {
  sub->add_option("--sampler", o.sampler, "pbnn, vanilla, batched, tempered or sgld");
  sub->add_option("--batch-size", o.batch_size, "mini-batch size N");
  sub->add_option("--num-batches", o.num_batches, "mini-batches per step M");
  sub->add_option("--steps", o.steps, "chain length");
  sub->add_option("--burn-in", o.burn_in, "discarded prefix");
  sub->add_option("--thin", o.thin, "retention stride");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalty-method Bayesian neural network sampler"};
  app.require_subcommand(1);
  Overrides o;

  auto* gen = app.add_subcommand("generate-data", "simulate the pendulum and write the dataset");
  auto* run = app.add_subcommand("run", "run one chain and evaluate it");
  auto* bench = app.add_subcommand("benchmark", "five samplers over several seeds");
  auto* sweep = app.add_subcommand("sweep", "PBNN over a list of batch sizes");
  auto* val = app.add_subcommand("validate", "check the acceptance oracles");
  for (auto* sub : {gen, run, bench, sweep, val}) add_common(sub, o);
  for (auto* sub : {run, bench, sweep}) add_chain(sub, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? pbnn::kExitOk : pbnn::kExitConfigError;
  }

  try {
    const pbnn::ExperimentConfig cfg = resolve(o);
    if (gen->parsed()) return pbnn::cmd_generate_data(cfg);
    if (run->parsed()) return pbnn::cmd_run(cfg);
    if (bench->parsed()) return pbnn::cmd_benchmark(cfg);
    if (sweep->parsed()) return pbnn::cmd_sweep(cfg);
    return pbnn::cmd_validate(cfg);
  } catch (const pbnn::ChainDivergedError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pbnn::kExitChainDiverged;
  } catch (const pbnn::IntegrationDivergedError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pbnn::kExitChainDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pbnn::kExitConfigError;
  }
}

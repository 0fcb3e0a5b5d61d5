#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pbnn/dataset.hpp"
#include "pbnn/losses.hpp"
#include "pbnn/mdn.hpp"
#include "pbnn/rng.hpp"

namespace pbnn {

enum class SamplerKind { kPbnn, kVanilla, kBatched, kTempered, kSgld };

std::string to_string(SamplerKind kind);
SamplerKind sampler_from_string(const std::string& s);

enum class ProposalKind { kSymmetricGaussian, kLangevinDrift };

std::string to_string(ProposalKind kind);
ProposalKind proposal_from_string(const std::string& s);

/// Random-walk std for the symmetric kernel, or the step eta of the drifted one.
struct ProposalSpec {
  ProposalKind kind = ProposalKind::kSymmetricGaussian;
  double step = 1e-3;
  void validate() const;
};

struct ChainConfig {
  std::size_t n_steps = 200000;
  std::size_t burn_in = 50000;
  std::size_t thin = 100;
  std::uint64_t seed = 0;
  SamplerKind sampler = SamplerKind::kPbnn;
  MiniBatchPlan plan;
  ProposalSpec proposal;
  PriorSpec prior;
  /// Likelihood weight for the tempered and SGLD samplers.
  std::size_t target_n = 60;
  double sgld_eta = 1e-5;

  void validate(std::size_t train_size) const;
  std::size_t retained_count() const { return (n_steps - burn_in) / thin; }
};

nlohmann::json to_json(const ChainConfig& cfg);
ChainConfig chain_config_from_json(const nlohmann::json& j);

struct StepDiagnostics {
  double delta = 0.0;
  double chi2 = 0.0;
  double log_q_ratio = 0.0;
  double log_acceptance = 0.0;
  bool accepted = false;
};

struct ChainRecord {
  std::vector<ParamVector> samples;
  std::size_t accept_count = 0;
  std::vector<StepDiagnostics> step_log;

  std::size_t steps() const { return step_log.size(); }
  double acceptance_rate() const;
};

/// Inputs to the noise-penalized Metropolis-Hastings test.
struct NoisyAcceptanceInputs {
  double delta = 0.0;        ///< estimated loss difference L(proposed) - L(current)
  double sigma2 = 0.0;       ///< variance of delta; zero for exact losses
  double log_q_ratio = 0.0;  ///< log q(current | proposed) - log q(proposed | current)
};

/// min(0, log_q_ratio - delta - sigma2 / 2). Never NaN for finite inputs.
double log_penalty_acceptance(const NoisyAcceptanceInputs& in);
/// exp(log_penalty_acceptance(in)), in [0, 1].
double penalty_acceptance(const NoisyAcceptanceInputs& in);
/// The accept/reject decision for a uniform draw u in [0, 1).
bool accept_move(double log_acceptance, double u);

/// theta - eta * grad + sqrt(2 eta) * noise
std::vector<double> langevin_update(std::span<const double> theta, std::span<const double> grad,
                                    double eta, std::span<const double> noise);

/// log q(current | proposed) - log q(proposed | current) for the drifted
/// Gaussian kernel N(theta - eta grad(theta), 2 eta I).
double langevin_log_q_ratio(std::span<const double> current, std::span<const double> proposed,
                            std::span<const double> grad_current,
                            std::span<const double> grad_proposed, double eta);

using GradientFn = std::function<std::vector<double>(const ParamVector&)>;

struct LangevinProposal {
  ParamVector proposed;
  double log_q_ratio = 0.0;
  std::vector<double> grad_proposed;
};

LangevinProposal langevin_proposal(const ParamVector& current,
                                   std::span<const double> grad_current, double eta,
                                   const GradientFn& gradient, Rng& rng);

class ChainDivergedError : public std::runtime_error {
 public:
  ChainDivergedError(const std::string& what, std::shared_ptr<const ChainRecord> partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const ChainRecord* partial() const { return partial_.get(); }

 private:
  std::shared_ptr<const ChainRecord> partial_;
};

/**
 * One Markov chain over the MDN parameters.
 *
 * Randomness comes from three streams derived from cfg.seed: "proposal"
 * (proposal and SGLD noise), "batches" (mini-batch indices) and "accept"
 * (the uniform of the MH test). Two chains with the same seed but different
 * samplers therefore see the same noise, which makes them pairable.
 *
 * The per-item log-likelihoods of the current state are cached between
 * steps; they are a pure function of (theta, item), so the cache never
 * changes results.
 */
class Sampler {
 public:
  Sampler(const MdnModel& model, const SupervisedDataset& train, ChainConfig cfg,
          ParamVector initial);

  const ParamVector& current() const { return current_; }
  const ChainConfig& config() const { return cfg_; }

  /// Advances by one step of the configured sampler.
  StepDiagnostics step();

  StepDiagnostics pbnn_step();
  StepDiagnostics batched_step();
  StepDiagnostics vanilla_step();
  StepDiagnostics tempered_step();
  StepDiagnostics sgld_step();

  /// Evaluates the configured MH rule on an externally supplied proposal.
  StepDiagnostics step_with_proposal(const ParamVector& proposed, double log_q_ratio);

  /// Drift gradient used by the Langevin proposal of the configured target.
  std::vector<double> target_gradient(const ParamVector& theta) const;

  nlohmann::json rng_state() const;
  void restore_rng_state(const nlohmann::json& state);

 private:
  bool is_minibatch() const;
  std::pair<ParamVector, double> propose();
  StepDiagnostics noisy_step(bool penalty, const ParamVector* forced, double forced_log_q);
  StepDiagnostics full_data_step(std::size_t target_n, const ParamVector* forced,
                                 double forced_log_q);
  StepDiagnostics finish(const ParamVector& proposed, StepDiagnostics diag, bool penalty);

  const MdnModel& model_;
  const SupervisedDataset& train_;
  ChainConfig cfg_;
  ParamVector current_;
  Rng proposal_rng_;
  Rng batch_rng_;
  Rng accept_rng_;

  ItemLogLikCache current_ll_;
  ItemLogLikCache proposed_ll_;
  double current_full_loss_ = 0.0;
  bool current_full_loss_valid_ = false;
  std::vector<double> current_grad_;
  std::vector<double> proposed_grad_;
};

struct RunOptions {
  /// When non-empty, the chain resumes from and periodically saves to this file.
  std::filesystem::path checkpoint;
  std::size_t checkpoint_every = 0;
  /// Stops after this many steps in total (for tests of resumption); 0 = run to the end.
  std::size_t stop_after = 0;
};

/// Runs cfg.n_steps steps, discards burn-in, keeps every thin-th state.
ChainRecord run_chain(const MdnModel& model, const ChainConfig& cfg,
                      const SupervisedDataset& train, const ParamVector& initial,
                      const RunOptions& options = {});

/// Chain file: JSON header line followed by the float64 samples and step log.
void write_chain_record(const std::filesystem::path& path, const MdnArchitecture& arch,
                        const ChainRecord& record, const nlohmann::json& extra_header);
ChainRecord read_chain_record(const std::filesystem::path& path, const MdnArchitecture& arch);

/// Full-batch Adam on batch_loss over `train`, for a fixed iteration count.
ParamVector pre_optimize(const MdnModel& model, const SupervisedDataset& train,
                         const PriorSpec& prior, const ParamVector& start,
                         std::size_t iterations, double learning_rate);

struct TuningResult {
  double step = 0.0;
  double acceptance = 0.0;
};

/// Adapts the random-walk std of a vanilla chain on log scale towards
/// `target_acceptance` over `rounds` short pilot runs. Used before, never
/// during, a measured chain.
TuningResult tune_proposal_step(const MdnModel& model, const SupervisedDataset& train,
                                const PriorSpec& prior, const ParamVector& start,
                                double initial_step, double target_acceptance,
                                std::size_t rounds, std::size_t steps_per_round,
                                std::uint64_t seed);

}  // namespace pbnn

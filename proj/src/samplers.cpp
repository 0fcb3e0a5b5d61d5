#include "pbnn/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "pbnn/errors.hpp"
#include "pbnn/io.hpp"

namespace pbnn {

using nlohmann::json;

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::kPbnn:
      return "pbnn";
    case SamplerKind::kVanilla:
      return "vanilla";
    case SamplerKind::kBatched:
      return "batched";
    case SamplerKind::kTempered:
      return "tempered";
    case SamplerKind::kSgld:
      return "sgld";
  }
  return "unknown";
}

SamplerKind sampler_from_string(const std::string& s) {
  for (SamplerKind k : {SamplerKind::kPbnn, SamplerKind::kVanilla, SamplerKind::kBatched,
                        SamplerKind::kTempered, SamplerKind::kSgld}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown sampler '" + s + "'");
}

std::string to_string(ProposalKind kind) {
  return kind == ProposalKind::kSymmetricGaussian ? "symmetric-gaussian" : "langevin-drift";
}

ProposalKind proposal_from_string(const std::string& s) {
  if (s == "symmetric-gaussian") return ProposalKind::kSymmetricGaussian;
  if (s == "langevin-drift") return ProposalKind::kLangevinDrift;
  throw ConfigError("unknown proposal kind '" + s + "'");
}

void ProposalSpec::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) throw ArgumentError("proposal step must be > 0");
}

void ChainConfig::validate(std::size_t train_size) const {
  if (thin < 1) throw ArgumentError("thin must be >= 1");
  if (burn_in >= n_steps) throw ArgumentError("burn_in must be < n_steps");
  if (retained_count() == 0) throw ArgumentError("thin leaves no samples after burn-in");
  prior.validate();
  if (sampler == SamplerKind::kSgld) {
    if (!(sgld_eta > 0.0)) throw ArgumentError("SGLD eta must be > 0");
    if (plan.batch_size < 1) throw ArgumentError("SGLD batch size must be >= 1");
  } else {
    proposal.validate();
  }
  if (sampler == SamplerKind::kPbnn || sampler == SamplerKind::kBatched) {
    plan.validate(train_size);
  }
  if ((sampler == SamplerKind::kTempered || sampler == SamplerKind::kSgld) && target_n < 1) {
    throw ArgumentError("target_N must be >= 1");
  }
}

json to_json(const ChainConfig& cfg) {
  return json{{"n_steps", cfg.n_steps},
              {"burn_in", cfg.burn_in},
              {"thin", cfg.thin},
              {"seed", cfg.seed},
              {"sampler", to_string(cfg.sampler)},
              {"batch_size", cfg.plan.batch_size},
              {"num_batches", cfg.plan.num_batches},
              {"batch_mode", to_string(cfg.plan.mode)},
              {"proposal", {{"kind", to_string(cfg.proposal.kind)}, {"step", cfg.proposal.step}}},
              {"prior_lambda", cfg.prior.lambda},
              {"target_n", cfg.target_n},
              {"sgld_eta", cfg.sgld_eta}};
}

ChainConfig chain_config_from_json(const json& j) {
  ChainConfig c;
  try {
    c.n_steps = j.value("n_steps", c.n_steps);
    c.burn_in = j.value("burn_in", c.burn_in);
    c.thin = j.value("thin", c.thin);
    c.seed = j.value("seed", c.seed);
    c.sampler = sampler_from_string(j.value("sampler", to_string(c.sampler)));
    c.plan.batch_size = j.value("batch_size", c.plan.batch_size);
    c.plan.num_batches = j.value("num_batches", c.plan.num_batches);
    c.plan.mode = batch_mode_from_string(j.value("batch_mode", to_string(c.plan.mode)));
    if (j.contains("proposal")) {
      const json& p = j.at("proposal");
      c.proposal.kind = proposal_from_string(p.value("kind", to_string(c.proposal.kind)));
      c.proposal.step = p.value("step", c.proposal.step);
    }
    c.prior.lambda = j.value("prior_lambda", c.prior.lambda);
    c.target_n = j.value("target_n", c.target_n);
    c.sgld_eta = j.value("sgld_eta", c.sgld_eta);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad chain config: ") + e.what());
  }
  return c;
}

double ChainRecord::acceptance_rate() const {
  return step_log.empty() ? 0.0
                          : static_cast<double>(accept_count) /
                                static_cast<double>(step_log.size());
}

double log_penalty_acceptance(const NoisyAcceptanceInputs& in) {
  const double log_a = in.log_q_ratio - in.delta - 0.5 * in.sigma2;
  if (std::isnan(log_a)) return -std::numeric_limits<double>::infinity();
  return std::min(0.0, log_a);
}

double penalty_acceptance(const NoisyAcceptanceInputs& in) {
  return std::exp(log_penalty_acceptance(in));
}

bool accept_move(double log_acceptance, double u) {
  if (log_acceptance >= 0.0) return true;
  return std::log(u) <= log_acceptance;
}

std::vector<double> langevin_update(std::span<const double> theta, std::span<const double> grad,
                                    double eta, std::span<const double> noise) {
  if (theta.size() != grad.size() || theta.size() != noise.size()) {
    throw ArgumentError("Langevin update operands differ in length");
  }
  const double scale = std::sqrt(2.0 * eta);
  std::vector<double> out(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    out[k] = theta[k] - eta * grad[k] + scale * noise[k];
  }
  return out;
}

double langevin_log_q_ratio(std::span<const double> current, std::span<const double> proposed,
                            std::span<const double> grad_current,
                            std::span<const double> grad_proposed, double eta) {
  // log N(b; a - eta g(a), 2 eta) = -|b - a + eta g(a)|^2 / (4 eta) + const
  double forward = 0.0;
  double backward = 0.0;
  for (std::size_t k = 0; k < current.size(); ++k) {
    const double f = proposed[k] - current[k] + eta * grad_current[k];
    const double b = current[k] - proposed[k] + eta * grad_proposed[k];
    forward += f * f;
    backward += b * b;
  }
  return (forward - backward) / (4.0 * eta);
}

LangevinProposal langevin_proposal(const ParamVector& current,
                                   std::span<const double> grad_current, double eta,
                                   const GradientFn& gradient, Rng& rng) {
  if (!(eta > 0.0)) throw ArgumentError("Langevin step must be > 0");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(current.size());
  for (double& e : noise) e = normal(rng);
  LangevinProposal p;
  p.proposed = ParamVector(langevin_update(current.values(), grad_current, eta, noise));
  p.grad_proposed = gradient(p.proposed);
  p.log_q_ratio = langevin_log_q_ratio(current.values(), p.proposed.values(), grad_current,
                                       p.grad_proposed, eta);
  return p;
}

Sampler::Sampler(const MdnModel& model, const SupervisedDataset& train, ChainConfig cfg,
                 ParamVector initial)
    : model_(model),
      train_(train),
      cfg_(std::move(cfg)),
      current_(std::move(initial)),
      proposal_rng_(make_stream(cfg_.seed, "proposal")),
      batch_rng_(make_stream(cfg_.seed, "batches")),
      accept_rng_(make_stream(cfg_.seed, "accept")),
      current_ll_(train.size()),
      proposed_ll_(train.size()) {
  cfg_.validate(train.size());
  if (current_.size() != model.param_count()) {
    throw ArgumentError("initial parameter vector does not match the model");
  }
}

bool Sampler::is_minibatch() const {
  return cfg_.sampler == SamplerKind::kPbnn || cfg_.sampler == SamplerKind::kBatched;
}

std::vector<double> Sampler::target_gradient(const ParamVector& theta) const {
  std::vector<std::size_t> all(train_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::size_t target = train_.size();
  if (is_minibatch()) target = cfg_.plan.batch_size;
  if (cfg_.sampler == SamplerKind::kTempered) target = cfg_.target_n;
  return weighted_loss_gradient(model_, theta, train_, all, cfg_.prior, target);
}

std::pair<ParamVector, double> Sampler::propose() {
  if (cfg_.proposal.kind == ProposalKind::kLangevinDrift) {
    if (current_grad_.empty()) current_grad_ = target_gradient(current_);
    LangevinProposal p = langevin_proposal(
        current_, current_grad_, cfg_.proposal.step,
        [this](const ParamVector& t) { return target_gradient(t); }, proposal_rng_);
    proposed_grad_ = std::move(p.grad_proposed);
    return {std::move(p.proposed), p.log_q_ratio};
  }
  std::normal_distribution<double> normal(0.0, cfg_.proposal.step);
  std::vector<double> next(current_.values().begin(), current_.values().end());
  for (double& v : next) v += normal(proposal_rng_);
  return {ParamVector(std::move(next)), 0.0};
}

StepDiagnostics Sampler::finish(const ParamVector& proposed, StepDiagnostics diag,
                                bool penalty) {
  if (!std::isfinite(diag.delta) || !std::isfinite(diag.chi2)) {
    throw ChainDivergedError("non-finite loss difference", nullptr);
  }
  diag.log_acceptance = log_penalty_acceptance(
      {diag.delta, penalty ? diag.chi2 : 0.0, diag.log_q_ratio});
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  diag.accepted = accept_move(diag.log_acceptance, uniform(accept_rng_));
  if (diag.accepted) {
    current_ = proposed;
    current_ll_.swap(proposed_ll_);
    current_grad_.swap(proposed_grad_);
  }
  proposed_grad_.clear();
  return diag;
}

StepDiagnostics Sampler::noisy_step(bool penalty, const ParamVector* forced,
                                    double forced_log_q) {
  ParamVector proposed;
  StepDiagnostics diag;
  if (forced) {
    proposed = *forced;
    diag.log_q_ratio = forced_log_q;
  } else {
    auto [p, lq] = propose();
    proposed = std::move(p);
    diag.log_q_ratio = lq;
  }
  const std::vector<IndexBatch> batches =
      draw_batch_indices(train_.size(), cfg_.plan, batch_rng_);
  proposed_ll_.reset();
  for (const IndexBatch& b : batches) {
    proposed_ll_.ensure(model_, proposed, train_, b);
    current_ll_.ensure(model_, current_, train_, b);
  }
  const LossDiffEstimate est =
      loss_diff_from_cache(proposed_ll_, current_ll_, batches, log_prior(proposed, cfg_.prior),
                           log_prior(current_, cfg_.prior), cfg_.plan.batch_size);
  diag.delta = est.delta;
  diag.chi2 = est.chi2;
  current_full_loss_valid_ = false;
  return finish(proposed, diag, penalty);
}

StepDiagnostics Sampler::full_data_step(std::size_t target_n, const ParamVector* forced,
                                        double forced_log_q) {
  ParamVector proposed;
  StepDiagnostics diag;
  if (forced) {
    proposed = *forced;
    diag.log_q_ratio = forced_log_q;
  } else {
    auto [p, lq] = propose();
    proposed = std::move(p);
    diag.log_q_ratio = lq;
  }
  if (!current_full_loss_valid_) {
    current_full_loss_ = weighted_loss(model_, current_, train_, cfg_.prior, target_n);
    current_full_loss_valid_ = true;
  }
  const double proposed_loss = weighted_loss(model_, proposed, train_, cfg_.prior, target_n);
  diag.delta = proposed_loss - current_full_loss_;
  diag = finish(proposed, diag, false);
  if (diag.accepted) current_full_loss_ = proposed_loss;
  // the item cache only tracks mini-batch samplers
  current_ll_.reset();
  return diag;
}

StepDiagnostics Sampler::pbnn_step() { return noisy_step(true, nullptr, 0.0); }
StepDiagnostics Sampler::batched_step() { return noisy_step(false, nullptr, 0.0); }
StepDiagnostics Sampler::vanilla_step() { return full_data_step(train_.size(), nullptr, 0.0); }
StepDiagnostics Sampler::tempered_step() { return full_data_step(cfg_.target_n, nullptr, 0.0); }

StepDiagnostics Sampler::sgld_step() {
  std::uniform_int_distribution<std::size_t> pick(0, train_.size() - 1);
  std::vector<std::size_t> batch(cfg_.plan.batch_size);
  for (std::size_t& i : batch) i = pick(batch_rng_);
  const std::vector<double> grad =
      weighted_loss_gradient(model_, current_, train_, batch, cfg_.prior, cfg_.target_n);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(current_.size());
  for (double& e : noise) e = normal(proposal_rng_);
  ParamVector next(langevin_update(current_.values(), grad, cfg_.sgld_eta, noise));
  if (!next.finite()) throw ChainDivergedError("SGLD update produced non-finite parameters", nullptr);
  current_ = std::move(next);
  current_full_loss_valid_ = false;
  current_ll_.reset();
  StepDiagnostics diag;
  diag.accepted = true;
  return diag;
}

StepDiagnostics Sampler::step() {
  switch (cfg_.sampler) {
    case SamplerKind::kPbnn:
      return pbnn_step();
    case SamplerKind::kBatched:
      return batched_step();
    case SamplerKind::kVanilla:
      return vanilla_step();
    case SamplerKind::kTempered:
      return tempered_step();
    case SamplerKind::kSgld:
      return sgld_step();
  }
  throw ArgumentError("unknown sampler");
}

StepDiagnostics Sampler::step_with_proposal(const ParamVector& proposed, double log_q_ratio) {
  if (proposed.size() != current_.size()) throw ArgumentError("proposal has the wrong length");
  switch (cfg_.sampler) {
    case SamplerKind::kPbnn:
      return noisy_step(true, &proposed, log_q_ratio);
    case SamplerKind::kBatched:
      return noisy_step(false, &proposed, log_q_ratio);
    case SamplerKind::kVanilla:
      return full_data_step(train_.size(), &proposed, log_q_ratio);
    case SamplerKind::kTempered:
      return full_data_step(cfg_.target_n, &proposed, log_q_ratio);
    case SamplerKind::kSgld:
      break;
  }
  throw ArgumentError("SGLD has no accept/reject step");
}

json Sampler::rng_state() const {
  return json{{"proposal", serialize_rng(proposal_rng_)},
              {"batches", serialize_rng(batch_rng_)},
              {"accept", serialize_rng(accept_rng_)}};
}

void Sampler::restore_rng_state(const json& state) {
  deserialize_rng(state.at("proposal").get<std::string>(), proposal_rng_);
  deserialize_rng(state.at("batches").get<std::string>(), batch_rng_);
  deserialize_rng(state.at("accept").get<std::string>(), accept_rng_);
}

namespace {

constexpr std::size_t kStepFields = 5;

void append_step_log(std::vector<double>& out, const std::vector<StepDiagnostics>& log) {
  for (const StepDiagnostics& d : log) {
    out.push_back(d.delta);
    out.push_back(d.chi2);
    out.push_back(d.log_q_ratio);
    out.push_back(d.log_acceptance);
    out.push_back(d.accepted ? 1.0 : 0.0);
  }
}

std::vector<StepDiagnostics> parse_step_log(std::span<const double> raw) {
  std::vector<StepDiagnostics> log(raw.size() / kStepFields);
  for (std::size_t t = 0; t < log.size(); ++t) {
    const double* r = raw.data() + t * kStepFields;
    log[t] = {r[0], r[1], r[2], r[3], r[4] != 0.0};
  }
  return log;
}

std::string config_hash(const ChainConfig& cfg) { return hex64(fnv1a64(to_json(cfg).dump())); }

void save_checkpoint(const std::filesystem::path& path, const MdnModel& model,
                     const ChainConfig& cfg, const Sampler& sampler, std::size_t next_step,
                     const ChainRecord& record) {
  const json header{{"format", "pbnn-chain-checkpoint"},
                    {"architecture", to_json(model.architecture())},
                    {"count", model.param_count()},
                    {"config", to_json(cfg)},
                    {"config_hash", config_hash(cfg)},
                    {"next_step", next_step},
                    {"accept_count", record.accept_count},
                    {"n_samples", record.samples.size()},
                    {"n_log", record.step_log.size()},
                    {"rng", sampler.rng_state()}};
  std::vector<double> payload(sampler.current().values().begin(),
                              sampler.current().values().end());
  for (const ParamVector& s : record.samples) {
    payload.insert(payload.end(), s.values().begin(), s.values().end());
  }
  append_step_log(payload, record.step_log);
  write_binary_block(path, header.dump(), payload);
}

}  // namespace

ChainRecord run_chain(const MdnModel& model, const ChainConfig& cfg,
                      const SupervisedDataset& train, const ParamVector& initial,
                      const RunOptions& options) {
  ChainRecord record;
  record.step_log.reserve(cfg.n_steps);
  std::size_t start = 0;
  ParamVector current = initial;
  json rng_state;

  if (!options.checkpoint.empty() && std::filesystem::exists(options.checkpoint)) {
    BinaryBlock block = read_binary_block(options.checkpoint);
    const json header = json::parse(block.header_json);
    if (header.at("config_hash") != config_hash(cfg)) {
      throw ConfigError("checkpoint " + options.checkpoint.string() +
                        " was written by a different chain configuration");
    }
    const std::size_t count = header.at("count");
    const std::size_t n_samples = header.at("n_samples");
    const std::size_t n_log = header.at("n_log");
    if (count != model.param_count() ||
        block.values.size() != count * (1 + n_samples) + kStepFields * n_log) {
      throw ConfigError("checkpoint payload does not match its header");
    }
    auto it = block.values.begin();
    current = ParamVector(std::vector<double>(it, it + static_cast<std::ptrdiff_t>(count)));
    it += static_cast<std::ptrdiff_t>(count);
    for (std::size_t s = 0; s < n_samples; ++s) {
      record.samples.emplace_back(std::vector<double>(it, it + static_cast<std::ptrdiff_t>(count)));
      it += static_cast<std::ptrdiff_t>(count);
    }
    record.step_log = parse_step_log(std::span<const double>(&*it, kStepFields * n_log));
    record.accept_count = header.at("accept_count");
    start = header.at("next_step");
    rng_state = header.at("rng");
  }

  Sampler sampler(model, train, cfg, std::move(current));
  if (!rng_state.is_null()) sampler.restore_rng_state(rng_state);

  for (std::size_t t = start; t < cfg.n_steps; ++t) {
    StepDiagnostics diag;
    try {
      diag = sampler.step();
    } catch (const ChainDivergedError& e) {
      throw ChainDivergedError(std::string(e.what()) + " at step " + std::to_string(t),
                               std::make_shared<const ChainRecord>(record));
    }
    record.step_log.push_back(diag);
    if (diag.accepted) ++record.accept_count;
    const std::size_t done = t + 1;
    if (done > cfg.burn_in && (done - cfg.burn_in) % cfg.thin == 0) {
      record.samples.push_back(sampler.current());
    }
    const bool stop = options.stop_after != 0 && done == options.stop_after;
    if (!options.checkpoint.empty() &&
        (stop || done == cfg.n_steps ||
         (options.checkpoint_every != 0 && done % options.checkpoint_every == 0))) {
      save_checkpoint(options.checkpoint, model, cfg, sampler, done, record);
    }
    if (stop) break;
  }
  return record;
}

void write_chain_record(const std::filesystem::path& path, const MdnArchitecture& arch,
                        const ChainRecord& record, const json& extra_header) {
  json header{{"format", "pbnn-chain"},
              {"architecture", to_json(arch)},
              {"count", arch.param_count()},
              {"n_samples", record.samples.size()},
              {"n_log", record.step_log.size()},
              {"accept_count", record.accept_count}};
  for (auto it = extra_header.begin(); it != extra_header.end(); ++it) header[it.key()] = *it;
  std::vector<double> payload;
  payload.reserve(record.samples.size() * arch.param_count() +
                  record.step_log.size() * kStepFields);
  for (const ParamVector& s : record.samples) {
    if (s.size() != arch.param_count()) throw ArgumentError("sample length mismatch");
    payload.insert(payload.end(), s.values().begin(), s.values().end());
  }
  append_step_log(payload, record.step_log);
  write_binary_block(path, header.dump(), payload);
}

ChainRecord read_chain_record(const std::filesystem::path& path, const MdnArchitecture& arch) {
  BinaryBlock block = read_binary_block(path);
  ChainRecord record;
  try {
    const json header = json::parse(block.header_json);
    if (header.at("format") != "pbnn-chain") throw ConfigError("not a chain file");
    if (architecture_from_json(header.at("architecture")) != arch) {
      throw ConfigError("chain architecture mismatch");
    }
    const std::size_t count = arch.param_count();
    const std::size_t n_samples = header.at("n_samples");
    const std::size_t n_log = header.at("n_log");
    if (block.values.size() != count * n_samples + kStepFields * n_log) {
      throw ConfigError("chain payload does not match its header");
    }
    for (std::size_t s = 0; s < n_samples; ++s) {
      auto first = block.values.begin() + static_cast<std::ptrdiff_t>(s * count);
      record.samples.emplace_back(
          std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count)));
    }
    record.step_log = parse_step_log(
        std::span<const double>(block.values).subspan(count * n_samples, kStepFields * n_log));
    record.accept_count = header.at("accept_count");
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": bad chain header: " + e.what());
  }
  return record;
}

ParamVector pre_optimize(const MdnModel& model, const SupervisedDataset& train,
                         const PriorSpec& prior, const ParamVector& start,
                         std::size_t iterations, double learning_rate) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  std::vector<std::size_t> all(train.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<double> theta(start.values().begin(), start.values().end());
  std::vector<double> m(theta.size(), 0.0);
  std::vector<double> v(theta.size(), 0.0);
  double b1 = 1.0;
  double b2 = 1.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const std::vector<double> g =
        weighted_loss_gradient(model, ParamVector(theta), train, all, prior, train.size());
    b1 *= kBeta1;
    b2 *= kBeta2;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g[k];
      v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g[k] * g[k];
      theta[k] -= learning_rate * (m[k] / (1.0 - b1)) / (std::sqrt(v[k] / (1.0 - b2)) + kEps);
    }
  }
  ParamVector out(std::move(theta));
  if (!out.finite()) throw ChainDivergedError("pre-optimization diverged", nullptr);
  return out;
}

TuningResult tune_proposal_step(const MdnModel& model, const SupervisedDataset& train,
                                const PriorSpec& prior, const ParamVector& start,
                                double initial_step, double target_acceptance,
                                std::size_t rounds, std::size_t steps_per_round,
                                std::uint64_t seed) {
  if (!(initial_step > 0.0)) throw ArgumentError("initial step must be > 0");
  if (rounds == 0 || steps_per_round == 0) throw ArgumentError("tuning needs at least one step");
  TuningResult result{initial_step, 0.0};
  ParamVector state = start;
  for (std::size_t r = 0; r < rounds; ++r) {
    ChainConfig cfg;
    cfg.sampler = SamplerKind::kVanilla;
    cfg.prior = prior;
    cfg.proposal = {ProposalKind::kSymmetricGaussian, result.step};
    cfg.n_steps = steps_per_round;
    cfg.burn_in = 0;
    cfg.thin = 1;
    cfg.seed = derive_seed(seed, "tuning-round-" + std::to_string(r));
    Sampler sampler(model, train, cfg, state);
    std::size_t accepted = 0;
    for (std::size_t t = 0; t < steps_per_round; ++t) accepted += sampler.step().accepted;
    state = sampler.current();
    result.acceptance = static_cast<double>(accepted) / static_cast<double>(steps_per_round);
    if (r + 1 < rounds) {
      // Robbins-Monro on log(step) with a decaying gain
      const double gain = 2.0 / std::sqrt(static_cast<double>(r + 1));
      result.step *= std::exp(gain * (result.acceptance - target_acceptance));
    }
  }
  return result;
}

}  // namespace pbnn

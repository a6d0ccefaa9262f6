#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "plcql/agent_policies.hpp"
#include "plcql/dataset.hpp"
#include "plcql/ensemble.hpp"
#include "plcql/env.hpp"
#include "plcql/par.hpp"
#include "plcql/par_policy.hpp"

namespace plcql {

enum class Variant { Plcql, FixedK, SpacqlEnum, NoUncertainty };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct TrainConfig {
    double gamma = 0.99;
    double tau = 0.005;
    double alpha = 1.0;
    std::vector<double> lambda; // empty -> uniform 1/n
    double temperature = 1.0;
    double clip_eps = 0.2;
    int ppo_epochs = 4;
    int ensemble_size = 10;
    int batch_size = 64;
    int iterations = 2000;
    double lr_q = 1e-3;
    double lr_pi = 3e-4;
    double lr_par = 3e-4;
    double lr_v = 1e-3;
    std::uint64_t seed = 0;
    Variant variant = Variant::Plcql;
    int fixed_k = 1;
    bool advantage_norm = true;
    bool use_target_policy_replacements = false;
    std::vector<int> hidden_sizes = {64, 64};
    int eval_every = 10;
    int eval_episodes = 20;
    int checkpoint_every = 0; // 0 = final checkpoint only

    /// Enforces the documented ranges; `n` is the environment agent count.
    void validate(int n) const;
};

struct IterationMetrics {
    long long iter = 0;
    double td_loss = 0.0;
    double cql_penalty = 0.0;
    double mean_q = 0.0;
    double mean_k = 0.0;
    double par_entropy = 0.0;
    double mean_w = 0.0;
    double mean_u_q = 0.0;
    double par_surrogate = 0.0;
    double v_loss = 0.0;
    double q_evals_per_transition = 0.0;
    double eval_return_mean = 0.0;
    double eval_return_std = 0.0;

    static std::string csv_header();
    std::string csv_row() const;
};

/// Target construction for one transition under the active variant.
struct TargetOutcome {
    double y = 0.0;
    bool has_bandit_datum = false;
    int k = 0;
    double k_log_prob = 0.0;
    double u_q = 0.0;
    double q1 = 0.0;
    double mean_k = 0.0; // sampled k, or the weight-averaged k for the enum variant
};

/// Wires the full iteration: batch sampling, per-transition PAR targets,
/// the ensemble TD + conservative step, Polyak updates, baseline fitting,
/// per-agent improvement, and the PPO update of the PAR policy.
class Trainer {
  public:
    Trainer(std::unique_ptr<Env> env, OfflineDataset dataset, TrainConfig cfg);

    IterationMetrics run_iteration();
    std::vector<IterationMetrics> run(const std::function<void(const IterationMetrics&)>& sink = {});

    /// Greedy rollouts on a fresh env clone; returns (mean, population std).
    std::pair<double, double> evaluate(int episodes, std::uint64_t eval_seed) const;

    /// Variant-dependent target for one transition; advances the target RNG
    /// stream and the ensemble evaluation counter.
    TargetOutcome variant_target(const Transition& tr);

    void save_checkpoints(const std::string& dir) const;
    void load_checkpoints(const std::string& dir);

    long long iteration() const { return iteration_; }
    long long non_terminal_processed() const { return non_terminal_processed_; }
    const TrainConfig& config() const { return cfg_; }
    const Env& env() const { return *env_; }
    const OfflineDataset& dataset() const { return dataset_; }
    QEnsemble& ensemble() { return *ensemble_; }
    AgentPolicySet& policies() { return *policies_; }
    ParPolicy& par_policy() { return *par_; }
    Baseline& baseline() { return *baseline_; }

  private:
    IterationMetrics make_metrics_row();

    TrainConfig cfg_;
    std::unique_ptr<Env> env_;
    OfflineDataset dataset_;
    ConservativeConfig cons_cfg_;

    std::unique_ptr<QEnsemble> ensemble_;
    std::unique_ptr<AgentPolicySet> policies_;
    std::unique_ptr<ParPolicy> par_;
    std::unique_ptr<Baseline> baseline_;

    std::vector<Optimizer> q_opts_;
    std::vector<Optimizer> pi_opts_;
    Optimizer par_opt_;
    Optimizer v_opt_;

    SeededRng batch_rng_;
    SeededRng target_rng_;
    std::uint64_t eval_seed_base_ = 0;

    long long iteration_ = 0;
    long long non_terminal_processed_ = 0;
    std::optional<std::pair<double, double>> last_eval_;
};

/// Greedy rollouts of a policy set on a fresh clone of the environment;
/// returns (mean, population std) over episodes.
std::pair<double, double> evaluate_policies(const Env& env, const AgentPolicySet& policies, int episodes,
                                            std::uint64_t eval_seed);

} // namespace plcql

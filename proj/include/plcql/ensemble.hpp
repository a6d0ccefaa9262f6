#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plcql/dataset.hpp"
#include "plcql/mlp.hpp"

namespace plcql {

class AgentPolicySet;

/// Joint evaluation of one bootstrap pair (s', a'): target-net minimum for
/// the Bellman target, online member values for uncertainty, and the online
/// member-1 value used by the bandit reward. Counts as ONE ensemble
/// evaluation in the cost instrumentation.
struct EnsembleEval {
    double min_target = 0.0;
    double u_q = 0.0;
    double q1 = 0.0;
};

/// Ensemble of J scalar Q-approximators over (state features ++ one-hot
/// joint action), with Polyak-averaged target copies. Uncertainty is the
/// population standard deviation of the online members.
class QEnsemble {
  public:
    QEnsemble(int ensemble_size, const DecMdpSpec& spec, const std::vector<int>& hidden_sizes, SeededRng& rng);

    int size() const { return static_cast<int>(online_.size()); }
    int input_dim() const { return input_dim_; }
    const DecMdpSpec& env_spec() const { return spec_; }

    std::vector<double> encode(std::span<const double> features, std::span<const int> joint) const;

    std::vector<double> q_all(std::span<const double> features, std::span<const int> joint) const;
    std::vector<double> q_all_target(std::span<const double> features, std::span<const int> joint) const;
    double q_member(int j, std::span<const double> features, std::span<const int> joint) const;
    double q_min_target(std::span<const double> features, std::span<const int> joint) const;
    double uncertainty(std::span<const double> features, std::span<const int> joint) const;

    /// One instrumented bootstrap evaluation; increments the eval counter.
    EnsembleEval evaluate_bootstrap(std::span<const double> features, std::span<const int> joint) const;
    std::uint64_t bootstrap_evals() const { return bootstrap_evals_; }
    void reset_bootstrap_evals() { bootstrap_evals_ = 0; }

    void polyak_targets(double tau);

    std::vector<Mlp>& online() { return online_; }
    const std::vector<Mlp>& online() const { return online_; }
    std::vector<Mlp>& target() { return target_; }
    const std::vector<Mlp>& target() const { return target_; }

    void save(const std::string& path, std::uint64_t rng_seed, long long step,
              const std::vector<Optimizer>* opts = nullptr) const;
    static QEnsemble load(const std::string& path, const DecMdpSpec& spec, std::vector<Optimizer>* opts = nullptr);

  private:
    QEnsemble() = default;

    DecMdpSpec spec_;
    int input_dim_ = 0;
    std::vector<Mlp> online_;
    std::vector<Mlp> target_;
    mutable std::uint64_t bootstrap_evals_ = 0;
};

/// CQL-style penalty configuration: overall scale alpha and per-agent
/// weights lambda (defaults to uniform 1/n).
struct ConservativeConfig {
    double alpha = 1.0;
    std::vector<double> lambda;

    static ConservativeConfig uniform(int n, double alpha);
    void validate(int n) const;
};

/// Counterfactual conservative penalty: for each agent, the gap between the
/// policy expectation of member-1 Q (exact sum over the agent's actions,
/// others anchored to the dataset) and the dataset Q, batch-averaged.
double conservative_penalty(const QEnsemble& ens, std::span<const Transition> batch, const AgentPolicySet& policies,
                            const ConservativeConfig& cfg);

struct CriticLoss {
    double td = 0.0;      // mean over batch of sum_j squared residuals
    double penalty = 0.0; // conservative penalty value
    double mean_q = 0.0;  // mean online member value at dataset (s, a)
    std::vector<GradientBundle> grads;
};

/// TD loss against fixed per-transition targets plus the conservative
/// penalty, with gradients for every online member. Targets are constants;
/// the penalty gradient flows into member 1 only.
CriticLoss critic_loss_and_grads(const QEnsemble& ens, std::span<const Transition> batch,
                                 std::span<const double> targets, const AgentPolicySet& policies,
                                 const ConservativeConfig& cfg);

} // namespace plcql

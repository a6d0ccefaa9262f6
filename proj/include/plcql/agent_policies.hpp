#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plcql/dataset.hpp"
#include "plcql/mlp.hpp"

namespace plcql {

class QEnsemble;

/// The n per-agent categorical policies (state features -> |A_i| logits)
/// with Polyak-averaged target copies.
class AgentPolicySet {
  public:
    AgentPolicySet(const DecMdpSpec& spec, const std::vector<int>& hidden_sizes, SeededRng& rng);

    int num_agents() const { return spec_.n; }
    const DecMdpSpec& env_spec() const { return spec_; }

    std::vector<double> probs(int agent, std::span<const double> features) const;
    std::vector<double> probs_target(int agent, std::span<const double> features) const;

    /// Sampled action, or argmax with lowest-index tie-break when greedy.
    int act(int agent, std::span<const double> features, SeededRng& rng) const;
    int act_greedy(int agent, std::span<const double> features) const;
    std::vector<int> act_joint(std::span<const double> features, SeededRng& rng) const;
    std::vector<int> act_joint_greedy(std::span<const double> features) const;

    /// One ascent step on E_{a_i ~ pi_i} Q1(s, a_i, a_{-i}) with the inner
    /// expectation computed exactly; returns the pre-step objective.
    double improve(int agent, const QEnsemble& ens, std::span<const Transition> batch, Optimizer& opt);

    void polyak_targets(double tau);

    std::vector<Mlp>& nets() { return nets_; }
    const std::vector<Mlp>& nets() const { return nets_; }
    std::vector<Mlp>& target_nets() { return targets_; }
    const std::vector<Mlp>& target_nets() const { return targets_; }

    void save(const std::string& dir, std::uint64_t rng_seed, long long step,
              const std::vector<Optimizer>* opts = nullptr) const;
    static AgentPolicySet load(const std::string& dir, const DecMdpSpec& spec, std::vector<Optimizer>* opts = nullptr);

  private:
    AgentPolicySet() = default;

    DecMdpSpec spec_;
    std::vector<Mlp> nets_;
    std::vector<Mlp> targets_;
};

} // namespace plcql

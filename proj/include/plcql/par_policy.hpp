#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plcql/mlp.hpp"

namespace plcql {

class QEnsemble;

/// Down-weighting law for unreliable value estimates:
/// w = sigmoid(-u_q * T) + 0.5, so w in (0.5, 1] with w(0) = 1 exactly and
/// strict decrease in both u_q and T for u_q > 0.
double uncertainty_weight(double u_q, double temperature);

/// Per-sample clipped surrogate: min(rho * adv, clip(rho, 1-eps, 1+eps) * adv).
double clipped_surrogate(double rho, double adv, double clip_eps);

/// Bandit reward for one PAR draw.
struct ParReward {
    double w = 0.0;
    double r_par = 0.0;
    int k = 0;
    double u_q = 0.0;
};

/// Contextual-bandit policy over subset sizes k in {1..n}, conditioned on
/// the bootstrap state. Holds a snapshot of the previous policy for ratio
/// computation and the uncertainty temperature.
class ParPolicy {
  public:
    ParPolicy(int n, int feature_dim, const std::vector<int>& hidden_sizes, double temperature, SeededRng& rng);

    int num_sizes() const { return net_.output_dim(); }
    double temperature() const { return temperature_; }

    std::vector<double> probs(std::span<const double> features) const;
    double log_prob(std::span<const double> features, int k) const;
    double entropy(std::span<const double> features) const;

    /// Draws k in {1..n}; log_prob is consistent with softmax(logits).
    std::pair<int, double> sample_k(std::span<const double> features, SeededRng& rng) const;
    /// Per-state mean of k under the current policy.
    double expected_k(std::span<const double> features) const;

    void refresh_old_snapshot() { old_net_ = net_; }

    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }
    const Mlp& old_net() const { return old_net_; }

    void save(const std::string& path, std::uint64_t rng_seed, long long step, const Optimizer* opt = nullptr) const;
    static ParPolicy load(const std::string& path, double temperature, Optimizer* opt = nullptr);

  private:
    ParPolicy() = default;

    Mlp net_;
    Mlp old_net_;
    double temperature_ = 1.0;
};

/// Scalar value baseline V(s') for the bandit advantage.
class Baseline {
  public:
    Baseline(int feature_dim, const std::vector<int>& hidden_sizes, SeededRng& rng);

    double value(std::span<const double> features) const;
    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }

    void save(const std::string& path, std::uint64_t rng_seed, long long step, const Optimizer* opt = nullptr) const;
    static Baseline load(const std::string& path, Optimizer* opt = nullptr);

  private:
    Baseline() = default;

    Mlp net_;
};

/// Bandit reward from the online ensemble: w * Q_1(s', a_par), with w from
/// the ensemble disagreement at the same input. Counts as one instrumented
/// bootstrap evaluation when it queries the ensemble.
ParReward par_reward(const QEnsemble& ens, std::span<const double> s_next, std::span<const int> a_par, int k,
                     double temperature);
/// Pure variant fed by an already-computed evaluation; used by the trainer
/// so each transition costs exactly one ensemble evaluation.
ParReward par_reward_from(double u_q, double q1, int k, double temperature);

struct BaselineDatum {
    std::vector<double> s_next;
    double r_par = 0.0;
};

/// One MSE gradient step; returns the pre-step loss.
double baseline_update(Baseline& baseline, std::span<const BaselineDatum> batch, Optimizer& opt);

struct PpoDatum {
    std::vector<double> s_next;
    int k = 0;
    double old_log_prob = 0.0;
    double r_par = 0.0;
    double v_frozen = 0.0; // baseline value recorded at sampling time
};

struct PpoConfig {
    double clip_eps = 0.2;
    int epochs = 4;
    bool normalize_advantages = true;
};

/// Ascends the clipped surrogate over the batch for the configured number
/// of epochs; advantages use the frozen baseline values; the old snapshot
/// is refreshed afterwards. Returns the post-update mean surrogate.
double ppo_update(ParPolicy& par, std::span<const PpoDatum> batch, const PpoConfig& cfg, Optimizer& opt);

} // namespace plcql

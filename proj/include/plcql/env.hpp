#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "plcql/rng.hpp"
#include "plcql/text_io.hpp"

namespace plcql {

/// Static description of a cooperative Dec-MDP: agent count, per-agent
/// action counts, the feature dimension exposed to learners, discount and
/// episode horizon.
struct DecMdpSpec {
    int n = 0;
    std::vector<int> action_counts;
    int feature_dim = 0;
    double gamma = 0.99;
    int horizon = 1;

    long long joint_action_count() const;
    /// Row-major encoding of a joint action tuple; inverse of decode_joint.
    long long encode_joint(std::span<const int> joint) const;
    std::vector<int> decode_joint(long long code) const;
    void validate_joint(std::span<const int> joint) const;
    std::uint64_t fingerprint(const std::string& kind) const;
};

struct EnvState {
    std::vector<double> features;
    std::vector<int> data; // environment-specific internals (positions, ...)
    int state_id = -1;     // >= 0 only for tabular environments
    int t = 0;
};

struct StepResult {
    EnvState next;
    double reward = 0.0;
    bool done = false;
};

/// Cloneable value-object environment. Each instance owns its RNG stream, so
/// independent clones replay identically and may roll out concurrently.
class Env {
  public:
    virtual ~Env() = default;
    virtual const DecMdpSpec& spec() const = 0;
    virtual std::string kind() const = 0;
    virtual EnvState reset() = 0;
    virtual StepResult step(const EnvState& state, std::span<const int> joint_action) = 0;
    virtual std::unique_ptr<Env> clone() const = 0;
    /// Restarts the internal RNG stream; used to make collection and
    /// evaluation deterministic for a caller-chosen seed.
    virtual void reseed(std::uint64_t seed) = 0;
};

/// One-shot cooperative matrix game: a single state, horizon 1, reward read
/// from a payoff tensor indexed by the joint action.
class MatrixGameEnv final : public Env {
  public:
    MatrixGameEnv(int n, int actions_per_agent, std::vector<double> payoff_flat);

    const DecMdpSpec& spec() const override { return spec_; }
    std::string kind() const override { return "matrix"; }
    EnvState reset() override;
    StepResult step(const EnvState& state, std::span<const int> joint_action) override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<MatrixGameEnv>(*this); }
    void reseed(std::uint64_t) override {}

    double payoff(std::span<const int> joint) const;
    /// Joint action with the highest payoff (first index on ties).
    std::vector<int> best_joint() const;

    /// Payoff 1 when all agents pick the same action, 0 otherwise.
    static std::vector<double> coordination_payoff(int n, int actions_per_agent);

  private:
    DecMdpSpec spec_;
    std::vector<double> payoff_;
};

/// Grid spread task: n agents cover n landmarks on a square grid. Team
/// reward is the negated sum of per-landmark min-agent Manhattan distances
/// minus a penalty per cell holding more than one agent. Reward is always
/// <= 0 and equals 0 exactly when every landmark is covered collision-free.
class GridSpreadEnv final : public Env {
  public:
    GridSpreadEnv(int n, int grid_side, int horizon, std::uint64_t seed, double collision_penalty = 1.0);

    const DecMdpSpec& spec() const override { return spec_; }
    std::string kind() const override { return "grid_spread"; }
    EnvState reset() override;
    StepResult step(const EnvState& state, std::span<const int> joint_action) override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<GridSpreadEnv>(*this); }
    void reseed(std::uint64_t seed) override { rng_ = SeededRng(seed); }

    int grid_side() const { return side_; }
    double collision_penalty() const { return collision_penalty_; }
    /// Largest per-step cost the reward can reach; |reward range| for an
    /// episode is horizon * max_step_cost().
    double max_step_cost() const;

    /// Test/scripting hook: build a state at explicit positions.
    /// Positions are (row, col) pairs, agents first then landmarks.
    EnvState state_from_positions(const std::vector<std::pair<int, int>>& agents,
                                  const std::vector<std::pair<int, int>>& landmarks, int t = 0) const;
    std::pair<int, int> agent_pos(const EnvState& s, int i) const;
    std::pair<int, int> landmark_pos(const EnvState& s, int i) const;
    double reward_at(const EnvState& s) const;

    static constexpr int kNumActions = 5; // stay, up, down, left, right

  private:
    std::vector<double> featurize(const std::vector<int>& data) const;

    DecMdpSpec spec_;
    int side_;
    double collision_penalty_;
    SeededRng rng_;
};

/// Exact small Dec-MDP held as dense tensors; the substrate for the oracle.
struct TabularDecMDP {
    int n = 0;
    std::vector<int> action_counts;
    int num_states = 0;
    std::vector<double> transitions; // [s][joint][s'] row-major
    std::vector<double> rewards;     // [s][joint]
    std::vector<double> initial;     // [s]
    double r_max = 0.0;

    long long joint_count() const;
    double p(int s, long long joint, int s_next) const;
    double r(int s, long long joint) const;
    void validate() const;

    void save(const std::string& path) const;
    static TabularDecMDP load(const std::string& path);
};

/// Seeded random instance: transition rows are Dirichlet(1,...,1) draws
/// (normalized Exp(1) variates) and rewards uniform in +-reward_scale.
TabularDecMDP random_decmdp(std::uint64_t seed, int n, int states, int actions_per_agent, double reward_scale);

/// Episode environment over a TabularDecMDP; features are the one-hot state.
class TabularEnv final : public Env {
  public:
    TabularEnv(TabularDecMDP mdp, int horizon, std::uint64_t seed, double gamma = 0.99);

    const DecMdpSpec& spec() const override { return spec_; }
    std::string kind() const override { return "tabular"; }
    EnvState reset() override;
    StepResult step(const EnvState& state, std::span<const int> joint_action) override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<TabularEnv>(*this); }
    void reseed(std::uint64_t seed) override { rng_ = SeededRng(seed); }

    const TabularDecMDP& mdp() const { return mdp_; }

  private:
    EnvState make_state(int s, int t) const;

    TabularDecMDP mdp_;
    DecMdpSpec spec_;
    SeededRng rng_;
};

/// Infinite-horizon discounted value iteration over joint actions; returns
/// the greedy deterministic joint action per state (first index on ties).
/// `allowed` optionally restricts the argmax to per-state joint-action sets.
std::vector<long long> optimal_joint_actions(const TabularDecMDP& mdp, double gamma,
                                             const std::vector<std::vector<long long>>* allowed = nullptr);

/// Per-agent probability tables pi_i[s][a_i]; the factored joint policy is
/// their product. Used by the oracle and the exact PAR operator.
struct ExactPolicy {
    std::vector<std::vector<std::vector<double>>> tables; // [agent][state][action]

    int num_agents() const { return static_cast<int>(tables.size()); }
    double prob(int agent, int state, int action) const { return tables[agent][state][action]; }
    double joint_prob(int state, std::span<const int> joint) const;
    void validate() const;

    static ExactPolicy uniform(const TabularDecMDP& mdp);
    static ExactPolicy random(const TabularDecMDP& mdp, SeededRng& rng);
    /// Deterministic policy from per-state joint actions.
    static ExactPolicy deterministic(const TabularDecMDP& mdp, const std::vector<long long>& joint_per_state);
};

} // namespace plcql

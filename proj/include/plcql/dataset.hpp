#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "plcql/env.hpp"
#include "plcql/rng.hpp"

namespace plcql {

/// One offline sample. Next joint actions are logged explicitly because the
/// PAR target anchors non-replaced agents to them. Terminal transitions have
/// no logged successor action; their a_next components are -1 and the done
/// flag excludes them from bootstrapping.
struct Transition {
    std::vector<double> s;
    std::vector<int> a;
    double r = 0.0;
    std::vector<double> s_next;
    std::vector<int> a_next;
    bool done = false;
    int state_id = -1;
    int next_state_id = -1;
};

struct DatasetMeta {
    std::uint64_t env_spec_hash = 0;
    std::string tier;
    std::string behaviour;
    int n = 0;
    std::vector<int> action_counts;
    int feature_dim = 0;
    std::uint64_t seed = 0;
    std::size_t size = 0;
    bool has_state_ids = false;
};

struct OfflineDataset {
    std::vector<Transition> transitions;
    DatasetMeta meta;

    std::size_t size() const { return transitions.size(); }
    /// Sum of rewards per episode, episodes delimited by done flags.
    std::vector<double> episode_returns() const;
};

/// Joint-action coverage statistics. joint_coverage is the fraction of the
/// joint-action space observed (averaged per state when state ids are
/// present, global otherwise); marginal_coverage is per-agent.
struct CoverageReport {
    double joint_coverage = 0.0;
    std::vector<double> marginal_coverage;
    long long distinct_joint_actions = 0;
    long long joint_action_space = 0;
    std::map<std::pair<int, long long>, long long> counts; // (state_id or -1, joint code) -> count
};

/// Behaviour policy: maps a state to a joint action, drawing from rng.
struct BehaviourPolicy {
    std::string description;
    std::function<std::vector<int>(const EnvState&, SeededRng&)> act;
};

BehaviourPolicy uniform_behaviour(const DecMdpSpec& spec);
/// Per-agent epsilon-greedy around a deterministic base joint policy: each
/// agent independently plays its base action with probability 1 - eps.
BehaviourPolicy eps_greedy_behaviour(const DecMdpSpec& spec,
                                     std::function<std::vector<int>(const EnvState&)> base, double eps,
                                     const std::string& base_name);

/// Deterministic base policies used by the quality tiers.
std::function<std::vector<int>(const EnvState&)> scripted_expert(const Env& env);

OfflineDataset collect(Env& env, const BehaviourPolicy& behaviour, int episodes, std::uint64_t seed);

enum class Tier { Expert, Medium, MediumReplay, Random };
Tier parse_tier(const std::string& name);
std::string tier_name(Tier tier);

/// Tiered collection: expert = eps-greedy(0.05) around the scripted/exact
/// optimum, medium = eps-greedy(0.4), random = uniform, medium_replay =
/// equal thirds collected at eps in {0.8, 0.6, 0.4}.
OfflineDataset make_tier(Env& env, Tier tier, int size, std::uint64_t seed);

CoverageReport coverage(const OfflineDataset& ds);

void save_dataset(const OfflineDataset& ds, const std::string& path);
OfflineDataset load_dataset(const std::string& path);

} // namespace plcql

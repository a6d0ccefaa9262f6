#include "plcql/agent_policies.hpp"

#include <algorithm>
#include <stdexcept>

#include "plcql/checkpoint.hpp"
#include "plcql/ensemble.hpp"
#include "plcql/errors.hpp"

namespace plcql {

AgentPolicySet::AgentPolicySet(const DecMdpSpec& spec, const std::vector<int>& hidden_sizes, SeededRng& rng)
    : spec_(spec) {
    for (int i = 0; i < spec.n; ++i) {
        std::vector<int> sizes;
        sizes.push_back(spec.feature_dim);
        sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
        sizes.push_back(spec.action_counts[static_cast<std::size_t>(i)]);
        nets_.push_back(Mlp::init(sizes, rng));
        targets_.push_back(nets_.back());
    }
}

std::vector<double> AgentPolicySet::probs(int agent, std::span<const double> features) const {
    if (agent < 0 || agent >= spec_.n) throw std::invalid_argument("AgentPolicySet: bad agent index");
    return softmax(forward(nets_[static_cast<std::size_t>(agent)], features));
}

std::vector<double> AgentPolicySet::probs_target(int agent, std::span<const double> features) const {
    if (agent < 0 || agent >= spec_.n) throw std::invalid_argument("AgentPolicySet: bad agent index");
    return softmax(forward(targets_[static_cast<std::size_t>(agent)], features));
}

int AgentPolicySet::act(int agent, std::span<const double> features, SeededRng& rng) const {
    return rng.categorical(probs(agent, features));
}

int AgentPolicySet::act_greedy(int agent, std::span<const double> features) const {
    const auto p = probs(agent, features);
    // Lowest index wins ties so greedy evaluation is deterministic.
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<int> AgentPolicySet::act_joint(std::span<const double> features, SeededRng& rng) const {
    std::vector<int> joint(static_cast<std::size_t>(spec_.n));
    for (int i = 0; i < spec_.n; ++i) joint[static_cast<std::size_t>(i)] = act(i, features, rng);
    return joint;
}

std::vector<int> AgentPolicySet::act_joint_greedy(std::span<const double> features) const {
    std::vector<int> joint(static_cast<std::size_t>(spec_.n));
    for (int i = 0; i < spec_.n; ++i) joint[static_cast<std::size_t>(i)] = act_greedy(i, features);
    return joint;
}

double AgentPolicySet::improve(int agent, const QEnsemble& ens, std::span<const Transition> batch, Optimizer& opt) {
    if (agent < 0 || agent >= spec_.n) throw std::invalid_argument("AgentPolicySet::improve: bad agent index");
    if (batch.empty()) throw std::invalid_argument("AgentPolicySet::improve: empty batch");

    Mlp& net = nets_[static_cast<std::size_t>(agent)];
    const int actions = spec_.action_counts[static_cast<std::size_t>(agent)];
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    double objective = 0.0;
    GradientBundle grads = GradientBundle::zeros_like(net);
    for (const auto& tr : batch) {
        ForwardCache cache;
        const auto logits = forward(net, tr.s, cache);
        const auto p = softmax(logits);
        std::vector<double> q_vals(static_cast<std::size_t>(actions));
        std::vector<int> joint = tr.a;
        double expect = 0.0;
        for (int a = 0; a < actions; ++a) {
            joint[static_cast<std::size_t>(agent)] = a;
            q_vals[static_cast<std::size_t>(a)] = ens.q_member(0, tr.s, joint);
            expect += p[static_cast<std::size_t>(a)] * q_vals[static_cast<std::size_t>(a)];
        }
        objective += expect * inv_b;
        // d/dz_b of sum_a softmax(z)_a q_a = p_b (q_b - E_p[q]).
        std::vector<double> upstream(static_cast<std::size_t>(actions));
        for (int a = 0; a < actions; ++a)
            upstream[static_cast<std::size_t>(a)] =
                p[static_cast<std::size_t>(a)] * (q_vals[static_cast<std::size_t>(a)] - expect) * inv_b;
        backward_accumulate(net, cache, upstream, grads);
    }
    grads.scale(-1.0); // ascent
    apply_gradients(net, opt, grads);
    return objective;
}

void AgentPolicySet::polyak_targets(double tau) {
    for (std::size_t i = 0; i < nets_.size(); ++i) polyak(targets_[i], nets_[i], tau);
}

void AgentPolicySet::save(const std::string& dir, std::uint64_t rng_seed, long long step,
                          const std::vector<Optimizer>* opts) const {
    for (int i = 0; i < spec_.n; ++i) {
        TextDoc doc = make_checkpoint("agent_policy_" + std::to_string(i), rng_seed, step);
        write_net(doc, "online", nets_[static_cast<std::size_t>(i)]);
        write_net(doc, "target", targets_[static_cast<std::size_t>(i)]);
        if (opts) write_optimizer(doc, "opt", (*opts)[static_cast<std::size_t>(i)], nets_[static_cast<std::size_t>(i)]);
        doc.save(dir + "/agent_policy_" + std::to_string(i) + ".txt");
    }
}

AgentPolicySet AgentPolicySet::load(const std::string& dir, const DecMdpSpec& spec, std::vector<Optimizer>* opts) {
    AgentPolicySet set;
    set.spec_ = spec;
    for (int i = 0; i < spec.n; ++i) {
        const std::string path = dir + "/agent_policy_" + std::to_string(i) + ".txt";
        TextDoc doc = open_checkpoint(path, "agent_policy_" + std::to_string(i));
        set.nets_.push_back(read_net(doc, "online"));
        set.targets_.push_back(read_net(doc, "target"));
        if (set.nets_.back().output_dim() != spec.action_counts[static_cast<std::size_t>(i)])
            throw IoError("agent policy checkpoint head size does not match the environment");
        if (opts) opts->push_back(read_optimizer(doc, "opt", set.nets_.back()));
    }
    return set;
}

} // namespace plcql

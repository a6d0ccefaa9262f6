#include "plcql/par.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace plcql {

std::vector<int> sample_subset(int n, int k, SeededRng& rng) {
    if (k < 1 || k > n) throw std::invalid_argument("sample_subset: need 1 <= k <= n");
    // Partial Fisher-Yates: the first k entries of a uniform permutation
    // form a uniform unordered k-subset.
    std::vector<int> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
        const int j = i + rng.uniform_int(n - i);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    std::vector<int> subset(pool.begin(), pool.begin() + k);
    std::sort(subset.begin(), subset.end());
    return subset;
}

std::vector<int> construct_par_action(std::span<const int> a_next, const ParDecision& decision) {
    if (static_cast<int>(decision.subset.size()) != decision.k ||
        decision.replacements.size() != decision.subset.size())
        throw std::invalid_argument("construct_par_action: inconsistent decision");
    std::vector<int> out(a_next.begin(), a_next.end());
    for (std::size_t i = 0; i < decision.subset.size(); ++i) {
        const int idx = decision.subset[i];
        if (idx < 0 || idx >= static_cast<int>(out.size()))
            throw std::invalid_argument("construct_par_action: agent index out of range");
        out[static_cast<std::size_t>(idx)] = decision.replacements[i];
    }
    return out;
}

ParTarget par_target(const QEnsemble& ens, const AgentPolicySet& policies, const ParPolicy& par,
                     const Transition& tr, SeededRng& rng, const ParTargetOptions& opts) {
    if (tr.done) throw std::invalid_argument("par_target: terminal transition has no bootstrap (use y = r)");
    const int n = ens.env_spec().n;

    ParTarget out;
    if (opts.forced_k > 0) {
        if (opts.forced_k > n) throw std::invalid_argument("par_target: forced k exceeds agent count");
        out.decision.k = opts.forced_k;
        out.k_log_prob = par.log_prob(tr.s_next, opts.forced_k);
    } else {
        const auto [k, log_prob] = par.sample_k(tr.s_next, rng);
        out.decision.k = k;
        out.k_log_prob = log_prob;
    }
    out.decision.subset = sample_subset(n, out.decision.k, rng);
    out.decision.replacements.reserve(out.decision.subset.size());
    for (int idx : out.decision.subset) {
        const auto probs = opts.use_target_policies ? policies.probs_target(idx, tr.s_next)
                                                    : policies.probs(idx, tr.s_next);
        out.decision.replacements.push_back(rng.categorical(probs));
    }
    out.a_par = construct_par_action(tr.a_next, out.decision);

    const EnsembleEval eval = ens.evaluate_bootstrap(tr.s_next, out.a_par);
    out.y = tr.r + opts.gamma * eval.min_target;
    out.u_q = eval.u_q;
    out.q1 = eval.q1;
    return out;
}

namespace {

struct JointIter {
    const TabularDecMDP& mdp;
    DecMdpSpec spec;

    explicit JointIter(const TabularDecMDP& m) : mdp(m) {
        spec.n = m.n;
        spec.action_counts = m.action_counts;
    }
};

// Expected Q at s_next under the size-k PAR distribution: agents in a
// uniform k-subset draw from pi, the rest from mu.
double par_expectation(const TabularDecMDP& mdp, const DecMdpSpec& spec, std::span<const double> q_table,
                       const ExactPolicy& pol, const ExactPolicy& beh, int k, int s_next) {
    const int n = mdp.n;
    const long long ja = mdp.joint_count();
    std::vector<int> choose(static_cast<std::size_t>(k));
    std::iota(choose.begin(), choose.end(), 0);

    double total = 0.0;
    long long subset_count = 0;
    // Enumerate k-subsets in lexicographic order.
    while (true) {
        subset_count += 1;
        std::vector<bool> replaced(static_cast<std::size_t>(n), false);
        for (int idx : choose) replaced[static_cast<std::size_t>(idx)] = true;
        double subset_sum = 0.0;
        for (long long code = 0; code < ja; ++code) {
            const auto joint = spec.decode_joint(code);
            double w = 1.0;
            for (int i = 0; i < n; ++i) {
                const int a = joint[static_cast<std::size_t>(i)];
                w *= replaced[static_cast<std::size_t>(i)] ? pol.prob(i, s_next, a) : beh.prob(i, s_next, a);
                if (w == 0.0) break;
            }
            if (w != 0.0)
                subset_sum += w * q_table[static_cast<std::size_t>(s_next) * static_cast<std::size_t>(ja) +
                                          static_cast<std::size_t>(code)];
        }
        total += subset_sum;

        int pos = k - 1;
        while (pos >= 0 && choose[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
        if (pos < 0) break;
        choose[static_cast<std::size_t>(pos)] += 1;
        for (int p = pos + 1; p < k; ++p) choose[static_cast<std::size_t>(p)] = choose[static_cast<std::size_t>(p - 1)] + 1;
    }
    return total / static_cast<double>(subset_count);
}

void check_oracle_guard(const TabularDecMDP& mdp) {
    const long long entries = static_cast<long long>(mdp.num_states) * mdp.joint_count() * mdp.num_states;
    if (entries > 1'000'000) throw std::invalid_argument("exact operator: instance exceeds the 1e6-entry size guard");
}

} // namespace

std::vector<double> exact_operator_apply(const TabularDecMDP& mdp, std::span<const double> q_table,
                                         const ExactPolicy& policies, const ExactPolicy& behaviour, int k,
                                         double gamma) {
    check_oracle_guard(mdp);
    if (k < 1 || k > mdp.n) throw std::invalid_argument("exact_operator_apply: need 1 <= k <= n");
    const long long ja = mdp.joint_count();
    if (static_cast<long long>(q_table.size()) != static_cast<long long>(mdp.num_states) * ja)
        throw std::invalid_argument("exact_operator_apply: Q table size mismatch");
    DecMdpSpec spec;
    spec.n = mdp.n;
    spec.action_counts = mdp.action_counts;

    // The successor expectation is (s, a)-independent; precompute per s'.
    std::vector<double> next_value(static_cast<std::size_t>(mdp.num_states));
    for (int sn = 0; sn < mdp.num_states; ++sn)
        next_value[static_cast<std::size_t>(sn)] = par_expectation(mdp, spec, q_table, policies, behaviour, k, sn);

    std::vector<double> out(q_table.size());
    for (int s = 0; s < mdp.num_states; ++s) {
        for (long long a = 0; a < ja; ++a) {
            double backup = mdp.r(s, a);
            for (int sn = 0; sn < mdp.num_states; ++sn)
                backup += gamma * mdp.p(s, a, sn) * next_value[static_cast<std::size_t>(sn)];
            out[static_cast<std::size_t>(s) * static_cast<std::size_t>(ja) + static_cast<std::size_t>(a)] = backup;
        }
    }
    return out;
}

std::vector<double> exact_mixture_operator_apply(const TabularDecMDP& mdp, std::span<const double> q_table,
                                                 const ExactPolicy& policies, const ExactPolicy& behaviour,
                                                 const std::vector<std::vector<double>>& k_dist_per_state,
                                                 double gamma) {
    check_oracle_guard(mdp);
    const long long ja = mdp.joint_count();
    if (static_cast<long long>(q_table.size()) != static_cast<long long>(mdp.num_states) * ja)
        throw std::invalid_argument("exact_mixture_operator_apply: Q table size mismatch");
    if (static_cast<int>(k_dist_per_state.size()) != mdp.num_states)
        throw std::invalid_argument("exact_mixture_operator_apply: need a k-distribution per state");
    DecMdpSpec spec;
    spec.n = mdp.n;
    spec.action_counts = mdp.action_counts;

    std::vector<double> next_value(static_cast<std::size_t>(mdp.num_states), 0.0);
    for (int sn = 0; sn < mdp.num_states; ++sn) {
        const auto& dist = k_dist_per_state[static_cast<std::size_t>(sn)];
        if (static_cast<int>(dist.size()) != mdp.n)
            throw std::invalid_argument("exact_mixture_operator_apply: k-distribution must have n entries");
        double mix = 0.0;
        for (int k = 1; k <= mdp.n; ++k) {
            const double w = dist[static_cast<std::size_t>(k - 1)];
            if (w == 0.0) continue;
            mix += w * par_expectation(mdp, spec, q_table, policies, behaviour, k, sn);
        }
        next_value[static_cast<std::size_t>(sn)] = mix;
    }

    std::vector<double> out(q_table.size());
    for (int s = 0; s < mdp.num_states; ++s) {
        for (long long a = 0; a < ja; ++a) {
            double backup = mdp.r(s, a);
            for (int sn = 0; sn < mdp.num_states; ++sn)
                backup += gamma * mdp.p(s, a, sn) * next_value[static_cast<std::size_t>(sn)];
            out[static_cast<std::size_t>(s) * static_cast<std::size_t>(ja) + static_cast<std::size_t>(a)] = backup;
        }
    }
    return out;
}

} // namespace plcql

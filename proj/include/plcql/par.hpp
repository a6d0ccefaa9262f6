#pragma once

#include <span>
#include <vector>

#include "plcql/agent_policies.hpp"
#include "plcql/dataset.hpp"
#include "plcql/ensemble.hpp"
#include "plcql/env.hpp"
#include "plcql/par_policy.hpp"
#include "plcql/rng.hpp"

namespace plcql {

/// One partial-replacement choice: subset size k, the k distinct agent
/// indices, and the policy-sampled replacement actions.
struct ParDecision {
    int k = 0;
    std::vector<int> subset;
    std::vector<int> replacements;
};

/// Bellman target built from one PAR draw. a_par agrees with the logged
/// next action outside the subset and with the replacements inside it.
struct ParTarget {
    double y = 0.0;
    ParDecision decision;
    double u_q = 0.0;
    std::vector<int> a_par;
    double q1 = 0.0;        // online member-1 value at (s', a_par)
    double k_log_prob = 0.0; // log pi_par(k | s') at sampling time
};

/// Uniform draw over all C(n, k) subsets; returned indices are sorted.
std::vector<int> sample_subset(int n, int k, SeededRng& rng);

/// Pure: copies a_next and overwrites the subset components.
std::vector<int> construct_par_action(std::span<const int> a_next, const ParDecision& decision);

struct ParTargetOptions {
    double gamma = 0.99;
    /// Replacements come from current policies per default; target copies
    /// are available as an ablation switch.
    bool use_target_policies = false;
    /// Forces k instead of sampling from the PAR policy (fixed-k variants).
    int forced_k = 0;
};

/// Full PAR target for one non-terminal transition: samples k (unless
/// forced), a uniform subset and policy replacements, then performs exactly
/// one instrumented ensemble evaluation of the single replaced joint action.
ParTarget par_target(const QEnsemble& ens, const AgentPolicySet& policies, const ParPolicy& par,
                     const Transition& tr, SeededRng& rng, const ParTargetOptions& opts);

/// Exact PAR Bellman backup on a tabular instance:
///   (T_k Q)(s, a) = R(s, a)
///     + gamma * E_{s'} E_{|c|=k} E_{a'_c ~ pi, a'_{-c} ~ mu} Q(s', a').
/// Expectations over subsets, replacements and anchored actions are
/// enumerated exactly. Q tables are indexed [s * joint_count + joint].
std::vector<double> exact_operator_apply(const TabularDecMDP& mdp, std::span<const double> q_table,
                                         const ExactPolicy& policies, const ExactPolicy& behaviour, int k,
                                         double gamma);

/// Mixture operator: per-state k-distributions from the PAR policy weight
/// the size-k backups inside the successor expectation.
std::vector<double> exact_mixture_operator_apply(const TabularDecMDP& mdp, std::span<const double> q_table,
                                                 const ExactPolicy& policies, const ExactPolicy& behaviour,
                                                 const std::vector<std::vector<double>>& k_dist_per_state,
                                                 double gamma);

} // namespace plcql

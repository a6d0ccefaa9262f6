#include "plcql/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "plcql/agent_policies.hpp"
#include "plcql/par.hpp"

namespace plcql {

namespace {

void check_guard(const TabularDecMDP& mdp, double gamma) {
    const long long entries = static_cast<long long>(mdp.num_states) * mdp.joint_count() * mdp.num_states;
    if (entries > 1'000'000) throw std::invalid_argument("oracle: instance exceeds the 1e6-entry size guard");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("oracle: gamma must be in [0, 1)");
}

/// Dense solve of A x = b by Gaussian elimination with partial pivoting.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t row = col + 1; row < n; ++row)
            if (std::abs(a[row * n + col]) > std::abs(a[pivot * n + col])) pivot = row;
        if (std::abs(a[pivot * n + col]) < 1e-300) throw std::runtime_error("solve_linear: singular system");
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
            std::swap(b[col], b[pivot]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (std::size_t row = col + 1; row < n; ++row) {
            const double f = a[row * n + col] * inv;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[row * n + c] -= f * a[col * n + c];
            b[row] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t row = n; row-- > 0;) {
        double sum = b[row];
        for (std::size_t c = row + 1; c < n; ++c) sum -= a[row * n + c] * x[c];
        x[row] = sum / a[row * n + row];
    }
    return x;
}

struct JointPolicyOnState {
    std::vector<double> probs; // over joint codes
};

std::vector<JointPolicyOnState> joint_tables(const TabularDecMDP& mdp, const ExactPolicy& pol) {
    DecMdpSpec spec;
    spec.n = mdp.n;
    spec.action_counts = mdp.action_counts;
    const long long ja = mdp.joint_count();
    std::vector<JointPolicyOnState> out(static_cast<std::size_t>(mdp.num_states));
    for (int s = 0; s < mdp.num_states; ++s) {
        auto& row = out[static_cast<std::size_t>(s)].probs;
        row.resize(static_cast<std::size_t>(ja));
        for (long long code = 0; code < ja; ++code) {
            const auto joint = spec.decode_joint(code);
            row[static_cast<std::size_t>(code)] = pol.joint_prob(s, joint);
        }
    }
    return out;
}

} // namespace

PolicyEvalResult exact_policy_eval(const TabularDecMDP& mdp, const ExactPolicy& policy, double gamma) {
    check_guard(mdp, gamma);
    policy.validate();
    const long long ja = mdp.joint_count();
    const int S = mdp.num_states;
    const auto joint = joint_tables(mdp, policy);

    // V = R_pi + gamma P_pi V  =>  (I - gamma P_pi) V = R_pi.
    std::vector<double> a(static_cast<std::size_t>(S) * static_cast<std::size_t>(S), 0.0);
    std::vector<double> b(static_cast<std::size_t>(S), 0.0);
    for (int s = 0; s < S; ++s) {
        a[static_cast<std::size_t>(s) * static_cast<std::size_t>(S) + static_cast<std::size_t>(s)] = 1.0;
        for (long long code = 0; code < ja; ++code) {
            const double pi_a = joint[static_cast<std::size_t>(s)].probs[static_cast<std::size_t>(code)];
            if (pi_a == 0.0) continue;
            b[static_cast<std::size_t>(s)] += pi_a * mdp.r(s, code);
            for (int sn = 0; sn < S; ++sn)
                a[static_cast<std::size_t>(s) * static_cast<std::size_t>(S) + static_cast<std::size_t>(sn)] -=
                    gamma * pi_a * mdp.p(s, code, sn);
        }
    }
    PolicyEvalResult result;
    result.v = solve_linear(a, b);

    double residual = 0.0;
    for (int s = 0; s < S; ++s) {
        double rhs = 0.0;
        for (long long code = 0; code < ja; ++code) {
            const double pi_a = joint[static_cast<std::size_t>(s)].probs[static_cast<std::size_t>(code)];
            if (pi_a == 0.0) continue;
            double backup = mdp.r(s, code);
            for (int sn = 0; sn < S; ++sn) backup += gamma * mdp.p(s, code, sn) * result.v[static_cast<std::size_t>(sn)];
            rhs += pi_a * backup;
        }
        residual = std::max(residual, std::abs(rhs - result.v[static_cast<std::size_t>(s)]));
    }
    result.residual = residual;
    if (residual > 1e-10) throw std::runtime_error("exact_policy_eval: residual above 1e-10");

    result.q.resize(static_cast<std::size_t>(S) * static_cast<std::size_t>(ja));
    for (int s = 0; s < S; ++s) {
        for (long long code = 0; code < ja; ++code) {
            double q = mdp.r(s, code);
            for (int sn = 0; sn < S; ++sn) q += gamma * mdp.p(s, code, sn) * result.v[static_cast<std::size_t>(sn)];
            result.q[static_cast<std::size_t>(s) * static_cast<std::size_t>(ja) + static_cast<std::size_t>(code)] = q;
        }
    }
    return result;
}

double tv(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("tv: distributions must share a support size");
    double sp = 0.0, sq = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) throw std::invalid_argument("tv: negative probability");
        sp += p[i];
        sq += q[i];
        acc += std::abs(p[i] - q[i]);
    }
    if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
        throw std::invalid_argument("tv: inputs must be probability distributions");
    return 0.5 * acc;
}

double tv_bar(const ExactPolicy& pi, const ExactPolicy& mu) {
    if (pi.num_agents() != mu.num_agents()) throw std::invalid_argument("tv_bar: agent count mismatch");
    const int n = pi.num_agents();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double worst = 0.0;
        for (std::size_t s = 0; s < pi.tables[static_cast<std::size_t>(i)].size(); ++s)
            worst = std::max(worst, tv(pi.tables[static_cast<std::size_t>(i)][s], mu.tables[static_cast<std::size_t>(i)][s]));
        total += worst;
    }
    return total / static_cast<double>(n);
}

FqiResult fqi_fixed_point(const TabularDecMDP& mdp, const ExactPolicy& pi, const ExactPolicy& mu,
                          const std::vector<std::vector<double>>& k_dist_per_state, double gamma, double tol) {
    check_guard(mdp, gamma);
    FqiResult result;
    result.q.assign(static_cast<std::size_t>(mdp.num_states * mdp.joint_count()), 0.0);
    const int max_iters = 100000;
    for (int it = 0; it < max_iters; ++it) {
        auto next = exact_mixture_operator_apply(mdp, result.q, pi, mu, k_dist_per_state, gamma);
        double change = 0.0;
        for (std::size_t i = 0; i < next.size(); ++i) change = std::max(change, std::abs(next[i] - result.q[i]));
        result.q = std::move(next);
        result.iterations = it + 1;
        result.residual = change;
        if (change <= tol) return result;
    }
    throw std::runtime_error("fqi_fixed_point: did not reach the residual tolerance");
}

std::vector<double> discounted_occupancy(const TabularDecMDP& mdp, const ExactPolicy& pi, double gamma) {
    check_guard(mdp, gamma);
    const int S = mdp.num_states;
    const long long ja = mdp.joint_count();
    const auto joint = joint_tables(mdp, pi);

    // d = (1 - gamma) rho0 + gamma P_pi^T d  =>  (I - gamma P_pi^T) d = (1 - gamma) rho0.
    std::vector<double> a(static_cast<std::size_t>(S) * static_cast<std::size_t>(S), 0.0);
    std::vector<double> b(static_cast<std::size_t>(S), 0.0);
    for (int s = 0; s < S; ++s) {
        a[static_cast<std::size_t>(s) * static_cast<std::size_t>(S) + static_cast<std::size_t>(s)] += 1.0;
        b[static_cast<std::size_t>(s)] = (1.0 - gamma) * mdp.initial[static_cast<std::size_t>(s)];
    }
    for (int s = 0; s < S; ++s) {
        for (long long code = 0; code < ja; ++code) {
            const double pi_a = joint[static_cast<std::size_t>(s)].probs[static_cast<std::size_t>(code)];
            if (pi_a == 0.0) continue;
            for (int sn = 0; sn < S; ++sn)
                a[static_cast<std::size_t>(sn) * static_cast<std::size_t>(S) + static_cast<std::size_t>(s)] -=
                    gamma * pi_a * mdp.p(s, code, sn);
        }
    }
    auto d = solve_linear(a, b);
    double sum = 0.0;
    for (double v : d) sum += v;
    for (double& v : d) v /= sum; // clean tiny numerical drift
    return d;
}

ExactPolicy optimal_in_support_policy(const TabularDecMDP& mdp, const ExactPolicy& mu, double gamma) {
    check_guard(mdp, gamma);
    DecMdpSpec spec;
    spec.n = mdp.n;
    spec.action_counts = mdp.action_counts;
    const long long ja = mdp.joint_count();

    std::vector<std::vector<long long>> allowed(static_cast<std::size_t>(mdp.num_states));
    for (int s = 0; s < mdp.num_states; ++s) {
        for (long long code = 0; code < ja; ++code) {
            const auto joint = spec.decode_joint(code);
            if (mu.joint_prob(s, joint) > 0.0) allowed[static_cast<std::size_t>(s)].push_back(code);
        }
        if (allowed[static_cast<std::size_t>(s)].empty())
            throw std::invalid_argument("optimal_in_support_policy: behaviour support is empty at a state");
    }
    const auto greedy = optimal_joint_actions(mdp, gamma, &allowed);
    return ExactPolicy::deterministic(mdp, greedy);
}

BoundReport check_bound(const TabularDecMDP& mdp, const ExactPolicy& pi, const ExactPolicy& mu,
                        const std::vector<std::vector<double>>& k_dist_per_state, double gamma) {
    check_guard(mdp, gamma);
    BoundReport report;

    const auto true_eval = exact_policy_eval(mdp, pi, gamma);
    const auto fqi = fqi_fixed_point(mdp, pi, mu, k_dist_per_state, gamma);
    report.eps_fqi = fqi.residual;

    // V_hat under pi from the fixed-point Q table.
    DecMdpSpec spec;
    spec.n = mdp.n;
    spec.action_counts = mdp.action_counts;
    const long long ja = mdp.joint_count();
    std::vector<double> v_hat(static_cast<std::size_t>(mdp.num_states), 0.0);
    for (int s = 0; s < mdp.num_states; ++s) {
        for (long long code = 0; code < ja; ++code) {
            const auto joint = spec.decode_joint(code);
            const double p = pi.joint_prob(s, joint);
            if (p == 0.0) continue;
            v_hat[static_cast<std::size_t>(s)] +=
                p * fqi.q[static_cast<std::size_t>(s) * static_cast<std::size_t>(ja) + static_cast<std::size_t>(code)];
        }
    }

    const auto d_pi = discounted_occupancy(mdp, pi, gamma);
    for (int s = 0; s < mdp.num_states; ++s) {
        const double gap = std::abs(true_eval.v[static_cast<std::size_t>(s)] - v_hat[static_cast<std::size_t>(s)]);
        report.measured_gap = std::max(report.measured_gap, gap);
        report.measured_gap_dpi += d_pi[static_cast<std::size_t>(s)] * gap;
    }

    const auto support_opt = optimal_in_support_policy(mdp, mu, gamma);
    const auto opt_eval = exact_policy_eval(mdp, support_opt, gamma);
    for (int s = 0; s < mdp.num_states; ++s) {
        const double sub = opt_eval.v[static_cast<std::size_t>(s)] - true_eval.v[static_cast<std::size_t>(s)];
        report.eps_subopt = std::max(report.eps_subopt, sub);
        report.eps_subopt_dpi += d_pi[static_cast<std::size_t>(s)] * sub;
    }

    double expected_k = 0.0;
    for (int s = 0; s < mdp.num_states; ++s) {
        double ek = 0.0;
        for (int k = 1; k <= mdp.n; ++k)
            ek += k_dist_per_state[static_cast<std::size_t>(s)][static_cast<std::size_t>(k - 1)] * static_cast<double>(k);
        expected_k += d_pi[static_cast<std::size_t>(s)] * ek;
    }
    report.expected_k = expected_k;
    report.tv_bar = tv_bar(pi, mu);
    report.bound_value = report.eps_subopt + report.eps_fqi +
                         4.0 * gamma / ((1.0 - gamma) * (1.0 - gamma)) * report.expected_k * report.tv_bar;
    report.holds = report.measured_gap <= report.bound_value + 1e-9;
    return report;
}

ExactPolicy policy_table(const AgentPolicySet& policies, const TabularDecMDP& mdp) {
    if (policies.env_spec().feature_dim != mdp.num_states)
        throw std::invalid_argument("policy_table: policies were not built for this tabular instance");
    ExactPolicy pol;
    for (int i = 0; i < mdp.n; ++i) {
        std::vector<std::vector<double>> rows;
        for (int s = 0; s < mdp.num_states; ++s) {
            std::vector<double> onehot(static_cast<std::size_t>(mdp.num_states), 0.0);
            onehot[static_cast<std::size_t>(s)] = 1.0;
            rows.push_back(policies.probs(i, onehot));
        }
        pol.tables.push_back(std::move(rows));
    }
    return pol;
}

std::vector<std::vector<double>> k_point_mass(const TabularDecMDP& mdp, int k) {
    if (k < 1 || k > mdp.n) throw std::invalid_argument("k_point_mass: k out of range");
    std::vector<double> row(static_cast<std::size_t>(mdp.n), 0.0);
    row[static_cast<std::size_t>(k - 1)] = 1.0;
    return std::vector<std::vector<double>>(static_cast<std::size_t>(mdp.num_states), row);
}

std::vector<std::vector<double>> k_uniform(const TabularDecMDP& mdp) {
    std::vector<double> row(static_cast<std::size_t>(mdp.n), 1.0 / mdp.n);
    return std::vector<std::vector<double>>(static_cast<std::size_t>(mdp.num_states), row);
}

} // namespace plcql

#include "plcql/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "plcql/errors.hpp"

namespace plcql {

long long DecMdpSpec::joint_action_count() const {
    long long total = 1;
    for (int c : action_counts) total *= c;
    return total;
}

long long DecMdpSpec::encode_joint(std::span<const int> joint) const {
    validate_joint(joint);
    long long code = 0;
    for (int i = 0; i < n; ++i) code = code * action_counts[static_cast<std::size_t>(i)] + joint[static_cast<std::size_t>(i)];
    return code;
}

std::vector<int> DecMdpSpec::decode_joint(long long code) const {
    std::vector<int> joint(static_cast<std::size_t>(n));
    for (int i = n - 1; i >= 0; --i) {
        const int c = action_counts[static_cast<std::size_t>(i)];
        joint[static_cast<std::size_t>(i)] = static_cast<int>(code % c);
        code /= c;
    }
    return joint;
}

void DecMdpSpec::validate_joint(std::span<const int> joint) const {
    if (static_cast<int>(joint.size()) != n) throw std::invalid_argument("joint action has wrong arity");
    for (int i = 0; i < n; ++i) {
        const int a = joint[static_cast<std::size_t>(i)];
        if (a < 0 || a >= action_counts[static_cast<std::size_t>(i)])
            throw std::invalid_argument("action out of range for agent " + std::to_string(i));
    }
}

std::uint64_t DecMdpSpec::fingerprint(const std::string& kind) const {
    std::string repr = kind + "|" + std::to_string(n) + "|";
    for (int c : action_counts) repr += std::to_string(c) + ",";
    repr += "|" + std::to_string(feature_dim) + "|" + std::to_string(horizon);
    return fnv1a64(repr);
}

// ---------------------------------------------------------------------------
// MatrixGameEnv

MatrixGameEnv::MatrixGameEnv(int n, int actions_per_agent, std::vector<double> payoff_flat)
    : payoff_(std::move(payoff_flat)) {
    if (n < 1) throw std::invalid_argument("MatrixGameEnv: need at least one agent");
    if (actions_per_agent < 1) throw std::invalid_argument("MatrixGameEnv: need at least one action");
    spec_.n = n;
    spec_.action_counts.assign(static_cast<std::size_t>(n), actions_per_agent);
    spec_.feature_dim = 1;
    spec_.horizon = 1;
    long long expected = 1;
    for (int i = 0; i < n; ++i) expected *= actions_per_agent;
    if (static_cast<long long>(payoff_.size()) != expected)
        throw std::invalid_argument("MatrixGameEnv: payoff tensor must have actions_per_agent^n entries");
}

EnvState MatrixGameEnv::reset() {
    EnvState s;
    s.features = {1.0};
    s.state_id = 0;
    s.t = 0;
    return s;
}

StepResult MatrixGameEnv::step(const EnvState& state, std::span<const int> joint_action) {
    spec_.validate_joint(joint_action);
    StepResult out;
    out.reward = payoff(joint_action);
    out.done = true;
    out.next = state;
    out.next.t = state.t + 1;
    return out;
}

double MatrixGameEnv::payoff(std::span<const int> joint) const {
    return payoff_[static_cast<std::size_t>(spec_.encode_joint(joint))];
}

std::vector<int> MatrixGameEnv::best_joint() const {
    const auto it = std::max_element(payoff_.begin(), payoff_.end());
    return spec_.decode_joint(static_cast<long long>(it - payoff_.begin()));
}

std::vector<double> MatrixGameEnv::coordination_payoff(int n, int actions_per_agent) {
    DecMdpSpec spec;
    spec.n = n;
    spec.action_counts.assign(static_cast<std::size_t>(n), actions_per_agent);
    const long long total = spec.joint_action_count();
    std::vector<double> payoff(static_cast<std::size_t>(total), 0.0);
    for (long long code = 0; code < total; ++code) {
        const auto joint = spec.decode_joint(code);
        const bool all_equal = std::all_of(joint.begin(), joint.end(), [&](int a) { return a == joint[0]; });
        if (all_equal) payoff[static_cast<std::size_t>(code)] = 1.0;
    }
    return payoff;
}

// ---------------------------------------------------------------------------
// GridSpreadEnv

GridSpreadEnv::GridSpreadEnv(int n, int grid_side, int horizon, std::uint64_t seed, double collision_penalty)
    : side_(grid_side), collision_penalty_(collision_penalty), rng_(seed) {
    if (grid_side < 2) throw std::invalid_argument("GridSpreadEnv: grid_side must be >= 2");
    if (n < 1 || n > grid_side * grid_side) throw std::invalid_argument("GridSpreadEnv: need 1 <= n <= grid_side^2");
    if (horizon < 1) throw std::invalid_argument("GridSpreadEnv: horizon must be >= 1");
    spec_.n = n;
    spec_.action_counts.assign(static_cast<std::size_t>(n), kNumActions);
    spec_.feature_dim = 4 * n; // (row, col) per agent and per landmark
    spec_.horizon = horizon;
}

std::vector<double> GridSpreadEnv::featurize(const std::vector<int>& data) const {
    std::vector<double> f;
    f.reserve(data.size());
    const double half = (side_ - 1) / 2.0;
    for (int c : data) f.push_back((c - half) / half); // maps {0..side-1} into [-1, 1]
    return f;
}

EnvState GridSpreadEnv::reset() {
    const int cells = side_ * side_;
    auto sample_distinct = [&](int count) {
        std::vector<int> pool(static_cast<std::size_t>(cells));
        for (int i = 0; i < cells; ++i) pool[static_cast<std::size_t>(i)] = i;
        std::vector<int> picked;
        for (int i = 0; i < count; ++i) {
            const int j = i + rng_.uniform_int(cells - i);
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
            picked.push_back(pool[static_cast<std::size_t>(i)]);
        }
        return picked;
    };
    EnvState s;
    for (int cell : sample_distinct(spec_.n)) {
        s.data.push_back(cell / side_);
        s.data.push_back(cell % side_);
    }
    for (int cell : sample_distinct(spec_.n)) {
        s.data.push_back(cell / side_);
        s.data.push_back(cell % side_);
    }
    s.features = featurize(s.data);
    s.t = 0;
    return s;
}

StepResult GridSpreadEnv::step(const EnvState& state, std::span<const int> joint_action) {
    spec_.validate_joint(joint_action);
    StepResult out;
    out.next = state;
    for (int i = 0; i < spec_.n; ++i) {
        int& row = out.next.data[static_cast<std::size_t>(2 * i)];
        int& col = out.next.data[static_cast<std::size_t>(2 * i + 1)];
        switch (joint_action[static_cast<std::size_t>(i)]) {
            case 0: break;
            case 1: row = std::max(0, row - 1); break;
            case 2: row = std::min(side_ - 1, row + 1); break;
            case 3: col = std::max(0, col - 1); break;
            case 4: col = std::min(side_ - 1, col + 1); break;
            default: break;
        }
    }
    out.next.t = state.t + 1;
    out.next.features = featurize(out.next.data);
    out.reward = reward_at(out.next);
    out.done = out.next.t >= spec_.horizon;
    return out;
}

double GridSpreadEnv::reward_at(const EnvState& s) const {
    double total_dist = 0.0;
    for (int l = 0; l < spec_.n; ++l) {
        const auto [lr, lc] = landmark_pos(s, l);
        int best = std::numeric_limits<int>::max();
        for (int a = 0; a < spec_.n; ++a) {
            const auto [ar, ac] = agent_pos(s, a);
            best = std::min(best, std::abs(ar - lr) + std::abs(ac - lc));
        }
        total_dist += best;
    }
    std::vector<int> occupancy(static_cast<std::size_t>(side_ * side_), 0);
    for (int a = 0; a < spec_.n; ++a) {
        const auto [ar, ac] = agent_pos(s, a);
        occupancy[static_cast<std::size_t>(ar * side_ + ac)] += 1;
    }
    const long long collided_cells = std::count_if(occupancy.begin(), occupancy.end(), [](int c) { return c > 1; });
    return -total_dist - collision_penalty_ * static_cast<double>(collided_cells);
}

double GridSpreadEnv::max_step_cost() const {
    const double max_dist = 2.0 * (side_ - 1) * spec_.n;
    const double max_collided_cells = spec_.n / 2;
    return max_dist + collision_penalty_ * max_collided_cells;
}

EnvState GridSpreadEnv::state_from_positions(const std::vector<std::pair<int, int>>& agents,
                                             const std::vector<std::pair<int, int>>& landmarks, int t) const {
    if (static_cast<int>(agents.size()) != spec_.n || static_cast<int>(landmarks.size()) != spec_.n)
        throw std::invalid_argument("state_from_positions: need n agents and n landmarks");
    EnvState s;
    for (const auto& [r, c] : agents) {
        s.data.push_back(r);
        s.data.push_back(c);
    }
    for (const auto& [r, c] : landmarks) {
        s.data.push_back(r);
        s.data.push_back(c);
    }
    s.features = featurize(s.data);
    s.t = t;
    return s;
}

std::pair<int, int> GridSpreadEnv::agent_pos(const EnvState& s, int i) const {
    return {s.data[static_cast<std::size_t>(2 * i)], s.data[static_cast<std::size_t>(2 * i + 1)]};
}

std::pair<int, int> GridSpreadEnv::landmark_pos(const EnvState& s, int i) const {
    const int off = 2 * spec_.n;
    return {s.data[static_cast<std::size_t>(off + 2 * i)], s.data[static_cast<std::size_t>(off + 2 * i + 1)]};
}

// ---------------------------------------------------------------------------
// TabularDecMDP

long long TabularDecMDP::joint_count() const {
    long long total = 1;
    for (int c : action_counts) total *= c;
    return total;
}

double TabularDecMDP::p(int s, long long joint, int s_next) const {
    return transitions[(static_cast<std::size_t>(s) * static_cast<std::size_t>(joint_count()) +
                        static_cast<std::size_t>(joint)) *
                           static_cast<std::size_t>(num_states) +
                       static_cast<std::size_t>(s_next)];
}

double TabularDecMDP::r(int s, long long joint) const {
    return rewards[static_cast<std::size_t>(s) * static_cast<std::size_t>(joint_count()) + static_cast<std::size_t>(joint)];
}

void TabularDecMDP::validate() const {
    const long long ja = joint_count();
    if (static_cast<long long>(transitions.size()) != static_cast<long long>(num_states) * ja * num_states)
        throw std::invalid_argument("TabularDecMDP: transition tensor size mismatch");
    if (static_cast<long long>(rewards.size()) != static_cast<long long>(num_states) * ja)
        throw std::invalid_argument("TabularDecMDP: reward tensor size mismatch");
    for (int s = 0; s < num_states; ++s) {
        for (long long a = 0; a < ja; ++a) {
            double sum = 0.0;
            for (int sn = 0; sn < num_states; ++sn) sum += p(s, a, sn);
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("TabularDecMDP: transition row does not sum to 1");
        }
    }
    double init_sum = 0.0;
    for (double v : initial) init_sum += v;
    if (std::abs(init_sum - 1.0) > 1e-12)
        throw std::invalid_argument("TabularDecMDP: initial distribution does not sum to 1");
}

void TabularDecMDP::save(const std::string& path) const {
    TextDoc doc;
    doc.set_int("format_version", 1);
    doc.set("module", "tabular_decmdp");
    doc.set_int("n", n);
    doc.set_ints("action_counts", action_counts);
    doc.set_int("num_states", num_states);
    doc.set_double("r_max", r_max);
    doc.set_doubles("transitions", transitions);
    doc.set_doubles("rewards", rewards);
    doc.set_doubles("initial", initial);
    doc.save(path);
}

TabularDecMDP TabularDecMDP::load(const std::string& path) {
    TextDoc doc = TextDoc::load(path);
    if (doc.get_int("format_version") != 1) throw IoError("TabularDecMDP: unsupported format_version");
    TabularDecMDP mdp;
    mdp.n = static_cast<int>(doc.get_int("n"));
    mdp.action_counts = doc.get_ints("action_counts");
    mdp.num_states = static_cast<int>(doc.get_int("num_states"));
    mdp.r_max = doc.get_double("r_max");
    mdp.transitions = doc.get_doubles("transitions");
    mdp.rewards = doc.get_doubles("rewards");
    mdp.initial = doc.get_doubles("initial");
    mdp.validate();
    return mdp;
}

TabularDecMDP random_decmdp(std::uint64_t seed, int n, int states, int actions_per_agent, double reward_scale) {
    if (n < 1 || states < 1 || actions_per_agent < 1)
        throw std::invalid_argument("random_decmdp: all sizes must be >= 1");
    long long ja = 1;
    for (int i = 0; i < n; ++i) ja *= actions_per_agent;
    if (ja * static_cast<long long>(states) * states > 1'000'000)
        throw std::invalid_argument("random_decmdp: instance exceeds the 1e6-entry size guard");

    SeededRng rng(seed);
    TabularDecMDP mdp;
    mdp.n = n;
    mdp.action_counts.assign(static_cast<std::size_t>(n), actions_per_agent);
    mdp.num_states = states;
    mdp.r_max = std::abs(reward_scale);
    mdp.transitions.resize(static_cast<std::size_t>(states) * static_cast<std::size_t>(ja) * states);
    mdp.rewards.resize(static_cast<std::size_t>(states) * static_cast<std::size_t>(ja));
    for (int s = 0; s < states; ++s) {
        for (long long a = 0; a < ja; ++a) {
            double sum = 0.0;
            std::vector<double> row(static_cast<std::size_t>(states));
            for (auto& v : row) {
                v = rng.exponential();
                sum += v;
            }
            const std::size_t base =
                (static_cast<std::size_t>(s) * static_cast<std::size_t>(ja) + static_cast<std::size_t>(a)) *
                static_cast<std::size_t>(states);
            for (int sn = 0; sn < states; ++sn) mdp.transitions[base + static_cast<std::size_t>(sn)] = row[static_cast<std::size_t>(sn)] / sum;
            mdp.rewards[static_cast<std::size_t>(s) * static_cast<std::size_t>(ja) + static_cast<std::size_t>(a)] =
                rng.uniform(-reward_scale, reward_scale);
        }
    }
    mdp.initial.resize(static_cast<std::size_t>(states));
    double init_sum = 0.0;
    for (auto& v : mdp.initial) {
        v = rng.exponential();
        init_sum += v;
    }
    for (auto& v : mdp.initial) v /= init_sum;
    return mdp;
}

// ---------------------------------------------------------------------------
// TabularEnv

TabularEnv::TabularEnv(TabularDecMDP mdp, int horizon, std::uint64_t seed, double gamma)
    : mdp_(std::move(mdp)), rng_(seed) {
    mdp_.validate();
    spec_.n = mdp_.n;
    spec_.action_counts = mdp_.action_counts;
    spec_.feature_dim = mdp_.num_states;
    spec_.gamma = gamma;
    spec_.horizon = horizon;
}

EnvState TabularEnv::make_state(int s, int t) const {
    EnvState st;
    st.features.assign(static_cast<std::size_t>(mdp_.num_states), 0.0);
    st.features[static_cast<std::size_t>(s)] = 1.0;
    st.state_id = s;
    st.t = t;
    return st;
}

EnvState TabularEnv::reset() { return make_state(rng_.categorical(mdp_.initial), 0); }

StepResult TabularEnv::step(const EnvState& state, std::span<const int> joint_action) {
    spec_.validate_joint(joint_action);
    const long long joint = spec_.encode_joint(joint_action);
    const std::size_t base = (static_cast<std::size_t>(state.state_id) * static_cast<std::size_t>(mdp_.joint_count()) +
                              static_cast<std::size_t>(joint)) *
                             static_cast<std::size_t>(mdp_.num_states);
    const std::span<const double> row(mdp_.transitions.data() + base, static_cast<std::size_t>(mdp_.num_states));
    StepResult out;
    out.next = make_state(rng_.categorical(row), state.t + 1);
    out.reward = mdp_.r(state.state_id, joint);
    out.done = out.next.t >= spec_.horizon;
    return out;
}

// ---------------------------------------------------------------------------
// ExactPolicy

double ExactPolicy::joint_prob(int state, std::span<const int> joint) const {
    double p = 1.0;
    for (int i = 0; i < num_agents(); ++i)
        p *= tables[static_cast<std::size_t>(i)][static_cast<std::size_t>(state)][static_cast<std::size_t>(joint[static_cast<std::size_t>(i)])];
    return p;
}

void ExactPolicy::validate() const {
    for (const auto& agent : tables) {
        for (const auto& row : agent) {
            double sum = 0.0;
            for (double v : row) {
                if (v < 0.0) throw std::invalid_argument("ExactPolicy: negative probability");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("ExactPolicy: row does not sum to 1");
        }
    }
}

ExactPolicy ExactPolicy::uniform(const TabularDecMDP& mdp) {
    ExactPolicy pol;
    for (int i = 0; i < mdp.n; ++i) {
        const int count = mdp.action_counts[static_cast<std::size_t>(i)];
        pol.tables.emplace_back(static_cast<std::size_t>(mdp.num_states),
                                std::vector<double>(static_cast<std::size_t>(count), 1.0 / count));
    }
    return pol;
}

ExactPolicy ExactPolicy::random(const TabularDecMDP& mdp, SeededRng& rng) {
    ExactPolicy pol;
    for (int i = 0; i < mdp.n; ++i) {
        const int count = mdp.action_counts[static_cast<std::size_t>(i)];
        std::vector<std::vector<double>> rows;
        for (int s = 0; s < mdp.num_states; ++s) {
            std::vector<double> row(static_cast<std::size_t>(count));
            double sum = 0.0;
            for (auto& v : row) {
                v = rng.exponential();
                sum += v;
            }
            for (auto& v : row) v /= sum;
            rows.push_back(std::move(row));
        }
        pol.tables.push_back(std::move(rows));
    }
    return pol;
}

ExactPolicy ExactPolicy::deterministic(const TabularDecMDP& mdp, const std::vector<long long>& joint_per_state) {
    DecMdpSpec spec;
    spec.n = mdp.n;
    spec.action_counts = mdp.action_counts;
    ExactPolicy pol;
    for (int i = 0; i < mdp.n; ++i)
        pol.tables.emplace_back(static_cast<std::size_t>(mdp.num_states),
                                std::vector<double>(static_cast<std::size_t>(mdp.action_counts[static_cast<std::size_t>(i)]), 0.0));
    for (int s = 0; s < mdp.num_states; ++s) {
        const auto joint = spec.decode_joint(joint_per_state[static_cast<std::size_t>(s)]);
        for (int i = 0; i < mdp.n; ++i)
            pol.tables[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)][static_cast<std::size_t>(joint[static_cast<std::size_t>(i)])] = 1.0;
    }
    return pol;
}

} // namespace plcql

#include "plcql/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "plcql/errors.hpp"

namespace plcql {

std::vector<double> OfflineDataset::episode_returns() const {
    std::vector<double> returns;
    double acc = 0.0;
    bool open = false;
    for (const auto& tr : transitions) {
        acc += tr.r;
        open = true;
        if (tr.done) {
            returns.push_back(acc);
            acc = 0.0;
            open = false;
        }
    }
    if (open) returns.push_back(acc);
    return returns;
}

BehaviourPolicy uniform_behaviour(const DecMdpSpec& spec) {
    BehaviourPolicy pol;
    pol.description = "uniform";
    const auto counts = spec.action_counts;
    pol.act = [counts](const EnvState&, SeededRng& rng) {
        std::vector<int> joint;
        joint.reserve(counts.size());
        for (int c : counts) joint.push_back(rng.uniform_int(c));
        return joint;
    };
    return pol;
}

BehaviourPolicy eps_greedy_behaviour(const DecMdpSpec& spec,
                                     std::function<std::vector<int>(const EnvState&)> base, double eps,
                                     const std::string& base_name) {
    if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("eps_greedy_behaviour: eps must be in [0, 1]");
    BehaviourPolicy pol;
    pol.description = "eps_greedy(base=" + base_name + ",eps=" + fmt_double(eps) + ")";
    const auto counts = spec.action_counts;
    pol.act = [counts, base = std::move(base), eps](const EnvState& s, SeededRng& rng) {
        std::vector<int> joint = base(s);
        for (std::size_t i = 0; i < counts.size(); ++i)
            if (rng.uniform() < eps) joint[i] = rng.uniform_int(counts[i]);
        return joint;
    };
    return pol;
}

namespace {

std::function<std::vector<int>(const EnvState&)> grid_expert(const GridSpreadEnv& env) {
    const int n = env.spec().n;
    return [&env, n](const EnvState& s) {
        // Greedy assignment: repeatedly match the closest unassigned
        // agent/landmark pair, lowest indices on ties.
        std::vector<int> assigned_landmark(static_cast<std::size_t>(n), -1);
        std::vector<bool> agent_used(static_cast<std::size_t>(n), false);
        std::vector<bool> landmark_used(static_cast<std::size_t>(n), false);
        for (int round = 0; round < n; ++round) {
            int best_a = -1, best_l = -1, best_d = std::numeric_limits<int>::max();
            for (int a = 0; a < n; ++a) {
                if (agent_used[static_cast<std::size_t>(a)]) continue;
                const auto [ar, ac] = env.agent_pos(s, a);
                for (int l = 0; l < n; ++l) {
                    if (landmark_used[static_cast<std::size_t>(l)]) continue;
                    const auto [lr, lc] = env.landmark_pos(s, l);
                    const int d = std::abs(ar - lr) + std::abs(ac - lc);
                    if (d < best_d) {
                        best_d = d;
                        best_a = a;
                        best_l = l;
                    }
                }
            }
            agent_used[static_cast<std::size_t>(best_a)] = true;
            landmark_used[static_cast<std::size_t>(best_l)] = true;
            assigned_landmark[static_cast<std::size_t>(best_a)] = best_l;
        }
        std::vector<int> joint(static_cast<std::size_t>(n), 0);
        for (int a = 0; a < n; ++a) {
            const auto [ar, ac] = env.agent_pos(s, a);
            const auto [lr, lc] = env.landmark_pos(s, assigned_landmark[static_cast<std::size_t>(a)]);
            if (ar != lr)
                joint[static_cast<std::size_t>(a)] = lr < ar ? 1 : 2;
            else if (ac != lc)
                joint[static_cast<std::size_t>(a)] = lc < ac ? 3 : 4;
        }
        return joint;
    };
}

} // namespace

std::vector<long long> optimal_joint_actions(const TabularDecMDP& mdp, double gamma,
                                             const std::vector<std::vector<long long>>* allowed) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("optimal_joint_actions: gamma must be in [0, 1)");
    const long long ja = mdp.joint_count();
    std::vector<double> value(static_cast<std::size_t>(mdp.num_states), 0.0);
    auto q_of = [&](int s, long long a) {
        double q = mdp.r(s, a);
        for (int sn = 0; sn < mdp.num_states; ++sn) q += gamma * mdp.p(s, a, sn) * value[static_cast<std::size_t>(sn)];
        return q;
    };
    auto actions_at = [&](int s) -> std::vector<long long> {
        if (allowed) return (*allowed)[static_cast<std::size_t>(s)];
        std::vector<long long> all(static_cast<std::size_t>(ja));
        for (long long a = 0; a < ja; ++a) all[static_cast<std::size_t>(a)] = a;
        return all;
    };
    for (int iter = 0; iter < 200000; ++iter) {
        double delta = 0.0;
        for (int s = 0; s < mdp.num_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (long long a : actions_at(s)) best = std::max(best, q_of(s, a));
            delta = std::max(delta, std::abs(best - value[static_cast<std::size_t>(s)]));
            value[static_cast<std::size_t>(s)] = best;
        }
        if (delta <= 1e-12) break;
    }
    std::vector<long long> greedy(static_cast<std::size_t>(mdp.num_states), 0);
    for (int s = 0; s < mdp.num_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        long long arg = actions_at(s).front();
        for (long long a : actions_at(s)) {
            const double q = q_of(s, a);
            if (q > best) {
                best = q;
                arg = a;
            }
        }
        greedy[static_cast<std::size_t>(s)] = arg;
    }
    return greedy;
}

std::function<std::vector<int>(const EnvState&)> scripted_expert(const Env& env) {
    if (const auto* matrix = dynamic_cast<const MatrixGameEnv*>(&env)) {
        auto joint = matrix->best_joint();
        return [joint](const EnvState&) { return joint; };
    }
    if (const auto* grid = dynamic_cast<const GridSpreadEnv*>(&env)) return grid_expert(*grid);
    if (const auto* tab = dynamic_cast<const TabularEnv*>(&env)) {
        const auto greedy = optimal_joint_actions(tab->mdp(), tab->spec().gamma);
        const DecMdpSpec spec = tab->spec();
        return [greedy, spec](const EnvState& s) {
            return spec.decode_joint(greedy[static_cast<std::size_t>(s.state_id)]);
        };
    }
    throw std::invalid_argument("scripted_expert: no expert available for env kind '" + env.kind() + "'");
}

OfflineDataset collect(Env& env, const BehaviourPolicy& behaviour, int episodes, std::uint64_t seed) {
    if (episodes < 0) throw std::invalid_argument("collect: episodes must be >= 0");
    auto work = env.clone();
    work->reseed(SeededRng(seed).fork(1).seed());
    SeededRng policy_rng = SeededRng(seed).fork(2);

    OfflineDataset ds;
    const DecMdpSpec& spec = work->spec();
    for (int ep = 0; ep < episodes; ++ep) {
        EnvState state = work->reset();
        std::size_t episode_start = ds.transitions.size();
        bool done = false;
        while (!done) {
            const std::vector<int> action = behaviour.act(state, policy_rng);
            spec.validate_joint(action);
            StepResult res = work->step(state, action);
            Transition tr;
            tr.s = state.features;
            tr.a = action;
            tr.r = res.reward;
            tr.s_next = res.next.features;
            tr.a_next.assign(static_cast<std::size_t>(spec.n), -1);
            tr.done = res.done;
            tr.state_id = state.state_id;
            tr.next_state_id = res.next.state_id;
            if (ds.transitions.size() > episode_start) ds.transitions.back().a_next = action;
            ds.transitions.push_back(std::move(tr));
            state = res.next;
            done = res.done;
        }
    }
    ds.meta.env_spec_hash = spec.fingerprint(env.kind());
    ds.meta.tier = "custom";
    ds.meta.behaviour = behaviour.description;
    ds.meta.n = spec.n;
    ds.meta.action_counts = spec.action_counts;
    ds.meta.feature_dim = spec.feature_dim;
    ds.meta.seed = seed;
    ds.meta.size = ds.transitions.size();
    ds.meta.has_state_ids = !ds.transitions.empty() && ds.transitions.front().state_id >= 0;
    return ds;
}

Tier parse_tier(const std::string& name) {
    if (name == "expert") return Tier::Expert;
    if (name == "medium") return Tier::Medium;
    if (name == "medium_replay") return Tier::MediumReplay;
    if (name == "random") return Tier::Random;
    throw ConfigError("unknown tier '" + name + "'");
}

std::string tier_name(Tier tier) {
    switch (tier) {
        case Tier::Expert: return "expert";
        case Tier::Medium: return "medium";
        case Tier::MediumReplay: return "medium_replay";
        case Tier::Random: return "random";
    }
    return "?";
}

OfflineDataset make_tier(Env& env, Tier tier, int size, std::uint64_t seed) {
    if (size < 1) throw std::invalid_argument("make_tier: size must be >= 1");
    const int horizon = env.spec().horizon;
    const auto episodes_for = [horizon](int transitions) { return (transitions + horizon - 1) / horizon; };

    OfflineDataset ds;
    switch (tier) {
        case Tier::Random: {
            ds = collect(env, uniform_behaviour(env.spec()), episodes_for(size), seed);
            break;
        }
        case Tier::Expert: {
            auto pol = eps_greedy_behaviour(env.spec(), scripted_expert(env), 0.05, env.kind() + "_expert");
            ds = collect(env, pol, episodes_for(size), seed);
            break;
        }
        case Tier::Medium: {
            auto pol = eps_greedy_behaviour(env.spec(), scripted_expert(env), 0.4, env.kind() + "_expert");
            ds = collect(env, pol, episodes_for(size), seed);
            break;
        }
        case Tier::MediumReplay: {
            // Checkpoint-mixture analogue: equal thirds at decreasing eps.
            const double eps_levels[3] = {0.8, 0.6, 0.4};
            const int base = size / 3;
            const int parts[3] = {size - 2 * base, base, base};
            for (int level = 0; level < 3; ++level) {
                auto pol = eps_greedy_behaviour(env.spec(), scripted_expert(env), eps_levels[level],
                                                env.kind() + "_expert");
                OfflineDataset part = collect(env, pol, episodes_for(parts[level]),
                                              SeededRng(seed).fork(static_cast<std::uint64_t>(level + 10)).seed());
                ds.transitions.insert(ds.transitions.end(), part.transitions.begin(), part.transitions.end());
                ds.meta = part.meta;
            }
            ds.meta.behaviour = "eps_greedy_mixture(base=" + env.kind() + "_expert,eps=0.8/0.6/0.4)";
            break;
        }
    }
    ds.meta.tier = tier_name(tier);
    ds.meta.seed = seed;
    ds.meta.size = ds.transitions.size();
    return ds;
}

CoverageReport coverage(const OfflineDataset& ds) {
    if (ds.transitions.empty()) throw std::invalid_argument("coverage: empty dataset");
    DecMdpSpec spec;
    spec.n = ds.meta.n;
    spec.action_counts = ds.meta.action_counts;
    const long long joint_space = spec.joint_action_count();

    CoverageReport report;
    report.joint_action_space = joint_space;
    for (const auto& tr : ds.transitions) {
        const int sid = ds.meta.has_state_ids ? tr.state_id : -1;
        report.counts[{sid, spec.encode_joint(tr.a)}] += 1;
    }

    // Distinct joint actions per state bucket (one global bucket when the
    // dataset carries no state ids).
    std::map<int, std::set<long long>> joints_by_state;
    std::map<int, std::vector<std::set<int>>> marginals_by_state;
    for (const auto& tr : ds.transitions) {
        const int sid = ds.meta.has_state_ids ? tr.state_id : -1;
        joints_by_state[sid].insert(spec.encode_joint(tr.a));
        auto& marg = marginals_by_state[sid];
        if (marg.empty()) marg.resize(static_cast<std::size_t>(spec.n));
        for (int i = 0; i < spec.n; ++i) marg[static_cast<std::size_t>(i)].insert(tr.a[static_cast<std::size_t>(i)]);
    }

    double joint_sum = 0.0;
    std::vector<double> marginal_sum(static_cast<std::size_t>(spec.n), 0.0);
    long long distinct_total = 0;
    for (const auto& [sid, joints] : joints_by_state) {
        joint_sum += static_cast<double>(joints.size()) / static_cast<double>(joint_space);
        distinct_total += static_cast<long long>(joints.size());
        const auto& marg = marginals_by_state[sid];
        for (int i = 0; i < spec.n; ++i)
            marginal_sum[static_cast<std::size_t>(i)] +=
                static_cast<double>(marg[static_cast<std::size_t>(i)].size()) /
                static_cast<double>(spec.action_counts[static_cast<std::size_t>(i)]);
    }
    const double buckets = static_cast<double>(joints_by_state.size());
    report.joint_coverage = joint_sum / buckets;
    report.marginal_coverage.resize(static_cast<std::size_t>(spec.n));
    for (int i = 0; i < spec.n; ++i)
        report.marginal_coverage[static_cast<std::size_t>(i)] = marginal_sum[static_cast<std::size_t>(i)] / buckets;
    report.distinct_joint_actions = distinct_total;
    return report;
}

namespace {

constexpr int kDatasetFormatVersion = 1;

std::string header_line(const DatasetMeta& meta) {
    std::string h = "plcql_dataset";
    h += " format_version=" + std::to_string(kDatasetFormatVersion);
    h += " env_hash=" + std::to_string(meta.env_spec_hash);
    h += " tier=" + meta.tier;
    h += " behaviour=" + meta.behaviour;
    h += " n=" + std::to_string(meta.n);
    std::string actions;
    for (std::size_t i = 0; i < meta.action_counts.size(); ++i) {
        if (i) actions += ',';
        actions += std::to_string(meta.action_counts[i]);
    }
    h += " actions=" + actions;
    h += " feature_dim=" + std::to_string(meta.feature_dim);
    h += " seed=" + std::to_string(meta.seed);
    h += " size=" + std::to_string(meta.size);
    h += " has_state_ids=" + std::to_string(meta.has_state_ids ? 1 : 0);
    return h;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

void save_dataset(const OfflineDataset& ds, const std::string& path) {
    if (ds.meta.size != ds.transitions.size()) throw IoError("save_dataset: metadata size mismatch");
    std::string body;
    for (const auto& tr : ds.transitions) {
        std::string line;
        for (double v : tr.s) line += fmt_double(v) + ",";
        for (int a : tr.a) line += std::to_string(a) + ",";
        line += fmt_double(tr.r) + ",";
        for (double v : tr.s_next) line += fmt_double(v) + ",";
        for (int a : tr.a_next) line += std::to_string(a) + ",";
        line += tr.done ? "1" : "0";
        if (ds.meta.has_state_ids) line += "," + std::to_string(tr.state_id) + "," + std::to_string(tr.next_state_id);
        body += line;
        body += '\n';
    }
    std::string content = header_line(ds.meta) + "\n" + body;
    char checksum[32];
    std::snprintf(checksum, sizeof(checksum), "%016llx", static_cast<unsigned long long>(fnv1a64(body)));
    content += std::string("checksum=") + checksum + "\n";
    write_file(path, content);
}

OfflineDataset load_dataset(const std::string& path) {
    const std::string content = read_file(path);
    std::istringstream in(content);
    std::string header;
    if (!std::getline(in, header)) throw IoError("dataset '" + path + "': empty file");

    OfflineDataset ds;
    const auto tokens = split_ws(header);
    if (tokens.empty() || tokens[0] != "plcql_dataset") throw IoError("dataset '" + path + "': bad header");
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        const auto eq = tokens[i].find('=');
        if (eq == std::string::npos) throw IoError("dataset '" + path + "': malformed header token '" + tokens[i] + "'");
        const std::string key = tokens[i].substr(0, eq);
        const std::string val = tokens[i].substr(eq + 1);
        if (key == "format_version") {
            if (parse_int(val) != kDatasetFormatVersion)
                throw IoError("dataset '" + path + "': format_version " + val + " not supported (expected " +
                              std::to_string(kDatasetFormatVersion) + ")");
        } else if (key == "env_hash")
            ds.meta.env_spec_hash = static_cast<std::uint64_t>(parse_int(val));
        else if (key == "tier")
            ds.meta.tier = val;
        else if (key == "behaviour")
            ds.meta.behaviour = val;
        else if (key == "n")
            ds.meta.n = static_cast<int>(parse_int(val));
        else if (key == "actions") {
            std::string normalized = val;
            std::replace(normalized.begin(), normalized.end(), ',', ' ');
            ds.meta.action_counts = split_ints(normalized);
        } else if (key == "feature_dim")
            ds.meta.feature_dim = static_cast<int>(parse_int(val));
        else if (key == "seed")
            ds.meta.seed = static_cast<std::uint64_t>(parse_int(val));
        else if (key == "size")
            ds.meta.size = static_cast<std::size_t>(parse_int(val));
        else if (key == "has_state_ids")
            ds.meta.has_state_ids = parse_int(val) != 0;
        else
            throw IoError("dataset '" + path + "': unknown header key '" + key + "'");
    }

    std::string body;
    std::string line;
    bool saw_checksum = false;
    while (std::getline(in, line)) {
        if (line.rfind("checksum=", 0) == 0) {
            const std::uint64_t expected = std::stoull(line.substr(9), nullptr, 16);
            if (fnv1a64(body) != expected)
                throw IoError("dataset '" + path + "': checksum mismatch (file truncated or corrupted)");
            saw_checksum = true;
            break;
        }
        body += line;
        body += '\n';
        const auto fields = split_csv(line);
        const std::size_t f = static_cast<std::size_t>(ds.meta.feature_dim);
        const std::size_t a = static_cast<std::size_t>(ds.meta.n);
        const std::size_t expected_fields = 2 * f + 2 * a + 2 + (ds.meta.has_state_ids ? 2 : 0);
        if (fields.size() != expected_fields)
            throw IoError("dataset '" + path + "': row has " + std::to_string(fields.size()) + " fields, expected " +
                          std::to_string(expected_fields));
        Transition tr;
        std::size_t pos = 0;
        tr.s.reserve(f);
        for (std::size_t i = 0; i < f; ++i) tr.s.push_back(parse_double(fields[pos++]));
        tr.a.reserve(a);
        for (std::size_t i = 0; i < a; ++i) tr.a.push_back(static_cast<int>(parse_int(fields[pos++])));
        tr.r = parse_double(fields[pos++]);
        tr.s_next.reserve(f);
        for (std::size_t i = 0; i < f; ++i) tr.s_next.push_back(parse_double(fields[pos++]));
        tr.a_next.reserve(a);
        for (std::size_t i = 0; i < a; ++i) tr.a_next.push_back(static_cast<int>(parse_int(fields[pos++])));
        tr.done = parse_int(fields[pos++]) != 0;
        if (ds.meta.has_state_ids) {
            tr.state_id = static_cast<int>(parse_int(fields[pos++]));
            tr.next_state_id = static_cast<int>(parse_int(fields[pos++]));
        }
        ds.transitions.push_back(std::move(tr));
    }
    if (!saw_checksum) throw IoError("dataset '" + path + "': missing checksum line (file truncated)");
    if (ds.transitions.size() != ds.meta.size)
        throw IoError("dataset '" + path + "': row count " + std::to_string(ds.transitions.size()) +
                      " does not match declared size " + std::to_string(ds.meta.size));
    return ds;
}

} // namespace plcql

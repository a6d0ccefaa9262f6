#include "plcql/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "plcql/dataset.hpp"
#include "plcql/errors.hpp"
#include "plcql/oracle.hpp"
#include "plcql/par.hpp"
#include "plcql/trainer.hpp"

namespace fs = std::filesystem;

namespace plcql {

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunContext {
    std::string out_dir;
    std::chrono::steady_clock::time_point start;
    TextDoc summary;
    std::vector<std::string> artifacts;
};

RunContext begin_run(ConfigMap& cfg, const std::string& command) {
    RunContext ctx;
    ctx.start = std::chrono::steady_clock::now();
    ctx.out_dir = cfg.require_string("out.dir");
    const bool overwrite = cfg.get_bool("out.overwrite", false);
    if (fs::exists(ctx.out_dir) && !fs::is_empty(ctx.out_dir) && !overwrite)
        throw ConfigError("output directory '" + ctx.out_dir + "' is not empty (pass --out.overwrite true)");
    fs::create_directories(ctx.out_dir);
    ctx.summary.set("command", command);
    ctx.summary.set("version", kVersion);
    return ctx;
}

void finish_run(RunContext& ctx, const ConfigMap& cfg) {
    for (const auto& [k, v] : cfg.effective().entries()) ctx.summary.set("config." + k, v);
    std::string files;
    for (const auto& a : ctx.artifacts) {
        if (!files.empty()) files += " ";
        files += a;
    }
    ctx.summary.set("artifacts", files);
    const double elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - ctx.start).count() /
        1000.0;
    ctx.summary.set_double("elapsed_seconds", elapsed);
    ctx.summary.save(ctx.out_dir + "/run_summary.txt");
}

std::string checkpoint_dir_name(long long iter) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "iter_%06lld", iter);
    return buf;
}

} // namespace

void cmd_gen_data(ConfigMap& cfg) {
    RunContext ctx = begin_run(cfg, "gen-data");
    auto env = build_env(cfg);
    const Tier tier = parse_tier(cfg.require_string("data.tier"));
    const int size = static_cast<int>(cfg.require_int("data.size"));
    if (size < 1) throw ConfigError("key 'data.size' must be >= 1");
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("data.seed", 0));
    cfg.finish();

    OfflineDataset ds = make_tier(*env, tier, size, seed);
    const std::string path = ctx.out_dir + "/dataset.csv";
    save_dataset(ds, path);
    ctx.artifacts.push_back("dataset.csv");

    const CoverageReport cov = coverage(ds);
    const auto returns = ds.episode_returns();
    double mean_return = 0.0;
    for (double r : returns) mean_return += r;
    mean_return /= static_cast<double>(returns.size());

    ctx.summary.set_int("dataset_size", static_cast<long long>(ds.size()));
    ctx.summary.set_int("episodes", static_cast<long long>(returns.size()));
    ctx.summary.set_double("behaviour_mean_return", mean_return);
    ctx.summary.set_double("joint_coverage", cov.joint_coverage);
    ctx.summary.set_doubles("marginal_coverage", cov.marginal_coverage);
    finish_run(ctx, cfg);
    std::cout << "gen-data: wrote " << ds.size() << " transitions to " << path
              << " (joint coverage " << cov.joint_coverage << ")\n";
}

void cmd_train(ConfigMap& cfg) {
    RunContext ctx = begin_run(cfg, "train");
    cfg.require_present({"env.kind", "dataset", "out.dir"});
    auto env = build_env(cfg);
    const std::string dataset_path = cfg.require_string("dataset");
    TrainConfig tc = build_train_config(cfg, env->spec().n);
    cfg.finish();

    OfflineDataset ds = load_dataset(dataset_path);
    Trainer trainer(std::move(env), std::move(ds), tc);

    std::string csv = IterationMetrics::csv_header() + "\n";
    for (int it = 0; it < tc.iterations; ++it) {
        const IterationMetrics row = trainer.run_iteration();
        csv += row.csv_row();
        csv += '\n';
        if (tc.checkpoint_every > 0 && row.iter % tc.checkpoint_every == 0) {
            const std::string dir = ctx.out_dir + "/checkpoints/" + checkpoint_dir_name(row.iter);
            trainer.save_checkpoints(dir);
        }
    }
    write_file(ctx.out_dir + "/metrics.csv", csv);
    ctx.artifacts.push_back("metrics.csv");
    trainer.save_checkpoints(ctx.out_dir + "/checkpoints/final");
    ctx.artifacts.push_back("checkpoints/final");

    const auto [mean, stddev] = trainer.evaluate(100, SeededRng(tc.seed).fork(0xEF).seed());
    ctx.summary.set_int("iterations_run", trainer.iteration());
    ctx.summary.set_double("final_eval_return_mean", mean);
    ctx.summary.set_double("final_eval_return_std", stddev);
    finish_run(ctx, cfg);
    std::cout << "train: " << trainer.iteration() << " iterations, final eval " << mean << " +- " << stddev << "\n";
}

void cmd_eval(ConfigMap& cfg) {
    RunContext ctx = begin_run(cfg, "eval");
    cfg.require_present({"env.kind", "eval.checkpoint", "out.dir"});
    auto env = build_env(cfg);
    const std::string checkpoint = cfg.require_string("eval.checkpoint");
    const int episodes = static_cast<int>(cfg.get_int("eval.episodes", 100));
    if (episodes < 1) throw ConfigError("key 'eval.episodes' must be >= 1");
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("eval.seed", 0));
    cfg.finish();

    const AgentPolicySet policies = AgentPolicySet::load(checkpoint, env->spec());
    const auto [mean, stddev] = evaluate_policies(*env, policies, episodes, seed);
    ctx.summary.set_int("episodes", episodes);
    ctx.summary.set_double("eval_return_mean", mean);
    ctx.summary.set_double("eval_return_std", stddev);
    finish_run(ctx, cfg);
    std::cout << "eval: " << mean << " +- " << stddev << " over " << episodes << " episodes\n";
}

void cmd_ablate(ConfigMap& cfg) {
    RunContext ctx = begin_run(cfg, "ablate");
    cfg.require_present({"env.kind", "dataset", "out.dir"});
    auto env = build_env(cfg);
    const std::string dataset_path = cfg.require_string("dataset");
    TrainConfig base = build_train_config(cfg, env->spec().n);
    const int seeds = static_cast<int>(cfg.get_int("ablate.seeds", 5));
    if (seeds < 1) throw ConfigError("key 'ablate.seeds' must be >= 1");
    const std::uint64_t base_seed = static_cast<std::uint64_t>(cfg.get_int("ablate.base_seed", base.seed));
    const int eval_episodes = static_cast<int>(cfg.get_int("ablate.eval_episodes", 100));
    cfg.finish();

    const OfflineDataset ds = load_dataset(dataset_path);
    const int n = env->spec().n;

    struct Arm {
        std::string label;
        Variant variant;
        int fixed_k;
    };
    const std::vector<Arm> arms = {{"plcql", Variant::Plcql, 0},
                                   {"fixed_k_1", Variant::FixedK, 1},
                                   {"fixed_k_n", Variant::FixedK, n},
                                   {"no_uncertainty", Variant::NoUncertainty, 0}};

    std::string csv = "variant,eval_return_mean,eval_return_std\n";
    for (const auto& arm : arms) {
        std::vector<double> means;
        for (int s = 0; s < seeds; ++s) {
            TrainConfig tc = base;
            tc.variant = arm.variant;
            if (arm.fixed_k > 0) tc.fixed_k = arm.fixed_k;
            tc.seed = base_seed + static_cast<std::uint64_t>(s);
            Trainer trainer(env->clone(), ds, tc);
            trainer.run();
            const auto [mean, stddev] = trainer.evaluate(eval_episodes, SeededRng(tc.seed).fork(0xEF).seed());
            means.push_back(mean);
            ctx.summary.set_double("return." + arm.label + ".seed" + std::to_string(s), mean);
            (void)stddev;
        }
        double mean = 0.0;
        for (double m : means) mean += m;
        mean /= static_cast<double>(means.size());
        double var = 0.0;
        for (double m : means) var += (m - mean) * (m - mean);
        var /= static_cast<double>(means.size());
        csv += arm.label + "," + fmt_double(mean) + "," + fmt_double(std::sqrt(var)) + "\n";
        std::cout << "ablate: " << arm.label << " " << mean << " +- " << std::sqrt(var) << "\n";
    }
    write_file(ctx.out_dir + "/ablation_table.csv", csv);
    ctx.artifacts.push_back("ablation_table.csv");
    finish_run(ctx, cfg);
}

int cmd_verify(ConfigMap& cfg) {
    RunContext ctx = begin_run(cfg, "verify");
    const int contraction_instances = static_cast<int>(cfg.get_int("verify.contraction_instances", 20));
    const int contraction_pairs = static_cast<int>(cfg.get_int("verify.contraction_pairs", 10));
    const int bound_instances = static_cast<int>(cfg.get_int("verify.instances", 50));
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("verify.seed", 1));
    cfg.finish();

    // Contraction sweep: every size-k operator and the mixture operator must
    // contract sup-norm distances by at least gamma (up to 1e-9 slack).
    double max_excess = -std::numeric_limits<double>::infinity();
    for (int inst = 0; inst < contraction_instances; ++inst) {
        SeededRng rng = SeededRng(seed).fork(static_cast<std::uint64_t>(inst) + 1000);
        const int n = 2 + inst % 2;
        const int states = 2 + inst % 4;
        const int actions = 2 + (inst / 2) % 2;
        const double gamma = 0.5 + 0.45 * rng.uniform();
        const TabularDecMDP mdp = random_decmdp(rng.next_u64(), n, states, actions, 1.0);
        const ExactPolicy pi = ExactPolicy::random(mdp, rng);
        const ExactPolicy mu = ExactPolicy::random(mdp, rng);
        const std::size_t table_size = static_cast<std::size_t>(mdp.num_states * mdp.joint_count());
        auto random_table = [&]() {
            std::vector<double> q(table_size);
            for (auto& v : q) v = rng.uniform(-5.0, 5.0);
            return q;
        };
        auto sup_diff = [](std::span<const double> a, std::span<const double> b) {
            double d = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
            return d;
        };
        std::vector<std::vector<double>> k_dist(static_cast<std::size_t>(mdp.num_states));
        for (auto& row : k_dist) {
            row.resize(static_cast<std::size_t>(n));
            double sum = 0.0;
            for (auto& v : row) {
                v = rng.exponential();
                sum += v;
            }
            for (auto& v : row) v /= sum;
        }
        for (int pair = 0; pair < contraction_pairs; ++pair) {
            const auto q1 = random_table();
            const auto q2 = random_table();
            const double rhs = gamma * sup_diff(q1, q2);
            for (int k = 1; k <= n; ++k) {
                const auto t1 = exact_operator_apply(mdp, q1, pi, mu, k, gamma);
                const auto t2 = exact_operator_apply(mdp, q2, pi, mu, k, gamma);
                max_excess = std::max(max_excess, sup_diff(t1, t2) - rhs);
            }
            const auto m1 = exact_mixture_operator_apply(mdp, q1, pi, mu, k_dist, gamma);
            const auto m2 = exact_mixture_operator_apply(mdp, q2, pi, mu, k_dist, gamma);
            max_excess = std::max(max_excess, sup_diff(m1, m2) - rhs);
        }
    }
    const bool contraction_ok = max_excess <= 1e-9;
    std::cout << (contraction_ok ? "[PASS]" : "[FAIL]") << " operator contraction: max excess " << max_excess << "\n";

    // Value-error bound sweep over random instances and the three canonical
    // PAR policies.
    std::string csv =
        "instance,seed,n,states,actions_per_agent,gamma,pi_par,measured_gap,eps_subopt,eps_fqi,expected_k,tv_bar,"
        "bound_value,holds,measured_gap_dpi,eps_subopt_dpi\n";
    int holds_count = 0;
    int total = 0;
    for (int inst = 0; inst < bound_instances; ++inst) {
        SeededRng rng = SeededRng(seed).fork(static_cast<std::uint64_t>(inst) + 2000);
        const int n = 2 + inst % 2;
        const int states = 2 + inst % 4;
        const int actions = 2 + (inst / 2) % 2;
        const double gamma = 0.5 + 0.45 * rng.uniform();
        const std::uint64_t mdp_seed = rng.next_u64();
        const TabularDecMDP mdp = random_decmdp(mdp_seed, n, states, actions, 1.0);
        const ExactPolicy pi = ExactPolicy::random(mdp, rng);
        const ExactPolicy mu = ExactPolicy::random(mdp, rng);
        const std::vector<std::pair<std::string, std::vector<std::vector<double>>>> par_choices = {
            {"k1", k_point_mass(mdp, 1)}, {"uniform", k_uniform(mdp)}, {"kn", k_point_mass(mdp, n)}};
        for (const auto& [label, k_dist] : par_choices) {
            const BoundReport rep = check_bound(mdp, pi, mu, k_dist, gamma);
            total += 1;
            holds_count += rep.holds ? 1 : 0;
            csv += std::to_string(inst) + "," + std::to_string(mdp_seed) + "," + std::to_string(n) + "," +
                   std::to_string(states) + "," + std::to_string(actions) + "," + fmt_double(gamma) + "," + label +
                   "," + fmt_double(rep.measured_gap) + "," + fmt_double(rep.eps_subopt) + "," +
                   fmt_double(rep.eps_fqi) + "," + fmt_double(rep.expected_k) + "," + fmt_double(rep.tv_bar) + "," +
                   fmt_double(rep.bound_value) + "," + (rep.holds ? "1" : "0") + "," +
                   fmt_double(rep.measured_gap_dpi) + "," + fmt_double(rep.eps_subopt_dpi) + "\n";
        }
    }
    write_file(ctx.out_dir + "/bound_report.csv", csv);
    ctx.artifacts.push_back("bound_report.csv");
    const bool bound_ok = holds_count == total;
    std::cout << (bound_ok ? "[PASS]" : "[FAIL]") << " value-error bound: " << holds_count << "/" << total
              << " instances hold\n";

    ctx.summary.set_double("contraction_max_excess", max_excess);
    ctx.summary.set_int("bound_holds", holds_count);
    ctx.summary.set_int("bound_total", total);
    finish_run(ctx, cfg);
    return contraction_ok && bound_ok ? 0 : 1;
}

void cmd_bench(ConfigMap& cfg) {
    RunContext ctx = begin_run(cfg, "bench");
    const int iterations = static_cast<int>(cfg.get_int("bench.iterations", 100));
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("bench.seed", 7));
    const int ensemble_size = static_cast<int>(cfg.get_int("bench.ensemble_size", 4));
    cfg.finish();

    std::string csv = "n,variant,iterations,non_terminal_transitions,ensemble_evals,evals_per_transition,"
                      "ms_per_iteration\n";
    for (int n : {2, 4, 6}) {
        TabularDecMDP mdp = random_decmdp(seed + static_cast<std::uint64_t>(n), n, 3, 2, 1.0);
        TabularEnv env(std::move(mdp), 10, seed);
        OfflineDataset ds = make_tier(env, Tier::Random, 400, seed);
        for (Variant variant : {Variant::Plcql, Variant::SpacqlEnum}) {
            TrainConfig tc;
            tc.iterations = iterations;
            tc.ensemble_size = ensemble_size;
            tc.batch_size = 32;
            tc.hidden_sizes = {32, 32};
            tc.seed = seed;
            tc.variant = variant;
            tc.eval_every = iterations + 1; // skip periodic eval, keep timing clean
            tc.eval_episodes = 1;
            Trainer trainer(env.clone(), ds, tc);
            const auto t0 = std::chrono::steady_clock::now();
            trainer.run();
            const double ms =
                std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0).count() /
                1000.0;
            const long long evals = static_cast<long long>(trainer.ensemble().bootstrap_evals());
            const long long non_terminal = trainer.non_terminal_processed();
            const double per = non_terminal > 0 ? static_cast<double>(evals) / static_cast<double>(non_terminal) : 0.0;
            csv += std::to_string(n) + "," + variant_name(variant) + "," + std::to_string(iterations) + "," +
                   std::to_string(non_terminal) + "," + std::to_string(evals) + "," + fmt_double(per) + "," +
                   fmt_double(ms / iterations) + "\n";
            std::cout << "bench: n=" << n << " " << variant_name(variant) << " evals/transition=" << per
                      << " ms/iter=" << ms / iterations << "\n";
        }
    }
    write_file(ctx.out_dir + "/bench.csv", csv);
    ctx.artifacts.push_back("bench.csv");
    finish_run(ctx, cfg);
}

int run_command(const std::string& command, ConfigMap cfg) {
    if (command == "gen-data") {
        cmd_gen_data(cfg);
        return 0;
    }
    if (command == "train") {
        cmd_train(cfg);
        return 0;
    }
    if (command == "eval") {
        cmd_eval(cfg);
        return 0;
    }
    if (command == "ablate") {
        cmd_ablate(cfg);
        return 0;
    }
    if (command == "verify") return cmd_verify(cfg) == 0 ? 0 : 3;
    if (command == "bench") {
        cmd_bench(cfg);
        return 0;
    }
    throw ConfigError("unknown command '" + command + "'");
}

int run_cli(int argc, const char* const* argv) {
    static const char* kUsage =
        "usage: plcql <command> [--config FILE] [--KEY VALUE ...]\n"
        "commands: gen-data | train | eval | ablate | verify | bench\n"
        "Flags mirror config keys, e.g. --train.gamma 0.95 overrides train.gamma.\n";
    try {
        if (argc < 2) {
            std::cerr << kUsage;
            return 2;
        }
        const std::string command = argv[1];
        if (command == "help" || command == "--help" || command == "-h") {
            std::cout << kUsage;
            return 0;
        }
        std::string config_path;
        std::vector<std::pair<std::string, std::string>> flags;
        for (int i = 2; i < argc; ++i) {
            const std::string arg = argv[i];
            if (arg.rfind("--", 0) != 0)
                throw ConfigError("unexpected argument '" + arg + "' (flags are --key value)");
            const std::string key = arg.substr(2);
            if (i + 1 >= argc) throw ConfigError("flag --" + key + " needs a value");
            const std::string value = argv[++i];
            if (key == "config")
                config_path = value;
            else
                flags.emplace_back(key, value);
        }
        ConfigMap cfg = config_path.empty() ? ConfigMap{} : ConfigMap::from_file(config_path);
        for (const auto& [k, v] : flags) cfg.overlay(k, v);
        return run_command(command, std::move(cfg));
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace plcql

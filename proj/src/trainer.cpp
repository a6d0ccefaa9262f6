#include "plcql/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "plcql/errors.hpp"
#include "plcql/text_io.hpp"

namespace plcql {

Variant parse_variant(const std::string& name) {
    if (name == "plcql") return Variant::Plcql;
    if (name == "fixed_k") return Variant::FixedK;
    if (name == "spacql_enum") return Variant::SpacqlEnum;
    if (name == "no_uncertainty") return Variant::NoUncertainty;
    throw ConfigError("unknown variant '" + name + "'");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Plcql: return "plcql";
        case Variant::FixedK: return "fixed_k";
        case Variant::SpacqlEnum: return "spacql_enum";
        case Variant::NoUncertainty: return "no_uncertainty";
    }
    return "?";
}

void TrainConfig::validate(int n) const {
    auto fail = [](const std::string& key, const std::string& what) {
        throw ConfigError("config key '" + key + "' " + what);
    };
    if (!(gamma > 0.0 && gamma < 1.0)) fail("train.gamma", "must be in (0, 1)");
    if (!(tau > 0.0 && tau <= 1.0)) fail("train.tau", "must be in (0, 1]");
    if (alpha < 0.0) fail("train.alpha", "must be >= 0");
    if (!lambda.empty() && static_cast<int>(lambda.size()) != n) fail("train.lambda", "must list one weight per agent");
    for (double l : lambda)
        if (l < 0.0) fail("train.lambda", "entries must be >= 0");
    if (temperature <= 0.0) fail("train.temperature", "must be > 0");
    if (clip_eps <= 0.0) fail("train.clip_eps", "must be > 0");
    if (ppo_epochs < 1) fail("train.ppo_epochs", "must be >= 1");
    if (ensemble_size < 2) fail("train.ensemble_size", "must be >= 2");
    if (batch_size < 1) fail("train.batch_size", "must be >= 1");
    if (iterations < 0) fail("train.iterations", "must be >= 0");
    if (lr_q <= 0.0) fail("train.lr_q", "must be > 0");
    if (lr_pi <= 0.0) fail("train.lr_pi", "must be > 0");
    if (lr_par <= 0.0) fail("train.lr_par", "must be > 0");
    if (lr_v <= 0.0) fail("train.lr_v", "must be > 0");
    if (variant == Variant::FixedK && (fixed_k < 1 || fixed_k > n)) fail("train.fixed_k", "must be in [1, n]");
    for (int h : hidden_sizes)
        if (h < 1) fail("train.hidden_sizes", "entries must be >= 1");
    if (eval_every < 1) fail("train.eval_every", "must be >= 1");
    if (eval_episodes < 1) fail("train.eval_episodes", "must be >= 1");
    if (checkpoint_every < 0) fail("train.checkpoint_every", "must be >= 0");
}

std::string IterationMetrics::csv_header() {
    return "iter,td_loss,cql_penalty,mean_q,mean_k,par_entropy,mean_w,mean_u_q,par_surrogate,v_loss,"
           "q_evals_per_transition,eval_return_mean,eval_return_std";
}

std::string IterationMetrics::csv_row() const {
    std::string row = std::to_string(iter);
    for (double v : {td_loss, cql_penalty, mean_q, mean_k, par_entropy, mean_w, mean_u_q, par_surrogate, v_loss,
                     q_evals_per_transition, eval_return_mean, eval_return_std}) {
        row += ',';
        row += fmt_double(v);
    }
    return row;
}

Trainer::Trainer(std::unique_ptr<Env> env, OfflineDataset dataset, TrainConfig cfg)
    : cfg_(std::move(cfg)), env_(std::move(env)), dataset_(std::move(dataset)), batch_rng_(0), target_rng_(0) {
    if (!env_) throw std::invalid_argument("Trainer: null environment");
    if (dataset_.transitions.empty()) throw std::invalid_argument("Trainer: empty dataset");
    const DecMdpSpec& spec = env_->spec();
    if (dataset_.meta.n != spec.n || dataset_.meta.action_counts != spec.action_counts ||
        dataset_.meta.feature_dim != spec.feature_dim)
        throw std::runtime_error("Trainer: dataset metadata does not match the environment");

    cons_cfg_ = cfg_.lambda.empty() ? ConservativeConfig::uniform(spec.n, cfg_.alpha)
                                    : ConservativeConfig{cfg_.alpha, cfg_.lambda};

    SeededRng master(cfg_.seed);
    SeededRng init_rng = master.fork(1);
    ensemble_ = std::make_unique<QEnsemble>(cfg_.ensemble_size, spec, cfg_.hidden_sizes, init_rng);
    policies_ = std::make_unique<AgentPolicySet>(spec, cfg_.hidden_sizes, init_rng);
    par_ = std::make_unique<ParPolicy>(spec.n, spec.feature_dim, cfg_.hidden_sizes, cfg_.temperature, init_rng);
    baseline_ = std::make_unique<Baseline>(spec.feature_dim, cfg_.hidden_sizes, init_rng);

    for (int j = 0; j < cfg_.ensemble_size; ++j) q_opts_.push_back(Optimizer::adam(cfg_.lr_q));
    for (int i = 0; i < spec.n; ++i) pi_opts_.push_back(Optimizer::adam(cfg_.lr_pi));
    par_opt_ = Optimizer::adam(cfg_.lr_par);
    v_opt_ = Optimizer::adam(cfg_.lr_v);

    batch_rng_ = master.fork(2);
    target_rng_ = master.fork(3);
    eval_seed_base_ = master.fork(4).seed();
}

TargetOutcome Trainer::variant_target(const Transition& tr) {
    if (tr.done) {
        TargetOutcome out;
        out.y = tr.r;
        return out;
    }
    const int n = env_->spec().n;
    TargetOutcome out;
    switch (cfg_.variant) {
        case Variant::Plcql:
        case Variant::NoUncertainty:
        case Variant::FixedK: {
            ParTargetOptions opts;
            opts.gamma = cfg_.gamma;
            opts.use_target_policies = cfg_.use_target_policy_replacements;
            opts.forced_k = cfg_.variant == Variant::FixedK ? cfg_.fixed_k : 0;
            const ParTarget pt = par_target(*ensemble_, *policies_, *par_, tr, target_rng_, opts);
            out.y = pt.y;
            out.has_bandit_datum = true;
            out.k = pt.decision.k;
            out.k_log_prob = pt.k_log_prob;
            out.u_q = pt.u_q;
            out.q1 = pt.q1;
            out.mean_k = static_cast<double>(pt.decision.k);
            break;
        }
        case Variant::SpacqlEnum: {
            // Enumerate one subset per size k and blend the per-k targets
            // with softmax-of-negative-uncertainty weights.
            std::vector<double> ys(static_cast<std::size_t>(n));
            std::vector<double> us(static_cast<std::size_t>(n));
            for (int k = 1; k <= n; ++k) {
                ParDecision decision;
                decision.k = k;
                decision.subset = sample_subset(n, k, target_rng_);
                for (int idx : decision.subset) {
                    const auto probs = cfg_.use_target_policy_replacements ? policies_->probs_target(idx, tr.s_next)
                                                                           : policies_->probs(idx, tr.s_next);
                    decision.replacements.push_back(target_rng_.categorical(probs));
                }
                const auto a_par = construct_par_action(tr.a_next, decision);
                const EnsembleEval eval = ensemble_->evaluate_bootstrap(tr.s_next, a_par);
                ys[static_cast<std::size_t>(k - 1)] = tr.r + cfg_.gamma * eval.min_target;
                us[static_cast<std::size_t>(k - 1)] = eval.u_q;
            }
            double weight_sum = 0.0;
            std::vector<double> weights(static_cast<std::size_t>(n));
            for (int k = 0; k < n; ++k) {
                weights[static_cast<std::size_t>(k)] = sigmoid(-us[static_cast<std::size_t>(k)] * cfg_.temperature);
                weight_sum += weights[static_cast<std::size_t>(k)];
            }
            for (int k = 0; k < n; ++k) {
                const double w = weights[static_cast<std::size_t>(k)] / weight_sum;
                out.y += w * ys[static_cast<std::size_t>(k)];
                out.u_q += w * us[static_cast<std::size_t>(k)];
                out.mean_k += w * static_cast<double>(k + 1);
            }
            out.has_bandit_datum = false;
            break;
        }
    }
    return out;
}

IterationMetrics Trainer::run_iteration() {
    const DecMdpSpec& spec = env_->spec();
    const std::uint64_t evals_before = ensemble_->bootstrap_evals();

    // Line-by-line order: batch, per-transition targets and bandit rewards,
    // critic step with the penalty, target Polyak, baseline step, per-agent
    // improvement, PPO update of the PAR policy.
    std::vector<Transition> batch;
    batch.reserve(static_cast<std::size_t>(cfg_.batch_size));
    for (int b = 0; b < cfg_.batch_size; ++b)
        batch.push_back(dataset_.transitions[static_cast<std::size_t>(batch_rng_.uniform_int(static_cast<int>(dataset_.size())))]);

    std::vector<double> targets(batch.size(), 0.0);
    std::vector<PpoDatum> ppo_data;
    std::vector<BaselineDatum> v_data;
    long long non_terminal = 0;
    double sum_k = 0.0, sum_entropy = 0.0, sum_w = 0.0, sum_u = 0.0;

    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Transition& tr = batch[b];
        const TargetOutcome outcome = variant_target(tr);
        targets[b] = outcome.y;
        if (tr.done) continue;
        non_terminal += 1;
        non_terminal_processed_ += 1;
        sum_k += outcome.mean_k;
        sum_u += outcome.u_q;
        sum_entropy += par_->entropy(tr.s_next);
        if (!outcome.has_bandit_datum) continue;
        const double w = cfg_.variant == Variant::NoUncertainty
                             ? 1.0
                             : uncertainty_weight(outcome.u_q, cfg_.temperature);
        sum_w += w;
        const double r_par = w * outcome.q1;
        v_data.push_back(BaselineDatum{tr.s_next, r_par});
        ppo_data.push_back(PpoDatum{tr.s_next, outcome.k, outcome.k_log_prob, r_par, baseline_->value(tr.s_next)});
    }

    CriticLoss critic = critic_loss_and_grads(*ensemble_, batch, targets, *policies_, cons_cfg_);
    for (int j = 0; j < ensemble_->size(); ++j)
        apply_gradients(ensemble_->online()[static_cast<std::size_t>(j)], q_opts_[static_cast<std::size_t>(j)],
                        critic.grads[static_cast<std::size_t>(j)]);
    ensemble_->polyak_targets(cfg_.tau);

    double v_loss = 0.0;
    if (!v_data.empty()) v_loss = baseline_update(*baseline_, v_data, v_opt_);

    for (int i = 0; i < spec.n; ++i) policies_->improve(i, *ensemble_, batch, pi_opts_[static_cast<std::size_t>(i)]);
    policies_->polyak_targets(cfg_.tau);

    double surrogate = 0.0;
    if (!ppo_data.empty()) {
        PpoConfig ppo_cfg;
        ppo_cfg.clip_eps = cfg_.clip_eps;
        ppo_cfg.epochs = cfg_.ppo_epochs;
        ppo_cfg.normalize_advantages = cfg_.advantage_norm;
        surrogate = ppo_update(*par_, ppo_data, ppo_cfg, par_opt_);
    }

    iteration_ += 1;

    IterationMetrics row;
    row.iter = iteration_;
    row.td_loss = critic.td;
    row.cql_penalty = critic.penalty;
    row.mean_q = critic.mean_q;
    row.par_surrogate = surrogate;
    row.v_loss = v_loss;
    if (non_terminal > 0) {
        row.mean_k = sum_k / static_cast<double>(non_terminal);
        row.par_entropy = sum_entropy / static_cast<double>(non_terminal);
        row.mean_u_q = sum_u / static_cast<double>(non_terminal);
        row.q_evals_per_transition = static_cast<double>(ensemble_->bootstrap_evals() - evals_before) /
                                     static_cast<double>(non_terminal);
    }
    if (!ppo_data.empty()) row.mean_w = sum_w / static_cast<double>(ppo_data.size());

    if (!std::isfinite(row.td_loss) || !std::isfinite(row.cql_penalty) || !std::isfinite(row.v_loss) ||
        !std::isfinite(row.par_surrogate))
        throw std::runtime_error("run_iteration: non-finite loss at iteration " + std::to_string(iteration_) +
                                 " (td_loss=" + std::to_string(row.td_loss) + ", penalty=" +
                                 std::to_string(row.cql_penalty) + ")");

    const bool eval_now = iteration_ % cfg_.eval_every == 0 || iteration_ == cfg_.iterations;
    if (eval_now || !last_eval_)
        last_eval_ = evaluate(cfg_.eval_episodes, SeededRng(eval_seed_base_).fork(static_cast<std::uint64_t>(iteration_)).seed());
    row.eval_return_mean = last_eval_->first;
    row.eval_return_std = last_eval_->second;
    return row;
}

std::vector<IterationMetrics> Trainer::run(const std::function<void(const IterationMetrics&)>& sink) {
    std::vector<IterationMetrics> rows;
    rows.reserve(static_cast<std::size_t>(cfg_.iterations));
    for (int it = 0; it < cfg_.iterations; ++it) {
        rows.push_back(run_iteration());
        if (sink) sink(rows.back());
    }
    return rows;
}

std::pair<double, double> Trainer::evaluate(int episodes, std::uint64_t eval_seed) const {
    return evaluate_policies(*env_, *policies_, episodes, eval_seed);
}

std::pair<double, double> evaluate_policies(const Env& env, const AgentPolicySet& policies, int episodes,
                                            std::uint64_t eval_seed) {
    if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
    auto work = env.clone();
    work->reseed(SeededRng(eval_seed).fork(1).seed());
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(episodes));
    for (int ep = 0; ep < episodes; ++ep) {
        EnvState state = work->reset();
        double total = 0.0;
        bool done = false;
        while (!done) {
            const auto joint = policies.act_joint_greedy(state.features);
            StepResult res = work->step(state, joint);
            total += res.reward;
            state = res.next;
            done = res.done;
        }
        returns.push_back(total);
    }
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    var /= static_cast<double>(returns.size());
    return {mean, std::sqrt(var)};
}

void Trainer::save_checkpoints(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    ensemble_->save(dir + "/q_ensemble.txt", cfg_.seed, iteration_, &q_opts_);
    policies_->save(dir, cfg_.seed, iteration_, &pi_opts_);
    par_->save(dir + "/par_policy.txt", cfg_.seed, iteration_, &par_opt_);
    baseline_->save(dir + "/par_baseline.txt", cfg_.seed, iteration_, &v_opt_);
}

void Trainer::load_checkpoints(const std::string& dir) {
    const DecMdpSpec& spec = env_->spec();
    iteration_ = TextDoc::load(dir + "/q_ensemble.txt").get_int("step");
    std::vector<Optimizer> q_opts;
    ensemble_ = std::make_unique<QEnsemble>(QEnsemble::load(dir + "/q_ensemble.txt", spec, &q_opts));
    q_opts_ = std::move(q_opts);
    std::vector<Optimizer> pi_opts;
    policies_ = std::make_unique<AgentPolicySet>(AgentPolicySet::load(dir, spec, &pi_opts));
    pi_opts_ = std::move(pi_opts);
    par_ = std::make_unique<ParPolicy>(ParPolicy::load(dir + "/par_policy.txt", cfg_.temperature, &par_opt_));
    baseline_ = std::make_unique<Baseline>(Baseline::load(dir + "/par_baseline.txt", &v_opt_));
}

} // namespace plcql

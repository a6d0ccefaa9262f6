#include "plcql/par_policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "plcql/checkpoint.hpp"
#include "plcql/ensemble.hpp"
#include "plcql/errors.hpp"

namespace plcql {

double uncertainty_weight(double u_q, double temperature) {
    if (u_q < 0.0) throw std::invalid_argument("uncertainty_weight: u_q must be >= 0");
    if (temperature <= 0.0) throw std::invalid_argument("uncertainty_weight: temperature must be > 0");
    return sigmoid(-u_q * temperature) + 0.5;
}

double clipped_surrogate(double rho, double adv, double clip_eps) {
    const double clipped = std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps);
    return std::min(rho * adv, clipped * adv);
}

ParPolicy::ParPolicy(int n, int feature_dim, const std::vector<int>& hidden_sizes, double temperature, SeededRng& rng)
    : temperature_(temperature) {
    if (n < 1) throw std::invalid_argument("ParPolicy: need n >= 1 subset sizes");
    if (temperature <= 0.0) throw std::invalid_argument("ParPolicy: temperature must be > 0");
    std::vector<int> sizes;
    sizes.push_back(feature_dim);
    sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
    sizes.push_back(n);
    net_ = Mlp::init(sizes, rng);
    old_net_ = net_;
}

std::vector<double> ParPolicy::probs(std::span<const double> features) const {
    return softmax(forward(net_, features));
}

double ParPolicy::log_prob(std::span<const double> features, int k) const {
    if (k < 1 || k > num_sizes()) throw std::invalid_argument("ParPolicy::log_prob: k out of range");
    return std::log(probs(features)[static_cast<std::size_t>(k - 1)]);
}

double ParPolicy::entropy(std::span<const double> features) const {
    const auto p = probs(features);
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

std::pair<int, double> ParPolicy::sample_k(std::span<const double> features, SeededRng& rng) const {
    const auto p = probs(features);
    const int idx = rng.categorical(p);
    return {idx + 1, std::log(p[static_cast<std::size_t>(idx)])};
}

double ParPolicy::expected_k(std::span<const double> features) const {
    const auto p = probs(features);
    double e = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) e += p[i] * static_cast<double>(i + 1);
    return e;
}

void ParPolicy::save(const std::string& path, std::uint64_t rng_seed, long long step, const Optimizer* opt) const {
    TextDoc doc = make_checkpoint("par_policy", rng_seed, step);
    doc.set_double("temperature", temperature_);
    write_net(doc, "online", net_);
    write_net(doc, "old", old_net_);
    if (opt) write_optimizer(doc, "opt", *opt, net_);
    doc.save(path);
}

ParPolicy ParPolicy::load(const std::string& path, double temperature, Optimizer* opt) {
    TextDoc doc = open_checkpoint(path, "par_policy");
    ParPolicy par;
    par.temperature_ = temperature > 0.0 ? temperature : doc.get_double("temperature");
    par.net_ = read_net(doc, "online");
    par.old_net_ = read_net(doc, "old");
    if (opt) *opt = read_optimizer(doc, "opt", par.net_);
    return par;
}

Baseline::Baseline(int feature_dim, const std::vector<int>& hidden_sizes, SeededRng& rng) {
    std::vector<int> sizes;
    sizes.push_back(feature_dim);
    sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
    sizes.push_back(1);
    net_ = Mlp::init(sizes, rng);
}

double Baseline::value(std::span<const double> features) const { return forward(net_, features)[0]; }

void Baseline::save(const std::string& path, std::uint64_t rng_seed, long long step, const Optimizer* opt) const {
    TextDoc doc = make_checkpoint("par_baseline", rng_seed, step);
    write_net(doc, "online", net_);
    if (opt) write_optimizer(doc, "opt", *opt, net_);
    doc.save(path);
}

Baseline Baseline::load(const std::string& path, Optimizer* opt) {
    TextDoc doc = open_checkpoint(path, "par_baseline");
    Baseline b;
    b.net_ = read_net(doc, "online");
    if (opt) *opt = read_optimizer(doc, "opt", b.net_);
    return b;
}

ParReward par_reward(const QEnsemble& ens, std::span<const double> s_next, std::span<const int> a_par, int k,
                     double temperature) {
    const EnsembleEval eval = ens.evaluate_bootstrap(s_next, a_par);
    return par_reward_from(eval.u_q, eval.q1, k, temperature);
}

ParReward par_reward_from(double u_q, double q1, int k, double temperature) {
    ParReward out;
    out.k = k;
    out.u_q = u_q;
    out.w = uncertainty_weight(u_q, temperature);
    out.r_par = out.w * q1;
    return out;
}

double baseline_update(Baseline& baseline, std::span<const BaselineDatum> batch, Optimizer& opt) {
    if (batch.empty()) throw std::invalid_argument("baseline_update: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    GradientBundle grads = GradientBundle::zeros_like(baseline.net());
    for (const auto& d : batch) {
        ForwardCache cache;
        const double v = forward(baseline.net(), d.s_next, cache)[0];
        const double resid = v - d.r_par;
        loss += resid * resid * inv_b;
        const double up[1] = {2.0 * resid * inv_b};
        backward_accumulate(baseline.net(), cache, up, grads);
    }
    apply_gradients(baseline.net(), opt, grads);
    return loss;
}

double ppo_update(ParPolicy& par, std::span<const PpoDatum> batch, const PpoConfig& cfg, Optimizer& opt) {
    if (batch.empty()) throw std::invalid_argument("ppo_update: empty batch");
    if (cfg.clip_eps <= 0.0) throw std::invalid_argument("ppo_update: clip_eps must be > 0");
    if (cfg.epochs < 1) throw std::invalid_argument("ppo_update: epochs must be >= 1");

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    std::vector<double> adv(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        adv[b] = batch[b].r_par - batch[b].v_frozen;
        if (!std::isfinite(adv[b])) throw std::invalid_argument("ppo_update: non-finite advantage");
    }
    if (cfg.normalize_advantages && batch.size() > 1) {
        double mean = 0.0;
        for (double a : adv) mean += a;
        mean *= inv_b;
        double var = 0.0;
        for (double a : adv) var += (a - mean) * (a - mean);
        var *= inv_b;
        const double denom = std::sqrt(var) + 1e-8;
        for (double& a : adv) a = (a - mean) / denom;
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        GradientBundle grads = GradientBundle::zeros_like(par.net());
        for (std::size_t b = 0; b < batch.size(); ++b) {
            ForwardCache cache;
            const auto logits = forward(par.net(), batch[b].s_next, cache);
            const auto p = softmax(logits);
            const std::size_t idx = static_cast<std::size_t>(batch[b].k - 1);
            const double log_p = std::log(p[idx]);
            const double rho = std::exp(log_p - batch[b].old_log_prob);
            // Outside the clip band the selected branch is constant in theta.
            const bool clipped_out = (adv[b] >= 0.0 && rho >= 1.0 + cfg.clip_eps) ||
                                     (adv[b] < 0.0 && rho <= 1.0 - cfg.clip_eps);
            if (clipped_out) continue;
            // d(rho * adv)/dlogits = rho * adv * (onehot(k) - p).
            std::vector<double> upstream(p.size());
            const double coeff = rho * adv[b] * inv_b;
            for (std::size_t c = 0; c < p.size(); ++c)
                upstream[c] = coeff * ((c == idx ? 1.0 : 0.0) - p[c]);
            backward_accumulate(par.net(), cache, upstream, grads);
        }
        grads.scale(-1.0); // ascent
        apply_gradients(par.net(), opt, grads);
    }

    double surrogate = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const double log_p = par.log_prob(batch[b].s_next, batch[b].k);
        const double rho = std::exp(log_p - batch[b].old_log_prob);
        surrogate += clipped_surrogate(rho, adv[b], cfg.clip_eps) * inv_b;
    }
    par.refresh_old_snapshot();
    return surrogate;
}

} // namespace plcql

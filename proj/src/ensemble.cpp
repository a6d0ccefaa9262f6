#include "plcql/ensemble.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "plcql/agent_policies.hpp"
#include "plcql/checkpoint.hpp"
#include "plcql/errors.hpp"

namespace plcql {

namespace {

std::vector<int> q_layer_sizes(const DecMdpSpec& spec, const std::vector<int>& hidden) {
    int action_dims = 0;
    for (int c : spec.action_counts) action_dims += c;
    std::vector<int> sizes;
    sizes.push_back(spec.feature_dim + action_dims);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    return sizes;
}

} // namespace

QEnsemble::QEnsemble(int ensemble_size, const DecMdpSpec& spec, const std::vector<int>& hidden_sizes, SeededRng& rng) {
    if (ensemble_size < 1) throw std::invalid_argument("QEnsemble: ensemble size must be >= 1");
    spec_ = spec;
    const auto sizes = q_layer_sizes(spec, hidden_sizes);
    input_dim_ = sizes.front();
    for (int j = 0; j < ensemble_size; ++j) {
        online_.push_back(Mlp::init(sizes, rng));
        target_.push_back(online_.back()); // targets start as copies
    }
}

std::vector<double> QEnsemble::encode(std::span<const double> features, std::span<const int> joint) const {
    if (static_cast<int>(features.size()) != spec_.feature_dim)
        throw std::invalid_argument("QEnsemble: feature dimension mismatch");
    spec_.validate_joint(joint);
    std::vector<double> x(static_cast<std::size_t>(input_dim_), 0.0);
    std::copy(features.begin(), features.end(), x.begin());
    std::size_t off = static_cast<std::size_t>(spec_.feature_dim);
    for (int i = 0; i < spec_.n; ++i) {
        x[off + static_cast<std::size_t>(joint[static_cast<std::size_t>(i)])] = 1.0;
        off += static_cast<std::size_t>(spec_.action_counts[static_cast<std::size_t>(i)]);
    }
    return x;
}

std::vector<double> QEnsemble::q_all(std::span<const double> features, std::span<const int> joint) const {
    const auto x = encode(features, joint);
    std::vector<double> out;
    out.reserve(online_.size());
    for (const auto& net : online_) out.push_back(forward(net, x)[0]);
    return out;
}

std::vector<double> QEnsemble::q_all_target(std::span<const double> features, std::span<const int> joint) const {
    const auto x = encode(features, joint);
    std::vector<double> out;
    out.reserve(target_.size());
    for (const auto& net : target_) out.push_back(forward(net, x)[0]);
    return out;
}

double QEnsemble::q_member(int j, std::span<const double> features, std::span<const int> joint) const {
    return forward(online_[static_cast<std::size_t>(j)], encode(features, joint))[0];
}

double QEnsemble::q_min_target(std::span<const double> features, std::span<const int> joint) const {
    const auto vals = q_all_target(features, joint);
    return *std::min_element(vals.begin(), vals.end());
}

double QEnsemble::uncertainty(std::span<const double> features, std::span<const int> joint) const {
    if (size() < 2) throw std::invalid_argument("QEnsemble::uncertainty: needs at least two members");
    const auto vals = q_all(features, joint);
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size()); // population convention
    return std::sqrt(var);
}

EnsembleEval QEnsemble::evaluate_bootstrap(std::span<const double> features, std::span<const int> joint) const {
    const auto x = encode(features, joint);
    EnsembleEval eval;
    double min_t = std::numeric_limits<double>::infinity();
    for (const auto& net : target_) min_t = std::min(min_t, forward(net, x)[0]);
    eval.min_target = min_t;

    double mean = 0.0;
    std::vector<double> vals;
    vals.reserve(online_.size());
    for (const auto& net : online_) {
        vals.push_back(forward(net, x)[0]);
        mean += vals.back();
    }
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size());
    eval.u_q = std::sqrt(var);
    eval.q1 = vals.front();
    bootstrap_evals_ += 1;
    return eval;
}

void QEnsemble::polyak_targets(double tau) {
    for (std::size_t j = 0; j < online_.size(); ++j) polyak(target_[j], online_[j], tau);
}

void QEnsemble::save(const std::string& path, std::uint64_t rng_seed, long long step,
                     const std::vector<Optimizer>* opts) const {
    TextDoc doc = make_checkpoint("q_ensemble", rng_seed, step);
    doc.set_int("ensemble_size", size());
    for (int j = 0; j < size(); ++j) {
        write_net(doc, "online_" + std::to_string(j), online_[static_cast<std::size_t>(j)]);
        write_net(doc, "target_" + std::to_string(j), target_[static_cast<std::size_t>(j)]);
        if (opts)
            write_optimizer(doc, "opt_" + std::to_string(j), (*opts)[static_cast<std::size_t>(j)],
                            online_[static_cast<std::size_t>(j)]);
    }
    doc.save(path);
}

QEnsemble QEnsemble::load(const std::string& path, const DecMdpSpec& spec, std::vector<Optimizer>* opts) {
    TextDoc doc = open_checkpoint(path, "q_ensemble");
    QEnsemble ens;
    ens.spec_ = spec;
    const int count = static_cast<int>(doc.get_int("ensemble_size"));
    for (int j = 0; j < count; ++j) {
        ens.online_.push_back(read_net(doc, "online_" + std::to_string(j)));
        ens.target_.push_back(read_net(doc, "target_" + std::to_string(j)));
        if (opts) opts->push_back(read_optimizer(doc, "opt_" + std::to_string(j), ens.online_.back()));
    }
    if (ens.online_.empty()) throw IoError("q_ensemble checkpoint holds no members");
    ens.input_dim_ = ens.online_.front().input_dim();
    int action_dims = 0;
    for (int c : spec.action_counts) action_dims += c;
    if (ens.input_dim_ != spec.feature_dim + action_dims)
        throw IoError("q_ensemble checkpoint input dimension does not match the environment");
    return ens;
}

ConservativeConfig ConservativeConfig::uniform(int n, double alpha) {
    ConservativeConfig cfg;
    cfg.alpha = alpha;
    cfg.lambda.assign(static_cast<std::size_t>(n), 1.0 / n);
    return cfg;
}

void ConservativeConfig::validate(int n) const {
    if (alpha < 0.0) throw std::invalid_argument("ConservativeConfig: alpha must be >= 0");
    if (static_cast<int>(lambda.size()) != n)
        throw std::invalid_argument("ConservativeConfig: lambda must have length n");
    for (double l : lambda)
        if (l < 0.0) throw std::invalid_argument("ConservativeConfig: lambda entries must be >= 0");
}

double conservative_penalty(const QEnsemble& ens, std::span<const Transition> batch, const AgentPolicySet& policies,
                            const ConservativeConfig& cfg) {
    const DecMdpSpec& spec = ens.env_spec();
    cfg.validate(spec.n);
    if (batch.empty()) throw std::invalid_argument("conservative_penalty: empty batch");
    if (cfg.alpha == 0.0) return 0.0;

    double total = 0.0;
    for (const auto& tr : batch) {
        double per_transition = 0.0;
        const double q_data = ens.q_member(0, tr.s, tr.a);
        for (int i = 0; i < spec.n; ++i) {
            const auto probs = policies.probs(i, tr.s);
            std::vector<int> joint = tr.a;
            double expect = 0.0;
            for (int a = 0; a < spec.action_counts[static_cast<std::size_t>(i)]; ++a) {
                joint[static_cast<std::size_t>(i)] = a;
                expect += probs[static_cast<std::size_t>(a)] * ens.q_member(0, tr.s, joint);
            }
            per_transition += cfg.lambda[static_cast<std::size_t>(i)] * (expect - q_data);
        }
        total += per_transition;
    }
    return cfg.alpha * total / static_cast<double>(batch.size());
}

CriticLoss critic_loss_and_grads(const QEnsemble& ens, std::span<const Transition> batch,
                                 std::span<const double> targets, const AgentPolicySet& policies,
                                 const ConservativeConfig& cfg) {
    const DecMdpSpec& spec = ens.env_spec();
    cfg.validate(spec.n);
    if (batch.empty()) throw std::invalid_argument("critic_loss_and_grads: empty batch");
    if (targets.size() != batch.size()) throw std::invalid_argument("critic_loss_and_grads: missing targets");

    const int J = ens.size();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    CriticLoss out;
    out.grads.reserve(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j)
        out.grads.push_back(GradientBundle::zeros_like(ens.online()[static_cast<std::size_t>(j)]));

    // TD part: every member regresses to the same fixed target.
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto x = ens.encode(batch[b].s, batch[b].a);
        for (int j = 0; j < J; ++j) {
            ForwardCache cache;
            const double q = forward(ens.online()[static_cast<std::size_t>(j)], x, cache)[0];
            const double resid = q - targets[b];
            out.td += resid * resid * inv_b;
            out.mean_q += q * inv_b / static_cast<double>(J);
            const double up[1] = {2.0 * resid * inv_b};
            backward_accumulate(ens.online()[static_cast<std::size_t>(j)], cache, up,
                                out.grads[static_cast<std::size_t>(j)]);
        }
    }

    // Conservative penalty: exact per-agent expectations, member 1 only.
    if (cfg.alpha > 0.0) {
        double lambda_sum = 0.0;
        for (double l : cfg.lambda) lambda_sum += l;
        const Mlp& q1 = ens.online().front();
        GradientBundle& g1 = out.grads.front();
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const auto x_data = ens.encode(batch[b].s, batch[b].a);
            ForwardCache cache;
            const double q_data = forward(q1, x_data, cache)[0];
            const double up_data[1] = {-cfg.alpha * lambda_sum * inv_b};
            backward_accumulate(q1, cache, up_data, g1);
            out.penalty += -cfg.alpha * lambda_sum * q_data * inv_b;
            for (int i = 0; i < spec.n; ++i) {
                const auto probs = policies.probs(i, batch[b].s);
                std::vector<int> joint = batch[b].a;
                for (int a = 0; a < spec.action_counts[static_cast<std::size_t>(i)]; ++a) {
                    joint[static_cast<std::size_t>(i)] = a;
                    const auto x = ens.encode(batch[b].s, joint);
                    ForwardCache c2;
                    const double q = forward(q1, x, c2)[0];
                    const double coeff = cfg.alpha * cfg.lambda[static_cast<std::size_t>(i)] *
                                         probs[static_cast<std::size_t>(a)] * inv_b;
                    out.penalty += coeff * q;
                    const double up[1] = {coeff};
                    backward_accumulate(q1, c2, up, g1);
                }
            }
        }
    }
    return out;
}

} // namespace plcql

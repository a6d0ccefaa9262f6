#include "plcql/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace plcql {

namespace {

void check_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output layer sizes");
    for (int s : sizes)
        if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
}

} // namespace

Mlp Mlp::init(std::vector<int> sizes, SeededRng& rng) {
    check_sizes(sizes);
    Mlp net;
    net.layer_sizes = std::move(sizes);
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        const int in = net.layer_sizes[l];
        const int out = net.layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::vector<double> w(static_cast<std::size_t>(in) * out);
        for (auto& x : w) x = rng.uniform(-bound, bound);
        std::vector<double> b(static_cast<std::size_t>(out));
        for (auto& x : b) x = rng.uniform(-bound, bound);
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

Mlp Mlp::zeros(std::vector<int> sizes) {
    check_sizes(sizes);
    Mlp net;
    net.layer_sizes = std::move(sizes);
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        const int in = net.layer_sizes[l];
        const int out = net.layer_sizes[l + 1];
        net.weights.emplace_back(static_cast<std::size_t>(in) * out, 0.0);
        net.biases.emplace_back(static_cast<std::size_t>(out), 0.0);
    }
    return net;
}

std::size_t Mlp::param_count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) total += weights[l].size() + biases[l].size();
    return total;
}

bool Mlp::same_shape(const Mlp& other) const { return layer_sizes == other.layer_sizes; }

std::vector<double> Mlp::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (std::size_t l = 0; l < weights.size(); ++l) {
        flat.insert(flat.end(), weights[l].begin(), weights[l].end());
        flat.insert(flat.end(), biases[l].begin(), biases[l].end());
    }
    return flat;
}

void Mlp::unflatten(std::span<const double> flat) {
    if (flat.size() != param_count()) throw std::invalid_argument("Mlp::unflatten: size mismatch");
    std::size_t pos = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        std::copy_n(flat.begin() + pos, weights[l].size(), weights[l].begin());
        pos += weights[l].size();
        std::copy_n(flat.begin() + pos, biases[l].size(), biases[l].begin());
        pos += biases[l].size();
    }
}

GradientBundle GradientBundle::zeros_like(const Mlp& net) {
    GradientBundle g;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        g.weights.emplace_back(net.weights[l].size(), 0.0);
        g.biases.emplace_back(net.biases[l].size(), 0.0);
    }
    return g;
}

bool GradientBundle::shape_matches(const Mlp& net) const {
    if (weights.size() != net.weights.size() || biases.size() != net.biases.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l)
        if (weights[l].size() != net.weights[l].size() || biases[l].size() != net.biases[l].size()) return false;
    return true;
}

void GradientBundle::add_scaled(const GradientBundle& other, double c) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += c * other.weights[l][i];
        for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += c * other.biases[l][i];
    }
}

void GradientBundle::scale(double c) {
    for (auto& w : weights)
        for (auto& x : w) x *= c;
    for (auto& b : biases)
        for (auto& x : b) x *= c;
}

std::vector<double> GradientBundle::flatten() const {
    std::vector<double> flat;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        flat.insert(flat.end(), weights[l].begin(), weights[l].end());
        flat.insert(flat.end(), biases[l].begin(), biases[l].end());
    }
    return flat;
}

void GradientBundle::unflatten(std::span<const double> flat) {
    std::size_t pos = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        std::copy_n(flat.begin() + pos, weights[l].size(), weights[l].begin());
        pos += weights[l].size();
        std::copy_n(flat.begin() + pos, biases[l].size(), biases[l].begin());
        pos += biases[l].size();
    }
    if (pos != flat.size()) throw std::invalid_argument("GradientBundle::unflatten: size mismatch");
}

std::vector<double> forward(const Mlp& net, std::span<const double> x) {
    ForwardCache cache;
    return forward(net, x, cache);
}

std::vector<double> forward(const Mlp& net, std::span<const double> x, ForwardCache& cache) {
    if (static_cast<int>(x.size()) != net.input_dim())
        throw std::invalid_argument("forward: input dimension mismatch");
    cache.acts.assign(net.num_layers() + 1, {});
    cache.acts[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const int in = net.layer_sizes[l];
        const int out = net.layer_sizes[l + 1];
        const auto& prev = cache.acts[l];
        std::vector<double> z(static_cast<std::size_t>(out));
        const double* w = net.weights[l].data();
        for (int o = 0; o < out; ++o) {
            double sum = net.biases[l][static_cast<std::size_t>(o)];
            const double* row = w + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) sum += row[i] * prev[static_cast<std::size_t>(i)];
            z[static_cast<std::size_t>(o)] = sum;
        }
        const bool hidden = l + 1 < net.num_layers();
        if (hidden)
            for (auto& v : z) v = std::tanh(v);
        cache.acts[l + 1] = std::move(z);
    }
    return cache.acts.back();
}

GradientBundle backward(const Mlp& net, std::span<const double> x, std::span<const double> upstream) {
    ForwardCache cache;
    forward(net, x, cache);
    return backward(net, cache, upstream);
}

GradientBundle backward(const Mlp& net, const ForwardCache& cache, std::span<const double> upstream) {
    GradientBundle grads = GradientBundle::zeros_like(net);
    backward_accumulate(net, cache, upstream, grads);
    return grads;
}

void backward_accumulate(const Mlp& net, const ForwardCache& cache, std::span<const double> upstream,
                         GradientBundle& grads) {
    if (static_cast<int>(upstream.size()) != net.output_dim())
        throw std::invalid_argument("backward: upstream dimension mismatch");
    if (!grads.shape_matches(net)) throw std::invalid_argument("backward: gradient shape mismatch");

    std::vector<double> delta(upstream.begin(), upstream.end());
    for (std::size_t l = net.num_layers(); l-- > 0;) {
        const int in = net.layer_sizes[l];
        const int out = net.layer_sizes[l + 1];
        const auto& prev = cache.acts[l];
        double* gw = grads.weights[l].data();
        for (int o = 0; o < out; ++o) {
            const double d = delta[static_cast<std::size_t>(o)];
            grads.biases[l][static_cast<std::size_t>(o)] += d;
            double* row = gw + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) row[i] += d * prev[static_cast<std::size_t>(i)];
        }
        if (l == 0) break;
        std::vector<double> next(static_cast<std::size_t>(in), 0.0);
        const double* w = net.weights[l].data();
        for (int o = 0; o < out; ++o) {
            const double d = delta[static_cast<std::size_t>(o)];
            const double* row = w + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) next[static_cast<std::size_t>(i)] += row[i] * d;
        }
        // prev holds tanh outputs of layer l-1; tanh' = 1 - a^2.
        for (int i = 0; i < in; ++i) {
            const double a = prev[static_cast<std::size_t>(i)];
            next[static_cast<std::size_t>(i)] *= 1.0 - a * a;
        }
        delta = std::move(next);
    }
}

Optimizer Optimizer::sgd(double lr) {
    Optimizer o;
    o.mode = Mode::Sgd;
    o.lr = lr;
    return o;
}

Optimizer Optimizer::adam(double lr) {
    Optimizer o;
    o.mode = Mode::Adam;
    o.lr = lr;
    return o;
}

void apply_gradients(Mlp& net, Optimizer& opt, const GradientBundle& g) {
    if (!g.shape_matches(net)) throw std::invalid_argument("apply_gradients: shape mismatch");
    if (opt.lr <= 0.0) throw std::invalid_argument("apply_gradients: step size must be positive");
    opt.step += 1;
    if (opt.mode == Optimizer::Mode::Sgd) {
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            for (std::size_t i = 0; i < net.weights[l].size(); ++i) net.weights[l][i] -= opt.lr * g.weights[l][i];
            for (std::size_t i = 0; i < net.biases[l].size(); ++i) net.biases[l][i] -= opt.lr * g.biases[l][i];
        }
        return;
    }
    if (opt.m.weights.empty()) {
        opt.m = GradientBundle::zeros_like(net);
        opt.v = GradientBundle::zeros_like(net);
    }
    if (!opt.m.shape_matches(net)) throw std::invalid_argument("apply_gradients: optimizer state shape mismatch");
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    auto update = [&](std::vector<double>& p, std::vector<double>& m, std::vector<double>& v,
                      const std::vector<double>& grad) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * grad[i];
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
        }
    };
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        update(net.weights[l], opt.m.weights[l], opt.v.weights[l], g.weights[l]);
        update(net.biases[l], opt.m.biases[l], opt.v.biases[l], g.biases[l]);
    }
}

void polyak(Mlp& target, const Mlp& online, double tau) {
    if (!target.same_shape(online)) throw std::invalid_argument("polyak: architecture mismatch");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("polyak: tau must be in (0, 1]");
    for (std::size_t l = 0; l < target.weights.size(); ++l) {
        for (std::size_t i = 0; i < target.weights[l].size(); ++i)
            target.weights[l][i] = (1.0 - tau) * target.weights[l][i] + tau * online.weights[l][i];
        for (std::size_t i = 0; i < target.biases[l].size(); ++i)
            target.biases[l][i] = (1.0 - tau) * target.biases[l][i] + tau * online.biases[l][i];
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
    for (double v : logits)
        if (!std::isfinite(v)) throw std::invalid_argument("softmax: non-finite logit");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace plcql

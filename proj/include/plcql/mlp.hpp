#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "plcql/rng.hpp"

namespace plcql {

struct GradientBundle;

/// Fully-connected network with tanh hidden layers and a linear output head.
/// Weights are stored row-major per layer: weights[l][out * in_dim + in].
struct Mlp {
    std::vector<int> layer_sizes; // [input, hidden..., output]
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    /// Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    static Mlp init(std::vector<int> sizes, SeededRng& rng);
    static Mlp zeros(std::vector<int> sizes);

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    std::size_t num_layers() const { return weights.size(); }
    std::size_t param_count() const;
    bool same_shape(const Mlp& other) const;

    std::vector<double> flatten() const;
    void unflatten(std::span<const double> flat);
};

/// Per-parameter arrays, shape-congruent with an owning Mlp.
struct GradientBundle {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    static GradientBundle zeros_like(const Mlp& net);
    bool shape_matches(const Mlp& net) const;
    void add_scaled(const GradientBundle& other, double c);
    void scale(double c);
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> flat);
};

/// Intermediate activations kept from a forward pass; acts[0] is the input,
/// acts[l] for l >= 1 is the (tanh) output of layer l-1, acts.back() linear.
struct ForwardCache {
    std::vector<std::vector<double>> acts;
};

std::vector<double> forward(const Mlp& net, std::span<const double> x);
std::vector<double> forward(const Mlp& net, std::span<const double> x, ForwardCache& cache);

/// Gradient of L = upstream . forward(net, x) with respect to all parameters.
GradientBundle backward(const Mlp& net, std::span<const double> x, std::span<const double> upstream);
/// Variant reusing a cache from forward(); avoids recomputing activations.
GradientBundle backward(const Mlp& net, const ForwardCache& cache, std::span<const double> upstream);
void backward_accumulate(const Mlp& net, const ForwardCache& cache, std::span<const double> upstream,
                         GradientBundle& grads);

/// First-order optimizer: plain SGD or adaptive moments (0.9 / 0.999 decay).
/// Minimization convention; pass negated gradients for ascent steps.
struct Optimizer {
    enum class Mode { Sgd, Adam };

    Mode mode = Mode::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    GradientBundle m;
    GradientBundle v;
    long long step = 0;

    static Optimizer sgd(double lr);
    static Optimizer adam(double lr);
};

void apply_gradients(Mlp& net, Optimizer& opt, const GradientBundle& g);

/// target <- (1 - tau) * target + tau * online, elementwise.
void polyak(Mlp& target, const Mlp& online, double tau);

/// Numerically stable softmax; rejects non-finite logits.
std::vector<double> softmax(std::span<const double> logits);

double sigmoid(double x);

} // namespace plcql

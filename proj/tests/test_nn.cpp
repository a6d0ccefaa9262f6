#include <doctest.h>

#include <cmath>

#include "plcql/checkpoint.hpp"
#include "plcql/errors.hpp"
#include "plcql/mlp.hpp"
#include "plcql/text_io.hpp"
#include "test_helpers.hpp"

using namespace plcql;
using namespace plcql::testing;

TEST_SUITE_BEGIN("nn");

TEST_CASE("forward: zero-weight net maps anything to zero") {
    Mlp net = Mlp::zeros({3, 8, 2});
    const auto y = forward(net, std::vector<double>{0.3, -1.5, 2.0});
    CHECK(y.size() == 2);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
}

TEST_CASE("forward: single identity layer passes the input through") {
    Mlp net = Mlp::zeros({2, 2});
    net.weights[0] = {1.0, 0.0, 0.0, 1.0};
    const auto y = forward(net, std::vector<double>{1.0, 2.0});
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(y[1] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("forward: matches an independently coded pass on a seeded net") {
    SeededRng rng(99);
    Mlp net = Mlp::init({4, 7, 5, 3}, rng);
    const auto x = random_vec(rng, 4);
    const auto got = forward(net, x);
    const auto expected = scratch_forward(net, x);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("forward: rejects dimension mismatches") {
    SeededRng rng(1);
    Mlp net = Mlp::init({3, 2}, rng);
    CHECK_THROWS_AS(forward(net, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("backward: forced single-layer case") {
    Mlp net = Mlp::zeros({2, 1});
    const auto g = backward(net, std::vector<double>{1.0, 0.0}, std::vector<double>{1.0});
    CHECK(g.weights[0][0] == 1.0);
    CHECK(g.weights[0][1] == 0.0);
    CHECK(g.biases[0][0] == 1.0);
}

TEST_CASE("backward: zero upstream gives an all-zero bundle") {
    SeededRng rng(7);
    Mlp net = Mlp::init({3, 6, 2}, rng);
    const auto g = backward(net, random_vec(rng, 3), std::vector<double>{0.0, 0.0});
    for (double v : g.flatten()) CHECK(v == 0.0);
}

TEST_CASE("backward: matches central finite differences on a 2-hidden-layer net") {
    SeededRng rng(1234);
    Mlp net = Mlp::init({3, 8, 8, 2}, rng);
    const auto x = random_vec(rng, 3);
    const auto upstream = random_vec(rng, 2);
    const auto analytic = backward(net, x, upstream).flatten();
    const auto numeric = fd_gradient(net, x, upstream);
    CHECK(max_rel_error(analytic, numeric) <= 1e-4);
}

TEST_CASE("backward: rejects bad upstream size") {
    SeededRng rng(2);
    Mlp net = Mlp::init({3, 2}, rng);
    CHECK_THROWS_AS(backward(net, random_vec(rng, 3), std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("apply_gradients: zero gradient leaves parameters unchanged") {
    SeededRng rng(5);
    Mlp net = Mlp::init({2, 4, 1}, rng);
    const auto before = net.flatten();
    Optimizer opt = Optimizer::adam(0.1);
    apply_gradients(net, opt, GradientBundle::zeros_like(net));
    CHECK(net.flatten() == before);
    CHECK(opt.step == 1);
}

TEST_CASE("apply_gradients: plain SGD forced step") {
    Mlp net = Mlp::zeros({1, 1});
    Optimizer opt = Optimizer::sgd(0.1);
    GradientBundle g = GradientBundle::zeros_like(net);
    g.weights[0][0] = 1.0;
    apply_gradients(net, opt, g);
    CHECK(net.weights[0][0] == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("apply_gradients: adaptive mode matches a scratch reimplementation") {
    SeededRng rng(11);
    Mlp net = Mlp::init({2, 3, 1}, rng);
    Optimizer opt = Optimizer::adam(1e-2);

    // Scratch Adam over the flattened parameter vector.
    std::vector<double> p = net.flatten();
    std::vector<double> m(p.size(), 0.0), v(p.size(), 0.0);
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 1e-2;

    GradientBundle g = GradientBundle::zeros_like(net);
    for (int step = 1; step <= 5; ++step) {
        std::vector<double> flat_g(p.size());
        for (auto& x : flat_g) x = rng.uniform(-1.0, 1.0);
        g.unflatten(flat_g);
        apply_gradients(net, opt, g);
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1 - b1) * flat_g[i];
            v[i] = b2 * v[i] + (1 - b2) * flat_g[i] * flat_g[i];
            const double mhat = m[i] / (1 - std::pow(b1, step));
            const double vhat = v[i] / (1 - std::pow(b2, step));
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
    const auto got = net.flatten();
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(got[i] == doctest::Approx(p[i]).epsilon(1e-12));
}

TEST_CASE("apply_gradients: shape mismatch is rejected") {
    SeededRng rng(3);
    Mlp net = Mlp::init({2, 3}, rng);
    Mlp other = Mlp::init({2, 4}, rng);
    Optimizer opt = Optimizer::sgd(0.1);
    CHECK_THROWS_AS(apply_gradients(net, opt, GradientBundle::zeros_like(other)), std::invalid_argument);
}

TEST_CASE("polyak: tau = 1 copies the online net") {
    SeededRng rng(21);
    Mlp online = Mlp::init({2, 3, 1}, rng);
    Mlp target = Mlp::init({2, 3, 1}, rng);
    polyak(target, online, 1.0);
    CHECK(target.flatten() == online.flatten());
}

TEST_CASE("polyak: scalar midpoint") {
    Mlp online = Mlp::zeros({1, 1});
    online.weights[0][0] = 2.0;
    Mlp target = Mlp::zeros({1, 1});
    polyak(target, online, 0.5);
    CHECK(target.weights[0][0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("polyak: repeated application converges geometrically") {
    SeededRng rng(22);
    Mlp online = Mlp::init({2, 4, 1}, rng);
    Mlp target = Mlp::init({2, 4, 1}, rng);
    const double tau = 0.3;

    auto gap = [&]() {
        const auto a = target.flatten(), b = online.flatten();
        double g = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, std::abs(a[i] - b[i]));
        return g;
    };
    const double gap0 = gap();
    for (int t = 1; t <= 20; ++t) {
        polyak(target, online, tau);
        CHECK(gap() <= std::pow(1.0 - tau, t) * gap0 + 1e-12);
    }
}

TEST_CASE("polyak: rejects tau outside (0, 1] and shape mismatch") {
    SeededRng rng(23);
    Mlp online = Mlp::init({2, 3}, rng);
    Mlp target = Mlp::init({2, 3}, rng);
    CHECK_THROWS_AS(polyak(target, online, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(polyak(target, online, 1.5), std::invalid_argument);
    Mlp other = Mlp::init({2, 4}, rng);
    CHECK_THROWS_AS(polyak(other, online, 0.5), std::invalid_argument);
}

TEST_CASE("softmax: symmetry, uniformity, hand arithmetic") {
    const auto p2 = softmax(std::vector<double>{0.0, 0.0});
    CHECK(p2[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p2[1] == doctest::Approx(0.5).epsilon(1e-15));

    const auto p3 = softmax(std::vector<double>{4.2, 4.2, 4.2});
    for (double v : p3) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    // e^0 : e^{ln 3} = 1 : 3.
    const auto p = softmax(std::vector<double>{0.0, std::log(3.0)});
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));

    SUBCASE("sums to one and is shift-invariant") {
        SeededRng rng(31);
        for (int trial = 0; trial < 50; ++trial) {
            const auto logits = random_vec(rng, 1 + rng.uniform_int(6), -30.0, 30.0);
            const auto probs = softmax(logits);
            double sum = 0.0;
            for (double v : probs) sum += v;
            CHECK(std::abs(sum - 1.0) <= 1e-12);
            auto shifted = logits;
            const double c = rng.uniform(-100.0, 100.0);
            for (auto& v : shifted) v += c;
            const auto probs2 = softmax(shifted);
            for (std::size_t i = 0; i < probs.size(); ++i)
                CHECK(probs[i] == doctest::Approx(probs2[i]).epsilon(1e-10));
        }
    }

    SUBCASE("rejects non-finite logits") {
        CHECK_THROWS_AS(softmax(std::vector<double>{1.0, std::nan("")}), std::invalid_argument);
        CHECK_THROWS_AS(softmax(std::vector<double>{1.0, std::numeric_limits<double>::infinity()}),
                        std::invalid_argument);
    }
}

TEST_CASE("gradient correctness property: 20 random nets vs finite differences") {
    SeededRng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int in = 1 + rng.uniform_int(4);
        const int h1 = 2 + rng.uniform_int(6);
        const int h2 = 2 + rng.uniform_int(6);
        const int out = 1 + rng.uniform_int(3);
        Mlp net = Mlp::init({in, h1, h2, out}, rng);
        const auto x = random_vec(rng, in);
        const auto upstream = random_vec(rng, out);
        worst = std::max(worst, max_rel_error(backward(net, x, upstream).flatten(), fd_gradient(net, x, upstream)));
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("determinism: identical seeds give bit-identical draws and nets") {
    SeededRng a(777), b(777);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    SeededRng ra(42), rb(42);
    CHECK(Mlp::init({3, 5, 2}, ra).flatten() == Mlp::init({3, 5, 2}, rb).flatten());
    // Forked streams are independent of the parent's position.
    SeededRng p1(9), p2(9);
    p2.next_u64();
    CHECK(p1.fork(4).next_u64() == p2.fork(4).next_u64());
}

TEST_CASE("parameter count matches the layer arithmetic") {
    SeededRng rng(8);
    Mlp net = Mlp::init({4, 7, 3}, rng);
    CHECK(net.param_count() == (4 + 1) * 7 + (7 + 1) * 3);
    CHECK(net.flatten().size() == net.param_count());
}

TEST_CASE("checkpoint: net and optimizer round-trip bit-exactly") {
    SeededRng rng(55);
    Mlp net = Mlp::init({3, 6, 2}, rng);
    Optimizer opt = Optimizer::adam(3e-4);
    GradientBundle g = GradientBundle::zeros_like(net);
    auto flat = g.flatten();
    for (auto& v : flat) v = rng.uniform(-1.0, 1.0);
    g.unflatten(flat);
    apply_gradients(net, opt, g);

    TextDoc doc = make_checkpoint("nn_test", 55, 1);
    write_net(doc, "net", net);
    write_optimizer(doc, "opt", opt, net);
    const std::string dir = scratch_dir("nn_ckpt");
    doc.save(dir + "/ckpt.txt");

    const TextDoc loaded_doc = open_checkpoint(dir + "/ckpt.txt", "nn_test");
    const Mlp loaded = read_net(loaded_doc, "net");
    const Optimizer lopt = read_optimizer(loaded_doc, "opt", loaded);
    CHECK(loaded.flatten() == net.flatten());
    CHECK(lopt.m.flatten() == opt.m.flatten());
    CHECK(lopt.v.flatten() == opt.v.flatten());
    CHECK(lopt.step == opt.step);

    // Re-serialization is byte-identical.
    TextDoc doc2 = make_checkpoint("nn_test", 55, 1);
    write_net(doc2, "net", loaded);
    write_optimizer(doc2, "opt", lopt, loaded);
    CHECK(doc2.serialize() == doc.serialize());

    CHECK_THROWS_AS(open_checkpoint(dir + "/ckpt.txt", "other_module"), IoError);
}

TEST_SUITE_END();

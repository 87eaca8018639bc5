#include <cmath>

#include "doctest.h"
#include "mpmgan/nn.hpp"

using namespace mpmgan;

TEST_CASE("init_mlp is deterministic and counts parameters") {
    Mlp a = init_mlp({2, 16, 1}, {Activation::leaky_relu, Activation::sigmoid}, 7);
    Mlp b = init_mlp({2, 16, 1}, {Activation::leaky_relu, Activation::sigmoid}, 7);
    REQUIRE(a.layer_count() == 2);
    CHECK(a.param_count() == 2 * 16 + 16 + 16 * 1 + 1);  // 65
    for (size_t l = 0; l < a.layer_count(); ++l) {
        CHECK(a.layers()[l].weight.values() == b.layers()[l].weight.values());
        CHECK(a.layers()[l].bias.values() == b.layers()[l].bias.values());
    }
    Mlp c = init_mlp({2, 16, 1}, {Activation::leaky_relu, Activation::sigmoid}, 8);
    CHECK(a.layers()[0].weight.values() != c.layers()[0].weight.values());
}

TEST_CASE("init draws weights from Normal(0, 2/(in+out)) and zeroes biases") {
    Mlp net = init_mlp({64, 128}, {Activation::identity}, 5);
    const auto& w = net.layers()[0].weight.values();
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= w.size();
    double var = 0.0;
    for (double v : w) var += (v - mean) * (v - mean);
    var /= w.size() - 1;
    const double expected_var = 2.0 / (64 + 128);
    CHECK(std::abs(mean) < 3.0 * std::sqrt(expected_var / w.size()));
    CHECK(var == doctest::Approx(expected_var).epsilon(0.1));
    for (double b : net.layers()[0].bias.values()) CHECK(b == 0.0);
}

TEST_CASE("init_mlp rejects degenerate dims") {
    CHECK_THROWS_AS(init_mlp({2}, {}, 1), ConfigError);
    CHECK_THROWS_AS(init_mlp({2, 0, 1}, {Activation::identity, Activation::identity}, 1),
                    ConfigError);
    CHECK_THROWS_AS(init_mlp({2, 4}, {}, 1), ConfigError);  // activation count mismatch
}

TEST_CASE("forward basics") {
    SUBCASE("zero weights, zero bias, identity -> zero output") {
        Mlp net = init_mlp({3, 4, 2}, {Activation::identity, Activation::identity}, 3);
        for (auto& layer : net.layers()) {
            std::fill(layer.weight.values().begin(), layer.weight.values().end(), 0.0);
        }
        Tensor y = net.forward(Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}));
        for (double v : y.values()) CHECK(v == 0.0);
    }
    SUBCASE("single affine layer") {
        Mlp net = init_mlp({1, 1}, {Activation::identity}, 3);
        net.layers()[0].weight.values() = {2.0};
        net.layers()[0].bias.values() = {1.0};
        Tensor y = net.forward(Tensor::from_values({1, 1}, {3.0}));
        CHECK(y.values()[0] == doctest::Approx(7.0));
    }
    SUBCASE("sigmoid head stays in (0,1)") {
        Mlp net = init_mlp({2, 8, 1}, {Activation::leaky_relu, Activation::sigmoid}, 11);
        Tensor y = net.forward(Tensor::from_values({3, 2}, {5, -9, 0.1, 0.2, -40, 40}));
        for (double v : y.values()) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
    SUBCASE("input dim mismatch") {
        Mlp net = init_mlp({3, 2}, {Activation::identity}, 1);
        CHECK_THROWS_AS(net.forward(Tensor::from_values({1, 2}, {1, 2})), ShapeError);
    }
}

TEST_CASE("batch forward equals stacked per-sample forwards exactly") {
    Mlp net = init_mlp({3, 8, 2}, {Activation::leaky_relu, Activation::tanh}, 21);
    Rng rng(5);
    std::vector<double> batch(5 * 3);
    for (double& v : batch) v = rng.normal();
    Tensor full = net.forward(Tensor::from_values({5, 3}, batch));
    for (int i = 0; i < 5; ++i) {
        Tensor row = net.forward(Tensor::from_values(
            {1, 3}, {batch[3 * i], batch[3 * i + 1], batch[3 * i + 2]}));
        CHECK(full.values()[2 * i] == row.values()[0]);
        CHECK(full.values()[2 * i + 1] == row.values()[1]);
    }
}

TEST_CASE("adam first-step oracle") {
    // m_hat = 1, v_hat = 1 -> update = lr / (1 + eps)
    Tensor p = Tensor::from_values({1}, {1.0}, true);
    AdamConfig cfg;
    cfg.lr = 0.1;
    Adam opt(cfg, {p});
    p.grad()[0] = 1.0;
    opt.step({p});
    CHECK(p.values()[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK(p.grad()[0] == 0.0);  // grads zeroed by the step
}

TEST_CASE("adam zero gradient is a fixed point") {
    Tensor p = Tensor::from_values({3}, {1.0, -2.0, 0.5}, true);
    Adam opt(AdamConfig{}, {p});
    p.zero_grad();
    const std::vector<double> before = p.values();
    opt.step({p});
    CHECK(p.values() == before);
}

TEST_CASE("adam trace matches an independent scalar reimplementation") {
    AdamConfig cfg;
    cfg.lr = 0.05;
    cfg.beta1 = 0.5;
    cfg.beta2 = 0.999;
    Tensor p = Tensor::from_values({1}, {0.7}, true);
    Adam opt(cfg, {p});

    // scripted reference recurrence
    double ref = 0.7, m = 0.0, v = 0.0;
    Rng rng(33);
    for (int t = 1; t <= 5; ++t) {
        const double g = rng.normal();
        p.grad()[0] = g;
        opt.step({p});

        m = cfg.beta1 * m + (1 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
        const double mh = m / (1 - std::pow(cfg.beta1, t));
        const double vh = v / (1 - std::pow(cfg.beta2, t));
        ref -= cfg.lr * mh / (std::sqrt(vh) + cfg.epsilon);
        // reset the rng draw for the next iteration by re-seeding the stream
        CHECK(p.values()[0] == doctest::Approx(ref).epsilon(1e-14));
    }
}

TEST_CASE("adam errors on missing or non-finite grads") {
    Tensor p = Tensor::from_values({1}, {1.0}, true);
    Adam opt(AdamConfig{}, {p});
    CHECK_THROWS_AS(opt.step({p}), DomainError);  // no grad populated
    p.grad()[0] = std::nan("");
    CHECK_THROWS_AS(opt.step({p}), DomainError);
}

TEST_CASE("one adam step decreases a convex quadratic") {
    // loss = mean((p - target)^2)
    Tensor p = Tensor::from_values({4}, {2.0, -1.0, 0.5, 3.0}, true);
    Tensor target = Tensor::from_values({4}, {0.1, 0.2, 0.3, 0.4});
    AdamConfig cfg;
    cfg.lr = 0.05;
    Adam opt(cfg, {p});

    auto loss_value = [&]() {
        Tape::NoGrad ng;
        return mean(mul(sub(p, target), sub(p, target))).item();
    };
    const double before = loss_value();
    {
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = mean(mul(sub(p, target), sub(p, target)));
        tape.backward(loss);
    }
    opt.step({p});
    CHECK(loss_value() < before);
}

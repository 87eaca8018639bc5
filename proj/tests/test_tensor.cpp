#include <cmath>

#include "doctest.h"
#include "mpmgan/rng.hpp"
#include "mpmgan/tensor.hpp"

using namespace mpmgan;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(numel_of(shape));
    for (double& x : v) x = lo + (hi - lo) * rng.next_unit();
    return Tensor::from_values(shape, std::move(v));
}

// Keeps test points away from relu/hinge kinks.
Tensor random_tensor_away_from_zero(const Shape& shape, Rng& rng, double margin) {
    std::vector<double> v(numel_of(shape));
    for (double& x : v) {
        const double mag = margin + rng.next_unit();
        x = rng.next_unit() < 0.5 ? -mag : mag;
    }
    return Tensor::from_values(shape, std::move(v));
}

}  // namespace

TEST_CASE("forward op examples") {
    Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_values({2, 1}, {1, 1});
    Tensor c = matmul(a, b);
    CHECK(c.shape() == Shape{2, 1});
    CHECK(c.values()[0] == doctest::Approx(3.0));
    CHECK(c.values()[1] == doctest::Approx(7.0));

    Tensor h = max_with_zero(Tensor::from_values({3}, {-0.2, 0.0, 0.3}));
    CHECK(h.values()[0] == 0.0);
    CHECK(h.values()[1] == 0.0);
    CHECK(h.values()[2] == doctest::Approx(0.3));

    CHECK(sigmoid(Tensor::from_values({1}, {0.0})).values()[0] == doctest::Approx(0.5));
}

TEST_CASE("shape errors name the op and shapes") {
    Tensor a = Tensor::from_values({2, 3}, std::vector<double>(6, 1.0));
    Tensor b = Tensor::from_values({2, 2}, std::vector<double>(4, 1.0));
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("matmul"), ShapeError);
    CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2x3]"), ShapeError);
    CHECK_THROWS_AS(log(Tensor::from_values({1}, {0.0})), DomainError);
    CHECK_THROWS_AS(log(Tensor::from_values({1}, {-1.0})), DomainError);
}

TEST_CASE("backward examples") {
    SUBCASE("sum of squares") {
        Tensor x = Tensor::from_values({1}, {3.0}, true);
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = sum(mul(x, x));
        tape.backward(loss);
        CHECK(x.grad()[0] == doctest::Approx(6.0));
    }
    SUBCASE("hinge flat region") {
        Tensor x = Tensor::from_values({1}, {-1.0}, true);
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = sum(max_with_zero(x));
        tape.backward(loss);
        CHECK(x.grad()[0] == 0.0);
    }
    SUBCASE("log sigmoid at zero, finite-difference oracle") {
        auto f = [](const Tensor& w) { return sum(log(sigmoid(w))); };
        Tensor w = Tensor::from_values({1}, {0.0}, true);
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = f(w);
        tape.backward(loss);
        CHECK(w.grad()[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(grad_check(f, Tensor::from_values({1}, {0.0}), 1e-6) < 1e-8);
    }
    SUBCASE("non-scalar loss rejected") {
        Tensor x = Tensor::from_values({2}, {1.0, 2.0}, true);
        Tape tape;
        Tape::Scope scope(tape);
        Tensor y = mul(x, x);
        CHECK_THROWS_AS(tape.backward(y), ShapeError);
    }
    SUBCASE("detached loss rejected") {
        Tensor x = Tensor::from_values({1}, {1.0});
        Tape tape;
        CHECK_THROWS_AS(tape.backward(x), DomainError);
    }
}

TEST_CASE("grad_check examples") {
    auto sum_sq = [](const Tensor& x) { return sum(mul(x, x)); };
    CHECK(grad_check(sum_sq, Tensor::from_values({3}, {1, 2, 3}), 1e-5) < 1e-6);

    // linear map is exactly differentiated
    Tensor w = Tensor::from_values({3, 1}, {0.5, -1.25, 2.0});
    auto linear = [&](const Tensor& x) { return sum(matmul(x, w)); };
    CHECK(grad_check(linear, Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}), 1e-5) < 1e-9);
}

TEST_CASE("per-op gradients match central differences") {
    Rng rng(2024);
    const double kinked_tol = 1e-4;
    const double linear_tol = 1e-6;

    for (int trial = 0; trial < 8; ++trial) {
        const int b = 1 + static_cast<int>(rng.next_unit() * 4);
        const int r = 1 + static_cast<int>(rng.next_unit() * 8);
        const int c = 1 + static_cast<int>(rng.next_unit() * 8);

        SUBCASE("") {}  // keep doctest from collapsing the loop

        {
            Tensor other = random_tensor({b, r}, rng);
            auto f_add = [&](const Tensor& x) { return sum(add(x, other)); };
            CHECK(grad_check(f_add, random_tensor({b, r}, rng), 1e-5) < linear_tol);
            auto f_sub = [&](const Tensor& x) { return sum(sub(other, x)); };
            CHECK(grad_check(f_sub, random_tensor({b, r}, rng), 1e-5) < linear_tol);
            auto f_mul = [&](const Tensor& x) { return mean(mul(x, other)); };
            CHECK(grad_check(f_mul, random_tensor({b, r}, rng), 1e-5) < kinked_tol);
            auto f_neg = [&](const Tensor& x) { return sum(neg(x)); };
            CHECK(grad_check(f_neg, random_tensor({b, r}, rng), 1e-5) < linear_tol);
        }
        {
            Tensor rhs = random_tensor({r, c}, rng);
            auto f_mm = [&](const Tensor& x) { return sum(matmul(x, rhs)); };
            CHECK(grad_check(f_mm, random_tensor({b, r}, rng), 1e-5) < kinked_tol);
            Tensor lhs = random_tensor({b, r}, rng);
            auto f_mm2 = [&](const Tensor& x) { return mean(matmul(lhs, x)); };
            CHECK(grad_check(f_mm2, random_tensor({r, c}, rng), 1e-5) < kinked_tol);
        }
        {
            auto f_tanh = [&](const Tensor& x) { return mean(tanh(x)); };
            CHECK(grad_check(f_tanh, random_tensor({b, r}, rng, -2, 2), 1e-5) < kinked_tol);
            auto f_sig = [&](const Tensor& x) { return mean(sigmoid(x)); };
            CHECK(grad_check(f_sig, random_tensor({b, r}, rng, -2, 2), 1e-5) < kinked_tol);
            auto f_log = [&](const Tensor& x) { return mean(log(x)); };
            CHECK(grad_check(f_log, random_tensor({b, r}, rng, 0.2, 2.0), 1e-5) < kinked_tol);
        }
        {
            // kinked ops, points at least 1e-2 from the kink
            auto f_relu = [&](const Tensor& x) { return sum(relu(x)); };
            CHECK(grad_check(f_relu, random_tensor_away_from_zero({b, r}, rng, 1e-2), 1e-5) <
                  kinked_tol);
            auto f_lrelu = [&](const Tensor& x) { return sum(leaky_relu(x, 0.2)); };
            CHECK(grad_check(f_lrelu, random_tensor_away_from_zero({b, r}, rng, 1e-2),
                             1e-5) < kinked_tol);
            auto f_mwz = [&](const Tensor& x) { return sum(max_with_zero(x)); };
            CHECK(grad_check(f_mwz, random_tensor_away_from_zero({b, r}, rng, 1e-2), 1e-5) <
                  kinked_tol);
        }
        {
            Tensor right = random_tensor({b, c}, rng);
            Tensor weights = random_tensor({b, r + c}, rng);
            auto f_cat = [&](const Tensor& x) {
                return mean(mul(concat_last_axis({x, right}), weights));
            };
            CHECK(grad_check(f_cat, random_tensor({b, r}, rng), 1e-5) < kinked_tol);
        }
    }
}

TEST_CASE("broadcast over leading batch axis") {
    // bias-style add: [batch x d] + [d]
    Tensor bias = Tensor::from_values({3}, {0.1, -0.2, 0.3}, true);
    Tensor x = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    Tape tape;
    Tape::Scope scope(tape);
    Tensor y = add(x, bias);
    CHECK(y.values()[0] == doctest::Approx(1.1));
    CHECK(y.values()[5] == doctest::Approx(6.3));
    tape.backward(sum(y));
    // gradient of the broadcast operand sums over the batch axis
    CHECK(bias.grad()[0] == doctest::Approx(2.0));
    CHECK(bias.grad()[1] == doctest::Approx(2.0));
    CHECK(bias.grad()[2] == doctest::Approx(2.0));

    Tensor weights = Tensor::from_values({2, 3}, {0.5, -1.0, 2.0, 1.5, 0.25, -0.75});
    auto f = [&](const Tensor& bv) { return sum(mul(add(x, bv), weights)); };
    CHECK(grad_check(f, Tensor::from_values({3}, {0.1, -0.2, 0.3}), 1e-5) < 1e-6);
}

TEST_CASE("gradient accumulation matches separate passes") {
    Rng rng(7);
    Tensor x0 = random_tensor({4, 3}, rng);

    auto f = [](const Tensor& x) { return mean(mul(x, x)); };
    auto g = [](const Tensor& x) { return sum(tanh(x)); };

    // combined pass
    Tensor xc = x0.clone();
    xc.set_requires_grad(true);
    {
        Tape tape;
        Tape::Scope scope(tape);
        tape.backward(add(f(xc), g(xc)));
    }

    // two separate passes accumulate into the same grad
    Tensor xs = x0.clone();
    xs.set_requires_grad(true);
    {
        Tape tape;
        Tape::Scope scope(tape);
        tape.backward(f(xs));
    }
    {
        Tape tape;
        Tape::Scope scope(tape);
        tape.backward(g(xs));
    }
    for (int i = 0; i < x0.numel(); ++i) {
        CHECK(xc.grad()[i] == doctest::Approx(xs.grad()[i]).epsilon(1e-12));
    }
}

TEST_CASE("determinism: identical runs produce bit-identical values and grads") {
    auto run = [](std::vector<double>* grads) {
        Rng rng(99);
        Tensor x = random_tensor({4, 4}, rng);
        x.set_requires_grad(true);
        Tensor w = random_tensor({4, 4}, rng);
        w.set_requires_grad(true);
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = mean(sigmoid(matmul(tanh(x), w)));
        tape.backward(loss);
        *grads = x.grad();
        std::vector<double> both = w.grad();
        grads->insert(grads->end(), both.begin(), both.end());
        return loss.item();
    };
    std::vector<double> g1, g2;
    const double l1 = run(&g1);
    const double l2 = run(&g2);
    CHECK(l1 == l2);
    CHECK(g1 == g2);
}

TEST_CASE("no recording without an active tape") {
    Tensor x = Tensor::from_values({2}, {1.0, -1.0}, true);
    Tensor y = relu(x);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->tape == nullptr);
}

TEST_CASE("finite outputs on bounded inputs") {
    Rng rng(5);
    Tensor x = random_tensor({4, 8}, rng, -3.0, 3.0);
    x.set_requires_grad(true);
    Tape tape;
    Tape::Scope scope(tape);
    Tensor y = mean(sigmoid(matmul(leaky_relu(x, 0.2), random_tensor({8, 8}, rng))));
    tape.backward(y);
    CHECK(y.all_finite());
    bool grads_finite = true;
    for (double g : x.grad()) grads_finite = grads_finite && std::isfinite(g);
    CHECK(grads_finite);
}

#include <catch2/catch.hpp>

#include <random>

#include "test_util.hpp"
#include "vwa/autodiff.hpp"
#include "vwa/windowing.hpp"

using namespace vwa;
using vwa::testutil::check_input_grad;
using vwa::testutil::project_to_scalar;

TEST_CASE("sum of squares has gradient 2x") {
    std::mt19937_64 rng(51);
    Tensor x0 = random_uniform({3, 4}, -2, 2, rng);
    Tape tape;
    Var x = tape.leaf(x0);
    GradientMap grads = tape.backward(sum(mul(x, x)));
    const Tensor& g = grads.at(x);
    for (std::size_t i = 0; i < x0.size(); ++i) REQUIRE(g[i] == Approx(2.0 * x0[i]).margin(1e-12));
}

TEST_CASE("sum of softmax is constant, gradient vanishes") {
    std::mt19937_64 rng(53);
    Tensor x0 = random_uniform({6}, -3, 3, rng);
    Tape tape;
    Var x = tape.leaf(x0);
    GradientMap grads = tape.backward(sum(softmax(x, 0)));
    REQUIRE(max_abs(grads.at(x)) < 1e-14);
}

TEST_CASE("conv2d input gradient counts window coverage") {
    Tensor x0 = Tensor::full({1, 3, 3}, 0.5);
    Tape tape;
    Var x = tape.leaf(x0);
    Var w = tape.leaf(Tensor::full({1, 1, 2, 2}, 1.0));
    Var b = tape.leaf(Tensor({1}));
    GradientMap grads = tape.backward(sum(conv2d(x, w, b, 1)));
    const Tensor& g = grads.at(x);
    const double expect[9] = {1, 2, 1, 2, 4, 2, 1, 2, 1};
    for (std::size_t i = 0; i < 9; ++i) REQUIRE(g[i] == expect[i]);
}

TEST_CASE("finite difference oracle sanity") {
    SECTION("sum of squares at [1,-2]") {
        Tensor x({2}, {1.0, -2.0});
        Tensor g = finite_diff([](const Tensor& t) { return t[0] * t[0] + t[1] * t[1]; }, x, 1e-5);
        REQUIRE(g[0] == Approx(2.0).margin(1e-8));
        REQUIRE(g[1] == Approx(-4.0).margin(1e-8));
    }
    SECTION("constant function gives the zero vector") {
        Tensor x({3}, {1, 2, 3});
        Tensor g = finite_diff([](const Tensor&) { return 42.0; }, x, 1e-5);
        REQUIRE(max_abs(g) == 0.0);
    }
    SECTION("eps must be positive") {
        REQUIRE_THROWS_AS(finite_diff([](const Tensor&) { return 0.0; }, Tensor({1}), 0.0), ContractError);
    }
}

TEST_CASE("per-op gradients agree with finite differences") {
    std::mt19937_64 rng(57);

    SECTION("matmul both operands") {
        Tensor a0 = random_uniform({2, 3, 4}, -1, 1, rng);
        Tensor b0 = random_uniform({2, 4, 2}, -1, 1, rng);
        check_input_grad(
            [&](Tape& t, const Var& a) { return project_to_scalar(t, matmul(a, t.leaf(b0)), 1); }, a0);
        check_input_grad(
            [&](Tape& t, const Var& b) { return project_to_scalar(t, matmul(t.leaf(a0), b), 2); }, b0);
    }
    SECTION("conv2d input, weight and bias") {
        Tensor x0 = random_uniform({2, 5, 5}, -1, 1, rng);
        Tensor w0 = random_uniform({3, 2, 2, 2}, -1, 1, rng);
        Tensor b0 = random_uniform({3}, -1, 1, rng);
        check_input_grad(
            [&](Tape& t, const Var& x) {
                return project_to_scalar(t, conv2d(x, t.leaf(w0), t.leaf(b0), 1), 3);
            },
            x0);
        check_input_grad(
            [&](Tape& t, const Var& w) {
                return project_to_scalar(t, conv2d(t.leaf(x0), w, t.leaf(b0), 1), 4);
            },
            w0);
        check_input_grad(
            [&](Tape& t, const Var& b) {
                return project_to_scalar(t, conv2d(t.leaf(x0), t.leaf(w0), b, 1), 5);
            },
            b0);
    }
    SECTION("strided conv2d") {
        Tensor x0 = random_uniform({1, 6, 6}, -1, 1, rng);
        Tensor w0 = random_uniform({2, 1, 2, 2}, -1, 1, rng);
        check_input_grad(
            [&](Tape& t, const Var& x) {
                return project_to_scalar(t, conv2d(x, t.leaf(w0), t.leaf(Tensor({2})), 2), 6);
            },
            x0);
    }
    SECTION("softmax") {
        Tensor x0 = random_uniform({3, 5}, -2, 2, rng);
        check_input_grad([&](Tape& t, const Var& x) { return project_to_scalar(t, softmax(x, 1), 7); }, x0);
    }
    SECTION("bilinear upsample") {
        Tensor x0 = random_uniform({2, 3, 4}, -1, 1, rng);
        check_input_grad(
            [&](Tape& t, const Var& x) { return project_to_scalar(t, bilinear_upsample(x, 7, 9), 8); }, x0);
    }
    SECTION("unfold, pads and fold") {
        Tensor x0 = random_uniform({2, 8, 8}, -1, 1, rng);
        check_input_grad(
            [&](Tape& t, const Var& x) { return project_to_scalar(t, unfold(x, 4, 2).windows, 9); }, x0);
        check_input_grad(
            [&](Tape& t, const Var& x) { return project_to_scalar(t, csp_pad(x, 2, 2), 10); }, x0);
        check_input_grad(
            [&](Tape& t, const Var& x) { return project_to_scalar(t, zero_pad(x, 2, 2), 11); }, x0);
        check_input_grad([&](Tape& t, const Var& x) { return project_to_scalar(t, fold(unfold(x, 2, 2)), 12); },
                         x0);
    }
    SECTION("concat, slice, add_bias, scale") {
        Tensor x0 = random_uniform({3, 4}, -1, 1, rng);
        Tensor other0 = random_uniform({2, 4}, -1, 1, rng);
        check_input_grad(
            [&](Tape& t, const Var& x) {
                return project_to_scalar(t, concat({x, t.leaf(other0)}, 0), 13);
            },
            x0);
        check_input_grad(
            [&](Tape& t, const Var& x) { return project_to_scalar(t, slice(x, 1, 1, 3), 14); }, x0);
        Tensor b0 = random_uniform({4}, -1, 1, rng);
        check_input_grad(
            [&](Tape& t, const Var& b) { return project_to_scalar(t, add_bias(t.leaf(x0), b, 1), 15); }, b0);
        check_input_grad(
            [&](Tape& t, const Var& x) { return project_to_scalar(t, scale(x, -2.5), 16); }, x0);
    }
}

TEST_CASE("fan-out doubles the gradient") {
    std::mt19937_64 rng(61);
    Tensor x0 = random_uniform({4}, -1, 1, rng);
    Tensor c0 = random_uniform({4}, -1, 1, rng);

    Tape t1;
    Var x1 = t1.leaf(x0);
    GradientMap g1 = t1.backward(sum(mul(x1, t1.leaf(c0))));

    Tape t2;
    Var x2 = t2.leaf(x0);
    Var branch_a = mul(x2, t2.leaf(c0));
    Var branch_b = mul(x2, t2.leaf(c0));
    GradientMap g2 = t2.backward(sum(add(branch_a, branch_b)));

    REQUIRE(max_abs_diff(g2.at(x2), scale(g1.at(x1), 2.0)) < 1e-14);
}

TEST_CASE("backward contract errors") {
    Tape tape;
    Var x = tape.leaf(Tensor({2, 2}));
    Var y = mul(x, x);
    REQUIRE_THROWS_AS(tape.backward(y), ContractError);  // non-scalar root

    Tape other;
    Var z = other.leaf(Tensor({2, 2}));
    REQUIRE_THROWS_AS(add(x, z), ContractError);  // cross-tape operands
}

TEST_CASE("two backward passes on one tape are independent") {
    std::mt19937_64 rng(67);
    Tensor x0 = random_uniform({3}, -1, 1, rng);
    Tape tape;
    Var x = tape.leaf(x0);
    Var s = sum(mul(x, x));
    GradientMap first = tape.backward(s);
    GradientMap second = tape.backward(s);
    REQUIRE(max_abs_diff(first.at(x), second.at(x)) == 0.0);
}

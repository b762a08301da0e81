#include <catch2/catch.hpp>

#include <array>
#include <random>

#include "vwa/tensor.hpp"

using namespace vwa;

namespace {
Tensor ramp(Shape shape, double start = 0.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = start + static_cast<double>(i);
    return t;
}
}  // namespace

TEST_CASE("tensor construction enforces invariants") {
    REQUIRE_THROWS_AS(Tensor({2, 0, 3}), ShapeError);
    REQUIRE_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    Tensor t({2, 3});
    REQUIRE(t.size() == 6);
    REQUIRE(t.rank() == 2);
    REQUIRE_THROWS_AS(t.at(2, 0), IndexError);
    REQUIRE_THROWS_AS(t.dim(5), IndexError);
}

TEST_CASE("unfold partitions exactly") {
    SECTION("4x4 kernel 2 stride 2 tiles into 4 windows") {
        Tensor x = ramp({1, 4, 4});
        WindowSet ws = unfold(x, 2, 2);
        REQUIRE(ws.count() == 4);
        REQUIRE(ws.windows.shape() == Shape{4, 2, 2, 1});
        // top-left block
        REQUIRE(ws.windows.at(0, 0, 0, 0) == 0.0);
        REQUIRE(ws.windows.at(0, 0, 1, 0) == 1.0);
        REQUIRE(ws.windows.at(0, 1, 0, 0) == 4.0);
        REQUIRE(ws.windows.at(0, 1, 1, 0) == 5.0);
        // element conservation
        double total = 0;
        for (std::size_t i = 0; i < ws.windows.size(); ++i) total += ws.windows[i];
        REQUIRE(total == Approx(sum(x)[0]));
    }
    SECTION("3x3 entries 1..9, kernel 2 stride 1 gives sliding windows") {
        Tensor x = ramp({1, 3, 3}, 1.0);
        WindowSet ws = unfold(x, 2, 1);
        REQUIRE(ws.count() == 4);
        REQUIRE(ws.windows.at(0, 0, 0, 0) == 1.0);
        REQUIRE(ws.windows.at(0, 0, 1, 0) == 2.0);
        REQUIRE(ws.windows.at(0, 1, 0, 0) == 4.0);
        REQUIRE(ws.windows.at(0, 1, 1, 0) == 5.0);
        // window (1,1) is the bottom-right block
        REQUIRE(ws.windows.at(3, 0, 0, 0) == 5.0);
        REQUIRE(ws.windows.at(3, 1, 1, 0) == 9.0);
    }
    SECTION("kernel covering the whole map yields one window") {
        Tensor x = ramp({2, 3, 3});
        WindowSet ws = unfold(x, 3, 3);
        REQUIRE(ws.count() == 1);
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t u = 0; u < 3; ++u)
                for (std::size_t v = 0; v < 3; ++v) REQUIRE(ws.windows.at(std::size_t{0}, u, v, c) == x.at(c, u, v));
    }
    SECTION("non-divisible geometry is rejected with the offending dimension") {
        Tensor x({1, 5, 4});
        REQUIRE_THROWS_WITH(unfold(x, 2, 2), Catch::Contains("height 5"));
        Tensor y({1, 4, 5});
        REQUIRE_THROWS_WITH(unfold(y, 2, 2), Catch::Contains("width 5"));
    }
    SECTION("fold round-trips a non-overlapping unfold") {
        std::mt19937_64 rng(7);
        for (auto [C, H, W, k] : {std::array<std::size_t, 4>{3, 6, 4, 2}, {1, 8, 8, 4}, {5, 3, 3, 3}}) {
            Tensor x = random_uniform({C, H, W}, -2.0, 2.0, rng);
            REQUIRE(max_abs_diff(fold(unfold(x, k, k)), x) == 0.0);
        }
    }
}

TEST_CASE("conv2d semantics and counting") {
    SECTION("1x1 identity kernel is the identity map") {
        Tensor x = ramp({3, 4, 4});
        Tensor w({3, 3, 1, 1});
        for (std::size_t i = 0; i < 3; ++i) w.at(i, i, 0, 0) = 1.0;
        REQUIRE(max_abs_diff(conv2d(x, w, Tensor({3}), 1), x) == 0.0);
    }
    SECTION("all-ones 2x2 kernel over ones gives 4s") {
        Tensor x = Tensor::full({1, 3, 3}, 1.0);
        Tensor w = Tensor::full({1, 1, 2, 2}, 1.0);
        Tensor y = conv2d(x, w, Tensor({1}), 1);
        REQUIRE(y.shape() == Shape{1, 2, 2});
        for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(y[i] == 4.0);
    }
    SECTION("kernel R stride R downsamples RP to P") {
        const std::size_t R = 4, P = 3, C = 8;
        std::mt19937_64 rng(3);
        Tensor x = random_uniform({C, R * P, R * P}, -1, 1, rng);
        Tensor w = random_uniform({2, C, R, R}, -1, 1, rng);
        Tensor y = conv2d(x, w, Tensor({2}), R);
        REQUIRE(y.shape() == Shape{2, P, P});
    }
    SECTION("bias broadcasts over space") {
        Tensor x({2, 2, 2});
        Tensor w({2, 2, 1, 1});
        Tensor b({2}, {1.5, -2.0});
        Tensor y = conv2d(x, w, b, 1);
        REQUIRE(y.at(0, 1, 1) == 1.5);
        REQUIRE(y.at(1, 0, 0) == -2.0);
    }
    SECTION("MACs recorded per the closed form") {
        std::mt19937_64 rng(5);
        Tensor x = random_uniform({3, 9, 7}, -1, 1, rng);
        Tensor w = random_uniform({4, 3, 3, 3}, -1, 1, rng);
        CostCounter counter;
        {
            CounterScope scope(counter);
            conv2d(x, w, Tensor({4}), 2);
        }
        // H'=4, W'=3
        REQUIRE(counter.macs_linear == 4ull * 3 * 3 * 3 * 3 * 4);
        REQUIRE(counter.macs_attention == 0);
    }
    SECTION("shape mismatches are rejected") {
        Tensor x({3, 4, 4});
        REQUIRE_THROWS_AS(conv2d(x, Tensor({2, 2, 2, 2}), Tensor({2}), 1), ShapeError);
        REQUIRE_THROWS_AS(conv2d(x, Tensor({2, 3, 2, 2}), Tensor({3}), 1), ShapeError);
        REQUIRE_THROWS_AS(conv2d(x, Tensor({2, 3, 3, 3}), Tensor({2}), 2), GeometryError);
    }
}

TEST_CASE("softmax") {
    SECTION("constant vector becomes uniform") {
        Tensor x = Tensor::full({5}, 3.25);
        Tensor y = softmax(x, 0);
        for (std::size_t i = 0; i < 5; ++i) REQUIRE(y[i] == Approx(0.2).margin(1e-15));
    }
    SECTION("[0, ln 3] maps to [0.25, 0.75]") {
        Tensor x({2}, {0.0, std::log(3.0)});
        Tensor y = softmax(x, 0);
        REQUIRE(y[0] == Approx(0.25).margin(1e-15));
        REQUIRE(y[1] == Approx(0.75).margin(1e-15));
    }
    SECTION("rows sum to 1 and shift invariance holds") {
        std::mt19937_64 rng(11);
        Tensor x = random_uniform({4, 6}, -30.0, 30.0, rng);
        Tensor y = softmax(x, 1);
        for (std::size_t r = 0; r < 4; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < 6; ++c) s += y.at(r, c);
            REQUIRE(std::abs(s - 1.0) < 1e-12);
        }
        Tensor shifted = x;
        for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += 123.456;
        REQUIRE(max_abs_diff(softmax(shifted, 1), y) < 1e-12);
    }
    SECTION("softmax over a middle axis") {
        std::mt19937_64 rng(13);
        Tensor x = random_uniform({2, 3, 4}, -5, 5, rng);
        Tensor y = softmax(x, 1);
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t j = 0; j < 4; ++j) {
                double s = 0;
                for (std::size_t a = 0; a < 3; ++a) s += y.at(b, a, j);
                REQUIRE(std::abs(s - 1.0) < 1e-12);
            }
    }
}

TEST_CASE("matmul") {
    SECTION("identity is neutral") {
        std::mt19937_64 rng(17);
        Tensor a = random_uniform({3, 4}, -1, 1, rng);
        Tensor eye({4, 4});
        for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
        REQUIRE(max_abs_diff(matmul(a, eye), a) == 0.0);
    }
    SECTION("hand product") {
        Tensor a({2, 2}, {1, 2, 3, 4});
        Tensor b({2, 1}, {5, 6});
        Tensor c = matmul(a, b);
        REQUIRE(c.shape() == Shape{2, 1});
        REQUIRE(c[0] == 17.0);
        REQUIRE(c[1] == 39.0);
    }
    SECTION("1x1 matrices multiply as scalars") {
        Tensor c = matmul(Tensor({1, 1}, {3.0}), Tensor({1, 1}, {-2.0}));
        REQUIRE(c[0] == -6.0);
    }
    SECTION("batched product and MAC count") {
        std::mt19937_64 rng(19);
        Tensor a = random_uniform({5, 3, 4}, -1, 1, rng);
        Tensor b = random_uniform({5, 4, 2}, -1, 1, rng);
        CostCounter counter;
        Tensor c;
        {
            CounterScope scope(counter);
            c = matmul(a, b);
        }
        REQUIRE(c.shape() == Shape{5, 3, 2});
        REQUIRE(counter.macs_linear == 5ull * 3 * 2 * 4);
        // spot-check one batch element against a flat loop
        double acc = 0;
        for (std::size_t k = 0; k < 4; ++k) acc += a.at(2, 1, k) * b.at(2, k, 1);
        REQUIRE(c.at(2, 1, 1) == Approx(acc));
    }
    SECTION("mismatches rejected") {
        REQUIRE_THROWS_AS(matmul(Tensor({2, 3}), Tensor({4, 2})), ShapeError);
        REQUIRE_THROWS_AS(matmul(Tensor({2, 2, 3}), Tensor({3, 3, 2})), ShapeError);
        REQUIRE_THROWS_AS(matmul(Tensor({4}), Tensor({4})), ShapeError);
    }
}

TEST_CASE("bilinear upsample") {
    SECTION("constant maps stay constant") {
        Tensor x = Tensor::full({1, 1, 1}, 2.5);
        Tensor y = bilinear_upsample(x, 5, 3);
        for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(y[i] == 2.5);
    }
    SECTION("2x upsample of [[0,1],[0,1]] gives columns 0, .25, .75, 1") {
        Tensor x({1, 2, 2}, {0, 1, 0, 1});
        Tensor y = bilinear_upsample(x, 4, 4);
        const double expect[4] = {0.0, 0.25, 0.75, 1.0};
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 4; ++c) REQUIRE(y.at(std::size_t{0}, r, c) == Approx(expect[c]).margin(1e-15));
    }
    SECTION("identity when sizes match") {
        std::mt19937_64 rng(23);
        Tensor x = random_uniform({2, 3, 5}, -1, 1, rng);
        REQUIRE(max_abs_diff(bilinear_upsample(x, 3, 5), x) == 0.0);
    }
    SECTION("downsampling is refused") {
        REQUIRE_THROWS_AS(bilinear_upsample(Tensor({1, 4, 4}), 2, 4), UnsupportedError);
    }
}

TEST_CASE("concat and slice") {
    std::mt19937_64 rng(29);
    SECTION("concat of one tensor is the tensor") {
        Tensor x = random_uniform({2, 3}, -1, 1, rng);
        REQUIRE(max_abs_diff(concat({x}, 0), x) == 0.0);
    }
    SECTION("slice then concat of complementary parts reproduces the input") {
        Tensor x = random_uniform({3, 4, 5}, -1, 1, rng);
        for (std::size_t axis = 0; axis < 3; ++axis) {
            const std::size_t d = x.dim(axis);
            Tensor lo = slice(x, axis, 0, d / 2);
            Tensor hi = slice(x, axis, d / 2, d);
            REQUIRE(max_abs_diff(concat({lo, hi}, axis), x) == 0.0);
        }
    }
    SECTION("slice of a ramp picks the expected entry") {
        Tensor x = ramp({1, 1, 8});
        Tensor y = slice(x, 2, 3, 4);
        REQUIRE(y.shape() == Shape{1, 1, 1});
        REQUIRE(y[0] == 3.0);
    }
    SECTION("bounds violations") {
        Tensor x({2, 4});
        REQUIRE_THROWS_AS(slice(x, 1, 2, 2), IndexError);
        REQUIRE_THROWS_AS(slice(x, 1, 3, 5), IndexError);
        REQUIRE_THROWS_AS(slice(x, 2, 0, 1), IndexError);
        REQUIRE_THROWS_AS(concat({Tensor({2, 3}), Tensor({3, 3})}, 1), ShapeError);
    }
}

TEST_CASE("permute, reshape, add_bias") {
    std::mt19937_64 rng(31);
    Tensor x = random_uniform({2, 3, 4}, -1, 1, rng);
    Tensor p = permute(x, {2, 0, 1});
    REQUIRE(p.shape() == Shape{4, 2, 3});
    REQUIRE(p.at(std::size_t{3}, std::size_t{1}, std::size_t{2}) ==
            x.at(std::size_t{1}, std::size_t{2}, std::size_t{3}));
    REQUIRE(max_abs_diff(permute(p, {1, 2, 0}), x) == 0.0);
    REQUIRE_THROWS_AS(reshape(x, {5, 5}), ShapeError);

    Tensor b({4}, {1, 2, 3, 4});
    Tensor y = add_bias(x, b, 2);
    REQUIRE(y.at(std::size_t{1}, std::size_t{2}, std::size_t{3}) ==
            Approx(x.at(std::size_t{1}, std::size_t{2}, std::size_t{3}) + 4.0));
    REQUIRE_THROWS_AS(add_bias(x, Tensor({3}), 2), ShapeError);
}

TEST_CASE("operations preserve finiteness") {
    std::mt19937_64 rng(37);
    Tensor x = random_uniform({2, 8, 8}, -50, 50, rng);
    REQUIRE(is_finite(softmax(x, 1)));
    REQUIRE(is_finite(bilinear_upsample(x, 16, 16)));
    REQUIRE(is_finite(matmul(reshape(x, {16, 8}), random_uniform({8, 4}, -3, 3, rng))));
}

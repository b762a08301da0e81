#include <catch2/catch.hpp>

#include <random>
#include <set>

#include "vwa/windowing.hpp"

using namespace vwa;

namespace {

Tensor ramp(Shape shape, double start = 0.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = start + static_cast<double>(i);
    return t;
}

// Literal slice-and-concat construction of copy-shift padding: width margins
// first, then height margins of the width-padded map. Independent of the
// gather-based implementation.
Tensor csp_by_slicing(const Tensor& x, std::size_t P, std::size_t R) {
    const std::size_t H = x.dim(1), W = x.dim(2);
    const std::size_t lo = (R + 1) * P / 2, hi = R * P;
    Tensor wp = concat({slice(x, 2, lo, hi), x, slice(x, 2, W - hi, W - lo)}, 2);
    return concat({slice(wp, 1, lo, hi), wp, slice(wp, 1, H - hi, H - lo)}, 1);
}

}  // namespace

TEST_CASE("pad spec derives the margin from window and ratio") {
    REQUIRE(PadSpec::make(PadMode::CopyShift, 2, 1).margin == 0);
    REQUIRE(PadSpec::make(PadMode::Zero, 2, 2).margin == 1);
    REQUIRE(PadSpec::make(PadMode::CopyShift, 4, 8).margin == 14);
    REQUIRE_THROWS_AS(PadSpec::make(PadMode::CopyShift, 3, 2), GeometryError);  // odd P
    REQUIRE_THROWS_AS(PadSpec::make(PadMode::Zero, 0, 2), GeometryError);
}

TEST_CASE("partition_queries") {
    SECTION("4x4 with P=2 tiles into four windows") {
        Tensor x = ramp({1, 4, 4});
        auto ws = partition_queries(x, 2);
        REQUIRE(ws.count() == 4);
        REQUIRE(ws.windows.size() == x.size());
    }
    SECTION("P covering the map yields the identity window") {
        Tensor x = ramp({1, 4, 4});
        auto ws = partition_queries(x, 4);
        REQUIRE(ws.count() == 1);
        REQUIRE(max_abs_diff(reshape(permute(reshape(ws.windows, {4, 4, 1}), {2, 0, 1}), {1, 4, 4}), x) == 0.0);
    }
    SECTION("windows match direct slicing") {
        std::mt19937_64 rng(71);
        Tensor x = random_uniform({2, 8, 8}, -1, 1, rng);
        auto ws = partition_queries(x, 4);
        REQUIRE(ws.count() == 4);
        for (std::size_t wi = 0; wi < 2; ++wi)
            for (std::size_t wj = 0; wj < 2; ++wj) {
                Tensor block = slice(slice(x, 1, wi * 4, wi * 4 + 4), 2, wj * 4, wj * 4 + 4);
                for (std::size_t c = 0; c < 2; ++c)
                    for (std::size_t u = 0; u < 4; ++u)
                        for (std::size_t v = 0; v < 4; ++v)
                            REQUIRE(ws.windows.at(wi * 2 + wj, u, v, c) == block.at(c, u, v));
            }
    }
    SECTION("indivisible extents are rejected") {
        REQUIRE_THROWS_AS(partition_queries(Tensor({1, 6, 4}), 4), GeometryError);
        REQUIRE_THROWS_AS(partition_queries(Tensor({1, 4, 6}), 4), GeometryError);
    }
}

TEST_CASE("copy-shift padding") {
    SECTION("R=1 leaves the input unchanged") {
        std::mt19937_64 rng(73);
        Tensor x = random_uniform({2, 4, 4}, -1, 1, rng);
        REQUIRE(max_abs_diff(csp_pad(x, 2, 1), x) == 0.0);
    }
    SECTION("width-pass slice indices on the 0..7 ramp") {
        // Row content [3, 0..7, 4]: left margin copies column (R+1)P/2 = 3,
        // right margin copies column W-RP = 4.
        Tensor x = ramp({1, 1, 8});
        const std::size_t P = 2, R = 2;
        Tensor wp = concat({slice(x, 2, (R + 1) * P / 2, R * P), x, slice(x, 2, 8 - R * P, 8 - (R + 1) * P / 2)}, 2);
        const double expect[10] = {3, 0, 1, 2, 3, 4, 5, 6, 7, 4};
        REQUIRE(wp.size() == 10);
        for (std::size_t i = 0; i < 10; ++i) REQUIRE(wp[i] == expect[i]);
    }
    SECTION("full padding equals the literal slice construction") {
        std::mt19937_64 rng(79);
        for (auto [P, R, H, W] : {std::array<std::size_t, 4>{2, 2, 8, 8}, {2, 3, 8, 10}, {4, 2, 8, 12}, {2, 4, 8, 8}}) {
            Tensor x = random_uniform({3, H, W}, -1, 1, rng);
            REQUIRE(max_abs_diff(csp_pad(x, P, R), csp_by_slicing(x, P, R)) == 0.0);
        }
    }
    SECTION("margins copy only interior values") {
        Tensor x = ramp({1, 8, 8}, 1.0);  // strictly distinct entries
        Tensor padded = csp_pad(x, 2, 2);
        std::set<double> interior(x.data(), x.data() + x.size());
        const std::size_t m = 1, Hp = 10, Wp = 10;
        for (std::size_t r = 0; r < Hp; ++r)
            for (std::size_t c = 0; c < Wp; ++c) {
                const bool margin = r < m || c < m || r >= m + 8 || c >= m + 8;
                if (margin) REQUIRE(interior.count(padded.at(std::size_t{0}, r, c)) == 1);
            }
    }
    SECTION("geometry violations") {
        REQUIRE_THROWS_AS(csp_pad(Tensor({1, 4, 8}), 2, 4), GeometryError);   // R*P > H
        REQUIRE_THROWS_AS(csp_pad(Tensor({1, 8, 8}), 3, 2), GeometryError);   // odd P
        REQUIRE_THROWS_AS(csp_pad(Tensor({1, 8}), 2, 2), ShapeError);         // not a map
    }
}

TEST_CASE("zero padding") {
    SECTION("R=1 is the identity") {
        std::mt19937_64 rng(83);
        Tensor x = random_uniform({1, 4, 4}, -1, 1, rng);
        REQUIRE(max_abs_diff(zero_pad(x, 2, 1), x) == 0.0);
    }
    SECTION("sum is preserved and margins are zero") {
        std::mt19937_64 rng(89);
        Tensor x = random_uniform({2, 6, 6}, -1, 1, rng);
        Tensor padded = zero_pad(x, 2, 2);
        REQUIRE(padded.shape() == Shape{2, 8, 8});
        REQUIRE(sum(padded)[0] == Approx(sum(x)[0]));
    }
    SECTION("ramp row gains zero margins") {
        Tensor x = ramp({1, 1, 8});
        Tensor padded = zero_pad(x, 2, 2);
        REQUIRE(padded.shape() == Shape{1, 3, 10});
        const double expect[10] = {0, 0, 1, 2, 3, 4, 5, 6, 7, 0};
        for (std::size_t c = 0; c < 10; ++c) {
            REQUIRE(padded.at(std::size_t{0}, std::size_t{1}, c) == expect[c]);
            REQUIRE(padded.at(std::size_t{0}, std::size_t{0}, c) == 0.0);
            REQUIRE(padded.at(std::size_t{0}, std::size_t{2}, c) == 0.0);
        }
    }
    SECTION("odd P is rejected") { REQUIRE_THROWS_AS(zero_pad(Tensor({1, 8, 8}), 3, 2), GeometryError); }
}

TEST_CASE("extract_contexts") {
    SECTION("R=1 coincides with partition_queries") {
        std::mt19937_64 rng(97);
        Tensor x = random_uniform({2, 8, 8}, -1, 1, rng);
        auto q = partition_queries(x, 2);
        auto c = extract_contexts(x, 2, 1);
        REQUIRE(c.count() == q.count());
        REQUIRE(max_abs_diff(c.windows, q.windows) == 0.0);
    }
    SECTION("window count matches queries and centers align under both pad modes") {
        std::mt19937_64 rng(101);
        for (PadMode mode : {PadMode::Zero, PadMode::CopyShift}) {
            for (auto [P, R] : {std::array<std::size_t, 2>{2, 2}, {2, 4}, {4, 2}}) {
                Tensor x = random_uniform({2, 8, 8}, -1, 1, rng);
                auto queries = partition_queries(x, P);
                Tensor padded = pad_for_contexts(x, P, R, mode);
                auto contexts = extract_contexts(padded, P, R);
                REQUIRE(contexts.count() == queries.count());
                REQUIRE(contexts.win_h == R * P);
                const std::size_t off = (R - 1) * P / 2;
                for (std::size_t w = 0; w < contexts.count(); ++w)
                    for (std::size_t u = 0; u < P; ++u)
                        for (std::size_t v = 0; v < P; ++v)
                            for (std::size_t ch = 0; ch < 2; ++ch)
                                REQUIRE(contexts.windows.at(w, off + u, off + v, ch) == queries.windows.at(w, u, v, ch));
            }
        }
    }
    SECTION("element count is R^2 HWC") {
        std::mt19937_64 rng(103);
        Tensor x = random_uniform({3, 16, 16}, -1, 1, rng);
        Tensor padded = csp_pad(x, 4, 4);
        auto contexts = extract_contexts(padded, 4, 4);
        REQUIRE(contexts.windows.size() == 12288);  // R^2 * H * W * C = 16*256*3
    }
    SECTION("geometry mismatch with the padding is rejected") {
        Tensor not_padded({1, 9, 9});
        REQUIRE_THROWS_AS(extract_contexts(not_padded, 2, 2), GeometryError);
    }
}

TEST_CASE("randomized geometries keep the padding and alignment invariants") {
    std::mt19937_64 rng(997);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t P = 2 * (1 + rng() % 3);
        const std::size_t R = 1 + rng() % 4;
        const std::size_t H = P * (R + rng() % 3);
        const std::size_t W = P * (R + rng() % 3);
        const std::size_t C = 1 + rng() % 4;
        Tensor x = random_uniform({C, H, W}, -2, 2, rng);
        INFO("P=" << P << " R=" << R << " H=" << H << " W=" << W << " C=" << C);

        if (R == 1) {
            REQUIRE(max_abs_diff(csp_pad(x, P, R), x) == 0.0);
        } else {
            REQUIRE(max_abs_diff(csp_pad(x, P, R), csp_by_slicing(x, P, R)) == 0.0);
        }
        for (PadMode mode : {PadMode::Zero, PadMode::CopyShift}) {
            auto queries = partition_queries(x, P);
            auto contexts = extract_contexts(pad_for_contexts(x, P, R, mode), P, R);
            REQUIRE(contexts.count() == queries.count());
            const std::size_t off = (R - 1) * P / 2;
            for (std::size_t w = 0; w < contexts.count(); ++w)
                for (std::size_t u = 0; u < P; ++u)
                    for (std::size_t v = 0; v < P; ++v)
                        for (std::size_t ch = 0; ch < C; ++ch)
                            REQUIRE(contexts.windows.at(w, off + u, off + v, ch) ==
                                    queries.windows.at(w, u, v, ch));
        }
    }
}

TEST_CASE("zero-padded corner context holds exactly (RP - margin)^2 interior pixels") {
    for (auto [P, R] : {std::array<std::size_t, 2>{2, 2}, {2, 4}, {4, 2}}) {
        Tensor x = Tensor::full({1, 8, 8}, 1.0);
        Tensor padded = zero_pad(x, P, R);
        auto contexts = extract_contexts(padded, P, R);
        std::size_t nonzero = 0;
        for (std::size_t u = 0; u < contexts.win_h; ++u)
            for (std::size_t v = 0; v < contexts.win_w; ++v)
                if (contexts.windows.at(std::size_t{0}, u, v, std::size_t{0}) != 0.0) ++nonzero;
        const std::size_t interior_side = R * P - (R - 1) * P / 2;
        REQUIRE(nonzero == interior_side * interior_side);
    }
}

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <random>
#include <string>
#include <utility>

#include <json.hpp>

#include "vwa/attention.hpp"
#include "vwa/cost_counter.hpp"
#include "vwa/errors.hpp"
#include "vwa/tensor.hpp"

namespace vwa {

enum class Variant { GA, LWA, VwaNoRescale, VwaPostPe, VwaPostAvgPool, VwaPreDopePe };

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::GA: return "ga";
        case Variant::LWA: return "lwa";
        case Variant::VwaNoRescale: return "vwa-norescale";
        case Variant::VwaPostPe: return "vwa-postpe";
        case Variant::VwaPostAvgPool: return "vwa-postavgpool";
        case Variant::VwaPreDopePe: return "vwa-predopepe";
    }
    throw ConfigError("unknown variant");
}

inline Variant parse_variant(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "ga") return Variant::GA;
    if (s == "lwa") return Variant::LWA;
    if (s == "vwa-norescale" || s == "norescale") return Variant::VwaNoRescale;
    if (s == "vwa-postpe" || s == "postpe") return Variant::VwaPostPe;
    if (s == "vwa-postavgpool" || s == "postavgpool") return Variant::VwaPostAvgPool;
    if (s == "vwa-predopepe" || s == "predopepe") return Variant::VwaPreDopePe;
    throw ConfigError("unknown variant '" + s + "'");
}

struct Geometry {
    std::size_t H = 0, W = 0, C = 0, P = 1, R = 1;
    std::size_t heads = 8;

    bool operator==(const Geometry&) const = default;
};

// Paired analytic/measured tallies for one mechanism at one geometry.
// Counts are exact integers: MACs from the matmul/conv2d recording, memory
// from the labelled activation points (see cost_counter.hpp for the
// conventions).
struct CostReport {
    Variant variant = Variant::LWA;
    Geometry config;
    std::uint64_t macs_linear = 0;
    std::uint64_t macs_attention = 0;
    std::uint64_t mem_linear_elems = 0;
    std::uint64_t mem_attn_elems = 0;

    std::uint64_t total() const { return macs_linear + macs_attention; }
};

inline bool uses_window(Variant v) { return v != Variant::GA; }
inline bool uses_ratio(Variant v) { return v != Variant::GA && v != Variant::LWA; }

// Checks a (variant, geometry) cell; returns an empty string when valid or
// the violated constraint.
inline std::string variant_config_issue(Variant v, const Geometry& g) {
    if (g.H == 0 || g.W == 0 || g.C == 0 || g.P == 0 || g.R == 0 || g.heads == 0) return "all dims must be >= 1";
    if (g.C % g.heads != 0) return "C not divisible by heads";
    if (uses_window(v) && (g.H % g.P != 0 || g.W % g.P != 0)) return "H, W must be divisible by P";
    if (uses_ratio(v)) {
        if (g.R * g.P > g.H || g.R * g.P > g.W) return "R*P exceeds feature extent";
        if (g.R > 1 && g.P % 2 != 0) return "P must be even when R > 1";
        if (v == Variant::VwaPreDopePe && g.C % (g.R * g.R) != 0) return "C not divisible by R^2";
    }
    return {};
}

inline void require_valid(Variant v, const Geometry& g) {
    const std::string issue = variant_config_issue(v, g);
    if (!issue.empty()) throw ConfigError(variant_name(v) + " at H=" + std::to_string(g.H) + " W=" + std::to_string(g.W) +
                                          " C=" + std::to_string(g.C) + " P=" + std::to_string(g.P) + " R=" +
                                          std::to_string(g.R) + ": " + issue);
}

// Closed-form budgets. Linear-map MACs count query/key/value/out plus the
// strategy's rescaling convs; attention MACs cover logits and the weighted
// sum. Memory fields follow the activation accounting rules in
// cost_counter.hpp; the post-scaling strategies' raw-context term only exists
// for R > 1 (nothing is materialized beyond the windows at R = 1).
inline CostReport analytic(Variant v, const Geometry& g) {
    require_valid(v, g);
    const std::uint64_t HW = static_cast<std::uint64_t>(g.H) * g.W;
    const std::uint64_t C = g.C, P = g.P, R = g.R;
    const std::uint64_t C2 = C * C, P2 = P * P, R2 = R * R;

    CostReport r;
    r.variant = v;
    r.config = g;
    switch (v) {
        case Variant::GA:
            r.macs_linear = 4 * HW * C2;
            r.macs_attention = 2 * HW * HW * C;
            r.mem_linear_elems = 4 * HW * C;
            r.mem_attn_elems = HW * HW;
            break;
        case Variant::LWA:
            r.macs_linear = 4 * HW * C2;
            r.macs_attention = 2 * HW * P2 * C;
            r.mem_linear_elems = 4 * HW * C;
            r.mem_attn_elems = HW * P2;
            break;
        case Variant::VwaNoRescale:
            r.macs_linear = 2 * (R2 + 1) * HW * C2;
            r.macs_attention = 2 * HW * R2 * P2 * C;
            r.mem_linear_elems = (R2 + 3) * HW * C;
            r.mem_attn_elems = HW * R2 * P2;
            break;
        case Variant::VwaPostPe:
            r.macs_linear = 2 * (R2 + 1) * HW * C2;
            r.macs_attention = 2 * HW * P2 * C;
            r.mem_linear_elems = (R > 1 ? R2 + 4 : 4) * HW * C;
            r.mem_attn_elems = HW * P2;
            break;
        case Variant::VwaPostAvgPool:
            r.macs_linear = 4 * HW * C2;
            r.macs_attention = 2 * HW * P2 * C;
            r.mem_linear_elems = (R > 1 ? R2 + 4 : 4) * HW * C;
            r.mem_attn_elems = HW * P2;
            break;
        case Variant::VwaPreDopePe:
            r.macs_linear = 5 * HW * C2;
            r.macs_attention = 2 * HW * P2 * C;
            r.mem_linear_elems = 4 * HW * C;
            r.mem_attn_elems = HW * P2;
            break;
    }
    return r;
}

inline RescaleStrategy variant_strategy(Variant v) {
    switch (v) {
        case Variant::VwaNoRescale: return RescaleStrategy::NoRescale;
        case Variant::VwaPostPe: return RescaleStrategy::PostPe;
        case Variant::VwaPostAvgPool: return RescaleStrategy::PostAvgPool;
        case Variant::VwaPreDopePe: return RescaleStrategy::PreDopePe;
        default: throw ConfigError(variant_name(v) + " has no rescale strategy");
    }
}

// Runs a forward under a fresh counter and reports the accumulated tallies.
template <class F>
CostReport measure_run(Variant v, const Geometry& g, F&& run) {
    CostCounter counter;
    {
        CounterScope scope(counter);
        run();
    }
    CostReport r;
    r.variant = v;
    r.config = g;
    r.macs_linear = counter.macs_linear;
    r.macs_attention = counter.macs_attention;
    r.mem_linear_elems = counter.mem_linear_elems;
    r.mem_attn_elems = counter.mem_attn_elems;
    return r;
}

// Builds a seeded input and weights for the variant and measures one forward.
inline CostReport measure_variant(Variant v, const Geometry& g, PadMode pad_mode = PadMode::CopyShift,
                                  std::uint64_t seed = 1) {
    require_valid(v, g);
    std::mt19937_64 rng(seed);
    Tensor x = random_uniform({g.C, g.H, g.W}, -1.0, 1.0, rng);
    if (v == Variant::GA) {
        AttnConfig cfg{g.C, 1, 1, g.heads, pad_mode, RescaleStrategy::NoRescale};
        AttnWeights w = init_attn_weights(cfg, seed + 1);
        return measure_run(v, g, [&] { ga_forward(x, w, g.heads); });
    }
    if (v == Variant::LWA) {
        AttnConfig cfg{g.C, g.P, 1, g.heads, pad_mode, RescaleStrategy::NoRescale};
        AttnWeights w = init_attn_weights(cfg, seed + 1);
        return measure_run(v, g, [&] { lwa_forward(x, w, g.P, g.heads); });
    }
    AttnConfig cfg{g.C, g.P, g.R, g.heads, pad_mode, variant_strategy(v)};
    AttnWeights w = init_attn_weights(cfg, seed + 1);
    return measure_run(v, g, [&] { vwa_forward(x, w, cfg); });
}

// Per-field signed differences between two reports over the same (H, W, C, P).
struct CostDiff {
    std::int64_t macs_linear = 0;
    std::int64_t macs_attention = 0;
    std::int64_t mem_linear_elems = 0;
    std::int64_t mem_attn_elems = 0;

    bool all_zero() const { return !macs_linear && !macs_attention && !mem_linear_elems && !mem_attn_elems; }
};

inline CostDiff compare(const CostReport& a, const CostReport& b) {
    if (a.config.H != b.config.H || a.config.W != b.config.W || a.config.C != b.config.C || a.config.P != b.config.P)
        throw ContractError("compare over different configs");
    auto d = [](std::uint64_t x, std::uint64_t y) {
        return static_cast<std::int64_t>(x) - static_cast<std::int64_t>(y);
    };
    return CostDiff{d(a.macs_linear, b.macs_linear), d(a.macs_attention, b.macs_attention),
                    d(a.mem_linear_elems, b.mem_linear_elems), d(a.mem_attn_elems, b.mem_attn_elems)};
}

inline std::string csv_header() {
    return "variant,H,W,C,P,R,heads,macs_linear,macs_attention,mem_linear_elems,mem_attn_elems";
}

inline std::string csv_row(const CostReport& r) {
    const Geometry& g = r.config;
    return variant_name(r.variant) + "," + std::to_string(g.H) + "," + std::to_string(g.W) + "," +
           std::to_string(g.C) + "," + std::to_string(g.P) + "," + std::to_string(g.R) + "," +
           std::to_string(g.heads) + "," + std::to_string(r.macs_linear) + "," + std::to_string(r.macs_attention) +
           "," + std::to_string(r.mem_linear_elems) + "," + std::to_string(r.mem_attn_elems);
}

inline void to_json(nlohmann::json& j, const Geometry& g) {
    j = {{"H", g.H}, {"W", g.W}, {"C", g.C}, {"P", g.P}, {"R", g.R}, {"heads", g.heads}};
}

inline void to_json(nlohmann::json& j, const CostReport& r) {
    j = {{"variant", variant_name(r.variant)}, {"config", r.config},
         {"macs_linear", r.macs_linear},       {"macs_attention", r.macs_attention},
         {"mem_linear_elems", r.mem_linear_elems}, {"mem_attn_elems", r.mem_attn_elems},
         {"macs_total", r.total()}};
}

inline void to_json(nlohmann::json& j, const CostDiff& d) {
    j = {{"macs_linear", d.macs_linear},
         {"macs_attention", d.macs_attention},
         {"mem_linear_elems", d.mem_linear_elems},
         {"mem_attn_elems", d.mem_attn_elems}};
}

}  // namespace vwa

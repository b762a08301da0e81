#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vwa/autodiff.hpp"
#include "vwa/cost_counter.hpp"
#include "vwa/errors.hpp"
#include "vwa/tensor.hpp"
#include "vwa/windowing.hpp"

namespace vwa {

// How the enlarged RP x RP context is brought back to the query's scale.
//   NoRescale   - raw contexts feed the key/value maps.
//   PostPe      - patch-embed each extracted context (kernel R, stride R).
//   PostAvgPool - average-pool each extracted context R-fold, then map.
//   PreDopePe   - reduce channels C -> C/R^2 on the feature map first
//                 (kernel R, stride 1), extract, then patch-embed the small
//                 contexts back to C while downsampling to P x P.
enum class RescaleStrategy { NoRescale, PostPe, PostAvgPool, PreDopePe };

inline std::string strategy_name(RescaleStrategy s) {
    switch (s) {
        case RescaleStrategy::NoRescale: return "no-rescale";
        case RescaleStrategy::PostPe: return "post-pe";
        case RescaleStrategy::PostAvgPool: return "post-avgpool";
        case RescaleStrategy::PreDopePe: return "pre-dope-pe";
    }
    throw ConfigError("unknown strategy");
}

struct AttnConfig {
    std::size_t channels = 0;
    std::size_t window = 0;
    std::size_t ratio = 1;
    std::size_t heads = 8;
    PadMode pad_mode = PadMode::CopyShift;
    RescaleStrategy strategy = RescaleStrategy::PreDopePe;

    double softmax_scale() const { return 1.0 / std::sqrt(static_cast<double>(channels / heads)); }

    void validate() const {
        if (channels == 0 || window == 0 || ratio == 0 || heads == 0)
            throw ConfigError("channels, window, ratio and heads must be >= 1");
        if (channels % heads != 0)
            throw ConfigError("channels " + std::to_string(channels) + " not divisible by heads " + std::to_string(heads));
        if (strategy == RescaleStrategy::PreDopePe && channels % (ratio * ratio) != 0)
            throw ConfigError("channels " + std::to_string(channels) + " not divisible by R^2 = " +
                              std::to_string(ratio * ratio));
    }
};

template <class T>
struct LinearMapT {
    T weight;  // (Cin, Cout)
    T bias;    // (Cout)
};

template <class T>
struct Conv2dMapT {
    T weight;  // (Cout, Cin, k, k)
    T bias;    // (Cout)
    std::size_t stride = 1;
};

template <class T>
struct AttnWeightsT {
    LinearMapT<T> query, key, value, out;
    Conv2dMapT<T> dope;      // PreDopePe: C -> C/R^2, kernel R, stride 1
    Conv2dMapT<T> pe_key;    // PreDopePe: C/R^2 -> C; PostPe: C -> C; kernel R, stride R
    Conv2dMapT<T> pe_value;
};

using AttnWeights = AttnWeightsT<Tensor>;

namespace detail {

inline Tensor init_weight(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return random_uniform(std::move(shape), -bound, bound, rng);
}

}  // namespace detail

inline LinearMapT<Tensor> identity_linear(std::size_t C) {
    Tensor w({C, C});
    for (std::size_t i = 0; i < C; ++i) w.at(i, i) = 1.0;
    return {w, Tensor({C})};
}

// Identity 1x1 convolution (only meaningful at kernel 1).
inline Conv2dMapT<Tensor> identity_conv1x1(std::size_t C) {
    Tensor w({C, C, 1, 1});
    for (std::size_t i = 0; i < C; ++i) w.at(i, i, 0, 0) = 1.0;
    return {w, Tensor({C}), 1};
}

// Uniform(+-1/sqrt(fan_in)) init of every map the configured strategy uses.
inline AttnWeights init_attn_weights(const AttnConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    const std::size_t C = cfg.channels, R = cfg.ratio;
    AttnWeights w;
    for (LinearMapT<Tensor>* m : {&w.query, &w.key, &w.value, &w.out}) {
        m->weight = detail::init_weight({C, C}, C, rng);
        m->bias = detail::init_weight({C}, C, rng);
    }
    if (cfg.strategy == RescaleStrategy::PreDopePe) {
        const std::size_t Cr = C / (R * R);
        w.dope = {detail::init_weight({Cr, C, R, R}, C * R * R, rng), detail::init_weight({Cr}, C * R * R, rng), 1};
        w.pe_key = {detail::init_weight({C, Cr, R, R}, Cr * R * R, rng), detail::init_weight({C}, Cr * R * R, rng), R};
        w.pe_value = {detail::init_weight({C, Cr, R, R}, Cr * R * R, rng), detail::init_weight({C}, Cr * R * R, rng), R};
    } else if (cfg.strategy == RescaleStrategy::PostPe) {
        w.pe_key = {detail::init_weight({C, C, R, R}, C * R * R, rng), detail::init_weight({C}, C * R * R, rng), R};
        w.pe_value = {detail::init_weight({C, C, R, R}, C * R * R, rng), detail::init_weight({C}, C * R * R, rng), R};
    }
    return w;
}

// Flat name -> tensor view of the weights, for the binary-file + manifest
// persistence interface.
inline std::map<std::string, Tensor> attn_weights_to_tensors(const AttnWeights& w) {
    std::map<std::string, Tensor> m;
    const std::pair<std::string, const LinearMapT<Tensor>*> linear[] = {
        {"query", &w.query}, {"key", &w.key}, {"value", &w.value}, {"out", &w.out}};
    for (const auto& [name, map] : linear) {
        m.emplace(name + "_weight", map->weight);
        m.emplace(name + "_bias", map->bias);
    }
    const std::pair<std::string, const Conv2dMapT<Tensor>*> convs[] = {
        {"dope", &w.dope}, {"pe_key", &w.pe_key}, {"pe_value", &w.pe_value}};
    for (const auto& [name, map] : convs) {
        if (map->weight.size() == 0) continue;
        m.emplace(name + "_weight", map->weight);
        m.emplace(name + "_bias", map->bias);
    }
    return m;
}

inline AttnWeights attn_weights_from_tensors(const std::map<std::string, Tensor>& m, const AttnConfig& cfg) {
    cfg.validate();
    AttnWeights w;
    const auto get = [&m](const std::string& name) -> const Tensor& {
        auto it = m.find(name);
        if (it == m.end()) throw ContractError("weight map missing '" + name + "'");
        return it->second;
    };
    w.query = {get("query_weight"), get("query_bias")};
    w.key = {get("key_weight"), get("key_bias")};
    w.value = {get("value_weight"), get("value_bias")};
    w.out = {get("out_weight"), get("out_bias")};
    if (cfg.strategy == RescaleStrategy::PreDopePe)
        w.dope = {get("dope_weight"), get("dope_bias"), 1};
    if (cfg.strategy == RescaleStrategy::PreDopePe || cfg.strategy == RescaleStrategy::PostPe) {
        w.pe_key = {get("pe_key_weight"), get("pe_key_bias"), cfg.ratio};
        w.pe_value = {get("pe_value_weight"), get("pe_value_bias"), cfg.ratio};
    }
    return w;
}

inline AttnWeightsT<Var> lift(Tape& tape, const AttnWeights& w) {
    AttnWeightsT<Var> out;
    auto lift_linear = [&](const LinearMapT<Tensor>& m) -> LinearMapT<Var> {
        if (m.weight.size() == 0) return {};
        return {tape.leaf(m.weight), tape.leaf(m.bias)};
    };
    auto lift_conv = [&](const Conv2dMapT<Tensor>& m) -> Conv2dMapT<Var> {
        if (m.weight.size() == 0) return {};
        return {tape.leaf(m.weight), tape.leaf(m.bias), m.stride};
    };
    out.query = lift_linear(w.query);
    out.key = lift_linear(w.key);
    out.value = lift_linear(w.value);
    out.out = lift_linear(w.out);
    out.dope = lift_conv(w.dope);
    out.pe_key = lift_conv(w.pe_key);
    out.pe_value = lift_conv(w.pe_value);
    return out;
}

namespace detail {

// (C,H,W) map to a single batch of HW tokens, channels last.
template <class T>
T map_to_tokens(const T& x) {
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    return reshape(permute(x, {1, 2, 0}), {std::size_t{1}, H * W, C});
}

template <class T>
T tokens_to_map(const T& tokens, std::size_t H, std::size_t W) {
    const std::size_t C = tokens.dim(2);
    return permute(reshape(tokens, {H, W, C}), {2, 0, 1});
}

// Tokens (..., Cin) through a linear map; all leading dims are batch.
template <class T>
T linear_tokens(const T& tokens, const LinearMapT<T>& map) {
    const std::size_t cin = tokens.dim(tokens.rank() - 1);
    const std::size_t n = tokens.size() / cin;
    T flat = reshape(tokens, {n, cin});
    T y = add_bias(matmul(flat, map.weight), map.bias, 1);
    Shape out_shape = tokens.shape();
    out_shape.back() = map.bias.dim(0);
    return reshape(y, out_shape);
}

// im2col over a window set: (n, S, S, Cin) -> (n*P*P, k*k*Cin) with P = S/k,
// blocks read at stride k.
inline GatherPlan plan_window_im2col(std::size_t n, std::size_t S, std::size_t Cin, std::size_t k) {
    if (k == 0 || S % k != 0) throw GeometryError("window extent " + std::to_string(S) + " not divisible by kernel " + std::to_string(k));
    const std::size_t P = S / k;
    GatherPlanBuilder b({n, S, S, Cin}, {n * P * P, k * k * Cin});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t y = 0; y < P; ++y)
            for (std::size_t x = 0; x < P; ++x)
                for (std::size_t u = 0; u < k; ++u)
                    for (std::size_t v = 0; v < k; ++v)
                        for (std::size_t c = 0; c < Cin; ++c)
                            b.copy_from(((i * S + (y * k + u)) * S + (x * k + v)) * Cin + c);
    return b.take();
}

// Conv weight (Cout, Cin, k, k) as a (k*k*Cin, Cout) matrix matching the
// im2col column order.
inline GatherPlan plan_conv_weight_matrix(std::size_t Cout, std::size_t Cin, std::size_t k) {
    GatherPlanBuilder b({Cout, Cin, k, k}, {k * k * Cin, Cout});
    for (std::size_t u = 0; u < k; ++u)
        for (std::size_t v = 0; v < k; ++v)
            for (std::size_t c = 0; c < Cin; ++c)
                for (std::size_t co = 0; co < Cout; ++co) b.copy_from(((co * Cin + c) * k + u) * k + v);
    return b.take();
}

// Multi-head scaled dot-product attention over per-window token batches.
// q (nw, nq, C), k/v (nw, nk, C) -> (nw, nq, C). Captures the softmax tensor
// (nw*heads, nq, nk) when requested.
template <class T>
T attend(const T& q, const T& k, const T& v, std::size_t heads, double scale_factor, T* attn_capture = nullptr) {
    const std::size_t nw = q.dim(0), nq = q.dim(1), C = q.dim(2), nk = k.dim(1);
    if (C % heads != 0) throw ConfigError("channels not divisible by heads");
    const std::size_t d = C / heads;

    auto split = [&](const T& t, std::size_t nt) {
        return reshape(permute(reshape(t, {nw, nt, heads, d}), {0, 2, 1, 3}), {nw * heads, nt, d});
    };
    T qh = split(q, nq);
    T kh = split(k, nk);
    T vh = split(v, nk);
    T kt = permute(kh, {0, 2, 1});

    T attn;
    {
        CategoryScope cat(CostCategory::Attention);
        attn = softmax(scale(matmul(qh, kt), scale_factor), 2);
    }
    detail::add_mem_attn(static_cast<std::uint64_t>(nw) * nq * nk);
    if (attn_capture) *attn_capture = attn;

    T mixed;
    {
        CategoryScope cat(CostCategory::Attention);
        mixed = matmul(attn, vh);
    }
    T merged = reshape(permute(reshape(mixed, {nw, heads, nq, d}), {0, 2, 1, 3}), {nw, nq, C});
    detail::add_mem_linear(merged.size());
    return merged;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

// Global multi-head self-attention over all HW tokens.
// MACs: 4(HW)C^2 + 2(HW)^2 C.
template <class T>
T ga_forward(const T& x, const AttnWeightsT<T>& w, std::size_t heads = 8) {
    if (x.rank() != 3) throw ShapeError("ga_forward input must be C x H x W");
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const double sc = 1.0 / std::sqrt(static_cast<double>(C / heads));
    T tok = detail::map_to_tokens(x);
    T q = detail::linear_tokens(tok, w.query);
    detail::add_mem_linear(q.size());
    T k = detail::linear_tokens(tok, w.key);
    detail::add_mem_linear(k.size());
    T v = detail::linear_tokens(tok, w.value);
    T mixed = detail::attend(q, k, v, heads, sc);
    T o = detail::linear_tokens(mixed, w.out);
    detail::add_mem_linear(o.size());
    return detail::tokens_to_map(o, H, W);
}

// Attention confined to non-overlapping P x P windows.
// MACs: 4(HW)C^2 + 2(HW)P^2 C.
template <class T>
T lwa_forward(const T& x, const AttnWeightsT<T>& w, std::size_t P, std::size_t heads = 8) {
    if (x.rank() != 3) throw ShapeError("lwa_forward input must be C x H x W");
    const std::size_t C = x.dim(0);
    const double sc = 1.0 / std::sqrt(static_cast<double>(C / heads));
    auto ws = partition_queries(x, P);
    const std::size_t nw = ws.count();
    T tok = reshape(ws.windows, {nw, P * P, C});
    T q = detail::linear_tokens(tok, w.query);
    detail::add_mem_linear(q.size());
    T k = detail::linear_tokens(tok, w.key);
    detail::add_mem_linear(k.size());
    T v = detail::linear_tokens(tok, w.value);
    T mixed = detail::attend(q, k, v, heads, sc);
    T o = detail::linear_tokens(mixed, w.out);
    detail::add_mem_linear(o.size());
    BasicWindowSet<T> out_ws;
    out_ws.windows = reshape(o, {nw, P, P, C});
    out_ws.rows = ws.rows;
    out_ws.cols = ws.cols;
    out_ws.win_h = out_ws.win_w = out_ws.stride = P;
    out_ws.channels = C;
    return fold(out_ws);
}

// Densely overlapping patch embedding: stride-1 kernel-R conv C -> C/R^2,
// same spatial size via an explicit edge-replicated halo of R-1 (split
// floor/ceil). MACs: (HW)C^2.
template <class T>
T dope(const T& x, const Conv2dMapT<T>& map, std::size_t ratio) {
    if (x.rank() != 3) throw ShapeError("dope input must be C x H x W");
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2), R = ratio;
    if (R == 0 || C % (R * R) != 0)
        throw ConfigError("dope needs channels divisible by R^2, got C=" + std::to_string(C) + " R=" + std::to_string(R));
    if (map.weight.dim(2) != R || map.weight.dim(1) != C)
        throw ShapeError("dope weight must be (C/R^2, C, R, R)");
    if (R == 1) return conv2d(x, map.weight, map.bias, 1);
    const std::size_t lo = (R - 1) / 2, hi = R - 1 - lo;
    T padded = apply_plan(x, plan_replicate_border(C, H, W, lo, hi, lo, hi));
    return conv2d(padded, map.weight, map.bias, 1);
}

// Patch embedding of a context window set: kernel R, stride R, restoring C
// channels while downsampling RP x RP to P x P. Total MACs over all windows:
// (HW)C^2.
template <class T>
BasicWindowSet<T> pe(const BasicWindowSet<T>& contexts, const Conv2dMapT<T>& map, std::size_t P, std::size_t R) {
    if (contexts.win_h != R * P || contexts.win_w != R * P)
        throw GeometryError("pe expects RP x RP contexts, got " + std::to_string(contexts.win_h));
    const std::size_t n = contexts.count(), Cin = contexts.channels;
    if (map.weight.dim(1) != Cin || map.weight.dim(2) != R)
        throw GeometryError("pe weight must be (Cout, " + std::to_string(Cin) + ", " + std::to_string(R) + ", " +
                            std::to_string(R) + ")");
    const std::size_t Cout = map.weight.dim(0);
    T cols = apply_plan(contexts.windows, detail::plan_window_im2col(n, R * P, Cin, R));
    T wmat = apply_plan(map.weight, detail::plan_conv_weight_matrix(Cout, Cin, R));
    T tok = add_bias(matmul(cols, wmat), map.bias, 1);
    BasicWindowSet<T> out;
    out.windows = reshape(tok, {n, P, P, Cout});
    out.rows = contexts.rows;
    out.cols = contexts.cols;
    out.win_h = out.win_w = P;
    out.stride = contexts.stride;
    out.channels = Cout;
    return out;
}

// Varying window attention: queries on P x P windows, keys/values on RP x RP
// contexts brought to scale by the configured strategy.
// PreDopePe MACs: 5(HW)C^2 + 2(HW)P^2 C.
template <class T>
T vwa_forward(const T& x, const AttnWeightsT<T>& w, const AttnConfig& cfg, T* attn_capture = nullptr) {
    cfg.validate();
    if (x.rank() != 3) throw ShapeError("vwa_forward input must be C x H x W");
    if (x.dim(0) != cfg.channels)
        throw ShapeError("input channels " + std::to_string(x.dim(0)) + " vs config " + std::to_string(cfg.channels));
    const std::size_t C = cfg.channels, P = cfg.window, R = cfg.ratio, heads = cfg.heads;

    auto qws = partition_queries(x, P);
    const std::size_t nw = qws.count();
    T q_tok = reshape(qws.windows, {nw, P * P, C});
    T q = detail::linear_tokens(q_tok, w.query);
    detail::add_mem_linear(q.size());

    T k, v;
    if (R == 1) {
        // Contexts coincide with the query windows; rescaling convs become 1x1.
        switch (cfg.strategy) {
            case RescaleStrategy::NoRescale:
            case RescaleStrategy::PostAvgPool:
                k = detail::linear_tokens(q_tok, w.key);
                v = detail::linear_tokens(q_tok, w.value);
                break;
            case RescaleStrategy::PostPe: {
                auto kws = pe(qws, w.pe_key, P, 1);
                auto vws = pe(qws, w.pe_value, P, 1);
                k = reshape(kws.windows, {nw, P * P, C});
                v = reshape(vws.windows, {nw, P * P, C});
                break;
            }
            case RescaleStrategy::PreDopePe: {
                T d = dope(x, w.dope, 1);
                auto ctx = partition_queries(d, P);
                auto kws = pe(ctx, w.pe_key, P, 1);
                auto vws = pe(ctx, w.pe_value, P, 1);
                k = reshape(kws.windows, {nw, P * P, C});
                v = reshape(vws.windows, {nw, P * P, C});
                break;
            }
        }
        detail::add_mem_linear(k.size());
    } else {
        switch (cfg.strategy) {
            case RescaleStrategy::NoRescale: {
                T xp = pad_for_contexts(x, P, R, cfg.pad_mode);
                auto ctx = extract_contexts(xp, P, R);
                T ctx_tok = reshape(ctx.windows, {nw, R * P * R * P, C});
                k = detail::linear_tokens(ctx_tok, w.key);
                detail::add_mem_linear(k.size());
                v = detail::linear_tokens(ctx_tok, w.value);
                break;
            }
            case RescaleStrategy::PostPe: {
                T xp = pad_for_contexts(x, P, R, cfg.pad_mode);
                auto ctx = extract_contexts(xp, P, R);
                detail::add_mem_linear(ctx.windows.size());
                auto kws = pe(ctx, w.pe_key, P, R);
                auto vws = pe(ctx, w.pe_value, P, R);
                k = reshape(kws.windows, {nw, P * P, C});
                detail::add_mem_linear(k.size());
                v = reshape(vws.windows, {nw, P * P, C});
                break;
            }
            case RescaleStrategy::PostAvgPool: {
                T xp = pad_for_contexts(x, P, R, cfg.pad_mode);
                auto ctx = extract_contexts(xp, P, R);
                detail::add_mem_linear(ctx.windows.size());
                T pooled = apply_plan(ctx.windows, plan_window_avgpool(nw, R * P, C, R));
                T pool_tok = reshape(pooled, {nw, P * P, C});
                k = detail::linear_tokens(pool_tok, w.key);
                detail::add_mem_linear(k.size());
                v = detail::linear_tokens(pool_tok, w.value);
                break;
            }
            case RescaleStrategy::PreDopePe: {
                T d = dope(x, w.dope, R);
                T dp = pad_for_contexts(d, P, R, cfg.pad_mode);
                auto ctx = extract_contexts(dp, P, R);
                auto kws = pe(ctx, w.pe_key, P, R);
                auto vws = pe(ctx, w.pe_value, P, R);
                k = reshape(kws.windows, {nw, P * P, C});
                detail::add_mem_linear(k.size());
                v = reshape(vws.windows, {nw, P * P, C});
                break;
            }
        }
    }

    T mixed = detail::attend(q, k, v, heads, cfg.softmax_scale(), attn_capture);
    T o = detail::linear_tokens(mixed, w.out);
    detail::add_mem_linear(o.size());
    BasicWindowSet<T> out_ws;
    out_ws.windows = reshape(o, {nw, P, P, C});
    out_ws.rows = qws.rows;
    out_ws.cols = qws.cols;
    out_ws.win_h = out_ws.win_w = out_ws.stride = P;
    out_ws.channels = C;
    return fold(out_ws);
}

}  // namespace vwa

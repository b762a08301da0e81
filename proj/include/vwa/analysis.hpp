#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "vwa/attention.hpp"
#include "vwa/autodiff.hpp"
#include "vwa/errors.hpp"
#include "vwa/tensor.hpp"
#include "vwa/vwformer.hpp"
#include "vwa/windowing.hpp"

namespace vwa {

// Normalized per-pixel gradient-magnitude heatmap of one output unit.
struct ErfMap {
    Tensor grid;  // (1, H, W), values in [0, 1], max 1 for nonzero maps
    std::size_t query_row = 0;
    std::size_t query_col = 0;
    std::size_t n_samples = 0;
};

// A model is anything that maps an input leaf to a (C', H, W) output on the
// given tape.
using ErfModel = std::function<Var(Tape&, const Var&)>;
using InputSampler = std::function<Tensor(std::size_t sample_index, std::mt19937_64& rng)>;

// Input-gradient ERF: per sample, the scalar is the channel sum of the output
// at the query pixel; |d scalar / d input| is summed over input channels,
// averaged over samples, then normalized to max 1.
inline ErfMap erf_map(const ErfModel& model, const Shape& input_shape, std::size_t query_row, std::size_t query_col,
                      std::size_t n_samples = 16, std::uint64_t seed = 1, const InputSampler& sampler = {}) {
    if (input_shape.size() != 3) throw ShapeError("erf_map input shape must be (C, H, W)");
    if (n_samples == 0) throw ContractError("erf_map needs at least one sample");
    const std::size_t H = input_shape[1], W = input_shape[2];
    std::mt19937_64 rng(seed);
    Tensor acc({H, W});
    for (std::size_t s = 0; s < n_samples; ++s) {
        Tape tape;
        Tensor sample = sampler ? sampler(s, rng) : random_uniform(input_shape, -1.0, 1.0, rng);
        if (sample.shape() != input_shape) throw ShapeError("sampler returned wrong input shape");
        Var x = tape.leaf(std::move(sample));
        Var y = model(tape, x);
        if (y.rank() != 3) throw ShapeError("erf model output must be (C, H, W)");
        if (query_row >= y.dim(1) || query_col >= y.dim(2))
            throw IndexError("query (" + std::to_string(query_row) + "," + std::to_string(query_col) +
                             ") outside output " + std::to_string(y.dim(1)) + "x" + std::to_string(y.dim(2)));
        Var pixel = slice(slice(y, 1, query_row, query_row + 1), 2, query_col, query_col + 1);
        GradientMap grads = tape.backward(sum(pixel));
        const Tensor& g = grads.at(x);
        const std::size_t C = input_shape[0];
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < H * W; ++i) acc[i] += std::abs(g[c * H * W + i]);
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] /= static_cast<double>(n_samples);
    const double m = max_abs(acc);
    if (m > 0.0)
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] /= m;
    ErfMap out;
    out.grid = reshape(acc, {1, H, W});
    out.query_row = query_row;
    out.query_col = query_col;
    out.n_samples = n_samples;
    return out;
}

// ---------------------------------------------------------------------------
// Ready-made single-layer models
// ---------------------------------------------------------------------------

inline ErfModel erf_model_short(std::size_t C, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Tensor wt = detail::init_weight({C, C}, C, rng);
    const Tensor bt = detail::init_weight({C}, C, rng);
    return [wt, bt](Tape& tape, const Var& x) {
        LinearMapT<Var> m{tape.leaf(wt), tape.leaf(bt)};
        return detail::mlp_1x1(x, m);
    };
}

inline ErfModel erf_model_ga(std::size_t C, std::size_t heads, std::uint64_t seed) {
    AttnConfig cfg{C, 1, 1, heads, PadMode::CopyShift, RescaleStrategy::NoRescale};
    const AttnWeights w = init_attn_weights(cfg, seed);
    return [w, heads](Tape& tape, const Var& x) { return ga_forward(x, lift(tape, w), heads); };
}

inline ErfModel erf_model_lwa(std::size_t C, std::size_t P, std::size_t heads, std::uint64_t seed) {
    AttnConfig cfg{C, P, 1, heads, PadMode::CopyShift, RescaleStrategy::NoRescale};
    const AttnWeights w = init_attn_weights(cfg, seed);
    return [w, P, heads](Tape& tape, const Var& x) { return lwa_forward(x, lift(tape, w), P, heads); };
}

inline ErfModel erf_model_vwa(const AttnConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const AttnWeights w = init_attn_weights(cfg, seed);
    return [w, cfg](Tape& tape, const Var& x) { return vwa_forward(x, lift(tape, w), cfg); };
}

// The multi-scale stage of the decoder acting on an aggregated feature map.
inline ErfModel erf_model_vwformer_stage(const VWFormerConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const VWFormerWeights w = init_vwformer_weights(cfg, channel_profile("micro"), seed);
    return [w, cfg](Tape& tape, const Var& x) { return multi_scale(x, lift(tape, w), cfg); };
}

// ---------------------------------------------------------------------------
// Attention-row inspection
// ---------------------------------------------------------------------------

struct AttentionRow {
    std::vector<double> weights;
    std::vector<bool> from_padding;
    std::size_t window_index = 0;
    std::size_t query_index = 0;
    std::size_t head = 0;
};

// One softmax row of a VWA forward, annotated with which key positions
// originate from padding. For NoRescale a key position is a single padded-map
// pixel; for rescaled strategies a key aggregates an R x R source block and is
// flagged when that block lies entirely in the margin.
inline AttentionRow attention_row_dump(const AttnConfig& cfg, const AttnWeights& w, const Tensor& x,
                                       std::size_t window_index, std::size_t query_index, std::size_t head = 0) {
    cfg.validate();
    Tensor attn;
    vwa_forward(x, w, cfg, &attn);
    const std::size_t H = x.dim(1), W = x.dim(2), P = cfg.window, R = cfg.ratio;
    const std::size_t nw = (H / P) * (W / P);
    const std::size_t nq = attn.dim(1), nk = attn.dim(2);
    if (window_index >= nw) throw IndexError("window " + std::to_string(window_index) + " of " + std::to_string(nw));
    if (query_index >= nq) throw IndexError("query " + std::to_string(query_index) + " of " + std::to_string(nq));
    if (head >= cfg.heads) throw IndexError("head " + std::to_string(head) + " of " + std::to_string(cfg.heads));

    AttentionRow row;
    row.window_index = window_index;
    row.query_index = query_index;
    row.head = head;
    row.weights.resize(nk);
    for (std::size_t j = 0; j < nk; ++j)
        row.weights[j] = attn.at(window_index * cfg.heads + head, query_index, j);

    const std::size_t margin = R > 1 ? pad_margin(P, R) : 0;
    const std::size_t cols = W / P;
    const std::size_t wi = window_index / cols, wj = window_index % cols;
    const std::size_t key_side = cfg.strategy == RescaleStrategy::NoRescale ? R * P : P;
    const std::size_t block = cfg.strategy == RescaleStrategy::NoRescale ? 1 : R;
    row.from_padding.resize(nk, false);
    auto in_margin = [&](std::size_t r, std::size_t c) {
        return r < margin || c < margin || r >= margin + H || c >= margin + W;
    };
    for (std::size_t u = 0; u < key_side; ++u)
        for (std::size_t v = 0; v < key_side; ++v) {
            bool fully_padded = margin > 0;
            for (std::size_t du = 0; du < block && fully_padded; ++du)
                for (std::size_t dv = 0; dv < block && fully_padded; ++dv)
                    fully_padded = in_margin(wi * P + u * block + du, wj * P + v * block + dv);
            row.from_padding[u * key_side + v] = fully_padded;
        }
    return row;
}

struct CollapseStats {
    std::size_t distinct_count = 0;
    double padded_entropy = 0.0;
};

// Collapse diagnostics over the padding-originated positions of one row:
// the number of distinct weights (after rounding to 12 decimals) and the
// Shannon entropy of the renormalized padded weights.
inline CollapseStats collapse_metric(const std::vector<double>& row, const std::vector<bool>& padded_mask) {
    if (row.size() != padded_mask.size()) throw ContractError("mask length does not match row");
    std::vector<double> padded;
    for (std::size_t i = 0; i < row.size(); ++i)
        if (padded_mask[i]) padded.push_back(row[i]);
    if (padded.empty()) throw ContractError("no padded positions in mask");

    std::set<long long> distinct;
    double total = 0.0;
    for (double wv : padded) {
        distinct.insert(std::llround(wv * 1e12));
        total += wv;
    }
    double entropy = 0.0;
    if (total > 0.0)
        for (double wv : padded) {
            const double p = wv / total;
            if (p > 0.0) entropy -= p * std::log(p);
        }
    return CollapseStats{distinct.size(), entropy};
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

namespace detail {
inline const Tensor& as_grid(const Tensor& t) {
    if (t.rank() == 2) return t;
    if (t.rank() == 3 && t.dim(0) == 1) return t;
    throw ShapeError("heatmap must be (H, W) or (1, H, W)");
}
inline std::size_t grid_h(const Tensor& t) { return t.rank() == 2 ? t.dim(0) : t.dim(1); }
inline std::size_t grid_w(const Tensor& t) { return t.rank() == 2 ? t.dim(1) : t.dim(2); }
}  // namespace detail

// 8-bit binary PGM of a [0,1] heatmap.
inline void write_pgm(const Tensor& grid_in, const std::filesystem::path& path) {
    const Tensor& grid = detail::as_grid(grid_in);
    const std::size_t H = detail::grid_h(grid), W = detail::grid_w(grid);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    f << "P5\n" << W << " " << H << "\n255\n";
    for (std::size_t i = 0; i < H * W; ++i) {
        const double v = std::clamp(grid[i], 0.0, 1.0);
        const unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
        f.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!f) throw IoError("failed writing " + path.string());
}

// 8-bit binary PPM with a dark-blue -> magenta -> yellow colormap.
inline void write_ppm(const Tensor& grid_in, const std::filesystem::path& path) {
    const Tensor& grid = detail::as_grid(grid_in);
    const std::size_t H = detail::grid_h(grid), W = detail::grid_w(grid);
    static const double anchors[5][3] = {
        {0.0, 0.0, 0.1}, {0.2, 0.0, 0.5}, {0.7, 0.1, 0.6}, {0.98, 0.5, 0.2}, {1.0, 1.0, 0.6}};
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    f << "P6\n" << W << " " << H << "\n255\n";
    for (std::size_t i = 0; i < H * W; ++i) {
        const double v = std::clamp(grid[i], 0.0, 1.0) * 4.0;
        const std::size_t k = std::min<std::size_t>(3, static_cast<std::size_t>(v));
        const double t = v - static_cast<double>(k);
        for (int ch = 0; ch < 3; ++ch) {
            const double c = anchors[k][ch] * (1.0 - t) + anchors[k + 1][ch] * t;
            const unsigned char b = static_cast<unsigned char>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
            f.write(reinterpret_cast<const char*>(&b), 1);
        }
    }
    if (!f) throw IoError("failed writing " + path.string());
}

inline void write_attention_csv(const AttentionRow& row, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    f << "key_index,weight,from_padding\n";
    f.precision(17);
    for (std::size_t i = 0; i < row.weights.size(); ++i)
        f << i << "," << row.weights[i] << "," << (row.from_padding[i] ? 1 : 0) << "\n";
    if (!f) throw IoError("failed writing " + path.string());
}

struct SupportBox {
    bool empty = true;
    std::size_t r0 = 0, c0 = 0, r1 = 0, c1 = 0;
};

inline SupportBox support_bbox(const Tensor& grid_in, double tol = 0.0) {
    const Tensor& grid = detail::as_grid(grid_in);
    const std::size_t H = detail::grid_h(grid), W = detail::grid_w(grid);
    SupportBox box;
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c)
            if (std::abs(grid[r * W + c]) > tol) {
                if (box.empty) {
                    box = {false, r, c, r, c};
                } else {
                    box.r0 = std::min(box.r0, r);
                    box.c0 = std::min(box.c0, c);
                    box.r1 = std::max(box.r1, r);
                    box.c1 = std::max(box.c1, c);
                }
            }
    return box;
}

inline std::size_t support_area(const Tensor& grid_in, double tol = 0.0) {
    const Tensor& grid = detail::as_grid(grid_in);
    std::size_t n = 0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (std::abs(grid[i]) > tol) ++n;
    return n;
}

}  // namespace vwa

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vwa/attention.hpp"
#include "vwa/errors.hpp"
#include "vwa/tensor.hpp"

namespace vwa {

// Backbone feature pyramid: f4 at (H/4, W/4) down to f32 at (H/32, W/32).
template <class T>
struct MultiLevelFeaturesT {
    T f4, f8, f16, f32;
    std::size_t image_h = 0;
    std::size_t image_w = 0;

    void validate() const {
        if (image_h % 32 != 0 || image_w % 32 != 0)
            throw ShapeError("image extent " + std::to_string(image_h) + "x" + std::to_string(image_w) +
                             " must be divisible by 32");
        const T* levels[4] = {&f4, &f8, &f16, &f32};
        for (std::size_t i = 0; i < 4; ++i) {
            const std::size_t div = std::size_t{4} << i;
            if (levels[i]->rank() != 3 || levels[i]->dim(1) != image_h / div || levels[i]->dim(2) != image_w / div)
                throw ShapeError("level " + std::to_string(div) + " must be C x " + std::to_string(image_h / div) +
                                 " x " + std::to_string(image_w / div));
        }
    }
};

using MultiLevelFeatures = MultiLevelFeaturesT<Tensor>;

struct ChannelProfile {
    std::string name;
    std::size_t c4 = 0, c8 = 0, c16 = 0, c32 = 0;
};

inline ChannelProfile channel_profile(const std::string& name) {
    if (name == "swin-b") return {name, 128, 256, 512, 1024};
    if (name == "mit-b0") return {name, 32, 64, 160, 256};
    if (name == "micro") return {name, 4, 4, 8, 8};
    throw ConfigError("unknown channel profile '" + name + "'");
}

// Decoder wiring. The window of every VWA branch follows the rule
// P = (spatial side of the aggregated feature) / 8, giving an 8x8 grid of
// query windows so the largest default ratio (R = 8) spans the whole map.
struct VWFormerConfig {
    std::size_t agg_channels = 512;
    std::size_t lle_channels = 48;
    std::size_t out_channels = 256;
    std::size_t num_classes = 150;
    std::vector<std::size_t> scale_group{2, 4, 8};
    std::size_t heads = 8;
    PadMode pad_mode = PadMode::CopyShift;
    RescaleStrategy strategy = RescaleStrategy::PreDopePe;

    static VWFormerConfig standard(std::size_t classes) {
        VWFormerConfig c;
        c.num_classes = classes;
        return c;
    }
    static VWFormerConfig efficient(std::size_t classes) {
        VWFormerConfig c;
        c.agg_channels = 128;
        c.lle_channels = 32;
        c.out_channels = 128;
        c.num_classes = classes;
        return c;
    }

    void validate() const {
        if (agg_channels == 0 || lle_channels == 0 || out_channels == 0 || num_classes == 0 || heads == 0)
            throw ConfigError("all channel counts must be >= 1");
        if (scale_group.empty()) throw ConfigError("scale_group must name at least one ratio");
        if (agg_channels % heads != 0) throw ConfigError("agg_channels not divisible by heads");
        for (std::size_t r : scale_group) {
            if (r == 0) throw ConfigError("ratio 0 in scale_group");
            if (strategy == RescaleStrategy::PreDopePe && agg_channels % (r * r) != 0)
                throw ConfigError("agg_channels " + std::to_string(agg_channels) + " not divisible by R^2 for R=" +
                                  std::to_string(r));
        }
    }
};

// Channel widths observed through one decoder pass:
// aggregated -> concat -> multi_scale_out -> lle_concat -> fused.
struct ChannelFlow {
    std::size_t aggregated = 0;
    std::size_t concat_width = 0;
    std::size_t multi_scale_out = 0;
    std::size_t lle_concat_width = 0;
    std::size_t fused = 0;
};

template <class T>
struct VWFormerWeightsT {
    LinearMapT<T> mlp0, short_path, mlp1, mlp_low, mlp2, classifier;
    std::vector<AttnWeightsT<T>> branches;  // one per scale_group entry
};

using VWFormerWeights = VWFormerWeightsT<Tensor>;

inline VWFormerWeights init_vwformer_weights(const VWFormerConfig& cfg, const ChannelProfile& backbone,
                                             std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    auto linear = [&rng](std::size_t cin, std::size_t cout) -> LinearMapT<Tensor> {
        return {detail::init_weight({cin, cout}, cin, rng), detail::init_weight({cout}, cin, rng)};
    };
    VWFormerWeights w;
    const std::size_t cf = cfg.agg_channels;
    w.mlp0 = linear(backbone.c8 + backbone.c16 + backbone.c32, cf);
    w.short_path = linear(cf, cf);
    for (std::size_t r : cfg.scale_group) {
        // weight shapes depend on channels and ratio only; the window is
        // chosen per feature map at forward time
        AttnConfig bc{cf, 2, r, cfg.heads, cfg.pad_mode, cfg.strategy};
        w.branches.push_back(init_attn_weights(bc, rng()));
    }
    w.mlp1 = linear((cfg.scale_group.size() + 1) * cf, cf);
    w.mlp_low = linear(backbone.c4, cfg.lle_channels);
    w.mlp2 = linear(cf + cfg.lle_channels, cfg.out_channels);
    w.classifier = linear(cfg.out_channels, cfg.num_classes);
    return w;
}

inline VWFormerWeightsT<Var> lift(Tape& tape, const VWFormerWeights& w) {
    auto lift_linear = [&](const LinearMapT<Tensor>& m) -> LinearMapT<Var> {
        return {tape.leaf(m.weight), tape.leaf(m.bias)};
    };
    VWFormerWeightsT<Var> out;
    out.mlp0 = lift_linear(w.mlp0);
    out.short_path = lift_linear(w.short_path);
    out.mlp1 = lift_linear(w.mlp1);
    out.mlp_low = lift_linear(w.mlp_low);
    out.mlp2 = lift_linear(w.mlp2);
    out.classifier = lift_linear(w.classifier);
    for (const auto& b : w.branches) out.branches.push_back(lift(tape, b));
    return out;
}

namespace detail {

// 1x1 linear map over the channel dimension of a (C,H,W) map.
template <class T>
T mlp_1x1(const T& x, const LinearMapT<T>& m) {
    return tokens_to_map(linear_tokens(map_to_tokens(x), m), x.dim(1), x.dim(2));
}

}  // namespace detail

// Multi-layer aggregation: upsample f16 and f32 to f8's extent, concat the
// three levels along channels, reduce to agg_channels with MLP0.
template <class T>
T aggregate(const MultiLevelFeaturesT<T>& f, const VWFormerWeightsT<T>& w, const VWFormerConfig& cfg,
            ChannelFlow* flow = nullptr) {
    f.validate();
    cfg.validate();
    const std::size_t h8 = f.f8.dim(1), w8 = f.f8.dim(2);
    T up16 = bilinear_upsample(f.f16, h8, w8);
    T up32 = bilinear_upsample(f.f32, h8, w8);
    T cat = concat({f.f8, up16, up32}, 0);
    T F = detail::mlp_1x1(cat, w.mlp0);
    if (flow) flow->aggregated = F.dim(0);
    return F;
}

// Parallel VWA branches over the scale group plus the short path (a plain
// linear map), concatenated and reduced by MLP1.
template <class T>
T multi_scale(const T& F, const VWFormerWeightsT<T>& w, const VWFormerConfig& cfg, ChannelFlow* flow = nullptr) {
    cfg.validate();
    if (w.branches.size() != cfg.scale_group.size())
        throw ConfigError("weights carry " + std::to_string(w.branches.size()) + " branches for scale group of " +
                          std::to_string(cfg.scale_group.size()));
    const std::size_t side = F.dim(1);
    if (side % 8 != 0) throw GeometryError("aggregated side " + std::to_string(side) + " not divisible by 8");
    const std::size_t P = side / 8;
    std::vector<T> parts;
    parts.push_back(detail::mlp_1x1(F, w.short_path));
    for (std::size_t i = 0; i < cfg.scale_group.size(); ++i) {
        AttnConfig bc{cfg.agg_channels, P, cfg.scale_group[i], cfg.heads, cfg.pad_mode, cfg.strategy};
        parts.push_back(vwa_forward(F, w.branches[i], bc));
    }
    T cat = concat(parts, 0);
    if (flow) flow->concat_width = cat.dim(0);
    T F1 = detail::mlp_1x1(cat, w.mlp1);
    if (flow) flow->multi_scale_out = F1.dim(0);
    return F1;
}

// Low-level enhancement: reduce f4 with MLP_low, upsample F1 to f4's extent,
// concat and fuse with MLP2.
template <class T>
T lle_fuse(const T& F1, const T& f4, const VWFormerWeightsT<T>& w, const VWFormerConfig& cfg,
           ChannelFlow* flow = nullptr) {
    if (w.mlp_low.bias.dim(0) != cfg.lle_channels)
        throw ConfigError("mlp_low produces " + std::to_string(w.mlp_low.bias.dim(0)) + " channels, config says " +
                          std::to_string(cfg.lle_channels));
    if (w.mlp2.bias.dim(0) != cfg.out_channels)
        throw ConfigError("mlp2 produces " + std::to_string(w.mlp2.bias.dim(0)) + " channels, config says " +
                          std::to_string(cfg.out_channels));
    T f_low = detail::mlp_1x1(f4, w.mlp_low);
    T up = bilinear_upsample(F1, f4.dim(1), f4.dim(2));
    T cat = concat({up, f_low}, 0);
    if (flow) flow->lle_concat_width = cat.dim(0);
    T F2 = detail::mlp_1x1(cat, w.mlp2);
    if (flow) flow->fused = F2.dim(0);
    return F2;
}

// Full decoder: aggregate -> multi_scale -> lle_fuse -> 1x1 classifier.
// Logits come out at (num_classes, H/4, W/4).
template <class T>
T vwformer_forward(const MultiLevelFeaturesT<T>& f, const VWFormerWeightsT<T>& w, const VWFormerConfig& cfg,
                   ChannelFlow* flow = nullptr) {
    T F = aggregate(f, w, cfg, flow);
    T F1 = multi_scale(F, w, cfg, flow);
    T F2 = lle_fuse(F1, f.f4, w, cfg, flow);
    return detail::mlp_1x1(F2, w.classifier);
}

// Deterministic stand-in for a real backbone: seeded uniform noise per level,
// or smooth Gaussian blobs in structured mode for interpretable ERF figures.
inline MultiLevelFeatures synth_features(std::uint64_t seed, std::size_t H, std::size_t W,
                                         const ChannelProfile& profile, bool structured = false) {
    if (H % 32 != 0 || W % 32 != 0)
        throw ShapeError("image extent " + std::to_string(H) + "x" + std::to_string(W) + " must be divisible by 32");
    std::mt19937_64 rng(seed);
    MultiLevelFeatures f;
    f.image_h = H;
    f.image_w = W;
    const std::size_t chans[4] = {profile.c4, profile.c8, profile.c16, profile.c32};
    Tensor* levels[4] = {&f.f4, &f.f8, &f.f16, &f.f32};
    for (std::size_t i = 0; i < 4; ++i) {
        const std::size_t div = std::size_t{4} << i;
        const std::size_t h = H / div, w = W / div;
        if (!structured) {
            *levels[i] = random_uniform({chans[i], h, w}, -1.0, 1.0, rng);
            continue;
        }
        const double cy = (0.25 + 0.5 * detail::canonical(rng)) * static_cast<double>(h);
        const double cx = (0.25 + 0.5 * detail::canonical(rng)) * static_cast<double>(w);
        const double sigma = 0.08 * static_cast<double>(h) + 0.75;
        Tensor t({chans[i], h, w});
        for (std::size_t c = 0; c < chans[i]; ++c) {
            const double amp = 0.5 + detail::canonical(rng);
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    const double dy = (static_cast<double>(y) - cy) / sigma;
                    const double dx = (static_cast<double>(x) - cx) / sigma;
                    t.at(c, y, x) = amp * std::exp(-0.5 * (dy * dy + dx * dx));
                }
        }
        *levels[i] = std::move(t);
    }
    return f;
}

}  // namespace vwa

#pragma once

#include <cstddef>
#include <string>

#include "vwa/autodiff.hpp"
#include "vwa/errors.hpp"
#include "vwa/tensor.hpp"

namespace vwa {

enum class PadMode { Zero, CopyShift };

inline std::string pad_mode_name(PadMode m) { return m == PadMode::Zero ? "zero" : "csp"; }

// Per-side margin for context extraction at window P and ratio R. The slice
// widths of copy-shift padding force (R-1)P/2; P must be even so the copy
// band offset (R+1)P/2 is an integer for even R.
inline std::size_t pad_margin(std::size_t P, std::size_t R) {
    if (P == 0 || R == 0) throw GeometryError("window and ratio must be >= 1");
    if (P % 2 != 0) throw GeometryError("window size P=" + std::to_string(P) + " must be even for padding");
    return (R - 1) * P / 2;
}

struct PadSpec {
    PadMode mode = PadMode::CopyShift;
    std::size_t margin = 0;

    static PadSpec make(PadMode mode, std::size_t P, std::size_t R) { return PadSpec{mode, pad_margin(P, R)}; }
};

namespace detail {

// 1-D copy-shift source map: padded coordinate -> interior coordinate.
// Margins copy the bands [(R+1)P/2, RP) and [D-RP, D-(R+1)P/2) of the
// interior axis of extent D.
inline std::size_t csp_source_1d(std::size_t q, std::size_t D, std::size_t P, std::size_t R) {
    const std::size_t m = (R - 1) * P / 2;
    if (q < m) return (R + 1) * P / 2 + q;
    if (q < m + D) return q - m;
    return D - R * P + (q - m - D);
}

}  // namespace detail

inline GatherPlan plan_csp_pad(std::size_t C, std::size_t H, std::size_t W, std::size_t P, std::size_t R) {
    const std::size_t m = pad_margin(P, R);
    if (R * P > H) throw GeometryError("csp_pad needs R*P <= H, got R*P=" + std::to_string(R * P) + " H=" + std::to_string(H));
    if (R * P > W) throw GeometryError("csp_pad needs R*P <= W, got R*P=" + std::to_string(R * P) + " W=" + std::to_string(W));
    GatherPlanBuilder b({C, H, W}, {C, H + 2 * m, W + 2 * m});
    for (std::size_t ch = 0; ch < C; ++ch)
        for (std::size_t r = 0; r < H + 2 * m; ++r) {
            const std::size_t sr = detail::csp_source_1d(r, H, P, R);
            for (std::size_t c = 0; c < W + 2 * m; ++c) {
                const std::size_t sc = detail::csp_source_1d(c, W, P, R);
                b.copy_from((ch * H + sr) * W + sc);
            }
        }
    return b.take();
}

// Asymmetric zero border (top, bottom, left, right), used for "same"-size
// convolutions with even kernels.
inline GatherPlan plan_zero_border(std::size_t C, std::size_t H, std::size_t W, std::size_t top, std::size_t bottom,
                                   std::size_t left, std::size_t right) {
    const std::size_t Ho = H + top + bottom, Wo = W + left + right;
    GatherPlanBuilder b({C, H, W}, {C, Ho, Wo});
    for (std::size_t ch = 0; ch < C; ++ch)
        for (std::size_t r = 0; r < Ho; ++r)
            for (std::size_t c = 0; c < Wo; ++c) {
                if (r < top || c < left || r >= top + H || c >= left + W)
                    b.zero();
                else
                    b.copy_from((ch * H + (r - top)) * W + (c - left));
            }
    return b.take();
}

// Asymmetric edge-replicating border; constant fields stay constant through
// a subsequent convolution.
inline GatherPlan plan_replicate_border(std::size_t C, std::size_t H, std::size_t W, std::size_t top,
                                        std::size_t bottom, std::size_t left, std::size_t right) {
    const std::size_t Ho = H + top + bottom, Wo = W + left + right;
    GatherPlanBuilder b({C, H, W}, {C, Ho, Wo});
    for (std::size_t ch = 0; ch < C; ++ch)
        for (std::size_t r = 0; r < Ho; ++r)
            for (std::size_t c = 0; c < Wo; ++c) {
                const std::size_t sr = std::min(H - 1, r < top ? 0 : r - top);
                const std::size_t sc = std::min(W - 1, c < left ? 0 : c - left);
                b.copy_from((ch * H + sr) * W + sc);
            }
    return b.take();
}

inline GatherPlan plan_zero_pad(std::size_t C, std::size_t H, std::size_t W, std::size_t P, std::size_t R) {
    const std::size_t m = pad_margin(P, R);
    GatherPlanBuilder b({C, H, W}, {C, H + 2 * m, W + 2 * m});
    for (std::size_t ch = 0; ch < C; ++ch)
        for (std::size_t r = 0; r < H + 2 * m; ++r)
            for (std::size_t c = 0; c < W + 2 * m; ++c) {
                if (r < m || c < m || r >= m + H || c >= m + W)
                    b.zero();
                else
                    b.copy_from((ch * H + (r - m)) * W + (c - m));
            }
    return b.take();
}

// Copy-shift padding: width margins first, then height margins on the
// width-padded result, every padded pixel a copy of an interior pixel.
template <class T>
T csp_pad(const T& x, std::size_t P, std::size_t R) {
    if (x.rank() != 3) throw ShapeError("csp_pad input must be C x H x W");
    return apply_plan(x, plan_csp_pad(x.dim(0), x.dim(1), x.dim(2), P, R));
}

template <class T>
T zero_pad(const T& x, std::size_t P, std::size_t R) {
    if (x.rank() != 3) throw ShapeError("zero_pad input must be C x H x W");
    return apply_plan(x, plan_zero_pad(x.dim(0), x.dim(1), x.dim(2), P, R));
}

template <class T>
T pad_for_contexts(const T& x, std::size_t P, std::size_t R, PadMode mode) {
    return mode == PadMode::Zero ? zero_pad(x, P, R) : csp_pad(x, P, R);
}

// Non-overlapping P x P query windows.
template <class T>
auto partition_queries(const T& x, std::size_t P) {
    if (x.rank() != 3) throw ShapeError("partition_queries input must be C x H x W");
    if (P == 0) throw GeometryError("window size must be >= 1");
    if (x.dim(1) % P != 0)
        throw GeometryError("height " + std::to_string(x.dim(1)) + " not divisible by window " + std::to_string(P));
    if (x.dim(2) % P != 0)
        throw GeometryError("width " + std::to_string(x.dim(2)) + " not divisible by window " + std::to_string(P));
    return unfold(x, P, P);
}

// RP x RP context windows at stride P over a padded map produced by csp_pad
// or zero_pad with the same (P, R); window (i,j) is centered on query window
// (i,j).
template <class T>
auto extract_contexts(const T& x_padded, std::size_t P, std::size_t R) {
    if (x_padded.rank() != 3) throw ShapeError("extract_contexts input must be C x H x W");
    const std::size_t m = pad_margin(P, R);
    const std::size_t Hp = x_padded.dim(1), Wp = x_padded.dim(2);
    if (Hp < 2 * m + P || Wp < 2 * m + P || (Hp - 2 * m) % P != 0 || (Wp - 2 * m) % P != 0)
        throw GeometryError("padded extent " + std::to_string(Hp) + "x" + std::to_string(Wp) +
                            " inconsistent with P=" + std::to_string(P) + " R=" + std::to_string(R));
    return unfold(x_padded, R * P, P);
}

}  // namespace vwa

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vwa/cost_counter.hpp"
#include "vwa/errors.hpp"

namespace vwa {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::vector<std::size_t> shape_strides(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
    return st;
}

// Dense row-major f64 tensor. Values are immutable once an operation has
// returned; every public operation below is a pure function.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(shape_numel(shape_), 0.0);
    }

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (shape_numel(shape_) != data_.size())
            throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_str(shape_));
    }

    static Tensor full(Shape shape, double value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    static Tensor scalar(double value) { return Tensor({1}, {value}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const {
        if (i >= shape_.size()) throw IndexError("dim " + std::to_string(i) + " of rank-" + std::to_string(rank()) + " tensor");
        return shape_[i];
    }
    std::size_t size() const { return data_.size(); }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    template <class... Ix>
    double at(Ix... ix) const {
        return data_[flat_index({static_cast<std::size_t>(ix)...})];
    }
    template <class... Ix>
    double& at(Ix... ix) {
        return data_[flat_index({static_cast<std::size_t>(ix)...})];
    }

    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    std::size_t flat_index(std::initializer_list<std::size_t> ix) const {
        if (ix.size() != shape_.size())
            throw IndexError("got " + std::to_string(ix.size()) + " indices for rank " + std::to_string(rank()));
        std::size_t flat = 0, k = 0;
        for (std::size_t v : ix) {
            if (v >= shape_[k]) throw IndexError("index " + std::to_string(v) + " out of dim " + std::to_string(shape_[k]));
            flat = flat * shape_[k] + v;
            ++k;
        }
        return flat;
    }

    void validate_shape() const {
        for (std::size_t d : shape_)
            if (d == 0) throw ShapeError("zero-sized dimension in " + shape_str(shape_));
    }

    Shape shape_;
    std::vector<double> data_;
};

inline bool is_finite(const Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i)
        if (!std::isfinite(t[i])) return false;
    return true;
}

inline double max_abs(const Tensor& t) {
    double m = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) m = std::max(m, std::abs(t[i]));
    return m;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff on " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

namespace detail {
// Uniform double in [0,1) from the raw 64-bit stream, independent of the
// standard library's distribution implementation.
inline double canonical(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
}  // namespace detail

inline Tensor random_uniform(Shape shape, double lo, double hi, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * detail::canonical(rng);
    return t;
}

// ---------------------------------------------------------------------------
// Gather plans: sparse linear maps out[i] = sum_j w_ij * in[src_ij]. All
// geometry ops (unfold, fold, permute, slice, padding, interpolation) reduce
// to gathers, which gives them a single shared adjoint (scatter-add).
// ---------------------------------------------------------------------------

struct GatherPlan {
    Shape in_shape;
    Shape out_shape;
    std::vector<std::uint32_t> offsets;  // out_size + 1
    std::vector<std::uint32_t> src;
    std::vector<double> weight;

    std::size_t out_size() const { return shape_numel(out_shape); }
    std::size_t in_size() const { return shape_numel(in_shape); }
};

class GatherPlanBuilder {
public:
    GatherPlanBuilder(Shape in_shape, Shape out_shape) {
        plan_.in_shape = std::move(in_shape);
        plan_.out_shape = std::move(out_shape);
        plan_.offsets.reserve(plan_.out_size() + 1);
        plan_.offsets.push_back(0);
    }

    // Appends the next output element reading one source with weight 1.
    void copy_from(std::size_t src_index) {
        plan_.src.push_back(static_cast<std::uint32_t>(src_index));
        plan_.weight.push_back(1.0);
        plan_.offsets.push_back(static_cast<std::uint32_t>(plan_.src.size()));
    }

    // Appends the next output element as a weighted combination.
    void combine(std::initializer_list<std::pair<std::size_t, double>> terms) {
        for (const auto& [s, w] : terms) {
            plan_.src.push_back(static_cast<std::uint32_t>(s));
            plan_.weight.push_back(w);
        }
        plan_.offsets.push_back(static_cast<std::uint32_t>(plan_.src.size()));
    }

    void combine(const std::vector<std::pair<std::size_t, double>>& terms) {
        for (const auto& [s, w] : terms) {
            plan_.src.push_back(static_cast<std::uint32_t>(s));
            plan_.weight.push_back(w);
        }
        plan_.offsets.push_back(static_cast<std::uint32_t>(plan_.src.size()));
    }

    // Appends the next output element with no sources (constant zero).
    void zero() { plan_.offsets.push_back(static_cast<std::uint32_t>(plan_.src.size())); }

    GatherPlan take() {
        if (plan_.offsets.size() != plan_.out_size() + 1)
            throw ContractError("gather plan covers " + std::to_string(plan_.offsets.size() - 1) +
                                " of " + std::to_string(plan_.out_size()) + " outputs");
        return std::move(plan_);
    }

private:
    GatherPlan plan_;
};

inline Tensor apply_gather(const Tensor& x, const GatherPlan& p) {
    if (x.size() != p.in_size())
        throw ShapeError("gather expects input " + shape_str(p.in_shape) + ", got " + shape_str(x.shape()));
    Tensor out(p.out_shape);
    const double* xd = x.data();
    double* od = out.data();
    const std::size_t n = p.out_size();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::uint32_t j = p.offsets[i]; j < p.offsets[i + 1]; ++j) acc += p.weight[j] * xd[p.src[j]];
        od[i] = acc;
    }
    return out;
}

inline Tensor apply_gather_adjoint(const Tensor& grad_out, const GatherPlan& p) {
    if (grad_out.size() != p.out_size())
        throw ShapeError("gather adjoint expects " + shape_str(p.out_shape) + ", got " + shape_str(grad_out.shape()));
    Tensor g(p.in_shape);
    const double* gd = grad_out.data();
    double* xd = g.data();
    const std::size_t n = p.out_size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::uint32_t j = p.offsets[i]; j < p.offsets[i + 1]; ++j) xd[p.src[j]] += p.weight[j] * gd[i];
    return g;
}

// ---------------------------------------------------------------------------
// Plan builders
// ---------------------------------------------------------------------------

inline GatherPlan plan_permute(const Shape& in_shape, const std::vector<std::size_t>& dims) {
    if (dims.size() != in_shape.size()) throw ShapeError("permute dims rank mismatch");
    std::vector<bool> seen(dims.size(), false);
    Shape out_shape(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (dims[i] >= in_shape.size() || seen[dims[i]]) throw ShapeError("invalid permutation");
        seen[dims[i]] = true;
        out_shape[i] = in_shape[dims[i]];
    }
    GatherPlanBuilder b(in_shape, out_shape);
    const auto in_strides = shape_strides(in_shape);
    std::vector<std::size_t> idx(out_shape.size(), 0);
    const std::size_t n = shape_numel(out_shape);
    for (std::size_t flat = 0; flat < n; ++flat) {
        std::size_t src = 0;
        for (std::size_t d = 0; d < dims.size(); ++d) src += idx[d] * in_strides[dims[d]];
        b.copy_from(src);
        for (std::size_t d = out_shape.size(); d-- > 0;) {
            if (++idx[d] < out_shape[d]) break;
            idx[d] = 0;
        }
    }
    return b.take();
}

inline GatherPlan plan_slice(const Shape& in_shape, std::size_t axis, std::size_t lo, std::size_t hi) {
    if (axis >= in_shape.size()) throw IndexError("slice axis " + std::to_string(axis));
    if (!(lo < hi && hi <= in_shape[axis]))
        throw IndexError("slice [" + std::to_string(lo) + "," + std::to_string(hi) + ") of dim " +
                         std::to_string(in_shape[axis]));
    Shape out_shape = in_shape;
    out_shape[axis] = hi - lo;
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= in_shape[d];
    for (std::size_t d = axis + 1; d < in_shape.size(); ++d) inner *= in_shape[d];
    GatherPlanBuilder b(in_shape, out_shape);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t a = lo; a < hi; ++a)
            for (std::size_t i = 0; i < inner; ++i) b.copy_from((o * in_shape[axis] + a) * inner + i);
    return b.take();
}

// Sliding-window extraction of a C x H x W map (optionally ringed by a zero
// margin) into windows laid out (rows*cols, k, k, C).
inline GatherPlan plan_unfold(std::size_t C, std::size_t H, std::size_t W, std::size_t kernel, std::size_t stride,
                              std::size_t zero_margin = 0) {
    if (kernel == 0 || stride == 0) throw GeometryError("unfold kernel and stride must be >= 1");
    const std::size_t Hp = H + 2 * zero_margin, Wp = W + 2 * zero_margin;
    if (Hp < kernel) throw GeometryError("height " + std::to_string(Hp) + " smaller than kernel " + std::to_string(kernel));
    if (Wp < kernel) throw GeometryError("width " + std::to_string(Wp) + " smaller than kernel " + std::to_string(kernel));
    if ((Hp - kernel) % stride != 0)
        throw GeometryError("height " + std::to_string(Hp) + " not tileable by kernel " + std::to_string(kernel) +
                            " stride " + std::to_string(stride));
    if ((Wp - kernel) % stride != 0)
        throw GeometryError("width " + std::to_string(Wp) + " not tileable by kernel " + std::to_string(kernel) +
                            " stride " + std::to_string(stride));
    const std::size_t rows = (Hp - kernel) / stride + 1, cols = (Wp - kernel) / stride + 1;
    GatherPlanBuilder b({C, H, W}, {rows * cols, kernel, kernel, C});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            for (std::size_t u = 0; u < kernel; ++u)
                for (std::size_t v = 0; v < kernel; ++v) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(r * stride + u) - static_cast<std::ptrdiff_t>(zero_margin);
                    const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(c * stride + v) - static_cast<std::ptrdiff_t>(zero_margin);
                    const bool in = ih >= 0 && iw >= 0 && ih < static_cast<std::ptrdiff_t>(H) && iw < static_cast<std::ptrdiff_t>(W);
                    for (std::size_t ch = 0; ch < C; ++ch) {
                        if (in)
                            b.copy_from((ch * H + static_cast<std::size_t>(ih)) * W + static_cast<std::size_t>(iw));
                        else
                            b.zero();
                    }
                }
    return b.take();
}

// Inverse of a non-overlapping unfold (stride == kernel, no margin):
// windows (rows*cols, k, k, C) back to C x H x W.
inline GatherPlan plan_fold(std::size_t C, std::size_t rows, std::size_t cols, std::size_t kernel) {
    const std::size_t H = rows * kernel, W = cols * kernel;
    GatherPlanBuilder b({rows * cols, kernel, kernel, C}, {C, H, W});
    for (std::size_t ch = 0; ch < C; ++ch)
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t w = 0; w < W; ++w) {
                const std::size_t r = h / kernel, u = h % kernel;
                const std::size_t c = w / kernel, v = w % kernel;
                b.copy_from((((r * cols + c) * kernel + u) * kernel + v) * C + ch);
            }
    return b.take();
}

// Bilinear interpolation with half-pixel centers (align_corners = false).
inline GatherPlan plan_bilinear(std::size_t C, std::size_t h, std::size_t w, std::size_t oh, std::size_t ow) {
    if (oh < h || ow < w)
        throw UnsupportedError("bilinear_upsample cannot downsample " + std::to_string(h) + "x" + std::to_string(w) +
                               " to " + std::to_string(oh) + "x" + std::to_string(ow));
    GatherPlanBuilder b({C, h, w}, {C, oh, ow});
    const double sh = static_cast<double>(h) / static_cast<double>(oh);
    const double sw = static_cast<double>(w) / static_cast<double>(ow);
    for (std::size_t ch = 0; ch < C; ++ch)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) {
                const double fy = std::max(0.0, (static_cast<double>(y) + 0.5) * sh - 0.5);
                const double fx = std::max(0.0, (static_cast<double>(x) + 0.5) * sw - 0.5);
                std::size_t y0 = std::min(static_cast<std::size_t>(fy), h - 1);
                std::size_t x0 = std::min(static_cast<std::size_t>(fx), w - 1);
                const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
                double dy = fy - static_cast<double>(y0), dx = fx - static_cast<double>(x0);
                // A clamped axis interpolates between identical samples; drop
                // the degenerate terms so those outputs are exact copies.
                if (y1 == y0) dy = 0.0;
                if (x1 == x0) dx = 0.0;
                const auto src = [&](std::size_t yy, std::size_t xx) { return (ch * h + yy) * w + xx; };
                std::vector<std::pair<std::size_t, double>> terms;
                if ((1 - dy) * (1 - dx) != 0.0) terms.emplace_back(src(y0, x0), (1 - dy) * (1 - dx));
                if ((1 - dy) * dx != 0.0) terms.emplace_back(src(y0, x1), (1 - dy) * dx);
                if (dy * (1 - dx) != 0.0) terms.emplace_back(src(y1, x0), dy * (1 - dx));
                if (dy * dx != 0.0) terms.emplace_back(src(y1, x1), dy * dx);
                b.combine(terms);
            }
    return b.take();
}

// R x R mean over each window of a (n, RP, RP, C) window set, giving (n, P, P, C).
inline GatherPlan plan_window_avgpool(std::size_t n, std::size_t RP, std::size_t C, std::size_t R) {
    if (R == 0 || RP % R != 0) throw GeometryError("avgpool ratio " + std::to_string(R) + " does not divide " + std::to_string(RP));
    const std::size_t P = RP / R;
    GatherPlanBuilder b({n, RP, RP, C}, {n, P, P, C});
    const double wgt = 1.0 / static_cast<double>(R * R);
    std::vector<std::pair<std::size_t, double>> terms;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t y = 0; y < P; ++y)
            for (std::size_t x = 0; x < P; ++x)
                for (std::size_t ch = 0; ch < C; ++ch) {
                    terms.clear();
                    for (std::size_t u = 0; u < R; ++u)
                        for (std::size_t v = 0; v < R; ++v)
                            terms.emplace_back(((i * RP + (y * R + u)) * RP + (x * R + v)) * C + ch, wgt);
                    b.combine(terms);
                }
    return b.take();
}

// ---------------------------------------------------------------------------
// Elementwise and reduction ops
// ---------------------------------------------------------------------------

inline Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.size())
        throw ShapeError("reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
    return Tensor(std::move(shape), x.values());
}

inline Tensor permute(const Tensor& x, const std::vector<std::size_t>& dims) {
    return apply_gather(x, plan_permute(x.shape(), dims));
}

inline Tensor slice(const Tensor& x, std::size_t axis, std::size_t lo, std::size_t hi) {
    return apply_gather(x, plan_slice(x.shape(), axis, lo, hi));
}

inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    const Shape& s0 = parts[0].shape();
    if (axis >= s0.size()) throw IndexError("concat axis " + std::to_string(axis));
    std::size_t axis_total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != s0.size()) throw ShapeError("concat rank mismatch");
        for (std::size_t d = 0; d < s0.size(); ++d)
            if (d != axis && p.shape()[d] != s0[d])
                throw ShapeError("concat dim " + std::to_string(d) + " mismatch: " + shape_str(p.shape()) + " vs " +
                                 shape_str(s0));
        axis_total += p.shape()[axis];
    }
    Shape out_shape = s0;
    out_shape[axis] = axis_total;
    Tensor out(out_shape);
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= s0[d];
    for (std::size_t d = axis + 1; d < s0.size(); ++d) inner *= s0[d];
    std::size_t axis_off = 0;
    for (const Tensor& p : parts) {
        const std::size_t pa = p.shape()[axis];
        for (std::size_t o = 0; o < outer; ++o)
            std::copy(p.data() + o * pa * inner, p.data() + (o + 1) * pa * inner,
                      out.data() + (o * axis_total + axis_off) * inner);
        axis_off += pa;
    }
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("add " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("mul " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

inline Tensor scale(const Tensor& x, double c) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    return out;
}

inline Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
    return Tensor::scalar(acc);
}

// Adds a rank-1 bias along dimension `axis` of x (the only broadcast in the
// library).
inline Tensor add_bias(const Tensor& x, const Tensor& bias, std::size_t axis) {
    if (axis >= x.rank()) throw IndexError("bias axis " + std::to_string(axis));
    if (bias.rank() != 1 || bias.dim(0) != x.dim(axis))
        throw ShapeError("bias " + shape_str(bias.shape()) + " for axis " + std::to_string(axis) + " of " +
                         shape_str(x.shape()));
    Tensor out = x;
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= x.dim(d);
    for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
    const std::size_t n_axis = x.dim(axis);
    double* od = out.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t a = 0; a < n_axis; ++a) {
            const double bv = bias[a];
            double* row = od + (o * n_axis + a) * inner;
            for (std::size_t i = 0; i < inner; ++i) row[i] += bv;
        }
    return out;
}

inline Tensor softmax(const Tensor& x, std::size_t axis) {
    if (axis >= x.rank()) throw IndexError("softmax axis " + std::to_string(axis));
    Tensor out = x;
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= x.dim(d);
    for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
    const std::size_t n = x.dim(axis);
    double* od = out.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
            double* base = od + o * n * inner + i;
            double m = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < n; ++a) m = std::max(m, base[a * inner]);
            double z = 0.0;
            for (std::size_t a = 0; a < n; ++a) {
                const double e = std::exp(base[a * inner] - m);
                base[a * inner] = e;
                z += e;
            }
            for (std::size_t a = 0; a < n; ++a) base[a * inner] /= z;
        }
    return out;
}

// ---------------------------------------------------------------------------
// matmul and conv2d (the two MAC-recording ops)
// ---------------------------------------------------------------------------

// Batched matrix product: a (..., m, k) times b (..., k, n), leading batch
// dimensions equal. Records batch*m*n*k MACs.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() < 2) throw ShapeError("matmul needs rank >= 2");
    if (a.rank() != b.rank()) throw ShapeError("matmul rank mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const std::size_t r = a.rank();
    for (std::size_t d = 0; d + 2 < r; ++d)
        if (a.dim(d) != b.dim(d)) throw ShapeError("matmul batch dim " + std::to_string(d) + " mismatch");
    const std::size_t m = a.dim(r - 2), k = a.dim(r - 1), n = b.dim(r - 1);
    if (b.dim(r - 2) != k)
        throw ShapeError("matmul inner dims: " + shape_str(a.shape()) + " times " + shape_str(b.shape()));
    std::size_t batch = 1;
    for (std::size_t d = 0; d + 2 < r; ++d) batch *= a.dim(d);

    Shape out_shape(a.shape());
    out_shape[r - 1] = n;
    Tensor out(out_shape);
    const double* ad = a.data();
    const double* bd = b.data();
    double* od = out.data();
    for (std::size_t bt = 0; bt < batch; ++bt) {
        const double* A = ad + bt * m * k;
        const double* B = bd + bt * k * n;
        double* O = od + bt * m * n;
        for (std::size_t i = 0; i < m; ++i) {
            double* orow = O + i * n;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double av = A[i * k + kk];
                const double* brow = B + kk * n;
                for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        }
    }
    detail::add_macs(static_cast<std::uint64_t>(batch) * m * n * k);
    return out;
}

// Cross-correlation with square kernel, no implicit padding. Records
// H'*W'*k^2*Cin*Cout MACs; the bias add is excluded from the count.
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride) {
    if (x.rank() != 3) throw ShapeError("conv2d input must be Cin x H x W, got " + shape_str(x.shape()));
    if (w.rank() != 4) throw ShapeError("conv2d weight must be Cout x Cin x k x k, got " + shape_str(w.shape()));
    if (stride == 0) throw GeometryError("conv2d stride must be >= 1");
    const std::size_t Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::size_t Cout = w.dim(0), k = w.dim(2);
    if (w.dim(1) != Cin) throw ShapeError("conv2d weight Cin " + std::to_string(w.dim(1)) + " vs input " + std::to_string(Cin));
    if (w.dim(3) != k) throw ShapeError("conv2d kernel must be square, got " + shape_str(w.shape()));
    if (bias.rank() != 1 || bias.dim(0) != Cout) throw ShapeError("conv2d bias must be (Cout)");
    if (H < k || (H - k) % stride != 0)
        throw GeometryError("conv2d height " + std::to_string(H) + " with kernel " + std::to_string(k) + " stride " +
                            std::to_string(stride));
    if (W < k || (W - k) % stride != 0)
        throw GeometryError("conv2d width " + std::to_string(W) + " with kernel " + std::to_string(k) + " stride " +
                            std::to_string(stride));
    const std::size_t Ho = (H - k) / stride + 1, Wo = (W - k) / stride + 1;

    Tensor out({Cout, Ho, Wo});
    const double* xd = x.data();
    const double* wd = w.data();
    double* od = out.data();
    for (std::size_t co = 0; co < Cout; ++co) {
        double* oplane = od + co * Ho * Wo;
        std::fill(oplane, oplane + Ho * Wo, bias[co]);
        for (std::size_t ci = 0; ci < Cin; ++ci) {
            const double* xplane = xd + ci * H * W;
            const double* wk = wd + (co * Cin + ci) * k * k;
            for (std::size_t u = 0; u < k; ++u)
                for (std::size_t v = 0; v < k; ++v) {
                    const double wv = wk[u * k + v];
                    for (std::size_t oh = 0; oh < Ho; ++oh) {
                        const double* xrow = xplane + (oh * stride + u) * W + v;
                        double* orow = oplane + oh * Wo;
                        for (std::size_t ow = 0; ow < Wo; ++ow) orow[ow] += wv * xrow[ow * stride];
                    }
                }
        }
    }
    detail::add_macs(static_cast<std::uint64_t>(Ho) * Wo * k * k * Cin * Cout);
    return out;
}

inline Tensor bilinear_upsample(const Tensor& x, std::size_t out_h, std::size_t out_w) {
    if (x.rank() != 3) throw ShapeError("bilinear_upsample input must be C x h x w");
    return apply_gather(x, plan_bilinear(x.dim(0), x.dim(1), x.dim(2), out_h, out_w));
}

// ---------------------------------------------------------------------------
// Window sets
// ---------------------------------------------------------------------------

// A batch of windows extracted from a feature map. `windows` is laid out
// (rows*cols, win_h, win_w, channels); the grid exactly tiles the (possibly
// padded) source under `stride`.
template <class T>
struct BasicWindowSet {
    T windows;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t win_h = 0;
    std::size_t win_w = 0;
    std::size_t stride = 0;
    std::size_t channels = 0;

    std::size_t count() const { return rows * cols; }
};

using WindowSet = BasicWindowSet<Tensor>;

inline WindowSet unfold(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t zero_margin = 0) {
    if (x.rank() != 3) throw ShapeError("unfold input must be C x H x W, got " + shape_str(x.shape()));
    GatherPlan p = plan_unfold(x.dim(0), x.dim(1), x.dim(2), kernel, stride, zero_margin);
    WindowSet ws;
    ws.rows = (x.dim(1) + 2 * zero_margin - kernel) / stride + 1;
    ws.cols = (x.dim(2) + 2 * zero_margin - kernel) / stride + 1;
    ws.win_h = ws.win_w = kernel;
    ws.stride = stride;
    ws.channels = x.dim(0);
    ws.windows = apply_gather(x, p);
    return ws;
}

// Reassembles a non-overlapping window set (stride == kernel) into C x H x W.
inline Tensor fold(const WindowSet& ws) {
    if (ws.stride != ws.win_h || ws.win_h != ws.win_w)
        throw GeometryError("fold requires stride == kernel, got stride " + std::to_string(ws.stride));
    return apply_gather(ws.windows, plan_fold(ws.channels, ws.rows, ws.cols, ws.win_h));
}

}  // namespace vwa

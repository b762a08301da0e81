#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "vwa/errors.hpp"
#include "vwa/tensor.hpp"

namespace vwa {

class Tape;

// Handle to a node on a tape. Cheap to copy; exposes the forward value and
// the same shape accessors as Tensor so algorithms can be written once for
// both types.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t rank() const { return value().rank(); }
    std::size_t dim(std::size_t i) const { return value().dim(i); }
    std::size_t size() const { return value().size(); }

    Tape* tape() const { return tape_; }
    std::uint32_t index() const { return index_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::uint32_t index_ = 0;
};

// Gradients of one backward pass, addressable by Var.
class GradientMap {
public:
    GradientMap(const Tape* tape, std::vector<Tensor> grads, std::vector<bool> present)
        : tape_(tape), grads_(std::move(grads)), present_(std::move(present)) {}

    bool contains(const Var& v) const {
        return v.tape() == tape_ && v.index() < present_.size() && present_[v.index()];
    }
    const Tensor& at(const Var& v) const {
        if (!contains(v)) throw ContractError("no gradient recorded for this node");
        return grads_[v.index()];
    }

private:
    const Tape* tape_;
    std::vector<Tensor> grads_;
    std::vector<bool> present_;
};

// Reverse-mode tape. Construction appends nodes in evaluation order, which is
// already a topological order; backward() walks it once in reverse.
class Tape {
public:
    using Pullback = std::function<void(Tape&, const Tensor& grad_out)>;

    Var leaf(Tensor value) {
        nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
        return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
    }

    Var record(Tensor value, std::vector<std::uint32_t> parents, Pullback pb) {
        if (!pb) throw UnsupportedError("recorded op without pullback");
        nodes_.push_back(Node{std::move(value), {}, false, std::move(parents), std::move(pb)});
        return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
    }

    const Tensor& value(std::uint32_t i) const { return nodes_.at(i).value; }
    std::size_t size() const { return nodes_.size(); }

    void accumulate(std::uint32_t i, const Tensor& g) {
        Node& n = nodes_.at(i);
        if (!g.same_shape(n.value))
            throw ContractError("gradient shape " + shape_str(g.shape()) + " vs value " + shape_str(n.value.shape()));
        if (!n.has_grad) {
            n.grad = g;
            n.has_grad = true;
        } else {
            for (std::size_t j = 0; j < g.size(); ++j) n.grad[j] += g[j];
        }
    }

    // Gradient of a scalar-shaped root w.r.t. every node that feeds it.
    GradientMap backward(const Var& root) {
        if (root.tape() != this) throw ContractError("backward root belongs to a different tape");
        if (root.value().shape() != Shape{1})
            throw ContractError("backward root must have shape (1,), got " + shape_str(root.value().shape()));

        std::vector<bool> reachable(nodes_.size(), false);
        std::vector<std::uint32_t> stack{root.index()};
        reachable[root.index()] = true;
        while (!stack.empty()) {
            const std::uint32_t i = stack.back();
            stack.pop_back();
            for (std::uint32_t p : nodes_[i].parents)
                if (!reachable[p]) {
                    reachable[p] = true;
                    stack.push_back(p);
                }
        }

        for (Node& n : nodes_) {
            n.grad = Tensor();
            n.has_grad = false;
        }
        accumulate(root.index(), Tensor::scalar(1.0));

        for (std::uint32_t i = root.index() + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!reachable[i] || !n.has_grad || !n.pullback) continue;
            n.pullback(*this, n.grad);
        }

        std::vector<Tensor> grads(nodes_.size());
        std::vector<bool> present(nodes_.size(), false);
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].has_grad) {
                grads[i] = std::move(nodes_[i].grad);
                present[i] = true;
                nodes_[i].has_grad = false;
                nodes_[i].grad = Tensor();
            }
        return GradientMap(this, std::move(grads), std::move(present));
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        std::vector<std::uint32_t> parents;
        Pullback pullback;  // null for leaves
    };
    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const {
    if (!tape_) throw ContractError("value() on an empty Var");
    return tape_->value(index_);
}

namespace detail {
inline Tape* same_tape(const Var& a, const Var& b) {
    if (a.tape() != b.tape()) throw ContractError("operands belong to different tapes");
    return a.tape();
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Recorded ops, mirroring the core tensor API
// ---------------------------------------------------------------------------

inline Var apply_gather(const Var& x, std::shared_ptr<const GatherPlan> plan) {
    Tensor out = apply_gather(x.value(), *plan);
    const std::uint32_t xi = x.index();
    return x.tape()->record(std::move(out), {xi}, [xi, plan](Tape& t, const Tensor& g) {
        t.accumulate(xi, apply_gather_adjoint(g, *plan));
    });
}

// Shared entry point for template code: applies a freshly built plan to either
// a Tensor or a Var.
inline Tensor apply_plan(const Tensor& x, GatherPlan plan) { return apply_gather(x, plan); }
inline Var apply_plan(const Var& x, GatherPlan plan) {
    return apply_gather(x, std::make_shared<const GatherPlan>(std::move(plan)));
}

inline Var reshape(const Var& x, Shape shape) {
    Tensor out = reshape(x.value(), shape);
    const std::uint32_t xi = x.index();
    const Shape in_shape = x.shape();
    return x.tape()->record(std::move(out), {xi}, [xi, in_shape](Tape& t, const Tensor& g) {
        t.accumulate(xi, reshape(g, in_shape));
    });
}

inline Var permute(const Var& x, const std::vector<std::size_t>& dims) {
    return apply_plan(x, plan_permute(x.shape(), dims));
}

inline Var slice(const Var& x, std::size_t axis, std::size_t lo, std::size_t hi) {
    return apply_plan(x, plan_slice(x.shape(), axis, lo, hi));
}

inline Var bilinear_upsample(const Var& x, std::size_t oh, std::size_t ow) {
    if (x.rank() != 3) throw ShapeError("bilinear_upsample input must be C x h x w");
    return apply_plan(x, plan_bilinear(x.dim(0), x.dim(1), x.dim(2), oh, ow));
}

inline Var concat(const std::vector<Var>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    Tape* tape = parts[0].tape();
    std::vector<Tensor> vals;
    std::vector<std::uint32_t> idx;
    for (const Var& p : parts) {
        detail::same_tape(parts[0], p);
        vals.push_back(p.value());
        idx.push_back(p.index());
    }
    Tensor out = concat(vals, axis);
    std::vector<std::size_t> widths;
    for (const Tensor& v : vals) widths.push_back(v.shape()[axis]);
    return tape->record(std::move(out), idx, [idx, widths, axis](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < idx.size(); ++p) {
            t.accumulate(idx[p], slice(g, axis, off, off + widths[p]));
            off += widths[p];
        }
    });
}

inline Var add(const Var& a, const Var& b) {
    Tape* tape = detail::same_tape(a, b);
    Tensor out = add(a.value(), b.value());
    const std::uint32_t ai = a.index(), bi = b.index();
    return tape->record(std::move(out), {ai, bi}, [ai, bi](Tape& t, const Tensor& g) {
        t.accumulate(ai, g);
        t.accumulate(bi, g);
    });
}

inline Var mul(const Var& a, const Var& b) {
    Tape* tape = detail::same_tape(a, b);
    Tensor out = mul(a.value(), b.value());
    const std::uint32_t ai = a.index(), bi = b.index();
    const Tensor av = a.value(), bv = b.value();
    return tape->record(std::move(out), {ai, bi}, [ai, bi, av, bv](Tape& t, const Tensor& g) {
        t.accumulate(ai, mul(g, bv));
        t.accumulate(bi, mul(g, av));
    });
}

inline Var scale(const Var& x, double c) {
    Tensor out = scale(x.value(), c);
    const std::uint32_t xi = x.index();
    return x.tape()->record(std::move(out), {xi}, [xi, c](Tape& t, const Tensor& g) {
        t.accumulate(xi, scale(g, c));
    });
}

inline Var sum(const Var& x) {
    Tensor out = sum(x.value());
    const std::uint32_t xi = x.index();
    const Shape in_shape = x.shape();
    return x.tape()->record(std::move(out), {xi}, [xi, in_shape](Tape& t, const Tensor& g) {
        t.accumulate(xi, Tensor::full(in_shape, g[0]));
    });
}

inline Var add_bias(const Var& x, const Var& bias, std::size_t axis) {
    Tape* tape = detail::same_tape(x, bias);
    Tensor out = add_bias(x.value(), bias.value(), axis);
    const std::uint32_t xi = x.index(), bi = bias.index();
    const Shape xs = x.shape();
    return tape->record(std::move(out), {xi, bi}, [xi, bi, xs, axis](Tape& t, const Tensor& g) {
        t.accumulate(xi, g);
        std::size_t outer = 1, inner = 1;
        for (std::size_t d = 0; d < axis; ++d) outer *= xs[d];
        for (std::size_t d = axis + 1; d < xs.size(); ++d) inner *= xs[d];
        const std::size_t n = xs[axis];
        Tensor gb({n});
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t a = 0; a < n; ++a) {
                const double* row = g.data() + (o * n + a) * inner;
                double acc = 0.0;
                for (std::size_t i = 0; i < inner; ++i) acc += row[i];
                gb[a] += acc;
            }
        t.accumulate(bi, gb);
    });
}

inline Var softmax(const Var& x, std::size_t axis) {
    Tensor y = softmax(x.value(), axis);
    const std::uint32_t xi = x.index();
    const Tensor yv = y;
    const Shape xs = x.shape();
    return x.tape()->record(std::move(y), {xi}, [xi, yv, xs, axis](Tape& t, const Tensor& g) {
        std::size_t outer = 1, inner = 1;
        for (std::size_t d = 0; d < axis; ++d) outer *= xs[d];
        for (std::size_t d = axis + 1; d < xs.size(); ++d) inner *= xs[d];
        const std::size_t n = xs[axis];
        Tensor gx(xs);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t base = o * n * inner + i;
                double dot = 0.0;
                for (std::size_t a = 0; a < n; ++a) dot += g[base + a * inner] * yv[base + a * inner];
                for (std::size_t a = 0; a < n; ++a)
                    gx[base + a * inner] = yv[base + a * inner] * (g[base + a * inner] - dot);
            }
        t.accumulate(xi, gx);
    });
}

inline Var matmul(const Var& a, const Var& b) {
    Tape* tape = detail::same_tape(a, b);
    Tensor out = matmul(a.value(), b.value());
    const std::uint32_t ai = a.index(), bi = b.index();
    const Tensor av = a.value(), bv = b.value();
    return tape->record(std::move(out), {ai, bi}, [ai, bi, av, bv](Tape& t, const Tensor& g) {
        const std::size_t r = av.rank();
        const std::size_t m = av.dim(r - 2), k = av.dim(r - 1), n = bv.dim(r - 1);
        std::size_t batch = 1;
        for (std::size_t d = 0; d + 2 < r; ++d) batch *= av.dim(d);
        Tensor ga(av.shape()), gb(bv.shape());
        for (std::size_t bt = 0; bt < batch; ++bt) {
            const double* A = av.data() + bt * m * k;
            const double* B = bv.data() + bt * k * n;
            const double* G = g.data() + bt * m * n;
            double* GA = ga.data() + bt * m * k;
            double* GB = gb.data() + bt * k * n;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double* grow = G + i * n;
                    const double* brow = B + kk * n;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    GA[i * k + kk] = acc;
                }
            for (std::size_t kk = 0; kk < k; ++kk)
                for (std::size_t i = 0; i < m; ++i) {
                    const double aval = A[i * k + kk];
                    const double* grow = G + i * n;
                    double* gbrow = GB + kk * n;
                    for (std::size_t j = 0; j < n; ++j) gbrow[j] += aval * grow[j];
                }
        }
        t.accumulate(ai, ga);
        t.accumulate(bi, gb);
    });
}

inline Var conv2d(const Var& x, const Var& w, const Var& bias, std::size_t stride) {
    Tape* tape = detail::same_tape(x, w);
    detail::same_tape(x, bias);
    Tensor out = conv2d(x.value(), w.value(), bias.value(), stride);
    const std::uint32_t xi = x.index(), wi = w.index(), bi = bias.index();
    const Tensor xv = x.value(), wv = w.value();
    return tape->record(std::move(out), {xi, wi, bi}, [=](Tape& t, const Tensor& g) {
        const std::size_t Cin = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
        const std::size_t Cout = wv.dim(0), k = wv.dim(2);
        const std::size_t Ho = g.dim(1), Wo = g.dim(2);
        Tensor gx(xv.shape()), gw(wv.shape()), gb({Cout});
        for (std::size_t co = 0; co < Cout; ++co) {
            const double* gplane = g.data() + co * Ho * Wo;
            double acc = 0.0;
            for (std::size_t i = 0; i < Ho * Wo; ++i) acc += gplane[i];
            gb[co] = acc;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
                const double* xplane = xv.data() + ci * H * W;
                double* gxplane = gx.data() + ci * H * W;
                const double* wk = wv.data() + (co * Cin + ci) * k * k;
                double* gwk = gw.data() + (co * Cin + ci) * k * k;
                for (std::size_t u = 0; u < k; ++u)
                    for (std::size_t v = 0; v < k; ++v) {
                        const double wval = wk[u * k + v];
                        double wacc = 0.0;
                        for (std::size_t oh = 0; oh < Ho; ++oh) {
                            const double* grow = gplane + oh * Wo;
                            const std::size_t ih = oh * stride + u;
                            for (std::size_t ow = 0; ow < Wo; ++ow) {
                                const std::size_t iw = ow * stride + v;
                                gxplane[ih * W + iw] += wval * grow[ow];
                                wacc += xplane[ih * W + iw] * grow[ow];
                            }
                        }
                        gwk[u * k + v] += wacc;
                    }
            }
        }
        t.accumulate(xi, gx);
        t.accumulate(wi, gw);
        t.accumulate(bi, gb);
    });
}

inline BasicWindowSet<Var> unfold(const Var& x, std::size_t kernel, std::size_t stride, std::size_t zero_margin = 0) {
    if (x.rank() != 3) throw ShapeError("unfold input must be C x H x W");
    GatherPlan p = plan_unfold(x.dim(0), x.dim(1), x.dim(2), kernel, stride, zero_margin);
    BasicWindowSet<Var> ws;
    ws.rows = (x.dim(1) + 2 * zero_margin - kernel) / stride + 1;
    ws.cols = (x.dim(2) + 2 * zero_margin - kernel) / stride + 1;
    ws.win_h = ws.win_w = kernel;
    ws.stride = stride;
    ws.channels = x.dim(0);
    ws.windows = apply_plan(x, std::move(p));
    return ws;
}

inline Var fold(const BasicWindowSet<Var>& ws) {
    if (ws.stride != ws.win_h || ws.win_h != ws.win_w)
        throw GeometryError("fold requires stride == kernel");
    return apply_plan(ws.windows, plan_fold(ws.channels, ws.rows, ws.cols, ws.win_h));
}

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

// Central differences (f(x+eps*e_i) - f(x-eps*e_i)) / 2eps per coordinate.
inline Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps) {
    if (eps <= 0) throw ContractError("finite_diff eps must be positive");
    Tensor g(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double hi = f(probe);
        probe[i] = orig - eps;
        const double lo = f(probe);
        probe[i] = orig;
        g[i] = (hi - lo) / (2.0 * eps);
    }
    return g;
}

// Relative-error metric used by every gradient check: |a-b| / max(1, |a|, |b|).
inline double gradcheck_rel_error(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("gradcheck shapes differ");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace vwa

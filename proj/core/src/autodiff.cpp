#include "semdepth/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace semdepth {

void Node::accumulate(const Tensor& g) {
    if (!g.same_shape(val))
        throw std::runtime_error(std::string("gradient shape mismatch on op ") + op + ": " +
                                 g.shape_str() + " vs " + val.shape_str());
    if (grad.empty())
        grad = g;
    else
        grad.add_(g);
}

Var make_param(Tensor value) {
    auto n = std::make_shared<Node>();
    n->val = std::move(value);
    n->requires_grad = true;
    n->op = "param";
    return n;
}

Var make_const(Tensor value) {
    auto n = std::make_shared<Node>();
    n->val = std::move(value);
    n->requires_grad = false;
    n->op = "const";
    return n;
}

Var detach(const Var& v) { return make_const(v->val); }

void backward(const Var& root) {
    // Reverse post-order DFS: every node is processed before its parents.
    std::vector<Node*> order;
    std::vector<std::pair<Node*, size_t>> stack;
    std::unordered_set<Node*> visited;
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->accumulate(Tensor::full(root->val.shape(), 1.0));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->has_grad()) n->backward_fn(n->grad);
    }
}

namespace ops {
namespace {

Var make_node(Tensor val, std::vector<Var> parents, const char* op) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->parents = std::move(parents);
    n->op = op;
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->val.same_shape(b->val))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a->val.shape_str() +
                                    " vs " + b->val.shape_str());
}

// Elementwise binary op helper: f(a,b) with partials fa, fb evaluated per element.
template <typename F, typename Fa, typename Fb>
Var binary_op(const Var& a, const Var& b, const char* name, F f, Fa fa, Fb fb) {
    check_same_shape(a, b, name);
    Tensor out(a->val.shape());
    const std::int64_t n = out.size();
    for (std::int64_t i = 0; i < n; ++i) out[i] = f(a->val[i], b->val[i]);
    Var node = make_node(std::move(out), {a, b}, name);
    if (node->requires_grad) {
        Var pa = a, pb = b;
        node->backward_fn = [pa, pb, fa, fb](const Tensor& g) {
            const std::int64_t m = g.size();
            if (pa->requires_grad) {
                Tensor ga(pa->val.shape());
                for (std::int64_t i = 0; i < m; ++i) ga[i] = g[i] * fa(pa->val[i], pb->val[i]);
                pa->accumulate(ga);
            }
            if (pb->requires_grad) {
                Tensor gb(pb->val.shape());
                for (std::int64_t i = 0; i < m; ++i) gb[i] = g[i] * fb(pa->val[i], pb->val[i]);
                pb->accumulate(gb);
            }
        };
    }
    return node;
}

template <typename F, typename Fg>
Var unary_op(const Var& x, const char* name, F f, Fg fg) {
    Tensor out(x->val.shape());
    const std::int64_t n = out.size();
    for (std::int64_t i = 0; i < n; ++i) out[i] = f(x->val[i]);
    Var node = make_node(std::move(out), {x}, name);
    if (node->requires_grad) {
        Var px = x;
        node->backward_fn = [px, fg](const Tensor& g) {
            Tensor gx(px->val.shape());
            for (std::int64_t i = 0; i < g.size(); ++i) gx[i] = g[i] * fg(px->val[i]);
            px->accumulate(gx);
        };
    }
    return node;
}

}  // namespace

Var add(const Var& a, const Var& b) {
    return binary_op(a, b, "add", [](double x, double y) { return x + y; },
                     [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
    return binary_op(a, b, "sub", [](double x, double y) { return x - y; },
                     [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
    return binary_op(a, b, "mul", [](double x, double y) { return x * y; },
                     [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var div(const Var& a, const Var& b) {
    return binary_op(a, b, "div", [](double x, double y) { return x / y; },
                     [](double, double y) { return 1.0 / y; },
                     [](double x, double y) { return -x / (y * y); });
}

Var minimum(const Var& a, const Var& b) {
    return binary_op(a, b, "minimum", [](double x, double y) { return x <= y ? x : y; },
                     [](double x, double y) { return x <= y ? 1.0 : 0.0; },
                     [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Var neg(const Var& x) {
    return unary_op(x, "neg", [](double v) { return -v; }, [](double) { return -1.0; });
}

Var abs(const Var& x) {
    return unary_op(x, "abs", [](double v) { return std::abs(v); },
                    [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Var square(const Var& x) {
    return unary_op(x, "square", [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var exp(const Var& x) {
    return unary_op(x, "exp", [](double v) { return std::exp(v); },
                    [](double v) { return std::exp(v); });
}

Var log(const Var& x) {
    return unary_op(x, "log", [](double v) { return std::log(v); },
                    [](double v) { return 1.0 / v; });
}

Var sigmoid(const Var& x) {
    return unary_op(x, "sigmoid", [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                    [](double v) {
                        const double s = 1.0 / (1.0 + std::exp(-v));
                        return s * (1.0 - s);
                    });
}

Var relu(const Var& x) {
    return unary_op(x, "relu", [](double v) { return v > 0 ? v : 0.0; },
                    [](double v) { return v > 0 ? 1.0 : 0.0; });
}

Var elu(const Var& x) {
    return unary_op(x, "elu", [](double v) { return v > 0 ? v : std::expm1(v); },
                    [](double v) { return v > 0 ? 1.0 : std::exp(v); });
}

Var softplus(const Var& x) {
    return unary_op(x, "softplus",
                    [](double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
                    [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Var clamp(const Var& x, double lo, double hi) {
    return unary_op(x, "clamp",
                    [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
                    [lo, hi](double v) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Var add_scalar(const Var& x, double c) {
    return unary_op(x, "add_scalar", [c](double v) { return v + c; }, [](double) { return 1.0; });
}

Var mul_scalar(const Var& x, double c) {
    return unary_op(x, "mul_scalar", [c](double v) { return v * c; }, [c](double) { return c; });
}

Var add_const(const Var& x, const Tensor& c) {
    if (!x->val.same_shape(c)) throw std::invalid_argument("add_const: shape mismatch");
    Tensor out = x->val;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] += c[i];
    Var node = make_node(std::move(out), {x}, "add_const");
    if (node->requires_grad) {
        Var px = x;
        node->backward_fn = [px](const Tensor& g) { px->accumulate(g); };
    }
    return node;
}

Var mul_const(const Var& x, const Tensor& c) {
    if (!x->val.same_shape(c)) throw std::invalid_argument("mul_const: shape mismatch");
    Tensor out = x->val;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= c[i];
    Var node = make_node(std::move(out), {x}, "mul_const");
    if (node->requires_grad) {
        Var px = x;
        Tensor cc = c;
        node->backward_fn = [px, cc](const Tensor& g) {
            Tensor gx(px->val.shape());
            for (std::int64_t i = 0; i < g.size(); ++i) gx[i] = g[i] * cc[i];
            px->accumulate(gx);
        };
    }
    return node;
}

Var div_by_scalar(const Var& x, const Var& s) {
    if (s->val.size() != 1) throw std::invalid_argument("div_by_scalar: divisor must be scalar");
    const double sv = s->val[0];
    Tensor out = x->val;
    out.scale_(1.0 / sv);
    Var node = make_node(std::move(out), {x, s}, "div_by_scalar");
    if (node->requires_grad) {
        Var px = x, ps = s;
        node->backward_fn = [px, ps, sv](const Tensor& g) {
            if (px->requires_grad) {
                Tensor gx = g;
                gx.scale_(1.0 / sv);
                px->accumulate(gx);
            }
            if (ps->requires_grad) {
                double acc = 0.0;
                for (std::int64_t i = 0; i < g.size(); ++i) acc += g[i] * px->val[i];
                ps->accumulate(Tensor::scalar(-acc / (sv * sv)));
            }
        };
    }
    return node;
}

Var div_bcast_nc(const Var& x, const Var& s) {
    const Shape& xs = x->val.shape();
    const Shape& ss = s->val.shape();
    if (xs.size() != 4 || ss.size() != 2 || ss[0] != xs[0] || ss[1] != xs[1])
        throw std::invalid_argument("div_bcast_nc: expected (N,C,H,W) and matching (N,C)");
    const int nc = xs[0] * xs[1];
    const std::int64_t plane = static_cast<std::int64_t>(xs[2]) * xs[3];
    Tensor out(xs);
    for (int i = 0; i < nc; ++i) {
        const double inv = 1.0 / s->val[i];
        const double* src = x->val.data() + static_cast<std::int64_t>(i) * plane;
        double* dst = out.data() + static_cast<std::int64_t>(i) * plane;
        for (std::int64_t p = 0; p < plane; ++p) dst[p] = src[p] * inv;
    }
    Var node = make_node(std::move(out), {x, s}, "div_bcast_nc");
    if (node->requires_grad) {
        Var px = x, ps = s;
        node->backward_fn = [px, ps, nc, plane](const Tensor& g) {
            if (px->requires_grad) {
                Tensor gx(px->val.shape());
                for (int i = 0; i < nc; ++i) {
                    const double inv = 1.0 / ps->val[i];
                    const double* gs = g.data() + static_cast<std::int64_t>(i) * plane;
                    double* gd = gx.data() + static_cast<std::int64_t>(i) * plane;
                    for (std::int64_t p = 0; p < plane; ++p) gd[p] = gs[p] * inv;
                }
                px->accumulate(gx);
            }
            if (ps->requires_grad) {
                Tensor gsc(ps->val.shape());
                for (int i = 0; i < nc; ++i) {
                    const double sv = ps->val[i];
                    const double* gs = g.data() + static_cast<std::int64_t>(i) * plane;
                    const double* xs_ = px->val.data() + static_cast<std::int64_t>(i) * plane;
                    double acc = 0.0;
                    for (std::int64_t p = 0; p < plane; ++p) acc += gs[p] * xs_[p];
                    gsc[i] = -acc / (sv * sv);
                }
                ps->accumulate(gsc);
            }
        };
    }
    return node;
}

Var sum_all(const Var& x) {
    Var node = make_node(Tensor::scalar(x->val.sum()), {x}, "sum_all");
    if (node->requires_grad) {
        Var px = x;
        node->backward_fn = [px](const Tensor& g) {
            px->accumulate(Tensor::full(px->val.shape(), g[0]));
        };
    }
    return node;
}

Var mean_all(const Var& x) {
    const double n = static_cast<double>(x->val.size());
    Var node = make_node(Tensor::scalar(x->val.sum() / n), {x}, "mean_all");
    if (node->requires_grad) {
        Var px = x;
        node->backward_fn = [px, n](const Tensor& g) {
            px->accumulate(Tensor::full(px->val.shape(), g[0] / n));
        };
    }
    return node;
}

Var concat_channels(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: empty input");
    const Shape& s0 = xs[0]->val.shape();
    if (s0.size() != 4) throw std::invalid_argument("concat_channels: rank-4 input required");
    int total_c = 0;
    for (const auto& x : xs) {
        const Shape& s = x->val.shape();
        if (s.size() != 4 || s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3])
            throw std::invalid_argument("concat_channels: incompatible shapes");
        total_c += s[1];
    }
    const int n = s0[0], h = s0[2], w = s0[3];
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    Tensor out({n, total_c, h, w});
    std::vector<int> offsets;
    int off = 0;
    for (const auto& x : xs) {
        offsets.push_back(off);
        const int c = x->val.dim(1);
        for (int ni = 0; ni < n; ++ni) {
            const double* src = x->val.data() + static_cast<std::int64_t>(ni) * c * plane;
            double* dst = out.data() + (static_cast<std::int64_t>(ni) * total_c + off) * plane;
            std::copy(src, src + static_cast<std::int64_t>(c) * plane, dst);
        }
        off += c;
    }
    Var node = make_node(std::move(out), xs, "concat_channels");
    if (node->requires_grad) {
        std::vector<Var> ps = xs;
        node->backward_fn = [ps, offsets, n, total_c, plane](const Tensor& g) {
            for (size_t k = 0; k < ps.size(); ++k) {
                if (!ps[k]->requires_grad) continue;
                const int c = ps[k]->val.dim(1);
                Tensor gx(ps[k]->val.shape());
                for (int ni = 0; ni < n; ++ni) {
                    const double* src = g.data() + (static_cast<std::int64_t>(ni) * total_c + offsets[k]) * plane;
                    double* dst = gx.data() + static_cast<std::int64_t>(ni) * c * plane;
                    std::copy(src, src + static_cast<std::int64_t>(c) * plane, dst);
                }
                ps[k]->accumulate(gx);
            }
        };
    }
    return node;
}

Var mean_channels(const Var& x) {
    const Shape& s = x->val.shape();
    if (s.size() != 4) throw std::invalid_argument("mean_channels: rank-4 input required");
    const int n = s[0], c = s[1], h = s[2], w = s[3];
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    Tensor out({n, 1, h, w});
    for (int ni = 0; ni < n; ++ni)
        for (std::int64_t p = 0; p < plane; ++p) {
            double acc = 0.0;
            for (int ci = 0; ci < c; ++ci) acc += x->val.data()[(static_cast<std::int64_t>(ni) * c + ci) * plane + p];
            out.data()[ni * plane + p] = acc / c;
        }
    Var node = make_node(std::move(out), {x}, "mean_channels");
    if (node->requires_grad) {
        Var px = x;
        node->backward_fn = [px, n, c, plane](const Tensor& g) {
            Tensor gx(px->val.shape());
            for (int ni = 0; ni < n; ++ni)
                for (std::int64_t p = 0; p < plane; ++p) {
                    const double gv = g.data()[ni * plane + p] / c;
                    for (int ci = 0; ci < c; ++ci)
                        gx.data()[(static_cast<std::int64_t>(ni) * c + ci) * plane + p] = gv;
                }
            px->accumulate(gx);
        };
    }
    return node;
}

Var mean_hw(const Var& x) {
    const Shape& s = x->val.shape();
    if (s.size() != 4) throw std::invalid_argument("mean_hw: rank-4 input required");
    const int n = s[0], c = s[1];
    const std::int64_t plane = static_cast<std::int64_t>(s[2]) * s[3];
    Tensor out({n, c});
    for (int i = 0; i < n * c; ++i) {
        const double* src = x->val.data() + static_cast<std::int64_t>(i) * plane;
        double acc = 0.0;
        for (std::int64_t p = 0; p < plane; ++p) acc += src[p];
        out[i] = acc / static_cast<double>(plane);
    }
    Var node = make_node(std::move(out), {x}, "mean_hw");
    if (node->requires_grad) {
        Var px = x;
        node->backward_fn = [px, n, c, plane](const Tensor& g) {
            Tensor gx(px->val.shape());
            for (int i = 0; i < n * c; ++i) {
                const double gv = g[i] / static_cast<double>(plane);
                double* dst = gx.data() + static_cast<std::int64_t>(i) * plane;
                for (std::int64_t p = 0; p < plane; ++p) dst[p] = gv;
            }
            px->accumulate(gx);
        };
    }
    return node;
}

Var affine_channels(const Var& x, const std::vector<double>& scale) {
    const Shape& s = x->val.shape();
    if (s.size() != 2 || s[1] != static_cast<int>(scale.size()))
        throw std::invalid_argument("affine_channels: expected (N,C) with matching scale size");
    const int n = s[0], c = s[1];
    Tensor out(s);
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) out[ni * c + ci] = x->val[ni * c + ci] * scale[ci];
    Var node = make_node(std::move(out), {x}, "affine_channels");
    if (node->requires_grad) {
        Var px = x;
        std::vector<double> sc = scale;
        node->backward_fn = [px, sc, n, c](const Tensor& g) {
            Tensor gx(px->val.shape());
            for (int ni = 0; ni < n; ++ni)
                for (int ci = 0; ci < c; ++ci) gx[ni * c + ci] = g[ni * c + ci] * sc[ci];
            px->accumulate(gx);
        };
    }
    return node;
}

namespace {

// Shared forward-difference implementation along the last (axis=0) or
// second-to-last (axis=1) dimension of a rank>=2 tensor.
Var diff_impl(const Var& x, int axis, const char* name) {
    const Shape& s = x->val.shape();
    if (s.size() < 2) throw std::invalid_argument("diff: rank-2+ input required");
    const int h = s[s.size() - 2], w = s[s.size() - 1];
    std::int64_t outer = 1;
    for (size_t i = 0; i + 2 < s.size(); ++i) outer *= s[i];
    Shape os = s;
    if (axis == 0)
        os[s.size() - 1] = w - 1;
    else
        os[s.size() - 2] = h - 1;
    const int oh = os[os.size() - 2], ow = os[os.size() - 1];
    Tensor out(os);
    for (std::int64_t o = 0; o < outer; ++o) {
        const double* src = x->val.data() + o * h * w;
        double* dst = out.data() + o * static_cast<std::int64_t>(oh) * ow;
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx)
                dst[y * ow + xx] = (axis == 0) ? src[y * w + xx + 1] - src[y * w + xx]
                                               : src[(y + 1) * w + xx] - src[y * w + xx];
    }
    Var node = make_node(std::move(out), {x}, name);
    if (node->requires_grad) {
        Var px = x;
        node->backward_fn = [px, axis, outer, h, w, oh, ow](const Tensor& g) {
            Tensor gx(px->val.shape());
            for (std::int64_t o = 0; o < outer; ++o) {
                const double* gs = g.data() + o * static_cast<std::int64_t>(oh) * ow;
                double* gd = gx.data() + o * h * w;
                for (int y = 0; y < oh; ++y)
                    for (int xx = 0; xx < ow; ++xx) {
                        const double gv = gs[y * ow + xx];
                        if (axis == 0) {
                            gd[y * w + xx + 1] += gv;
                            gd[y * w + xx] -= gv;
                        } else {
                            gd[(y + 1) * w + xx] += gv;
                            gd[y * w + xx] -= gv;
                        }
                    }
            }
            px->accumulate(gx);
        };
    }
    return node;
}

}  // namespace

Var diff_x(const Var& x) { return diff_impl(x, 0, "diff_x"); }
Var diff_y(const Var& x) { return diff_impl(x, 1, "diff_y"); }

Var gather_hw(const Var& x, const std::vector<PixelIndex>& idx) {
    const Shape& s = x->val.shape();
    if (s.size() != 4 || s[1] != 1) throw std::invalid_argument("gather_hw: (N,1,H,W) input required");
    const int h = s[2], w = s[3];
    Tensor out({static_cast<int>(idx.size())});
    for (size_t i = 0; i < idx.size(); ++i) {
        const auto& p = idx[i];
        if (p.n < 0 || p.n >= s[0] || p.y < 0 || p.y >= h || p.x < 0 || p.x >= w)
            throw std::out_of_range("gather_hw: index out of bounds");
        out[static_cast<std::int64_t>(i)] = x->val.at(p.n, 0, p.y, p.x);
    }
    Var node = make_node(std::move(out), {x}, "gather_hw");
    if (node->requires_grad) {
        Var px = x;
        std::vector<PixelIndex> ids = idx;
        node->backward_fn = [px, ids](const Tensor& g) {
            Tensor gx(px->val.shape());
            for (size_t i = 0; i < ids.size(); ++i)
                gx.at(ids[i].n, 0, ids[i].y, ids[i].x) += g[static_cast<std::int64_t>(i)];
            px->accumulate(gx);
        };
    }
    return node;
}

}  // namespace ops
}  // namespace semdepth

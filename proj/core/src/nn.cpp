#include "semdepth/nn.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace semdepth {
namespace ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

Var make_node(Tensor val, std::vector<Var> parents, const char* op) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->parents = std::move(parents);
    n->op = op;
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    return n;
}

inline int reflect_index(int i, int n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return i;
}

// Column buffer layout: (Cin*k*k) x (Ho*Wo), row-major.
void im2col(const double* x, int cin, int h, int w, int k, int stride, int pad, PadMode mode,
            int ho, int wo, double* col) {
    const std::int64_t p_total = static_cast<std::int64_t>(ho) * wo;
    for (int ci = 0; ci < cin; ++ci) {
        const double* plane = x + static_cast<std::int64_t>(ci) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* dst = col + ((static_cast<std::int64_t>(ci) * k + ky) * k + kx) * p_total;
                for (int oy = 0; oy < ho; ++oy) {
                    int iy = oy * stride + ky - pad;
                    bool row_valid = true;
                    if (iy < 0 || iy >= h) {
                        if (mode == PadMode::Reflect)
                            iy = reflect_index(iy, h);
                        else
                            row_valid = false;
                    }
                    double* drow = dst + static_cast<std::int64_t>(oy) * wo;
                    if (!row_valid) {
                        std::fill(drow, drow + wo, 0.0);
                        continue;
                    }
                    const double* srow = plane + static_cast<std::int64_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= w) {
                            if (mode == PadMode::Reflect)
                                drow[ox] = srow[reflect_index(ix, w)];
                            else
                                drow[ox] = 0.0;
                        } else {
                            drow[ox] = srow[ix];
                        }
                    }
                }
            }
        }
    }
}

// Scatter-add of a column buffer back into an image, the adjoint of im2col.
void col2im_add(const double* col, int cin, int h, int w, int k, int stride, int pad, PadMode mode,
                int ho, int wo, double* x) {
    const std::int64_t p_total = static_cast<std::int64_t>(ho) * wo;
    for (int ci = 0; ci < cin; ++ci) {
        double* plane = x + static_cast<std::int64_t>(ci) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* src = col + ((static_cast<std::int64_t>(ci) * k + ky) * k + kx) * p_total;
                for (int oy = 0; oy < ho; ++oy) {
                    int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) {
                        if (mode == PadMode::Reflect)
                            iy = reflect_index(iy, h);
                        else
                            continue;
                    }
                    double* drow = plane + static_cast<std::int64_t>(iy) * w;
                    const double* srow = src + static_cast<std::int64_t>(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= w) {
                            if (mode == PadMode::Reflect)
                                drow[reflect_index(ix, w)] += srow[ox];
                            else
                                continue;
                        } else {
                            drow[ix] += srow[ox];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad, PadMode mode) {
    const Shape& xs = x->val.shape();
    const Shape& ws = weight->val.shape();
    if (xs.size() != 4 || ws.size() != 4) throw std::invalid_argument("conv2d: rank-4 tensors required");
    if (xs[1] != ws[1])
        throw std::invalid_argument("conv2d: input channels " + std::to_string(xs[1]) +
                                    " do not match weight " + std::to_string(ws[1]));
    const int n = xs[0], cin = xs[1], h = xs[2], w = xs[3];
    const int cout = ws[0], k = ws[2];
    if (ws[3] != k) throw std::invalid_argument("conv2d: non-square kernel");
    if (mode == PadMode::Reflect && (pad >= h || pad >= w))
        throw std::invalid_argument("conv2d: reflect pad larger than input");
    const int ho = (h + 2 * pad - k) / stride + 1;
    const int wo = (w + 2 * pad - k) / stride + 1;
    if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv2d: empty output");
    const std::int64_t kk = static_cast<std::int64_t>(cin) * k * k;
    const std::int64_t p_total = static_cast<std::int64_t>(ho) * wo;

    Tensor out({n, cout, ho, wo});
#pragma omp parallel
    {
        std::vector<double> colbuf(static_cast<size_t>(kk * p_total));
#pragma omp for schedule(static)
        for (int ni = 0; ni < n; ++ni) {
            im2col(x->val.data() + static_cast<std::int64_t>(ni) * cin * h * w, cin, h, w, k,
                   stride, pad, mode, ho, wo, colbuf.data());
            CMapRM wm(weight->val.data(), cout, kk);
            MapRM colm(colbuf.data(), kk, p_total);
            MapRM ym(out.data() + static_cast<std::int64_t>(ni) * cout * p_total, cout, p_total);
            ym.noalias() = wm * colm;
            for (int co = 0; co < cout; ++co) ym.row(co).array() += bias->val[co];
        }
    }

    Var node = make_node(std::move(out), {x, weight, bias}, "conv2d");
    if (node->requires_grad) {
        Var px = x, pw = weight, pb = bias;
        node->backward_fn = [px, pw, pb, n, cin, h, w, cout, k, stride, pad, mode, ho, wo, kk,
                             p_total](const Tensor& g) {
            const bool need_dx = px->requires_grad;
            const bool need_dw = pw->requires_grad;
            Tensor dx = need_dx ? Tensor(px->val.shape()) : Tensor();
            std::vector<Tensor> dws(need_dw ? static_cast<size_t>(n) : 0);
#pragma omp parallel
            {
                std::vector<double> colbuf(static_cast<size_t>(kk * p_total));
                std::vector<double> dcolbuf(need_dx ? static_cast<size_t>(kk * p_total) : 0);
#pragma omp for schedule(static)
                for (int ni = 0; ni < n; ++ni) {
                    CMapRM gm(g.data() + static_cast<std::int64_t>(ni) * cout * p_total, cout, p_total);
                    if (need_dw) {
                        im2col(px->val.data() + static_cast<std::int64_t>(ni) * cin * h * w, cin, h,
                               w, k, stride, pad, mode, ho, wo, colbuf.data());
                        dws[static_cast<size_t>(ni)] = Tensor(pw->val.shape());
                        MapRM dwm(dws[static_cast<size_t>(ni)].data(), cout, kk);
                        CMapRM colm(colbuf.data(), kk, p_total);
                        dwm.noalias() = gm * colm.transpose();
                    }
                    if (need_dx) {
                        CMapRM wm(pw->val.data(), cout, kk);
                        MapRM dcolm(dcolbuf.data(), kk, p_total);
                        dcolm.noalias() = wm.transpose() * gm;
                        col2im_add(dcolbuf.data(), cin, h, w, k, stride, pad, mode, ho, wo,
                                   dx.data() + static_cast<std::int64_t>(ni) * cin * h * w);
                    }
                }
            }
            if (need_dw) {
                Tensor dw(pw->val.shape());
                for (int ni = 0; ni < n; ++ni) dw.add_(dws[static_cast<size_t>(ni)]);
                pw->accumulate(dw);
            }
            if (pb->requires_grad) {
                Tensor db(pb->val.shape());
                for (int ni = 0; ni < n; ++ni)
                    for (int co = 0; co < cout; ++co) {
                        const double* src = g.data() + (static_cast<std::int64_t>(ni) * cout + co) * p_total;
                        double acc = 0.0;
                        for (std::int64_t p = 0; p < p_total; ++p) acc += src[p];
                        db[co] += acc;
                    }
                pb->accumulate(db);
            }
            if (need_dx) px->accumulate(dx);
        };
    }
    return node;
}

Var batch_norm(const Var& x, Tensor& running_mean, Tensor& running_var, bool training,
               double momentum, double eps) {
    const Shape& s = x->val.shape();
    if (s.size() != 4) throw std::invalid_argument("batch_norm: rank-4 input required");
    const int n = s[0], c = s[1], h = s[2], w = s[3];
    if (running_mean.dim(0) != c) throw std::invalid_argument("batch_norm: channel mismatch");
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::int64_t cnt = static_cast<std::int64_t>(n) * plane;

    std::vector<double> mean(c), invstd(c);
    if (training) {
        for (int ci = 0; ci < c; ++ci) {
            double m = 0.0, m2 = 0.0;
            for (int ni = 0; ni < n; ++ni) {
                const double* src = x->val.data() + (static_cast<std::int64_t>(ni) * c + ci) * plane;
                for (std::int64_t p = 0; p < plane; ++p) {
                    m += src[p];
                    m2 += src[p] * src[p];
                }
            }
            m /= cnt;
            const double var = std::max(m2 / cnt - m * m, 0.0);
            mean[ci] = m;
            invstd[ci] = 1.0 / std::sqrt(var + eps);
            const double var_unbiased = cnt > 1 ? var * cnt / (cnt - 1.0) : var;
            running_mean[ci] = (1.0 - momentum) * running_mean[ci] + momentum * m;
            running_var[ci] = (1.0 - momentum) * running_var[ci] + momentum * var_unbiased;
        }
    } else {
        for (int ci = 0; ci < c; ++ci) {
            mean[ci] = running_mean[ci];
            invstd[ci] = 1.0 / std::sqrt(running_var[ci] + eps);
        }
    }

    Tensor out(s);
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
            const double* src = x->val.data() + (static_cast<std::int64_t>(ni) * c + ci) * plane;
            double* dst = out.data() + (static_cast<std::int64_t>(ni) * c + ci) * plane;
            for (std::int64_t p = 0; p < plane; ++p) dst[p] = (src[p] - mean[ci]) * invstd[ci];
        }

    Var node = make_node(std::move(out), {x}, "batch_norm");
    if (node->requires_grad) {
        Var px = x;
        node->backward_fn = [px, mean, invstd, training, n, c, plane, cnt](const Tensor& g) {
            Tensor gx(px->val.shape());
            if (!training) {
                for (int ni = 0; ni < n; ++ni)
                    for (int ci = 0; ci < c; ++ci) {
                        const double* gs = g.data() + (static_cast<std::int64_t>(ni) * c + ci) * plane;
                        double* gd = gx.data() + (static_cast<std::int64_t>(ni) * c + ci) * plane;
                        for (std::int64_t p = 0; p < plane; ++p) gd[p] = gs[p] * invstd[ci];
                    }
            } else {
                // dx = invstd * (g - mean(g) - xhat * mean(g*xhat)), per channel.
                for (int ci = 0; ci < c; ++ci) {
                    double gsum = 0.0, gxhat = 0.0;
                    for (int ni = 0; ni < n; ++ni) {
                        const double* gs = g.data() + (static_cast<std::int64_t>(ni) * c + ci) * plane;
                        const double* xs = px->val.data() + (static_cast<std::int64_t>(ni) * c + ci) * plane;
                        for (std::int64_t p = 0; p < plane; ++p) {
                            gsum += gs[p];
                            gxhat += gs[p] * (xs[p] - mean[ci]) * invstd[ci];
                        }
                    }
                    gsum /= cnt;
                    gxhat /= cnt;
                    for (int ni = 0; ni < n; ++ni) {
                        const double* gs = g.data() + (static_cast<std::int64_t>(ni) * c + ci) * plane;
                        const double* xs = px->val.data() + (static_cast<std::int64_t>(ni) * c + ci) * plane;
                        double* gd = gx.data() + (static_cast<std::int64_t>(ni) * c + ci) * plane;
                        for (std::int64_t p = 0; p < plane; ++p) {
                            const double xhat = (xs[p] - mean[ci]) * invstd[ci];
                            gd[p] = invstd[ci] * (gs[p] - gsum - xhat * gxhat);
                        }
                    }
                }
            }
            px->accumulate(gx);
        };
    }
    return node;
}

Tensor grid_valid_mask(const Tensor& grid, int src_h, int src_w) {
    const Shape& s = grid.shape();
    if (s.size() != 4 || s[1] != 2) throw std::invalid_argument("grid_valid_mask: (N,2,H,W) required");
    const int n = s[0], h = s[2], w = s[3];
    Tensor mask({n, 1, h, w});
    for (int ni = 0; ni < n; ++ni)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double gx = grid.at(ni, 0, y, x), gy = grid.at(ni, 1, y, x);
                mask.at(ni, 0, y, x) =
                    (gx >= 0 && gx <= src_w - 1 && gy >= 0 && gy <= src_h - 1) ? 1.0 : 0.0;
            }
    return mask;
}

Var grid_sample(const Var& source, const Var& grid) {
    const Shape& ss = source->val.shape();
    const Shape& gs = grid->val.shape();
    if (ss.size() != 4) throw std::invalid_argument("grid_sample: (N,C,H,W) source required");
    if (gs.size() != 4 || gs[1] != 2) throw std::invalid_argument("grid_sample: (N,2,H,W) grid required");
    if (ss[0] != gs[0]) throw std::invalid_argument("grid_sample: batch mismatch");
    const int n = ss[0], c = ss[1], h = ss[2], w = ss[3];
    const int gh = gs[2], gw = gs[3];
    const std::int64_t splane = static_cast<std::int64_t>(h) * w;
    const std::int64_t gplane = static_cast<std::int64_t>(gh) * gw;

    Tensor out({n, c, gh, gw});
    for (int ni = 0; ni < n; ++ni) {
        for (int y = 0; y < gh; ++y)
            for (int x = 0; x < gw; ++x) {
                const double gx = grid->val.at(ni, 0, y, x), gy = grid->val.at(ni, 1, y, x);
                if (!(gx >= 0 && gx <= w - 1 && gy >= 0 && gy <= h - 1)) continue;
                const int x0 = static_cast<int>(std::floor(gx)), y0 = static_cast<int>(std::floor(gy));
                const double wx = gx - x0, wy = gy - y0;
                const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
                for (int ci = 0; ci < c; ++ci) {
                    const double* sp = source->val.data() + (static_cast<std::int64_t>(ni) * c + ci) * splane;
                    const double v00 = sp[y0 * w + x0], v01 = sp[y0 * w + x1];
                    const double v10 = sp[y1 * w + x0], v11 = sp[y1 * w + x1];
                    out.at(ni, ci, y, x) =
                        (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
                }
            }
    }

    Var node = make_node(std::move(out), {source, grid}, "grid_sample");
    if (node->requires_grad) {
        Var ps = source, pg = grid;
        node->backward_fn = [ps, pg, n, c, h, w, gh, gw, splane, gplane](const Tensor& g) {
            Tensor dsrc = ps->requires_grad ? Tensor(ps->val.shape()) : Tensor();
            Tensor dgrid = pg->requires_grad ? Tensor(pg->val.shape()) : Tensor();
            for (int ni = 0; ni < n; ++ni) {
                for (int y = 0; y < gh; ++y)
                    for (int x = 0; x < gw; ++x) {
                        const double gx = pg->val.at(ni, 0, y, x), gy = pg->val.at(ni, 1, y, x);
                        if (!(gx >= 0 && gx <= w - 1 && gy >= 0 && gy <= h - 1)) continue;
                        const int x0 = static_cast<int>(std::floor(gx));
                        const int y0 = static_cast<int>(std::floor(gy));
                        const double wx = gx - x0, wy = gy - y0;
                        const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
                        double dx_acc = 0.0, dy_acc = 0.0;
                        for (int ci = 0; ci < c; ++ci) {
                            const double go = g.at(ni, ci, y, x);
                            if (go == 0.0 && !pg->requires_grad) continue;
                            const double* sp =
                                ps->val.data() + (static_cast<std::int64_t>(ni) * c + ci) * splane;
                            const double v00 = sp[y0 * w + x0], v01 = sp[y0 * w + x1];
                            const double v10 = sp[y1 * w + x0], v11 = sp[y1 * w + x1];
                            if (!dsrc.empty()) {
                                double* dp = dsrc.data() + (static_cast<std::int64_t>(ni) * c + ci) * splane;
                                dp[y0 * w + x0] += go * (1 - wy) * (1 - wx);
                                dp[y0 * w + x1] += go * (1 - wy) * wx;
                                dp[y1 * w + x0] += go * wy * (1 - wx);
                                dp[y1 * w + x1] += go * wy * wx;
                            }
                            dx_acc += go * ((1 - wy) * (v01 - v00) + wy * (v11 - v10));
                            dy_acc += go * ((1 - wx) * (v10 - v00) + wx * (v11 - v01));
                        }
                        if (!dgrid.empty()) {
                            dgrid.at(ni, 0, y, x) = dx_acc;
                            dgrid.at(ni, 1, y, x) = dy_acc;
                        }
                    }
            }
            if (!dsrc.empty()) ps->accumulate(dsrc);
            if (!dgrid.empty()) pg->accumulate(dgrid);
            (void)gplane;
        };
    }
    return node;
}

Var reproject_grid(const Var& depth, const Var& pose, const Intrinsics& k) {
    const Shape& ds = depth->val.shape();
    const Shape& ps = pose->val.shape();
    if (ds.size() != 4 || ds[1] != 1) throw std::invalid_argument("reproject_grid: (N,1,H,W) depth required");
    if (ps.size() != 2 || ps[1] != 6) throw std::invalid_argument("reproject_grid: (N,6) pose required");
    if (ds[0] != ps[0]) throw std::invalid_argument("reproject_grid: batch mismatch");
    const int n = ds[0], h = ds[2], w = ds[3];
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;

    Tensor out({n, 2, h, w});
    for (int ni = 0; ni < n; ++ni) {
        const Eigen::Vector3d wvec(pose->val[ni * 6 + 0], pose->val[ni * 6 + 1], pose->val[ni * 6 + 2]);
        const Eigen::Vector3d t(pose->val[ni * 6 + 3], pose->val[ni * 6 + 4], pose->val[ni * 6 + 5]);
        const Eigen::Matrix3d r = so3_exp(wvec);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double d = depth->val.at(ni, 0, y, x);
                const Eigen::Vector3d ray((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
                const Eigen::Vector3d q = r * (d * ray) + t;
                const double z = std::max(q.z(), kMinProjectionDepth);
                out.at(ni, 0, y, x) = k.fx * q.x() / z + k.cx;
                out.at(ni, 1, y, x) = k.fy * q.y() / z + k.cy;
            }
    }

    Var node = make_node(std::move(out), {depth, pose}, "reproject_grid");
    if (node->requires_grad) {
        Var pd = depth, pp = pose;
        Intrinsics kk = k;
        node->backward_fn = [pd, pp, kk, n, h, w, plane](const Tensor& g) {
            Tensor dd = pd->requires_grad ? Tensor(pd->val.shape()) : Tensor();
            Tensor dp = pp->requires_grad ? Tensor(pp->val.shape()) : Tensor();
            for (int ni = 0; ni < n; ++ni) {
                const Eigen::Vector3d wvec(pp->val[ni * 6 + 0], pp->val[ni * 6 + 1], pp->val[ni * 6 + 2]);
                const Eigen::Vector3d t(pp->val[ni * 6 + 3], pp->val[ni * 6 + 4], pp->val[ni * 6 + 5]);
                const Eigen::Matrix3d r = so3_exp(wvec);
                const Eigen::Matrix3d jr = so3_right_jacobian(wvec);
                Eigen::Vector3d dw_acc = Eigen::Vector3d::Zero();
                Eigen::Vector3d dt_acc = Eigen::Vector3d::Zero();
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        const double gu = g.at(ni, 0, y, x), gv = g.at(ni, 1, y, x);
                        if (gu == 0.0 && gv == 0.0) continue;
                        const double d = pd->val.at(ni, 0, y, x);
                        const Eigen::Vector3d ray((x - kk.cx) / kk.fx, (y - kk.cy) / kk.fy, 1.0);
                        const Eigen::Vector3d pnt = d * ray;
                        const Eigen::Vector3d q = r * pnt + t;
                        const double z = std::max(q.z(), kMinProjectionDepth);
                        const bool clamped = q.z() < kMinProjectionDepth;
                        // dL/dq from the pinhole projection.
                        Eigen::Vector3d dq;
                        dq.x() = gu * kk.fx / z;
                        dq.y() = gv * kk.fy / z;
                        dq.z() = clamped ? 0.0
                                         : -(gu * kk.fx * q.x() + gv * kk.fy * q.y()) / (z * z);
                        if (!dd.empty()) dd.at(ni, 0, y, x) = (r * ray).dot(dq);
                        if (!dp.empty()) {
                            dt_acc += dq;
                            // d(R p)/dw = -R [p]x J_r  =>  dL/dw = J_r^T (p x (R^T dq)).
                            dw_acc += jr.transpose() * pnt.cross(r.transpose() * dq);
                        }
                    }
                if (!dp.empty()) {
                    for (int i = 0; i < 3; ++i) {
                        dp[ni * 6 + i] = dw_acc[i];
                        dp[ni * 6 + 3 + i] = dt_acc[i];
                    }
                }
            }
            if (!dd.empty()) pd->accumulate(dd);
            if (!dp.empty()) pp->accumulate(dp);
        };
    }
    return node;
}

namespace {

Var spatial_resize(const Var& x, int out_h, int out_w, bool nearest2x) {
    const Shape& s = x->val.shape();
    if (s.size() != 4) throw std::invalid_argument("resize: rank-4 input required");
    const int n = s[0], c = s[1], h = s[2], w = s[3];
    const std::int64_t in_plane = static_cast<std::int64_t>(h) * w;
    const std::int64_t out_plane = static_cast<std::int64_t>(out_h) * out_w;

    // Precompute the 1D index/weight tables once per call.
    struct Lerp {
        int i0, i1;
        double w1;
    };
    std::vector<Lerp> lx(static_cast<size_t>(out_w)), ly(static_cast<size_t>(out_h));
    if (nearest2x) {
        for (int i = 0; i < out_w; ++i) lx[static_cast<size_t>(i)] = {i / 2, i / 2, 0.0};
        for (int i = 0; i < out_h; ++i) ly[static_cast<size_t>(i)] = {i / 2, i / 2, 0.0};
    } else {
        auto make = [](int in_n, int out_n, std::vector<Lerp>& tab) {
            const double scale = static_cast<double>(in_n) / out_n;
            for (int i = 0; i < out_n; ++i) {
                double src = (i + 0.5) * scale - 0.5;
                src = std::min(std::max(src, 0.0), static_cast<double>(in_n - 1));
                const int i0 = static_cast<int>(std::floor(src));
                const int i1 = std::min(i0 + 1, in_n - 1);
                tab[static_cast<size_t>(i)] = {i0, i1, src - i0};
            }
        };
        make(w, out_w, lx);
        make(h, out_h, ly);
    }

    Tensor out({n, c, out_h, out_w});
    for (int i = 0; i < n * c; ++i) {
        const double* src = x->val.data() + static_cast<std::int64_t>(i) * in_plane;
        double* dst = out.data() + static_cast<std::int64_t>(i) * out_plane;
        for (int y = 0; y < out_h; ++y) {
            const auto& py = ly[static_cast<size_t>(y)];
            for (int xx = 0; xx < out_w; ++xx) {
                const auto& px = lx[static_cast<size_t>(xx)];
                const double v0 = src[py.i0 * w + px.i0] * (1 - px.w1) + src[py.i0 * w + px.i1] * px.w1;
                const double v1 = src[py.i1 * w + px.i0] * (1 - px.w1) + src[py.i1 * w + px.i1] * px.w1;
                dst[y * out_w + xx] = v0 * (1 - py.w1) + v1 * py.w1;
            }
        }
    }

    Var node = make_node(std::move(out), {x}, nearest2x ? "upsample_nearest2x" : "resize_bilinear");
    if (node->requires_grad) {
        Var px_var = x;
        node->backward_fn = [px_var, lx, ly, n, c, w, in_plane, out_h, out_w, out_plane](const Tensor& g) {
            Tensor gx(px_var->val.shape());
            for (int i = 0; i < n * c; ++i) {
                const double* gs = g.data() + static_cast<std::int64_t>(i) * out_plane;
                double* gd = gx.data() + static_cast<std::int64_t>(i) * in_plane;
                for (int y = 0; y < out_h; ++y) {
                    const auto& py = ly[static_cast<size_t>(y)];
                    for (int xx = 0; xx < out_w; ++xx) {
                        const auto& px = lx[static_cast<size_t>(xx)];
                        const double gv = gs[y * out_w + xx];
                        gd[py.i0 * w + px.i0] += gv * (1 - py.w1) * (1 - px.w1);
                        gd[py.i0 * w + px.i1] += gv * (1 - py.w1) * px.w1;
                        gd[py.i1 * w + px.i0] += gv * py.w1 * (1 - px.w1);
                        gd[py.i1 * w + px.i1] += gv * py.w1 * px.w1;
                    }
                }
            }
            px_var->accumulate(gx);
        };
    }
    return node;
}

}  // namespace

Var upsample_nearest2x(const Var& x) {
    const Shape& s = x->val.shape();
    if (s.size() != 4) throw std::invalid_argument("upsample_nearest2x: rank-4 input required");
    return spatial_resize(x, s[2] * 2, s[3] * 2, true);
}

Var resize_bilinear(const Var& x, int out_h, int out_w) {
    const Shape& s = x->val.shape();
    if (s.size() != 4) throw std::invalid_argument("resize_bilinear: rank-4 input required");
    if (s[2] == out_h && s[3] == out_w) return x;
    return spatial_resize(x, out_h, out_w, false);
}

Var box_filter_reflect(const Var& x, int radius) {
    const Shape& s = x->val.shape();
    if (s.size() != 4) throw std::invalid_argument("box_filter_reflect: rank-4 input required");
    if (radius < 1) throw std::invalid_argument("box_filter_reflect: radius must be >= 1");
    const int n = s[0], c = s[1], h = s[2], w = s[3];
    if (radius >= h || radius >= w) throw std::invalid_argument("box_filter_reflect: input too small");
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const double norm = 1.0 / ((2 * radius + 1) * (2 * radius + 1));
    Tensor out(s);
    for (int i = 0; i < n * c; ++i) {
        const double* src = x->val.data() + static_cast<std::int64_t>(i) * plane;
        double* dst = out.data() + static_cast<std::int64_t>(i) * plane;
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                double acc = 0.0;
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx)
                        acc += src[reflect_index(y + dy, h) * w + reflect_index(xx + dx, w)];
                dst[y * w + xx] = acc * norm;
            }
    }
    Var node = make_node(std::move(out), {x}, "box_filter_reflect");
    if (node->requires_grad) {
        Var px = x;
        node->backward_fn = [px, n, c, h, w, plane, radius, norm](const Tensor& g) {
            Tensor gx(px->val.shape());
            for (int i = 0; i < n * c; ++i) {
                const double* gs = g.data() + static_cast<std::int64_t>(i) * plane;
                double* gd = gx.data() + static_cast<std::int64_t>(i) * plane;
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx) {
                        const double gv = gs[y * w + xx] * norm;
                        for (int dy = -radius; dy <= radius; ++dy)
                            for (int dx = -radius; dx <= radius; ++dx)
                                gd[reflect_index(y + dy, h) * w + reflect_index(xx + dx, w)] += gv;
                    }
            }
            px->accumulate(gx);
        };
    }
    return node;
}

Var avg_pool3x3_reflect(const Var& x) { return box_filter_reflect(x, 1); }

}  // namespace ops

Conv2d::Conv2d(int in_ch, int out_ch, int ksize, int stride_, PadMode mode, std::mt19937_64& rng,
               double weight_scale, double bias_init) {
    const double bound = weight_scale / std::sqrt(static_cast<double>(in_ch) * ksize * ksize);
    weight = make_param(Tensor::uniform({out_ch, in_ch, ksize, ksize}, rng, -bound, bound));
    bias = make_param(Tensor::full({out_ch}, bias_init));
    stride = stride_;
    pad = ksize / 2;
    pad_mode = mode;
}

BatchNorm2d::BatchNorm2d(int channels) {
    running_mean = Tensor::zeros({channels});
    running_var = Tensor::full({channels}, 1.0);
}

}  // namespace semdepth

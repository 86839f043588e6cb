#include "semdepth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "semdepth/sampler.hpp"

namespace semdepth {

namespace {

double median_of(std::vector<double> v) {
    const size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    const double hi = v[n / 2];
    if (n % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
    return 0.5 * (hi + v[n / 2 - 1]);
}

struct ValidPixels {
    std::vector<double> pred, gt;
    double scale = 1.0;
};

ValidPixels collect_valid(const DepthMap& pred, const DepthMap& gt, const DepthEvalOptions& opt) {
    if (!pred.values.same_shape(gt.values))
        throw std::invalid_argument("depth metrics: shape mismatch " + pred.values.shape_str() +
                                    " vs " + gt.values.shape_str());
    const int h = gt.height(), w = gt.width();
    int y0 = 0, y1 = h, x0 = 0, x1 = w;
    if (opt.garg_crop) {
        y0 = static_cast<int>(0.40810811 * h);
        y1 = static_cast<int>(0.99189189 * h);
        x0 = static_cast<int>(0.03594771 * w);
        x1 = static_cast<int>(0.96405229 * w);
    }
    ValidPixels v;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const double g = gt.values.at(y, x);
            if (g > 0 && g <= opt.cap) {
                v.gt.push_back(g);
                v.pred.push_back(pred.values.at(y, x));
            }
        }
    if (v.gt.empty()) throw std::runtime_error("depth metrics: no valid ground-truth pixel");
    if (opt.median_scale) v.scale = median_of(v.gt) / std::max(median_of(v.pred), 1e-12);
    for (double& p : v.pred) p = std::min(std::max(p * v.scale, 1e-3), opt.cap);
    return v;
}

}  // namespace

std::map<std::string, double> DepthMetrics::as_map() const {
    return {{"abs_rel", abs_rel}, {"sq_rel", sq_rel},   {"rmse", rmse},     {"rmse_log", rmse_log},
            {"delta1", delta1},   {"delta2", delta2},   {"delta3", delta3}};
}

DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt, const DepthEvalOptions& opt) {
    const ValidPixels v = collect_valid(pred, gt, opt);
    DepthMetrics m;
    const size_t n = v.gt.size();
    for (size_t i = 0; i < n; ++i) {
        const double p = v.pred[i], g = v.gt[i];
        const double d = p - g;
        m.abs_rel += std::abs(d) / g;
        m.sq_rel += d * d / g;
        m.rmse += d * d;
        const double dl = std::log(p) - std::log(g);
        m.rmse_log += dl * dl;
        const double ratio = std::max(p / g, g / p);
        m.delta1 += ratio < 1.25;
        m.delta2 += ratio < 1.25 * 1.25;
        m.delta3 += ratio < 1.25 * 1.25 * 1.25;
    }
    const double inv = 1.0 / static_cast<double>(n);
    m.abs_rel *= inv;
    m.sq_rel *= inv;
    m.rmse = std::sqrt(m.rmse * inv);
    m.rmse_log = std::sqrt(m.rmse_log * inv);
    m.delta1 *= inv;
    m.delta2 *= inv;
    m.delta3 *= inv;
    return m;
}

SegMetrics binary_seg_metrics(const Tensor& pred, const Tensor& gt) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("binary_seg_metrics: shape mismatch");
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::int64_t i = 0; i < gt.size(); ++i) {
        const bool p = pred[i] != 0.0, g = gt[i] != 0.0;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
        tn += !p && !g;
    }
    auto iou = [](std::int64_t inter, std::int64_t uni) {
        return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    };
    SegMetrics s;
    s.miou_binary = 0.5 * (iou(tp, tp + fp + fn) + iou(tn, tn + fp + fn));
    s.dice = (2 * tp + fp + fn) == 0 ? 1.0
                                     : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    return s;
}

CategoryAbsRel per_category_absrel(const DepthMap& pred, const DepthMap& gt, const Tensor& full_labels,
                                   const CategoryTable& table, const DepthEvalOptions& opt) {
    if (!full_labels.same_shape(gt.values))
        throw std::invalid_argument("per_category_absrel: labels do not align with depth");
    // Global scaling first, identical to depth_metrics.
    const ValidPixels global = collect_valid(pred, gt, opt);

    std::map<int, std::pair<double, std::int64_t>> acc;  // id -> (sum, count)
    const int h = gt.height(), w = gt.width();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double g = gt.values.at(y, x);
            if (!(g > 0 && g <= opt.cap)) continue;
            const double p =
                std::min(std::max(pred.values.at(y, x) * global.scale, 1e-3), opt.cap);
            auto& slot = acc[static_cast<int>(full_labels.at(y, x))];
            slot.first += std::abs(p - g) / g;
            slot.second += 1;
        }
    CategoryAbsRel out;
    for (const auto& [id, sums] : acc) {
        if (sums.second == 0) continue;
        out.per_category[table.name_of(id)] = sums.first / static_cast<double>(sums.second);
    }
    if (out.per_category.empty()) throw std::runtime_error("per_category_absrel: no valid pixel");
    for (const auto& [name, v] : out.per_category) out.mean += v;
    out.mean /= static_cast<double>(out.per_category.size());
    return out;
}

double border_gap_score(const DepthMap& pred, const DepthMap& gt, const Tensor& gt_binary,
                        int offset, bool median_scale, double min_gt_gap) {
    if (!pred.values.same_shape(gt.values) || !gt_binary.same_shape(gt.values))
        throw std::invalid_argument("border_gap_score: shape mismatch");
    const int h = gt.height(), w = gt.width();
    double scale = 1.0;
    if (median_scale) {
        std::vector<double> pv, gv;
        for (std::int64_t i = 0; i < gt.values.size(); ++i)
            if (gt.values[i] > 0) {
                gv.push_back(gt.values[i]);
                pv.push_back(pred.values[i]);
            }
        if (gv.empty()) throw std::runtime_error("border_gap_score: no valid gt");
        scale = median_of(gv) / std::max(median_of(pv), 1e-12);
    }
    double total = 0;
    std::int64_t count = 0;
    for (const PixCoord& p : extract_edge_points(gt_binary)) {
        const auto n = edge_normal(gt_binary, p);
        if (!n) continue;
        const int ax = p.x + static_cast<int>(std::lround(offset * n->x()));
        const int ay = p.y + static_cast<int>(std::lround(offset * n->y()));
        const int bx = p.x - static_cast<int>(std::lround(offset * n->x()));
        const int by = p.y - static_cast<int>(std::lround(offset * n->y()));
        if (ax < 0 || ax >= w || ay < 0 || ay >= h || bx < 0 || bx >= w || by < 0 || by >= h)
            continue;
        const double gap_gt = std::abs(gt.values.at(ay, ax) - gt.values.at(by, bx));
        if (gap_gt < min_gt_gap) continue;
        const double gap_pred = std::abs(pred.values.at(ay, ax) - pred.values.at(by, bx)) * scale;
        total += std::min(gap_pred / gap_gt, 1.0);
        ++count;
    }
    return count == 0 ? 0.0 : total / static_cast<double>(count);
}

std::string depth_metrics_table(const DepthMetrics& m) {
    char buf[256];
    std::string out = "  abs_rel   sq_rel     rmse rmse_log   d<1.25 d<1.25^2 d<1.25^3\n";
    std::snprintf(buf, sizeof(buf), "%9.4f %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f\n", m.abs_rel,
                  m.sq_rel, m.rmse, m.rmse_log, m.delta1, m.delta2, m.delta3);
    return out + buf;
}

}  // namespace semdepth

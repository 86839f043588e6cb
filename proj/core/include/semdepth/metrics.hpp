#pragma once

#include <map>
#include <string>

#include "semdepth/data.hpp"
#include "semdepth/geometry.hpp"

namespace semdepth {

struct DepthMetrics {
    double abs_rel = 0, sq_rel = 0, rmse = 0, rmse_log = 0;
    double delta1 = 0, delta2 = 0, delta3 = 0;  // max(p/g,g/p) < 1.25^k

    std::map<std::string, double> as_map() const;
};

struct DepthEvalOptions {
    double cap = 80.0;         // meters; valid gt is (0, cap]
    bool median_scale = true;  // pred *= median(gt)/median(pred)
    bool garg_crop = false;    // standard KITTI evaluation crop
};

/// Standard depth metrics over pixels with valid ground truth. Predictions
/// are clamped to [1e-3, cap] after optional median scaling. Throws when no
/// gt pixel is valid.
DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt, const DepthEvalOptions& opt = {});

struct SegMetrics {
    double miou_binary = 0;  // mean IoU over the two classes
    double dice = 0;         // foreground DICE
};

SegMetrics binary_seg_metrics(const Tensor& pred, const Tensor& gt);

struct CategoryAbsRel {
    std::map<std::string, double> per_category;
    double mean = 0;  // arithmetic mean over the listed categories
};

/// AbsRel restricted to each category's valid-gt pixels; empty categories
/// are omitted. Scaling/capping matches depth_metrics.
CategoryAbsRel per_category_absrel(const DepthMap& pred, const DepthMap& gt, const Tensor& full_labels,
                                   const CategoryTable& table = CategoryTable::defaults(),
                                   const DepthEvalOptions& opt = {});

/// Depth-edge sharpness in [0,1]: mean over gt-border points of
/// min(|pred gap| / |gt gap|, 1), gaps measured `offset` pixels either side
/// of the border along its normal. Borders with a gt gap under min_gt_gap
/// are ignored. 0 when no border qualifies.
double border_gap_score(const DepthMap& pred, const DepthMap& gt, const Tensor& gt_binary,
                        int offset = 2, bool median_scale = true, double min_gt_gap = 0.5);

/// Aligned text row(s) in the usual column order:
/// abs_rel, sq_rel, rmse, rmse_log, delta<1.25, delta<1.25^2, delta<1.25^3.
std::string depth_metrics_table(const DepthMetrics& m);

}  // namespace semdepth

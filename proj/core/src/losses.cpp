#include "semdepth/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace semdepth {

using namespace ops;

void PhotometricConfig::validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("photometric config: alpha must be in [0,1]");
    if (ssim_window < 3 || ssim_window % 2 == 0)
        throw std::invalid_argument("photometric config: ssim window must be odd and >= 3");
}

Var ssim(const Var& a, const Var& b, const PhotometricConfig& cfg) {
    cfg.validate();
    if (!a->val.same_shape(b->val))
        throw std::invalid_argument("ssim: shape mismatch " + a->val.shape_str() + " vs " + b->val.shape_str());
    const int radius = cfg.ssim_window / 2;
    auto box = [radius](const Var& x) { return box_filter_reflect(x, radius); };

    Var mu_a = box(a);
    Var mu_b = box(b);
    Var sigma_a = sub(box(mul(a, a)), mul(mu_a, mu_a));
    Var sigma_b = sub(box(mul(b, b)), mul(mu_b, mu_b));
    Var sigma_ab = sub(box(mul(a, b)), mul(mu_a, mu_b));

    Var num = mul(add_scalar(mul_scalar(mul(mu_a, mu_b), 2.0), cfg.c1),
                  add_scalar(mul_scalar(sigma_ab, 2.0), cfg.c2));
    Var den = mul(add_scalar(add(mul(mu_a, mu_a), mul(mu_b, mu_b)), cfg.c1),
                  add_scalar(add(sigma_a, sigma_b), cfg.c2));
    return div(num, den);
}

Var photometric_error(const Var& target, const Var& synth, const PhotometricConfig& cfg) {
    cfg.validate();
    if (!target->val.same_shape(synth->val))
        throw std::invalid_argument("photometric_error: shape mismatch " + target->val.shape_str() +
                                    " vs " + synth->val.shape_str());
    Var ssim_term = mean_channels(ssim(target, synth, cfg));
    Var l1_term = mean_channels(abs(sub(target, synth)));
    // alpha/2 * (1 - SSIM) + (1 - alpha) * L1
    Var out = add(mul_scalar(add_scalar(neg(ssim_term), 1.0), cfg.alpha / 2.0),
                  mul_scalar(l1_term, 1.0 - cfg.alpha));
    return out;
}

Var min_reprojection_loss(const Var& target, const std::vector<Var>& synths,
                          const std::vector<Tensor>& masks, const PhotometricConfig& cfg) {
    if (synths.empty()) throw std::invalid_argument("min_reprojection_loss: empty source list");
    if (!masks.empty() && masks.size() != synths.size())
        throw std::invalid_argument("min_reprojection_loss: mask count does not match source count");

    // Invalid pixels are pushed to a large constant so the per-pixel minimum
    // ignores them; pixels invalid in every source are dropped from the mean.
    constexpr double kInvalid = 1e9;
    Var min_err;
    Tensor any_valid;
    for (size_t i = 0; i < synths.size(); ++i) {
        Var err = photometric_error(target, synths[i], cfg);
        if (!masks.empty()) {
            const Tensor& m = masks[i];
            if (!m.same_shape(err->val))
                throw std::invalid_argument("min_reprojection_loss: mask shape mismatch");
            Tensor penalty(m.shape());
            for (std::int64_t j = 0; j < m.size(); ++j) penalty[j] = (1.0 - m[j]) * kInvalid;
            err = add_const(mul_const(err, m), penalty);
            if (any_valid.empty())
                any_valid = m;
            else
                for (std::int64_t j = 0; j < m.size(); ++j)
                    any_valid[j] = std::max(any_valid[j], m[j]);
        }
        min_err = (i == 0) ? err : minimum(min_err, err);
    }
    if (any_valid.empty()) any_valid = Tensor::full(min_err->val.shape(), 1.0);
    const double valid_count = any_valid.sum();
    if (valid_count == 0.0) return mul_scalar(sum_all(min_err), 0.0);
    return mul_scalar(sum_all(mul_const(min_err, any_valid)), 1.0 / valid_count);
}

Var smoothness_loss(const Var& disp, const Var& image) {
    const Shape& ds = disp->val.shape();
    const Shape& is = image->val.shape();
    if (ds.size() != 4 || is.size() != 4 || ds[0] != is[0] || ds[2] != is[2] || ds[3] != is[3])
        throw std::invalid_argument("smoothness_loss: spatial shape mismatch");

    // Per-sample mean normalization keeps the loss scale-invariant in disp.
    Var norm = div_bcast_nc(disp, add_scalar(mean_hw(disp), 1e-7));
    Var wx = exp(neg(mean_channels(abs(diff_x(image)))));
    Var wy = exp(neg(mean_channels(abs(diff_y(image)))));
    Var tx = mean_all(mul(abs(diff_x(norm)), wx));
    Var ty = mean_all(mul(abs(diff_y(norm)), wy));
    return add(tx, ty);
}

Var bce_loss(const Var& pred_prob, const Tensor& label) {
    if (!pred_prob->val.same_shape(label))
        throw std::invalid_argument("bce_loss: shape mismatch " + pred_prob->val.shape_str() +
                                    " vs " + label.shape_str());
    Tensor inv_label(label.shape());
    for (std::int64_t i = 0; i < label.size(); ++i) {
        if (label[i] != 0.0 && label[i] != 1.0)
            throw std::invalid_argument("bce_loss: label values must be exactly 0 or 1");
        inv_label[i] = 1.0 - label[i];
    }
    Var p = clamp(pred_prob, 1e-7, 1.0 - 1e-7);
    Var pos = mul_const(log(p), label);
    Var negt = mul_const(log(add_scalar(neg(p), 1.0)), inv_label);
    return neg(mean_all(add(pos, negt)));
}

}  // namespace semdepth

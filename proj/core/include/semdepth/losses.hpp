#pragma once

#include <vector>

#include "semdepth/autodiff.hpp"

namespace semdepth {

struct PhotometricConfig {
    double alpha = 0.85;   // SSIM weight
    int ssim_window = 3;   // odd, >= 3
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;

    void validate() const;
};

/// Per-pixel structural similarity of two (N,C,H,W) images in [0,1], using
/// window-mean local statistics with reflect padding. Output (N,C,H,W) with
/// values in [-1,1]; symmetric in (a,b).
Var ssim(const Var& a, const Var& b, const PhotometricConfig& cfg = {});

/// Per-pixel reprojection error (N,1,H,W):
/// alpha/2 * (1 - SSIM) + (1 - alpha) * |a-b|, both channel-averaged.
Var photometric_error(const Var& target, const Var& synth, const PhotometricConfig& cfg = {});

/// Per-pixel minimum of photometric_error over source images, restricted to
/// valid pixels (per-source masks, (N,1,H,W) in {0,1}); pixels invalid in
/// every source are dropped from the mean. Returns a scalar.
Var min_reprojection_loss(const Var& target, const std::vector<Var>& synths,
                          const std::vector<Tensor>& masks, const PhotometricConfig& cfg = {});

/// Edge-aware first-order smoothness of mean-normalized disparity
/// (N,1,H,W) against image (N,C,H,W) edges. Returns a scalar.
Var smoothness_loss(const Var& disp, const Var& image);

/// Mean binary cross entropy; predictions clamped to [1e-7, 1-1e-7].
/// Labels must be exactly 0 or 1.
Var bce_loss(const Var& pred_prob, const Tensor& label);

}  // namespace semdepth

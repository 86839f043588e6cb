#pragma once

#include <Eigen/Dense>
#include <filesystem>

#include "semdepth/tensor.hpp"

namespace semdepth {

/// Pinhole camera intrinsics in pixel units.
struct Intrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const;
    Intrinsics scaled(int new_width, int new_height) const;
};

Intrinsics load_intrinsics(const std::filesystem::path& file);
void save_intrinsics(const Intrinsics& k, const std::filesystem::path& file);

/// Rigid transform: x_out = rotation * x + translation.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    void validate(double tol = 1e-6) const;
    Pose inverse() const;
};

/// Metric depth grid (H,W), meters.
struct DepthMap {
    Tensor values;

    int height() const { return values.dim(0); }
    int width() const { return values.dim(1); }
};

// Depth is clamped to at least this before projective division.
inline constexpr double kMinProjectionDepth = 1e-3;

Eigen::Matrix3d skew(const Eigen::Vector3d& v);
Eigen::Matrix3d so3_exp(const Eigen::Vector3d& axis_angle);
// Right Jacobian of SO(3): so3_exp(w + d) ~ so3_exp(w) * so3_exp(J_r(w) d).
Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& axis_angle);

Pose se3_exp(const Eigen::Vector3d& axis_angle, const Eigen::Vector3d& translation);

/// Camera-frame 3D points for every pixel: point(u,v) = depth(u,v) * K^-1 (u,v,1).
/// Output (3,H,W). Throws if any depth value is not positive.
Tensor backproject(const DepthMap& depth, const Intrinsics& k);

/// Applies T then pinhole projection; z clamped below by kMinProjectionDepth.
/// points (3,H,W) -> pixel coordinates (2,H,W), channel 0 = x, 1 = y.
Tensor project(const Tensor& points, const Intrinsics& k, const Pose& t);

struct WarpResult {
    Tensor image;  // same shape as source
    Tensor mask;   // (H,W), 1 where the sample point lies inside the source
};

/// Bilinear lookup of source (C,H,W) at grid (2,Hg,Wg) pixel coordinates.
WarpResult warp_bilinear(const Tensor& source, const Tensor& grid);

/// Pixel-coordinate identity grid (2,H,W).
Tensor identity_grid(int height, int width);

/// Scaled-sigmoid disparity to metric depth:
/// disp = 1/d_max + (1/d_min - 1/d_max) * s, depth = 1/disp.
DepthMap disp_to_depth(const Tensor& sigmoid_disp, double d_min, double d_max);

}  // namespace semdepth

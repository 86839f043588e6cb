#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "semdepth/autodiff.hpp"
#include "semdepth/geometry.hpp"

namespace semdepth {

enum class PadMode { Zero, Reflect };

namespace ops {

/// 2D convolution, NCHW. weight (Cout,Cin,k,k), bias (Cout).
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad, PadMode mode);

/// Channel-wise batch normalization without learned affine. Training mode
/// normalizes with batch statistics and updates the running buffers; eval
/// mode normalizes with the running statistics.
Var batch_norm(const Var& x, Tensor& running_mean, Tensor& running_var, bool training,
               double momentum = 0.1, double eps = 1e-5);

/// Bilinear sampling of source (N,C,H,W) at grid (N,2,Hg,Wg) pixel
/// coordinates. Samples outside [0,W-1]x[0,H-1] produce 0; use
/// grid_valid_mask for the validity indicator. Differentiable in both
/// source and grid.
Var grid_sample(const Var& source, const Var& grid);
Tensor grid_valid_mask(const Tensor& grid, int src_h, int src_w);  // -> (N,1,Hg,Wg)

/// Fused backproject -> rigid transform -> pinhole projection.
/// depth (N,1,H,W), pose (N,6) = (axis-angle, translation), output sample
/// grid (N,2,H,W). Matches geometry::project(geometry::backproject(...)).
Var reproject_grid(const Var& depth, const Var& pose, const Intrinsics& k);

}  // namespace ops

/// 3x3-style convolution layer with owned parameters.
struct Conv2d {
    Var weight, bias;
    int stride = 1;
    int pad = 1;
    PadMode pad_mode = PadMode::Reflect;

    Conv2d() = default;
    Conv2d(int in_ch, int out_ch, int ksize, int stride, PadMode mode, std::mt19937_64& rng,
           double weight_scale = 1.0, double bias_init = 0.0);

    Var operator()(const Var& x) const { return ops::conv2d(x, weight, bias, stride, pad, pad_mode); }
    int in_channels() const { return weight->val.dim(1); }
    int out_channels() const { return weight->val.dim(0); }
    int kernel() const { return weight->val.dim(2); }
};

struct BatchNorm2d {
    Tensor running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;
    bool training = true;

    BatchNorm2d() = default;
    explicit BatchNorm2d(int channels);

    Var operator()(const Var& x) {
        return ops::batch_norm(x, running_mean, running_var, training, momentum, eps);
    }
    int channels() const { return running_mean.dim(0); }
};

/// Flat registry of named parameters and persistent buffers, used by the
/// optimizer and the checkpoint writer.
struct ParamRegistry {
    std::vector<std::pair<std::string, Var>> params;
    std::vector<std::pair<std::string, Tensor*>> buffers;

    void add(const std::string& name, const Var& p) { params.emplace_back(name, p); }
    void add_buffer(const std::string& name, Tensor* t) { buffers.emplace_back(name, t); }
    void add_conv(const std::string& name, Conv2d& c) {
        add(name + ".weight", c.weight);
        add(name + ".bias", c.bias);
    }
    void add_bn(const std::string& name, BatchNorm2d& b) {
        add_buffer(name + ".running_mean", &b.running_mean);
        add_buffer(name + ".running_var", &b.running_var);
    }
};

}  // namespace semdepth

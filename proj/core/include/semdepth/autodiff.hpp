#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "semdepth/tensor.hpp"

namespace semdepth {

/// Reverse-mode autodiff over Tensor values. Graphs are built per call
/// (define-by-run) out of shared_ptr nodes; backward() walks the graph in
/// reverse topological order and accumulates gradients into each node.
struct Node {
    Tensor val;
    Tensor grad;  // allocated lazily, same shape as val
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const Tensor& upstream)> backward_fn;  // adds into parents' grads
    bool requires_grad = false;
    const char* op = "leaf";

    void accumulate(const Tensor& g);
    bool has_grad() const { return !grad.empty(); }
};

using Var = std::shared_ptr<Node>;

Var make_param(Tensor value);           // leaf, requires_grad = true
Var make_const(Tensor value);           // leaf, no gradient
Var detach(const Var& v);               // value copy, no gradient path

/// Seeds the root gradient with ones and propagates. The root is normally a
/// scalar loss; any shape is accepted.
void backward(const Var& root);

namespace ops {

// -- elementwise ----------------------------------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);  // ties take a's gradient
Var neg(const Var& x);
Var abs(const Var& x);        // subgradient 0 at 0
Var square(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var elu(const Var& x);
Var softplus(const Var& x);   // log(1 + e^x), numerically stable
Var clamp(const Var& x, double lo, double hi);  // zero gradient outside [lo,hi]

Var add_scalar(const Var& x, double c);
Var mul_scalar(const Var& x, double c);
Var add_const(const Var& x, const Tensor& c);
Var mul_const(const Var& x, const Tensor& c);

// Broadcast a scalar ([1]) variable over x.
Var div_by_scalar(const Var& x, const Var& s);

// Divide (N,C,H,W) by a per-(n,c) scalar (N,C).
Var div_bcast_nc(const Var& x, const Var& s);

// -- reductions ------------------------------------------------------------
Var sum_all(const Var& x);    // -> [1]
Var mean_all(const Var& x);   // -> [1]

// -- shape / image ---------------------------------------------------------
Var concat_channels(const std::vector<Var>& xs);       // rank-4, axis 1
Var mean_channels(const Var& x);                       // (N,C,H,W) -> (N,1,H,W)
Var mean_hw(const Var& x);                             // (N,C,H,W) -> (N,C)
Var affine_channels(const Var& x, const std::vector<double>& scale);  // (N,C), per-channel scale
Var diff_x(const Var& x);     // forward difference along width, output width W-1
Var diff_y(const Var& x);     // forward difference along height, output height H-1
Var upsample_nearest2x(const Var& x);
Var resize_bilinear(const Var& x, int out_h, int out_w);
Var box_filter_reflect(const Var& x, int radius);  // window mean, reflect padding
Var avg_pool3x3_reflect(const Var& x);

// Gathers x(n, 0, y, x) for each index triple; backward scatter-adds.
struct PixelIndex {
    int n, y, x;
};
Var gather_hw(const Var& x, const std::vector<PixelIndex>& idx);

}  // namespace ops
}  // namespace semdepth

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "semdepth/autodiff.hpp"

namespace semdepth::testing {

/// Max relative error between analytic gradients and central finite
/// differences, over every element of every input. The functor must rebuild
/// the graph from the same input nodes on each call and return a scalar.
inline double grad_check(const std::function<Var()>& scalar_fn, const std::vector<Var>& inputs,
                         double h = 1e-5) {
    Var loss = scalar_fn();
    for (const Var& in : inputs) in->grad = Tensor();
    backward(loss);
    std::vector<Tensor> analytic;
    for (const Var& in : inputs)
        analytic.push_back(in->has_grad() ? in->grad : Tensor(in->val.shape()));

    double max_rel = 0.0;
    for (size_t k = 0; k < inputs.size(); ++k) {
        Var in = inputs[k];
        for (std::int64_t i = 0; i < in->val.size(); ++i) {
            const double orig = in->val[i];
            in->val[i] = orig + h;
            const double fp = scalar_fn()->val[0];
            in->val[i] = orig - h;
            const double fm = scalar_fn()->val[0];
            in->val[i] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double a = analytic[k][i];
            const double denom = std::max({std::abs(a), std::abs(fd), 1e-4});
            max_rel = std::max(max_rel, std::abs(a - fd) / denom);
        }
    }
    for (const Var& in : inputs) in->grad = Tensor();
    return max_rel;
}

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    return Tensor::uniform(std::move(shape), rng, lo, hi);
}

}  // namespace semdepth::testing

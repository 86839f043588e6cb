#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

namespace semdepth {

using Shape = std::vector<int>;

/// Dense row-major double tensor. Rank is arbitrary; images are stored
/// as (C,H,W) and batches as (N,C,H,W).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, double fill);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, double v) { return Tensor(std::move(shape), v); }
    static Tensor uniform(Shape shape, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0);
    static Tensor normal(Shape shape, std::mt19937_64& rng, double mean = 0.0, double stddev = 1.0);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // (y,x) access for rank-2, (c,y,x) for rank-3, (n,c,y,x) for rank-4.
    double& at(int y, int x) { return data_[idx2(y, x)]; }
    double at(int y, int x) const { return data_[idx2(y, x)]; }
    double& at(int c, int y, int x) { return data_[idx3(c, y, x)]; }
    double at(int c, int y, int x) const { return data_[idx3(c, y, x)]; }
    double& at(int n, int c, int y, int x) { return data_[idx4(n, c, y, x)]; }
    double at(int n, int c, int y, int x) const { return data_[idx4(n, c, y, x)]; }

    Tensor reshaped(Shape new_shape) const;

    double sum() const;
    double mean() const;
    double min() const;
    double max() const;
    bool all_finite() const;

    Tensor& add_(const Tensor& other);       // in-place elementwise +=
    Tensor& scale_(double s);                // in-place *= s

    std::string shape_str() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    size_t idx2(int y, int x) const {
        return static_cast<size_t>(y) * shape_[1] + x;
    }
    size_t idx3(int c, int y, int x) const {
        return (static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x;
    }
    size_t idx4(int n, int c, int y, int x) const {
        return ((static_cast<size_t>(n) * shape_[1] + c) * static_cast<size_t>(shape_[2]) + y) * shape_[3] + x;
    }

    Shape shape_;
    std::vector<double> data_;
};

std::int64_t shape_numel(const Shape& shape);

}  // namespace semdepth

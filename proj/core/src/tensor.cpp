#include "semdepth/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace semdepth {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("negative tensor dimension");
        n *= d;
    }
    return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(shape_numel(shape_)), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_))
        throw std::invalid_argument("tensor data size does not match shape " + shape_str());
}

Tensor Tensor::uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

Tensor Tensor::normal(Shape shape, std::mt19937_64& rng, double mean, double stddev) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(mean, stddev);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

Tensor Tensor::reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != size())
        throw std::invalid_argument("reshape changes element count");
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.data_ = data_;
    return t;
}

double Tensor::sum() const {
    return std::accumulate(data_.begin(), data_.end(), 0.0);
}

double Tensor::mean() const {
    if (data_.empty()) throw std::runtime_error("mean of empty tensor");
    return sum() / static_cast<double>(data_.size());
}

double Tensor::min() const {
    if (data_.empty()) throw std::runtime_error("min of empty tensor");
    return *std::min_element(data_.begin(), data_.end());
}

double Tensor::max() const {
    if (data_.empty()) throw std::runtime_error("max of empty tensor");
    return *std::max_element(data_.begin(), data_.end());
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::add_(const Tensor& other) {
    if (!same_shape(other)) throw std::invalid_argument("add_: shape mismatch " + shape_str() + " vs " + other.shape_str());
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::scale_(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
}

}  // namespace semdepth

#pragma once

#include <cstddef>
#include <vector>

#include "initlab/errors.hpp"

namespace initlab {

using Shape = std::vector<std::size_t>;

// Validates that a shape is non-empty with positive extents and returns the
// element count.
std::size_t shape_size(const Shape& shape);

// Dense n-dimensional array of doubles in row-major order (last index
// fastest). The shape is fixed at construction; element values are mutable.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, double value);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const;
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Same data viewed under a different shape; element counts must match.
    Tensor reshaped(Shape shape) const;

    void fill(double value);
    void scale(double factor);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::vector<double>::iterator begin() { return data_.begin(); }
    std::vector<double>::iterator end() { return data_.end(); }
    std::vector<double>::const_iterator begin() const { return data_.begin(); }
    std::vector<double>::const_iterator end() const { return data_.end(); }

private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace initlab

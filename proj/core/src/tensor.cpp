#include "initlab/tensor.hpp"

#include <algorithm>
#include <string>

namespace initlab {

std::size_t shape_size(const Shape& shape) {
    if (shape.empty()) {
        throw ShapeError("shape must have at least one extent");
    }
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) {
            throw ShapeError("shape extents must be positive");
        }
        n *= e;
    }
    return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
        throw ShapeError("data length " + std::to_string(data_.size()) +
                         " does not match shape element count " + std::to_string(shape_size(shape_)));
    }
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(shape_.size()) + " tensor");
    }
    return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
        throw ShapeError("reshape target has " + std::to_string(shape_size(shape)) +
                         " elements, tensor has " + std::to_string(data_.size()));
    }
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) {
    std::fill(data_.begin(), data_.end(), value);
}

void Tensor::scale(double factor) {
    for (double& v : data_) {
        v *= factor;
    }
}

}  // namespace initlab

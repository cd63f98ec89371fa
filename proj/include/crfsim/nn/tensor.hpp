#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>

#include "crfsim/common.hpp"

namespace crfsim::nn {

using Eigen::Index;

struct Shape4 {
    Index n = 0, c = 0, h = 0, w = 0;

    Index size() const { return n * c * h * w; }
    Index plane() const { return h * w; }
    bool operator==(const Shape4&) const = default;
    std::string str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
               std::to_string(w);
    }
};

/// N x C x H x W array in NCHW order with an optional gradient of the same shape.
template <typename Scalar>
class Tensor4 {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MatrixMap = Eigen::Map<Matrix>;
    using ConstMatrixMap = Eigen::Map<const Matrix>;

    Tensor4() = default;
    explicit Tensor4(const Shape4& shape) : shape_(shape), values_(Vector::Zero(shape.size())) {}
    Tensor4(Index n, Index c, Index h, Index w) : Tensor4(Shape4{n, c, h, w}) {}

    const Shape4& shape() const { return shape_; }
    Index n() const { return shape_.n; }
    Index c() const { return shape_.c; }
    Index h() const { return shape_.h; }
    Index w() const { return shape_.w; }
    Index size() const { return shape_.size(); }

    Vector& values() { return values_; }
    const Vector& values() const { return values_; }

    bool hasGrad() const { return grad_.has_value(); }
    Vector& grad() {
        if (!grad_) grad_ = Vector::Zero(size());
        return *grad_;
    }
    const Vector& grad() const {
        if (!grad_) throw DimensionError("tensor has no gradient slot");
        return *grad_;
    }
    void zeroGrad() { grad().setZero(); }

    Scalar& operator()(Index n, Index c, Index h, Index w) {
        return values_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
    }
    Scalar operator()(Index n, Index c, Index h, Index w) const {
        return values_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
    }

    /// Sample `n` viewed as a C x (H*W) matrix.
    MatrixMap sample(Index n) {
        return MatrixMap(values_.data() + n * shape_.c * shape_.plane(), shape_.c, shape_.plane());
    }
    ConstMatrixMap sample(Index n) const {
        return ConstMatrixMap(values_.data() + n * shape_.c * shape_.plane(), shape_.c,
                              shape_.plane());
    }

private:
    Shape4 shape_;
    Vector values_;
    std::optional<Vector> grad_;
};

template <typename Scalar>
void requireShape(const Tensor4<Scalar>& t, const Shape4& expected, const char* what) {
    if (t.shape() != expected) {
        throw DimensionError(std::string(what) + ": expected " + expected.str() + ", got " +
                             t.shape().str());
    }
}

}  // namespace crfsim::nn

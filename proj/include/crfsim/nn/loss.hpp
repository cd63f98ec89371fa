#pragma once

#include <algorithm>
#include <cmath>

#include "crfsim/nn/tensor.hpp"

namespace crfsim::nn {

inline constexpr double kProbClamp = 1e-7;

template <typename Scalar>
struct LossResult {
    Scalar loss;
    Tensor4<Scalar> grad;  ///< d loss / d pred
};

/// Mean binary cross-entropy. Predictions are clamped to [1e-7, 1 - 1e-7]; the
/// gradient is evaluated at the clamped value and passed straight through.
template <typename Scalar>
LossResult<Scalar> bceLoss(const Tensor4<Scalar>& pred, const Tensor4<Scalar>& target) {
    requireShape(target, pred.shape(), "bce target");
    const Scalar lo = Scalar(kProbClamp), hi = Scalar(1) - Scalar(kProbClamp);
    const Scalar count = static_cast<Scalar>(pred.size());
    LossResult<Scalar> out{Scalar(0), Tensor4<Scalar>(pred.shape())};
    Scalar sum = 0;
    for (Index i = 0; i < pred.size(); ++i) {
        const Scalar p = std::clamp(pred.values()[i], lo, hi);
        const Scalar t = target.values()[i];
        sum -= t * std::log(p) + (Scalar(1) - t) * std::log(Scalar(1) - p);
        out.grad.values()[i] = (p - t) / (p * (Scalar(1) - p)) / count;
    }
    out.loss = sum / count;
    return out;
}

}  // namespace crfsim::nn

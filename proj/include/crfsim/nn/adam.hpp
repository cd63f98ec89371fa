#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "crfsim/nn/tensor.hpp"

namespace crfsim::nn {

template <typename Scalar>
struct AdamState {
    using Vector = typename Tensor4<Scalar>::Vector;

    long stepCount = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<Vector> firstMoment;
    std::vector<Vector> secondMoment;
};

/// One bias-corrected Adam update over `params`, then zero their gradients.
/// Moment buffers are created on the first call and must keep matching shapes.
template <typename Scalar>
void adamStep(AdamState<Scalar>& state, std::span<Tensor4<Scalar>* const> params) {
    if (state.firstMoment.empty()) {
        for (auto* p : params) {
            state.firstMoment.push_back(Tensor4<Scalar>::Vector::Zero(p->size()));
            state.secondMoment.push_back(Tensor4<Scalar>::Vector::Zero(p->size()));
        }
    }
    if (state.firstMoment.size() != params.size()) {
        throw DimensionError("Adam state tracks " + std::to_string(state.firstMoment.size()) +
                             " parameters, got " + std::to_string(params.size()));
    }
    ++state.stepCount;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.stepCount));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.stepCount));
    const Scalar b1 = Scalar(state.beta1), b2 = Scalar(state.beta2);
    const Scalar stepSize = Scalar(state.lr / c1);
    const Scalar rootC2 = Scalar(std::sqrt(c2));
    const Scalar eps = Scalar(state.epsilon);

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto* p = params[i];
        auto& m = state.firstMoment[i];
        auto& v = state.secondMoment[i];
        if (m.size() != p->size()) throw DimensionError("Adam moment buffer shape mismatch");
        auto& g = p->grad();
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
        p->values().array() -=
            stepSize * m.array() / (v.array().sqrt() / rootC2 + eps);
        g.setZero();
    }
}

}  // namespace crfsim::nn

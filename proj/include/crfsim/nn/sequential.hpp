#pragma once

#include <vector>

#include "crfsim/nn/layer.hpp"

namespace crfsim::nn {

/// A chain of layers with cached activations for backprop.
template <typename Scalar>
class Sequential {
public:
    using Tensor = Tensor4<Scalar>;

    Sequential() = default;
    explicit Sequential(const std::vector<LayerSpec>& specs) {
        for (const auto& s : specs) layers_.push_back(makeLayer<Scalar>(s));
    }

    template <typename Rng>
    void initialize(Rng& rng) {
        for (auto& l : layers_) initKaiming(l, rng);
    }

    std::vector<Layer<Scalar>>& layers() { return layers_; }
    const std::vector<Layer<Scalar>>& layers() const { return layers_; }

    std::vector<LayerSpec> specs() const {
        std::vector<LayerSpec> out;
        for (const auto& l : layers_) out.push_back(l.spec);
        return out;
    }

    Shape4 outputShape(Shape4 in) const {
        for (const auto& l : layers_) in = l.outputShape(in);
        return in;
    }

    Tensor forward(const Tensor& x) const {
        Tensor cur = x;
        for (const auto& l : layers_) cur = nn::forward(l, cur);
        return cur;
    }

    /// Forward pass that keeps every layer input for a following backward().
    Tensor forwardTrain(const Tensor& x) {
        inputs_.clear();
        Tensor cur = x;
        for (const auto& l : layers_) {
            inputs_.push_back(cur);
            cur = nn::forward(l, cur);
        }
        return cur;
    }

    /// Backprop through the cached forwardTrain() activations.
    Tensor backward(const Tensor& gradOut) {
        if (inputs_.size() != layers_.size()) {
            throw DimensionError("backward called without a matching forwardTrain");
        }
        Tensor g = gradOut;
        for (std::size_t i = layers_.size(); i-- > 0;) g = nn::backward(layers_[i], inputs_[i], g);
        return g;
    }

    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> out;
        for (auto& l : layers_) {
            if (!l.spec.hasParameters()) continue;
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
        return out;
    }

    void zeroGrad() {
        for (auto* p : parameters()) p->zeroGrad();
    }

    Index parameterCount() const {
        Index n = 0;
        for (const auto& l : layers_)
            if (l.spec.hasParameters()) n += l.weight.size() + l.bias.size();
        return n;
    }

private:
    std::vector<Layer<Scalar>> layers_;
    std::vector<Tensor> inputs_;
};

}  // namespace crfsim::nn

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>

#include "crfsim/nn/tensor.hpp"

namespace crfsim::nn {

enum class LayerKind : std::uint8_t { Conv, Deconv, Relu, Sigmoid, Softplus, Concat };

inline std::string layerKindName(LayerKind kind);

/// Geometry of one layer. Kernel, stride and padding apply to Conv/Deconv;
/// `outputPadding` adds rows/columns to a Deconv output so that it can invert
/// a strided Conv exactly.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    int kernelH = 1;
    int kernelW = 1;
    int stride = 1;
    int padding = 0;
    int outputPadding = 0;
    int inChannels = 0;
    int outChannels = 0;

    bool hasParameters() const { return kind == LayerKind::Conv || kind == LayerKind::Deconv; }
    bool operator==(const LayerSpec&) const = default;
};

template <typename Scalar>
struct Layer {
    LayerSpec spec;
    /// Conv: Cout x (Cin*kh*kw). Deconv: Cin x (Cout*kh*kw). Stored as 1x1xRxC.
    Tensor4<Scalar> weight;
    Tensor4<Scalar> bias;  ///< 1 x Cout x 1 x 1

    Shape4 outputShape(const Shape4& in) const;
};

inline LayerSpec convSpec(int in, int out, int kernel, int stride, int padding) {
    return {LayerKind::Conv, kernel, kernel, stride, padding, 0, in, out};
}

inline LayerSpec deconvSpec(int in, int out, int kernel, int stride, int padding,
                            int outputPadding) {
    return {LayerKind::Deconv, kernel, kernel, stride, padding, outputPadding, in, out};
}

inline LayerSpec activationSpec(LayerKind kind) {
    LayerSpec s;
    s.kind = kind;
    return s;
}

/// Allocate zeroed parameters (with gradient slots) for a spec.
template <typename Scalar>
Layer<Scalar> makeLayer(const LayerSpec& spec) {
    Layer<Scalar> layer;
    layer.spec = spec;
    if (spec.kind == LayerKind::Concat) {
        throw DimensionError("concat joins two tensors; use concatChannels");
    }
    if (spec.hasParameters()) {
        if (spec.inChannels < 1 || spec.outChannels < 1 || spec.kernelH < 1 || spec.kernelW < 1 ||
            spec.stride < 1 || spec.padding < 0 || spec.outputPadding < 0 ||
            (spec.kind == LayerKind::Deconv && spec.outputPadding >= spec.stride)) {
            throw DimensionError("invalid " + layerKindName(spec.kind) + " geometry");
        }
        const Index k = static_cast<Index>(spec.kernelH) * spec.kernelW;
        if (spec.kind == LayerKind::Conv) {
            layer.weight = Tensor4<Scalar>(1, 1, spec.outChannels, spec.inChannels * k);
        } else {
            layer.weight = Tensor4<Scalar>(1, 1, spec.inChannels, spec.outChannels * k);
        }
        layer.bias = Tensor4<Scalar>(1, spec.outChannels, 1, 1);
        layer.weight.zeroGrad();
        layer.bias.zeroGrad();
    }
    return layer;
}

/// Kaiming-uniform weights (bound sqrt(6 / fanIn)), zero biases.
template <typename Scalar, typename Rng>
void initKaiming(Layer<Scalar>& layer, Rng& rng) {
    const auto& s = layer.spec;
    if (!s.hasParameters()) return;
    double fanIn = static_cast<double>(s.inChannels) * s.kernelH * s.kernelW;
    // each transposed-conv output sees about 1/stride^2 of the kernel taps
    if (s.kind == LayerKind::Deconv) fanIn /= static_cast<double>(s.stride * s.stride);
    const double bound = std::sqrt(6.0 / fanIn);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Index i = 0; i < layer.weight.size(); ++i) layer.weight.values()[i] = static_cast<Scalar>(u(rng));
    layer.bias.values().setZero();
}

namespace detail {

struct ConvGeometry {
    Index channels, inH, inW, kh, kw, stride, pad, outH, outW;
    Index rows() const { return channels * kh * kw; }
    Index cols() const { return outH * outW; }
};

/// Unfold a C x (H*W) image into (C*kh*kw) x (outH*outW) patches.
template <typename Scalar, typename In>
void im2col(const In& image, const ConvGeometry& g,
            typename Tensor4<Scalar>::Matrix& cols) {
    cols.resize(g.rows(), g.cols());
    for (Index c = 0; c < g.channels; ++c) {
        for (Index ki = 0; ki < g.kh; ++ki) {
            for (Index kj = 0; kj < g.kw; ++kj) {
                const Index row = (c * g.kh + ki) * g.kw + kj;
                Scalar* dst = cols.row(row).data();
                for (Index oy = 0; oy < g.outH; ++oy) {
                    const Index iy = oy * g.stride - g.pad + ki;
                    for (Index ox = 0; ox < g.outW; ++ox) {
                        const Index ix = ox * g.stride - g.pad + kj;
                        dst[oy * g.outW + ox] = (iy >= 0 && iy < g.inH && ix >= 0 && ix < g.inW)
                                                    ? image(c, iy * g.inW + ix)
                                                    : Scalar(0);
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: scatter-add patches back into a C x (H*W) image.
template <typename Scalar, typename Out>
void col2im(const typename Tensor4<Scalar>::Matrix& cols, const ConvGeometry& g, Out&& image) {
    image.setZero();
    for (Index c = 0; c < g.channels; ++c) {
        for (Index ki = 0; ki < g.kh; ++ki) {
            for (Index kj = 0; kj < g.kw; ++kj) {
                const Index row = (c * g.kh + ki) * g.kw + kj;
                const Scalar* src = cols.row(row).data();
                for (Index oy = 0; oy < g.outH; ++oy) {
                    const Index iy = oy * g.stride - g.pad + ki;
                    if (iy < 0 || iy >= g.inH) continue;
                    for (Index ox = 0; ox < g.outW; ++ox) {
                        const Index ix = ox * g.stride - g.pad + kj;
                        if (ix >= 0 && ix < g.inW) image(c, iy * g.inW + ix) += src[oy * g.outW + ox];
                    }
                }
            }
        }
    }
}

/// Patch geometry of a Conv applied to `in` (C x H x W).
inline ConvGeometry convGeometry(const LayerSpec& s, Index channels, Index h, Index w) {
    const Index outH = (h + 2 * s.padding - s.kernelH) / s.stride + 1;
    const Index outW = (w + 2 * s.padding - s.kernelW) / s.stride + 1;
    return {channels, h, w, s.kernelH, s.kernelW, s.stride, s.padding, outH, outW};
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
    if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

template <typename Scalar>
Scalar softplus(Scalar x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename Scalar>
typename Tensor4<Scalar>::ConstMatrixMap weightMatrix(const Layer<Scalar>& layer) {
    return typename Tensor4<Scalar>::ConstMatrixMap(layer.weight.values().data(), layer.weight.h(),
                                                    layer.weight.w());
}

template <typename Scalar>
typename Tensor4<Scalar>::MatrixMap weightGradMatrix(Layer<Scalar>& layer) {
    return typename Tensor4<Scalar>::MatrixMap(layer.weight.grad().data(), layer.weight.h(),
                                               layer.weight.w());
}

}  // namespace detail

template <typename Scalar>
Shape4 Layer<Scalar>::outputShape(const Shape4& in) const {
    switch (spec.kind) {
        case LayerKind::Conv: {
            if (in.c != spec.inChannels) {
                throw DimensionError("conv expects " + std::to_string(spec.inChannels) +
                                     " input channels, got " + std::to_string(in.c));
            }
            if (in.h + 2 * spec.padding < spec.kernelH || in.w + 2 * spec.padding < spec.kernelW) {
                throw DimensionError("conv input " + in.str() + " smaller than its kernel");
            }
            const auto g = detail::convGeometry(spec, in.c, in.h, in.w);
            return {in.n, spec.outChannels, g.outH, g.outW};
        }
        case LayerKind::Deconv: {
            if (in.c != spec.inChannels) {
                throw DimensionError("deconv expects " + std::to_string(spec.inChannels) +
                                     " input channels, got " + std::to_string(in.c));
            }
            const Index h = (in.h - 1) * spec.stride - 2 * spec.padding + spec.kernelH + spec.outputPadding;
            const Index w = (in.w - 1) * spec.stride - 2 * spec.padding + spec.kernelW + spec.outputPadding;
            if (h < 1 || w < 1) throw DimensionError("deconv output would be empty for " + in.str());
            return {in.n, spec.outChannels, h, w};
        }
        default:
            return in;
    }
}

/// Forward pass of a single layer.
template <typename Scalar>
Tensor4<Scalar> forward(const Layer<Scalar>& layer, const Tensor4<Scalar>& x) {
    using Matrix = typename Tensor4<Scalar>::Matrix;
    const auto& s = layer.spec;
    Tensor4<Scalar> y(layer.outputShape(x.shape()));
    switch (s.kind) {
        case LayerKind::Conv: {
            const auto g = detail::convGeometry(s, x.c(), x.h(), x.w());
            const auto weights = detail::weightMatrix(layer);
            Matrix cols;
            for (Index n = 0; n < x.n(); ++n) {
                detail::im2col<Scalar>(x.sample(n), g, cols);
                auto out = y.sample(n);
                out.noalias() = weights * cols;
                out.colwise() += layer.bias.values();
            }
            break;
        }
        case LayerKind::Deconv: {
            const auto g = detail::convGeometry(s, y.c(), y.h(), y.w());
            const auto weights = detail::weightMatrix(layer);
            Matrix cols;
            for (Index n = 0; n < x.n(); ++n) {
                cols.noalias() = weights.transpose() * x.sample(n);
                auto out = y.sample(n);
                detail::col2im<Scalar>(cols, g, out);
                out.colwise() += layer.bias.values();
            }
            break;
        }
        case LayerKind::Relu:
            y.values() = x.values().cwiseMax(Scalar(0));
            break;
        case LayerKind::Sigmoid:
            y.values() = x.values().unaryExpr([](Scalar v) { return detail::sigmoid(v); });
            break;
        case LayerKind::Softplus:
            y.values() = x.values().unaryExpr([](Scalar v) { return detail::softplus(v); });
            break;
        case LayerKind::Concat:
            throw DimensionError("concat joins two tensors; use concatChannels");
    }
    return y;
}

/// Gradient with respect to the layer input; parameter gradients are
/// accumulated into `layer.weight.grad()` and `layer.bias.grad()`.
template <typename Scalar>
Tensor4<Scalar> backward(Layer<Scalar>& layer, const Tensor4<Scalar>& x,
                         const Tensor4<Scalar>& gradOut) {
    using Matrix = typename Tensor4<Scalar>::Matrix;
    const auto& s = layer.spec;
    requireShape(gradOut, layer.outputShape(x.shape()), "backward gradOut");
    Tensor4<Scalar> gradIn(x.shape());
    switch (s.kind) {
        case LayerKind::Conv: {
            const auto g = detail::convGeometry(s, x.c(), x.h(), x.w());
            const auto weights = detail::weightMatrix(layer);
            auto weightGrad = detail::weightGradMatrix(layer);
            auto& biasGrad = layer.bias.grad();
            Matrix cols, gradCols;
            for (Index n = 0; n < x.n(); ++n) {
                const auto go = gradOut.sample(n);
                detail::im2col<Scalar>(x.sample(n), g, cols);
                weightGrad.noalias() += go * cols.transpose();
                biasGrad += go.rowwise().sum();
                gradCols.noalias() = weights.transpose() * go;
                detail::col2im<Scalar>(gradCols, g, gradIn.sample(n));
            }
            break;
        }
        case LayerKind::Deconv: {
            const auto g = detail::convGeometry(s, gradOut.c(), gradOut.h(), gradOut.w());
            const auto weights = detail::weightMatrix(layer);
            auto weightGrad = detail::weightGradMatrix(layer);
            auto& biasGrad = layer.bias.grad();
            Matrix gradCols;
            for (Index n = 0; n < x.n(); ++n) {
                const auto go = gradOut.sample(n);
                detail::im2col<Scalar>(go, g, gradCols);
                weightGrad.noalias() += x.sample(n) * gradCols.transpose();
                biasGrad += go.rowwise().sum();
                gradIn.sample(n).noalias() = weights * gradCols;
            }
            break;
        }
        case LayerKind::Relu:
            gradIn.values() = (x.values().array() > Scalar(0)).select(gradOut.values(), Scalar(0));
            break;
        case LayerKind::Sigmoid:
            gradIn.values() = gradOut.values().binaryExpr(x.values(), [](Scalar g, Scalar v) {
                const Scalar sv = detail::sigmoid(v);
                return g * sv * (Scalar(1) - sv);
            });
            break;
        case LayerKind::Softplus:
            gradIn.values() = gradOut.values().binaryExpr(
                x.values(), [](Scalar g, Scalar v) { return g * detail::sigmoid(v); });
            break;
        case LayerKind::Concat:
            throw DimensionError("concat joins two tensors; use splitChannels");
    }
    return gradIn;
}

/// Stack `a` and `b` along the channel axis.
template <typename Scalar>
Tensor4<Scalar> concatChannels(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
        throw DimensionError("concat of " + a.shape().str() + " and " + b.shape().str());
    }
    Tensor4<Scalar> out(a.n(), a.c() + b.c(), a.h(), a.w());
    for (Index n = 0; n < a.n(); ++n) {
        out.sample(n).topRows(a.c()) = a.sample(n);
        out.sample(n).bottomRows(b.c()) = b.sample(n);
    }
    return out;
}

/// Backward of concatChannels: split a gradient after `firstChannels` channels.
template <typename Scalar>
std::pair<Tensor4<Scalar>, Tensor4<Scalar>> splitChannels(const Tensor4<Scalar>& g,
                                                          Index firstChannels) {
    if (firstChannels < 0 || firstChannels > g.c()) {
        throw DimensionError("cannot split " + g.shape().str() + " after channel " +
                             std::to_string(firstChannels));
    }
    Tensor4<Scalar> a(g.n(), firstChannels, g.h(), g.w());
    Tensor4<Scalar> b(g.n(), g.c() - firstChannels, g.h(), g.w());
    for (Index n = 0; n < g.n(); ++n) {
        a.sample(n) = g.sample(n).topRows(firstChannels);
        b.sample(n) = g.sample(n).bottomRows(g.c() - firstChannels);
    }
    return {std::move(a), std::move(b)};
}

inline std::string layerKindName(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv: return "conv";
        case LayerKind::Deconv: return "deconv";
        case LayerKind::Relu: return "relu";
        case LayerKind::Sigmoid: return "sigmoid";
        case LayerKind::Softplus: return "softplus";
        case LayerKind::Concat: return "concat";
    }
    return "unknown";
}

}  // namespace crfsim::nn

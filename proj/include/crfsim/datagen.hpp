#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crfsim/energy.hpp"

namespace crfsim {

class MaskError : public Error {
public:
    using Error::Error;
};

enum class ShapeKind : std::uint8_t { Ellipse, RoundedRect, Blob };

struct SceneMeta {
    std::vector<ShapeKind> kinds;
    std::vector<std::array<double, 3>> objectColors;  ///< one per shape
    std::array<double, 3> backgroundA{};
    std::array<double, 3> backgroundB{};
    int attempts = 0;  ///< rejection-sampling rounds used
};

struct SyntheticScene {
    ColorImage image;
    Labeling mask;
    std::uint64_t seed = 0;
    SceneMeta meta;

    double objectFraction() const { return mask.cast<double>().mean(); }
};

struct SceneOptions {
    double noiseSigma = 0.05;
};

inline constexpr double kMinObjectFraction = 0.02;
inline constexpr double kMaxObjectFraction = 0.80;

/// 1-3 smooth shapes of a distinct color over a textured background plus
/// Gaussian pixel noise. Bit-exact for a given seed.
SyntheticScene generateScene(std::uint64_t seed, Eigen::Index height, Eigen::Index width,
                             const SceneOptions& options = {});

/// Object probability from 16-bin-per-channel color histograms fitted to the
/// mask (foreground) and its complement (background), Laplace smoothed.
GridD histogramUnary(const ColorImage& image, const Labeling& mask, int bins = 16);

/// Histogram unary with a random rectangle covering 10-50% of the image as
/// pseudo-foreground.
GridD randomRectUnary(const ColorImage& image, std::uint64_t seed);

/// The rectangle randomRectUnary uses, as a mask.
Labeling randomRectMask(Eigen::Index height, Eigen::Index width, std::uint64_t seed);

/// Imperfect saliency-style map: Gaussian-blurred mask plus smooth noise,
/// clamped to [0.02, 0.98].
GridD saliencyLikeUnary(const Labeling& mask, std::uint64_t seed);

/// {0, 1, g, g^2, ..., maxLambda}: zero followed by a geometric grid from 1 to
/// maxLambda, dense at the low end.
std::vector<double> lambdaSchedule(int count = 30, double maxLambda = 400.0);

/// Mixes a base seed with a stream index (splitmix64).
std::uint64_t deriveSeed(std::uint64_t base, std::uint64_t stream);

}  // namespace crfsim

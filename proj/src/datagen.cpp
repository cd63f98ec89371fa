#include "crfsim/datagen.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace crfsim {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniformInt(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

struct Shape {
    ShapeKind kind;
    double cy, cx;
    double ry, rx;       // semi-axes / half sizes
    double angle;        // ellipse rotation
    double corner;       // rounded-rect corner radius
    std::vector<std::array<double, 3>> circles;  // blob: (cy, cx, r)

    bool contains(double y, double x) const {
        switch (kind) {
            case ShapeKind::Ellipse: {
                const double dy = y - cy, dx = x - cx;
                const double c = std::cos(angle), s = std::sin(angle);
                const double u = (c * dx + s * dy) / rx;
                const double v = (-s * dx + c * dy) / ry;
                return u * u + v * v <= 1.0;
            }
            case ShapeKind::RoundedRect: {
                const double qy = std::abs(y - cy) - (ry - corner);
                const double qx = std::abs(x - cx) - (rx - corner);
                const double oy = std::max(qy, 0.0), ox = std::max(qx, 0.0);
                return std::sqrt(oy * oy + ox * ox) + std::min(std::max(qy, qx), 0.0) <= corner;
            }
            case ShapeKind::Blob:
                for (const auto& c : circles) {
                    const double dy = y - c[0], dx = x - c[1];
                    if (dy * dy + dx * dx <= c[2] * c[2]) return true;
                }
                return false;
        }
        return false;
    }
};

Shape randomShape(Rng& rng, double h, double w) {
    const double size = std::min(h, w);
    Shape s{};
    s.kind = static_cast<ShapeKind>(uniformInt(rng, 0, 2));
    s.cy = uniform(rng, 0.2 * h, 0.8 * h);
    s.cx = uniform(rng, 0.2 * w, 0.8 * w);
    s.ry = uniform(rng, 0.1, 0.28) * size;
    s.rx = uniform(rng, 0.1, 0.28) * size;
    s.angle = uniform(rng, 0.0, std::numbers::pi);
    s.corner = uniform(rng, 0.2, 0.9) * std::min(s.ry, s.rx);
    if (s.kind == ShapeKind::Blob) {
        const int n = uniformInt(rng, 3, 5);
        for (int i = 0; i < n; ++i) {
            const double r = uniform(rng, 0.06, 0.16) * size;
            s.circles.push_back({s.cy + uniform(rng, -0.12, 0.12) * size,
                                 s.cx + uniform(rng, -0.12, 0.12) * size, r});
        }
    }
    return s;
}

std::array<double, 3> randomColor(Rng& rng, double lo, double hi) {
    return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

// Object color at Euclidean distance `contrast` from `base`, kept in [0.05, 0.95].
std::array<double, 3> offsetColor(Rng& rng, const std::array<double, 3>& base, double contrast) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (;;) {
        std::array<double, 3> dir{n(rng), n(rng), n(rng)};
        const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
        if (norm < 1e-6) continue;
        std::array<double, 3> out{};
        bool inside = true;
        for (int c = 0; c < 3; ++c) {
            out[c] = base[c] + contrast * dir[c] / norm;
            inside = inside && out[c] >= 0.05 && out[c] <= 0.95;
        }
        if (inside) return out;
    }
}

GridD gaussianBlur(const GridD& in, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;

    const Eigen::Index h = in.rows(), w = in.cols();
    auto clampIdx = [](Eigen::Index i, Eigen::Index n) {
        return std::min<Eigen::Index>(std::max<Eigen::Index>(i, 0), n - 1);
    };
    GridD tmp(h, w), out(h, w);
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * in(r, clampIdx(c + i, w));
            tmp(r, c) = acc;
        }
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp(clampIdx(r + i, h), c);
            out(r, c) = acc;
        }
    return out;
}

}  // namespace

std::uint64_t deriveSeed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

SyntheticScene generateScene(std::uint64_t seed, Eigen::Index height, Eigen::Index width,
                             const SceneOptions& options) {
    if (height < 16 || width < 16) {
        throw DimensionError("scenes need at least 16x16 pixels, got " + dimsString(height, width));
    }
    Rng rng(seed);
    const double h = static_cast<double>(height), w = static_cast<double>(width);

    for (int attempt = 1;; ++attempt) {
        SyntheticScene scene;
        scene.seed = seed;
        scene.meta.attempts = attempt;
        scene.meta.backgroundA = randomColor(rng, 0.2, 0.8);
        scene.meta.backgroundB = offsetColor(rng, scene.meta.backgroundA, uniform(rng, 0.04, 0.1));
        const double fy = uniform(rng, 0.5, 2.0) * 2.0 * std::numbers::pi / h;
        const double fx = uniform(rng, 0.5, 2.0) * 2.0 * std::numbers::pi / w;
        const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);

        const double contrast = uniform(rng, 0.12, 0.2);
        const auto objectBase = offsetColor(rng, scene.meta.backgroundA, contrast);
        const int count = uniformInt(rng, 1, 3);
        std::vector<Shape> shapes;
        for (int i = 0; i < count; ++i) {
            shapes.push_back(randomShape(rng, h, w));
            scene.meta.kinds.push_back(shapes.back().kind);
            scene.meta.objectColors.push_back(offsetColor(rng, objectBase, 0.03));
        }

        scene.image = ColorImage(height, width);
        scene.mask = Labeling::Zero(height, width);
        for (Eigen::Index r = 0; r < height; ++r) {
            for (Eigen::Index c = 0; c < width; ++c) {
                const double y = static_cast<double>(r) + 0.5, x = static_cast<double>(c) + 0.5;
                int owner = -1;
                for (int i = 0; i < count; ++i)
                    if (shapes[i].contains(y, x)) owner = i;
                std::array<double, 3> color{};
                if (owner >= 0) {
                    scene.mask(r, c) = 1;
                    color = scene.meta.objectColors[owner];
                } else {
                    const double t = 0.5 + 0.5 * std::sin(fy * y + fx * x + phase);
                    for (int k = 0; k < 3; ++k)
                        color[k] = scene.meta.backgroundA[k] +
                                   t * (scene.meta.backgroundB[k] - scene.meta.backgroundA[k]);
                }
                for (int k = 0; k < 3; ++k) scene.image.channels[k](r, c) = color[k];
            }
        }

        if (options.noiseSigma > 0.0) {
            std::normal_distribution<double> noise(0.0, options.noiseSigma);
            for (auto& ch : scene.image.channels)
                for (Eigen::Index i = 0; i < ch.size(); ++i)
                    ch(i) = std::clamp(ch(i) + noise(rng), 0.0, 1.0);
        }

        const double fraction = scene.objectFraction();
        if (fraction >= kMinObjectFraction && fraction <= kMaxObjectFraction) return scene;
    }
}

GridD histogramUnary(const ColorImage& image, const Labeling& mask, int bins) {
    if (mask.rows() != image.rows() || mask.cols() != image.cols()) {
        throw DimensionError("mask " + dimsString(mask.rows(), mask.cols()) + " vs image " +
                             dimsString(image.rows(), image.cols()));
    }
    if (bins < 1) throw ConfigError("histogram needs at least one bin");
    const Eigen::Index n = mask.size();
    const Eigen::Index fgCount = (mask != 0).count();
    if (fgCount == 0 || fgCount == n) {
        throw MaskError("histogram unary needs both foreground and background pixels");
    }

    auto binOf = [bins](double v) {
        return std::clamp(static_cast<int>(std::floor(v * bins)), 0, bins - 1);
    };

    // counts[fg][channel][bin], starting from the +1 Laplace prior
    std::array<std::array<std::vector<double>, 3>, 2> hist;
    for (auto& side : hist)
        for (auto& ch : side) ch.assign(static_cast<std::size_t>(bins), 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int side = mask(i) ? 1 : 0;
        for (int c = 0; c < 3; ++c) hist[side][c][binOf(image.channels[c](i))] += 1.0;
    }
    const double totals[2] = {static_cast<double>(n - fgCount + bins),
                              static_cast<double>(fgCount + bins)};

    GridD prob(image.rows(), image.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        double like[2] = {1.0, 1.0};
        for (int side = 0; side < 2; ++side)
            for (int c = 0; c < 3; ++c)
                like[side] *= hist[side][c][binOf(image.channels[c](i))] / totals[side];
        prob(i) = like[1] / (like[1] + like[0]);
    }
    return prob;
}

Labeling randomRectMask(Eigen::Index height, Eigen::Index width, std::uint64_t seed) {
    if (height < 16 || width < 16) {
        throw DimensionError("random rectangles need at least 16x16 pixels, got " +
                             dimsString(height, width));
    }
    Rng rng(seed);
    const double area = static_cast<double>(height * width);
    for (;;) {
        const double fraction = uniform(rng, 0.1, 0.5);
        const double aspect = uniform(rng, 0.5, 2.0);
        const auto rh = std::clamp<Eigen::Index>(
            std::lround(std::sqrt(fraction * area * aspect)), 1, height);
        const auto rw = std::clamp<Eigen::Index>(
            std::lround(fraction * area / static_cast<double>(rh)), 1, width);
        const double covered = static_cast<double>(rh * rw) / area;
        if (covered < 0.1 || covered > 0.5) continue;
        const auto top = static_cast<Eigen::Index>(uniformInt(rng, 0, static_cast<int>(height - rh)));
        const auto left = static_cast<Eigen::Index>(uniformInt(rng, 0, static_cast<int>(width - rw)));
        Labeling mask = Labeling::Zero(height, width);
        mask.block(top, left, rh, rw).setOnes();
        return mask;
    }
}

GridD randomRectUnary(const ColorImage& image, std::uint64_t seed) {
    return histogramUnary(image, randomRectMask(image.rows(), image.cols(), seed));
}

GridD saliencyLikeUnary(const Labeling& mask, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    GridD white(mask.rows(), mask.cols());
    for (Eigen::Index i = 0; i < white.size(); ++i) white(i) = n(rng);
    GridD smooth = gaussianBlur(white, 4.0);
    const double sd = std::sqrt((smooth - smooth.mean()).square().mean());
    if (sd > 0.0) smooth = (smooth - smooth.mean()) / sd;
    const GridD blurred = gaussianBlur(mask.cast<double>(), 2.0);
    return (blurred + 0.25 * smooth).max(0.02).min(0.98);
}

std::vector<double> lambdaSchedule(int count, double maxLambda) {
    if (count < 2) throw ConfigError("lambda schedule needs at least two values");
    if (!(maxLambda > 0.0)) throw ConfigError("maximum lambda must be positive");
    std::vector<double> out{0.0};
    if (count == 2) {
        out.push_back(maxLambda);
        return out;
    }
    if (!(maxLambda > 1.0)) throw ConfigError("a geometric schedule from 1 needs maxLambda > 1");
    const int steps = count - 2;
    const double ratio = std::pow(maxLambda, 1.0 / steps);
    for (int k = 0; k < steps; ++k) out.push_back(std::pow(ratio, k));
    out.push_back(maxLambda);
    return out;
}

}  // namespace crfsim

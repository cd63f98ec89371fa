#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "crfsim/energy.hpp"

namespace crfsim::testing {

/// Random grid instance with unaries in [0, maxUnary] and weights in [0, lambda].
inline CrfInstance randomInstance(std::mt19937_64& rng, Eigen::Index h, Eigen::Index w,
                                  double maxUnary, double lambda) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    UnaryField un;
    un.cost0 = GridD(h, w);
    un.cost1 = GridD(h, w);
    un.prob = GridD::Constant(h, w, 0.5);
    for (Eigen::Index i = 0; i < un.cost0.size(); ++i) {
        un.cost0(i) = maxUnary * u(rng);
        un.cost1(i) = maxUnary * u(rng);
    }
    GridD hz(h, w - 1), vt(h - 1, w);
    for (Eigen::Index i = 0; i < hz.size(); ++i) hz(i) = lambda * u(rng);
    for (Eigen::Index i = 0; i < vt.size(); ++i) vt(i) = lambda * u(rng);
    return makeInstance(std::move(un), pairwiseFromWeights(std::move(hz), std::move(vt), lambda));
}

inline Labeling randomLabeling(std::mt19937_64& rng, Eigen::Index h, Eigen::Index w) {
    std::bernoulli_distribution b(0.5);
    Labeling x(h, w);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = b(rng) ? 1 : 0;
    return x;
}

inline ColorImage randomImage(std::mt19937_64& rng, Eigen::Index h, Eigen::Index w) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ColorImage img(h, w);
    for (auto& ch : img.channels)
        for (Eigen::Index i = 0; i < ch.size(); ++i) ch(i) = u(rng);
    return img;
}

/// The 1x2 instance: cost0 = [1, 1], cost1 = [2, 3], w = 4.
inline CrfInstance tinyInstance() {
    UnaryField un;
    un.cost0 = GridD::Constant(1, 2, 1.0);
    un.cost1 = GridD(1, 2);
    un.cost1 << 2.0, 3.0;
    un.prob = GridD::Constant(1, 2, 0.5);
    return makeInstance(std::move(un),
                        pairwiseFromWeights(GridD::Constant(1, 1, 4.0), GridD(0, 2), 4.0));
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratchDir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("crfsim_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace crfsim::testing

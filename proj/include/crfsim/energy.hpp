#pragma once

#include <array>
#include <optional>

#include "crfsim/common.hpp"

namespace crfsim {

/// Three-channel color image, each channel in [0, 1].
struct ColorImage {
    std::array<GridD, 3> channels;

    ColorImage() = default;
    ColorImage(Eigen::Index rows, Eigen::Index cols) {
        for (auto& c : channels) c = GridD::Zero(rows, cols);
    }

    Eigen::Index rows() const { return channels[0].rows(); }
    Eigen::Index cols() const { return channels[0].cols(); }
};

/// Per-pixel label costs, derived from an object-probability map.
struct UnaryField {
    GridD cost0;  ///< cost of label 0 (background)
    GridD cost1;  ///< cost of label 1 (object)
    GridD prob;   ///< clamped object probability

    Eigen::Index rows() const { return prob.rows(); }
    Eigen::Index cols() const { return prob.cols(); }
};

/// Contrast-sensitive Potts weights on the 4-connected grid.
///
/// `horizontal(r, c)` couples (r, c) with (r, c + 1) and has shape H x (W - 1);
/// `vertical(r, c)` couples (r, c) with (r + 1, c) and has shape (H - 1) x W.
struct PairwiseField {
    GridD horizontal;
    GridD vertical;
    double lambda = 0.0;
    double sigma = 1.0;

    Eigen::Index rows() const { return vertical.rows() + 1; }
    Eigen::Index cols() const { return horizontal.cols() + 1; }
};

struct CrfInstance {
    UnaryField unary;
    PairwiseField pairwise;

    Eigen::Index rows() const { return unary.rows(); }
    Eigen::Index cols() const { return unary.cols(); }
    Eigen::Index pixelCount() const { return rows() * cols(); }
    Eigen::Index edgeCount() const {
        return rows() * (cols() - 1) + (rows() - 1) * cols();
    }
};

struct EnergyBreakdown {
    double unaryTerm = 0.0;
    double pairwiseTerm = 0.0;
    double total = 0.0;
};

inline constexpr double kProbEpsilon = 1e-6;
inline constexpr double kSigmaSquaredFloor = 1e-8;

/// w_pq = lambda * exp(-|C_p - C_q|^2 / (2 sigma^2)). An empty `sigma` selects
/// sigma^2 = mean squared neighbour color difference (floored at 1e-8).
PairwiseField computePairwiseWeights(const ColorImage& image, double lambda,
                                     std::optional<double> sigma = std::nullopt);

/// Clamp prob to [eps, 1 - eps]; cost0 = -log(1 - prob), cost1 = -log(prob).
UnaryField unaryFromProb(const GridD& prob, double epsilon = kProbEpsilon);

/// Build a pairwise field directly from precomputed weight maps.
PairwiseField pairwiseFromWeights(GridD horizontal, GridD vertical, double lambda,
                                  double sigma = 0.0);

CrfInstance makeInstance(UnaryField unary, PairwiseField pairwise);

EnergyBreakdown evaluateEnergy(const CrfInstance& instance, const Labeling& labeling);

/// Pairwise term of `labeling` under the same contrast weights at lambda = 1.
/// Requires lambda > 0 since the unit weights are recovered as w / lambda.
double discontinuityMass(const CrfInstance& instance, const Labeling& labeling);

/// Per-pixel argmin of the unary costs, ties going to label 0.
Labeling unaryArgmin(const UnaryField& unary);

}  // namespace crfsim

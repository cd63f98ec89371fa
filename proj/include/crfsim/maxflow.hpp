#pragma once

#include <cstdint>
#include <vector>

#include "crfsim/energy.hpp"

namespace crfsim {

class OverflowError : public Error {
public:
    using Error::Error;
};

inline constexpr std::int64_t kDefaultScale = 1'000'000;

/// s-t graph for a 4-connected grid with fixed-point capacities.
///
/// Source side of the cut corresponds to label 1. Terminal links are stored per
/// pixel (row-major); n-links share the horizontal/vertical layout of
/// PairwiseField and are symmetric.
struct FlowGraph {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::vector<std::int64_t> tLinkSource;
    std::vector<std::int64_t> tLinkSink;
    std::vector<std::int64_t> horizontal;  ///< rows x (cols - 1), row-major
    std::vector<std::int64_t> vertical;    ///< (rows - 1) x cols, row-major
    std::int64_t scale = kDefaultScale;

    Eigen::Index nodeCount() const { return rows * cols; }
};

struct CutResult {
    Labeling labeling;
    double flowValue = 0.0;  ///< min-cut value in energy units
    std::int64_t augmentations = 0;
};

/// Worst-case energy error from rounding every capacity: (nodes + edges) * 0.5 / scale.
double quantizationBound(const CrfInstance& instance, std::int64_t scale = kDefaultScale);

FlowGraph buildGraph(const CrfInstance& instance, std::int64_t scale = kDefaultScale);

/// Boykov-Kolmogorov max-flow. label(p) = 1 iff p is reachable from the source
/// in the final residual graph.
CutResult minCut(const FlowGraph& graph);

/// Global minimizer of the grid energy (buildGraph followed by minCut).
CutResult optimize(const CrfInstance& instance, std::int64_t scale = kDefaultScale);

/// Exhaustive search over all 2^(H*W) labelings; requires H*W <= 20.
/// Ties resolve to the lexicographically smallest flattened labeling.
CutResult bruteForceOptimize(const CrfInstance& instance);

}  // namespace crfsim

#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crfsim/energy.hpp"

namespace crfsim {

inline constexpr double kDefaultBeta2 = 0.3;
inline constexpr double kRelDiffFloor = 1e-9;

/// Weighted F-measure of `pred` against `truth`. When `truth` has no object
/// pixels both maps are inverted first; a zero denominator scores 0.
double fMeasure(const Labeling& pred, const Labeling& truth, double beta2 = kDefaultBeta2);

/// Sample Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);

/// Pearson correlation of average ranks.
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

struct SampleEval {
    double f = 0.0;
    EnergyBreakdown sim;
    EnergyBreakdown opt;
    double lambda = 0.0;
    /// Pairwise term of the simulated labeling at unit lambda; NaN when lambda is 0.
    double simDiscontinuity = std::numeric_limits<double>::quiet_NaN();
    double quantizationBound = 0.0;

    double relDiff() const;
    /// Optimal labeling is constant although smoothing is on.
    bool emptyOptimal() const { return lambda > 0.0 && opt.pairwiseTerm == 0.0; }
};

struct LambdaBucket {
    double lambda = 0.0;
    std::size_t count = 0;
    double meanRelDiff = 0.0;
    double meanF = 0.0;
    double meanSimDiscontinuity = 0.0;
};

struct EvalReport {
    double meanF = 0.0;
    std::vector<SampleEval> perSample;
    std::optional<double> rUnary, rPairwise, rTotal;
    /// rPairwise restricted to samples whose optimal labeling is not constant.
    std::optional<double> rPairwiseNonEmpty;
    std::size_t emptyOptimalCount = 0;
    std::vector<LambdaBucket> relDiffByLambda;  ///< keyed by exact lambda, ascending
    double bottomTercileRelDiff = 0.0;          ///< samples sorted by lambda, lowest third
    double topTercileRelDiff = 0.0;
    /// Spearman of bucket lambda against bucket mean simulated discontinuity.
    std::optional<double> discontinuityTrend;
    double minEnergyMargin = 0.0;  ///< min over samples of (simTotal - optTotal + bound)
};

EvalReport energyCorrelationReport(std::span<const SampleEval> samples);

std::string reportToJson(const EvalReport& report);
std::string scatterCsv(const EvalReport& report);
/// Three side-by-side scatter panels (unary, pairwise, total): optimizer on x, simulator on y.
std::string scatterSvg(const EvalReport& report);

/// Write report.json, scatter.csv and scatter.svg into `dir`.
void writeEvalArtifacts(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace crfsim

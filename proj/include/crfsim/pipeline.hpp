#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crfsim/simulator.hpp"

namespace crfsim {

/// Synthetic (image, mask) scenes split into train/val/test.
struct SceneBenchmark {
    std::vector<SyntheticScene> train, val, test;
};

struct BenchmarkConfig {
    int trainScenes = 600;
    int valScenes = 100;
    int testScenes = 300;
    std::uint64_t seed = 0;
    Eigen::Index height = 64;
    Eigen::Index width = 64;
    SceneOptions scene;
    int threads = 1;
};

SceneBenchmark makeSceneBenchmark(const BenchmarkConfig& config);

/// Encoder-decoder from RGB to an object probability map.
Network makeUnaryNet(std::uint64_t seed);
/// Four 5x5 stride-1 convs (3-16-16-16-2), each followed by ReLU.
/// Output channel 0 is the vertical weight map, channel 1 the horizontal one.
Network makeWeightsNet(std::uint64_t seed);

TensorD imagesToTensor(std::span<const SyntheticScene* const> scenes);
TensorD masksToTensor(std::span<const SyntheticScene* const> scenes);

/// Object probabilities of `net` for each scene, as H x W grids.
std::vector<GridD> predictProbabilities(const Network& net, std::span<const SyntheticScene* const> scenes,
                                        int threads = 1);

/// Mean F-measure of the thresholded unary network against the masks.
double unaryAloneF(const Network& unaryNet, std::span<const SyntheticScene* const> scenes,
                   double threshold = 0.5, int threads = 1);

TrainResult trainUnaryNet(std::span<const SyntheticScene* const> train,
                          std::span<const SyntheticScene* const> val, const TrainConfig& config,
                          const EpochCallback& onEpoch = {});

/// Which components the end-to-end loss may update. The weights network is always trained.
struct Regime {
    std::string name;
    bool tuneUnary = true;
    bool tuneSimulator = true;
    bool randomSimulatorInit = false;

    static Regime fromName(const std::string& name);  ///< tf, tt, ft, ff or random
    static std::vector<Regime> all();
};

struct CompleteSystem {
    Network unary;
    Network weights;
    Network simulator;
};

/// Intermediate tensors of one composed forward pass.
struct ComposeTrace {
    TensorD unaryProb;  ///< N x 1 x H x W
    TensorD weights;    ///< N x 2 x H x W, (vertical, horizontal)
    TensorD simInput;   ///< raw (prob, wH, wV) planes in record layout
    TensorD prob;       ///< N x 1 x H x W
};

/// unary(image) and weights(image) feed the simulator as (prob, wH, wV) with the
/// record padding: last column of wH and last row of wV are zero.
ComposeTrace composeForward(const CompleteSystem& system, const TensorD& images);

/// Training-mode forward that caches activations for composeBackward().
ComposeTrace composeForwardTrain(CompleteSystem& system, const TensorD& images);

/// Backprop d loss / d prob through simulator, padding, weights and (when
/// `intoUnary`) the unary network, accumulating parameter gradients.
void composeBackward(CompleteSystem& system, const ComposeTrace& trace, const TensorD& gradProb,
                     bool intoUnary);

struct EndToEndResult {
    Regime regime;
    CompleteSystem system;  ///< best-validation parameters
    std::vector<EpochLog> log;
    int bestEpoch = 0;
    double bestValF = 0.0;
};

/// Train the complete system under `regime`. `pretrainedSimulator` must be given
/// unless the regime initializes the simulator randomly, and must be absent then.
EndToEndResult trainEndToEnd(const Regime& regime, const Network& pretrainedUnary,
                             const Network* pretrainedSimulator, std::span<const SyntheticScene* const> train,
                             std::span<const SyntheticScene* const> val, const TrainConfig& config,
                             const EpochCallback& onEpoch = {});

LossAndF evaluateSystem(const CompleteSystem& system, std::span<const SyntheticScene* const> scenes,
                        double threshold = 0.5, int threads = 1);

struct BaselineResult {
    double bestFixedLambda = 0.0;
    double fMeasureFixed = 0.0;
    double fMeasureOracle = 0.0;
    std::vector<double> lambdaGrid;
    std::vector<double> valFByLambda;
    std::vector<double> testFByLambda;
};

/// Graph cut on unary-network probabilities with contrast weights for each
/// lambda in the grid: best fixed lambda by validation F, and the per-image best.
BaselineResult postprocessBaseline(const Network& unaryNet, std::span<const SyntheticScene* const> val,
                                   std::span<const SyntheticScene* const> test,
                                   const std::vector<double>& lambdaGrid, int threads = 1);

template <typename T>
std::vector<const T*> pointers(const std::vector<T>& items) {
    std::vector<const T*> out;
    out.reserve(items.size());
    for (const auto& x : items) out.push_back(&x);
    return out;
}

}  // namespace crfsim

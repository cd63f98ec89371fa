#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "crfsim/dataset.hpp"
#include "crfsim/eval.hpp"
#include "crfsim/nn/sequential.hpp"

namespace crfsim {

using TensorD = nn::Tensor4<double>;
using Network = nn::Sequential<double>;

/// Spatial dims of every encoder-decoder input must be multiples of this.
inline constexpr Eigen::Index kSpatialMultiple = 16;
/// Pairwise weights are compressed as log1p(w) / log1p(kWeightScale) before the network.
inline constexpr double kWeightScale = 400.0;

/// Four stride-2 3x3 convs (16/32/64/128, ReLU) mirrored by four transposed
/// convs (ReLU between), ending in a sigmoid.
std::vector<nn::LayerSpec> encoderDecoderSpecs(int inChannels, int outChannels);

Network makeSimulator(std::uint64_t seed);

void requireSpatialMultiple(Eigen::Index height, Eigen::Index width);

/// Raw (prob, wH, wV) planes to network input; weight channels are compressed.
TensorD simulatorInputTransform(const TensorD& raw);
/// Gradient of simulatorInputTransform with respect to the raw planes.
TensorD simulatorInputTransformBackward(const TensorD& raw, const TensorD& gradOut);

TensorD stackInputs(std::span<const SampleRecord* const> records);
TensorD stackTargets(std::span<const SampleRecord* const> records);

Labeling thresholdProb(const GridD& prob, double threshold = 0.5);
GridD tensorPlane(const TensorD& t, Eigen::Index n, Eigen::Index c = 0);

struct SimulationResult {
    GridD prob;
    Labeling labeling;
};

/// Batched forward pass: raw N x 3 x H x W planes to N x 1 x H x W probabilities.
TensorD simulateBatch(const Network& model, const TensorD& raw);
SimulationResult simulate(const Network& model, const std::array<GridF, 3>& input,
                          double threshold = 0.5);

struct TrainConfig {
    int epochs = 100;
    double lr = 1e-4;
    int batchSize = 8;
    std::uint64_t seed = 1;
    double threshold = 0.5;
    int threads = 1;  ///< evaluation only; the update loop stays single-threaded
};

struct EpochLog {
    int epoch = 0;  ///< 0 is the untrained model
    double trainLoss = 0.0;
    double valLoss = 0.0;
    double valF = 0.0;
};

struct TrainResult {
    Network model;  ///< parameters of the best-validation epoch
    std::vector<EpochLog> log;
    int bestEpoch = 0;
    double bestValF = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Network input and target tensors for a list of training indices.
using BatchFn = std::function<std::pair<TensorD, TensorD>(std::span<const std::size_t>)>;
struct LossAndF {
    double loss = 0.0;
    double meanF = 0.0;
};
using EvalFn = std::function<LossAndF(const Network&)>;

/// Generic loop: Adam on mean BCE over shuffled mini-batches of `trainCount`
/// samples, epoch 0 logs the initial model, and the parameters with the best
/// `selection` F-measure are returned. `trainEval` is only used for epoch 0.
TrainResult trainNetwork(Network initial, std::size_t trainCount, const BatchFn& batchFn,
                         const EvalFn& trainEval, const EvalFn& selection, const TrainConfig& config,
                         const EpochCallback& onEpoch = {});

/// Adam on mean BCE over shuffled mini-batches. Selection uses the validation
/// set, or the training set when no validation records are given.
TrainResult trainSimulator(std::span<const SampleRecord* const> train,
                           std::span<const SampleRecord* const> val, const TrainConfig& config,
                           const EpochCallback& onEpoch = {});
TrainResult trainSimulator(const Dataset& dataset, const TrainConfig& config,
                           const EpochCallback& onEpoch = {});

std::string trainingLogCsv(const std::vector<EpochLog>& log);

LossAndF evaluateSimulator(const Network& model, std::span<const SampleRecord* const> records,
                           double threshold = 0.5, int threads = 1);

/// Per-sample F-measure and CRF energies of simulated versus optimal labelings.
std::vector<SampleEval> compareToOptimizer(const Network& model,
                                           std::span<const SampleRecord* const> records,
                                           double threshold = 0.5, int threads = 1);

/// Same comparison for externally supplied labelings (one per record).
std::vector<SampleEval> compareLabelings(std::span<const Labeling> predictions,
                                         std::span<const SampleRecord* const> records,
                                         int threads = 1);

}  // namespace crfsim

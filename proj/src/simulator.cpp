#include "crfsim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "crfsim/maxflow.hpp"
#include "crfsim/nn/adam.hpp"
#include "crfsim/nn/loss.hpp"
#include "crfsim/parallel.hpp"

namespace crfsim {

using nn::Index;

namespace {

const double kWeightLogScale = std::log1p(kWeightScale);
constexpr std::size_t kEvalChunk = 16;

}  // namespace

std::vector<nn::LayerSpec> encoderDecoderSpecs(int inChannels, int outChannels) {
    using nn::LayerKind;
    const int widths[4] = {16, 32, 64, 128};
    std::vector<nn::LayerSpec> specs;
    int prev = inChannels;
    for (int w : widths) {
        specs.push_back(nn::convSpec(prev, w, 3, 2, 1));
        specs.push_back(nn::activationSpec(LayerKind::Relu));
        prev = w;
    }
    for (int i = 2; i >= -1; --i) {
        const int next = i >= 0 ? widths[i] : outChannels;
        specs.push_back(nn::deconvSpec(prev, next, 3, 2, 1, 1));
        specs.push_back(nn::activationSpec(i >= 0 ? LayerKind::Relu : LayerKind::Sigmoid));
        prev = next;
    }
    return specs;
}

Network makeSimulator(std::uint64_t seed) {
    Network net(encoderDecoderSpecs(3, 1));
    std::mt19937_64 rng(seed);
    net.initialize(rng);
    return net;
}

void requireSpatialMultiple(Eigen::Index height, Eigen::Index width) {
    if (height < kSpatialMultiple || width < kSpatialMultiple || height % kSpatialMultiple != 0 ||
        width % kSpatialMultiple != 0) {
        throw DimensionError("encoder-decoder input must be a positive multiple of 16 on each side, got " +
                             dimsString(height, width));
    }
}

TensorD simulatorInputTransform(const TensorD& raw) {
    if (raw.c() != 3) throw DimensionError("simulator input needs 3 channels, got " + raw.shape().str());
    TensorD out = raw;
    for (Index n = 0; n < raw.n(); ++n) {
        auto s = out.sample(n);
        s.bottomRows(2) = s.bottomRows(2).unaryExpr(
            [](double w) { return std::log1p(std::max(w, 0.0)) / kWeightLogScale; });
    }
    return out;
}

TensorD simulatorInputTransformBackward(const TensorD& raw, const TensorD& gradOut) {
    nn::requireShape(gradOut, raw.shape(), "input transform gradient");
    TensorD g = gradOut;
    for (Index n = 0; n < raw.n(); ++n) {
        auto gs = g.sample(n);
        const auto rs = raw.sample(n);
        gs.bottomRows(2) = gs.bottomRows(2).binaryExpr(rs.bottomRows(2), [](double go, double w) {
            return w > 0.0 ? go / ((1.0 + w) * kWeightLogScale) : go / kWeightLogScale;
        });
    }
    return g;
}

TensorD stackInputs(std::span<const SampleRecord* const> records) {
    if (records.empty()) throw DimensionError("no records to stack");
    const Index h = records[0]->rows(), w = records[0]->cols();
    TensorD t(static_cast<Index>(records.size()), 3, h, w);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = *records[i];
        if (r.rows() != h || r.cols() != w) {
            throw DimensionError("record " + std::to_string(i) + " is " + dimsString(r.rows(), r.cols()) +
                                 ", expected " + dimsString(h, w));
        }
        for (int c = 0; c < 3; ++c) {
            const auto& plane = r.input[static_cast<std::size_t>(c)];
            auto dst = t.sample(static_cast<Index>(i)).row(c);
            for (Index p = 0; p < h * w; ++p) dst(p) = static_cast<double>(plane(p));
        }
    }
    return t;
}

TensorD stackTargets(std::span<const SampleRecord* const> records) {
    if (records.empty()) throw DimensionError("no records to stack");
    const Index h = records[0]->rows(), w = records[0]->cols();
    TensorD t(static_cast<Index>(records.size()), 1, h, w);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& target = records[i]->target;
        if (target.rows() != h || target.cols() != w) throw DimensionError("target dims differ");
        auto dst = t.sample(static_cast<Index>(i));
        for (Index p = 0; p < h * w; ++p) dst(0, p) = target(p) ? 1.0 : 0.0;
    }
    return t;
}

Labeling thresholdProb(const GridD& prob, double threshold) {
    return (prob > threshold).cast<std::uint8_t>();
}

GridD tensorPlane(const TensorD& t, Eigen::Index n, Eigen::Index c) {
    GridD out(t.h(), t.w());
    const auto s = t.sample(n);
    for (Index p = 0; p < t.h() * t.w(); ++p) out(p) = s(c, p);
    return out;
}

TensorD simulateBatch(const Network& model, const TensorD& raw) {
    requireSpatialMultiple(raw.h(), raw.w());
    return model.forward(simulatorInputTransform(raw));
}

SimulationResult simulate(const Network& model, const std::array<GridF, 3>& input, double threshold) {
    SampleRecord r;
    r.input = input;
    r.target = Labeling::Zero(input[0].rows(), input[0].cols());
    const SampleRecord* one[1] = {&r};
    const auto prob = tensorPlane(simulateBatch(model, stackInputs(one)), 0);
    return {prob, thresholdProb(prob, threshold)};
}

LossAndF evaluateSimulator(const Network& model, std::span<const SampleRecord* const> records,
                           double threshold, int threads) {
    if (records.empty()) return {};
    const std::size_t chunks = (records.size() + kEvalChunk - 1) / kEvalChunk;
    std::vector<double> loss(chunks), fsum(chunks);
    parallelFor(chunks, threads, [&](std::size_t k) {
        const auto part = records.subspan(k * kEvalChunk,
                                          std::min(kEvalChunk, records.size() - k * kEvalChunk));
        const auto prob = simulateBatch(model, stackInputs(part));
        const auto target = stackTargets(part);
        loss[k] = nn::bceLoss(prob, target).loss * static_cast<double>(part.size());
        for (std::size_t i = 0; i < part.size(); ++i) {
            fsum[k] += fMeasure(thresholdProb(tensorPlane(prob, static_cast<Index>(i)), threshold),
                                part[i]->target);
        }
    });
    const double n = static_cast<double>(records.size());
    return {std::accumulate(loss.begin(), loss.end(), 0.0) / n,
            std::accumulate(fsum.begin(), fsum.end(), 0.0) / n};
}

void validateTrainConfig(const TrainConfig& config) {
    if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (config.batchSize < 1) throw ConfigError("batch size must be >= 1");
    if (!(config.lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(config.threshold > 0.0 && config.threshold < 1.0)) {
        throw ConfigError("threshold must lie in (0, 1)");
    }
}

TrainResult trainNetwork(Network initial, std::size_t trainCount, const BatchFn& batchFn,
                         const EvalFn& trainEval, const EvalFn& selection, const TrainConfig& config,
                         const EpochCallback& onEpoch) {
    validateTrainConfig(config);
    if (trainCount == 0) throw ConfigError("training set is empty");
    TrainResult result;
    result.model = std::move(initial);
    Network& net = result.model;
    Network best = net;
    nn::AdamState<double> adam;
    adam.lr = config.lr;

    auto record = [&](EpochLog entry) {
        result.log.push_back(entry);
        if (onEpoch) onEpoch(entry);
    };
    {
        const auto tr = trainEval(net);
        const auto va = selection(net);
        record({0, tr.loss, va.loss, va.meanF});
        result.bestValF = va.meanF;
    }

    std::vector<std::size_t> order(trainCount);
    std::iota(order.begin(), order.end(), 0);
    const auto batchSize = static_cast<std::size_t>(config.batchSize);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::mt19937_64 rng(deriveSeed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);
        double lossSum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batchSize) {
            const std::span<const std::size_t> idx(order.data() + start,
                                                   std::min(batchSize, order.size() - start));
            const auto [input, target] = batchFn(idx);
            const auto loss = nn::bceLoss(net.forwardTrain(input), target);
            net.backward(loss.grad);
            nn::adamStep<double>(adam, net.parameters());
            lossSum += loss.loss * static_cast<double>(idx.size());
        }
        const auto va = selection(net);
        record({epoch, lossSum / static_cast<double>(trainCount), va.loss, va.meanF});
        if (va.meanF > result.bestValF) {
            result.bestValF = va.meanF;
            result.bestEpoch = epoch;
            best = net;
        }
    }
    result.model = std::move(best);
    return result;
}

TrainResult trainSimulator(std::span<const SampleRecord* const> train,
                           std::span<const SampleRecord* const> val, const TrainConfig& config,
                           const EpochCallback& onEpoch) {
    if (train.empty()) throw ConfigError("training set is empty");
    validateTrainConfig(config);
    const Index h = train[0]->rows(), w = train[0]->cols();
    requireSpatialMultiple(h, w);
    for (auto set : {train, val}) {
        for (const auto* r : set) {
            if (r->rows() != h || r->cols() != w) {
                throw DimensionError("dataset mixes " + dimsString(h, w) + " and " +
                                     dimsString(r->rows(), r->cols()) + " records");
            }
        }
    }
    const auto selection = val.empty() ? train : val;
    std::vector<const SampleRecord*> batch;
    auto batchFn = [&](std::span<const std::size_t> idx) {
        batch.clear();
        for (auto i : idx) batch.push_back(train[i]);
        return std::pair{simulatorInputTransform(stackInputs(batch)), stackTargets(batch)};
    };
    auto evalOn = [&](std::span<const SampleRecord* const> set) {
        return [&, set](const Network& net) {
            return evaluateSimulator(net, set, config.threshold, config.threads);
        };
    };
    return trainNetwork(makeSimulator(deriveSeed(config.seed, 0)), train.size(), batchFn,
                        evalOn(train), evalOn(selection), config, onEpoch);
}

TrainResult trainSimulator(const Dataset& dataset, const TrainConfig& config,
                           const EpochCallback& onEpoch) {
    const auto train = dataset.select(Split::Train);
    const auto val = dataset.select(Split::Val);
    return trainSimulator(train, val, config, onEpoch);
}

std::string trainingLogCsv(const std::vector<EpochLog>& log) {
    std::ostringstream out;
    out.precision(10);
    out << "epoch,trainLoss,valLoss,valF\n";
    for (const auto& e : log) out << e.epoch << ',' << e.trainLoss << ',' << e.valLoss << ',' << e.valF << '\n';
    return out.str();
}

std::vector<SampleEval> compareLabelings(std::span<const Labeling> predictions,
                                         std::span<const SampleRecord* const> records, int threads) {
    if (predictions.size() != records.size()) {
        throw DimensionError("compareLabelings: " + std::to_string(predictions.size()) +
                             " predictions for " + std::to_string(records.size()) + " records");
    }
    std::vector<SampleEval> out(records.size());
    parallelFor(records.size(), threads, [&](std::size_t i) {
        const auto& r = *records[i];
        const auto inst = instanceFromRecord(r);
        SampleEval s;
        s.lambda = r.lambda;
        s.f = fMeasure(predictions[i], r.target);
        s.sim = evaluateEnergy(inst, predictions[i]);
        s.opt = evaluateEnergy(inst, r.target);
        s.quantizationBound = quantizationBound(inst);
        if (r.lambda > 0.0) s.simDiscontinuity = discontinuityMass(inst, predictions[i]);
        out[i] = s;
    });
    return out;
}

std::vector<SampleEval> compareToOptimizer(const Network& model,
                                           std::span<const SampleRecord* const> records,
                                           double threshold, int threads) {
    std::vector<Labeling> labels(records.size());
    const std::size_t chunks = (records.size() + kEvalChunk - 1) / kEvalChunk;
    parallelFor(chunks, threads, [&](std::size_t k) {
        const std::size_t begin = k * kEvalChunk;
        const auto part = records.subspan(begin, std::min(kEvalChunk, records.size() - begin));
        const auto prob = simulateBatch(model, stackInputs(part));
        for (std::size_t i = 0; i < part.size(); ++i) {
            labels[begin + i] = thresholdProb(tensorPlane(prob, static_cast<Index>(i)), threshold);
        }
    });
    return compareLabelings(labels, records, threads);
}

}  // namespace crfsim

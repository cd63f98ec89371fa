#include "crfsim/pipeline.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "crfsim/maxflow.hpp"
#include "crfsim/nn/adam.hpp"
#include "crfsim/nn/loss.hpp"
#include "crfsim/parallel.hpp"

namespace crfsim {

using nn::Index;

namespace {

constexpr std::size_t kEvalChunk = 16;

void zeroBorderWeights(TensorD& raw) {
    const Index h = raw.h(), w = raw.w();
    for (Index n = 0; n < raw.n(); ++n) {
        for (Index r = 0; r < h; ++r) raw(n, 1, r, w - 1) = 0.0;
        for (Index c = 0; c < w; ++c) raw(n, 2, h - 1, c) = 0.0;
    }
}

/// (prob, wV, wH) network outputs to (prob, wH, wV) record planes.
TensorD simulatorPlanes(const TensorD& unaryProb, const TensorD& weights) {
    TensorD raw(unaryProb.n(), 3, unaryProb.h(), unaryProb.w());
    for (Index n = 0; n < raw.n(); ++n) {
        auto dst = raw.sample(n);
        dst.row(0) = unaryProb.sample(n).row(0);
        dst.row(1) = weights.sample(n).row(1);
        dst.row(2) = weights.sample(n).row(0);
    }
    zeroBorderWeights(raw);
    return raw;
}

std::vector<const SyntheticScene*> gather(std::span<const SyntheticScene* const> scenes,
                                          std::span<const std::size_t> idx) {
    std::vector<const SyntheticScene*> out;
    for (auto i : idx) out.push_back(scenes[i]);
    return out;
}

void requireScenes(std::span<const SyntheticScene* const> scenes, const char* what) {
    if (scenes.empty()) throw ConfigError(std::string(what) + " scene set is empty");
    const Index h = scenes[0]->mask.rows(), w = scenes[0]->mask.cols();
    requireSpatialMultiple(h, w);
    for (const auto* s : scenes) {
        if (s->mask.rows() != h || s->mask.cols() != w) {
            throw DimensionError(std::string(what) + " scenes mix " + dimsString(h, w) + " and " +
                                 dimsString(s->mask.rows(), s->mask.cols()));
        }
    }
}

/// Chunked, optionally parallel evaluation of a probability-producing function.
template <typename ProbFn>
LossAndF evaluateScenes(std::span<const SyntheticScene* const> scenes, double threshold, int threads,
                        ProbFn&& probFn) {
    if (scenes.empty()) return {};
    const std::size_t chunks = (scenes.size() + kEvalChunk - 1) / kEvalChunk;
    std::vector<double> loss(chunks), fsum(chunks);
    parallelFor(chunks, threads, [&](std::size_t k) {
        const auto part = scenes.subspan(k * kEvalChunk, std::min(kEvalChunk, scenes.size() - k * kEvalChunk));
        const TensorD prob = probFn(imagesToTensor(part));
        loss[k] = nn::bceLoss(prob, masksToTensor(part)).loss * static_cast<double>(part.size());
        for (std::size_t i = 0; i < part.size(); ++i) {
            fsum[k] += fMeasure(thresholdProb(tensorPlane(prob, static_cast<Index>(i)), threshold),
                                part[i]->mask);
        }
    });
    const double n = static_cast<double>(scenes.size());
    return {std::accumulate(loss.begin(), loss.end(), 0.0) / n,
            std::accumulate(fsum.begin(), fsum.end(), 0.0) / n};
}

}  // namespace

SceneBenchmark makeSceneBenchmark(const BenchmarkConfig& config) {
    if (config.trainScenes < 1 || config.valScenes < 1 || config.testScenes < 1) {
        throw ConfigError("benchmark needs at least one train, val and test scene");
    }
    requireSpatialMultiple(config.height, config.width);
    const auto total = static_cast<std::size_t>(config.trainScenes + config.valScenes + config.testScenes);
    std::vector<SyntheticScene> all(total);
    parallelFor(total, config.threads, [&](std::size_t i) {
        all[i] = generateScene(deriveSeed(config.seed, 0x5ce0000 + i), config.height, config.width,
                               config.scene);
    });
    SceneBenchmark b;
    const auto t = static_cast<std::ptrdiff_t>(config.trainScenes);
    const auto v = static_cast<std::ptrdiff_t>(config.valScenes);
    b.train.assign(std::make_move_iterator(all.begin()), std::make_move_iterator(all.begin() + t));
    b.val.assign(std::make_move_iterator(all.begin() + t), std::make_move_iterator(all.begin() + t + v));
    b.test.assign(std::make_move_iterator(all.begin() + t + v), std::make_move_iterator(all.end()));
    return b;
}

Network makeUnaryNet(std::uint64_t seed) {
    Network net(encoderDecoderSpecs(3, 1));
    std::mt19937_64 rng(seed);
    net.initialize(rng);
    return net;
}

Network makeWeightsNet(std::uint64_t seed) {
    std::vector<nn::LayerSpec> specs;
    const int widths[5] = {3, 16, 16, 16, 2};
    for (int i = 0; i < 4; ++i) {
        specs.push_back(nn::convSpec(widths[i], widths[i + 1], 5, 1, 2));
        specs.push_back(nn::activationSpec(nn::LayerKind::Relu));
    }
    Network net(specs);
    std::mt19937_64 rng(seed);
    net.initialize(rng);
    return net;
}

TensorD imagesToTensor(std::span<const SyntheticScene* const> scenes) {
    if (scenes.empty()) throw DimensionError("no scenes to stack");
    const Index h = scenes[0]->mask.rows(), w = scenes[0]->mask.cols();
    TensorD t(static_cast<Index>(scenes.size()), 3, h, w);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const auto& img = scenes[i]->image;
        for (int c = 0; c < 3; ++c) {
            const auto& ch = img.channels[static_cast<std::size_t>(c)];
            if (ch.rows() != h || ch.cols() != w) throw DimensionError("scene sizes differ");
            t.sample(static_cast<Index>(i)).row(c) = Eigen::Map<const Eigen::RowVectorXd>(ch.data(), h * w);
        }
    }
    return t;
}

TensorD masksToTensor(std::span<const SyntheticScene* const> scenes) {
    if (scenes.empty()) throw DimensionError("no scenes to stack");
    const Index h = scenes[0]->mask.rows(), w = scenes[0]->mask.cols();
    TensorD t(static_cast<Index>(scenes.size()), 1, h, w);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const auto& m = scenes[i]->mask;
        if (m.rows() != h || m.cols() != w) throw DimensionError("scene sizes differ");
        for (Index p = 0; p < h * w; ++p) t.values()[static_cast<Index>(i) * h * w + p] = m(p) ? 1.0 : 0.0;
    }
    return t;
}

std::vector<GridD> predictProbabilities(const Network& net, std::span<const SyntheticScene* const> scenes,
                                        int threads) {
    std::vector<GridD> out(scenes.size());
    const std::size_t chunks = (scenes.size() + kEvalChunk - 1) / kEvalChunk;
    parallelFor(chunks, threads, [&](std::size_t k) {
        const std::size_t begin = k * kEvalChunk;
        const auto part = scenes.subspan(begin, std::min(kEvalChunk, scenes.size() - begin));
        const auto prob = net.forward(imagesToTensor(part));
        for (std::size_t i = 0; i < part.size(); ++i) out[begin + i] = tensorPlane(prob, static_cast<Index>(i));
    });
    return out;
}

double unaryAloneF(const Network& unaryNet, std::span<const SyntheticScene* const> scenes,
                   double threshold, int threads) {
    return evaluateScenes(scenes, threshold, threads,
                          [&](const TensorD& images) { return unaryNet.forward(images); })
        .meanF;
}

TrainResult trainUnaryNet(std::span<const SyntheticScene* const> train,
                          std::span<const SyntheticScene* const> val, const TrainConfig& config,
                          const EpochCallback& onEpoch) {
    requireScenes(train, "training");
    const auto selection = val.empty() ? train : val;
    auto batchFn = [&](std::span<const std::size_t> idx) {
        const auto batch = gather(train, idx);
        return std::pair{imagesToTensor(batch), masksToTensor(batch)};
    };
    auto evalOn = [&](std::span<const SyntheticScene* const> set) {
        return [&, set](const Network& net) {
            return evaluateScenes(set, config.threshold, config.threads,
                                  [&](const TensorD& images) { return net.forward(images); });
        };
    };
    return trainNetwork(makeUnaryNet(deriveSeed(config.seed, 20)), train.size(), batchFn, evalOn(train),
                        evalOn(selection), config, onEpoch);
}

Regime Regime::fromName(const std::string& name) {
    std::string key = name;
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    if (key == "tf") return {"TF", true, false, false};
    if (key == "tt") return {"TT", true, true, false};
    if (key == "ft") return {"FT", false, true, false};
    if (key == "ff") return {"FF", false, false, false};
    if (key == "random") return {"Random", true, true, true};
    throw ConfigError("unknown regime '" + name + "' (expected tf, tt, ft, ff or random)");
}

std::vector<Regime> Regime::all() {
    std::vector<Regime> out;
    for (const char* n : {"tf", "tt", "ft", "ff", "random"}) out.push_back(fromName(n));
    return out;
}

ComposeTrace composeForward(const CompleteSystem& system, const TensorD& images) {
    requireSpatialMultiple(images.h(), images.w());
    ComposeTrace t;
    t.unaryProb = system.unary.forward(images);
    t.weights = system.weights.forward(images);
    t.simInput = simulatorPlanes(t.unaryProb, t.weights);
    t.prob = system.simulator.forward(simulatorInputTransform(t.simInput));
    return t;
}

ComposeTrace composeForwardTrain(CompleteSystem& system, const TensorD& images) {
    requireSpatialMultiple(images.h(), images.w());
    ComposeTrace t;
    t.unaryProb = system.unary.forwardTrain(images);
    t.weights = system.weights.forwardTrain(images);
    t.simInput = simulatorPlanes(t.unaryProb, t.weights);
    t.prob = system.simulator.forwardTrain(simulatorInputTransform(t.simInput));
    return t;
}

void composeBackward(CompleteSystem& system, const ComposeTrace& trace, const TensorD& gradProb,
                     bool intoUnary) {
    auto gradPlanes =
        simulatorInputTransformBackward(trace.simInput, system.simulator.backward(gradProb));
    zeroBorderWeights(gradPlanes);
    TensorD gradWeights(trace.weights.shape());
    TensorD gradUnary(trace.unaryProb.shape());
    for (Index n = 0; n < gradPlanes.n(); ++n) {
        const auto g = gradPlanes.sample(n);
        gradUnary.sample(n).row(0) = g.row(0);
        gradWeights.sample(n).row(0) = g.row(2);
        gradWeights.sample(n).row(1) = g.row(1);
    }
    system.weights.backward(gradWeights);
    if (intoUnary) system.unary.backward(gradUnary);
}

LossAndF evaluateSystem(const CompleteSystem& system, std::span<const SyntheticScene* const> scenes,
                        double threshold, int threads) {
    return evaluateScenes(scenes, threshold, threads,
                          [&](const TensorD& images) { return composeForward(system, images).prob; });
}

EndToEndResult trainEndToEnd(const Regime& regime, const Network& pretrainedUnary,
                             const Network* pretrainedSimulator, std::span<const SyntheticScene* const> train,
                             std::span<const SyntheticScene* const> val, const TrainConfig& config,
                             const EpochCallback& onEpoch) {
    if (regime.randomSimulatorInit && pretrainedSimulator != nullptr) {
        throw ConfigError("regime " + regime.name + " initializes the simulator randomly; "
                          "a pre-trained simulator must not be supplied");
    }
    if (!regime.randomSimulatorInit && pretrainedSimulator == nullptr) {
        throw ConfigError("regime " + regime.name + " needs a pre-trained simulator");
    }
    if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (config.batchSize < 1) throw ConfigError("batch size must be >= 1");
    requireScenes(train, "training");
    const auto selection = val.empty() ? train : val;

    EndToEndResult result;
    result.regime = regime;
    CompleteSystem& sys = result.system;
    sys.unary = pretrainedUnary;
    sys.weights = makeWeightsNet(deriveSeed(config.seed, 10));
    sys.simulator = regime.randomSimulatorInit ? makeSimulator(deriveSeed(config.seed, 11))
                                               : *pretrainedSimulator;
    nn::AdamState<double> adamUnary, adamWeights, adamSimulator;
    for (auto* a : {&adamUnary, &adamWeights, &adamSimulator}) a->lr = config.lr;

    CompleteSystem best = sys;
    auto record = [&](EpochLog e) {
        result.log.push_back(e);
        if (onEpoch) onEpoch(e);
    };
    {
        const auto tr = evaluateSystem(sys, train, config.threshold, config.threads);
        const auto va = evaluateSystem(sys, selection, config.threshold, config.threads);
        record({0, tr.loss, va.loss, va.meanF});
        result.bestValF = va.meanF;
    }

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    const auto batchSize = static_cast<std::size_t>(config.batchSize);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::mt19937_64 rng(deriveSeed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);
        double lossSum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batchSize) {
            const std::span<const std::size_t> idx(order.data() + start, std::min(batchSize, order.size() - start));
            const auto batch = gather(train, idx);
            const auto trace = composeForwardTrain(sys, imagesToTensor(batch));
            const auto loss = nn::bceLoss(trace.prob, masksToTensor(batch));
            composeBackward(sys, trace, loss.grad, regime.tuneUnary);
            nn::adamStep<double>(adamWeights, sys.weights.parameters());
            if (regime.tuneUnary) nn::adamStep<double>(adamUnary, sys.unary.parameters());
            if (regime.tuneSimulator) {
                nn::adamStep<double>(adamSimulator, sys.simulator.parameters());
            } else {
                sys.simulator.zeroGrad();
            }
            lossSum += loss.loss * static_cast<double>(idx.size());
        }
        const auto va = evaluateSystem(sys, selection, config.threshold, config.threads);
        record({epoch, lossSum / static_cast<double>(train.size()), va.loss, va.meanF});
        if (va.meanF > result.bestValF) {
            result.bestValF = va.meanF;
            result.bestEpoch = epoch;
            best = sys;
        }
    }
    result.system = std::move(best);
    return result;
}

BaselineResult postprocessBaseline(const Network& unaryNet, std::span<const SyntheticScene* const> val,
                                   std::span<const SyntheticScene* const> test,
                                   const std::vector<double>& lambdaGrid, int threads) {
    if (lambdaGrid.empty()) throw ConfigError("lambda grid is empty");
    for (double l : lambdaGrid) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambda grid values must be finite and >= 0");
    }
    if (val.empty() || test.empty()) throw ConfigError("baseline needs validation and test scenes");
    const std::size_t L = lambdaGrid.size();

    // F-measure of every (scene, lambda) pair, row-major by scene
    auto sweep = [&](std::span<const SyntheticScene* const> scenes) {
        const auto probs = predictProbabilities(unaryNet, scenes, threads);
        std::vector<double> f(scenes.size() * L);
        parallelFor(scenes.size(), threads, [&](std::size_t i) {
            const auto unary = unaryFromProb(probs[i]);
            const auto unit = computePairwiseWeights(scenes[i]->image, 1.0, std::nullopt);
            for (std::size_t k = 0; k < L; ++k) {
                const double l = lambdaGrid[k];
                auto inst = makeInstance(unary, pairwiseFromWeights(unit.horizontal * l, unit.vertical * l, l,
                                                                    unit.sigma));
                f[i * L + k] = fMeasure(optimize(inst).labeling, scenes[i]->mask);
            }
        });
        return f;
    };

    BaselineResult out;
    out.lambdaGrid = lambdaGrid;
    const auto fv = sweep(val);
    const auto ft = sweep(test);
    out.valFByLambda.assign(L, 0.0);
    out.testFByLambda.assign(L, 0.0);
    for (std::size_t i = 0; i < val.size(); ++i)
        for (std::size_t k = 0; k < L; ++k) out.valFByLambda[k] += fv[i * L + k] / static_cast<double>(val.size());
    for (std::size_t i = 0; i < test.size(); ++i)
        for (std::size_t k = 0; k < L; ++k) out.testFByLambda[k] += ft[i * L + k] / static_cast<double>(test.size());

    const auto bestK = static_cast<std::size_t>(
        std::max_element(out.valFByLambda.begin(), out.valFByLambda.end()) - out.valFByLambda.begin());
    out.bestFixedLambda = lambdaGrid[bestK];
    out.fMeasureFixed = out.testFByLambda[bestK];
    // accumulated like testFByLambda so rounding cannot put the oracle below a fixed lambda
    for (std::size_t i = 0; i < test.size(); ++i) {
        out.fMeasureOracle += *std::max_element(ft.begin() + static_cast<std::ptrdiff_t>(i * L),
                                                ft.begin() + static_cast<std::ptrdiff_t>((i + 1) * L)) /
                              static_cast<double>(test.size());
    }
    return out;
}

}  // namespace crfsim

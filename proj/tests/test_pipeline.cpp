#include <cmath>
#include <random>

#include "crfsim/nn/checkpoint.hpp"
#include "crfsim/pipeline.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace crfsim;
using crfsim::testing::randomTensor;

namespace {

const SceneBenchmark& tinyBenchmark() {
    static const SceneBenchmark b = [] {
        BenchmarkConfig config;
        config.trainScenes = 6;
        config.valScenes = 3;
        config.testScenes = 4;
        config.seed = 41;
        config.height = 32;
        config.width = 32;
        return makeSceneBenchmark(config);
    }();
    return b;
}

CompleteSystem randomSystem(std::uint64_t seed) {
    return {makeUnaryNet(seed), makeWeightsNet(seed + 1), makeSimulator(seed + 2)};
}

bool anyNonZeroGrad(Network& net) {
    for (auto* p : net.parameters())
        if (p->grad().cwiseAbs().maxCoeff() > 0.0) return true;
    return false;
}

}  // namespace

TEST_CASE("benchmark scenes are deterministic and split as requested") {
    const auto& b = tinyBenchmark();
    CHECK(b.train.size() == 6);
    CHECK(b.val.size() == 3);
    CHECK(b.test.size() == 4);
    BenchmarkConfig config;
    config.trainScenes = 6;
    config.valScenes = 3;
    config.testScenes = 4;
    config.seed = 41;
    config.height = 32;
    config.width = 32;
    config.threads = 3;
    const auto again = makeSceneBenchmark(config);
    CHECK((again.test[2].mask == b.test[2].mask).all());
    CHECK((again.train[0].image.channels[1] == b.train[0].image.channels[1]).all());
    config.testScenes = 0;
    CHECK_THROWS_AS(makeSceneBenchmark(config), ConfigError);
}

TEST_CASE("weights network preserves dims and is non-negative") {
    const auto net = makeWeightsNet(3);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        const auto x = randomTensor(rng, {2, 3, 16, 32}, -3.0, 3.0);
        const auto y = net.forward(x);
        CHECK(y.shape() == nn::Shape4{2, 2, 16, 32});
        CHECK(y.values().minCoeff() >= 0.0);
    }
}

TEST_CASE("composed system keeps dims and handles a zero image") {
    const auto sys = randomSystem(5);
    const TensorD zero(1, 3, 32, 32);
    const auto t = composeForward(sys, zero);
    CHECK(t.prob.shape() == nn::Shape4{1, 1, 32, 32});
    CHECK(t.prob.values().allFinite());
    CHECK(t.prob.values().minCoeff() > 0.0);
    CHECK(t.prob.values().maxCoeff() < 1.0);
    CHECK_THROWS_AS(composeForward(sys, TensorD(1, 3, 30, 32)), DimensionError);
}

TEST_CASE("weights network channels map to the record layout") {
    const auto sys = randomSystem(6);
    std::mt19937_64 rng(7);
    const auto images = randomTensor(rng, {1, 3, 32, 32}, 0.0, 1.0);
    const auto t = composeForward(sys, images);
    for (nn::Index r = 0; r < 32; ++r) {
        for (nn::Index c = 0; c < 32; ++c) {
            CHECK(t.simInput(0, 0, r, c) == t.unaryProb(0, 0, r, c));
            CHECK(t.simInput(0, 1, r, c) == (c == 31 ? 0.0 : t.weights(0, 1, r, c)));
            CHECK(t.simInput(0, 2, r, c) == (r == 31 ? 0.0 : t.weights(0, 0, r, c)));
        }
    }
}

TEST_CASE("gradients reach the weights network through a frozen simulator") {
    auto sys = randomSystem(8);
    std::mt19937_64 rng(9);
    const auto images = randomTensor(rng, {2, 3, 32, 32}, 0.0, 1.0);
    TensorD target(2, 1, 32, 32);
    for (nn::Index i = 0; i < target.size(); ++i) target.values()[i] = (i / 7) % 2;
    const auto trace = composeForwardTrain(sys, images);
    const auto loss = nn::bceLoss(trace.prob, target);
    composeBackward(sys, trace, loss.grad, false);
    CHECK(anyNonZeroGrad(sys.weights));
    CHECK_FALSE(anyNonZeroGrad(sys.unary));
}

TEST_CASE("composed backward matches finite differences") {
    auto sys = randomSystem(10);
    std::mt19937_64 rng(11);
    const auto images = randomTensor(rng, {1, 3, 16, 16}, 0.0, 1.0);
    TensorD target(1, 1, 16, 16);
    for (nn::Index i = 0; i < target.size(); ++i) target.values()[i] = i % 3 == 0;
    // keep the weights output away from the final ReLU kink
    sys.weights.layers()[6].bias.values().setConstant(0.5);
    const auto trace = composeForwardTrain(sys, images);
    composeBackward(sys, trace, nn::bceLoss(trace.prob, target).grad, true);
    auto lossAt = [&] { return nn::bceLoss(composeForward(sys, images).prob, target).loss; };
    double worst = 0.0;
    for (Network* net : {&sys.weights, &sys.unary}) {
        for (auto* p : {net->parameters().front(), net->parameters().back()}) {
            for (nn::Index i = 0; i < p->size(); i += std::max<nn::Index>(1, p->size() / 13)) {
                const double saved = p->values()[i];
                p->values()[i] = saved + 1e-5;
                const double up = lossAt();
                p->values()[i] = saved - 1e-5;
                const double down = lossAt();
                p->values()[i] = saved;
                worst = std::max(worst, crfsim::testing::relError(p->grad()[i], (up - down) / 2e-5));
            }
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("regimes parse by name") {
    const auto all = Regime::all();
    REQUIRE(all.size() == 5);
    CHECK(all[0].name == "TF");
    CHECK(all[0].tuneUnary);
    CHECK_FALSE(all[0].tuneSimulator);
    CHECK(Regime::fromName("FT").tuneSimulator);
    CHECK_FALSE(Regime::fromName("ft").tuneUnary);
    CHECK(Regime::fromName("random").randomSimulatorInit);
    CHECK_THROWS_AS(Regime::fromName("tx"), ConfigError);
}

TEST_CASE("frozen components stay bit identical") {
    const auto& b = tinyBenchmark();
    const auto train = pointers(b.train), val = pointers(b.val);
    const auto unary = makeUnaryNet(12);
    const auto sim = makeSimulator(13);
    TrainConfig config;
    config.epochs = 2;
    config.batchSize = 4;
    config.lr = 1e-3;

    const auto ff = trainEndToEnd(Regime::fromName("ff"), unary, &sim, train, val, config);
    CHECK(nn::encodeCheckpoint(ff.system.unary) == nn::encodeCheckpoint(unary));
    CHECK(nn::encodeCheckpoint(ff.system.simulator) == nn::encodeCheckpoint(sim));
    CHECK(ff.log.size() == 3);

    const auto tf = trainEndToEnd(Regime::fromName("tf"), unary, &sim, train, val, config);
    CHECK(nn::encodeCheckpoint(tf.system.simulator) == nn::encodeCheckpoint(sim));
    if (tf.bestEpoch > 0) CHECK(nn::encodeCheckpoint(tf.system.unary) != nn::encodeCheckpoint(unary));

    const auto random = trainEndToEnd(Regime::fromName("random"), unary, nullptr, train, val, config);
    CHECK(nn::encodeCheckpoint(random.system.simulator) != nn::encodeCheckpoint(sim));
    CHECK(nn::encodeCheckpoint(makeSimulator(deriveSeed(config.seed, 11))) != nn::encodeCheckpoint(sim));

    const auto again = trainEndToEnd(Regime::fromName("random"), unary, nullptr, train, val, config);
    CHECK(nn::encodeCheckpoint(again.system.weights) == nn::encodeCheckpoint(random.system.weights));
}

TEST_CASE("regime and checkpoint conflicts are configuration errors") {
    const auto& b = tinyBenchmark();
    const auto train = pointers(b.train);
    const auto unary = makeUnaryNet(14);
    const auto sim = makeSimulator(15);
    TrainConfig config;
    config.epochs = 1;
    CHECK_THROWS_AS(trainEndToEnd(Regime::fromName("random"), unary, &sim, train, {}, config), ConfigError);
    CHECK_THROWS_AS(trainEndToEnd(Regime::fromName("tt"), unary, nullptr, train, {}, config), ConfigError);
}

TEST_CASE("post-processing baseline identities") {
    const auto& b = tinyBenchmark();
    const auto val = pointers(b.val), test = pointers(b.test);
    const auto unary = makeUnaryNet(16);
    const auto zeroOnly = postprocessBaseline(unary, val, test, {0.0});
    CHECK(zeroOnly.bestFixedLambda == 0.0);
    CHECK(zeroOnly.fMeasureFixed == zeroOnly.fMeasureOracle);
    CHECK(zeroOnly.fMeasureFixed == doctest::Approx(unaryAloneF(unary, test)).epsilon(1e-12));

    const auto grid = lambdaSchedule(8, 50.0);
    const auto sweep = postprocessBaseline(unary, val, test, grid);
    CHECK(sweep.fMeasureOracle >= sweep.fMeasureFixed);
    CHECK(sweep.testFByLambda.size() == grid.size());
    for (double f : sweep.testFByLambda) CHECK(sweep.fMeasureOracle >= f);
    CHECK_THROWS_AS(postprocessBaseline(unary, val, test, {}), ConfigError);
    CHECK_THROWS_AS(postprocessBaseline(unary, val, test, {-1.0}), ConfigError);
}

TEST_CASE("unary network learns the synthetic masks") {
    const auto& b = tinyBenchmark();
    TrainConfig config;
    config.epochs = 30;
    config.batchSize = 2;
    config.lr = 1e-3;
    const auto res = trainUnaryNet(pointers(b.train), pointers(b.val), config);
    CHECK(res.log.back().trainLoss < res.log.front().trainLoss);
    CHECK(res.bestValF >= res.log.front().valF);
}

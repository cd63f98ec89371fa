#include <random>

#include "crfsim/maxflow.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace crfsim;
using crfsim::testing::randomInstance;
using crfsim::testing::randomLabeling;
using crfsim::testing::tinyInstance;

namespace {

CrfInstance singlePixel(double c0, double c1) {
    UnaryField u;
    u.cost0 = GridD::Constant(1, 1, c0);
    u.cost1 = GridD::Constant(1, 1, c1);
    u.prob = GridD::Constant(1, 1, 0.5);
    return makeInstance(std::move(u), pairwiseFromWeights(GridD(1, 0), GridD(0, 1), 0.0));
}

}  // namespace

TEST_CASE("buildGraph quantizes terminal and neighbour links") {
    const auto g = buildGraph(singlePixel(2.0, 3.0));
    REQUIRE(g.nodeCount() == 1);
    CHECK(g.tLinkSource[0] == 2'000'000);
    CHECK(g.tLinkSink[0] == 3'000'000);

    const auto tiny = buildGraph(tinyInstance());
    CHECK(tiny.nodeCount() == 2);
    REQUIRE(tiny.horizontal.size() == 1);
    CHECK(tiny.horizontal[0] == 4'000'000);
    CHECK(tiny.vertical.empty());

    std::mt19937_64 rng(1);
    const auto zero = buildGraph(randomInstance(rng, 4, 5, 3.0, 0.0));
    for (auto c : zero.horizontal) CHECK(c == 0);
    for (auto c : zero.vertical) CHECK(c == 0);
}

TEST_CASE("buildGraph reports overflowing capacities with the pixel") {
    auto inst = singlePixel(1.0, 1e300);
    try {
        buildGraph(inst);
        FAIL("expected overflow");
    } catch (const OverflowError& e) {
        CHECK(std::string(e.what()).find("(0, 0)") != std::string::npos);
    }
}

TEST_CASE("minCut on the 1x2 instance matches brute force") {
    const auto inst = tinyInstance();
    const auto cut = optimize(inst);
    CHECK(cut.labeling(0) == 0);
    CHECK(cut.labeling(1) == 0);
    CHECK(cut.flowValue == doctest::Approx(2.0));
    const auto bf = bruteForceOptimize(inst);
    CHECK(bf.flowValue == 2.0);
    CHECK((bf.labeling == cut.labeling).all());
}

TEST_CASE("lambda zero recovers the per-pixel argmin") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        const auto inst = randomInstance(rng, 7, 9, 5.0, 0.0);
        CHECK((optimize(inst).labeling == unaryArgmin(inst.unary)).all());
    }
    // exact ties go to background
    CHECK(optimize(singlePixel(1.5, 1.5)).labeling(0) == 0);
}

TEST_CASE("dominant pairwise terms force a constant labeling") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        auto inst = randomInstance(rng, 5, 6, 5.0, 1.0);
        const double bound = (inst.unary.cost0 - inst.unary.cost1).abs().sum();
        inst.pairwise.horizontal.setConstant(bound);
        inst.pairwise.vertical.setConstant(bound);
        inst.pairwise.lambda = bound;
        const auto x = optimize(inst).labeling;
        const bool allOne = inst.unary.cost1.sum() < inst.unary.cost0.sum();
        CHECK((x == (allOne ? 1 : 0)).all());
    }
}

TEST_CASE("brute force handles small grids and rejects large ones") {
    UnaryField u;
    u.cost0 = GridD::Constant(2, 2, 1.25);
    u.cost1 = GridD::Constant(2, 2, 1.25);
    u.prob = GridD::Constant(2, 2, 0.5);
    const auto inst =
        makeInstance(u, pairwiseFromWeights(GridD::Constant(2, 1, 3.0), GridD::Constant(1, 2, 3.0), 3.0));
    const auto bf = bruteForceOptimize(inst);
    CHECK((bf.labeling == 0).all());
    CHECK(bf.flowValue == 5.0);

    CHECK(bruteForceOptimize(singlePixel(2.0, 1.0)).labeling(0) == 1);
    CHECK(bruteForceOptimize(singlePixel(1.0, 2.0)).labeling(0) == 0);

    std::mt19937_64 rng(4);
    CHECK_THROWS_AS(bruteForceOptimize(randomInstance(rng, 3, 7, 1.0, 1.0)), DimensionError);
}

TEST_CASE("optimize agrees with brute force on random 3x3 instances") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int t = 0; t < 200; ++t) {
        const auto inst = randomInstance(rng, 3, 3, 5.0, u(rng));
        const double tol = quantizationBound(inst);
        const auto cut = optimize(inst);
        const auto bf = bruteForceOptimize(inst);
        const double e = evaluateEnergy(inst, cut.labeling).total;
        CHECK(e <= bf.flowValue + tol);
        CHECK(std::abs(cut.flowValue - e) <= tol);
    }
}

TEST_CASE("min-cut value lower-bounds random labelings") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    for (int t = 0; t < 30; ++t) {
        const Eigen::Index h = 8 + t % 9, w = 6 + t % 13;
        const auto inst = randomInstance(rng, h, w, 5.0, u(rng));
        const double tol = quantizationBound(inst);
        const auto cut = optimize(inst);
        const double best = evaluateEnergy(inst, cut.labeling).total;
        CHECK(std::abs(cut.flowValue - best) <= tol);
        for (int k = 0; k < 50; ++k) {
            CHECK(best <= evaluateEnergy(inst, randomLabeling(rng, h, w)).total + tol);
        }
        CHECK(best <= evaluateEnergy(inst, unaryArgmin(inst.unary)).total + tol);
    }
}

TEST_CASE("optimal labelings nest as lambda grows") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 10; ++t) {
        const auto base = randomInstance(rng, 12, 12, 4.0, 1.0);
        double prevMass = 1e300, prevUnary = -1.0;
        for (double lambda : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
            auto inst = base;
            inst.pairwise.horizontal *= lambda;
            inst.pairwise.vertical *= lambda;
            inst.pairwise.lambda = lambda;
            const auto x = optimize(inst).labeling;
            const double mass = discontinuityMass(inst, x);
            const double unary = evaluateEnergy(inst, x).unaryTerm;
            CHECK(mass <= prevMass + 1e-9);
            CHECK(unary >= prevUnary - 1e-9);
            prevMass = mass;
            prevUnary = unary;
        }
    }
}

TEST_CASE("minCut rejects inconsistent graphs") {
    FlowGraph g = buildGraph(tinyInstance());
    g.tLinkSink.pop_back();
    CHECK_THROWS_AS(minCut(g), DimensionError);
}

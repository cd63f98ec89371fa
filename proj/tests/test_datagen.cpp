#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "crfsim/dataset.hpp"
#include "crfsim/maxflow.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace crfsim;
namespace fs = std::filesystem;
using crfsim::testing::scratchDir;
using crfsim::testing::slurp;

namespace {

bool sameImage(const ColorImage& a, const ColorImage& b) {
    for (int c = 0; c < 3; ++c)
        if (!(a.channels[c] == b.channels[c]).all()) return false;
    return true;
}

// Two flat colors: `a` inside the mask, `b` outside.
ColorImage twoColorImage(const Labeling& mask, std::array<double, 3> a, std::array<double, 3> b) {
    ColorImage img(mask.rows(), mask.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i)
        for (int c = 0; c < 3; ++c) img.channels[c](i) = mask(i) ? a[c] : b[c];
    return img;
}

}  // namespace

TEST_CASE("scenes are reproducible from their seed") {
    const auto a = generateScene(42, 64, 64);
    const auto b = generateScene(42, 64, 64);
    CHECK(sameImage(a.image, b.image));
    CHECK((a.mask == b.mask).all());
    const auto c = generateScene(43, 64, 64);
    CHECK_FALSE(sameImage(a.image, c.image));
    CHECK_THROWS_AS(generateScene(1, 8, 64), DimensionError);
}

TEST_CASE("scene masks cover between 2% and 80% of the image") {
    for (std::uint64_t s = 0; s < 60; ++s) {
        const auto scene = generateScene(deriveSeed(99, s), 32 + 16 * (s % 3), 64);
        CHECK(scene.objectFraction() >= kMinObjectFraction);
        CHECK(scene.objectFraction() <= kMaxObjectFraction);
        CHECK(scene.meta.kinds.size() >= 1);
        CHECK(scene.meta.kinds.size() <= 3);
        for (const auto& ch : scene.image.channels) {
            CHECK(ch.minCoeff() >= 0.0);
            CHECK(ch.maxCoeff() <= 1.0);
        }
    }
}

TEST_CASE("without noise, object pixels carry their shape colors exactly") {
    const auto scene = generateScene(7, 64, 64, SceneOptions{0.0});
    for (Eigen::Index i = 0; i < scene.mask.size(); ++i) {
        if (!scene.mask(i)) continue;
        bool matched = false;
        for (const auto& color : scene.meta.objectColors) {
            matched = matched || (scene.image.channels[0](i) == color[0] &&
                                  scene.image.channels[1](i) == color[1] &&
                                  scene.image.channels[2](i) == color[2]);
        }
        REQUIRE(matched);
    }
}

TEST_CASE("histogram unary separates disjoint colors") {
    Labeling mask = Labeling::Zero(20, 20);
    mask.block(5, 5, 8, 10).setOnes();
    const auto img = twoColorImage(mask, {0.9, 0.1, 0.1}, {0.1, 0.5, 0.9});
    const GridD prob = histogramUnary(img, mask);

    // closed form with the +1 prior: per channel the matching bin holds
    // (n + 1) / (n + 16) and every other bin 1 / (n + 16)
    const double nf = 80.0, nb = 320.0;
    const double likeFgInFg = std::pow((nf + 1) / (nf + 16), 3);
    const double likeBgInFg = std::pow(1.0 / (nb + 16), 3);
    const double expectedInside = likeFgInFg / (likeFgInFg + likeBgInFg);
    const double likeFgInBg = std::pow(1.0 / (nf + 16), 3);
    const double likeBgInBg = std::pow((nb + 1) / (nb + 16), 3);
    const double expectedOutside = likeFgInBg / (likeFgInBg + likeBgInBg);

    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        const double expected = mask(i) ? expectedInside : expectedOutside;
        CHECK(prob(i) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(std::abs(prob(i) - mask(i)) < 0.05);
    }
}

TEST_CASE("histogram unary is antisymmetric under mask complement") {
    const auto scene = generateScene(11, 48, 48);
    const GridD prob = histogramUnary(scene.image, scene.mask);
    const Labeling inverse = (1 - scene.mask.cast<int>()).cast<std::uint8_t>();
    const GridD flipped = histogramUnary(scene.image, inverse);
    CHECK(((prob + flipped - 1.0).abs() < 1e-12).all());
}

TEST_CASE("histogram unary is one half when both sides share a distribution") {
    std::mt19937_64 rng(3);
    auto img = crfsim::testing::randomImage(rng, 16, 16);
    // mirror the left half onto the right half, mask = left half
    for (auto& ch : img.channels) ch.rightCols(8) = ch.leftCols(8).eval();
    Labeling mask = Labeling::Zero(16, 16);
    mask.leftCols(8).setOnes();
    const GridD prob = histogramUnary(img, mask);
    CHECK(((prob - 0.5).abs() < 1e-12).all());
}

TEST_CASE("histogram unary rejects empty or full masks") {
    ColorImage img(16, 16);
    CHECK_THROWS_AS(histogramUnary(img, Labeling::Zero(16, 16)), MaskError);
    CHECK_THROWS_AS(histogramUnary(img, Labeling::Ones(16, 16)), MaskError);
    CHECK_THROWS_AS(histogramUnary(img, Labeling::Ones(8, 16)), DimensionError);
}

TEST_CASE("random rectangles cover 10-50% and are seed-deterministic") {
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto m = randomRectMask(40, 56, s);
        const double cover = m.cast<double>().mean();
        CHECK(cover >= 0.1);
        CHECK(cover <= 0.5);
        CHECK((m == randomRectMask(40, 56, s)).all());
    }
}

TEST_CASE("random-rectangle unary favours a distinctly colored rectangle") {
    const auto rect = randomRectMask(32, 32, 5);
    const auto img = twoColorImage(rect, {0.95, 0.95, 0.1}, {0.2, 0.2, 0.6});
    const GridD prob = randomRectUnary(img, 5);
    const double inside = (prob * rect.cast<double>()).sum() / rect.cast<double>().sum();
    const double outside =
        (prob * (1 - rect.cast<double>())).sum() / (1 - rect.cast<double>()).sum();
    CHECK(inside > outside);
    CHECK(inside > 0.95);
    CHECK((prob == randomRectUnary(img, 5)).all());
}

TEST_CASE("saliency-like unary stays in [0.02, 0.98] and tracks the mask") {
    const auto scene = generateScene(21, 64, 64);
    const GridD prob = saliencyLikeUnary(scene.mask, 4);
    CHECK(prob.minCoeff() >= 0.02);
    CHECK(prob.maxCoeff() <= 0.98);
    const GridD m = scene.mask.cast<double>();
    CHECK((prob * m).sum() / m.sum() > (prob * (1 - m)).sum() / (1 - m).sum());
}

TEST_CASE("lambda schedule") {
    const auto s = lambdaSchedule();
    REQUIRE(s.size() == 30);
    CHECK(s.front() == 0.0);
    CHECK(s.back() == 400.0);
    CHECK(s[1] == 1.0);
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] > s[i - 1]);
    auto sorted = s;
    std::sort(sorted.begin(), sorted.end());
    const double median = 0.5 * (sorted[14] + sorted[15]);
    CHECK(median < 200.0);

    const auto two = lambdaSchedule(2);
    CHECK(two == std::vector<double>{0.0, 400.0});
    CHECK_THROWS_AS(lambdaSchedule(1), ConfigError);
}

TEST_CASE("record encoding round-trips bit-exactly") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<float> u(0.0f, 400.0f);
    for (int t = 0; t < 25; ++t) {
        const Eigen::Index h = 2 + t % 7, w = 2 + t % 11;
        SampleRecord rec;
        for (auto& ch : rec.input) {
            ch.resize(h, w);
            for (Eigen::Index i = 0; i < ch.size(); ++i) ch(i) = u(rng);
        }
        rec.target = crfsim::testing::randomLabeling(rng, h, w);
        rec.lambda = std::uniform_real_distribution<double>(0, 400)(rng);
        rec.unaryKind = t % 2 ? UnaryKind::Histogram : UnaryKind::SaliencyLike;

        const auto bytes = encodeRecord(rec);
        CHECK(bytes.size() == 4 + 2 + 4 + 4 + 8 + 1 + 12 * h * w + (h * w + 7) / 8);
        const auto back = decodeRecord(bytes);
        for (int c = 0; c < 3; ++c) {
            REQUIRE(back.input[c].size() == rec.input[c].size());
            CHECK(std::memcmp(back.input[c].data(), rec.input[c].data(),
                              sizeof(float) * rec.input[c].size()) == 0);
        }
        CHECK((back.target == rec.target).all());
        CHECK(std::memcmp(&back.lambda, &rec.lambda, sizeof(double)) == 0);
        CHECK(back.unaryKind == rec.unaryKind);
        CHECK(encodeRecord(back) == bytes);
    }
}

TEST_CASE("record header layout is little-endian CRFS") {
    SampleRecord rec;
    for (auto& ch : rec.input) ch = GridF::Zero(2, 3);
    rec.target = Labeling::Zero(2, 3);
    rec.target(0, 0) = 1;
    rec.target(1, 2) = 1;
    rec.lambda = 1.0;
    rec.unaryKind = UnaryKind::Histogram;
    const auto b = encodeRecord(rec);
    CHECK(std::string(b.begin(), b.begin() + 4) == "CRFS");
    CHECK(b[4] == 1);
    CHECK(b[5] == 0);
    CHECK(b[6] == 2);   // H
    CHECK(b[10] == 3);  // W
    CHECK(b[20] == 0xF0);  // 1.0 as f64 LE: 00 00 00 00 00 00 F0 3F from offset 14
    CHECK(b[21] == 0x3F);
    CHECK(b[22] == 1);     // unary kind
    CHECK(b.back() == 0x84);  // bits 0 and 5 of the 6-pixel label, MSB first
}

TEST_CASE("record decoding rejects corrupt input") {
    SampleRecord rec;
    for (auto& ch : rec.input) ch = GridF::Zero(4, 4);
    rec.target = Labeling::Zero(4, 4);
    auto bytes = encodeRecord(rec);
    auto badMagic = bytes;
    badMagic[0] = 'X';
    CHECK_THROWS_AS(decodeRecord(badMagic), IoError);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 1);
    CHECK_THROWS_AS(decodeRecord(truncated), IoError);
    CHECK_THROWS_AS(readRecord("/nonexistent/x.crfs"), IoError);
}

TEST_CASE("scene splits are a pure function of seed and count") {
    const auto a = sceneSplits(5, 50);
    CHECK(a == sceneSplits(5, 50));
    CHECK(a != sceneSplits(6, 50));
    CHECK(std::count(a.begin(), a.end(), Split::Val) == 5);
    CHECK(std::count(a.begin(), a.end(), Split::Test) == 5);
    const auto tiny = sceneSplits(1, 3);
    CHECK(std::count(tiny.begin(), tiny.end(), Split::Train) == 1);
}

TEST_CASE("buildDataset writes solved, reloadable records") {
    const auto dir = scratchDir("build");
    DatasetConfig cfg;
    cfg.sceneCount = 10;
    cfg.lambdasPerScene = 5;
    cfg.seed = 17;
    cfg.height = 32;
    cfg.width = 32;
    const auto manifest = buildDataset(cfg, dir);
    CHECK(manifest.records.size() == 100);
    CHECK(manifest.count(Split::Train) + manifest.count(Split::Val) + manifest.count(Split::Test) ==
          100);

    const auto ds = loadDataset(dir);
    REQUIRE(ds.records.size() == 100);
    std::set<std::string> files;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& rec = ds.records[i];
        files.insert(ds.manifest.records[i].file);
        CHECK(rec.lambda == ds.manifest.records[i].lambda);
        CHECK((rec.input[1].col(31) == 0.0f).all());
        CHECK((rec.input[2].row(31) == 0.0f).all());

        const auto inst = instanceFromRecord(rec);
        const double tol = quantizationBound(inst);
        const double stored = evaluateEnergy(inst, rec.target).total;
        const double fresh = evaluateEnergy(inst, optimize(inst).labeling).total;
        CHECK(std::abs(stored - fresh) <= tol);
        CHECK(stored <= evaluateEnergy(inst, unaryArgmin(inst.unary)).total + tol);
    }
    CHECK(files.size() == 100);

    // same config, fresh directory: identical bytes
    const auto dir2 = scratchDir("build2");
    buildDataset(cfg, dir2);
    CHECK(slurp(dir / "manifest.json") == slurp(dir2 / "manifest.json"));
    CHECK(slurp(dir / manifest.records[7].file) == slurp(dir2 / manifest.records[7].file));

    cfg.threads = 3;
    const auto dir3 = scratchDir("build3");
    buildDataset(cfg, dir3);
    CHECK(slurp(dir / "manifest.json") == slurp(dir3 / "manifest.json"));
    CHECK(slurp(dir / manifest.records[42].file) == slurp(dir3 / manifest.records[42].file));
    fs::remove_all(dir);
    fs::remove_all(dir2);
    fs::remove_all(dir3);
}

TEST_CASE("buildDataset validates its configuration") {
    DatasetConfig cfg;
    cfg.sceneCount = 0;
    CHECK_THROWS_AS(buildDataset(cfg, scratchDir("bad")), ConfigError);
    cfg.sceneCount = 1;
    cfg.lambdasPerScene = 31;
    CHECK_THROWS_AS(buildDataset(cfg, scratchDir("bad")), ConfigError);
}

TEST_CASE("lambda 400 flattens default scenes") {
    int constant = 0, total = 0;
    for (std::uint64_t s = 0; s < 40; ++s) {
        const auto scene = generateScene(deriveSeed(2024, s), 64, 64);
        const auto pw = computePairwiseWeights(scene.image, 400.0);
        for (const GridD& prob :
             {saliencyLikeUnary(scene.mask, s), histogramUnary(scene.image, scene.mask)}) {
            const auto x = optimize(makeInstance(unaryFromProb(prob), pw)).labeling;
            constant += (x == x(0)).all() ? 1 : 0;
            ++total;
        }
    }
    CHECK(constant >= 0.95 * total);
}

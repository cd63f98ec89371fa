#include <random>

#include "crfsim/datagen.hpp"
#include "crfsim/image_io.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace crfsim;
using crfsim::testing::scratchDir;
using crfsim::testing::slurp;

TEST_CASE("mask PNG round trip") {
    const auto dir = scratchDir("png_mask");
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(51);
    const auto mask = crfsim::testing::randomLabeling(rng, 7, 11);
    writeMaskPng(dir / "m.png", mask);
    const auto back = readMaskPng(dir / "m.png");
    CHECK(back.rows() == 7);
    CHECK(back.cols() == 11);
    CHECK((back == mask).all());
    writeMaskPng(dir / "m2.png", mask);
    CHECK(slurp(dir / "m.png") == slurp(dir / "m2.png"));
}

TEST_CASE("probability PNG keeps 16 bits") {
    const auto dir = scratchDir("png_prob");
    std::filesystem::create_directories(dir);
    GridD prob(5, 6);
    for (Eigen::Index i = 0; i < prob.size(); ++i) prob(i) = static_cast<double>(i) / 29.0;
    writeProbabilityPng(dir / "p.png", prob);
    const auto back = readProbabilityPng(dir / "p.png");
    CHECK((back - prob).abs().maxCoeff() <= 0.5 / 65535.0 + 1e-12);
    CHECK(back(0) == 0.0);
    CHECK(back(29) == 1.0);
}

TEST_CASE("color image PNG round trip at 8 bits") {
    const auto dir = scratchDir("png_rgb");
    std::filesystem::create_directories(dir);
    const auto scene = generateScene(52, 16, 24);
    writeImagePng(dir / "i.png", scene.image);
    const auto back = readImagePng(dir / "i.png");
    for (int c = 0; c < 3; ++c) {
        CHECK(back.channels[c].rows() == 16);
        CHECK((back.channels[c] - scene.image.channels[c].cwiseMax(0.0).cwiseMin(1.0)).abs().maxCoeff() <=
              0.5 / 255.0 + 1e-12);
    }
    // a gray file is read as three equal channels
    writeMaskPng(dir / "g.png", Labeling::Ones(4, 4));
    const auto gray = readImagePng(dir / "g.png");
    CHECK((gray.channels[2] == 1.0).all());
}

TEST_CASE("unreadable or mismatched PNG inputs raise IoError") {
    const auto dir = scratchDir("png_bad");
    std::filesystem::create_directories(dir);
    CHECK_THROWS_AS(readMaskPng(dir / "missing.png"), IoError);
    {
        std::ofstream(dir / "junk.png") << "not a png at all";
    }
    CHECK_THROWS_AS(readProbabilityPng(dir / "junk.png"), IoError);
    writeImagePng(dir / "rgb.png", generateScene(53, 16, 16).image);
    CHECK_THROWS_AS(readProbabilityPng(dir / "rgb.png"), IoError);
    CHECK_THROWS_AS(writeMaskPng(dir / "no" / "such" / "dir.png", Labeling::Ones(2, 2)), IoError);
}

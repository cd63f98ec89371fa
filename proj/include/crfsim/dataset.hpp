#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "crfsim/datagen.hpp"

namespace crfsim {

enum class UnaryKind : std::uint8_t { SaliencyLike = 0, Histogram = 1 };
enum class Split : std::uint8_t { Train, Val, Test };

std::string kindName(UnaryKind kind);
std::string splitName(Split split);
Split splitFromString(const std::string& name);

/// One training example for the simulator.
///
/// Channel 0 holds the object probability, channel 1 the horizontal weights
/// (column W-1 zero) and channel 2 the vertical weights (row H-1 zero). Values
/// are single precision, exactly as stored on disk.
struct SampleRecord {
    std::array<GridF, 3> input;
    Labeling target;
    double lambda = 0.0;
    std::uint64_t sourceSeed = 0;
    UnaryKind unaryKind = UnaryKind::SaliencyLike;

    Eigen::Index rows() const { return target.rows(); }
    Eigen::Index cols() const { return target.cols(); }
};

/// Pack a probability map and weight field into the three padded input channels.
std::array<GridF, 3> encodeInput(const GridD& prob, const PairwiseField& pairwise);

/// Rebuild the energy encoded by a record's input channels.
CrfInstance instanceFromRecord(const SampleRecord& record);

/// Build the instance from `prob` and `pairwise` after rounding both to the
/// single precision used on disk, solve it, and package the result.
SampleRecord makeRecord(const GridD& prob, const PairwiseField& pairwise, UnaryKind kind,
                        std::uint64_t sourceSeed);

inline constexpr std::uint16_t kRecordFormatVersion = 1;

/// "CRFS" record bytes: magic, u16 version, u32 H, u32 W, f64 lambda,
/// u8 unaryKind, f32 prob/wH/wV planes, then the target as MSB-first packed
/// bits in row-major order. Little-endian throughout.
std::vector<std::uint8_t> encodeRecord(const SampleRecord& record);
SampleRecord decodeRecord(std::span<const std::uint8_t> bytes);

void writeRecord(const std::filesystem::path& path, const SampleRecord& record);
SampleRecord readRecord(const std::filesystem::path& path);

struct ManifestEntry {
    std::string file;  ///< relative to the dataset directory
    Split split = Split::Train;
    int scene = 0;
    double lambda = 0.0;
    UnaryKind unaryKind = UnaryKind::SaliencyLike;
    std::uint64_t sourceSeed = 0;
};

struct DatasetManifest {
    int version = 1;
    std::uint64_t seed = 0;
    Eigen::Index height = 0;
    Eigen::Index width = 0;
    int sceneCount = 0;
    int lambdasPerScene = 0;
    std::vector<double> schedule;
    std::vector<ManifestEntry> records;

    std::size_t count(Split split) const;
};

struct DatasetConfig {
    int sceneCount = 100;
    int lambdasPerScene = 5;
    std::uint64_t seed = 0;
    Eigen::Index height = 64;
    Eigen::Index width = 64;
    int scheduleCount = 30;
    double maxLambda = 400.0;
    int threads = 1;
};

/// Train/val/test tag per scene, a pure function of (seed, sceneCount).
/// Roughly 80/10/10, with at least one validation and one test scene once
/// there are three or more scenes.
std::vector<Split> sceneSplits(std::uint64_t seed, int sceneCount);

/// Generate scenes, both unary kinds per scene, and solve each against a
/// per-scene random subset of the lambda schedule. Writes `manifest.json` and
/// `records/*.crfs` under `outDir`.
DatasetManifest buildDataset(const DatasetConfig& config, const std::filesystem::path& outDir);

std::string manifestToJson(const DatasetManifest& manifest);
DatasetManifest manifestFromJson(const std::string& text);
DatasetManifest readManifest(const std::filesystem::path& dir);

struct Dataset {
    DatasetManifest manifest;
    std::vector<SampleRecord> records;  ///< parallel to manifest.records
    std::vector<Split> splits;

    std::vector<const SampleRecord*> select(Split split) const;
};

Dataset loadDataset(const std::filesystem::path& dir);

}  // namespace crfsim

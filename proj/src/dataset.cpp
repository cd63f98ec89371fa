#include "crfsim/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <random>

#include "crfsim/binio.hpp"
#include "crfsim/maxflow.hpp"
#include "crfsim/parallel.hpp"
#include "json.hpp"

namespace crfsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kRecordMagic[4] = {'C', 'R', 'F', 'S'};

}  // namespace

std::string kindName(UnaryKind kind) {
    return kind == UnaryKind::Histogram ? "histogram" : "saliency_like";
}

std::string splitName(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split splitFromString(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw IoError("unknown split tag '" + name + "'");
}

std::array<GridF, 3> encodeInput(const GridD& prob, const PairwiseField& pairwise) {
    const Eigen::Index h = prob.rows(), w = prob.cols();
    if (pairwise.rows() != h || pairwise.cols() != w) {
        throw DimensionError("probability map " + dimsString(h, w) + " vs pairwise field " +
                             dimsString(pairwise.rows(), pairwise.cols()));
    }
    std::array<GridF, 3> input;
    input[0] = prob.cast<float>();
    input[1] = GridF::Zero(h, w);
    input[1].leftCols(w - 1) = pairwise.horizontal.cast<float>();
    input[2] = GridF::Zero(h, w);
    input[2].topRows(h - 1) = pairwise.vertical.cast<float>();
    return input;
}

CrfInstance instanceFromRecord(const SampleRecord& record) {
    const Eigen::Index h = record.input[0].rows(), w = record.input[0].cols();
    GridD horizontal = record.input[1].leftCols(w - 1).cast<double>();
    GridD vertical = record.input[2].topRows(h - 1).cast<double>();
    return makeInstance(unaryFromProb(record.input[0].cast<double>()),
                        pairwiseFromWeights(std::move(horizontal), std::move(vertical),
                                            record.lambda));
}

SampleRecord makeRecord(const GridD& prob, const PairwiseField& pairwise, UnaryKind kind,
                        std::uint64_t sourceSeed) {
    SampleRecord rec;
    rec.input = encodeInput(prob, pairwise);
    rec.lambda = pairwise.lambda;
    rec.sourceSeed = sourceSeed;
    rec.unaryKind = kind;
    rec.target = optimize(instanceFromRecord(rec)).labeling;
    return rec;
}

std::vector<std::uint8_t> encodeRecord(const SampleRecord& record) {
    const Eigen::Index h = record.rows(), w = record.cols();
    for (const auto& ch : record.input) {
        if (ch.rows() != h || ch.cols() != w) throw DimensionError("record channels differ in size");
    }
    ByteWriter out;
    for (char c : kRecordMagic) out.put(static_cast<std::uint8_t>(c));
    out.put(kRecordFormatVersion);
    out.put(static_cast<std::uint32_t>(h));
    out.put(static_cast<std::uint32_t>(w));
    out.put(record.lambda);
    out.put(static_cast<std::uint8_t>(record.unaryKind));
    for (const auto& ch : record.input)
        for (Eigen::Index i = 0; i < ch.size(); ++i) out.put(ch(i));
    const Eigen::Index n = h * w;
    std::vector<std::uint8_t> packed(static_cast<std::size_t>((n + 7) / 8), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (record.target(i)) packed[static_cast<std::size_t>(i / 8)] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
    out.bytes.insert(out.bytes.end(), packed.begin(), packed.end());
    return std::move(out.bytes);
}

SampleRecord decodeRecord(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes, "record");
    for (char c : kRecordMagic) {
        if (in.get<std::uint8_t>() != static_cast<std::uint8_t>(c)) throw IoError("bad record magic");
    }
    const auto version = in.get<std::uint16_t>();
    if (version != kRecordFormatVersion) {
        throw IoError("unsupported record version " + std::to_string(version));
    }
    const auto h = static_cast<Eigen::Index>(in.get<std::uint32_t>());
    const auto w = static_cast<Eigen::Index>(in.get<std::uint32_t>());
    if (h < 2 || w < 2 || h * w > (Eigen::Index{1} << 28)) {
        throw IoError("implausible record size " + dimsString(h, w));
    }
    SampleRecord rec;
    rec.lambda = in.get<double>();
    const auto kind = in.get<std::uint8_t>();
    if (kind > 1) throw IoError("unknown unary kind " + std::to_string(kind));
    rec.unaryKind = static_cast<UnaryKind>(kind);
    for (auto& ch : rec.input) {
        ch.resize(h, w);
        for (Eigen::Index i = 0; i < ch.size(); ++i) ch(i) = in.get<float>();
    }
    const Eigen::Index n = h * w;
    if (in.remaining() != static_cast<std::size_t>((n + 7) / 8)) {
        throw IoError("record label payload has the wrong length");
    }
    std::vector<std::uint8_t> packed(in.remaining());
    for (auto& b : packed) b = in.get<std::uint8_t>();
    rec.target.resize(h, w);
    for (Eigen::Index i = 0; i < n; ++i) {
        rec.target(i) = (packed[static_cast<std::size_t>(i / 8)] >> (7 - i % 8)) & 1u;
    }
    return rec;
}

void writeRecord(const fs::path& path, const SampleRecord& record) {
    writeFile(path, encodeRecord(record));
}

SampleRecord readRecord(const fs::path& path) {
    try {
        return decodeRecord(readFile(path));
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

std::size_t DatasetManifest::count(Split split) const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                  [&](const auto& r) { return r.split == split; }));
}

std::vector<Split> sceneSplits(std::uint64_t seed, int sceneCount) {
    std::vector<int> order(static_cast<std::size_t>(std::max(sceneCount, 0)));
    for (int i = 0; i < sceneCount; ++i) order[i] = i;
    std::mt19937_64 rng(deriveSeed(seed, 0x5e1));
    std::shuffle(order.begin(), order.end(), rng);

    int nVal = static_cast<int>(std::lround(0.1 * sceneCount));
    int nTest = nVal;
    if (sceneCount >= 3) {
        nVal = std::max(nVal, 1);
        nTest = std::max(nTest, 1);
    }
    std::vector<Split> out(order.size(), Split::Train);
    for (int k = 0; k < nVal; ++k) out[order[k]] = Split::Val;
    for (int k = nVal; k < nVal + nTest; ++k) out[order[k]] = Split::Test;
    return out;
}

DatasetManifest buildDataset(const DatasetConfig& config, const fs::path& outDir) {
    if (config.sceneCount < 1) throw ConfigError("scene count must be at least 1");
    const auto schedule = lambdaSchedule(config.scheduleCount, config.maxLambda);
    if (config.lambdasPerScene < 1 ||
        config.lambdasPerScene > static_cast<int>(schedule.size())) {
        throw ConfigError("lambdas per scene must be in [1, " + std::to_string(schedule.size()) + "]");
    }

    std::error_code ec;
    fs::create_directories(outDir / "records", ec);
    if (ec) throw IoError("cannot create " + (outDir / "records").string() + ": " + ec.message());

    const auto splits = sceneSplits(config.seed, config.sceneCount);
    const auto perScene = static_cast<std::size_t>(2 * config.lambdasPerScene);
    std::vector<ManifestEntry> entries(perScene * static_cast<std::size_t>(config.sceneCount));

    parallelFor(static_cast<std::size_t>(config.sceneCount), config.threads, [&](std::size_t s) {
        const std::uint64_t sceneSeed = deriveSeed(config.seed, s);
        const auto scene = generateScene(sceneSeed, config.height, config.width);

        std::vector<std::size_t> picks(schedule.size());
        for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
        std::mt19937_64 rng(deriveSeed(sceneSeed, 3));
        std::shuffle(picks.begin(), picks.end(), rng);
        picks.resize(static_cast<std::size_t>(config.lambdasPerScene));
        std::sort(picks.begin(), picks.end());

        const GridD saliency = saliencyLikeUnary(scene.mask, deriveSeed(sceneSeed, 1));
        // histogram unaries alternate between the true mask and a random rectangle
        const GridD histogram = s % 2 == 0 ? histogramUnary(scene.image, scene.mask)
                                           : randomRectUnary(scene.image, deriveSeed(sceneSeed, 2));

        std::size_t slot = s * perScene;
        for (UnaryKind kind : {UnaryKind::SaliencyLike, UnaryKind::Histogram}) {
            const GridD& prob = kind == UnaryKind::SaliencyLike ? saliency : histogram;
            for (std::size_t j = 0; j < picks.size(); ++j) {
                const double lambda = schedule[picks[j]];
                const auto rec =
                    makeRecord(prob, computePairwiseWeights(scene.image, lambda), kind,
                               sceneSeed);
                ManifestEntry& e = entries[slot++];
                char name[64];
                std::snprintf(name, sizeof(name), "records/s%05zu_%s_l%02zu.crfs", s,
                              kind == UnaryKind::Histogram ? "hist" : "sal", picks[j]);
                e.file = name;
                e.split = splits[s];
                e.scene = static_cast<int>(s);
                e.lambda = lambda;
                e.unaryKind = kind;
                e.sourceSeed = sceneSeed;
                writeRecord(outDir / e.file, rec);
            }
        }
    });

    DatasetManifest m;
    m.seed = config.seed;
    m.height = config.height;
    m.width = config.width;
    m.sceneCount = config.sceneCount;
    m.lambdasPerScene = config.lambdasPerScene;
    m.schedule = schedule;
    m.records = std::move(entries);

    const std::string text = manifestToJson(m);
    std::ofstream out(outDir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (outDir / "manifest.json").string());
    out << text;
    return m;
}

std::string manifestToJson(const DatasetManifest& m) {
    json j;
    j["version"] = m.version;
    j["seed"] = m.seed;
    j["height"] = m.height;
    j["width"] = m.width;
    j["sceneCount"] = m.sceneCount;
    j["lambdasPerScene"] = m.lambdasPerScene;
    j["schedule"] = m.schedule;
    json recs = json::array();
    for (const auto& r : m.records) {
        recs.push_back({{"file", r.file},
                        {"split", splitName(r.split)},
                        {"scene", r.scene},
                        {"lambda", r.lambda},
                        {"unaryKind", kindName(r.unaryKind)},
                        {"sourceSeed", r.sourceSeed}});
    }
    j["records"] = std::move(recs);
    return j.dump(1) + "\n";
}

DatasetManifest manifestFromJson(const std::string& text) {
    try {
        const json j = json::parse(text);
        DatasetManifest m;
        m.version = j.at("version").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.height = j.at("height").get<Eigen::Index>();
        m.width = j.at("width").get<Eigen::Index>();
        m.sceneCount = j.at("sceneCount").get<int>();
        m.lambdasPerScene = j.at("lambdasPerScene").get<int>();
        m.schedule = j.at("schedule").get<std::vector<double>>();
        for (const auto& r : j.at("records")) {
            ManifestEntry e;
            e.file = r.at("file").get<std::string>();
            e.split = splitFromString(r.at("split").get<std::string>());
            e.scene = r.at("scene").get<int>();
            e.lambda = r.at("lambda").get<double>();
            e.unaryKind = r.at("unaryKind").get<std::string>() == "histogram" ? UnaryKind::Histogram
                                                                              : UnaryKind::SaliencyLike;
            e.sourceSeed = r.at("sourceSeed").get<std::uint64_t>();
            m.records.push_back(std::move(e));
        }
        return m;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed manifest: ") + e.what());
    }
}

DatasetManifest readManifest(const fs::path& dir) {
    const auto bytes = readFile(dir / "manifest.json");
    return manifestFromJson(std::string(bytes.begin(), bytes.end()));
}

std::vector<const SampleRecord*> Dataset::select(Split split) const {
    std::vector<const SampleRecord*> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (splits[i] == split) out.push_back(&records[i]);
    return out;
}

Dataset loadDataset(const fs::path& dir) {
    Dataset ds;
    ds.manifest = readManifest(dir);
    ds.records.reserve(ds.manifest.records.size());
    for (const auto& e : ds.manifest.records) {
        auto rec = readRecord(dir / e.file);
        if (rec.rows() != ds.manifest.height || rec.cols() != ds.manifest.width) {
            throw IoError(e.file + ": size " + dimsString(rec.rows(), rec.cols()) +
                          " disagrees with the manifest");
        }
        rec.sourceSeed = e.sourceSeed;
        ds.records.push_back(std::move(rec));
        ds.splits.push_back(e.split);
    }
    return ds;
}

}  // namespace crfsim

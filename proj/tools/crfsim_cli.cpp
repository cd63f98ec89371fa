#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crfsim/binio.hpp"
#include "crfsim/image_io.hpp"
#include "crfsim/maxflow.hpp"
#include "crfsim/nn/checkpoint.hpp"
#include "crfsim/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crfsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct Common {
    std::uint64_t seed = 0;
    std::string out;
    int threads = 1;
    std::string size = "64x64";

    json toJson() const { return {{"seed", seed}, {"out", out}, {"threads", threads}, {"size", size}}; }
};

void addCommon(CLI::App* cmd, Common& c, bool withSize) {
    cmd->add_option("--seed", c.seed, "Base random seed")->capture_default_str();
    cmd->add_option("--out", c.out, "Output directory")->required();
    cmd->add_option("--threads", c.threads, "Worker threads for parallel stages")->capture_default_str();
    if (withSize) cmd->add_option("--size", c.size, "Image size HxW")->capture_default_str();
}

std::pair<Eigen::Index, Eigen::Index> parseSize(const std::string& text) {
    const auto x = text.find_first_of("xX");
    try {
        if (x == std::string::npos) throw std::invalid_argument(text);
        const long h = std::stol(text.substr(0, x));
        const long w = std::stol(text.substr(x + 1));
        if (h < 1 || w < 1) throw std::invalid_argument(text);
        return {h, w};
    } catch (const std::exception&) {
        throw ConfigError("--size must look like 64x64, got '" + text + "'");
    }
}

fs::path prepareOut(const Common& c) {
    if (c.threads < 1) throw ConfigError("--threads must be >= 1");
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec) throw IoError("cannot create output directory " + c.out + ": " + ec.message());
    return fs::path(c.out);
}

void writeRunJson(const fs::path& out, const std::string& command, const json& config,
                  const std::vector<std::string>& artifacts) {
    json run{{"command", command}, {"version", kVersionString}, {"config", config}, {"artifacts", artifacts}};
    writeText(out / "run.json", run.dump(2) + "\n");
}

Network loadNetwork(const fs::path& path, Network model) {
    if (!fs::exists(path)) throw IoError("checkpoint not found: " + path.string());
    nn::loadCheckpoint(path, model);
    return model;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmtOpt(const std::optional<double>& v) { return v ? fmt(*v) : "undefined"; }

void printEpoch(const char* tag, const EpochLog& e) {
    std::cout << tag << " epoch " << e.epoch << " trainLoss=" << fmt(e.trainLoss) << " valLoss=" << fmt(e.valLoss)
              << " valF=" << fmt(e.valF) << std::endl;
}

// ---------------------------------------------------------------- gen-data

struct GenDataOptions {
    Common common;
    int scenes = 100;
    int lambdas = 5;
    int scheduleCount = 30;
    double maxLambda = 400.0;
};

void registerGenData(CLI::App& app, GenDataOptions& o, std::function<void()>& run) {
    auto* cmd = app.add_subcommand("gen-data", "Generate synthetic scenes and graph-cut training records");
    addCommon(cmd, o.common, true);
    cmd->add_option("--scenes", o.scenes, "Number of synthetic scenes")->capture_default_str();
    cmd->add_option("--lambdas", o.lambdas, "Lambda values sampled per scene and unary kind")->capture_default_str();
    cmd->add_option("--schedule-count", o.scheduleCount, "Length of the lambda schedule")->capture_default_str();
    cmd->add_option("--max-lambda", o.maxLambda, "Largest lambda in the schedule")->capture_default_str();
    cmd->callback([&] {
        run = [&] {
            if (o.scenes < 1) throw ConfigError("--scenes must be >= 1");
            if (o.lambdas < 1 || o.lambdas > o.scheduleCount) {
                throw ConfigError("--lambdas must lie in [1, --schedule-count]");
            }
            const auto out = prepareOut(o.common);
            const auto [h, w] = parseSize(o.common.size);
            DatasetConfig config;
            config.sceneCount = o.scenes;
            config.lambdasPerScene = o.lambdas;
            config.seed = o.common.seed;
            config.height = h;
            config.width = w;
            config.scheduleCount = o.scheduleCount;
            config.maxLambda = o.maxLambda;
            config.threads = o.common.threads;
            const auto manifest = buildDataset(config, out);
            std::cout << "records train=" << manifest.count(Split::Train) << " val=" << manifest.count(Split::Val)
                      << " test=" << manifest.count(Split::Test) << " total=" << manifest.records.size()
                      << std::endl;
            json cfg = o.common.toJson();
            cfg.update({{"scenes", o.scenes},
                        {"lambdas", o.lambdas},
                        {"schedule-count", o.scheduleCount},
                        {"max-lambda", o.maxLambda}});
            writeRunJson(out, "gen-data", cfg, {"manifest.json", "records/"});
        };
    });
}

// ---------------------------------------------------------------- cut

struct CutOptions {
    Common common;
    std::string image, prob, unary = "saliency";
    std::optional<std::uint64_t> scene;
    double lambda = 0.0;
    std::optional<double> sigma;
};

void registerCut(CLI::App& app, CutOptions& o, std::function<void()>& run) {
    auto* cmd = app.add_subcommand("cut", "Solve one CRF exactly with graph cut");
    addCommon(cmd, o.common, true);
    auto* image = cmd->add_option("--image", o.image, "RGB PNG providing the contrast weights");
    auto* prob = cmd->add_option("--prob", o.prob, "Grayscale PNG of object probabilities");
    auto* scene = cmd->add_option("--scene", o.scene, "Use the synthetic scene with this seed instead");
    cmd->add_option("--unary", o.unary, "Unary for --scene: saliency or histogram")
        ->check(CLI::IsMember({"saliency", "histogram"}))
        ->capture_default_str();
    cmd->add_option("--lambda", o.lambda, "Smoothness weight")->required();
    cmd->add_option("--sigma", o.sigma, "Contrast scale; mean neighbour difference when omitted");
    image->needs(prob);
    prob->needs(image);
    scene->excludes(image)->excludes(prob);
    cmd->callback([&] {
        run = [&] {
            if (!o.scene && o.image.empty()) throw ConfigError("cut needs --image and --prob, or --scene");
            if (!(o.lambda >= 0.0)) throw ConfigError("--lambda must be >= 0");
            if (o.sigma && !(*o.sigma > 0.0)) throw ConfigError("--sigma must be > 0");
            const auto out = prepareOut(o.common);
            ColorImage img;
            GridD p;
            std::vector<std::string> artifacts{"mask.png"};
            if (o.scene) {
                const auto [h, w] = parseSize(o.common.size);
                const auto s = generateScene(*o.scene, h, w);
                img = s.image;
                p = o.unary == "histogram" ? histogramUnary(s.image, s.mask)
                                           : saliencyLikeUnary(s.mask, deriveSeed(*o.scene, 1));
                writeImagePng(out / "image.png", img);
                writeProbabilityPng(out / "prob.png", p);
                artifacts.insert(artifacts.end(), {"image.png", "prob.png"});
            } else {
                img = readImagePng(o.image);
                p = readProbabilityPng(o.prob);
                if (p.rows() != img.channels[0].rows() || p.cols() != img.channels[0].cols()) {
                    throw DimensionError("probability map " + dimsString(p.rows(), p.cols()) + " vs image " +
                                         dimsString(img.channels[0].rows(), img.channels[0].cols()));
                }
            }
            const auto pairwise = computePairwiseWeights(img, o.lambda, o.sigma);
            const auto inst = makeInstance(unaryFromProb(p), pairwise);
            const auto cut = optimize(inst);
            writeMaskPng(out / "mask.png", cut.labeling);
            const auto e = evaluateEnergy(inst, cut.labeling);
            const json line{{"unaryTerm", e.unaryTerm},
                            {"pairwiseTerm", e.pairwiseTerm},
                            {"total", e.total},
                            {"lambda", o.lambda},
                            {"sigma", pairwise.sigma},
                            {"objectPixels", (cut.labeling != 0).count()}};
            std::cout << line.dump() << std::endl;
            json cfg = o.common.toJson();
            cfg.update({{"image", o.image},
                        {"prob", o.prob},
                        {"scene", o.scene ? json(*o.scene) : json(nullptr)},
                        {"unary", o.unary},
                        {"lambda", o.lambda},
                        {"sigma", o.sigma ? json(*o.sigma) : json(nullptr)},
                        {"resolvedSigma", pairwise.sigma}});
            writeRunJson(out, "cut", cfg, artifacts);
        };
    });
}

// ---------------------------------------------------------------- train-sim

struct TrainOptions {
    int epochs = 100;
    double lr = 1e-4;
    int batch = 8;
    double threshold = 0.5;

    TrainConfig config(const Common& c) const {
        TrainConfig t;
        t.epochs = epochs;
        t.lr = lr;
        t.batchSize = batch;
        t.threshold = threshold;
        t.seed = c.seed;
        t.threads = c.threads;
        return t;
    }
    json toJson() const { return {{"epochs", epochs}, {"lr", lr}, {"batch", batch}, {"threshold", threshold}}; }
};

void addTrainOptions(CLI::App* cmd, TrainOptions& t) {
    cmd->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--lr", t.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--batch", t.batch, "Mini-batch size")->capture_default_str();
    cmd->add_option("--threshold", t.threshold, "Probability threshold for labelings")->capture_default_str();
}

struct TrainSimOptions {
    Common common;
    TrainOptions train;
    std::string data;
};

void registerTrainSim(CLI::App& app, TrainSimOptions& o, std::function<void()>& run) {
    auto* cmd = app.add_subcommand("train-sim", "Train the CRF simulator on a generated dataset");
    addCommon(cmd, o.common, false);
    addTrainOptions(cmd, o.train);
    cmd->add_option("--data", o.data, "Dataset directory from gen-data")->required();
    cmd->callback([&] {
        run = [&] {
            const auto out = prepareOut(o.common);
            const auto dataset = loadDataset(o.data);
            const auto result = trainSimulator(dataset, o.train.config(o.common),
                                               [](const EpochLog& e) { printEpoch("sim", e); });
            nn::saveCheckpoint(out / "simulator.crfw", result.model);
            writeText(out / "train_log.csv", trainingLogCsv(result.log));
            std::cout << "best epoch " << result.bestEpoch << " valF=" << fmt(result.bestValF) << std::endl;
            json cfg = o.common.toJson();
            cfg.update(o.train.toJson());
            cfg["data"] = o.data;
            writeRunJson(out, "train-sim", cfg, {"simulator.crfw", "train_log.csv"});
        };
    });
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
    Common common;
    std::string data, checkpoint, split = "test";
    bool self = false;
    double threshold = 0.5;
};

void registerEval(CLI::App& app, EvalOptions& o, std::function<void()>& run) {
    auto* cmd = app.add_subcommand("eval", "Compare simulated labelings with graph-cut optima");
    addCommon(cmd, o.common, false);
    cmd->add_option("--data", o.data, "Dataset directory from gen-data")->required();
    auto* ckpt = cmd->add_option("--checkpoint", o.checkpoint, "Simulator checkpoint");
    auto* self = cmd->add_flag("--self", o.self, "Use the stored optimal labelings as predictions");
    ckpt->excludes(self);
    cmd->add_option("--split", o.split, "train, val, test or all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}))
        ->capture_default_str();
    cmd->add_option("--threshold", o.threshold, "Probability threshold")->capture_default_str();
    cmd->callback([&] {
        run = [&] {
            if (!o.self && o.checkpoint.empty()) throw ConfigError("eval needs --checkpoint or --self");
            const auto out = prepareOut(o.common);
            const auto dataset = loadDataset(o.data);
            std::vector<const SampleRecord*> records;
            if (o.split == "all") {
                records = pointers(dataset.records);
            } else {
                records = dataset.select(splitFromString(o.split));
            }
            if (records.empty()) throw ConfigError("split '" + o.split + "' has no records");
            std::vector<SampleEval> samples;
            if (o.self) {
                std::vector<Labeling> targets;
                for (const auto* r : records) targets.push_back(r->target);
                samples = compareLabelings(targets, records, o.common.threads);
            } else {
                const auto model = loadNetwork(o.checkpoint, makeSimulator(0));
                samples = compareToOptimizer(model, records, o.threshold, o.common.threads);
            }
            const auto report = energyCorrelationReport(samples);
            writeEvalArtifacts(report, out);
            std::cout << "meanF=" << fmt(report.meanF) << " rUnary=" << fmtOpt(report.rUnary)
                      << " rPairwise=" << fmtOpt(report.rPairwise) << " rTotal=" << fmtOpt(report.rTotal)
                      << " samples=" << samples.size() << std::endl;
            json cfg = o.common.toJson();
            cfg.update({{"data", o.data},
                        {"checkpoint", o.checkpoint},
                        {"self", o.self},
                        {"split", o.split},
                        {"threshold", o.threshold}});
            writeRunJson(out, "eval", cfg, {"report.json", "scatter.csv", "scatter.svg"});
        };
    });
}

// ------------------------------------------------ shared benchmark options

struct BenchOptions {
    int trainScenes = 1500;
    int valScenes = 300;
    int testScenes = 300;
    double noise = 0.05;
    std::string unary;
    int unaryEpochs = 40;
    double unaryLr = 1e-3;

    json toJson() const {
        return {{"train-scenes", trainScenes}, {"val-scenes", valScenes}, {"test-scenes", testScenes},
                {"noise", noise},             {"unary", unary},           {"unary-epochs", unaryEpochs},
                {"unary-lr", unaryLr}};
    }
};

void addBenchOptions(CLI::App* cmd, BenchOptions& b) {
    cmd->add_option("--train-scenes", b.trainScenes, "Benchmark training scenes")->capture_default_str();
    cmd->add_option("--val-scenes", b.valScenes, "Benchmark validation scenes")->capture_default_str();
    cmd->add_option("--test-scenes", b.testScenes, "Benchmark test scenes")->capture_default_str();
    cmd->add_option("--noise", b.noise, "Pixel noise sigma of benchmark scenes")->capture_default_str();
    cmd->add_option("--unary", b.unary, "Pre-trained unary network; trained here when omitted");
    cmd->add_option("--unary-epochs", b.unaryEpochs, "Epochs when training the unary network")
        ->capture_default_str();
    cmd->add_option("--unary-lr", b.unaryLr, "Learning rate when training the unary network")
        ->capture_default_str();
}

SceneBenchmark makeBenchmark(const BenchOptions& b, const Common& c) {
    const auto [h, w] = parseSize(c.size);
    BenchmarkConfig config;
    config.trainScenes = b.trainScenes;
    config.valScenes = b.valScenes;
    config.testScenes = b.testScenes;
    config.seed = c.seed;
    config.height = h;
    config.width = w;
    config.scene.noiseSigma = b.noise;
    config.threads = c.threads;
    return makeSceneBenchmark(config);
}

/// Load --unary, or train one on the benchmark and save it under `out`.
Network obtainUnary(const BenchOptions& b, const Common& c, const SceneBenchmark& bench, const fs::path& out,
                    std::vector<std::string>& artifacts) {
    if (!b.unary.empty()) return loadNetwork(b.unary, makeUnaryNet(0));
    TrainConfig config;
    config.epochs = b.unaryEpochs;
    config.lr = b.unaryLr;
    config.seed = c.seed;
    config.threads = c.threads;
    const auto result = trainUnaryNet(pointers(bench.train), pointers(bench.val), config,
                                      [](const EpochLog& e) { printEpoch("unary", e); });
    nn::saveCheckpoint(out / "unary.crfw", result.model);
    writeText(out / "unary_log.csv", trainingLogCsv(result.log));
    artifacts.insert(artifacts.end(), {"unary.crfw", "unary_log.csv"});
    return result.model;
}

// ---------------------------------------------------------------- train-e2e

struct TrainE2EOptions {
    Common common;
    BenchOptions bench;
    TrainOptions train{8, 1e-4, 8, 0.5};
    std::string regime = "all";
    std::string simulator;
};

void registerTrainE2E(CLI::App& app, TrainE2EOptions& o, std::function<void()>& run) {
    auto* cmd = app.add_subcommand("train-e2e", "Train the complete system under the freeze/tune regimes");
    addCommon(cmd, o.common, true);
    addBenchOptions(cmd, o.bench);
    addTrainOptions(cmd, o.train);
    cmd->add_option("--regime", o.regime, "tf, tt, ft, ff, random or all")
        ->check(CLI::IsMember({"tf", "tt", "ft", "ff", "random", "all"}, CLI::ignore_case))
        ->capture_default_str();
    cmd->add_option("--simulator", o.simulator, "Pre-trained simulator checkpoint");
    cmd->callback([&] {
        run = [&] {
            const auto regimes = o.regime == "all" ? Regime::all()
                                                   : std::vector<Regime>{Regime::fromName(o.regime)};
            const bool needsSimulator =
                std::any_of(regimes.begin(), regimes.end(), [](const Regime& r) { return !r.randomSimulatorInit; });
            if (needsSimulator && o.simulator.empty()) {
                throw ConfigError("--simulator is required for regimes with a pre-trained simulator");
            }
            if (!needsSimulator && !o.simulator.empty()) {
                throw ConfigError("regime random initializes the simulator randomly; drop --simulator");
            }
            const auto out = prepareOut(o.common);
            std::optional<Network> simulator;
            if (needsSimulator) simulator = loadNetwork(o.simulator, makeSimulator(0));
            const auto bench = makeBenchmark(o.bench, o.common);
            std::vector<std::string> artifacts;
            const auto unary = obtainUnary(o.bench, o.common, bench, out, artifacts);
            const auto val = pointers(bench.val), test = pointers(bench.test);

            json summary;
            summary["unaryAlone"] = unaryAloneF(unary, test, o.train.threshold, o.common.threads);
            const auto base = postprocessBaseline(unary, val, test, lambdaSchedule(), o.common.threads);
            summary["crfOptimizer"] = base.fMeasureFixed;
            summary["crfOptimizerLambda"] = base.bestFixedLambda;
            for (const auto& regime : regimes) {
                const std::string tag = regime.name;
                const auto result = trainEndToEnd(
                    regime, unary, regime.randomSimulatorInit ? nullptr : &*simulator, pointers(bench.train), val,
                    o.train.config(o.common), [&](const EpochLog& e) { printEpoch(tag.c_str(), e); });
                const double f = evaluateSystem(result.system, test, o.train.threshold, o.common.threads).meanF;
                summary[tag] = f;
                std::cout << "regime " << tag << " testF=" << fmt(f) << " bestEpoch=" << result.bestEpoch
                          << std::endl;
                const std::string stem = "e2e_" + tag;
                writeText(out / (stem + "_log.csv"), trainingLogCsv(result.log));
                nn::saveCheckpoint(out / (stem + "_unary.crfw"), result.system.unary);
                nn::saveCheckpoint(out / (stem + "_weights.crfw"), result.system.weights);
                nn::saveCheckpoint(out / (stem + "_simulator.crfw"), result.system.simulator);
                for (const char* part : {"_log.csv", "_unary.crfw", "_weights.crfw", "_simulator.crfw"}) {
                    artifacts.push_back(stem + part);
                }
            }
            // columns in the order of the comparison table
            std::string header = "unaryAlone,crfOptimizer", row = fmt(summary["unaryAlone"]) + "," +
                                                                   fmt(summary["crfOptimizer"]);
            for (const char* col : {"TF", "TT", "FT", "FF", "Random"}) {
                if (!summary.contains(col)) continue;
                header += std::string(",") + col;
                row += "," + fmt(summary[col]);
            }
            writeText(out / "summary.csv", header + "\n" + row + "\n");
            writeText(out / "summary.json", summary.dump(2) + "\n");
            std::cout << header << "\n" << row << std::endl;
            artifacts.insert(artifacts.end(), {"summary.csv", "summary.json"});
            json cfg = o.common.toJson();
            cfg.update(o.bench.toJson());
            cfg.update(o.train.toJson());
            cfg.update({{"regime", o.regime}, {"simulator", o.simulator}});
            writeRunJson(out, "train-e2e", cfg, artifacts);
        };
    });
}

// ---------------------------------------------------------------- sweep-lambda

struct SweepOptions {
    Common common;
    BenchOptions bench;
    std::vector<double> grid;
};

void registerSweep(CLI::App& app, SweepOptions& o, std::function<void()>& run) {
    auto* cmd = app.add_subcommand("sweep-lambda", "Graph-cut post-processing of unary outputs over a lambda grid");
    addCommon(cmd, o.common, true);
    addBenchOptions(cmd, o.bench);
    cmd->add_option("--grid", o.grid, "Comma-separated lambda values; the 30-value schedule when omitted")
        ->delimiter(',');
    cmd->callback([&] {
        run = [&] {
            const auto grid = o.grid.empty() ? lambdaSchedule() : o.grid;
            const auto out = prepareOut(o.common);
            const auto bench = makeBenchmark(o.bench, o.common);
            std::vector<std::string> artifacts{"sweep.csv"};
            const auto unary = obtainUnary(o.bench, o.common, bench, out, artifacts);
            const auto test = pointers(bench.test);
            const auto base = postprocessBaseline(unary, pointers(bench.val), test, grid, o.common.threads);
            const double alone = unaryAloneF(unary, test, 0.5, o.common.threads);
            std::string csv = "lambda,valF,testF\n";
            for (std::size_t k = 0; k < grid.size(); ++k) {
                csv += fmt(grid[k]) + "," + fmt(base.valFByLambda[k]) + "," + fmt(base.testFByLambda[k]) + "\n";
            }
            writeText(out / "sweep.csv", csv);
            std::cout << "bestFixedLambda=" << fmt(base.bestFixedLambda) << " fMeasureFixed=" << fmt(base.fMeasureFixed)
                      << " fMeasureOracle=" << fmt(base.fMeasureOracle) << " unaryAlone=" << fmt(alone) << std::endl;
            json cfg = o.common.toJson();
            cfg.update(o.bench.toJson());
            cfg["grid"] = grid;
            cfg["result"] = {{"bestFixedLambda", base.bestFixedLambda},
                             {"fMeasureFixed", base.fMeasureFixed},
                             {"fMeasureOracle", base.fMeasureOracle},
                             {"unaryAlone", alone}};
            writeRunJson(out, "sweep-lambda", cfg, artifacts);
        };
    });
}

// ---------------------------------------------------------------- config file

bool givenOnCommandLine(const std::vector<std::string>& args, const std::string& flag) {
    for (const auto& a : args)
        if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
}

/// Splice `--config file.json` entries in front of the explicit flags, skipping
/// any flag that the command line already sets.
std::vector<std::string> expandConfig(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (path.empty()) return args;
    json config;
    try {
        config = json::parse(std::ifstream(path));
    } catch (const json::exception& e) {
        throw IoError("cannot read config " + path + ": " + e.what());
    }
    if (!config.is_object()) throw ConfigError("config " + path + " must hold a JSON object");
    std::vector<std::string> injected;
    for (const auto& [key, value] : config.items()) {
        const std::string flag = "--" + key;
        if (givenOnCommandLine(args, flag)) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) injected.push_back(flag);
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
            injected.insert(injected.end(), {flag, joined});
        } else if (!value.is_null()) {
            injected.insert(injected.end(), {flag, value.is_string() ? value.get<std::string>() : value.dump()});
        }
    }
    if (args.empty()) throw ConfigError("a command is required before --config entries can apply");
    args.insert(args.begin() + 1, injected.begin(), injected.end());
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CRF simulator toolkit: exact graph cut, synthetic data, simulator training and evaluation"};
    app.set_version_flag("--version", std::string(kVersionString));
    app.require_subcommand(1);

    std::function<void()> run;
    GenDataOptions genData;
    CutOptions cut;
    TrainSimOptions trainSim;
    EvalOptions evalOpts;
    TrainE2EOptions trainE2E;
    SweepOptions sweep;
    registerGenData(app, genData, run);
    registerCut(app, cut, run);
    registerTrainSim(app, trainSim, run);
    registerEval(app, evalOpts, run);
    registerTrainE2E(app, trainE2E, run);
    registerSweep(app, sweep, run);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expandConfig(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);
        if (run) run();
        return kExitOk;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitData;
    }
}

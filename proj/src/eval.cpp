#include "crfsim/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "crfsim/binio.hpp"
#include "json.hpp"

namespace crfsim {

using nlohmann::json;

double fMeasure(const Labeling& pred, const Labeling& truth, double beta2) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
        throw DimensionError("fMeasure: prediction " + dimsString(pred.rows(), pred.cols()) +
                             " vs truth " + dimsString(truth.rows(), truth.cols()));
    }
    const bool flip = (truth != 0).count() == 0;
    double tp = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
        const bool p = (pred(i) != 0) != flip;
        const bool t = (truth(i) != 0) != flip;
        tp += p && t;
        fp += p && !t;
        fn += !p && t;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double denom = beta2 * precision + recall;
    if (denom <= 0.0) return 0.0;
    return (1.0 + beta2) * precision * recall / denom;
}

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw DimensionError("pearson: " + std::to_string(xs.size()) + " vs " +
                             std::to_string(ys.size()) + " values");
    }
    if (xs.size() < 2) return std::nullopt;
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<double> averageRanks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j);
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

json optionalJson(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw DimensionError("spearman: length mismatch");
    const auto rx = averageRanks(xs), ry = averageRanks(ys);
    return pearson(rx, ry);
}

double SampleEval::relDiff() const {
    return (sim.total - opt.total) / std::max(opt.total, kRelDiffFloor);
}

EvalReport energyCorrelationReport(std::span<const SampleEval> samples) {
    EvalReport report;
    report.perSample.assign(samples.begin(), samples.end());
    if (samples.empty()) return report;

    std::vector<double> su, ou, sp, op, st, ot, spNe, opNe, fs;
    for (const auto& s : samples) {
        su.push_back(s.sim.unaryTerm);
        ou.push_back(s.opt.unaryTerm);
        sp.push_back(s.sim.pairwiseTerm);
        op.push_back(s.opt.pairwiseTerm);
        st.push_back(s.sim.total);
        ot.push_back(s.opt.total);
        fs.push_back(s.f);
        if (s.emptyOptimal()) {
            ++report.emptyOptimalCount;
        } else {
            spNe.push_back(s.sim.pairwiseTerm);
            opNe.push_back(s.opt.pairwiseTerm);
        }
    }
    report.meanF = mean(fs);
    report.rUnary = pearson(ou, su);
    report.rPairwise = pearson(op, sp);
    report.rTotal = pearson(ot, st);
    report.rPairwiseNonEmpty = pearson(opNe, spNe);

    report.minEnergyMargin = std::numeric_limits<double>::infinity();
    std::map<double, std::vector<const SampleEval*>> byLambda;
    for (const auto& s : samples) {
        byLambda[s.lambda].push_back(&s);
        report.minEnergyMargin =
            std::min(report.minEnergyMargin, s.sim.total - s.opt.total + s.quantizationBound);
    }
    std::vector<double> bucketLambda, bucketDisc;
    for (const auto& [lambda, members] : byLambda) {
        LambdaBucket b;
        b.lambda = lambda;
        b.count = members.size();
        for (const auto* m : members) {
            b.meanRelDiff += m->relDiff();
            b.meanF += m->f;
            b.meanSimDiscontinuity += m->simDiscontinuity;
        }
        const double n = static_cast<double>(b.count);
        b.meanRelDiff /= n;
        b.meanF /= n;
        b.meanSimDiscontinuity /= n;
        report.relDiffByLambda.push_back(b);
        if (std::isfinite(b.meanSimDiscontinuity)) {
            bucketLambda.push_back(lambda);
            bucketDisc.push_back(b.meanSimDiscontinuity);
        }
    }
    report.discontinuityTrend = spearman(bucketLambda, bucketDisc);

    std::vector<const SampleEval*> sorted;
    for (const auto& s : samples) sorted.push_back(&s);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](auto* a, auto* b) { return a->lambda < b->lambda; });
    const std::size_t third = std::max<std::size_t>(1, sorted.size() / 3);
    std::vector<double> low, high;
    for (std::size_t i = 0; i < third; ++i) {
        low.push_back(sorted[i]->relDiff());
        high.push_back(sorted[sorted.size() - 1 - i]->relDiff());
    }
    report.bottomTercileRelDiff = mean(low);
    report.topTercileRelDiff = mean(high);
    return report;
}

std::string reportToJson(const EvalReport& report) {
    json j;
    j["meanF"] = report.meanF;
    j["sampleCount"] = report.perSample.size();
    j["rUnary"] = optionalJson(report.rUnary);
    j["rPairwise"] = optionalJson(report.rPairwise);
    j["rTotal"] = optionalJson(report.rTotal);
    j["rPairwiseNonEmpty"] = optionalJson(report.rPairwiseNonEmpty);
    j["emptyOptimalCount"] = report.emptyOptimalCount;
    j["bottomTercileRelDiff"] = report.bottomTercileRelDiff;
    j["topTercileRelDiff"] = report.topTercileRelDiff;
    j["discontinuityTrend"] = optionalJson(report.discontinuityTrend);
    j["minEnergyMargin"] = report.perSample.empty() ? json(nullptr) : json(report.minEnergyMargin);
    json buckets = json::array();
    for (const auto& b : report.relDiffByLambda) {
        buckets.push_back({{"lambda", b.lambda},
                           {"count", b.count},
                           {"meanRelDiff", b.meanRelDiff},
                           {"meanF", b.meanF},
                           {"meanSimDiscontinuity", std::isfinite(b.meanSimDiscontinuity)
                                                        ? json(b.meanSimDiscontinuity)
                                                        : json(nullptr)}});
    }
    j["relDiffByLambda"] = buckets;
    json per = json::array();
    for (const auto& s : report.perSample) {
        per.push_back({{"f", s.f},
                       {"lambda", s.lambda},
                       {"energySimTotal", s.sim.total},
                       {"energySimUnary", s.sim.unaryTerm},
                       {"energySimPairwise", s.sim.pairwiseTerm},
                       {"energyOptTotal", s.opt.total},
                       {"energyOptUnary", s.opt.unaryTerm},
                       {"energyOptPairwise", s.opt.pairwiseTerm}});
    }
    j["perSample"] = per;
    return j.dump(1);
}

std::string scatterCsv(const EvalReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "lambda,optUnary,simUnary,optPair,simPair,optTotal,simTotal,f\n";
    for (const auto& s : report.perSample) {
        out << s.lambda << ',' << s.opt.unaryTerm << ',' << s.sim.unaryTerm << ','
            << s.opt.pairwiseTerm << ',' << s.sim.pairwiseTerm << ',' << s.opt.total << ','
            << s.sim.total << ',' << s.f << '\n';
    }
    return out.str();
}

std::string scatterSvg(const EvalReport& report) {
    constexpr double panel = 260, margin = 40, gap = 30;
    const double width = 3 * panel + 2 * gap + 2 * margin, height = panel + 2 * margin;
    struct Series {
        const char* name;
        const char* color;
        double EnergyBreakdown::*term;
    };
    const Series series[3] = {{"unary", "#1f77b4", &EnergyBreakdown::unaryTerm},
                              {"pairwise", "#d62728", &EnergyBreakdown::pairwiseTerm},
                              {"total", "#2ca02c", &EnergyBreakdown::total}};
    std::ostringstream svg;
    svg.precision(5);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int k = 0; k < 3; ++k) {
        const auto& s = series[k];
        const double x0 = margin + k * (panel + gap), y0 = margin + panel;
        double hi = 0.0;
        for (const auto& p : report.perSample) hi = std::max({hi, p.opt.*s.term, p.sim.*s.term});
        if (hi <= 0.0) hi = 1.0;
        svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 + panel << "\" y2=\"" << y0
            << "\" stroke=\"black\"/>\n"
            << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y0 - panel
            << "\" stroke=\"black\"/>\n"
            << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 + panel << "\" y2=\""
            << y0 - panel << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n"
            << "<text x=\"" << x0 + panel / 2 << "\" y=\"" << margin - 12
            << "\" text-anchor=\"middle\">" << s.name << "</text>\n"
            << "<text x=\"" << x0 + panel / 2 << "\" y=\"" << y0 + 28
            << "\" text-anchor=\"middle\">optimizer (max " << hi << ")</text>\n"
            << "<text x=\"" << x0 - 8 << "\" y=\"" << y0 - panel / 2 << "\" text-anchor=\"middle\" "
            << "transform=\"rotate(-90 " << x0 - 8 << ' ' << y0 - panel / 2 << ")\">simulator</text>\n";
        for (const auto& p : report.perSample) {
            svg << "<circle cx=\"" << x0 + panel * (p.opt.*s.term) / hi << "\" cy=\""
                << y0 - panel * (p.sim.*s.term) / hi << "\" r=\"2\" fill=\"" << s.color
                << "\" fill-opacity=\"0.6\"/>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

void writeEvalArtifacts(const EvalReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    writeText(dir / "report.json", reportToJson(report));
    writeText(dir / "scatter.csv", scatterCsv(report));
    writeText(dir / "scatter.svg", scatterSvg(report));
}

}  // namespace crfsim

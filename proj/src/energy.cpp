#include "crfsim/energy.hpp"

#include <cmath>

namespace crfsim {

namespace {

double squaredColorDistance(const ColorImage& image, Eigen::Index r0, Eigen::Index c0,
                            Eigen::Index r1, Eigen::Index c1) {
    double sum = 0.0;
    for (const auto& ch : image.channels) {
        const double d = ch(r0, c0) - ch(r1, c1);
        sum += d * d;
    }
    return sum;
}

void checkLabeling(const CrfInstance& instance, const Labeling& labeling) {
    if (labeling.rows() != instance.rows() || labeling.cols() != instance.cols()) {
        throw DimensionError("labeling is " + dimsString(labeling.rows(), labeling.cols()) +
                             ", instance is " + dimsString(instance.rows(), instance.cols()));
    }
    if ((labeling > 1).any()) throw DimensionError("labeling entries must be 0 or 1");
}

double pairwiseSum(const PairwiseField& pw, const Labeling& x) {
    const Eigen::Index h = x.rows(), w = x.cols();
    double sum = 0.0;
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) {
            if (c + 1 < w && x(r, c) != x(r, c + 1)) sum += pw.horizontal(r, c);
            if (r + 1 < h && x(r, c) != x(r + 1, c)) sum += pw.vertical(r, c);
        }
    }
    return sum;
}

}  // namespace

PairwiseField computePairwiseWeights(const ColorImage& image, double lambda,
                                     std::optional<double> sigma) {
    const Eigen::Index h = image.rows(), w = image.cols();
    if (h < 2 || w < 2) {
        throw DimensionError("pairwise weights need an image of at least 2x2, got " +
                             dimsString(h, w));
    }
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    for (const auto& ch : image.channels) {
        if (ch.rows() != h || ch.cols() != w) throw DimensionError("image channels differ in size");
    }

    GridD dh(h, w - 1), dv(h - 1, w);
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c + 1 < w; ++c) dh(r, c) = squaredColorDistance(image, r, c, r, c + 1);
    for (Eigen::Index r = 0; r + 1 < h; ++r)
        for (Eigen::Index c = 0; c < w; ++c) dv(r, c) = squaredColorDistance(image, r, c, r + 1, c);

    double sigma2 = 0.0;
    if (sigma) {
        if (!(*sigma > 0.0)) throw ConfigError("sigma must be positive");
        sigma2 = *sigma * *sigma;
    } else {
        const double pairs = static_cast<double>(dh.size() + dv.size());
        sigma2 = std::max((dh.sum() + dv.sum()) / pairs, kSigmaSquaredFloor);
    }

    PairwiseField out;
    out.lambda = lambda;
    out.sigma = std::sqrt(sigma2);
    out.horizontal = lambda * (-dh / (2.0 * sigma2)).exp();
    out.vertical = lambda * (-dv / (2.0 * sigma2)).exp();
    return out;
}

UnaryField unaryFromProb(const GridD& prob, double epsilon) {
    UnaryField u;
    u.prob = prob.max(epsilon).min(1.0 - epsilon);
    u.cost0 = -(1.0 - u.prob).log();
    u.cost1 = -u.prob.log();
    return u;
}

PairwiseField pairwiseFromWeights(GridD horizontal, GridD vertical, double lambda, double sigma) {
    if (horizontal.rows() != vertical.rows() + 1 || horizontal.cols() + 1 != vertical.cols()) {
        throw DimensionError("horizontal weights " +
                             dimsString(horizontal.rows(), horizontal.cols()) +
                             " do not match vertical weights " +
                             dimsString(vertical.rows(), vertical.cols()));
    }
    PairwiseField pw;
    pw.horizontal = std::move(horizontal);
    pw.vertical = std::move(vertical);
    pw.lambda = lambda;
    pw.sigma = sigma;
    return pw;
}

CrfInstance makeInstance(UnaryField unary, PairwiseField pairwise) {
    if (unary.rows() != pairwise.rows() || unary.cols() != pairwise.cols()) {
        throw DimensionError("unary field " + dimsString(unary.rows(), unary.cols()) +
                             " vs pairwise field " + dimsString(pairwise.rows(), pairwise.cols()));
    }
    return CrfInstance{std::move(unary), std::move(pairwise)};
}

EnergyBreakdown evaluateEnergy(const CrfInstance& instance, const Labeling& labeling) {
    checkLabeling(instance, labeling);
    EnergyBreakdown e;
    const auto& u = instance.unary;
    for (Eigen::Index i = 0; i < labeling.size(); ++i) {
        e.unaryTerm += labeling(i) ? u.cost1(i) : u.cost0(i);
    }
    e.pairwiseTerm = pairwiseSum(instance.pairwise, labeling);
    e.total = e.unaryTerm + e.pairwiseTerm;
    return e;
}

double discontinuityMass(const CrfInstance& instance, const Labeling& labeling) {
    checkLabeling(instance, labeling);
    if (!(instance.pairwise.lambda > 0.0)) {
        throw ConfigError("discontinuity mass needs lambda > 0");
    }
    return pairwiseSum(instance.pairwise, labeling) / instance.pairwise.lambda;
}

Labeling unaryArgmin(const UnaryField& unary) {
    return (unary.cost1 < unary.cost0).cast<std::uint8_t>();
}

}  // namespace crfsim

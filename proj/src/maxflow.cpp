#include "crfsim/maxflow.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <string>

namespace crfsim {

namespace {

// Capacities stay below 2^53 so the double -> integer conversion is exact and
// the total flow cannot overflow int64 on any realistic grid.
constexpr double kMaxCapacity = 9007199254740992.0;

std::int64_t quantize(double value, double scale, const char* what, Eigen::Index r,
                      Eigen::Index c) {
    const double scaled = std::round(value * scale);
    if (!std::isfinite(scaled) || scaled < 0.0 || scaled > kMaxCapacity) {
        throw OverflowError(std::string(what) + " capacity out of range at pixel (" +
                            std::to_string(r) + ", " + std::to_string(c) + "): " +
                            std::to_string(value));
    }
    return static_cast<std::int64_t>(scaled);
}

/// Residual graph and search trees of the Boykov-Kolmogorov algorithm.
class BkSolver {
public:
    explicit BkSolver(const FlowGraph& g) : rows_(g.rows), cols_(g.cols) {
        const auto n = static_cast<std::size_t>(g.nodeCount());
        nodes_.resize(n);
        arcs_.reserve(2 * (g.horizontal.size() + g.vertical.size()));
        for (Eigen::Index r = 0; r < rows_; ++r) {
            for (Eigen::Index c = 0; c + 1 < cols_; ++c) {
                addEdge(index(r, c), index(r, c + 1),
                        g.horizontal[static_cast<std::size_t>(r * (cols_ - 1) + c)]);
            }
        }
        for (Eigen::Index r = 0; r + 1 < rows_; ++r) {
            for (Eigen::Index c = 0; c < cols_; ++c) {
                addEdge(index(r, c), index(r + 1, c),
                        g.vertical[static_cast<std::size_t>(r * cols_ + c)]);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::int64_t cs = g.tLinkSource[i], ct = g.tLinkSink[i];
            flow_ += std::min(cs, ct);
            nodes_[i].trCap = cs - ct;
        }
    }

    std::int64_t run() {
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
            Node& nd = nodes_[i];
            if (nd.trCap > 0) {
                nd.isSink = false;
            } else if (nd.trCap < 0) {
                nd.isSink = true;
            } else {
                continue;
            }
            nd.parent = kTerminal;
            nd.ts = time_;
            nd.dist = 1;
            setActive(i);
        }

        while (!active_.empty()) {
            const int i = active_.front();
            if (nodes_[i].parent == kFree) {
                popActive();
                continue;
            }
            const int bridge = grow(i);
            if (bridge < 0) {
                popActive();
                continue;
            }
            ++time_;
            augment(bridge);
            ++augmentations_;
            adoptOrphans();
        }
        return flow_;
    }

    std::int64_t augmentations() const { return augmentations_; }

    /// Nodes reachable from the source through residual capacity.
    Labeling sourceSide() const {
        Labeling out = Labeling::Zero(rows_, cols_);
        std::vector<int> stack;
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
            if (nodes_[i].trCap > 0) {
                out(i) = 1;
                stack.push_back(i);
            }
        }
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (int a = nodes_[i].first; a >= 0; a = arcs_[a].next) {
                const int j = arcs_[a].head;
                if (arcs_[a].rCap > 0 && !out(j)) {
                    out(j) = 1;
                    stack.push_back(j);
                }
            }
        }
        return out;
    }

private:
    static constexpr int kFree = -1;
    static constexpr int kTerminal = -2;
    static constexpr int kOrphan = -3;
    static constexpr int kInfiniteDist = std::numeric_limits<int>::max();

    struct Node {
        int first = -1;
        int parent = kFree;  // arc from this node towards its tree parent
        int ts = 0;
        int dist = 0;
        bool isSink = false;
        bool active = false;
        std::int64_t trCap = 0;  // > 0: residual from source, < 0: residual to sink
    };

    struct Arc {
        int head;
        int next;
        std::int64_t rCap;
    };

    int index(Eigen::Index r, Eigen::Index c) const { return static_cast<int>(r * cols_ + c); }
    static int sister(int a) { return a ^ 1; }

    void addEdge(int p, int q, std::int64_t cap) {
        if (cap == 0) return;
        const int a = static_cast<int>(arcs_.size());
        arcs_.push_back({q, nodes_[p].first, cap});
        nodes_[p].first = a;
        arcs_.push_back({p, nodes_[q].first, cap});
        nodes_[q].first = a + 1;
    }

    void setActive(int i) {
        if (!nodes_[i].active) {
            nodes_[i].active = true;
            active_.push_back(i);
        }
    }

    void popActive() {
        nodes_[active_.front()].active = false;
        active_.pop_front();
    }

    void setOrphanFront(int i) {
        nodes_[i].parent = kOrphan;
        orphans_.push_front(i);
    }

    void setOrphanRear(int i) {
        nodes_[i].parent = kOrphan;
        orphans_.push_back(i);
    }

    // Grow the tree of node i by one layer. Returns an arc from the source tree
    // into the sink tree if the trees touch, otherwise -1.
    int grow(int i) {
        Node& ni = nodes_[i];
        for (int a = ni.first; a >= 0; a = arcs_[a].next) {
            const int residual = ni.isSink ? sister(a) : a;
            if (arcs_[residual].rCap == 0) continue;
            const int j = arcs_[a].head;
            Node& nj = nodes_[j];
            if (nj.parent == kFree) {
                nj.isSink = ni.isSink;
                nj.parent = sister(a);
                nj.ts = ni.ts;
                nj.dist = ni.dist + 1;
                setActive(j);
            } else if (nj.isSink != ni.isSink) {
                return ni.isSink ? sister(a) : a;
            } else if (nj.ts <= ni.ts && nj.dist > ni.dist) {
                nj.parent = sister(a);
                nj.ts = ni.ts;
                nj.dist = ni.dist + 1;
            }
        }
        return -1;
    }

    void augment(int bridge) {
        std::int64_t bottleneck = arcs_[bridge].rCap;
        // source half: residual flows parent -> child, i.e. along sister(parent)
        for (int i = arcs_[sister(bridge)].head;;) {
            const int a = nodes_[i].parent;
            if (a == kTerminal) {
                bottleneck = std::min(bottleneck, nodes_[i].trCap);
                break;
            }
            bottleneck = std::min(bottleneck, arcs_[sister(a)].rCap);
            i = arcs_[a].head;
        }
        for (int i = arcs_[bridge].head;;) {
            const int a = nodes_[i].parent;
            if (a == kTerminal) {
                bottleneck = std::min(bottleneck, -nodes_[i].trCap);
                break;
            }
            bottleneck = std::min(bottleneck, arcs_[a].rCap);
            i = arcs_[a].head;
        }

        arcs_[sister(bridge)].rCap += bottleneck;
        arcs_[bridge].rCap -= bottleneck;

        for (int i = arcs_[sister(bridge)].head;;) {
            const int a = nodes_[i].parent;
            if (a == kTerminal) {
                nodes_[i].trCap -= bottleneck;
                if (nodes_[i].trCap == 0) setOrphanFront(i);
                break;
            }
            arcs_[a].rCap += bottleneck;
            arcs_[sister(a)].rCap -= bottleneck;
            if (arcs_[sister(a)].rCap == 0) setOrphanFront(i);
            i = arcs_[a].head;
        }
        for (int i = arcs_[bridge].head;;) {
            const int a = nodes_[i].parent;
            if (a == kTerminal) {
                nodes_[i].trCap += bottleneck;
                if (nodes_[i].trCap == 0) setOrphanFront(i);
                break;
            }
            arcs_[sister(a)].rCap += bottleneck;
            arcs_[a].rCap -= bottleneck;
            if (arcs_[a].rCap == 0) setOrphanFront(i);
            i = arcs_[a].head;
        }
        flow_ += bottleneck;
    }

    void adoptOrphans() {
        while (!orphans_.empty()) {
            const int i = orphans_.front();
            orphans_.pop_front();
            adopt(i);
        }
    }

    // Distance from j to its terminal, or kInfiniteDist if the chain hits an orphan.
    int rootDistance(int j) {
        int d = 0;
        for (;;) {
            if (nodes_[j].ts == time_) return d + nodes_[j].dist;
            const int a = nodes_[j].parent;
            ++d;
            if (a == kTerminal) {
                nodes_[j].ts = time_;
                nodes_[j].dist = 1;
                return d;
            }
            if (a == kOrphan || a == kFree) return kInfiniteDist;
            j = arcs_[a].head;
        }
    }

    void adopt(int i) {
        const bool sinkTree = nodes_[i].isSink;
        int bestArc = kFree;
        int bestDist = kInfiniteDist;

        for (int a0 = nodes_[i].first; a0 >= 0; a0 = arcs_[a0].next) {
            const int residual = sinkTree ? a0 : sister(a0);
            if (arcs_[residual].rCap == 0) continue;
            const int j = arcs_[a0].head;
            if (nodes_[j].isSink != sinkTree || nodes_[j].parent == kFree) continue;
            int d = rootDistance(j);
            if (d == kInfiniteDist) continue;
            if (d < bestDist) {
                bestArc = a0;
                bestDist = d;
            }
            for (int k = j; nodes_[k].ts != time_; k = arcs_[nodes_[k].parent].head) {
                nodes_[k].ts = time_;
                nodes_[k].dist = d--;
            }
        }

        nodes_[i].parent = bestArc;
        if (bestArc != kFree) {
            nodes_[i].ts = time_;
            nodes_[i].dist = bestDist + 1;
            return;
        }

        for (int a0 = nodes_[i].first; a0 >= 0; a0 = arcs_[a0].next) {
            const int j = arcs_[a0].head;
            const int a = nodes_[j].parent;
            if (nodes_[j].isSink != sinkTree || a == kFree) continue;
            const int residual = sinkTree ? a0 : sister(a0);
            if (arcs_[residual].rCap > 0) setActive(j);
            if (a != kTerminal && a != kOrphan && arcs_[a].head == i) setOrphanRear(j);
        }
    }

    Eigen::Index rows_;
    Eigen::Index cols_;
    std::vector<Node> nodes_;
    std::vector<Arc> arcs_;
    std::deque<int> active_;
    std::deque<int> orphans_;
    std::int64_t flow_ = 0;
    std::int64_t augmentations_ = 0;
    int time_ = 0;
};

}  // namespace

double quantizationBound(const CrfInstance& instance, std::int64_t scale) {
    return static_cast<double>(instance.pixelCount() + instance.edgeCount()) * 0.5 /
           static_cast<double>(scale);
}

FlowGraph buildGraph(const CrfInstance& instance, std::int64_t scale) {
    if (scale <= 0) throw ConfigError("quantization scale must be positive");
    const Eigen::Index h = instance.rows(), w = instance.cols();
    if (instance.pairwise.rows() != h || instance.pairwise.cols() != w) {
        throw DimensionError("instance unary/pairwise dimensions disagree");
    }
    const double s = static_cast<double>(scale);

    FlowGraph g;
    g.rows = h;
    g.cols = w;
    g.scale = scale;
    g.tLinkSource.resize(static_cast<std::size_t>(h * w));
    g.tLinkSink.resize(static_cast<std::size_t>(h * w));
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) {
            const auto i = static_cast<std::size_t>(r * w + c);
            g.tLinkSource[i] = quantize(instance.unary.cost0(r, c), s, "source t-link", r, c);
            g.tLinkSink[i] = quantize(instance.unary.cost1(r, c), s, "sink t-link", r, c);
        }
    }
    const auto& pw = instance.pairwise;
    g.horizontal.reserve(static_cast<std::size_t>(pw.horizontal.size()));
    for (Eigen::Index r = 0; r < pw.horizontal.rows(); ++r)
        for (Eigen::Index c = 0; c < pw.horizontal.cols(); ++c)
            g.horizontal.push_back(quantize(pw.horizontal(r, c), s, "horizontal n-link", r, c));
    g.vertical.reserve(static_cast<std::size_t>(pw.vertical.size()));
    for (Eigen::Index r = 0; r < pw.vertical.rows(); ++r)
        for (Eigen::Index c = 0; c < pw.vertical.cols(); ++c)
            g.vertical.push_back(quantize(pw.vertical(r, c), s, "vertical n-link", r, c));
    return g;
}

CutResult minCut(const FlowGraph& graph) {
    const auto n = static_cast<std::size_t>(graph.nodeCount());
    if (graph.tLinkSource.size() != n || graph.tLinkSink.size() != n ||
        graph.horizontal.size() != static_cast<std::size_t>(graph.rows * (graph.cols - 1)) ||
        graph.vertical.size() != static_cast<std::size_t>((graph.rows - 1) * graph.cols)) {
        throw DimensionError("flow graph arrays do not match its " +
                             dimsString(graph.rows, graph.cols) + " grid");
    }
    BkSolver solver(graph);
    const std::int64_t flow = solver.run();
    CutResult out;
    out.labeling = solver.sourceSide();
    out.flowValue = static_cast<double>(flow) / static_cast<double>(graph.scale);
    out.augmentations = solver.augmentations();
    return out;
}

CutResult optimize(const CrfInstance& instance, std::int64_t scale) {
    return minCut(buildGraph(instance, scale));
}

CutResult bruteForceOptimize(const CrfInstance& instance) {
    const Eigen::Index n = instance.pixelCount();
    if (n > 20) {
        throw DimensionError("brute force limited to 20 pixels, got " + std::to_string(n));
    }
    Labeling current = Labeling::Zero(instance.rows(), instance.cols());
    CutResult best;
    best.flowValue = std::numeric_limits<double>::infinity();
    const std::uint64_t count = std::uint64_t{1} << n;
    // The first flattened pixel is the most significant bit, so counting up
    // visits labelings in lexicographic order.
    for (std::uint64_t code = 0; code < count; ++code) {
        for (Eigen::Index i = 0; i < n; ++i) {
            current(i) = static_cast<std::uint8_t>((code >> (n - 1 - i)) & 1u);
        }
        const double e = evaluateEnergy(instance, current).total;
        if (e < best.flowValue) {
            best.flowValue = e;
            best.labeling = current;
        }
    }
    return best;
}

}  // namespace crfsim

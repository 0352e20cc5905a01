#include "nt/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nt/rng.hpp"

namespace nt {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Disjoint train/val/test masks from a shuffled node order.
void assign_masks(Graph& g, double train_frac, double val_frac, RngStream rng) {
    int64_t n = g.num_nodes;
    std::vector<int64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int64_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.next_below(uint64_t(i + 1))]);
    int64_t n_train = int64_t(train_frac * double(n));
    int64_t n_val = int64_t(val_frac * double(n));
    g.train_mask.assign(n, 0);
    g.val_mask.assign(n, 0);
    g.test_mask.assign(n, 0);
    for (int64_t i = 0; i < n; ++i) {
        if (i < n_train)
            g.train_mask[order[i]] = 1;
        else if (i < n_train + n_val)
            g.val_mask[order[i]] = 1;
        else
            g.test_mask[order[i]] = 1;
    }
}

}  // namespace

Graph generate_monophily_task(const MonophilyParams& p, uint64_t seed) {
    int64_t n = p.num_nodes;
    require(n >= 4, "monophily_task: need at least 4 nodes");
    require(p.feature_noise >= 0, "monophily_task: negative noise");

    // circulant offsets chosen triangle-free: no sum of two offsets (or a
    // doubled offset) may land on another offset modulo n
    std::vector<int64_t> offsets{1};
    if (n >= 12) offsets.push_back(5);
    bool half_link = (n % 2 == 0) && n >= 22;
    std::vector<std::pair<int64_t, int64_t>> edges;
    for (int64_t i = 0; i < n; ++i) {
        for (auto o : offsets) edges.push_back({i, (i + o) % n});
        if (half_link && i < n / 2) edges.push_back({i, i + n / 2});
    }
    Graph g = build_graph(n, edges, /*directed=*/false);

    RngStream root(seed);
    RngStream attr_rng = root.split(1);
    RngStream noise_rng = root.split(2);
    std::vector<uint8_t> hidden(n);
    for (auto& a : hidden) a = attr_rng.next_uniform() < 0.5 ? 1 : 0;

    // observable features: the node's own attribute plus noise, nothing else
    g.feat_dim = 2;
    g.features.resize(n * 2);
    for (int64_t i = 0; i < n; ++i) {
        g.features[i * 2 + 0] = double(hidden[i]) + p.feature_noise * noise_rng.next_gaussian();
        g.features[i * 2 + 1] = double(1 - hidden[i]) + p.feature_noise * noise_rng.next_gaussian();
    }

    // label = majority hidden attribute over 2-hop paths i -> j -> k, k != i
    g.labels.resize(n);
    for (int64_t i = 0; i < n; ++i) {
        int64_t ones = 0, total = 0;
        for (auto j : g.neighbours(i))
            for (auto k : g.neighbours(j)) {
                if (k == i) continue;
                ones += hidden[k];
                ++total;
            }
        g.labels[i] = (2 * ones > total) ? 1 : 0;
    }

    assign_masks(g, p.train_fraction, p.val_fraction, root.split(3));
    g.validate();
    return g;
}

Graph generate_power_law(const PowerLawParams& p, uint64_t seed) {
    int64_t n = p.num_nodes;
    require(n >= 2, "power_law: need at least 2 nodes");
    require(p.exponent > 1.0, "power_law: exponent must be > 1");
    int64_t dmax = p.max_degree > 0 ? std::min(p.max_degree, n - 1) : n - 1;
    int64_t dmin = std::max<int64_t>(1, p.min_degree);
    require(dmin <= dmax, "power_law: min_degree exceeds max_degree");

    RngStream root(seed);
    RngStream deg_rng = root.split(1);

    // truncated zipf over [dmin, dmax] via inverse CDF
    std::vector<double> cdf(dmax - dmin + 1);
    double acc = 0.0;
    for (int64_t d = dmin; d <= dmax; ++d) {
        acc += std::pow(double(d), -p.exponent);
        cdf[d - dmin] = acc;
    }
    for (auto& c : cdf) c /= acc;
    auto draw_degree = [&]() {
        double u = deg_rng.next_uniform();
        auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        return dmin + (it - cdf.begin());
    };

    std::vector<int64_t> degree(n);
    int64_t stub_total = 0;
    for (auto& d : degree) {
        d = draw_degree();
        stub_total += d;
    }
    if (stub_total % 2 != 0) {
        degree[0]++;
        stub_total++;
    }

    // configuration model: shuffle stubs, pair consecutively, drop self
    // loops and duplicates
    std::vector<int64_t> stubs;
    stubs.reserve(stub_total);
    for (int64_t v = 0; v < n; ++v) stubs.insert(stubs.end(), degree[v], v);
    RngStream pair_rng = root.split(2);
    for (int64_t i = stub_total - 1; i > 0; --i)
        std::swap(stubs[i], stubs[pair_rng.next_below(uint64_t(i + 1))]);
    std::vector<std::pair<int64_t, int64_t>> edges;
    for (int64_t i = 0; i + 1 < stub_total; i += 2)
        if (stubs[i] != stubs[i + 1]) edges.push_back({stubs[i], stubs[i + 1]});

    Graph g = build_graph(n, edges, /*directed=*/false);
    if (p.feat_dim > 0) {
        RngStream feat_rng = root.split(3);
        g.feat_dim = p.feat_dim;
        g.features.resize(n * p.feat_dim);
        for (auto& f : g.features) f = feat_rng.next_gaussian();
        RngStream label_rng = root.split(4);
        g.labels.resize(n);
        for (auto& l : g.labels) l = label_rng.next_uniform() < 0.5 ? 0 : 1;
        assign_masks(g, p.train_fraction, p.val_fraction, root.split(5));
    }
    g.validate();
    return g;
}

Graph generate_grid(const GridParams& p, uint64_t seed) {
    require(p.rows >= 2 && p.cols >= 2, "grid: dims must be >= 2");
    require(p.mine_rate >= 0.0 && p.mine_rate <= 1.0, "grid: mine_rate out of [0,1]");
    int64_t n = p.rows * p.cols;
    auto id = [&](int64_t r, int64_t c) { return r * p.cols + c; };
    std::vector<std::pair<int64_t, int64_t>> edges;
    for (int64_t r = 0; r < p.rows; ++r)
        for (int64_t c = 0; c < p.cols; ++c)
            for (int64_t dr = -1; dr <= 1; ++dr)
                for (int64_t dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    int64_t rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= p.rows || cc < 0 || cc >= p.cols) continue;
                    if (id(rr, cc) > id(r, c)) edges.push_back({id(r, c), id(rr, cc)});
                }
    Graph g = build_graph(n, edges, /*directed=*/false);

    RngStream root(seed);
    RngStream mine_rng = root.split(1);
    g.labels.resize(n);
    for (auto& l : g.labels) l = mine_rng.next_uniform() < p.mine_rate ? 1 : 0;
    g.feat_dim = 2;
    g.features.resize(n * 2);
    for (int64_t v = 0; v < n; ++v) {
        int64_t mines = 0;
        for (auto u : g.neighbours(v)) mines += g.labels[u];
        g.features[v * 2 + 0] = double(mines) / double(g.degree(v));
        g.features[v * 2 + 1] = 1.0;
    }
    assign_masks(g, p.train_fraction, p.val_fraction, root.split(2));
    g.validate();
    return g;
}

}  // namespace nt

#include "nt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace nt {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void Graph::validate() const {
    require((int64_t)offsets.size() == num_nodes + 1, "graph: offsets length mismatch");
    require(offsets.front() == 0, "graph: offsets[0] must be 0");
    require(offsets.back() == num_edges(), "graph: offsets must end at num_edges");
    for (size_t i = 1; i < offsets.size(); ++i)
        require(offsets[i - 1] <= offsets[i], "graph: offsets must be non-decreasing");
    for (auto v : indices)
        require(0 <= v && v < num_nodes, "graph: edge target out of range");
    if (!directed) {
        // symmetry: u->v present iff v->u present
        for (int64_t u = 0; u < num_nodes; ++u)
            for (auto v : neighbours(u)) {
                auto nb = neighbours(v);
                require(std::binary_search(nb.begin(), nb.end(), u),
                        "graph: undirected relation is not symmetric");
            }
    }
    if (!features.empty())
        require((int64_t)features.size() == num_nodes * feat_dim, "graph: feature size mismatch");
    if (!labels.empty())
        require((int64_t)labels.size() == num_nodes, "graph: labels length mismatch");
    auto check_mask = [&](const std::vector<uint8_t>& m) {
        require(m.empty() || (int64_t)m.size() == num_nodes, "graph: mask length mismatch");
    };
    check_mask(train_mask);
    check_mask(val_mask);
    check_mask(test_mask);
    if (!train_mask.empty() && !val_mask.empty() && !test_mask.empty())
        for (int64_t i = 0; i < num_nodes; ++i)
            require(int(train_mask[i]) + int(val_mask[i]) + int(test_mask[i]) <= 1,
                    "graph: masks are not disjoint");
}

Graph build_graph(int64_t num_nodes, const std::vector<std::pair<int64_t, int64_t>>& edges,
                  bool directed, const std::vector<double>* edge_attrs, int64_t edge_attr_dim) {
    require(num_nodes >= 0, "build_graph: negative node count");
    bool with_attrs = edge_attrs != nullptr && edge_attr_dim > 0;
    if (with_attrs)
        require((int64_t)edge_attrs->size() == (int64_t)edges.size() * edge_attr_dim,
                "build_graph: edge attribute size mismatch");

    struct Arc {
        int64_t src, dst;
        int64_t attr_row;  // -1 = none
    };
    std::vector<Arc> arcs;
    arcs.reserve(edges.size() * (directed ? 1 : 2));
    for (size_t e = 0; e < edges.size(); ++e) {
        auto [s, d] = edges[e];
        require(0 <= s && s < num_nodes && 0 <= d && d < num_nodes,
                "build_graph: edge (" + std::to_string(s) + "," + std::to_string(d) +
                    ") out of range for " + std::to_string(num_nodes) + " nodes");
        int64_t row = with_attrs ? (int64_t)e : -1;
        arcs.push_back({s, d, row});
        if (!directed && s != d) arcs.push_back({d, s, row});
    }
    std::stable_sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    // collapse duplicates (neighbourhoods are sets); first occurrence wins
    std::vector<Arc> uniq;
    uniq.reserve(arcs.size());
    for (auto& a : arcs)
        if (uniq.empty() || uniq.back().src != a.src || uniq.back().dst != a.dst)
            uniq.push_back(a);

    Graph g;
    g.num_nodes = num_nodes;
    g.directed = directed;
    g.offsets.assign(num_nodes + 1, 0);
    g.indices.resize(uniq.size());
    for (auto& a : uniq) g.offsets[a.src + 1]++;
    for (int64_t i = 0; i < num_nodes; ++i) g.offsets[i + 1] += g.offsets[i];
    for (size_t i = 0; i < uniq.size(); ++i) g.indices[i] = uniq[i].dst;
    if (with_attrs) {
        g.edge_attr_dim = edge_attr_dim;
        g.edge_attrs.assign(uniq.size() * edge_attr_dim, 0.0);
        for (size_t i = 0; i < uniq.size(); ++i)
            if (uniq[i].attr_row >= 0)
                std::copy_n(edge_attrs->begin() + uniq[i].attr_row * edge_attr_dim, edge_attr_dim,
                            g.edge_attrs.begin() + (int64_t)i * edge_attr_dim);
    }
    return g;
}

Graph transform(const Graph& g, GraphTransform op) {
    g.validate();
    std::vector<std::pair<int64_t, int64_t>> edges;
    std::vector<double> attrs;
    bool with_attrs = g.edge_attr_dim > 0;
    auto copy_attr = [&](int64_t slot) {
        if (with_attrs)
            attrs.insert(attrs.end(), g.edge_attrs.begin() + slot * g.edge_attr_dim,
                         g.edge_attrs.begin() + (slot + 1) * g.edge_attr_dim);
    };
    switch (op) {
        case GraphTransform::add_self_loops: {
            for (int64_t u = 0; u < g.num_nodes; ++u) {
                auto nb = g.neighbours(u);
                for (int64_t k = 0; k < (int64_t)nb.size(); ++k) {
                    edges.push_back({u, nb[k]});
                    copy_attr(g.offsets[u] + k);
                }
                if (!std::binary_search(nb.begin(), nb.end(), u)) {
                    edges.push_back({u, u});
                    if (with_attrs) attrs.insert(attrs.end(), g.edge_attr_dim, 0.0);
                }
            }
            break;
        }
        case GraphTransform::reverse_edges: {
            // transpose relation; attrs carried so that E'_{(k,j)} = E_{(j,k)}
            for (int64_t u = 0; u < g.num_nodes; ++u) {
                auto nb = g.neighbours(u);
                for (int64_t k = 0; k < (int64_t)nb.size(); ++k) {
                    edges.push_back({nb[k], u});
                    copy_attr(g.offsets[u] + k);
                }
            }
            break;
        }
        case GraphTransform::symmetrize: {
            for (int64_t u = 0; u < g.num_nodes; ++u) {
                auto nb = g.neighbours(u);
                for (int64_t k = 0; k < (int64_t)nb.size(); ++k) {
                    edges.push_back({u, nb[k]});
                    copy_attr(g.offsets[u] + k);
                    edges.push_back({nb[k], u});
                    copy_attr(g.offsets[u] + k);
                }
            }
            break;
        }
    }
    bool out_directed = op == GraphTransform::symmetrize ? false : g.directed;
    // arcs above are already expanded, so build as directed and fix the flag
    Graph out = build_graph(g.num_nodes, edges, true, with_attrs ? &attrs : nullptr,
                            g.edge_attr_dim);
    out.directed = out_directed;
    out.features = g.features;
    out.feat_dim = g.feat_dim;
    out.labels = g.labels;
    out.train_mask = g.train_mask;
    out.val_mask = g.val_mask;
    out.test_mask = g.test_mask;
    out.validate();
    return out;
}

DegreeHistogram degree_histogram(const Graph& g, DegreeSide side) {
    std::vector<int64_t> deg(g.num_nodes, 0);
    if (side == DegreeSide::out) {
        for (int64_t v = 0; v < g.num_nodes; ++v) deg[v] = g.degree(v);
    } else {
        for (auto dst : g.indices) deg[dst]++;
    }
    std::vector<int64_t> sorted = deg;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    DegreeHistogram h;
    for (auto d : sorted) {
        if (d == 0) {
            h.zero_degree_nodes++;
            continue;
        }
        if (!h.buckets.empty() && h.buckets.back().size == d)
            h.buckets.back().count++;
        else
            h.buckets.push_back({d, 1});
    }
    return h;
}

DegreeHistogram histogram_from_spec(const std::string& spec) {
    DegreeHistogram h;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        auto colon = part.find(':');
        require(colon != std::string::npos, "histogram spec: expected size:count, got '" + part + "'");
        int64_t size = std::stoll(part.substr(0, colon));
        int64_t count = std::stoll(part.substr(colon + 1));
        require(size >= 1 && count >= 1, "histogram spec: size and count must be >= 1");
        require(h.buckets.empty() || h.buckets.back().size > size,
                "histogram spec: sizes must be strictly decreasing");
        h.buckets.push_back({size, count});
    }
    require(!h.buckets.empty(), "histogram spec: empty");
    return h;
}

double size_discrepancy(const Graph& g, const std::vector<uint8_t>& mask, int64_t bins,
                        DiscrepancyStats* stats) {
    require((int64_t)mask.size() == g.num_nodes, "size_discrepancy: mask length mismatch");
    require(bins >= 1, "size_discrepancy: bins must be >= 1");
    int64_t in_mask = std::count(mask.begin(), mask.end(), uint8_t(1));
    require(in_mask > 0 && in_mask < g.num_nodes,
            "size_discrepancy: both populations must be non-empty");

    // s_i = sum of neighbour degrees / own degree = deg(A^2)_i / deg(A)_i
    std::vector<double> s_mask, s_rest;
    DiscrepancyStats local;
    for (int64_t v = 0; v < g.num_nodes; ++v) {
        int64_t d = g.degree(v);
        if (d == 0) {
            (mask[v] ? local.skipped_train : local.skipped_rest)++;
            continue;
        }
        int64_t acc = 0;
        for (auto u : g.neighbours(v)) acc += g.degree(u);
        double s = double(acc) / double(d);
        (mask[v] ? s_mask : s_rest).push_back(s);
    }
    if (stats) *stats = local;
    require(!s_mask.empty() && !s_rest.empty(),
            "size_discrepancy: a population lost all nodes to zero degrees");

    double lo = s_mask[0], hi = s_mask[0];
    for (auto v : s_mask) lo = std::min(lo, v), hi = std::max(hi, v);
    for (auto v : s_rest) lo = std::min(lo, v), hi = std::max(hi, v);
    std::vector<double> p(bins, 0.0), q(bins, 0.0);
    auto bin_of = [&](double v) {
        if (hi == lo) return int64_t(0);
        auto b = int64_t(double(bins) * (v - lo) / (hi - lo));
        return std::min(b, bins - 1);
    };
    for (auto v : s_mask) p[bin_of(v)] += 1.0 / double(s_mask.size());
    for (auto v : s_rest) q[bin_of(v)] += 1.0 / double(s_rest.size());
    double d = 0.0;
    for (int64_t b = 0; b < bins; ++b) d += std::abs(p[b] - q[b]);
    return d;
}

}  // namespace nt

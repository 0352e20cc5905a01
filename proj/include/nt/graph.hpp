#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nt {

constexpr int64_t kUnlabeled = -1;

// CSR adjacency with node features, labels and train/val/test masks.
// Immutable after construction; transforms return new graphs.
struct Graph {
    int64_t num_nodes = 0;
    std::vector<int64_t> offsets;  // num_nodes + 1
    std::vector<int64_t> indices;  // num_edges
    bool directed = false;

    std::vector<double> features;  // row-major num_nodes x feat_dim
    int64_t feat_dim = 0;
    std::vector<int64_t> labels;  // empty or per node; kUnlabeled = none
    std::vector<uint8_t> train_mask, val_mask, test_mask;

    std::vector<double> edge_attrs;  // row-major num_edges x edge_attr_dim
    int64_t edge_attr_dim = 0;

    int64_t num_edges() const { return (int64_t)indices.size(); }
    int64_t degree(int64_t v) const { return offsets[v + 1] - offsets[v]; }
    std::span<const int64_t> neighbours(int64_t v) const {
        return {indices.data() + offsets[v], (size_t)degree(v)};
    }

    // Throws std::invalid_argument when a structural invariant is broken.
    void validate() const;
};

// Builds CSR from an edge list. Duplicate edges collapse; for undirected
// graphs the relation is symmetrized. Adjacency lists come out sorted.
Graph build_graph(int64_t num_nodes, const std::vector<std::pair<int64_t, int64_t>>& edges,
                  bool directed, const std::vector<double>* edge_attrs = nullptr,
                  int64_t edge_attr_dim = 0);

enum class GraphTransform { add_self_loops, reverse_edges, symmetrize };

Graph transform(const Graph& g, GraphTransform op);

enum class DegreeSide { out, in };

struct DegreeHistogram {
    struct Bucket {
        int64_t size = 0;   // neighbourhood size n_i
        int64_t count = 0;  // number of neighbourhoods c_i
    };
    std::vector<Bucket> buckets;  // strictly decreasing in size
    int64_t zero_degree_nodes = 0;

    int64_t total() const {
        int64_t t = 0;
        for (auto& b : buckets) t += b.count;
        return t;
    }
    int64_t total_slots() const {
        int64_t t = 0;
        for (auto& b : buckets) t += b.count * b.size;
        return t;
    }
};

DegreeHistogram degree_histogram(const Graph& g, DegreeSide side = DegreeSide::out);

// Parses "size:count,size:count,..." (sizes strictly decreasing).
DegreeHistogram histogram_from_spec(const std::string& spec);

struct DiscrepancyStats {
    int64_t skipped_train = 0;
    int64_t skipped_rest = 0;
};

// Total-variation-style distance (in [0, 2]) between the binned distributions
// of s = deg(A^2)/deg(A) on the masked nodes versus the rest.
double size_discrepancy(const Graph& g, const std::vector<uint8_t>& mask, int64_t bins = 100,
                        DiscrepancyStats* stats = nullptr);

}  // namespace nt

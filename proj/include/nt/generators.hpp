#pragma once

#include <cstdint>

#include "nt/graph.hpp"

namespace nt {

// Synthetic task where labels are decided two hops away: every node carries a
// hidden binary attribute, observable only through its own (noisy) features,
// and the label of node i is the majority attribute over the multiset of
// 2-hop path endpoints i -> j -> k with k != i (ties go to attribute 0).
// Built on a triangle-free circulant so that 1-hop neighbour features carry
// no information about the label.
struct MonophilyParams {
    int64_t num_nodes = 2000;
    double feature_noise = 0.05;
    double train_fraction = 0.5;
    double val_fraction = 0.25;
};
Graph generate_monophily_task(const MonophilyParams& p, uint64_t seed);

// Configuration-model graph with degrees drawn from a truncated zipf.
struct PowerLawParams {
    int64_t num_nodes = 1000;
    double exponent = 2.0;  // > 1
    int64_t min_degree = 1;
    int64_t max_degree = 0;  // 0 = num_nodes - 1
    int64_t feat_dim = 4;    // random gaussian features + random binary labels
    double train_fraction = 0.5;
    double val_fraction = 0.25;
};
Graph generate_power_law(const PowerLawParams& p, uint64_t seed);

// rows x cols lattice with 8-neighbour connectivity and Bernoulli(mine_rate)
// labels; features expose the fraction of neighbouring mines.
struct GridParams {
    int64_t rows = 10;
    int64_t cols = 10;
    double mine_rate = 0.2;
    double train_fraction = 0.5;
    double val_fraction = 0.25;
};
Graph generate_grid(const GridParams& p, uint64_t seed);

}  // namespace nt

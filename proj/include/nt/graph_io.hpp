#pragma once

#include <optional>
#include <string>

#include "nt/graph.hpp"

namespace nt {

// Raised for malformed files, out-of-range ids and similar data problems.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LoadOptions {
    bool directed = false;
    // -1 = infer from max id + 1
    int64_t num_nodes = -1;
    // Non-contiguous ids are remapped to 0..n-1 with a warning by default;
    // with remap off they raise a DataError instead.
    bool remap_ids = true;
};

struct LoadResult {
    Graph graph;
    bool remapped = false;
    std::string warning;
};

// "src dst" per line, tab or space separated, '#' comments ignored.
LoadResult load_edge_list(const std::string& path, const LoadOptions& opts = {});
LoadResult parse_edge_list_text(const std::string& text, const LoadOptions& opts = {});

// Single JSON document {"num_nodes","directed","edges",...}.
Graph load_container(const std::string& path);
std::string container_to_json(const Graph& g);
Graph container_from_json(const std::string& text);
void save_container(const Graph& g, const std::string& path);

// Features sidecars: CSV of reals (row i = node i), or raw little-endian
// float32 row-major with a JSON sidecar {"rows","cols"} at meta_path.
void attach_features_csv(Graph& g, const std::string& path);
void attach_features_binary(Graph& g, const std::string& data_path, const std::string& meta_path);

}  // namespace nt

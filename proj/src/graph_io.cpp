#include "nt/graph_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace nt {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

LoadResult parse_edge_list_text(const std::string& text, const LoadOptions& opts) {
    std::vector<std::pair<int64_t, int64_t>> edges;
    std::istringstream in(text);
    std::string line;
    int64_t line_no = 0;
    int64_t max_id = -1;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        int64_t s, d;
        if (!(ls >> s)) continue;  // blank or comment-only line
        if (!(ls >> d))
            throw DataError("edge list line " + std::to_string(line_no) +
                            ": expected 'src dst', got '" + line + "'");
        std::string extra;
        if (ls >> extra)
            throw DataError("edge list line " + std::to_string(line_no) + ": trailing token '" +
                            extra + "'");
        if (s < 0 || d < 0)
            throw DataError("edge list line " + std::to_string(line_no) + ": negative node id");
        edges.push_back({s, d});
        max_id = std::max({max_id, s, d});
    }

    LoadResult res;
    int64_t n = opts.num_nodes >= 0 ? opts.num_nodes : max_id + 1;
    if (opts.num_nodes >= 0 && max_id >= opts.num_nodes)
        throw DataError("edge references node " + std::to_string(max_id) + " but num_nodes is " +
                        std::to_string(opts.num_nodes));

    // detect gaps in the id space when the count was inferred
    if (opts.num_nodes < 0 && !edges.empty()) {
        std::vector<uint8_t> present(n, 0);
        for (auto& [s, d] : edges) present[s] = present[d] = 1;
        int64_t used = std::count(present.begin(), present.end(), uint8_t(1));
        if (used != n) {
            if (!opts.remap_ids)
                throw DataError("node ids are not contiguous (" + std::to_string(used) + " of " +
                                std::to_string(n) + " ids used); enable remapping or fix the file");
            std::vector<int64_t> newid(n, -1);
            int64_t next = 0;
            for (int64_t i = 0; i < n; ++i)
                if (present[i]) newid[i] = next++;
            for (auto& [s, d] : edges) {
                s = newid[s];
                d = newid[d];
            }
            n = next;
            res.remapped = true;
            res.warning = "remapped non-contiguous node ids to 0.." + std::to_string(n - 1);
        }
    }
    res.graph = build_graph(n, edges, opts.directed);
    res.graph.validate();
    return res;
}

LoadResult load_edge_list(const std::string& path, const LoadOptions& opts) {
    return parse_edge_list_text(read_file(path), opts);
}

std::string container_to_json(const Graph& g) {
    nlohmann::ordered_json j;
    j["num_nodes"] = g.num_nodes;
    j["directed"] = g.directed;
    auto& edges = j["edges"] = nlohmann::ordered_json::array();
    for (int64_t u = 0; u < g.num_nodes; ++u)
        for (auto v : g.neighbours(u)) {
            if (!g.directed && v < u) continue;  // keep one record per undirected edge
            edges.push_back({u, v});
        }
    if (g.feat_dim > 0) {
        auto& feats = j["features"] = nlohmann::ordered_json::array();
        for (int64_t i = 0; i < g.num_nodes; ++i) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (int64_t k = 0; k < g.feat_dim; ++k) row.push_back(g.features[i * g.feat_dim + k]);
            feats.push_back(std::move(row));
        }
    }
    if (!g.labels.empty()) j["labels"] = g.labels;
    auto mask_ids = [](const std::vector<uint8_t>& m) {
        std::vector<int64_t> ids;
        for (size_t i = 0; i < m.size(); ++i)
            if (m[i]) ids.push_back((int64_t)i);
        return ids;
    };
    if (!g.train_mask.empty()) {
        j["masks"]["train"] = mask_ids(g.train_mask);
        j["masks"]["val"] = mask_ids(g.val_mask);
        j["masks"]["test"] = mask_ids(g.test_mask);
    }
    return j.dump();
}

Graph container_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("graph container: ") + e.what());
    }
    try {
        int64_t n = j.at("num_nodes").get<int64_t>();
        bool directed = j.value("directed", false);
        std::vector<std::pair<int64_t, int64_t>> edges;
        for (auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2)
                throw DataError("graph container: each edge must be a [src,dst] pair");
            edges.push_back({e[0].get<int64_t>(), e[1].get<int64_t>()});
        }
        Graph g = build_graph(n, edges, directed);
        if (j.contains("features")) {
            auto& feats = j["features"];
            if (!feats.empty()) {
                g.feat_dim = (int64_t)feats[0].size();
                if ((int64_t)feats.size() != n)
                    throw DataError("graph container: features row count != num_nodes");
                g.features.reserve(n * g.feat_dim);
                for (auto& row : feats) {
                    if ((int64_t)row.size() != g.feat_dim)
                        throw DataError("graph container: ragged feature rows");
                    for (auto& v : row) g.features.push_back(v.get<double>());
                }
            }
        }
        if (j.contains("labels")) {
            g.labels = j["labels"].get<std::vector<int64_t>>();
            if ((int64_t)g.labels.size() != n)
                throw DataError("graph container: labels length != num_nodes");
        }
        if (j.contains("masks")) {
            auto read_mask = [&](const char* name) {
                std::vector<uint8_t> m(n, 0);
                for (auto id : j["masks"].value(name, std::vector<int64_t>{})) {
                    if (id < 0 || id >= n) throw DataError("graph container: mask id out of range");
                    m[id] = 1;
                }
                return m;
            };
            g.train_mask = read_mask("train");
            g.val_mask = read_mask("val");
            g.test_mask = read_mask("test");
        }
        g.validate();
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("graph container: ") + e.what());
    }
}

Graph load_container(const std::string& path) { return container_from_json(read_file(path)); }

void save_container(const Graph& g, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write file: " + path);
    f << container_to_json(g) << '\n';
}

void attach_features_csv(Graph& g, const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::vector<double> feats;
    int64_t dim = -1, row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        int64_t cols = 0;
        while (std::getline(ls, cell, ',')) {
            try {
                feats.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw DataError("features csv row " + std::to_string(row_no) + ": bad number '" +
                                cell + "'");
            }
            ++cols;
        }
        if (dim < 0) dim = cols;
        if (cols != dim)
            throw DataError("features csv row " + std::to_string(row_no) + ": ragged width");
    }
    if ((int64_t)feats.size() != g.num_nodes * dim)
        throw DataError("features csv: " + std::to_string(feats.size() / std::max<int64_t>(dim, 1)) +
                        " rows for " + std::to_string(g.num_nodes) + " nodes");
    g.features = std::move(feats);
    g.feat_dim = dim;
}

void attach_features_binary(Graph& g, const std::string& data_path, const std::string& meta_path) {
    static_assert(std::endian::native == std::endian::little,
                  "binary feature files assume a little-endian host");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_file(meta_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("features meta: ") + e.what());
    }
    int64_t rows = meta.at("rows").get<int64_t>();
    int64_t cols = meta.at("cols").get<int64_t>();
    if (rows != g.num_nodes) throw DataError("features binary: rows != num_nodes");
    std::string raw = read_file(data_path);
    if ((int64_t)raw.size() != rows * cols * 4)
        throw DataError("features binary: file size " + std::to_string(raw.size()) +
                        " does not match rows*cols*4");
    g.features.resize(rows * cols);
    const float* src = reinterpret_cast<const float*>(raw.data());
    for (int64_t i = 0; i < rows * cols; ++i) g.features[i] = double(src[i]);
    g.feat_dim = cols;
}

}  // namespace nt

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "psmt/errors.hpp"

namespace psmt {

using NodeSet = std::vector<int>;  // sorted node indices

// Node names are kept so fixtures round-trip; algorithms work on indices.
struct NodeNames {
    std::vector<std::string> names;

    int index(const std::string& name) const;  // throws ParamError
    int add(const std::string& name);          // returns existing index if present
    size_t size() const { return names.size(); }
};

struct Digraph {
    NodeNames nodes;
    std::vector<std::pair<int, int>> edges;
    int sender = -1, receiver = -1;

    void validate() const;
    std::vector<std::vector<int>> out_adjacency() const;
    bool has_edge(int a, int b) const;
};

struct Hyperedge {
    int from = -1;
    NodeSet to;
};

struct Hypergraph {
    NodeNames nodes;
    std::vector<Hyperedge> hyperedges;
    int sender = -1, receiver = -1;

    void validate() const;
    // X -> Y for every hyperedge (X, X*) with Y in X*.
    Digraph directed_links() const;
};

struct NeighborNet {
    NodeNames nodes;
    std::vector<std::pair<int, int>> edges;  // undirected
    int sender = -1, receiver = -1;

    void validate() const;
    std::vector<NodeSet> adjacency() const;
    Digraph as_digraph() const;  // both directions of every edge
};

struct PathSet {
    std::vector<std::vector<int>> paths;  // each starts at the sender, ends at the receiver

    size_t size() const { return paths.size(); }
    NodeSet internal_nodes(size_t i) const;
    // Every path is a real directed path and internal nodes are pairwise disjoint.
    bool valid_for(const Digraph& g) const;
};

// Vertex-split unit-capacity max flow. Augmenting paths are searched with
// neighbors in ascending index order and the resulting family is sorted, so
// the output is deterministic.
PathSet max_disjoint_paths(const Digraph& g);
PathSet max_disjoint_paths(const Hypergraph& h);
// Smallest node set meeting every sender->receiver path; nullopt when a
// direct sender->receiver edge makes separation impossible.
std::optional<NodeSet> min_separator(const Digraph& g);

struct Separability {
    bool separable = false;
    NodeSet witness;
};
Separability is_k_separable(const Hypergraph& h, size_t k);

struct ConnectivityResult {
    bool holds = false;
    NodeSet witness;  // a violating set when !holds
};

// Subset enumerations refuse instances above this many candidate sets.
// Every instance with |V| <= 20 and k <= 3 is accepted.
constexpr uint64_t kSubsetLimit = 2'000'000;

ConnectivityResult strongly_k_connected(const Hypergraph& h, size_t k);
ConnectivityResult weakly_k_connected(const Hypergraph& h, size_t k);

Hypergraph to_hypergraph(const NeighborNet& g);

// neighbor(V1) = V1 plus every node adjacent to V1, minus {sender, receiver}.
NodeSet neighbor_closure(const NeighborNet& g, const NodeSet& v1);
bool k_connected(const NeighborNet& g, size_t k);
ConnectivityResult neighbor_k_connected(const NeighborNet& g, size_t k);

struct WeakNKResult {
    bool holds = false;
    PathSet witness;  // the path family when holds
};
// Some family of n internally disjoint paths such that for every T with
// |T| <= k some path has no internal node in T or adjacent to T.
WeakNKResult weakly_nk_connected(const NeighborNet& g, size_t n, size_t k);

struct HierarchyReport {
    size_t k = 0;
    bool connected = false;          // k node-disjoint paths
    bool weakly_hyper = false;       // weakly k-connected in the hypergraph
    bool neighbor = false;           // k-neighbor-connected
    bool weakly_nk = false;          // weakly (n, k-1)-connected for some n >= k
    size_t weakly_nk_n = 0;          // the n found, 0 when none
    bool chain_consistent = false;   // each predicate implies the next one
};
HierarchyReport connectivity_hierarchy(const NeighborNet& g, size_t k);

}  // namespace psmt

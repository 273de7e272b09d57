#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "psmt/topology.hpp"

namespace psmt {

enum class TopologyKind { Digraph, Hypergraph, Neighbor };

struct Topology {
    TopologyKind kind = TopologyKind::Digraph;
    Digraph digraph;
    Hypergraph hypergraph;
    NeighborNet neighbor;

    const NodeNames& nodes() const;
    // Directed links usable for sender->receiver paths.
    Digraph links() const;
};

std::string kind_name(TopologyKind k);

// {kind, nodes, edges | hyperedges, sender, receiver}; throws ParamError on
// malformed input.
Topology topology_from_json(const nlohmann::json& j);
nlohmann::json topology_to_json(const Topology& t);

std::vector<std::string> fixture_names();
Topology fixture(const std::string& name);

// Builders for tests and generators.
NeighborNet make_neighbor(const std::vector<std::string>& nodes,
                          const std::vector<std::pair<std::string, std::string>>& edges,
                          const std::string& sender = "A", const std::string& receiver = "B");
Digraph make_digraph(const std::vector<std::string>& nodes,
                     const std::vector<std::pair<std::string, std::string>>& edges,
                     const std::string& sender = "A", const std::string& receiver = "B");

}  // namespace psmt

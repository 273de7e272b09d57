#include "psmt/fixtures.hpp"

#include <algorithm>

namespace psmt {

using nlohmann::json;

const NodeNames& Topology::nodes() const
{
    switch (kind) {
    case TopologyKind::Digraph: return digraph.nodes;
    case TopologyKind::Hypergraph: return hypergraph.nodes;
    default: return neighbor.nodes;
    }
}

Digraph Topology::links() const
{
    switch (kind) {
    case TopologyKind::Digraph: return digraph;
    case TopologyKind::Hypergraph: return hypergraph.directed_links();
    default: return neighbor.as_digraph();
    }
}

std::string kind_name(TopologyKind k)
{
    switch (k) {
    case TopologyKind::Digraph: return "digraph";
    case TopologyKind::Hypergraph: return "hypergraph";
    default: return "neighbor";
    }
}

namespace {

template <class G>
void read_common(const json& j, G& g)
{
    for (auto& n : j.at("nodes")) {
        std::string name = n.get<std::string>();
        if (std::find(g.nodes.names.begin(), g.nodes.names.end(), name) != g.nodes.names.end())
            throw ParamError("duplicate node '" + name + "'");
        g.nodes.add(name);
    }
    if (!j.contains("sender") || !j.contains("receiver")) throw ParamError("sender/receiver missing");
    g.sender = g.nodes.index(j.at("sender").get<std::string>());
    g.receiver = g.nodes.index(j.at("receiver").get<std::string>());
}

template <class G>
std::vector<std::pair<int, int>> read_edges(const json& j, const G& g)
{
    std::vector<std::pair<int, int>> out;
    for (auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 2) throw ParamError("edge must be a pair");
        out.push_back({g.nodes.index(e[0].get<std::string>()), g.nodes.index(e[1].get<std::string>())});
    }
    return out;
}

}  // namespace

Topology topology_from_json(const json& j)
{
    try {
        Topology t;
        std::string kind = j.at("kind").get<std::string>();
        if (kind == "digraph") {
            t.kind = TopologyKind::Digraph;
            read_common(j, t.digraph);
            t.digraph.edges = read_edges(j, t.digraph);
            t.digraph.validate();
        } else if (kind == "neighbor") {
            t.kind = TopologyKind::Neighbor;
            read_common(j, t.neighbor);
            t.neighbor.edges = read_edges(j, t.neighbor);
            t.neighbor.validate();
        } else if (kind == "hypergraph") {
            t.kind = TopologyKind::Hypergraph;
            read_common(j, t.hypergraph);
            for (auto& e : j.at("hyperedges")) {
                Hyperedge h;
                h.from = t.hypergraph.nodes.index(e.at("from").get<std::string>());
                for (auto& v : e.at("to")) h.to.push_back(t.hypergraph.nodes.index(v.get<std::string>()));
                std::sort(h.to.begin(), h.to.end());
                t.hypergraph.hyperedges.push_back(std::move(h));
            }
            t.hypergraph.validate();
        } else {
            throw ParamError("unknown topology kind '" + kind + "'");
        }
        return t;
    } catch (const json::exception& e) {
        throw ParamError(std::string("malformed topology: ") + e.what());
    }
}

json topology_to_json(const Topology& t)
{
    json j;
    j["kind"] = kind_name(t.kind);
    const NodeNames& names = t.nodes();
    j["nodes"] = names.names;
    auto edge_list = [&](const std::vector<std::pair<int, int>>& edges) {
        json out = json::array();
        for (auto [a, b] : edges) out.push_back({names.names[a], names.names[b]});
        return out;
    };
    int s = 0, r = 0;
    switch (t.kind) {
    case TopologyKind::Digraph:
        j["edges"] = edge_list(t.digraph.edges);
        s = t.digraph.sender;
        r = t.digraph.receiver;
        break;
    case TopologyKind::Neighbor:
        j["edges"] = edge_list(t.neighbor.edges);
        s = t.neighbor.sender;
        r = t.neighbor.receiver;
        break;
    case TopologyKind::Hypergraph: {
        json hs = json::array();
        for (auto& e : t.hypergraph.hyperedges) {
            json to = json::array();
            for (int v : e.to) to.push_back(names.names[v]);
            hs.push_back({{"from", names.names[e.from]}, {"to", to}});
        }
        j["hyperedges"] = hs;
        s = t.hypergraph.sender;
        r = t.hypergraph.receiver;
        break;
    }
    }
    j["sender"] = names.names.at(s);
    j["receiver"] = names.names.at(r);
    return j;
}

NeighborNet make_neighbor(const std::vector<std::string>& nodes,
                          const std::vector<std::pair<std::string, std::string>>& edges,
                          const std::string& sender, const std::string& receiver)
{
    NeighborNet g;
    for (auto& n : nodes) g.nodes.add(n);
    for (auto& [a, b] : edges) g.edges.push_back({g.nodes.index(a), g.nodes.index(b)});
    g.sender = g.nodes.index(sender);
    g.receiver = g.nodes.index(receiver);
    g.validate();
    return g;
}

Digraph make_digraph(const std::vector<std::string>& nodes,
                     const std::vector<std::pair<std::string, std::string>>& edges,
                     const std::string& sender, const std::string& receiver)
{
    Digraph g;
    for (auto& n : nodes) g.nodes.add(n);
    for (auto& [a, b] : edges) g.edges.push_back({g.nodes.index(a), g.nodes.index(b)});
    g.sender = g.nodes.index(sender);
    g.receiver = g.nodes.index(receiver);
    g.validate();
    return g;
}

std::vector<std::string> fixture_names() { return {"fig1", "fig2", "fig3", "fig5", "fig80", "fig009"}; }

Topology fixture(const std::string& name)
{
    Topology t;
    t.kind = TopologyKind::Neighbor;
    if (name == "fig1") {
        t.neighbor = make_neighbor({"A", "B", "C", "D"},
                                   {{"A", "C"}, {"C", "B"}, {"A", "D"}, {"D", "B"}, {"C", "D"}});
    } else if (name == "fig2") {
        t.neighbor = make_neighbor({"A", "B", "C", "D", "F"},
                                   {{"A", "C"}, {"A", "D"}, {"C", "B"}, {"D", "B"}, {"C", "F"}, {"F", "D"}});
    } else if (name == "fig3") {
        t.neighbor = make_neighbor({"A", "B", "C", "D", "E", "F", "G"},
                                   {{"A", "C"}, {"C", "D"}, {"D", "B"}, {"A", "E"}, {"E", "F"},
                                    {"F", "B"}, {"G", "C"}, {"G", "D"}, {"G", "E"}, {"G", "F"}});
    } else if (name == "fig80") {
        t.neighbor = make_neighbor({"A", "B", "C", "D", "E", "F", "G", "H"},
                                   {{"A", "C"}, {"C", "D"}, {"D", "E"}, {"E", "B"}, {"A", "F"},
                                    {"F", "G"}, {"G", "H"}, {"H", "B"}, {"C", "H"}, {"E", "F"}});
    } else if (name == "fig009") {
        t.neighbor = make_neighbor({"A", "B", "C", "D", "E", "F", "G", "H"},
                                   {{"A", "C"}, {"C", "D"}, {"D", "E"}, {"E", "B"}, {"A", "F"},
                                    {"F", "G"}, {"G", "H"}, {"H", "B"}, {"D", "G"}});
    } else if (name == "fig5") {
        t.kind = TopologyKind::Hypergraph;
        Hypergraph& h = t.hypergraph;
        for (auto n : {"A", "B", "v1", "v2", "v", "u1", "u2"}) h.nodes.add(n);
        auto edge = [&](const std::string& from, std::vector<std::string> to) {
            Hyperedge e;
            e.from = h.nodes.index(from);
            for (auto& v : to) e.to.push_back(h.nodes.index(v));
            std::sort(e.to.begin(), e.to.end());
            h.hyperedges.push_back(e);
        };
        edge("A", {"v1", "v2"});
        edge("v1", {"v", "B"});
        edge("v2", {"v", "B"});
        edge("A", {"u1", "u2"});
        edge("u1", {"v", "B"});
        edge("u2", {"v", "B"});
        h.sender = h.nodes.index("A");
        h.receiver = h.nodes.index("B");
        h.validate();
    } else {
        throw ParamError("unknown fixture '" + name + "'");
    }
    return t;
}

}  // namespace psmt

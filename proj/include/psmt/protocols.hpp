#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "psmt/fixtures.hpp"
#include "psmt/netsim.hpp"

namespace psmt {

struct ProtocolParams {
    size_t k = 1;
    size_t u = 0;
    double delta_r = 0.0;  // loss probability of ideal reliable channels
};

enum class Reliability { Perfect, Probabilistic };

enum class TopologyNeed {
    DisjointPaths,  // forward and backward paths pairwise node disjoint
    SharedPaths,    // backward paths may share nodes with some forward paths
    Hypergraph,
    Fig2Neighbor,
};

struct ProtocolDescriptor {
    std::string id;
    std::string summary;
    Reliability reliability = Reliability::Perfect;
    TopologyNeed need = TopologyNeed::DisjointPaths;
    bool needs_u = false;
    // Path counts for path protocols; throws PreconditionError on bad (k, u).
    std::function<std::pair<size_t, size_t>(const ProtocolParams&)> paths;
    // Rounds (exchanges) never exceeded, when the protocol declares one.
    std::function<std::optional<int>(const ProtocolParams&)> round_bound;
    std::function<ProtocolBody(const ProtocolParams&)> body;
    bool claims_privacy = true;  // false only for plain reliable transmission
};

const std::vector<ProtocolDescriptor>& protocol_registry();
const ProtocolDescriptor& protocol(const std::string& id);  // throws ParamError

// A protocol bound to a concrete network.
struct Instance {
    const ProtocolDescriptor* descriptor = nullptr;
    ProtocolParams params;
    Network network;
    ProtocolBody body;
    std::string precondition;  // human-readable result of the check
};

// Default network: the minimal path layout (or the fig2 / test hypergraph
// fixture for the graph protocols). Throws PreconditionError.
Instance prepare(const std::string& id, const ProtocolParams& params);
// Network extracted from a topology. Throws PreconditionError when the
// topology is below the protocol's connectivity requirement.
Instance prepare(const std::string& id, const ProtocolParams& params, const Topology& topology);
Instance prepare_on(const std::string& id, const ProtocolParams& params, Network network);

Outcome run(const Instance& inst, const AdversarySpec& adv, const FieldElement& message, const Seeds& seeds);

// Hypergraph satisfying all three conditions of the hypergraph (0, delta)
// protocol for the given k: 2k+1 private relays each way.
Hypergraph relay_hypergraph(size_t k);

// Hyperpaths as channels: carriers are internal nodes, observers the other
// receivers of every hyperedge used. Node ids index h's internal nodes.
struct HyperpathLayout {
    Network network;
    std::vector<int> node_of;  // hypergraph node -> network node, -1 for A and B
};
Channel hyperpath_channel(const Hypergraph& h, const std::vector<int>& path, const std::vector<int>& node_of,
                          Direction dir, int index);

// Scripted adversaries used by the reliability sweeps. Each one acts on the
// channels it controls; `from_round` delays activation.
enum class Script {
    Silent,          // drop everything
    EchoForger,      // alter every B->A data word
    ShareFlipper,    // add a nonzero offset to every A->B data word
    StopForger,      // rewrite control symbols on B->A channels
    FormatCorruptor, // truncate or push words out of the field
    ClassSplitter,   // per-channel random B->A payloads
    Replay,          // resend the first round's traffic
    Tamper,          // random changes everywhere
};
std::vector<Script> all_scripts();
std::string script_name(Script s);
AdversarySpec scripted(Script s, NodeSet corrupted, uint64_t seed, int from_round = 1);

}  // namespace psmt

#include "doctest_main.hpp"

#include <map>

#include "psmt/protocols.hpp"
#include "sweeps.hpp"

using namespace psmt;
using sweeps::Tally;

namespace {

const FieldSpec& big() { return FieldSpec::binary(16); }

ProtocolParams default_params(const ProtocolDescriptor& d)
{
    if (d.id == "perfect_u1") return {2, 1};
    if (d.id == "perfect_recursive") return {3, 2};
    if (d.id == "perfect_3k") return {2, 1};
    if (d.id == "perfect_efficient" || d.id == "perfect_shared_feedback") return {3, 2};
    if (d.id == "k1_feedback") return {1, 1};
    if (d.needs_u) return {2, 1};
    return {1, 0};
}

const FieldSpec& field_for(const Instance& inst)
{
    return inst.descriptor->reliability == Reliability::Perfect ? sweeps::small_field(inst) : big();
}

int node_named(const Network& net, const std::string& name)
{
    for (size_t i = 0; i < net.node_names.size(); ++i)
        if (net.node_names[i] == name) return int(i);
    FAIL("no node " << name);
    return -1;
}

}  // namespace

TEST_CASE("every registered protocol delivers on honest runs")
{
    REQUIRE(protocol_registry().size() == 12);
    for (const auto& d : protocol_registry()) {
        Instance inst = prepare(d.id, default_params(d));
        const FieldSpec& f = field_for(inst);
        Rng rng(99);
        Tally t;
        for (int i = 0; i < 100; ++i) {
            FieldElement m = f.elem(rng.below(f.order()));
            sweeps::record(t, inst, run(inst, no_adversary(), m, {uint64_t(i), uint64_t(i)}), m);
        }
        INFO(d.id);
        CHECK(t.failures() == 0);
        CHECK(t.bound_violations == 0);
    }
}

TEST_CASE("unknown protocol ids and bad parameters are refused")
{
    CHECK_THROWS_AS(protocol("nope"), ParamError);
    CHECK_THROWS_AS(prepare("k1_feedback", {2, 1}), PreconditionError);
    CHECK_THROWS_AS(prepare("perfect_u1", {1, 1}), PreconditionError);
    CHECK_THROWS_AS(prepare("subset_enum_0delta", {2, 0}), PreconditionError);
    CHECK_THROWS_AS(prepare("efficient_0delta", {1, 2}), PreconditionError);
    CHECK_THROWS_AS(prepare("perfect_efficient", {1, 2}), PreconditionError);
}

TEST_CASE("path protocols refuse one forward path too few")
{
    for (const auto& d : protocol_registry()) {
        if (d.need != TopologyNeed::DisjointPaths) continue;
        ProtocolParams p = default_params(d);
        auto [nf, nb] = d.paths(p);
        Instance inst = prepare_on(d.id, p, path_network(nf - 1, nb));
        const FieldSpec& f = FieldSpec::prime(11);
        INFO(d.id);
        CHECK_THROWS_AS(run(inst, no_adversary(), f.one(), {}), PreconditionError);
    }
}

TEST_CASE("a field without enough evaluation points is refused")
{
    Instance inst = prepare("perfect_3k", {3, 1});  // 9 points
    CHECK_THROWS_AS(run(inst, no_adversary(), FieldSpec::prime(7).one(), {}), PreconditionError);
    CHECK_NOTHROW(run(inst, no_adversary(), FieldSpec::prime(11).one(), {}));
}

TEST_CASE("path networks are extracted from digraphs")
{
    // Three disjoint A->B paths and one B->A path.
    Digraph g = make_digraph({"A", "B", "x", "y", "z", "w"},
                             {{"A", "x"}, {"x", "B"}, {"A", "y"}, {"y", "B"}, {"A", "z"}, {"z", "B"}, {"B", "w"}, {"w", "A"}},
                             "A", "B");
    Topology t;
    t.kind = TopologyKind::Digraph;
    t.digraph = g;
    Instance ok = prepare("perfect_3k", {1, 1}, t);
    CHECK(ok.network.forward().size() == 3);
    CHECK(ok.network.backward().size() == 1);
    const FieldSpec& f = FieldSpec::prime(7);
    Outcome o = run(ok, scripted(Script::ShareFlipper, {node_named(ok.network, "y")}, 3), f.elem(5), {1, 1});
    REQUIRE(o.delivered);
    CHECK(*o.delivered == f.elem(5));

    CHECK_THROWS_AS(prepare("oneway_0delta", {2, 0}, t), PreconditionError);
    CHECK_THROWS_AS(prepare("efficient_0delta", {2, 2}, t), PreconditionError);
    CHECK_THROWS_AS(prepare("perfect_3k", {1, 1}, fixture("fig2")), PreconditionError);
}

TEST_CASE("k = 1 feedback: corrupting q alone leaves the step-2 acceptance intact")
{
    Instance inst = prepare("k1_feedback", {1, 1});
    const int q = node_named(inst.network, "q1");
    const FieldElement m = big().elem(4242);
    for (Script s : all_scripts()) {
        Outcome o = run(inst, scripted(s, {q}, 5), m, {8, 8});
        INFO(script_name(s));
        REQUIRE(o.delivered);
        CHECK(*o.delivered == m);
        // B's round-2 message on q is the OK symbol.
        bool ok_sent = false;
        for (const auto& msg : o.transcript.messages)
            if (msg.round == 2 && msg.key.slot == kControlSlot && msg.sent)
                ok_sent = Reader(big(), msg.sent).symbol() == Symbol::Ok;
        CHECK(ok_sent);
    }
}

TEST_CASE("k = 1 feedback: a lying forward path is routed around")
{
    Instance inst = prepare("k1_feedback", {1, 1});
    const int p0 = node_named(inst.network, "p1");
    Tally t;
    for (uint64_t i = 0; i < 10'000; ++i) {
        FieldElement m = big().elem(i * 7919 % big().order());
        AdversarySpec a = i % 2 ? scripted(Script::ShareFlipper, {p0}, i) : random_tamperer({p0}, i);
        sweeps::record(t, inst, run(inst, a, m, {i, i}), m);
    }
    CHECK(t.failures() == 0);
    CHECK(t.max_rounds == 3);
}

TEST_CASE("subset enumeration survives every placement of two corrupted paths")
{
    Instance inst = prepare("subset_enum_0delta", {2, 1});
    Tally t = sweeps::placement_sweep(inst, big());
    CHECK(t.runs > 0);
    CHECK(t.failures() == 0);
    CHECK(t.bound_violations == 0);

    Instance small = prepare("subset_enum_0delta", {1, 1});
    CHECK(run(small, no_adversary(), big().one(), {}).rounds == 9);  // 3 subsets, 3 exchanges each
}

TEST_CASE("efficient (0, delta): forward-side corruption at GF(2^16)")
{
    Instance inst = prepare("efficient_0delta", {2, 1});
    const auto fwd = inst.network.forward();
    std::vector<NodeSet> pairs;
    for (size_t a = 0; a < fwd.size(); ++a)
        for (size_t b = a + 1; b < fwd.size(); ++b)
            pairs.push_back({inst.network.channels[fwd[a]].carriers[0], inst.network.channels[fwd[b]].carriers[0]});
    Tally t;
    const auto scripts = all_scripts();
    for (uint64_t i = 0; i < 10'000; ++i) {
        const NodeSet& nodes = pairs[i % pairs.size()];
        AdversarySpec a = i % 2 ? random_tamperer(nodes, i) : scripted(scripts[(i / 2) % scripts.size()], nodes, i);
        FieldElement m = big().elem(i * 31 % big().order());
        sweeps::record(t, inst, run(inst, a, m, {i + 1, i}), m);
    }
    CHECK(t.failures() == 0);
    CHECK(t.bound_violations == 0);
}

TEST_CASE("efficient (0, delta): both feedback paths corrupted")
{
    Instance inst = prepare("efficient_0delta", {2, 2});
    NodeSet back;
    for (int c : inst.network.backward()) back.push_back(inst.network.channels[c].carriers[0]);
    const FieldSpec& f = FieldSpec::prime(7);
    for (Script s : all_scripts())
        for (uint64_t seed = 0; seed < 20; ++seed) {
            FieldElement m = f.elem(seed % 7);
            Outcome o = run(inst, scripted(s, back, seed), m, {seed, seed});
            INFO(script_name(s));
            REQUIRE(o.delivered);
            CHECK(*o.delivered == m);
            CHECK(o.rounds <= 2 * 2 + 2 + 2);
        }
}

TEST_CASE("oneway (0, delta) uses exactly 2k+1 rounds")
{
    for (size_t k = 1; k <= 3; ++k) {
        Instance inst = prepare("oneway_0delta", {k, 0});
        Tally t = sweeps::tamper_trials(inst, big(), 300, 11);
        CHECK(t.failures() == 0);
        CHECK(t.max_rounds == int(2 * k + 1));
    }
}

TEST_CASE("perfect protocols: exhaustive placements at small parameters")
{
    struct Case {
        const char* id;
        ProtocolParams p;
    };
    for (const Case& c : {Case{"perfect_u1", {2, 1}}, Case{"perfect_3k", {1, 1}}, Case{"perfect_3k", {2, 1}},
                          Case{"perfect_efficient", {2, 1}}, Case{"perfect_shared_feedback", {2, 1}},
                          Case{"perfect_recursive", {2, 2}}}) {
        Instance inst = prepare(c.id, c.p);
        Tally t = sweeps::placement_sweep(inst, sweeps::small_field(inst));
        INFO(c.id << " k=" << c.p.k << " u=" << c.p.u);
        CHECK(t.runs > 0);
        CHECK(t.failures() == 0);
        CHECK(t.bound_violations == 0);
    }
}

TEST_CASE("recursive protocol: a forged echo triggers exactly one recursion")
{
    Instance inst = prepare("perfect_recursive", {3, 2});
    const FieldSpec& f = FieldSpec::prime(11);
    const int p3 = node_named(inst.network, "p3");
    const int q2 = node_named(inst.network, "q2");
    Outcome o = run(inst, scripted(Script::EchoForger, {p3, q2}, 4), f.elem(9), {2, 2});
    REQUIRE(o.delivered);
    CHECK(*o.delivered == f.elem(9));
    // One subset round (3 exchanges), then the k = 2, u = 1 base over 5
    // paths, which ends on B's stop.
    CHECK(o.rounds == 3 + 3 * 5 + 1);

    Outcome honest = run(inst, no_adversary(), f.elem(9), {2, 2});
    CHECK(honest.rounds > o.rounds);
}

TEST_CASE("recursive path counts shrink fast enough")
{
    const auto& d = protocol("perfect_recursive");
    for (size_t k = 3; k <= 10; ++k)
        for (size_t u = 2; u <= k; ++u) {
            const size_t n = d.paths({k, u}).first;
            CHECK(std::max(3 * k + 1 - 2 * u, 2 * k + 1) == n);
            CHECK(d.paths({k - 1, u - 1}).first <= n - 1);
        }
    const auto& e = protocol("perfect_efficient");
    for (size_t k = 1; k <= 10; ++k)
        for (size_t u = 1; u <= k; ++u) {
            const size_t n = e.paths({k, u}).first;
            if (u > 1) CHECK(e.paths({k - 1, u - 1}).first <= n - 1);
            CHECK(n >= 2 * k + 1);
        }
}

TEST_CASE("perfect_3k: a forged stop on q changes nothing")
{
    Instance inst = prepare("perfect_3k", {1, 1});
    const FieldSpec& f = FieldSpec::prime(7);
    const int q = node_named(inst.network, "q1");
    for (uint64_t seed = 0; seed < 50; ++seed) {
        FieldElement m = f.elem(seed % 7);
        for (Script s : {Script::StopForger, Script::EchoForger, Script::Replay}) {
            Outcome o = run(inst, scripted(s, {q}, seed), m, {seed, seed});
            REQUIRE(o.delivered);
            CHECK(*o.delivered == m);
        }
    }
}

TEST_CASE("perfect_efficient stays within 11u exchanges")
{
    for (ProtocolParams p : {ProtocolParams{2, 1}, ProtocolParams{2, 2}, ProtocolParams{3, 1}}) {
        Instance inst = prepare("perfect_efficient", p);
        Tally t = sweeps::placement_sweep(inst, sweeps::small_field(inst));
        CHECK(t.failures() == 0);
        CHECK(t.max_rounds <= int(11 * p.u));
        CHECK(t.bound_violations == 0);
    }
}

TEST_CASE("shared feedback: a corrupted shared node fills the bad set and phase two delivers")
{
    Instance inst = prepare("perfect_shared_feedback", {2, 1});
    const int q = inst.network.channels[inst.network.backward()[0]].carriers[0];
    // The backward path runs through a node that also carries a forward path.
    int sharing = 0;
    for (int c : inst.network.forward())
        if (inst.network.channels[c].carriers[0] == q) ++sharing;
    CHECK(sharing == 1);
    const FieldSpec& f = FieldSpec::prime(7);
    for (Script s : all_scripts()) {
        Outcome o = run(inst, scripted(s, {q}, 6), f.elem(3), {4, 4});
        INFO(script_name(s));
        REQUIRE(o.delivered);
        CHECK(*o.delivered == f.elem(3));
    }
}

TEST_CASE("shared feedback refuses too few feedback-free forward paths")
{
    Network net;
    net.node_names = {"a", "b", "c"};
    for (int i = 0; i < 3; ++i) net.channels.push_back({Direction::AB, i, "p", {i}, {}, false, 0.0});
    net.channels.push_back({Direction::BA, 0, "q", {0, 1}, {}, false, 0.0});
    Instance inst = prepare_on("perfect_shared_feedback", {1, 1}, net);
    CHECK_THROWS_AS(run(inst, no_adversary(), FieldSpec::prime(7).one(), {}), PreconditionError);
}

TEST_CASE("shared feedback never reports both pad halves in one cycle")
{
    for (ProtocolParams p : {ProtocolParams{2, 1}, ProtocolParams{2, 2}}) {
        Instance inst = prepare("perfect_shared_feedback", p);
        const FieldSpec& f = sweeps::small_field(inst);
        const auto bwd = inst.network.backward();
        long audited = 0;
        for (const auto& nodes : sweeps::placements(inst.network.node_count(), p.k))
            for (Script s : all_scripts()) {
                Outcome o = run(inst, scripted(s, nodes, 9), f.elem(2), {3, 3});
                CHECK(o.delivered == std::optional<FieldElement>(f.elem(2)));
                // (cycle, sub-protocol) -> phases in which B sent a share report
                std::map<std::pair<int, int>, int> reports;
                for (const auto& m : o.transcript.messages) {
                    if (!m.sent || m.key.slot >= kControlSlot) continue;
                    for (size_t j = 0; j < bwd.size(); ++j)
                        if (m.key.channel == bwd[j] && m.key.slot == int(2 * j)) {
                            const int phase = (m.round - 1) % 6;
                            reports[{(m.round - 1) / 6, int(j)}] |= phase == 1 ? 1 : phase == 4 ? 2 : 4;
                        }
                }
                for (const auto& [key, mask] : reports) {
                    CHECK(mask != 3);
                    CHECK((mask & 4) == 0);
                    ++audited;
                }
            }
        CHECK(audited > 0);
    }
}

TEST_CASE("hypergraph reliable transmission on the fig5 hypergraph")
{
    Instance inst = prepare("hypergraph_reliable", {1, 0}, fixture("fig5"));
    const FieldSpec& f = FieldSpec::prime(7);
    for (int v = 0; v < int(inst.network.node_count()); ++v)
        for (Script s : all_scripts()) {
            Outcome o = run(inst, scripted(s, {v}, 1), f.elem(6), {1, 1});
            REQUIRE(o.delivered);
            CHECK(*o.delivered == f.elem(6));
        }

    Topology chain;
    chain.kind = TopologyKind::Hypergraph;
    Hypergraph& h = chain.hypergraph;
    for (auto n : {"A", "x", "B"}) h.nodes.add(n);
    h.hyperedges = {{0, {1}}, {1, {2}}};
    h.sender = 0;
    h.receiver = 2;
    CHECK_THROWS_AS(prepare("hypergraph_reliable", {1, 0}, chain), PreconditionError);
    CHECK_THROWS_AS(prepare("hypergraph_0delta", {1, 0}, fixture("fig5")), PreconditionError);
}

TEST_CASE("hypergraph reliable transmission is not private")
{
    Instance inst = prepare("hypergraph_reliable", {1, 0});
    CHECK_FALSE(inst.descriptor->claims_privacy);
    auto t = sweeps::privacy_sweep(inst, FieldSpec::prime(5), {passive_observer({0})}, 1000);
    CHECK(t.worst == doctest::Approx(2.0));
}

TEST_CASE("hypergraph (0, delta): every single-node corruption at GF(2^16)")
{
    Instance inst = prepare("hypergraph_0delta", {1, 0});
    CHECK(inst.network.channels.size() == 6 + 3 + 3);  // witnesses, forward, backward
    for (int v = 0; v < int(inst.network.node_count()); ++v) {
        Tally t;
        for (uint64_t i = 0; i < 1000; ++i) {
            FieldElement m = big().elem(i * 13 % big().order());
            AdversarySpec a = i % 2 ? random_tamperer({v}, i) : scripted(all_scripts()[(i / 2) % 8], {v}, i);
            sweeps::record(t, inst, run(inst, a, m, {i, i}), m);
        }
        CHECK(t.failures() == 0);
    }
}

TEST_CASE("neighbor network protocol on fig2")
{
    Instance inst = prepare("neighbor_exforwd", {1, 0});
    for (const char* name : {"C", "D", "F"}) {
        const int v = node_named(inst.network, name);
        Tally t;
        for (uint64_t i = 0; i < 1000; ++i) {
            FieldElement m = big().elem(i * 17 % big().order());
            AdversarySpec a = i % 2 ? random_tamperer({v}, i) : scripted(all_scripts()[(i / 2) % 8], {v}, i);
            sweeps::record(t, inst, run(inst, a, m, {i, i}), m);
        }
        INFO(name);
        CHECK(t.failures() == 0);
    }

    // Relabelled copy of fig2 is accepted; fig1 is not.
    Topology t;
    t.kind = TopologyKind::Neighbor;
    t.neighbor = make_neighbor({"S", "R", "x", "y", "z"},
                               {{"S", "y"}, {"S", "z"}, {"y", "R"}, {"z", "R"}, {"y", "x"}, {"x", "z"}}, "S", "R");
    CHECK_NOTHROW(prepare("neighbor_exforwd", {1, 0}, t));
    CHECK_THROWS_AS(prepare("neighbor_exforwd", {1, 0}, fixture("fig1")), PreconditionError);
    CHECK_THROWS_AS(prepare("neighbor_exforwd", {2, 0}, fixture("fig2")), PreconditionError);
}

TEST_CASE("neighbor network protocol fails at the reliable channel's rate")
{
    const double dr = 0.2;
    Instance inst = prepare("neighbor_exforwd", {1, 0, dr});
    Tally t;
    for (uint64_t i = 0; i < 10'000; ++i) sweeps::record(t, inst, run(inst, no_adversary(), big().elem(i), {i, i}), big().elem(i));
    CHECK(t.wrong == 0);
    const double expected = 1 - (1 - dr) * (1 - dr);
    CHECK(double(t.none) / double(t.runs) == doctest::Approx(expected).epsilon(0.08));
}

TEST_CASE("privacy at GF(5) for the small protocols")
{
    const FieldSpec& f = FieldSpec::prime(5);
    for (auto [id, p] : std::vector<std::pair<const char*, ProtocolParams>>{
             {"oneway_0delta", {1, 0}}, {"k1_feedback", {1, 1}}, {"perfect_3k", {1, 1}},
             {"perfect_efficient", {1, 1}}, {"perfect_shared_feedback", {1, 1}}}) {
        Instance inst = prepare(id, p);
        std::vector<AdversarySpec> advs;
        for (int v = 0; v < int(inst.network.node_count()); ++v) {
            advs.push_back(passive_observer({v}));
            advs.push_back(scripted(Script::ShareFlipper, {v}, 1));
            advs.push_back(scripted(Script::EchoForger, {v}, 1));
        }
        auto t = sweeps::privacy_sweep(inst, f, advs, 2000);
        INFO(id << " worst " << t.worst_adversary);
        CHECK(t.all_exact);
        CHECK(t.stable);
        CHECK(t.worst == doctest::Approx(0.0));
    }
}

TEST_CASE("privacy of the neighbor protocol against a passive F")
{
    // The public tag words depend on more coins than the enumeration limit
    // allows, so those pairs are estimated.
    Instance inst = prepare("neighbor_exforwd", {1, 0});
    const FieldSpec& f = FieldSpec::prime(5);
    PrivacyRequest r;
    r.body = &inst.body;
    r.network = &inst.network;
    r.field = &f;
    r.k = 1;
    r.adversary = passive_observer({node_named(inst.network, "F")});
    r.m0 = f.elem(1);
    r.m1 = f.elem(4);
    r.honest_seed = 17;
    auto rep = view_distance(r);
    CHECK(rep.structure_stable);
    for (const auto& m : rep.marginals)
        if (m.exact) CHECK(m.distance == doctest::Approx(0.0));
    CHECK(rep.distance <= 0.05);
}

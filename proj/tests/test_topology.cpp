#include "doctest_main.hpp"

#include <deque>
#include <functional>

#include "psmt/fixtures.hpp"
#include "psmt/rng.hpp"

using namespace psmt;

namespace {

bool reaches_avoiding(const Digraph& g, const std::vector<bool>& removed)
{
    std::vector<bool> seen(g.nodes.size(), false);
    std::deque<int> q{g.sender};
    seen[g.sender] = true;
    while (!q.empty()) {
        int v = q.front();
        q.pop_front();
        if (v == g.receiver) return true;
        for (auto [a, b] : g.edges)
            if (a == v && !seen[b] && !removed[b]) {
                seen[b] = true;
                q.push_back(b);
            }
    }
    return false;
}

// Smallest vertex separator by exhaustive subset search; a direct
// sender->receiver edge contributes one extra unseparable path.
size_t brute_menger(Digraph g)
{
    size_t extra = 0;
    auto it = std::remove(g.edges.begin(), g.edges.end(), std::make_pair(g.sender, g.receiver));
    if (it != g.edges.end()) extra = 1;
    g.edges.erase(it, g.edges.end());
    std::vector<int> inner;
    for (int v = 0; v < int(g.nodes.size()); ++v)
        if (v != g.sender && v != g.receiver) inner.push_back(v);
    for (size_t size = 0; size <= inner.size(); ++size) {
        std::vector<bool> pick(inner.size(), false);
        std::fill(pick.begin(), pick.begin() + size, true);
        do {
            std::vector<bool> removed(g.nodes.size(), false);
            for (size_t i = 0; i < inner.size(); ++i)
                if (pick[i]) removed[inner[i]] = true;
            if (!reaches_avoiding(g, removed)) return size + extra;
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    return inner.size() + extra;
}

Digraph random_digraph(Rng& rng)
{
    Digraph g;
    size_t n = 2 + rng.below(7);  // 2..8 nodes
    for (size_t i = 0; i < n; ++i) g.nodes.add("n" + std::to_string(i));
    g.sender = 0;
    g.receiver = 1;
    double p = 0.2 + 0.6 * rng.unit();
    for (int a = 0; a < int(n); ++a)
        for (int b = 0; b < int(n); ++b)
            if (a != b && rng.unit() < p) g.edges.push_back({a, b});
    return g;
}

NeighborNet random_net(Rng& rng, bool allow_direct)
{
    NeighborNet g;
    size_t n = 3 + rng.below(7);  // 3..9 nodes
    for (size_t i = 0; i < n; ++i) g.nodes.add("n" + std::to_string(i));
    g.sender = 0;
    g.receiver = 1;
    double p = 0.25 + 0.5 * rng.unit();
    for (int a = 0; a < int(n); ++a)
        for (int b = a + 1; b < int(n); ++b) {
            if (!allow_direct && a == 0 && b == 1) continue;
            if (rng.unit() < p) g.edges.push_back({a, b});
        }
    return g;
}

int id(const Topology& t, const std::string& n) { return t.nodes().index(n); }

}  // namespace

TEST_CASE("menger duality on random digraphs")
{
    Rng rng(500);
    for (int i = 0; i < 500; ++i) {
        Digraph g = random_digraph(rng);
        PathSet ps = max_disjoint_paths(g);
        CAPTURE(i);
        REQUIRE(ps.valid_for(g));
        CHECK(ps.size() == brute_menger(g));
        auto sep = min_separator(g);
        if (sep) {
            CHECK(sep->size() == ps.size());
            std::vector<bool> removed(g.nodes.size(), false);
            for (int v : *sep) removed[v] = true;
            CHECK_FALSE(reaches_avoiding(g, removed));
        } else {
            CHECK(g.has_edge(g.sender, g.receiver));
        }
    }
}

TEST_CASE("simple chains")
{
    Digraph chain = make_digraph({"A", "x", "B"}, {{"A", "x"}, {"x", "B"}});
    PathSet ps = max_disjoint_paths(chain);
    REQUIRE(ps.size() == 1);
    CHECK(ps.paths[0] == std::vector<int>{0, 1, 2});

    Topology t;
    t.kind = TopologyKind::Hypergraph;
    for (auto n : {"A", "x", "B"}) t.hypergraph.nodes.add(n);
    t.hypergraph.sender = 0;
    t.hypergraph.receiver = 2;
    t.hypergraph.hyperedges = {{0, {1}}, {1, {2}}};
    auto s = is_k_separable(t.hypergraph, 1);
    CHECK(s.separable);
    CHECK(s.witness == NodeSet{1});

    Hypergraph direct = t.hypergraph;
    direct.hyperedges.push_back({0, {2}});
    CHECK_FALSE(is_k_separable(direct, 0).separable);
    CHECK(strongly_k_connected(direct, 1).holds);

    Digraph none = make_digraph({"A", "B"}, {});
    CHECK(max_disjoint_paths(none).size() == 0);
}

TEST_CASE("fig5 hypergraph facts")
{
    Topology t = fixture("fig5");
    PathSet ps = max_disjoint_paths(t.hypergraph);
    CHECK(ps.size() >= 3);
    CHECK(ps.valid_for(t.hypergraph.directed_links()));
    CHECK_FALSE(is_k_separable(t.hypergraph, 2).separable);
    auto weak = weakly_k_connected(t.hypergraph, 2);
    CHECK_FALSE(weak.holds);
    CHECK(weak.witness == NodeSet{id(t, "v")});
}

TEST_CASE("neighbor network hypergraph view")
{
    Topology t = fixture("fig1");
    Hypergraph h = to_hypergraph(t.neighbor);
    bool found = false;
    size_t total = 0;
    for (auto& e : h.hyperedges) {
        total += e.to.size();
        if (e.from == id(t, "C")) {
            found = true;
            CHECK(e.to == NodeSet{id(t, "A"), id(t, "B"), id(t, "D")});
        }
    }
    CHECK(found);
    CHECK(total == 2 * t.neighbor.edges.size());

    NeighborNet lonely = make_neighbor({"A", "B", "z"}, {{"A", "B"}});
    Hypergraph hl = to_hypergraph(lonely);
    CHECK(hl.hyperedges[2].to.empty());
}

TEST_CASE("figure connectivity facts")
{
    auto fig1 = fixture("fig1").neighbor;
    CHECK(k_connected(fig1, 2));
    CHECK_FALSE(weakly_k_connected(to_hypergraph(fig1), 2).holds);

    auto fig2 = fixture("fig2").neighbor;
    CHECK(weakly_k_connected(to_hypergraph(fig2), 2).holds);
    CHECK_FALSE(neighbor_k_connected(fig2, 2).holds);

    auto fig80 = fixture("fig80").neighbor;
    CHECK(neighbor_k_connected(fig80, 2).holds);
    CHECK_FALSE(weakly_nk_connected(fig80, 2, 1).holds);

    Topology t3 = fixture("fig3");
    auto weak3 = weakly_k_connected(to_hypergraph(t3.neighbor), 2);
    CHECK_FALSE(weak3.holds);
    CHECK(weak3.witness == NodeSet{id(t3, "G")});
    PathSet p3 = max_disjoint_paths(t3.neighbor.as_digraph());
    CHECK(p3.size() == 2);

    auto r1 = connectivity_hierarchy(fig1, 2);
    CHECK(r1.connected);
    CHECK_FALSE(r1.weakly_hyper);
    auto r2 = connectivity_hierarchy(fig2, 2);
    CHECK(r2.weakly_hyper);
    CHECK_FALSE(r2.neighbor);
    auto r80 = connectivity_hierarchy(fig80, 2);
    CHECK(r80.neighbor);
    CHECK_FALSE(r80.weakly_nk);
    for (auto name : fixture_names()) {
        Topology t = fixture(name);
        if (t.kind != TopologyKind::Neighbor) continue;
        for (size_t k = 1; k <= 2; ++k) CHECK(connectivity_hierarchy(t.neighbor, k).chain_consistent);
    }
}

TEST_CASE("neighbor predicates on small cases")
{
    NeighborNet two_chains = make_neighbor({"A", "B", "x", "y"}, {{"A", "x"}, {"x", "B"}, {"A", "y"}, {"y", "B"}});
    auto w = weakly_nk_connected(two_chains, 2, 1);
    CHECK(w.holds);
    CHECK(w.witness.size() == 2);
    CHECK(weakly_nk_connected(two_chains, 2, 0).holds);
    CHECK(neighbor_k_connected(two_chains, 1).holds);
    CHECK(neighbor_closure(two_chains, {2}) == NodeSet{2});

    auto fig1 = fixture("fig1").neighbor;
    CHECK(weakly_nk_connected(fig1, 2, 0).holds);
}

// With a direct sender-receiver edge the step from k-neighbor-connectivity to
// weak k-hyper-connectivity fails: a common neighbor of A and B removes both
// of their hyperedges while the edge itself survives the neighbor removal.
TEST_CASE("direct edge breaks the neighbor to hyper step")
{
    NeighborNet tri = make_neighbor({"A", "B", "x"}, {{"A", "B"}, {"A", "x"}, {"x", "B"}});
    auto r = connectivity_hierarchy(tri, 2);
    CHECK(r.connected);
    CHECK(r.neighbor);
    CHECK_FALSE(r.weakly_hyper);
    CHECK_FALSE(r.chain_consistent);

    std::vector<std::string> k5{"A", "B", "x", "y", "z"};
    std::vector<std::pair<std::string, std::string>> all;
    for (size_t i = 0; i < 5; ++i)
        for (size_t j = i + 1; j < 5; ++j) all.push_back({k5[i], k5[j]});
    auto rk = connectivity_hierarchy(make_neighbor(k5, all), 2);
    CHECK(rk.connected);
    CHECK(rk.neighbor);
    CHECK(rk.weakly_nk);
    CHECK_FALSE(rk.weakly_hyper);
}

TEST_CASE("hierarchy holds on random nets without a direct edge")
{
    Rng rng(200);
    int checked = 0;
    for (int i = 0; i < 200; ++i) {
        NeighborNet g = random_net(rng, false);
        for (size_t k = 1; k <= 2; ++k) {
            auto r = connectivity_hierarchy(g, k);
            CAPTURE(i);
            CAPTURE(k);
            CHECK(r.chain_consistent);
            ++checked;
        }
    }
    CHECK(checked == 400);
}

TEST_CASE("hierarchy witness paths are genuine")
{
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        NeighborNet g = random_net(rng, true);
        auto w = weakly_nk_connected(g, 2, 1);
        if (w.holds) CHECK(w.witness.valid_for(g.as_digraph()));
    }
}

TEST_CASE("size limit")
{
    NeighborNet big;
    for (int i = 0; i < 40; ++i) big.nodes.add("n" + std::to_string(i));
    big.sender = 0;
    big.receiver = 1;
    for (int i = 2; i < 40; ++i) {
        big.edges.push_back({0, i});
        big.edges.push_back({i, 1});
    }
    CHECK_THROWS_AS(neighbor_k_connected(big, 8), SizeLimit);
    CHECK_NOTHROW(neighbor_k_connected(big, 3));
}

TEST_CASE("fixture json round trip")
{
    CHECK(fixture_names() == std::vector<std::string>{"fig1", "fig2", "fig3", "fig5", "fig80", "fig009"});
    for (auto& name : fixture_names()) {
        Topology t = fixture(name);
        auto j = topology_to_json(t);
        Topology back = topology_from_json(j);
        CHECK(topology_to_json(back) == j);
    }
    auto j2 = topology_to_json(fixture("fig2"));
    CHECK(j2["edges"] == nlohmann::json::parse(
                             R"([["A","C"],["A","D"],["C","B"],["D","B"],["C","F"],["F","D"]])"));
    CHECK_THROWS_AS(topology_from_json(nlohmann::json::parse(R"({"kind":"neighbor","nodes":["A"],"edges":[]})")),
                    ParamError);
    CHECK_THROWS_AS(topology_from_json(nlohmann::json::parse(R"({"kind":"blob"})")), ParamError);
}

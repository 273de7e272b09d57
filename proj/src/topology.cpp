#include "psmt/topology.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <set>

namespace psmt {

int NodeNames::index(const std::string& name) const
{
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return int(i);
    throw ParamError("unknown node '" + name + "'");
}

int NodeNames::add(const std::string& name)
{
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return int(i);
    names.push_back(name);
    return int(names.size() - 1);
}

namespace {

void check_ends(int sender, int receiver, size_t n)
{
    if (sender < 0 || receiver < 0 || size_t(sender) >= n || size_t(receiver) >= n)
        throw ParamError("sender/receiver missing");
    if (sender == receiver) throw ParamError("sender and receiver must differ");
}

void check_node(int v, size_t n)
{
    if (v < 0 || size_t(v) >= n) throw ParamError("edge references a missing node");
}

// Calls f(S) for every subset of `universe` with size <= max_size, smallest
// first, stopping early when f returns false.
bool for_each_subset(const std::vector<int>& universe, size_t max_size,
                     const std::function<bool(const NodeSet&)>& f)
{
    uint64_t total = 0, c = 1;
    for (size_t s = 0; s <= max_size && s <= universe.size(); ++s) {
        total += c;
        if (total > kSubsetLimit) throw SizeLimit("too many candidate node sets");
        c = c * (universe.size() - s) / (s + 1);
    }
    NodeSet cur;
    std::function<bool(size_t, size_t)> rec = [&](size_t start, size_t left) -> bool {
        if (left == 0) return f(cur);
        for (size_t i = start; i + left <= universe.size(); ++i) {
            cur.push_back(universe[i]);
            bool go = rec(i + 1, left - 1);
            cur.pop_back();
            if (!go) return false;
        }
        return true;
    };
    for (size_t s = 0; s <= max_size && s <= universe.size(); ++s)
        if (!rec(0, s)) return false;
    return true;
}

std::vector<int> internal_universe(size_t n, int a, int b)
{
    std::vector<int> u;
    for (int v = 0; v < int(n); ++v)
        if (v != a && v != b) u.push_back(v);
    return u;
}

bool reachable(const std::vector<NodeSet>& adj, int from, int to, const std::vector<bool>& removed)
{
    std::vector<bool> seen(adj.size(), false);
    std::deque<int> q{from};
    seen[from] = true;
    while (!q.empty()) {
        int v = q.front();
        q.pop_front();
        if (v == to) return true;
        for (int w : adj[v])
            if (!seen[w] && !removed[w]) {
                seen[w] = true;
                q.push_back(w);
            }
    }
    return false;
}

struct FlowNet {
    struct Arc {
        int to, cap, rev;
    };
    std::vector<std::vector<Arc>> g;

    explicit FlowNet(size_t n) : g(n) {}
    void add(int u, int v, int cap)
    {
        g[u].push_back({v, cap, int(g[v].size())});
        g[v].push_back({u, 0, int(g[u].size() - 1)});
    }
    // BFS augmentation; arcs were added in ascending target order.
    int run(int s, int t)
    {
        int flow = 0;
        while (true) {
            std::vector<std::pair<int, int>> parent(g.size(), {-1, -1});
            std::deque<int> q{s};
            parent[s] = {s, -1};
            while (!q.empty() && parent[t].first < 0) {
                int v = q.front();
                q.pop_front();
                for (int i = 0; i < int(g[v].size()); ++i) {
                    auto& a = g[v][i];
                    if (a.cap > 0 && parent[a.to].first < 0) {
                        parent[a.to] = {v, i};
                        q.push_back(a.to);
                    }
                }
            }
            if (parent[t].first < 0) return flow;
            for (int v = t; v != s;) {
                auto [u, i] = parent[v];
                g[u][i].cap -= 1;
                g[v][g[u][i].rev].cap += 1;
                v = u;
            }
            ++flow;
        }
    }
    std::vector<bool> residual_reach(int s) const
    {
        std::vector<bool> seen(g.size(), false);
        std::deque<int> q{s};
        seen[s] = true;
        while (!q.empty()) {
            int v = q.front();
            q.pop_front();
            for (auto& a : g[v])
                if (a.cap > 0 && !seen[a.to]) {
                    seen[a.to] = true;
                    q.push_back(a.to);
                }
        }
        return seen;
    }
};

// Node v splits into in = 2v, out = 2v+1.
struct SplitFlow {
    FlowNet net;
    std::vector<std::vector<std::pair<int, int>>> edge_arcs;  // per out-node: (arc index, target node)
    int flow = 0;
    bool direct = false;

    explicit SplitFlow(const Digraph& g) : net(2 * g.nodes.size())
    {
        const int n = int(g.nodes.size());
        const int inf = n + 1;
        for (int v = 0; v < n; ++v) {
            int cap = (v == g.sender || v == g.receiver) ? inf : 1;
            net.add(2 * v, 2 * v + 1, cap);
        }
        auto adj = g.out_adjacency();
        for (int u = 0; u < n; ++u) {
            if (u == g.receiver) continue;
            for (int v : adj[u]) {
                if (v == g.sender) continue;
                bool is_direct = (u == g.sender && v == g.receiver);
                direct |= is_direct;
                net.add(2 * u + 1, 2 * v, is_direct ? 1 : inf);
            }
        }
        flow = net.run(2 * g.sender + 1, 2 * g.receiver);
    }
};

}  // namespace

void Digraph::validate() const
{
    check_ends(sender, receiver, nodes.size());
    for (auto [a, b] : edges) {
        check_node(a, nodes.size());
        check_node(b, nodes.size());
    }
}

std::vector<std::vector<int>> Digraph::out_adjacency() const
{
    std::vector<std::set<int>> s(nodes.size());
    for (auto [a, b] : edges)
        if (a != b) s[a].insert(b);
    std::vector<std::vector<int>> adj(nodes.size());
    for (size_t i = 0; i < s.size(); ++i) adj[i].assign(s[i].begin(), s[i].end());
    return adj;
}

bool Digraph::has_edge(int a, int b) const
{
    return std::find(edges.begin(), edges.end(), std::make_pair(a, b)) != edges.end();
}

void Hypergraph::validate() const
{
    check_ends(sender, receiver, nodes.size());
    for (auto& e : hyperedges) {
        check_node(e.from, nodes.size());
        for (int v : e.to) check_node(v, nodes.size());
    }
}

Digraph Hypergraph::directed_links() const
{
    validate();
    Digraph d;
    d.nodes = nodes;
    d.sender = sender;
    d.receiver = receiver;
    std::set<std::pair<int, int>> seen;
    for (auto& e : hyperedges)
        for (int v : e.to)
            if (v != e.from && seen.insert({e.from, v}).second) d.edges.push_back({e.from, v});
    return d;
}

void NeighborNet::validate() const
{
    check_ends(sender, receiver, nodes.size());
    for (auto [a, b] : edges) {
        check_node(a, nodes.size());
        check_node(b, nodes.size());
        if (a == b) throw ParamError("self loop in neighbor network");
    }
}

std::vector<NodeSet> NeighborNet::adjacency() const
{
    std::vector<std::set<int>> s(nodes.size());
    for (auto [a, b] : edges) {
        s[a].insert(b);
        s[b].insert(a);
    }
    std::vector<NodeSet> adj(nodes.size());
    for (size_t i = 0; i < s.size(); ++i) adj[i].assign(s[i].begin(), s[i].end());
    return adj;
}

Digraph NeighborNet::as_digraph() const
{
    validate();
    Digraph d;
    d.nodes = nodes;
    d.sender = sender;
    d.receiver = receiver;
    for (auto [a, b] : edges) {
        d.edges.push_back({a, b});
        d.edges.push_back({b, a});
    }
    return d;
}

NodeSet PathSet::internal_nodes(size_t i) const
{
    const auto& p = paths.at(i);
    NodeSet out;
    if (p.size() > 2) out.assign(p.begin() + 1, p.end() - 1);
    std::sort(out.begin(), out.end());
    return out;
}

bool PathSet::valid_for(const Digraph& g) const
{
    std::set<int> used;
    bool direct_used = false;
    for (size_t i = 0; i < paths.size(); ++i) {
        const auto& p = paths[i];
        if (p.size() < 2 || p.front() != g.sender || p.back() != g.receiver) return false;
        for (size_t j = 0; j + 1 < p.size(); ++j)
            if (!g.has_edge(p[j], p[j + 1])) return false;
        if (p.size() == 2) {
            if (direct_used) return false;
            direct_used = true;
        }
        for (int v : internal_nodes(i)) {
            if (v == g.sender || v == g.receiver) return false;
            if (!used.insert(v).second) return false;
        }
    }
    return true;
}

PathSet max_disjoint_paths(const Digraph& g)
{
    g.validate();
    SplitFlow sf(g);
    const int n = int(g.nodes.size());
    // Remaining flow per (u -> v) edge, read off the reverse arcs.
    std::vector<std::vector<std::pair<int, int>>> used(n);  // u -> list of (v, units)
    for (int u = 0; u < n; ++u)
        for (auto& a : sf.net.g[2 * u + 1]) {
            if (a.to % 2 != 0) continue;  // only out -> in arcs are graph edges
            int v = a.to / 2;
            if (v == u) continue;
            int units = sf.net.g[a.to][a.rev].cap;
            if (units > 0 && !(a.to == 2 * u)) used[u].push_back({v, units});
        }
    for (auto& l : used) std::sort(l.begin(), l.end());
    PathSet ps;
    for (int i = 0; i < sf.flow; ++i) {
        std::vector<int> path{g.sender};
        int v = g.sender;
        while (v != g.receiver) {
            auto& l = used[v];
            auto it = std::find_if(l.begin(), l.end(), [](auto& e) { return e.second > 0; });
            if (it == l.end()) break;
            it->second -= 1;
            v = it->first;
            path.push_back(v);
        }
        ps.paths.push_back(std::move(path));
    }
    std::sort(ps.paths.begin(), ps.paths.end());
    return ps;
}

PathSet max_disjoint_paths(const Hypergraph& h) { return max_disjoint_paths(h.directed_links()); }

std::optional<NodeSet> min_separator(const Digraph& g)
{
    g.validate();
    SplitFlow sf(g);
    if (sf.direct) return std::nullopt;
    auto reach = sf.net.residual_reach(2 * g.sender + 1);
    NodeSet cut;
    for (int v = 0; v < int(g.nodes.size()); ++v)
        if (v != g.sender && v != g.receiver && reach[2 * v] && !reach[2 * v + 1]) cut.push_back(v);
    return cut;
}

Separability is_k_separable(const Hypergraph& h, size_t k)
{
    auto sep = min_separator(h.directed_links());
    Separability out;
    if (sep && sep->size() <= k) {
        out.separable = true;
        out.witness = *sep;
    }
    return out;
}

namespace {

ConnectivityResult hyper_connected(const Hypergraph& h, size_t k, bool directed)
{
    h.validate();
    ConnectivityResult res;
    res.holds = true;
    if (k == 0) return res;
    const size_t n = h.nodes.size();
    for_each_subset(internal_universe(n, h.sender, h.receiver), k - 1, [&](const NodeSet& s) {
        std::vector<bool> removed(n, false);
        for (int v : s) removed[v] = true;
        std::vector<std::set<int>> adj(n);
        for (auto& e : h.hyperedges) {
            bool drop = removed[e.from];
            for (int v : e.to) drop = drop || removed[v];
            if (drop) continue;
            for (int v : e.to) {
                if (v == e.from) continue;
                adj[e.from].insert(v);
                if (!directed) adj[v].insert(e.from);
            }
        }
        std::vector<NodeSet> a(n);
        for (size_t i = 0; i < n; ++i) a[i].assign(adj[i].begin(), adj[i].end());
        if (reachable(a, h.sender, h.receiver, removed)) return true;
        res.holds = false;
        res.witness = s;
        return false;
    });
    return res;
}

}  // namespace

ConnectivityResult strongly_k_connected(const Hypergraph& h, size_t k) { return hyper_connected(h, k, true); }
ConnectivityResult weakly_k_connected(const Hypergraph& h, size_t k) { return hyper_connected(h, k, false); }

Hypergraph to_hypergraph(const NeighborNet& g)
{
    g.validate();
    Hypergraph h;
    h.nodes = g.nodes;
    h.sender = g.sender;
    h.receiver = g.receiver;
    auto adj = g.adjacency();
    for (int v = 0; v < int(g.nodes.size()); ++v) h.hyperedges.push_back({v, adj[v]});
    return h;
}

NodeSet neighbor_closure(const NeighborNet& g, const NodeSet& v1)
{
    auto adj = g.adjacency();
    std::set<int> out(v1.begin(), v1.end());
    for (int v : v1) out.insert(adj[v].begin(), adj[v].end());
    out.erase(g.sender);
    out.erase(g.receiver);
    return NodeSet(out.begin(), out.end());
}

bool k_connected(const NeighborNet& g, size_t k) { return max_disjoint_paths(g.as_digraph()).size() >= k; }

ConnectivityResult neighbor_k_connected(const NeighborNet& g, size_t k)
{
    g.validate();
    ConnectivityResult res;
    res.holds = true;
    if (k == 0) return res;
    const size_t n = g.nodes.size();
    auto adj = g.adjacency();
    for_each_subset(internal_universe(n, g.sender, g.receiver), k - 1, [&](const NodeSet& v1) {
        std::vector<bool> removed(n, false);
        for (int v : neighbor_closure(g, v1)) removed[v] = true;
        if (reachable(adj, g.sender, g.receiver, removed)) return true;
        res.holds = false;
        res.witness = v1;
        return false;
    });
    return res;
}

WeakNKResult weakly_nk_connected(const NeighborNet& g, size_t n, size_t k)
{
    g.validate();
    const size_t nodes = g.nodes.size();
    if (nodes > 64) throw SizeLimit("weak (n,k) check supports at most 64 nodes");
    auto adj = g.adjacency();

    // All simple sender-receiver paths.
    constexpr size_t kPathLimit = 200000;
    std::vector<std::vector<int>> paths;
    std::vector<int> cur{g.sender};
    std::vector<bool> on(nodes, false);
    on[g.sender] = true;
    std::function<void(int)> dfs = [&](int v) {
        for (int w : adj[v]) {
            if (on[w]) continue;
            if (w == g.receiver) {
                cur.push_back(w);
                paths.push_back(cur);
                cur.pop_back();
                if (paths.size() > kPathLimit) throw SizeLimit("too many simple paths");
                continue;
            }
            on[w] = true;
            cur.push_back(w);
            dfs(w);
            cur.pop_back();
            on[w] = false;
        }
    };
    dfs(g.sender);

    std::vector<uint64_t> inner(paths.size(), 0), closed(paths.size(), 0);
    for (size_t i = 0; i < paths.size(); ++i)
        for (size_t j = 1; j + 1 < paths[i].size(); ++j) {
            int v = paths[i][j];
            inner[i] |= uint64_t(1) << v;
            closed[i] |= uint64_t(1) << v;
            for (int w : adj[v]) closed[i] |= uint64_t(1) << w;
        }
    const uint64_t ends = (uint64_t(1) << g.sender) | (uint64_t(1) << g.receiver);
    auto universe = internal_universe(nodes, g.sender, g.receiver);

    // T defeats path i iff T meets closed[i]; the family survives when no T
    // with |T| <= k meets every member.
    auto family_ok = [&](const std::vector<size_t>& fam) {
        bool ok = true;
        for_each_subset(universe, k, [&](const NodeSet& t) {
            uint64_t tm = 0;
            for (int v : t) tm |= uint64_t(1) << v;
            for (size_t i : fam)
                if (((closed[i] & ~ends) & tm) == 0) return true;
            ok = false;
            return false;
        });
        return ok;
    };

    WeakNKResult res;
    std::vector<size_t> fam;
    std::function<bool(size_t, uint64_t, bool)> choose = [&](size_t start, uint64_t used, bool direct) -> bool {
        if (fam.size() == n) return family_ok(fam);
        for (size_t i = start; i < paths.size(); ++i) {
            bool is_direct = paths[i].size() == 2;
            if ((inner[i] & used) || (is_direct && direct)) continue;
            fam.push_back(i);
            if (choose(i + 1, used | inner[i], direct || is_direct)) return true;
            fam.pop_back();
        }
        return false;
    };
    if (choose(0, 0, false)) {
        res.holds = true;
        for (size_t i : fam) res.witness.paths.push_back(paths[i]);
    }
    return res;
}

HierarchyReport connectivity_hierarchy(const NeighborNet& g, size_t k)
{
    if (k == 0) throw ParamError("hierarchy needs k >= 1");
    HierarchyReport r;
    r.k = k;
    r.connected = k_connected(g, k);
    r.weakly_hyper = weakly_k_connected(to_hypergraph(g), k).holds;
    r.neighbor = neighbor_k_connected(g, k).holds;
    size_t max_n = max_disjoint_paths(g.as_digraph()).size();
    for (size_t n = k; n <= max_n && !r.weakly_nk; ++n)
        if (weakly_nk_connected(g, n, k - 1).holds) {
            r.weakly_nk = true;
            r.weakly_nk_n = n;
        }
    r.chain_consistent = (!r.weakly_nk || r.neighbor) && (!r.neighbor || r.weakly_hyper) &&
                         (!r.weakly_hyper || r.connected);
    return r;
}

}  // namespace psmt

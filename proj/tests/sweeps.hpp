#pragma once

// Campaign helpers shared by the protocol tests and the acceptance binary.

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "psmt/protocols.hpp"

namespace sweeps {

using namespace psmt;

// All corruption sets of size 1..k over n nodes.
inline std::vector<NodeSet> placements(size_t n, size_t k)
{
    std::vector<NodeSet> out;
    NodeSet cur;
    std::function<void(int)> rec = [&](int start) {
        if (!cur.empty()) out.push_back(cur);
        if (cur.size() == k) return;
        for (int v = start; v < int(n); ++v) {
            cur.push_back(v);
            rec(v + 1);
            cur.pop_back();
        }
    };
    rec(0);
    return out;
}

// Smallest of GF(7), GF(11) with a point per forward path.
inline const FieldSpec& small_field(const Instance& inst)
{
    return inst.network.forward().size() < 7 ? FieldSpec::prime(7) : FieldSpec::prime(11);
}

struct Tally {
    long runs = 0;
    long wrong = 0;  // B output a different message
    long none = 0;   // B output nothing
    int max_rounds = 0;
    long bound_violations = 0;

    long failures() const { return wrong + none; }
    void add(const Tally& o)
    {
        runs += o.runs;
        wrong += o.wrong;
        none += o.none;
        max_rounds = std::max(max_rounds, o.max_rounds);
        bound_violations += o.bound_violations;
    }
};

inline void record(Tally& t, const Instance& inst, const Outcome& o, const FieldElement& m)
{
    ++t.runs;
    if (!o.delivered)
        ++t.none;
    else if (!(*o.delivered == m))
        ++t.wrong;
    t.max_rounds = std::max(t.max_rounds, o.rounds);
    if (auto b = inst.descriptor->round_bound(inst.params); b && o.rounds > *b) ++t.bound_violations;
}

// Every placement of up to k corrupted nodes against every scripted
// strategy, each activated from round 1 and from round 3, for two seeds.
inline Tally placement_sweep(const Instance& inst, const FieldSpec& f)
{
    Tally t;
    const size_t k = inst.params.k;
    for (const auto& nodes : placements(inst.network.node_count(), k))
        for (Script s : all_scripts())
            for (int from : {1, 3})
                for (uint64_t seed : {1u, 2u}) {
                    FieldElement m = f.elem((seed * 3 + nodes.size()) % f.order());
                    Outcome o = run(inst, scripted(s, nodes, seed, from), m, {seed * 101, seed});
                    record(t, inst, o, m);
                }
    return t;
}

// Monte Carlo over active tampering: alternates the random tamperer with the
// scripted library across placements of exactly min(k, n) nodes.
inline Tally tamper_trials(const Instance& inst, const FieldSpec& f, long trials, uint64_t seed0)
{
    Tally t;
    const size_t n = inst.network.node_count();
    std::vector<NodeSet> full;
    for (const auto& p : placements(n, inst.params.k))
        if (p.size() == std::min(inst.params.k, n)) full.push_back(p);
    const auto scripts = all_scripts();
    for (long i = 0; i < trials; ++i) {
        const uint64_t seed = seed0 + uint64_t(i);
        const NodeSet& nodes = full[size_t(i) % full.size()];
        AdversarySpec adv = i % 2 ? random_tamperer(nodes, seed) : scripted(scripts[size_t(i / 2) % scripts.size()], nodes, seed);
        FieldElement m = f.elem(seed * 2654435761u % f.order());
        record(t, inst, run(inst, adv, m, {seed * 7 + 1, seed}), m);
    }
    return t;
}

struct PrivacyTally {
    double worst = 0.0;
    bool all_exact = true;
    double halfwidth = 0.0;
    bool stable = true;
    std::string worst_adversary;
    int requests = 0;
};

// View distance for each adversary; keeps the worst.
inline PrivacyTally privacy_sweep(const Instance& inst, const FieldSpec& f, const std::vector<AdversarySpec>& advs,
                                  size_t budget, uint64_t limit = 100'000)
{
    PrivacyTally t;
    for (const auto& a : advs) {
        PrivacyRequest r;
        r.body = &inst.body;
        r.network = &inst.network;
        r.field = &f;
        r.k = inst.params.k;
        r.u = inst.params.u;
        r.adversary = a;
        r.m0 = f.elem(1);
        r.m1 = f.elem(f.order() - 1);
        r.honest_seed = 17;
        r.budget = budget;
        r.enumeration_limit = limit;
        auto rep = view_distance(r);
        ++t.requests;
        t.all_exact = t.all_exact && rep.exact;
        t.halfwidth = std::max(t.halfwidth, rep.halfwidth);
        t.stable = t.stable && rep.structure_stable;
        if (rep.distance >= t.worst) {
            t.worst = rep.distance;
            std::string nodes;
            for (int v : a.corrupted) nodes += (nodes.empty() ? "" : ",") + inst.network.node_names[size_t(v)];
            t.worst_adversary = a.name + "{" + nodes + "}";
        }
    }
    return t;
}

}  // namespace sweeps

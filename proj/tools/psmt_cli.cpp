// psmt: batch front-end for topology analysis, simulation campaigns,
// privacy measurement and fixture export.
//
// Exit codes: 0 success, 1 precondition, 2 parse, 3 I/O.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "psmt/errors.hpp"
#include "psmt/fixtures.hpp"
#include "psmt/protocols.hpp"

using json = nlohmann::json;
using namespace psmt;

namespace {

enum Exit { Ok = 0, Precondition = 1, Parse = 2, Io = 3 };

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config_file;
    std::string protocol;
    std::string fixture;
    std::string topology_file;
    std::string field = "GF(65536)";
    size_t k = 0;  // 0: command default (2 for analyze, 1 otherwise)
    size_t u = 0;
    double delta_r = 0.0;
    std::string adversary = "random_tamperer";
    std::string corrupt;  // comma-separated node names; empty rotates placements
    long trials = 1000;
    uint64_t seed = 1;
    uint64_t m0 = 1, m1 = 2;
    bool estimate = false;
    size_t budget = 100'000;
    std::string out;
};

// ---- config file: JSON keys mirror the long flag names ----

void apply_config(Options& o, const std::string& path, const CLI::App& app)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParamError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ParamError("config: top level must be an object");
    // Flags given on the command line win.
    auto given = [&](const std::string& flag) {
        const CLI::Option* opt = app.get_option_no_throw("--" + flag);
        return opt && opt->count() > 0;
    };
    try {
        for (auto& [key, v] : j.items()) {
            if (given(key)) continue;
            if (key == "command") continue;
            else if (key == "protocol") o.protocol = v.get<std::string>();
            else if (key == "fixture") o.fixture = v.get<std::string>();
            else if (key == "topology-file") o.topology_file = v.get<std::string>();
            else if (key == "field") {
                if (v.is_object()) {
                    // {order, poly as bit string}; kept as "order:poly" for field_of.
                    o.field = std::to_string(v.at("order").get<uint64_t>());
                    if (v.contains("poly")) o.field += ":" + v["poly"].get<std::string>();
                } else {
                    o.field = v.is_string() ? v.get<std::string>() : std::to_string(v.get<uint64_t>());
                }
            }
            else if (key == "k") o.k = v.get<size_t>();
            else if (key == "u") o.u = v.get<size_t>();
            else if (key == "delta-r") o.delta_r = v.get<double>();
            else if (key == "adversary") o.adversary = v.get<std::string>();
            else if (key == "corrupt") o.corrupt = v.get<std::string>();
            else if (key == "trials") o.trials = v.get<long>();
            else if (key == "seed") o.seed = v.get<uint64_t>();
            else if (key == "m0") o.m0 = v.get<uint64_t>();
            else if (key == "m1") o.m1 = v.get<uint64_t>();
            else if (key == "estimate") o.estimate = v.get<bool>();
            else if (key == "budget") o.budget = v.get<size_t>();
            else if (key == "out") o.out = v.get<std::string>();
            else throw ParamError("config: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ParamError(std::string("config: ") + e.what());
    }
}

const FieldSpec& field_of(const Options& o)
{
    if (auto colon = o.field.find(':'); colon != std::string::npos) {
        try {
            const uint64_t order = std::stoull(o.field.substr(0, colon));
            const uint64_t poly = std::stoull(o.field.substr(colon + 1), nullptr, 2);
            return FieldSpec::of_order(order, poly);
        } catch (const std::logic_error&) {
            throw ParamError("bad field '" + o.field + "'");
        }
    }
    return FieldSpec::parse(o.field);
}

Topology load_topology(const Options& o)
{
    if (!o.fixture.empty() && !o.topology_file.empty()) throw ParamError("give --fixture or --topology-file, not both");
    if (!o.fixture.empty()) return fixture(o.fixture);
    if (o.topology_file.empty()) throw ParamError("no topology: give --fixture or --topology-file");
    std::ifstream in(o.topology_file);
    if (!in) throw IoError("cannot read topology " + o.topology_file);
    try {
        return topology_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw ParamError(std::string("topology: ") + e.what());
    }
}

void emit(const Options& o, const json& report)
{
    const std::string text = report.dump(2) + "\n";
    if (o.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(o.out, std::ios::binary);
    if (!f || !(f << text)) throw IoError("cannot write " + o.out);
}

json names_of(const NodeNames& names, const NodeSet& s)
{
    json a = json::array();
    for (int v : s) a.push_back(names.names[size_t(v)]);
    return a;
}

json paths_json(const NodeNames& names, const PathSet& ps)
{
    json a = json::array();
    for (const auto& p : ps.paths) a.push_back(names_of(names, p));
    return a;
}

// ---- analyze ----

json analyze(const Options& o)
{
    Topology t = load_topology(o);
    const size_t k = o.k;
    json r;
    r["kind"] = kind_name(t.kind);
    r["k"] = k;
    const NodeNames& names = t.nodes();
    Digraph links = t.links();
    PathSet paths = t.kind == TopologyKind::Hypergraph ? max_disjoint_paths(t.hypergraph) : max_disjoint_paths(links);
    r["disjoint_paths"] = {{"count", paths.size()}, {"paths", paths_json(names, paths)}};
    if (auto sep = min_separator(links))
        r["min_separator"] = names_of(names, *sep);
    else
        r["min_separator"] = nullptr;

    std::vector<std::pair<std::string, std::string>> table;
    auto pred = [&](const std::string& key, bool holds, json detail) {
        r["predicates"][key] = {{"holds", holds}};
        if (!detail.is_null()) r["predicates"][key].update(detail);
        table.push_back({key, holds ? "true" : "false"});
    };
    auto witness = [&](const ConnectivityResult& c) {
        return c.holds ? json(nullptr) : json{{"violating_set", names_of(names, c.witness)}};
    };

    if (t.kind == TopologyKind::Digraph) {
        pred(std::to_string(k) + "-connected", paths.size() >= k, nullptr);
    } else {
        const Hypergraph h = t.kind == TopologyKind::Hypergraph ? t.hypergraph : to_hypergraph(t.neighbor);
        auto sep = is_k_separable(h, 2 * k);
        pred(std::to_string(2 * k) + "-separable", sep.separable,
             sep.separable ? json{{"separator", names_of(names, sep.witness)}} : json(nullptr));
        pred("strongly-" + std::to_string(k) + "-connected", strongly_k_connected(h, k).holds,
             witness(strongly_k_connected(h, k)));
        if (t.kind == TopologyKind::Hypergraph)
            pred("weakly-" + std::to_string(k) + "-connected", weakly_k_connected(h, k).holds,
                 witness(weakly_k_connected(h, k)));
    }
    if (t.kind == TopologyKind::Neighbor) {
        const auto& g = t.neighbor;
        const Hypergraph h = to_hypergraph(g);
        pred(std::to_string(k) + "-connected", k_connected(g, k), nullptr);
        auto wh = weakly_k_connected(h, k);
        pred("weakly-" + std::to_string(k) + "-hyper-connected", wh.holds, witness(wh));
        auto nb = neighbor_k_connected(g, k);
        pred(std::to_string(k) + "-neighbor-connected", nb.holds, witness(nb));
        if (k >= 1) {
            auto wn = weakly_nk_connected(g, k, k - 1);
            pred("weakly-(" + std::to_string(k) + "," + std::to_string(k - 1) + ")-connected", wn.holds,
                 wn.holds ? json{{"paths", paths_json(names, wn.witness)}} : json(nullptr));
        }
        auto hr = connectivity_hierarchy(g, k);
        r["hierarchy"] = {{"connected", hr.connected},       {"weakly_hyper", hr.weakly_hyper},
                          {"neighbor", hr.neighbor},         {"weakly_nk", hr.weakly_nk},
                          {"weakly_nk_n", hr.weakly_nk_n},   {"chain_consistent", hr.chain_consistent}};
    }
    for (const auto& [key, v] : table) std::fprintf(stderr, "  %-32s %s\n", key.c_str(), v.c_str());
    return r;
}

// ---- simulate / privacy shared setup ----

Instance instance_of(const Options& o)
{
    if (o.protocol.empty()) throw ParamError("--protocol is required");
    ProtocolParams p{o.k, o.u, o.delta_r};
    if (!o.fixture.empty() || !o.topology_file.empty()) return prepare(o.protocol, p, load_topology(o));
    return prepare(o.protocol, p);
}

std::vector<NodeSet> placements_for(const Options& o, const Instance& inst)
{
    if (!o.corrupt.empty()) {
        NodeSet s;
        std::stringstream ss(o.corrupt);
        std::string name;
        while (std::getline(ss, name, ',')) {
            auto& nn = inst.network.node_names;
            auto it = std::find(nn.begin(), nn.end(), name);
            if (it == nn.end()) throw ParamError("unknown node '" + name + "'");
            s.push_back(int(it - nn.begin()));
        }
        std::sort(s.begin(), s.end());
        return {s};
    }
    // Every set of exactly min(k, n) nodes, rotated across trials.
    const size_t n = inst.network.node_count(), size = std::min(o.k, n);
    std::vector<NodeSet> out;
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + long(size), true);
    do {
        NodeSet s;
        for (size_t i = 0; i < n; ++i)
            if (pick[i]) s.push_back(int(i));
        out.push_back(s);
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return out;
}

AdversarySpec adversary_of(const std::string& id, const NodeSet& nodes, uint64_t seed)
{
    if (id == "none") return no_adversary();
    if (id == "passive") return passive_observer(nodes, seed);
    if (id == "random_tamperer") return random_tamperer(nodes, seed);
    if (id == "split_simulation") return split_simulation_attack(seed);
    if (id == "mds_boundary") return mds_boundary_attack(seed);
    for (Script s : all_scripts())
        if (id == script_name(s)) return scripted(s, nodes, seed);
    throw ParamError("unknown adversary '" + id + "'");
}

std::vector<std::string> adversary_ids()
{
    std::vector<std::string> ids = {"none", "passive", "random_tamperer", "split_simulation", "mds_boundary"};
    for (Script s : all_scripts()) ids.push_back(script_name(s));
    return ids;
}

json config_echo(const Options& o, const Instance& inst, const FieldSpec& f)
{
    return {{"protocol", o.protocol},
            {"topology", o.fixture.empty() ? (o.topology_file.empty() ? "default" : o.topology_file) : o.fixture},
            {"field", f.name()},
            {"k", o.k},
            {"u", o.u},
            {"delta_r", o.delta_r},
            {"adversary", o.adversary},
            {"seed", o.seed},
            {"precondition", inst.precondition},
            {"paths", {{"forward", inst.network.forward().size()}, {"backward", inst.network.backward().size()}}}};
}

// Wilson score interval at 95%.
std::pair<double, double> wilson(long failures, long trials)
{
    const double z = 1.959963984540054, n = double(trials), p = double(failures) / n;
    const double denom = 1 + z * z / n;
    const double centre = (p + z * z / (2 * n)) / denom;
    const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
    if (failures == 0) return {0.0, std::min(1.0, centre + half)};
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

json simulate(const Options& o)
{
    if (o.trials < 1) throw ParamError("--trials must be at least 1");
    const FieldSpec& f = field_of(o);
    Instance inst = instance_of(o);
    auto places = placements_for(o, inst);
    adversary_of(o.adversary, places[0], 0);  // validate the id before running

    long wrong = 0, none = 0, violations = 0;
    std::map<int, long> rounds;
    const auto bound = inst.descriptor->round_bound(inst.params);
    for (long i = 0; i < o.trials; ++i) {
        const uint64_t t = uint64_t(i);
        const FieldElement m = f.elem(derive_seed(o.seed, t, 1) % f.order());
        AdversarySpec adv = adversary_of(o.adversary, places[size_t(i) % places.size()], derive_seed(o.seed, t, 2));
        Outcome out = run(inst, adv, m, {derive_seed(o.seed, t, 3), derive_seed(o.seed, t, 4)});
        if (!out.delivered)
            ++none;
        else if (!(*out.delivered == m))
            ++wrong;
        ++rounds[out.rounds];
        if (bound && out.rounds > *bound) ++violations;
    }
    const long failures = wrong + none;
    auto [lo, hi] = wilson(failures, o.trials);
    json hist = json::object();
    for (auto [r, c] : rounds) hist[std::to_string(r)] = c;
    json r = {{"command", "simulate"},
              {"config", config_echo(o, inst, f)},
              {"trials", o.trials},
              {"failures", failures},
              {"wrong_output", wrong},
              {"no_output", none},
              {"failure_rate", double(failures) / double(o.trials)},
              {"confidence_95", {lo, hi}},
              {"rounds_histogram", hist},
              {"round_bound", bound ? json(*bound) : json(nullptr)},
              {"round_bound_violations", violations}};
    std::fprintf(stderr, "  %-12s %s\n  %-12s %ld\n  %-12s %ld\n  %-12s %.6f [%.6f, %.6f]\n", "protocol",
                 o.protocol.c_str(), "trials", o.trials, "failures", failures, "rate",
                 double(failures) / double(o.trials), lo, hi);
    return r;
}

json privacy(const Options& o)
{
    const FieldSpec& f = field_of(o);
    Instance inst = instance_of(o);
    if (o.m0 >= f.order() || o.m1 >= f.order()) throw ParamError("message outside the field");
    auto places = placements_for(o, inst);
    const std::string adv_id = o.adversary == "random_tamperer" && o.corrupt.empty() ? "passive" : o.adversary;

    json per = json::array();
    double worst = 0;
    bool exact = true;
    for (const auto& nodes : places) {
        PrivacyRequest req;
        req.body = &inst.body;
        req.network = &inst.network;
        req.field = &f;
        req.k = o.k;
        req.u = o.u;
        req.adversary = adversary_of(adv_id, nodes, o.seed);
        req.m0 = f.elem(o.m0);
        req.m1 = f.elem(o.m1);
        req.honest_seed = derive_seed(o.seed, 0, 5);
        req.budget = o.budget;
        req.force_estimate = o.estimate;
        auto rep = view_distance(req);
        json names = json::array();
        for (int v : nodes) names.push_back(inst.network.node_names[size_t(v)]);
        per.push_back({{"corrupted", names},
                       {"distance", rep.distance},
                       {"method", rep.exact ? "exact" : "estimate"},
                       {"samples", rep.samples},
                       {"halfwidth", rep.halfwidth},
                       {"coordinates", rep.coordinates},
                       {"structure_stable", rep.structure_stable},
                       {"fallbacks", rep.fallbacks}});
        worst = std::max(worst, rep.distance);
        exact = exact && rep.exact;
        std::fprintf(stderr, "  %-24s %.6f %s\n", names.dump().c_str(), rep.distance, rep.exact ? "exact" : "estimate");
    }
    json cfg = config_echo(o, inst, f);
    cfg["adversary"] = adv_id;
    cfg["m0"] = o.m0;
    cfg["m1"] = o.m1;
    json r = {{"command", "privacy"},
              {"config", cfg},
              {"claims_privacy", inst.descriptor->claims_privacy},
              {"method", exact ? "exact" : "estimate"},
              {"worst_distance", worst},
              {"placements", per}};
    if (!exact) {
        r["budget"] = o.budget;
        r["confidence"] = "halfwidth is the 95% normal-approximation noise scale per marginal";
    }
    return r;
}

int fixtures_cmd(bool list, const std::string& name, const std::string& dir)
{
    if (list) {
        std::cout << json(fixture_names()).dump() << "\n";
        return Ok;
    }
    std::vector<std::string> names = name == "all" ? fixture_names() : std::vector<std::string>{name};
    for (const auto& n : names) {
        const std::string text = topology_to_json(fixture(n)).dump(2) + "\n";
        if (dir.empty()) {
            std::cout << text;
            continue;
        }
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        const auto path = std::filesystem::path(dir) / (n + ".json");
        std::ofstream f(path, std::ios::binary);
        if (!f || !(f << text)) throw IoError("cannot write " + path.string());
        std::fprintf(stderr, "wrote %s\n", path.c_str());
    }
    return Ok;
}

void common_flags(CLI::App* c, Options& o, bool protocol)
{
    c->add_option("--config", o.config_file, "JSON config file; flags win on conflict");
    c->add_option("--fixture", o.fixture, "built-in topology name");
    c->add_option("--topology-file", o.topology_file, "topology JSON file");
    c->add_option("--k", o.k, "corruption bound");
    c->add_option("--out", o.out, "write the report here instead of stdout");
    if (!protocol) return;
    c->add_option("--protocol", o.protocol, "protocol id");
    c->add_option("--field", o.field, "field, e.g. GF(7), GF(2^16)");
    c->add_option("--u", o.u, "backward path count");
    c->add_option("--delta-r", o.delta_r, "loss probability of ideal reliable channels");
    c->add_option("--adversary", o.adversary, "adversary id");
    c->add_option("--corrupt", o.corrupt, "comma-separated node names");
    c->add_option("--seed", o.seed, "master seed");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Secure message transmission: topology analysis, simulation and privacy measurement"};
    app.require_subcommand(1);
    Options o;

    auto* an = app.add_subcommand("analyze", "connectivity predicates for a topology");
    common_flags(an, o, false);

    auto* sim = app.add_subcommand("simulate", "run a protocol against an adversary");
    common_flags(sim, o, true);
    sim->add_option("--trials", o.trials, "number of runs");

    auto* pr = app.add_subcommand("privacy", "view distance between two messages");
    common_flags(pr, o, true);
    pr->add_option("--m0", o.m0, "first message (field element index)");
    pr->add_option("--m1", o.m1, "second message");
    auto* ex = pr->add_flag("--exact", "enumerate where feasible (default)");
    pr->add_flag("--estimate", o.estimate, "Monte Carlo only")->excludes(ex);
    pr->add_option("--budget", o.budget, "Monte Carlo samples per message");

    auto* fx = app.add_subcommand("fixtures", "built-in figure topologies");
    fx->require_subcommand(1);
    auto* fl = fx->add_subcommand("list", "list fixture names");
    auto* fe = fx->add_subcommand("export", "write fixture JSON");
    std::string fx_name = "all", fx_dir;
    fe->add_option("name", fx_name, "fixture name or 'all'");
    fe->add_option("--out", fx_dir, "directory (stdout when absent)");

    auto* ls = app.add_subcommand("protocols", "list protocol and adversary ids");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Ok : Parse;
    }

    try {
        if (fx->parsed()) return fixtures_cmd(fl->parsed(), fx_name, fx_dir);
        if (ls->parsed()) {
            json r = {{"adversaries", adversary_ids()}, {"protocols", json::array()}};
            for (const auto& d : protocol_registry())
                r["protocols"].push_back({{"id", d.id}, {"summary", d.summary}});
            std::cout << r.dump(2) << "\n";
            return Ok;
        }
        CLI::App* cmd = an->parsed() ? an : sim->parsed() ? sim : pr;
        if (!o.config_file.empty()) apply_config(o, o.config_file, *cmd);
        if (o.k == 0) o.k = an->parsed() ? 2 : 1;
        json report = an->parsed() ? analyze(o) : sim->parsed() ? simulate(o) : privacy(o);
        if (an->parsed()) report = {{"command", "analyze"}, {"topology", o.fixture.empty() ? o.topology_file : o.fixture}, {"result", report}};
        emit(o, report);
        return Ok;
    } catch (const PreconditionError& e) {
        std::fprintf(stderr, "precondition: %s\n", e.what());
        return Precondition;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io: %s\n", e.what());
        return Io;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return Parse;
    }
}

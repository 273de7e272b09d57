// Integration tests: drive the psmt binary and check exit codes and reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest_main.hpp"
#include "json.hpp"
#include "psmt/fixtures.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run cli(const std::string& args)
{
    const std::string cmd = std::string(PSMT_CLI) + " " + args + " 2>/dev/null";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p);
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string& name)
{
    auto dir = fs::temp_directory_path() / "psmt_cli_test";
    fs::create_directories(dir);
    return dir / name;
}

void write(const fs::path& p, const std::string& text)
{
    std::ofstream(p) << text;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("fixtures list and export")
{
    auto r = cli("fixtures list");
    CHECK(r.code == 0);
    CHECK(json::parse(r.out) == json({"fig1", "fig2", "fig3", "fig5", "fig80", "fig009"}));

    r = cli("fixtures export fig2");
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    json want = json::array({{"A", "C"}, {"A", "D"}, {"C", "B"}, {"D", "B"}, {"C", "F"}, {"F", "D"}});
    CHECK(j["edges"] == want);

    auto dir = scratch("export");
    fs::remove_all(dir);
    REQUIRE(cli("fixtures export all --out " + dir.string()).code == 0);
    for (const auto& name : psmt::fixture_names()) {
        // Exported files match the checked-in copies byte for byte.
        CHECK(slurp(dir / (name + ".json")) == slurp(fs::path(PSMT_FIXTURES) / (name + ".json")));
        // And re-import gives back the same topology.
        auto back = psmt::topology_from_json(json::parse(slurp(dir / (name + ".json"))));
        CHECK(psmt::topology_to_json(back) == psmt::topology_to_json(psmt::fixture(name)));
    }
}

TEST_CASE("fixtures export to an unwritable place is an I/O error")
{
    CHECK(cli("fixtures export fig1 --out /proc/psmt_no_such_dir").code == 3);
}

TEST_CASE("analyze reports the figure predicates")
{
    auto r = cli("analyze --fixture fig1");
    REQUIRE(r.code == 0);
    auto p = json::parse(r.out)["result"]["predicates"];
    CHECK(p["2-connected"]["holds"] == true);
    CHECK(p["weakly-2-hyper-connected"]["holds"] == false);
    CHECK(p["weakly-2-hyper-connected"].contains("violating_set"));

    r = cli("analyze --fixture fig80");
    REQUIRE(r.code == 0);
    p = json::parse(r.out)["result"]["predicates"];
    CHECK(p["2-neighbor-connected"]["holds"] == true);
    CHECK(p["weakly-(2,1)-connected"]["holds"] == false);

    r = cli("analyze --topology-file " + std::string(PSMT_FIXTURES) + "/fig2.json");
    REQUIRE(r.code == 0);
    p = json::parse(r.out)["result"]["predicates"];
    CHECK(p["weakly-2-hyper-connected"]["holds"] == true);
    CHECK(p["2-neighbor-connected"]["holds"] == false);
}

TEST_CASE("analyze error paths")
{
    auto one = scratch("one.json");
    write(one, R"({"kind":"neighbor","nodes":["A"],"edges":[],"sender":"A","receiver":"B"})");
    CHECK(cli("analyze --topology-file " + one.string()).code == 2);

    auto bad = scratch("bad.json");
    write(bad, "{ not json");
    CHECK(cli("analyze --topology-file " + bad.string()).code == 2);

    CHECK(cli("analyze --topology-file " + scratch("missing.json").string()).code == 3);
    CHECK(cli("analyze --fixture nosuch").code == 2);
    CHECK(cli("analyze --frobnicate").code == 2);
    CHECK(cli("").code == 2);
}

TEST_CASE("simulate: oneway at GF(2^16) against the random tamperer")
{
    auto r = cli("simulate --protocol oneway_0delta --k 1 --field 'GF(2^16)' --adversary random_tamperer "
                 "--trials 10000 --seed 3");
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j["trials"] == 10000);
    CHECK(j["failures"] == 0);
    CHECK(j["failure_rate"] == 0.0);
    CHECK(j["round_bound_violations"] == 0);
    CHECK(j["config"]["field"] == "GF(2^16)");
}

TEST_CASE("simulate: perfect_3k over every single-node placement")
{
    for (const char* adv : {"silent", "share_flipper", "echo_forger", "stop_forger", "tamper"}) {
        for (const char* node : {"p1", "p2", "p3", "q1"}) {
            auto r = cli(std::string("simulate --protocol perfect_3k --k 1 --u 1 --field 'GF(7)' --trials 20 ") +
                         "--adversary " + adv + " --corrupt " + node);
            REQUIRE(r.code == 0);
            CHECK(json::parse(r.out)["failures"] == 0);
        }
    }
}

TEST_CASE("simulate: failure rate is failures over trials")
{
    auto r = cli("simulate --protocol efficient_0delta --k 1 --u 1 --field 'GF(7)' --trials 4000 --seed 5");
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j["failures"].get<long>() > 0);
    CHECK(j["failure_rate"].get<double>() == double(j["failures"].get<long>()) / 4000.0);
    auto ci = j["confidence_95"];
    CHECK(ci[0].get<double>() <= j["failure_rate"].get<double>());
    CHECK(ci[1].get<double>() >= j["failure_rate"].get<double>());
    long total = 0;
    for (auto& [rounds, count] : j["rounds_histogram"].items()) total += count.get<long>();
    CHECK(total == 4000);
}

TEST_CASE("simulate: reports are byte identical for a fixed seed")
{
    const std::string args = "simulate --protocol subset_enum_0delta --k 1 --u 1 --field 'GF(7)' --trials 500 --seed 11";
    auto a = cli(args), b = cli(args), c = cli(args + "1");
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out != c.out);
}

TEST_CASE("simulate: precondition failures are named")
{
    // fig1 has two disjoint paths, below 2k+1 = 3.
    CHECK(cli("simulate --protocol oneway_0delta --k 1 --fixture fig1").code == 1);
    CHECK(cli("simulate --protocol perfect_3k --k 3 --field 'GF(7)'").code == 1);
    CHECK(cli("simulate --protocol nosuch").code == 2);
    CHECK(cli("simulate --protocol oneway_0delta --adversary nosuch").code == 2);
    CHECK(cli("simulate --protocol oneway_0delta --trials 0").code == 2);
    CHECK(cli("simulate --protocol oneway_0delta --corrupt zz").code == 2);
}

TEST_CASE("privacy: exact and estimate modes")
{
    auto r = cli("privacy --protocol oneway_0delta --k 1 --field 'GF(5)' --m0 1 --m1 4");
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j["method"] == "exact");
    CHECK(j["worst_distance"] == 0.0);
    CHECK(j["placements"].size() == 3);

    r = cli("privacy --protocol oneway_0delta --k 1 --field 'GF(5)' --m0 1 --m1 4 --estimate --budget 5000");
    REQUIRE(r.code == 0);
    j = json::parse(r.out);
    CHECK(j["method"] == "estimate");
    CHECK(j["budget"] == 5000);
    CHECK(j.contains("confidence"));
    for (auto& p : j["placements"]) CHECK(p["samples"] == 5000);

    // Plain reliable transmission sends the message in the clear.
    r = cli("privacy --protocol hypergraph_reliable --k 1 --field 'GF(5)' --m0 1 --m1 4");
    REQUIRE(r.code == 0);
    j = json::parse(r.out);
    CHECK(j["claims_privacy"] == false);
    CHECK(j["worst_distance"] == 2.0);

    CHECK(cli("privacy --protocol oneway_0delta --field 'GF(5)' --m0 9").code == 2);
    CHECK(cli("privacy --protocol oneway_0delta --exact --estimate").code == 2);
}

TEST_CASE("config file, with flags winning")
{
    auto cfg = scratch("cfg.json");
    write(cfg, R"({"command":"simulate","protocol":"oneway_0delta","k":1,"trials":30,"seed":4,
                  "field":{"order":256,"poly":"100011011"},"adversary":"passive"})");
    auto r = cli("simulate --config " + cfg.string());
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j["trials"] == 30);
    CHECK(j["config"]["field"] == "GF(2^8)");
    CHECK(j["config"]["adversary"] == "passive");

    r = cli("simulate --config " + cfg.string() + " --trials 12 --adversary share_flipper");
    REQUIRE(r.code == 0);
    j = json::parse(r.out);
    CHECK(j["trials"] == 12);
    CHECK(j["config"]["adversary"] == "share_flipper");

    auto unknown = scratch("unknown.json");
    write(unknown, R"({"protocol":"oneway_0delta","colour":"red"})");
    CHECK(cli("simulate --config " + unknown.string()).code == 2);
    CHECK(cli("simulate --config " + scratch("absent.json").string()).code == 3);
}

TEST_CASE("--out writes the report file")
{
    auto out = scratch("report.json");
    fs::remove(out);
    auto r = cli("simulate --protocol k1_feedback --u 1 --trials 10 --out " + out.string());
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());
    CHECK(json::parse(slurp(out))["trials"] == 10);
    CHECK(cli("simulate --protocol k1_feedback --u 1 --trials 10 --out /proc/nope/r.json").code == 3);
}

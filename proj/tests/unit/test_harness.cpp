#include "../common/scenarios.hpp"

#include "coe/report.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace coe;
using namespace coe::testing;

TEST_CASE("percentiles use the nearest rank")
{
    auto d = distribution({5, 1, 4, 2, 3});
    CHECK(d.count == 5);
    CHECK(d.mean == doctest::Approx(3));
    CHECK(d.p50 == 3);
    CHECK(d.p95 == 5);
    CHECK(d.max == 5);
    CHECK(distribution({}).count == 0);
}

TEST_CASE("scenario config survives a JSON round trip")
{
    auto c = base_config(8);
    c.faults.crashes[3] = 400;
    c.faults.byzantine[5] = Behavior::withhold_certificates;
    c.designated_creators = 2;
    auto back = scenario_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.faults.crashes.at(3) == 400);
    CHECK(back.boot.n == 50);
}

TEST_CASE("fault-free scenario properties")
{
    auto r = run_scenario(base_config(2));
    CHECK(r.metrics.error.empty());
    CHECK(r.metrics.submitted > 0);
    CHECK(r.metrics.finalized == r.metrics.submitted);
    CHECK(all_ok(r.verdicts));
    for (char const* p : {"prefix_safety", "one_ob_per_round", "atomicity", "consistency", "liveness"})
    {
        auto const* v = verdict(r.verdicts, p);
        REQUIRE_MESSAGE(v, p);
        CHECK(v->ok);
    }
    // every cross-shard outcome agrees across its shards
    for (auto const& [id, by_shard] : per_shard_finals(r.obs))
        for (auto const& [sid, ft] : by_shard)
            CHECK(ft.outcome == by_shard.begin()->second.outcome);
    CHECK(r.metrics.recoveries.empty());
}

TEST_CASE("random fault plans respect their caps")
{
    auto c = base_config(5);
    auto reg = registry_for(c);
    FaultSpec spec;
    spec.max_fraction = 0.5;
    spec.equivocator = true;
    for (std::uint64_t s = 1; s <= 30; ++s)
    {
        auto plan = random_fault_plan(reg, spec, s);
        auto [frac, ord] = plan_load(reg, plan);
        CHECK(frac <= 0.5);
        CHECK(ord <= spec.ordering_cap);
    }
}

TEST_CASE("a trace replays to the same verdicts")
{
    auto dir = std::filesystem::temp_directory_path() / "coesim_unit_trace";
    std::filesystem::create_directories(dir);
    auto path = (dir / "trace.jsonl").string();
    RunResult r;
    {
        FileSink sink(path);
        r = run_scenario(base_config(6), &sink);
    }
    auto v = check(Observations::from_trace(path));
    REQUIRE(v.size() == r.verdicts.size());
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        CHECK(v[i].property == r.verdicts[i].property);
        CHECK(v[i].ok == r.verdicts[i].ok);
    }
    write_report(dir.string(), r);
    for (char const* f : {"metrics.json", "metrics.csv", "txs.csv", "verdicts.json", "config.json"})
        CHECK(std::filesystem::exists(dir / f));
    std::ifstream csv(dir / "metrics.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "name,seed,executor,metric,value");
    std::filesystem::remove_all(dir);
}

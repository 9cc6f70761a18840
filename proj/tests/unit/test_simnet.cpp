#include "../common/scenarios.hpp"

#include <doctest.h>

using namespace coe;
using namespace coe::testing;

TEST_CASE("events run in time order, ties in scheduling order")
{
    NullSink sink;
    Simulator sim(NetConfig{}, sink);
    std::vector<int> seen;
    sim.schedule(30, [&] { seen.push_back(3); });
    sim.schedule(10, [&] { seen.push_back(1); });
    sim.schedule(30, [&] { seen.push_back(4); });
    sim.schedule(20, [&] {
        seen.push_back(2);
        sim.schedule(sim.now(), [&] { seen.push_back(5); });
    });
    while (sim.step())
    {
    }
    CHECK(seen == std::vector<int>{1, 2, 5, 3, 4});
    CHECK(sim.now() == 30);
}

TEST_CASE("run stops on the predicate or the time limit")
{
    NullSink sink;
    Simulator sim(NetConfig{}, sink);
    int n = 0;
    for (Tick t = 1; t <= 100; ++t)
        sim.schedule(t * 10, [&] { ++n; });
    sim.run([&] { return n == 5; }, 10000);
    CHECK(n == 5);
    sim.run([] { return false; }, 300);
    CHECK(n <= 31);
    CHECK(sim.now() <= 310);
}

TEST_CASE("same seed, same trace; different seed, different trace")
{
    auto c = base_config(11);
    c.duration_rounds = 5;
    c.net.gst = 800;
    MemorySink a, b, d;
    run_scenario(c, &a);
    run_scenario(c, &b);
    REQUIRE(a.lines.size() > 100);
    CHECK(a.lines == b.lines);
    c.seed = 12;
    run_scenario(c, &d);
    CHECK(a.lines != d.lines);
}

TEST_CASE("delivery after GST is bounded by delta")
{
    for (Tick gst : {Tick{0}, Tick{1500}})
    {
        auto c = base_config(4);
        c.duration_rounds = 6;
        c.net.gst = gst;
        c.net.delta = 80;
        auto r = run_scenario(c);
        CHECK(r.net.sent > 0);
        CHECK(r.net.max_post_gst_delay <= 80);
        CHECK(r.metrics.finalized == r.metrics.submitted);
        CHECK(all_ok(r.verdicts));
    }
}

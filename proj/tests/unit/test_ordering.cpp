#include "../common/scenarios.hpp"

#include <doctest.h>

using namespace coe;
using namespace coe::testing;

namespace {

ScenarioConfig ordering_crash(std::size_t crashed)
{
    auto c = base_config(3);
    c.name = "ordering_crash";
    c.duration_rounds = 6;
    c.drain_rounds = 10;
    c.load.tx_rate = 10;
    c.max_time = 60000;
    auto reg = registry_for(c);
    auto const& members = reg.ordering().members;
    for (std::size_t i = 0; i < crashed && i < members.size(); ++i)
        c.faults.crashes[members[members.size() - 1 - i]] = 0;
    c.faults.allow_threshold_breach = true;
    return c;
}

} // namespace

TEST_CASE("ordering shard size and quorum")
{
    auto reg = registry_for(base_config(1));
    CHECK(reg.ordering().size() == 21);
    CHECK(reg.ordering().quorum() == 15);
    CHECK(reg.ordering().role == Role::ordering);
    CHECK(reg.processing(0).size() == 3);
}

TEST_CASE("six crashed ordering members still finalize, seven stall")
{
    auto ok = run_scenario(ordering_crash(6));
    CHECK(ok.metrics.rounds >= 10);
    CHECK(ok.metrics.finalized == ok.metrics.submitted);
    CHECK(all_ok(ok.verdicts));

    auto stuck = run_scenario(ordering_crash(7));
    CHECK(stuck.metrics.rounds == 0);
    CHECK(stuck.metrics.finalized == 0);
    for (auto const& v : stuck.verdicts)
        if (v.property != "liveness")
            CHECK_MESSAGE(v.ok, v.property);
}

TEST_CASE("involved shards of a round")
{
    std::vector<CtxMeta> metas(2);
    metas[0].origin = 0;
    metas[0].dest = 2;
    metas[1].origin = 1;
    metas[1].dest = 2;
    CHECK(involved_shards(metas) == std::set<ShardId>{0, 1, 2});
    CHECK(involved_shards({}).empty());
}

// Scenario builders shared by the unit and acceptance suites.
#pragma once

#include "coe/harness.hpp"

namespace coe::testing {

/// 50 nodes, s = .15, lambda = 20: three processing shards of 13 and a 21-member ordering shard.
inline ScenarioConfig base_config(std::uint64_t seed)
{
    ScenarioConfig c;
    c.name = "base";
    c.seed = seed;
    c.boot.n = 50;
    c.boot.s = 0.15;
    c.boot.lambda = 20;
    c.boot.f_L_target = 0.42;
    c.boot.epoch_length = 20;
    c.net.delta = 100;
    c.net.gst = 0;
    c.proto.delta = 100;
    c.load.tx_rate = 40;
    c.load.ctx_ratio = 0.2;
    c.duration_rounds = 16;
    c.drain_rounds = 10;
    return c;
}

inline MembershipRegistry registry_for(ScenarioConfig const& c)
{
    auto b = c.boot;
    b.seed = c.seed;
    return MembershipRegistry(b);
}

/// Per-shard outcome of every finalized transaction, from the canonical ledgers.
inline std::map<TxId, std::map<ShardId, FinalizedTx>> per_shard_finals(Observations const& o)
{
    std::map<TxId, std::map<ShardId, FinalizedTx>> out;
    for (auto const& [slot, e] : o.entries)
        for (auto const& ft : e.finalized)
            out[ft.id].emplace(slot.first, ft);
    return out;
}

inline Verdict const* verdict(std::vector<Verdict> const& v, std::string const& name)
{
    for (auto const& x : v)
        if (x.property == name)
            return &x;
    return nullptr;
}

} // namespace coe::testing

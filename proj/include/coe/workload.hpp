// Seeded client traffic: Poisson arrivals, intra-shard transfers and
// cross-shard swaps, optional hotspot contract, resubmission on timeout.
#pragma once

#include "coe/simnet.hpp"

#include <functional>
#include <map>
#include <random>

namespace coe {

struct ScriptedTx
{
    Tick at = 0;
    std::vector<SubOperation> ops; // first op's shard is the origin
};

struct WorkloadConfig
{
    double tx_rate = 50;  // transactions per 1000 ticks, all shards together
    double ctx_ratio = 0.2;
    std::uint64_t max_txs = 0; // 0 = until stopped
    Tick start = 0;
    bool hotspot = false;
    double hotspot_share = 0.5; // fraction of transactions that touch the hot contract
    std::uint32_t hot_accounts = 4;
    Amount max_amount = 20;
    Tick resubmit_timeout = 6000;
    /// Send only to ProtocolParams::creators.
    bool designated_only = false;
    /// Fixed transactions submitted in addition to the random stream.
    std::vector<ScriptedTx> script;
};

struct Submission
{
    Transaction tx;
    Tick submit = 0;
    std::uint32_t resubmits = 0;
};

class Workload
{
public:
    Workload(WorkloadConfig cfg, Simulator& sim, MembershipRegistry const& reg, ProtocolParams const& params,
             std::uint64_t seed, std::function<bool(TxId)> finalized);

    void start();
    void stop() { stopped_ = true; }
    bool stopped() const { return stopped_; }
    std::map<TxId, Submission> const& submissions() const { return subs_; }
    /// Observer hook for every created transaction.
    std::function<void(Submission const&)> on_submit;

private:
    void arrive();
    void admit(Transaction tx);
    Transaction make_tx(TxId id);
    void send(TxId id);

    WorkloadConfig cfg_;
    Simulator& sim_;
    MembershipRegistry const& reg_;
    ProtocolParams const& params_;
    std::mt19937_64 rng_;
    std::mt19937_64 route_rng_; // target choice, kept apart so the transaction stream is fixed by the seed
    std::function<bool(TxId)> finalized_;
    std::map<TxId, Submission> subs_;
    TxId next_id_ = 1;
    bool stopped_ = false;
};

} // namespace coe

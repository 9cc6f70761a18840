// Scenario runner: bootstraps a network, injects faults, drives clients,
// collects observations and per-transaction metrics.
#pragma once

#include "coe/checker.hpp"
#include "coe/simnet.hpp"
#include "coe/workload.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace coe {

struct FaultPlan
{
    std::map<NodeId, Behavior> byzantine;
    std::map<NodeId, Tick> crashes;
    /// Crash each designated creator right after one of its blocks is certified.
    bool crash_creators_after_cb = false;
    bool allow_threshold_breach = false;
};

struct ScenarioConfig
{
    std::string name = "scenario";
    std::uint64_t seed = 1;
    BootstrapParams boot;
    ProtocolParams proto;
    NetConfig net;
    WorkloadConfig load;
    Round duration_rounds = 20; // clients submit until this round is finalized
    Round drain_rounds = 10;
    Tick max_time = 0;          // 0: derived from the round budget
    FaultPlan faults;
    /// Designate up to this many non-ordering members per shard as the only creators (0 = all).
    std::uint32_t designated_creators = 0;
};

ScenarioConfig scenario_from_json(nlohmann::json const& j);
nlohmann::json to_json(ScenarioConfig const& c);

struct FaultSpec
{
    double max_fraction = 0;            // per processing shard, of epoch-0 size
    std::vector<Behavior> behaviors{Behavior::withhold_certificates, Behavior::invalid_attestations};
    std::size_t ordering_cap = 6;
    bool equivocator = false;
};

/// Random plan within the caps, drawn against the epoch-0 configuration.
FaultPlan random_fault_plan(MembershipRegistry const& reg, FaultSpec const& spec, std::uint64_t seed);
/// Largest faulty fraction of any epoch-0 processing shard and faulty ordering count.
std::pair<double, std::size_t> plan_load(MembershipRegistry const& reg, FaultPlan const& plan);

struct TxMetric
{
    TxId id = 0;
    bool cross = false;
    Tick submit = 0;
    std::optional<Round> ordered;
    std::optional<Round> final_round;
    std::optional<Tick> final_time;
    Outcome outcome = Outcome::committed;
    AbortCause cause = AbortCause::none;
    bool deferred = false;
    std::uint32_t resubmits = 0;
    std::optional<Round> lock_wait;
};

struct Distribution
{
    std::size_t count = 0;
    double mean = 0;
    double p50 = 0;
    double p95 = 0;
    double max = 0;
};
Distribution distribution(std::vector<double> v);

struct JoinEvent
{
    NodeId node = 0;
    ShardId sid = 0;
    Round round = 0;
    bool via_snapshot = false;
    Tick time = 0;
};

struct MetricsReport
{
    std::string name;
    std::uint64_t seed = 0;
    std::string executor;
    Round rounds = 0;
    Tick end_time = 0;
    std::size_t submitted = 0;
    std::size_t finalized = 0;
    std::size_t committed = 0;
    std::map<std::string, std::size_t> aborts; // by cause
    double throughput = 0;                     // finalized per 1000 ticks
    Distribution intra_rounds, intra_ticks, cross_rounds, cross_ticks;
    Distribution lock_wait_rounds;
    std::size_t deferred = 0;
    std::size_t lock_waited = 0; // cross-shard transactions that queued at least one round
    std::vector<RecoveryPlan> recoveries;
    std::vector<JoinEvent> joins;
    std::vector<std::pair<Round, std::size_t>> ob_bytes;
    std::map<std::string, std::uint64_t> net_bytes;
    std::uint64_t messages = 0;
    bool saturated = false;
    std::string error;

    nlohmann::json to_json() const;
};

struct RunResult
{
    ScenarioConfig config;
    Observations obs;
    std::vector<Verdict> verdicts;
    MetricsReport metrics;
    std::map<TxId, TxMetric> txs;
    std::map<Epoch, std::vector<ShardConfig>> configs;
    std::map<NodeId, Tick> crash_times;
    std::set<NodeId> designated;
    NetStats net;
    /// Per honest node and shard: last applied round (replicas that are synced).
    std::map<NodeId, std::map<ShardId, Round>> applied;
    std::map<std::pair<NodeId, ShardId>, Round> retired;
};

/// Runs the scenario. `trace` receives message and observation lines.
RunResult run_scenario(ScenarioConfig const& cfg, TraceSink* trace = nullptr);

} // namespace coe

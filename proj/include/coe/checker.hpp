// Global property checks over what honest nodes recorded during a run.
#pragma once

#include "coe/executor.hpp"
#include "coe/types.hpp"

#include <json.hpp>

#include <map>
#include <set>
#include <string>
#include <vector>

namespace coe {

using SlotKey = std::pair<ShardId, Round>;

/// Run record sufficient for every check; also rebuilt from a trace file.
struct Observations
{
    Economy economy;
    std::set<NodeId> honest;
    bool liveness_expected = false;

    std::map<NodeId, std::map<SlotKey, Digest>> ledgers; // entry digest per node
    std::map<SlotKey, LedgerEntry> entries;              // first honest copy
    std::map<SlotKey, Tick> entry_time;                  // first honest application
    std::map<NodeId, std::map<Round, Digest>> obs;       // finalized block digests per node
    std::map<TxId, Transaction> submitted;
    std::vector<std::string> notes; // protocol-level anomalies reported by nodes

    void record_apply(NodeId node, LedgerEntry const& e, ShardId sid, Tick t);
    void record_ob(NodeId node, Round r, Digest const& d);

    /// Observation lines of a trace written by the harness.
    static Observations from_trace(std::string const& path);
};

struct Verdict
{
    std::string property;
    bool ok = true;
    std::size_t violations = 0;
    nlohmann::json counterexample; // first few offending items
};

std::vector<Verdict> check(Observations const& o);
bool all_ok(std::vector<Verdict> const& v);
nlohmann::json to_json(std::vector<Verdict> const& v);

} // namespace coe

// Shard-local deterministic execution: lock-free tentative execution with
// deterministic commitment and cascading abort, plus the two-phase-lock
// baseline. Pure state machines; no networking.
#pragma once

#include "coe/codec.hpp"
#include "coe/types.hpp"

#include <map>
#include <memory>
#include <set>
#include <tuple>
#include <vector>

namespace coe {

/// Static token layout: contract c is homed on shard c / contracts_per_shard.
struct Economy
{
    std::uint32_t shards = 1;
    std::uint32_t contracts_per_shard = 2;
    std::uint32_t accounts = 64;
    Amount initial_balance = 1000;

    ShardId home(ContractId c) const { return c / contracts_per_shard; }
    ContractId contract(ShardId sid, std::uint32_t j) const { return sid * contracts_per_shard + j; }
};

using Balances = std::map<StateKey, Amount>;

Balances genesis_balances(Economy const& eco, ShardId sid);
Digest state_root_of(Balances const& b);
/// Applies a transfer if the debit side can cover it.
bool apply_op(Balances& b, SubOperation const& op);

/// Global position of an ordered cross-shard transaction.
struct CtxPos
{
    Round round = 0;
    std::uint32_t batch = 0; // index in the round's ctx_meta
    std::uint32_t index = 0; // index in the batch
    auto operator<=>(CtxPos const&) const = default;
};

struct ArgInput
{
    Aggregator arg;
    std::vector<CtxMeta> metas; // ctx_meta of the OB with round == arg.round
};

struct RoundInput
{
    Round round = 0;
    std::vector<ArgInput> args;
    std::vector<TxDecision> decisions;
    std::vector<Transaction> itxs;        // this shard's EBs, in OB order
    std::vector<CtxMeta> metas;           // every ctx batch of the round
    std::map<TxId, Transaction> ctx_bodies; // contents of batches involving this shard
};

struct LockWait
{
    TxId tx = 0;
    Round rounds = 0;
};

struct RoundOutput
{
    LedgerEntry entry;
    std::vector<BatchVote> votes;
    std::vector<TxVote> tx_votes;
    std::vector<TxId> deferred; // intra-shard transactions not finalized in their round
    std::vector<LockWait> lock_waits;
};

enum class ExecutorKind { lockfree, two_phase_lock };

class Executor
{
public:
    virtual ~Executor() = default;

    virtual ExecutorKind kind() const = 0;
    virtual RoundOutput apply(RoundInput const& in) = 0;
    virtual Balances const& committed() const = 0;
    /// Committed balances plus tentative effects.
    virtual Amount working_balance(StateKey const& k) const = 0;
    virtual std::set<StateKey> pending_keys() const = 0;
    virtual std::set<StateKey> aborted_keys() const = 0;
    virtual bool has_unsettled() const = 0;
    virtual Round applied_round() const = 0;

    virtual Bytes snapshot() const = 0;
    Digest exec_digest() const { return sha256(snapshot()); }
    virtual nlohmann::json debug_json() const = 0;

    static std::unique_ptr<Executor> make(ExecutorKind kind, ShardId sid, Balances genesis);
    static std::unique_ptr<Executor> restore(ExecutorKind kind, Bytes const& snapshot);
};

class LockFreeExecutor final : public Executor
{
public:
    LockFreeExecutor(ShardId sid, Balances genesis);

    ExecutorKind kind() const override { return ExecutorKind::lockfree; }
    RoundOutput apply(RoundInput const& in) override;
    Balances const& committed() const override { return committed_; }
    Amount working_balance(StateKey const& k) const override;
    std::set<StateKey> pending_keys() const override;
    std::set<StateKey> aborted_keys() const override;
    bool has_unsettled() const override { return !records_.empty() || !pending_.empty(); }
    Round applied_round() const override { return round_; }
    Bytes snapshot() const override;
    nlohmann::json debug_json() const override;

    static std::unique_ptr<LockFreeExecutor> restore(Bytes const& b);

    // step-level entry points, exposed for tests
    void settle(ArgInput const& a, Round known_round, RoundOutput& out);
    void execute_itx(Transaction const& tx, RoundOutput& out);
    void vote(RoundInput const& in, RoundOutput& out);

private:
    struct Pending
    {
        std::uint64_t seq = 0;
        bool is_ctx = false;
        CtxPos pos;                       // ctx only
        Transaction tx;                   // local view (itx) or full ctx
        std::vector<SubOperation> ops;    // local sub-operations
        std::vector<StateKey> local_keys; // keys of ops
        bool ok = false;                  // tentative result applied to working state
        std::set<std::uint64_t> blockers; // itx only
    };
    struct CtxRecord
    {
        TxId id = 0;
        std::uint8_t bit = 0;
        bool conflict = false; // bit forced to 0 by an aborted or deferred key
        bool dup = false;
        std::uint64_t pending_seq = 0; // 0 when not applied
        std::vector<SubOperation> ops;
    };
    struct AbortedEntry
    {
        CtxPos pos;
        Round known_round = 0;
        std::vector<StateKey> keys;
    };

    bool exec_on_working(std::vector<SubOperation> const& ops);
    void rebuild_working();
    void release_itxs(RoundOutput& out);
    void finalize(FinalizedTx ft, RoundOutput& out);
    bool overlaps_aborted(std::vector<StateKey> const& keys, CtxPos const& pos, Round exec_round) const;
    std::set<StateKey> deferred_itx_keys() const;

    ShardId sid_ = 0;
    Round round_ = 0;
    std::uint64_t next_seq_ = 1;
    Balances committed_;
    Balances overlay_;
    std::vector<Pending> pending_;
    std::map<CtxPos, CtxRecord> records_;
    std::vector<AbortedEntry> aborted_;
    std::map<CtxPos, std::vector<StateKey>> local_aborted_;
    std::set<TxId> seen_itx_;
    std::set<TxId> seen_ctx_;
    std::set<CtxPos> seen_dup_; // duplicate positions in batches not involving this shard
};

class TwoPhaseLockExecutor final : public Executor
{
public:
    TwoPhaseLockExecutor(ShardId sid, Balances genesis);

    ExecutorKind kind() const override { return ExecutorKind::two_phase_lock; }
    RoundOutput apply(RoundInput const& in) override;
    Balances const& committed() const override { return committed_; }
    Amount working_balance(StateKey const& k) const override;
    std::set<StateKey> pending_keys() const override;
    std::set<StateKey> aborted_keys() const override { return {}; }
    bool has_unsettled() const override { return !held_.empty() || !queue_.empty() || !voted_.empty(); }
    Round applied_round() const override { return round_; }
    Bytes snapshot() const override;
    nlohmann::json debug_json() const override;

    /// Current lock table: key -> holder transaction.
    std::map<StateKey, TxId> const& locks() const { return locks_; }

    static std::unique_ptr<TwoPhaseLockExecutor> restore(Bytes const& b);

private:
    struct Item
    {
        bool is_ctx = false;
        Transaction tx;
        CtxPos pos;
        Digest batch;
        Round ordered_round = 0;
    };
    struct Held
    {
        Transaction tx;
        CtxPos pos;
        Digest batch;
        bool ok = false; // executed successfully and holding locks
        Round ordered_round = 0;
    };

    std::vector<StateKey> local_keys(Transaction const& tx) const;
    bool blocked(std::vector<StateKey> const& keys, std::size_t queue_limit) const;
    void run_item(Item const& it, RoundOutput& out);
    void finalize(FinalizedTx ft, RoundOutput& out);

    ShardId sid_ = 0;
    Round round_ = 0;
    Balances committed_;
    Balances overlay_;
    std::map<StateKey, TxId> locks_;
    std::map<CtxPos, Held> held_;     // executed ctxs awaiting a decision
    std::set<CtxPos> voted_;          // every executed ctx, until decided
    std::vector<Item> queue_;
    std::set<TxId> seen_itx_;
    std::set<TxId> seen_ctx_;
};

} // namespace coe

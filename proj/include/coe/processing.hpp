// Processing-shard replica: certification of execution blocks, execution of
// ordered rounds, vote and commit attestation, block retrieval and state sync.
#pragma once

#include "coe/executor.hpp"
#include "coe/messages.hpp"

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

namespace coe {

/// Splits ctxs by destination shard and builds the batch references of a CB.
std::vector<CtxBatchRef> make_batches(ExecutionBlock const& eb, Digest const& eb_digest);

/// COMMIT quorum check for a ledger entry.
bool ledger_verifiable(LedgerEntry const& entry, Digest const& exec_digest, ShardId sid,
                       QuorumAttestation const& commits, ShardConfig const& cfg);

class ProcessingReplica
{
public:
    /// Member from genesis.
    ProcessingReplica(NodeContext& ctx, ShardId sid, Balances genesis);
    /// Member that joins after boundary round `from` and must sync first.
    ProcessingReplica(NodeContext& ctx, ShardId sid, Round from);

    ShardId sid() const { return sid_; }
    Round applied() const { return applied_; }
    bool synced() const { return exec_ != nullptr; }
    std::optional<Round> retire_round() const { return retire_after_; }
    bool retired() const { return retire_after_ && applied_ >= *retire_after_; }
    Round join_round() const { return join_round_; }

    void start();
    /// Timers armed by an earlier replica instance for the same shard are ignored.
    void set_generation(std::uint64_t g) { gen_ = g; }
    void retire_after(Round r);
    void on_message(Message const& m);
    void on_timer(TimerTag const& t);
    void try_apply();
    void submit(std::vector<Transaction> const& txs);

    std::map<Round, LedgerEntry> const& ledger() const { return ledger_; }
    Executor const* executor() const { return exec_.get(); }
    std::size_t mempool_size() const { return mempool_.size(); }
    std::vector<Transaction> const& mempool() const { return mempool_; }
    std::optional<QuorumAttestation> commit_cert(Round r) const;
    nlohmann::json debug_json() const;

private:
    struct Inflight
    {
        EbPtr eb;
        std::shared_ptr<CertificateBlock> cb;
        Epoch epoch = 0;
    };
    struct Unordered
    {
        std::shared_ptr<CertificateBlock const> cb;
        Tick since = 0;
        std::vector<Transaction> txs;
    };
    struct Retrieval
    {
        std::vector<NodeId> holders;
        std::size_t next = 0;
        std::uint64_t attempt = 0;
    };
    struct VoteState
    {
        VoteResult body;
        Digest subject;
        bool formed = false;
        Tick last = 0;
        std::set<std::tuple<Round, Digest, std::uint32_t>> open; // undecided tx votes
    };

    ShardConfig const* config(Epoch e) const;
    bool member(Epoch e) const;
    void broadcast(ShardConfig const& cfg, MsgPtr const& m, bool include_self = false);
    void to_ordering(MsgPtr const& m);
    Epoch working_epoch() const;
    void arm(Tick delay, TimerTag t);

    void maybe_create_eb();
    void resend_certify();
    void check_certified();
    void on_certify(Message const& m);
    void on_certified(Message const& m);
    void abandon_inflight();

    bool need_eb(EbRef const& ref);
    void request_eb(Digest const& d);
    void on_eb_resp(Message const& m);

    void after_apply(Round r, OrderingBlock const& ob, RoundInput const& in, RoundOutput const& out);
    void start_vote(VoteResult body);
    void sign_vote(VoteState& vs);
    void check_vote(Round r);
    void on_cvote(Message const& m);
    void on_commit(Message const& m);
    void check_commit(Round r);
    void serve_snapshots(Round r);
    void on_snap_req(Message const& m);
    void on_snap_resp(Message const& m);
    void fallback_replay();
    void maintenance();
    void do_retire();
    void remove_from_mempool(std::set<TxId> const& ids);

    NodeContext& ctx_;
    ShardId sid_;
    std::unique_ptr<Executor> exec_;
    Round applied_ = 0;
    Round join_round_ = 0;
    std::optional<Round> retire_after_;
    bool started_ = false;
    std::uint64_t gen_ = 0;

    std::vector<Transaction> mempool_;
    std::set<TxId> mempool_ids_;
    std::set<TxId> finalized_ids_;

    std::uint64_t eb_seq_ = 0;
    std::optional<Inflight> inflight_;
    std::map<Digest, Unordered> unordered_;
    std::map<Digest, Retrieval> retrievals_;

    std::map<Round, VoteState> my_votes_;
    std::map<Round, std::map<Digest, QuorumAttestation>> cvotes_;
    std::map<Round, Digest> my_commit_;
    std::map<Round, std::map<Digest, QuorumAttestation>> commits_;
    std::map<Round, QuorumAttestation> commit_certs_;
    std::map<Round, SnapshotData> snapshots_;
    std::map<Round, std::vector<NodeId>> snap_waiters_;
    std::map<Round, LedgerEntry> ledger_;
};

} // namespace coe

// Ordering shard: chain-derived bookkeeping, deterministic block composition
// and the replica running round-based quorum consensus over it.
#pragma once

#include "coe/messages.hpp"

#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

namespace coe {

using TxKey = std::tuple<Round, Digest, std::uint32_t>; // (ordering round, batch, index)

/// Everything block composition needs that follows from the finalized chain.
struct ChainState
{
    struct Undecided
    {
        TxId tx = 0;
        ShardId origin = 0;
        ShardId dest = 0;
    };

    Round round = 0;     // last finalized
    Round args_upto = 0; // last round whose aggregator is in the chain
    std::set<Digest> included; // EB digests already ordered
    std::map<Round, std::vector<CtxMeta>> metas; // rounds whose aggregator is still open
    std::map<TxKey, Undecided> undecided;        // baseline executor only
    std::map<Epoch, std::map<ShardId, std::set<NodeId>>> participation;

    void apply(OrderingBlock const& ob, MembershipRegistry const& reg, ExecutorKind kind);
};

/// Full validity of a certificate block for inclusion at round r.
bool cb_includable(CertificateBlock const& cb, ChainState const& chain, MembershipRegistry const& reg, Round r);
/// Quorum and epoch checks of a vote result.
bool vr_signed(VoteResult const& vr, MembershipRegistry const& reg);
/// Vote bits line up with the batches of the round that involve the shard.
bool vr_shape_ok(VoteResult const& vr, ChainState const& chain);
/// Shards with a batch in `metas`.
std::set<ShardId> involved_shards(std::vector<CtxMeta> const& metas);

/// Composes the block for round r from the offered certificate blocks and
/// vote results. Invalid or unusable inputs are skipped. Deterministic.
Proposal compose(ChainState const& chain, MembershipRegistry const& reg, ExecutorKind kind, Round r,
                 NodeId proposer, std::vector<CertificateBlock> cbs, std::vector<VoteResult> vrs);

/// Prepare and view-change subjects.
Digest prepare_subject(Round r, std::uint32_t view, Digest const& d);
Digest viewchange_subject(Round r, std::uint32_t view);

/// Ordering-shard replica. The hosting node feeds it finalized blocks in order.
class OrderingReplica
{
public:
    explicit OrderingReplica(NodeContext& ctx);

    void start();
    void on_message(Message const& m);
    void on_timer(TimerTag const& t);
    /// Called by the node for each finalized block, in round order.
    void on_finalized(OrderingBlock const& ob);

    ChainState const& chain() const { return chain_; }
    std::uint32_t view() const { return view_; }
    std::size_t cb_pool_size() const { return cb_pool_.size(); }
    std::size_t vr_pool_size() const { return vr_pool_.size(); }
    std::size_t rejected() const { return rejected_; }

    NodeId leader(Round r, std::uint32_t view) const;

private:
    struct Lock
    {
        std::uint32_t view = 0;
        ProposalPtr proposal;
        std::shared_ptr<QuorumAttestation const> cert;
    };

    Round cur() const { return chain_.round + 1; }
    void enter_round();
    void arm_view_timer();
    void propose_fresh();
    void send_proposal(ProposalPtr p, std::shared_ptr<QuorumAttestation const> vc_cert);
    bool proposal_valid(Proposal const& p) const;
    void on_cert_block(Message const& m);
    void on_vote_result(Message const& m);
    void on_propose(Message const& m);
    void on_prepare(Message const& m);
    void on_prepared(Message const& m);
    void on_ocommit(Message const& m);
    void on_viewchange(Message const& m);
    void try_finalize(std::uint32_t view, Digest const& d);
    void become_leader(std::uint32_t view);
    void send_finalized(NodeId to, Round r);
    void request_votes(Round r);
    void prune();

    NodeContext& ctx_;
    ChainState chain_;
    std::uint32_t view_ = 0;
    std::map<Digest, CertificateBlock> cb_pool_;
    std::map<std::tuple<ShardId, Round, Epoch>, VoteResult> vr_pool_;
    std::size_t rejected_ = 0;

    // per current round
    std::map<std::uint32_t, Digest> prepared_in_view_;   // what this node prepared
    std::map<Digest, ProposalPtr> bodies_;               // by proposal digest
    std::map<Digest, QuorumAttestation> prepares_;       // leader side, by subject
    std::set<Digest> prepared_sent_;                     // subjects
    std::set<std::uint32_t> proposed_;
    std::set<std::uint32_t> committed_views_;
    std::map<std::pair<std::uint32_t, Digest>, QuorumAttestation> commits_;
    std::map<std::uint32_t, QuorumAttestation> viewchanges_;
    std::map<std::uint32_t, Lock> vc_locks_; // best lock reported per view
    bool done_ = false;
    std::optional<Lock> lock_;
    std::map<Round, std::vector<Message>> future_; // messages for rounds ahead of us
    std::map<std::pair<ShardId, Round>, Tick> vote_sync_sent_;
};

} // namespace coe

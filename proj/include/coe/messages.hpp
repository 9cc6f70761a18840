// Wire messages exchanged between simulated nodes, and the services a node
// offers to the replicas it hosts.
#pragma once

#include "coe/codec.hpp"
#include "coe/executor.hpp"
#include "coe/membership.hpp"
#include "coe/types.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace coe {

enum class MsgType : std::uint8_t {
    client_tx,
    forward_txs,
    certify,
    certified,
    cert_block,
    cvote,
    vote_result,
    vote_sync_req,
    commit,
    eb_req,
    eb_resp,
    snap_req,
    snap_resp,
    ob_sync_req,
    ob_sync_resp,
    propose,
    prepare,
    prepared,
    ocommit,
    viewchange,
    finalized,
};

char const* to_string(MsgType t);

using ObPtr = std::shared_ptr<OrderingBlock const>;
using EbPtr = std::shared_ptr<ExecutionBlock const>;

/// An ordering-block candidate with everything needed to re-derive it.
struct Proposal
{
    OrderingBlock ob; // quorum empty
    Digest digest;    // body_digest(ob)
    std::vector<CertificateBlock> cbs;
    std::vector<VoteResult> vrs;
    // set when re-proposing a block prepared in an earlier view
    std::uint32_t justify_view = 0;
    std::shared_ptr<QuorumAttestation const> justify;
};
using ProposalPtr = std::shared_ptr<Proposal const>;

/// Executor state at an epoch boundary, vouched for by a COMMIT quorum.
struct SnapshotData
{
    ShardId sid = 0;
    Round round = 0;
    Bytes exec;
    Digest state_root;
    QuorumAttestation commit_cert;
    std::vector<VoteResult> pending_votes; // unsettled vote bodies, quorum empty
};

struct Message
{
    MsgType type = MsgType::client_tx;
    NodeId from = 0;
    ShardId sid = 0;
    Epoch epoch = 0;
    Round round = 0;
    std::uint32_t view = 0;
    Digest digest;
    Attestation att;
    std::vector<Transaction> txs;
    EbPtr eb;
    std::shared_ptr<CertificateBlock const> cb;
    std::shared_ptr<VoteResult const> vr;
    ProposalPtr proposal;
    std::shared_ptr<QuorumAttestation const> cert;
    std::vector<ObPtr> obs;
    std::shared_ptr<SnapshotData const> snap;
    std::uint32_t lock_view = 0;

    std::size_t bytes = 0; // compressed wire size, filled by seal()
};
using MsgPtr = std::shared_ptr<Message const>;

/// Computes the wire size and freezes the message.
MsgPtr seal(Message m);

enum class Behavior : std::uint8_t {
    honest,
    withhold_certificates,
    invalid_attestations,
    equivocate_proposals,
    false_votes,
    silent,
};

char const* to_string(Behavior b);
Behavior behavior_from_string(std::string const& s);

enum class TimerKind : std::uint8_t {
    certify_retry,
    eb_retrieve,
    snapshot_wait,
    vote_retry,
    propose,
    view_timeout,
    ob_sync,
    cb_retry,
};

struct TimerTag
{
    TimerKind kind = TimerKind::certify_retry;
    ShardId sid = 0;
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    Digest d;
};

struct ProtocolParams
{
    Tick delta = 100;
    Tick block_interval = 200;
    std::size_t block_capacity = 500;
    Round heartbeat_rounds = 4;
    Tick certify_retry = 400;
    Tick cb_retry = 2000;
    Tick eb_retrieve_timeout = 200;
    Tick snapshot_timeout = 1500;
    Tick view_timeout = 1200;
    Tick vote_retry = 1500;
    Tick ob_sync_interval = 1500;
    ExecutorKind executor = ExecutorKind::lockfree;
    Economy economy;
    /// When non-empty only these nodes create execution blocks.
    std::set<NodeId> creators;
};

struct ApplyRecord
{
    NodeId node = 0;
    ShardId sid = 0;
    Round round = 0;
    Tick time = 0;
    RoundInput const* input = nullptr;
    RoundOutput const* output = nullptr;
};

/// Harness hooks. Default implementations ignore everything.
class Observer
{
public:
    virtual ~Observer() = default;
    virtual void on_applied(ApplyRecord const&) {}
    virtual void on_ob_finalized(NodeId, OrderingBlock const&, Digest const&, Tick) {}
    virtual void on_cb_quorum(NodeId, CertificateBlock const&, std::size_t /*txs*/, Tick) {}
    virtual void on_joined(NodeId, ShardId, Round, bool /*via_snapshot*/, Tick) {}
    virtual void on_note(std::string const&, nlohmann::json const&) {}
};

/// Services a node provides to the replicas it hosts.
class NodeContext
{
public:
    virtual ~NodeContext() = default;
    virtual NodeId id() const = 0;
    virtual Tick now() const = 0;
    virtual void send(NodeId to, MsgPtr const& m) = 0;
    virtual void set_timer(Tick delay, TimerTag const& tag) = 0;
    virtual MembershipRegistry const& registry() const = 0;
    virtual ProtocolParams const& params() const = 0;
    virtual Behavior behavior() const = 0;
    virtual Observer& observer() = 0;
    /// Finalized ordering block for round r, if this node has it.
    virtual ObPtr ob(Round r) const = 0;
    virtual Round ob_contiguous() const = 0;
    virtual EbPtr eb(Digest const& d) const = 0;
    virtual void store_eb(Digest const& d, EbPtr eb) = 0;
    virtual void request_ob_sync() = 0;
    /// Hands a block finalized by the local ordering replica to the node.
    virtual void finalize_ob(OrderingBlock ob) = 0;
    virtual std::uint64_t random(std::uint64_t bound) = 0;
};

/// Attestation from this node according to its behaviour; nullopt when withheld.
std::optional<Attestation> attest(NodeContext& ctx, Digest const& subject);

} // namespace coe

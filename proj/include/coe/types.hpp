// Protocol data model: transactions, blocks, votes, aggregators, attestations.
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace coe {

using NodeId = std::uint32_t;
using ShardId = std::uint32_t;
using TxId = std::uint64_t;
using Round = std::uint64_t;
using Epoch = std::uint64_t;
using Tick = std::uint64_t;
using ContractId = std::uint32_t;
using AccountId = std::uint32_t;
using Amount = std::int64_t;

inline constexpr ShardId kOrderingShard = 0xFFFFFFFFu;

struct Digest
{
    std::array<std::uint8_t, 32> bytes{};

    auto operator<=>(Digest const&) const = default;
    bool operator==(Digest const&) const = default;

    bool is_zero() const;
    std::string hex() const;
    std::string short_hex() const; // first 8 hex chars
    static Digest from_hex(std::string const& h);
};

/// (contract, account): the unit of conflict detection.
struct StateKey
{
    ContractId contract = 0;
    AccountId account = 0;
    auto operator<=>(StateKey const&) const = default;
};

/// Transfer of `amount` tokens of `contract` between two accounts on one shard.
struct SubOperation
{
    ShardId shard = 0;
    ContractId contract = 0;
    AccountId debit_account = 0;
    AccountId credit_account = 0;
    Amount amount = 0;

    bool operator==(SubOperation const&) const = default;
    StateKey debit_key() const { return {contract, debit_account}; }
    StateKey credit_key() const { return {contract, credit_account}; }
};

enum class TxKind : std::uint8_t { intra = 0, cross = 1 };

struct Transaction
{
    TxId id = 0;
    TxKind kind = TxKind::intra;
    std::vector<SubOperation> sub_ops;
    Tick submit_time = 0;

    bool operator==(Transaction const&) const = default;

    bool is_cross() const { return kind == TxKind::cross; }
    /// Distinct shards touched, ascending.
    std::vector<ShardId> shards() const;
    /// Every state key touched by any sub-operation, sorted and unique.
    std::vector<StateKey> keys() const;
    /// Sub-operations homed on `sid`.
    std::vector<SubOperation> ops_on(ShardId sid) const;
    bool well_formed() const;
};

struct ExecutionBlock
{
    ShardId sid = 0;
    NodeId creator = 0;
    std::uint64_t seq = 0; // per-creator counter
    std::vector<Transaction> itxs;
    std::vector<Transaction> ctxs;

    bool operator==(ExecutionBlock const&) const = default;
    bool well_formed() const;
};

struct Attestation
{
    NodeId signer = 0;
    Digest subject;
    bool valid = true;
    bool operator==(Attestation const&) const = default;
};

struct QuorumAttestation
{
    Digest subject;
    std::vector<Attestation> sigs;

    bool operator==(QuorumAttestation const&) const = default;
    /// Adds a signature; duplicate signers are ignored. Returns true when added.
    bool add(Attestation const& a);
    /// Distinct signers with valid=true over `subject`, restricted to `members` when given.
    std::set<NodeId> valid_signers(std::vector<NodeId> const* members = nullptr) const;
};

struct CtxTxMeta
{
    TxId id = 0;
    std::vector<StateKey> keys; // every key the transaction touches, on all shards
    bool operator==(CtxTxMeta const&) const = default;
};

/// Cross-shard batch reference carried by a certificate block.
struct CtxBatchRef
{
    ShardId dest = 0;
    Digest batch;
    std::vector<CtxTxMeta> txs;
    bool operator==(CtxBatchRef const&) const = default;
};

struct CertificateBlock
{
    Digest eb_digest;
    std::vector<CtxBatchRef> ctx_batches; // ascending dest
    ShardId sid = 0;
    NodeId creator = 0;
    Epoch epoch = 0;
    QuorumAttestation quorum;

    bool operator==(CertificateBlock const&) const = default;
};

/// Positional per-transaction bits for one batch.
struct BatchVote
{
    Digest batch;
    std::vector<std::uint8_t> bits;
    bool operator==(BatchVote const&) const = default;
};

/// Two-phase-lock baseline: a vote on one transaction.
struct TxVote
{
    Round round = 0; // ordering round of the transaction
    Digest batch;
    std::uint32_t index = 0;
    TxId tx = 0;
    std::uint8_t bit = 0;
    bool operator==(TxVote const&) const = default;
};

struct VoteResult
{
    Round round = 0;
    ShardId sid = 0;
    Epoch epoch = 0; // epoch of the signing configuration
    std::vector<BatchVote> votes; // in the order of the round's ctx_meta
    std::vector<TxVote> tx_votes; // baseline executor only
    QuorumAttestation quorum;

    bool operator==(VoteResult const&) const = default;
};

struct Aggregator
{
    Round round = 0;
    std::map<Digest, std::vector<std::uint8_t>> vote;
    std::set<ShardId> pending_shards;

    bool operator==(Aggregator const&) const = default;
    bool ready() const { return pending_shards.empty(); }
};

/// Folds `votes` into `arg` (bitwise AND on existing keys, insert otherwise).
Aggregator aggregate_vote(Aggregator arg, std::vector<BatchVote> const& votes);

struct TxDecision
{
    Round round = 0;
    Digest batch;
    std::uint32_t index = 0;
    TxId tx = 0;
    bool commit = false;
    bool operator==(TxDecision const&) const = default;
};

struct EbRef
{
    ShardId sid = 0;
    Digest digest;
    NodeId creator = 0;
    std::vector<NodeId> signers; // holders of the block
    bool operator==(EbRef const&) const = default;
};

struct CtxMeta
{
    Digest batch;
    ShardId origin = 0;
    ShardId dest = 0;
    Digest eb_digest;
    std::vector<CtxTxMeta> txs;
    bool operator==(CtxMeta const&) const = default;
};

struct RecoveryPlan
{
    ShardId shard_id = 0;
    std::vector<NodeId> added_nodes;
    double new_f_L = 0;
    double new_f_S = 0;
    std::uint32_t new_size = 0;
    Round effective_round = 0;
    bool operator==(RecoveryPlan const&) const = default;
};

struct OrderingBlock
{
    Round round = 0;
    std::vector<Aggregator> args; // ascending round
    std::vector<EbRef> eb_digests;
    std::vector<CtxMeta> ctx_meta;
    std::vector<TxDecision> decisions; // baseline executor only
    std::vector<RecoveryPlan> plans;
    NodeId proposer = 0;
    QuorumAttestation quorum;

    bool operator==(OrderingBlock const&) const = default;
};

enum class Role : std::uint8_t { ordering = 0, processing = 1 };

struct ShardConfig
{
    ShardId shard_id = 0;
    std::vector<NodeId> members; // sorted
    double f_S = 0;
    double f_L = 0;
    Role role = Role::processing;
    std::uint32_t epoch_length = 20;
    Epoch epoch = 0;

    bool operator==(ShardConfig const&) const = default;
    std::size_t size() const { return members.size(); }
    bool contains(NodeId id) const;
    /// floor(f_S*m)+1 for processing shards, floor(2f*m)+1 for the ordering shard.
    std::size_t quorum() const;
    /// Checks the fault-threshold regime for the role.
    bool regime_ok() const;
};

enum class ThresholdKind { processing, ordering };

std::size_t quorum_threshold(std::size_t m, double f, ThresholdKind kind);
bool verify_quorum(QuorumAttestation const& att, ShardConfig const& shard, ThresholdKind kind);
bool verify_quorum(QuorumAttestation const& att, ShardConfig const& shard);

enum class Outcome : std::uint8_t { committed = 0, aborted = 1 };
enum class AbortCause : std::uint8_t { none = 0, execution_failure = 1, cascading = 2, duplicate = 3 };

struct FinalizedTx
{
    TxId id = 0;
    Outcome outcome = Outcome::committed;
    AbortCause cause = AbortCause::none;
    bool cross = false;
    std::vector<SubOperation> ops; // local sub-operations, for replay
    bool operator==(FinalizedTx const&) const = default;
};

struct LedgerEntry
{
    Round round = 0;
    std::vector<FinalizedTx> finalized;
    Digest state_root;
    bool operator==(LedgerEntry const&) const = default;
};

char const* to_string(Outcome o);
char const* to_string(AbortCause c);

} // namespace coe

#include "coe/codec.hpp"
#include "coe/types.hpp"

#include <doctest.h>

#include <random>

using namespace coe;

namespace {

Transaction sample_tx(TxId id, bool cross)
{
    Transaction t;
    t.id = id;
    t.kind = cross ? TxKind::cross : TxKind::intra;
    t.sub_ops.push_back({0, 1, 3, 4, 10});
    if (cross)
        t.sub_ops.push_back({1, 2, 5, 6, 7});
    t.submit_time = 1234;
    return t;
}

ShardConfig shard_of(std::uint32_t m, double f_S, Role role = Role::processing)
{
    ShardConfig c;
    c.f_S = f_S;
    c.f_L = role == Role::ordering ? f_S : 1 - f_S - 0.01;
    c.role = role;
    for (NodeId i = 0; i < m; ++i)
        c.members.push_back(100 + i);
    return c;
}

QuorumAttestation signed_by(std::vector<NodeId> const& ids, Digest subject)
{
    QuorumAttestation q;
    q.subject = subject;
    for (auto id : ids)
        q.add({id, subject, true});
    return q;
}

} // namespace

TEST_CASE("sha256 known answer")
{
    std::string const abc = "abc";
    auto d = sha256(reinterpret_cast<std::uint8_t const*>(abc.data()), abc.size());
    CHECK(d.hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(d.short_hex() == "ba7816bf");
    CHECK(Digest::from_hex(d.hex()) == d);
}

TEST_CASE("codec round trips")
{
    auto tx = sample_tx(9, true);
    CHECK(from_bytes<Transaction>(to_bytes(tx)) == tx);

    ExecutionBlock eb;
    eb.sid = 2;
    eb.creator = 7;
    eb.seq = 3;
    eb.itxs.push_back(sample_tx(1, false));
    eb.ctxs.push_back(sample_tx(2, true));
    CHECK(from_bytes<ExecutionBlock>(to_bytes(eb)) == eb);

    CertificateBlock cb;
    cb.eb_digest = canonical_digest(eb);
    cb.ctx_batches.push_back({1, sha256(to_bytes(tx)), {{2, tx.keys()}}});
    cb.sid = 2;
    cb.creator = 7;
    cb.epoch = 1;
    cb.quorum = signed_by({1, 2, 3}, body_digest(cb));
    CHECK(from_bytes<CertificateBlock>(to_bytes(cb)) == cb);

    OrderingBlock ob;
    ob.round = 5;
    Aggregator a;
    a.round = 4;
    a.vote[cb.eb_digest] = {1, 0, 1};
    a.pending_shards = {3};
    ob.args.push_back(a);
    ob.eb_digests.push_back({2, cb.eb_digest, 7, {1, 2}});
    ob.ctx_meta.push_back({cb.ctx_batches[0].batch, 2, 1, cb.eb_digest, cb.ctx_batches[0].txs});
    ob.decisions.push_back({4, cb.eb_digest, 0, 2, true});
    ob.plans.push_back({1, {44, 45}, 0.37, 0.62, 15, 21});
    ob.proposer = 3;
    CHECK(from_bytes<OrderingBlock>(to_bytes(ob)) == ob);
    // compressed form measures wire size with an aggregate signature
    ob.quorum = signed_by({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15}, body_digest(ob));
    CHECK(from_bytes<OrderingBlock>(to_bytes(ob)) == ob);
    CHECK(wire_size(ob) < to_bytes(ob).size());

    LedgerEntry le;
    le.round = 5;
    le.finalized.push_back({2, Outcome::aborted, AbortCause::cascading, true, tx.sub_ops});
    le.state_root = sha256(to_bytes(tx));
    CHECK(from_bytes<LedgerEntry>(to_bytes(le)) == le);
}

TEST_CASE("truncated and padded input is rejected")
{
    auto b = to_bytes(sample_tx(3, true));
    auto shorter = b;
    shorter.pop_back();
    CHECK_THROWS_AS(from_bytes<Transaction>(shorter), DecodeError);
    auto longer = b;
    longer.push_back(0);
    CHECK_THROWS_AS(from_bytes<Transaction>(longer), DecodeError);
}

TEST_CASE("digests are deterministic and separate distinct values")
{
    std::mt19937_64 rng(3);
    std::map<Digest, Bytes> seen;
    for (int i = 0; i < 500; ++i)
    {
        Transaction t;
        t.id = rng() % 50;
        t.kind = (rng() & 1) ? TxKind::cross : TxKind::intra;
        t.sub_ops.push_back({static_cast<ShardId>(rng() % 3), static_cast<ContractId>(rng() % 4),
                             static_cast<AccountId>(rng() % 5), static_cast<AccountId>(rng() % 5),
                             static_cast<Amount>(rng() % 4)});
        auto const d = canonical_digest(t);
        CHECK(canonical_digest(t) == d);
        auto const b = to_bytes(t);
        auto [it, fresh] = seen.emplace(d, b);
        if (!fresh)
            CHECK(it->second == b);
    }
    DigestRegistry reg;
    DigestRegistry::Scope scope(&reg);
    std::set<Bytes> encodings;
    for (int i = 0; i < 200; ++i)
    {
        auto t = sample_tx(static_cast<TxId>(i % 100), i % 3 == 0);
        encodings.insert(to_bytes(t));
        canonical_digest(t);
    }
    CHECK(reg.size() == encodings.size());
}

TEST_CASE("empty execution block digest is stable")
{
    ExecutionBlock eb;
    auto const d = canonical_digest(eb);
    CHECK(d == canonical_digest(ExecutionBlock{}));
    CHECK(d.hex() == "9d908ecfb6b256def8b49a7c504e6c889c4b0e41fe6ce3e01863dd7b61a20aa0");
}

TEST_CASE("transaction helpers")
{
    auto t = sample_tx(1, true);
    CHECK(t.shards() == std::vector<ShardId>{0, 1});
    CHECK(t.keys().size() == 4);
    CHECK(t.ops_on(1).size() == 1);
    CHECK(t.well_formed());
    auto bad = sample_tx(1, false);
    bad.sub_ops.push_back({1, 2, 5, 6, 7});
    CHECK_FALSE(bad.well_formed());
}

TEST_CASE("quorum thresholds")
{
    CHECK(quorum_threshold(20, 0.55, ThresholdKind::processing) == 12);
    CHECK(quorum_threshold(13, 0.57, ThresholdKind::processing) == 8);
    CHECK(quorum_threshold(21, 1.0 / 3, ThresholdKind::ordering) == 15);
    CHECK(quorum_threshold(10, 0.5, ThresholdKind::processing) == 6);

    auto s = shard_of(20, 0.55);
    Digest subj = sha256(to_bytes(sample_tx(1, false)));
    std::vector<NodeId> ids;
    for (NodeId i = 0; i < 11; ++i)
        ids.push_back(100 + i);
    CHECK_FALSE(verify_quorum(signed_by(ids, subj), s));
    ids.push_back(111);
    CHECK(verify_quorum(signed_by(ids, subj), s));

    // duplicates collapse
    auto q = signed_by({100, 101, 102, 103, 104, 105, 106, 107, 108, 109, 110}, subj);
    CHECK_FALSE(q.add({110, subj, true}));
    CHECK_FALSE(verify_quorum(q, s));
    // outsiders and wrong subjects do not count
    q.add({999, subj, true});
    q.add({111, Digest{}, true});
    CHECK_FALSE(verify_quorum(q, s));
    q.add({112, subj, false});
    CHECK_FALSE(verify_quorum(q, s));
    q.add({113, subj, true});
    CHECK(verify_quorum(q, s));

    auto ord = shard_of(21, 1.0 / 3, Role::ordering);
    CHECK(ord.quorum() == 15);
    CHECK(ord.regime_ok());
    CHECK(shard_of(13, 0.57).regime_ok());
}

TEST_CASE("vote aggregation is a bitwise AND over all combinations")
{
    Digest b = sha256(to_bytes(sample_tx(5, true)));
    for (int mask = 0; mask < 8; ++mask)
    {
        Aggregator a;
        a.round = 1;
        a.pending_shards = {0, 1, 2};
        for (ShardId sid = 0; sid < 3; ++sid)
        {
            std::uint8_t const bit = (mask >> sid) & 1;
            a = aggregate_vote(a, {{b, {bit, 1}}});
        }
        REQUIRE(a.vote.count(b) == 1);
        CHECK(a.vote[b][0] == (mask == 7 ? 1 : 0));
        CHECK(a.vote[b][1] == 1);
    }
}

#include "coe/executor.hpp"

#include <doctest.h>

#include <random>

using namespace coe;

namespace {

/// Two shards driven round by round; votes are folded and settled in the next round.
struct Mini
{
    Economy eco{2, 2, 8, 100};
    ExecutorKind kind;
    std::unique_ptr<Executor> ex[2];
    Round round = 0;
    Round lag = 1;
    std::map<Round, std::vector<CtxMeta>> metas;
    std::map<Round, Aggregator> args;
    std::map<std::tuple<Round, Digest, std::uint32_t, TxId>, std::vector<std::uint8_t>> tx_votes;
    std::vector<TxDecision> next_decisions;
    std::map<TxId, Transaction> bodies;
    std::vector<LedgerEntry> ledger[2];
    std::vector<RoundOutput> outs[2];

    explicit Mini(ExecutorKind k) : kind(k)
    {
        for (ShardId s = 0; s < 2; ++s)
            ex[s] = Executor::make(k, s, genesis_balances(eco, s));
    }

    void step(std::vector<Transaction> const& itxs, std::vector<Transaction> const& ctxs)
    {
        ++round;
        std::map<std::pair<ShardId, ShardId>, std::vector<Transaction>> groups;
        for (auto const& t : ctxs)
        {
            auto sh = t.shards();
            groups[{sh.front(), sh.back()}].push_back(t);
            bodies[t.id] = t;
        }
        std::vector<CtxMeta> ms;
        for (auto const& [od, txs] : groups)
        {
            CtxMeta m;
            m.origin = od.first;
            m.dest = od.second;
            m.batch = batch_digest(Digest{}, od.first, od.second, txs);
            for (auto const& t : txs)
                m.txs.push_back({t.id, t.keys()});
            ms.push_back(m);
        }
        metas[round] = ms;

        std::vector<ArgInput> ready;
        if (round > lag)
            if (auto it = args.find(round - lag); it != args.end())
                ready.push_back({it->second, metas[round - lag]});
        auto decisions = std::move(next_decisions);
        next_decisions.clear();

        Aggregator agg;
        agg.round = round;
        for (ShardId s = 0; s < 2; ++s)
        {
            RoundInput in;
            in.round = round;
            in.args = ready;
            in.decisions = decisions;
            for (auto const& t : itxs)
                if (t.shards().front() == s)
                    in.itxs.push_back(t);
            in.metas = ms;
            in.ctx_bodies = bodies;
            auto out = ex[s]->apply(in);
            agg = aggregate_vote(agg, out.votes);
            for (auto const& v : out.tx_votes)
                tx_votes[{v.round, v.batch, v.index, v.tx}].push_back(v.bit);
            ledger[s].push_back(out.entry);
            outs[s].push_back(std::move(out));
        }
        args[round] = agg;
        for (auto it = tx_votes.begin(); it != tx_votes.end();)
        {
            if (it->second.size() < 2)
            {
                ++it;
                continue;
            }
            auto const& [r, b, i, id] = it->first;
            next_decisions.push_back({r, b, i, id, it->second[0] && it->second[1]});
            it = tx_votes.erase(it);
        }
    }

    std::map<TxId, FinalizedTx> finals(ShardId s) const
    {
        std::map<TxId, FinalizedTx> m;
        for (auto const& e : ledger[s])
            for (auto const& f : e.finalized)
                m.emplace(f.id, f);
        return m;
    }
};

Transaction itx(TxId id, ShardId s, ContractId c, AccountId from, AccountId to, Amount amt)
{
    Transaction t;
    t.id = id;
    t.sub_ops.push_back({s, c, from, to, amt});
    return t;
}

Transaction ctx(TxId id, SubOperation a, SubOperation b)
{
    Transaction t;
    t.id = id;
    t.kind = TxKind::cross;
    t.sub_ops = {a, b};
    return t;
}

/// Replays the committed operations of a ledger from genesis, checking each one applies.
Balances replay(Economy const& eco, ShardId s, std::vector<LedgerEntry> const& ledger)
{
    Balances b = genesis_balances(eco, s);
    for (auto const& e : ledger)
    {
        for (auto const& f : e.finalized)
            if (f.outcome == Outcome::committed)
                for (auto const& op : f.ops)
                    REQUIRE(apply_op(b, op));
        CHECK(state_root_of(b) == e.state_root);
    }
    return b;
}

struct RandomLoad
{
    std::mt19937_64 rng;
    TxId next = 1;
    explicit RandomLoad(std::uint64_t seed) : rng(seed) {}

    SubOperation op(ShardId s)
    {
        auto c = static_cast<ContractId>(s * 2 + rng() % 2);
        auto a = static_cast<AccountId>(rng() % 8);
        auto b = static_cast<AccountId>((a + 1 + rng() % 7) % 8);
        return {s, c, a, b, static_cast<Amount>(10 + rng() % 120)};
    }

    void round(std::vector<Transaction>& itxs, std::vector<Transaction>& ctxs, double ctx_ratio)
    {
        for (int i = 0; i < 6; ++i)
        {
            if (std::uniform_real_distribution<>(0, 1)(rng) < ctx_ratio)
                ctxs.push_back(ctx(next++, op(0), op(1)));
            else
            {
                auto s = static_cast<ShardId>(rng() % 2);
                Transaction t;
                t.id = next++;
                t.sub_ops.push_back(op(s));
                itxs.push_back(t);
            }
        }
    }
};

void run_random(Mini& m, std::uint64_t seed, double ctx_ratio, int rounds)
{
    RandomLoad load(seed);
    for (int r = 0; r < rounds; ++r)
    {
        std::vector<Transaction> itxs, ctxs;
        load.round(itxs, ctxs, ctx_ratio);
        m.step(itxs, ctxs);
    }
    for (int r = 0; r < 8; ++r)
        m.step({}, {});
}

} // namespace

TEST_CASE("cross-shard swap commits on both shards")
{
    for (auto kind : {ExecutorKind::lockfree, ExecutorKind::two_phase_lock})
    {
        Mini m(kind);
        // shard 0 pays 30 of token 0 from 0 to 1, shard 1 pays 20 of token 2 back from 1 to 0
        m.step({}, {ctx(1, {0, 0, 0, 1, 30}, {1, 2, 1, 0, 20})});
        for (int i = 0; i < 3; ++i)
            m.step({}, {});
        auto f0 = m.finals(0), f1 = m.finals(1);
        REQUIRE(f0.count(1));
        REQUIRE(f1.count(1));
        CHECK(f0[1].outcome == Outcome::committed);
        CHECK(f1[1].outcome == Outcome::committed);
        CHECK(m.ex[0]->committed().at({0, 0}) == 70);
        CHECK(m.ex[0]->committed().at({0, 1}) == 130);
        CHECK(m.ex[1]->committed().at({2, 1}) == 80);
        CHECK(m.ex[1]->committed().at({2, 0}) == 120);
        CHECK_FALSE(m.ex[0]->has_unsettled());
    }
}

TEST_CASE("a failed cross-shard transaction cascades to later readers")
{
    Mini m(ExecutorKind::lockfree);
    auto a = ctx(1, {0, 0, 0, 1, 10}, {1, 2, 0, 1, 500}); // overdraws on shard 1
    auto b = ctx(2, {0, 0, 1, 2, 5}, {1, 2, 3, 4, 5});    // reads a's credit on shard 0
    auto c = ctx(3, {0, 1, 5, 6, 5}, {1, 3, 5, 6, 5});    // disjoint
    m.step({}, {a, b, c});
    // shard 0 tentatively accepted a and b
    REQUIRE(m.outs[0][0].votes.size() == 1);
    CHECK(m.outs[0][0].votes[0].bits == std::vector<std::uint8_t>{1, 1, 1});
    CHECK(m.outs[1][0].votes[0].bits == std::vector<std::uint8_t>{0, 1, 1});
    for (int i = 0; i < 3; ++i)
        m.step({}, {});
    for (ShardId s = 0; s < 2; ++s)
    {
        auto f = m.finals(s);
        CHECK(f[1].outcome == Outcome::aborted);
        CHECK(f[1].cause == AbortCause::execution_failure);
        CHECK(f[2].outcome == Outcome::aborted);
        CHECK(f[2].cause == AbortCause::cascading);
        CHECK(f[3].outcome == Outcome::committed);
    }
    CHECK(m.ex[0]->committed().at({0, 1}) == 100);
    CHECK(m.ex[0]->committed().at({1, 6}) == 105);
}

TEST_CASE("intra-shard transactions wait behind a tentative cross-shard write")
{
    Mini m(ExecutorKind::lockfree);
    m.lag = 2;
    m.step({}, {ctx(1, {0, 0, 0, 1, 30}, {1, 2, 1, 0, 20})});
    m.step({itx(2, 0, 0, 1, 3, 5), itx(3, 0, 1, 4, 5, 5)}, {});
    auto const& o = m.outs[0][1];
    CHECK(o.deferred == std::vector<TxId>{2});
    // tx 3 is disjoint and finalized in its round, tx 2 after the settlement
    bool saw3 = false;
    for (auto const& f : o.entry.finalized)
        saw3 |= f.id == 3;
    CHECK(saw3);
    m.step({}, {});
    auto f = m.finals(0);
    REQUIRE(f.count(2));
    CHECK(f[2].outcome == Outcome::committed);
}

TEST_CASE("two-phase locking blocks conflicting transactions until the decision")
{
    Mini m(ExecutorKind::two_phase_lock);
    m.step({}, {ctx(1, {0, 0, 0, 1, 30}, {1, 2, 1, 0, 20})});
    auto* tpl = dynamic_cast<TwoPhaseLockExecutor*>(m.ex[0].get());
    REQUIRE(tpl);
    CHECK(tpl->locks().count({0, 0}));
    CHECK(tpl->locks().count({0, 1}));
    m.step({itx(2, 0, 0, 1, 3, 5)}, {});
    // the decision for tx 1 arrives in round 2's input
    auto f = m.finals(0);
    CHECK(f.count(1));
    CHECK(f.count(2));
    CHECK(tpl->locks().empty());

    Mini w(ExecutorKind::two_phase_lock);
    w.step({}, {ctx(1, {0, 0, 0, 1, 30}, {1, 2, 1, 0, 20}), ctx(2, {0, 0, 1, 2, 5}, {1, 2, 5, 6, 5})});
    // tx 2 cannot lock (0,1) while tx 1 holds it
    REQUIRE(w.outs[0][0].tx_votes.size() == 1);
    CHECK(w.outs[0][0].tx_votes[0].tx == 1);
    w.step({}, {});
    bool waited = false;
    for (auto const& lw : w.outs[0][1].lock_waits)
        waited |= lw.tx == 2 && lw.rounds == 1;
    CHECK(waited);
    for (int i = 0; i < 3; ++i)
        w.step({}, {});
    CHECK(w.finals(0)[2].outcome == Outcome::committed);
    CHECK(w.finals(1)[2].outcome == Outcome::committed);
}

TEST_CASE("random workloads match a sequential replay")
{
    for (auto kind : {ExecutorKind::lockfree, ExecutorKind::two_phase_lock})
        for (std::uint64_t seed = 1; seed <= 10; ++seed)
        {
            CAPTURE(seed);
            Mini m(kind);
            run_random(m, seed, 0.4, 25);
            std::map<TxId, Outcome> cross;
            std::size_t total = 0;
            for (ShardId s = 0; s < 2; ++s)
            {
                auto b = replay(m.eco, s, m.ledger[s]);
                CHECK(b == m.ex[s]->committed());
                CHECK_FALSE(m.ex[s]->has_unsettled());
                for (auto const& [id, f] : m.finals(s))
                {
                    if (!f.cross)
                        continue;
                    auto [it, fresh] = cross.emplace(id, f.outcome);
                    if (!fresh)
                        CHECK(it->second == f.outcome);
                }
                total += m.finals(s).size();
                // supply per token is conserved
                for (ContractId c = s * 2; c < s * 2 + 2; ++c)
                {
                    Amount sum = 0;
                    for (auto const& [k, v] : m.ex[s]->committed())
                        if (k.contract == c)
                            sum += v;
                    CHECK(sum == 800);
                }
            }
            // every transaction settled: itxs once, ctxs on both shards
            CHECK(total == 25 * 6 + cross.size());
        }
}

TEST_CASE("without cross-shard load both executors produce identical ledgers")
{
    Mini a(ExecutorKind::lockfree), b(ExecutorKind::two_phase_lock);
    run_random(a, 99, 0.0, 20);
    run_random(b, 99, 0.0, 20);
    for (ShardId s = 0; s < 2; ++s)
    {
        CHECK(a.ledger[s] == b.ledger[s]);
        CHECK(a.ex[s]->committed() == b.ex[s]->committed());
    }
}

TEST_CASE("restored executors continue identically")
{
    for (auto kind : {ExecutorKind::lockfree, ExecutorKind::two_phase_lock})
    {
        Mini m(kind);
        RandomLoad load(5);
        Mini copy(kind);
        for (int r = 0; r < 12; ++r)
        {
            std::vector<Transaction> itxs, ctxs;
            load.round(itxs, ctxs, 0.5);
            m.step(itxs, ctxs);
            copy.step(itxs, ctxs);
        }
        for (ShardId s = 0; s < 2; ++s)
        {
            auto snap = copy.ex[s]->snapshot();
            copy.ex[s] = Executor::restore(kind, snap);
            CHECK(copy.ex[s]->snapshot() == snap);
            CHECK(copy.ex[s]->exec_digest() == m.ex[s]->exec_digest());
        }
        for (int r = 0; r < 10; ++r)
        {
            std::vector<Transaction> itxs, ctxs;
            load.round(itxs, ctxs, 0.5);
            m.step(itxs, ctxs);
            copy.step(itxs, ctxs);
        }
        for (ShardId s = 0; s < 2; ++s)
        {
            CHECK(copy.ledger[s] == m.ledger[s]);
            CHECK(copy.ex[s]->exec_digest() == m.ex[s]->exec_digest());
        }
    }
}

#include "coe/executor.hpp"

#include <algorithm>
#include <stdexcept>

namespace coe {

namespace {

bool intersects(std::vector<StateKey> const& a, std::vector<StateKey> const& b)
{
    for (auto const& x : a)
        if (std::find(b.begin(), b.end(), x) != b.end())
            return true;
    return false;
}

std::vector<StateKey> keys_of(std::vector<SubOperation> const& ops)
{
    std::vector<StateKey> k;
    for (auto const& op : ops)
    {
        k.push_back(op.debit_key());
        k.push_back(op.credit_key());
    }
    std::sort(k.begin(), k.end());
    k.erase(std::unique(k.begin(), k.end()), k.end());
    return k;
}

Amount read(Balances const& c, Balances const& overlay, StateKey const& k)
{
    if (auto it = overlay.find(k); it != overlay.end())
        return it->second;
    if (auto it = c.find(k); it != c.end())
        return it->second;
    return 0;
}

// Runs ops against (c + overlay); on success writes results into overlay.
bool run_ops(Balances const& c, Balances& overlay, std::vector<SubOperation> const& ops)
{
    Balances scratch;
    auto get = [&](StateKey const& k) {
        if (auto it = scratch.find(k); it != scratch.end())
            return it->second;
        return read(c, overlay, k);
    };
    for (auto const& op : ops)
    {
        Amount d = get(op.debit_key());
        if (op.amount <= 0 || d < op.amount)
            return false;
        scratch[op.debit_key()] = d - op.amount;
        scratch[op.credit_key()] = get(op.credit_key()) + op.amount;
    }
    for (auto const& [k, v] : scratch)
        overlay[k] = v;
    return true;
}

// Runs ops directly against committed state, all or nothing.
bool run_committed(Balances& c, std::vector<SubOperation> const& ops)
{
    Balances overlay;
    if (!run_ops(c, overlay, ops))
        return false;
    for (auto const& [k, v] : overlay)
        c[k] = v;
    return true;
}

void put_balances(Writer& w, Balances const& b)
{
    w.u32(static_cast<std::uint32_t>(b.size()));
    for (auto const& [k, v] : b)
    {
        encode(w, k);
        w.i64(v);
    }
}

Balances get_balances(Reader& r)
{
    Balances b;
    std::uint32_t n = r.count(16);
    for (std::uint32_t i = 0; i < n; ++i)
    {
        StateKey k = decode<StateKey>(r);
        b[k] = r.i64();
    }
    return b;
}

void put_pos(Writer& w, CtxPos const& p)
{
    w.u64(p.round);
    w.u32(p.batch);
    w.u32(p.index);
}

CtxPos get_pos(Reader& r)
{
    CtxPos p;
    p.round = r.u64();
    p.batch = r.u32();
    p.index = r.u32();
    return p;
}

template <class T> void put_vec(Writer& w, std::vector<T> const& v)
{
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (auto const& x : v)
        encode(w, x);
}

template <class T> std::vector<T> get_vec(Reader& r)
{
    std::uint32_t n = r.count();
    std::vector<T> v;
    for (std::uint32_t i = 0; i < n; ++i)
        v.push_back(decode<T>(r));
    return v;
}

void put_ids(Writer& w, std::set<TxId> const& s)
{
    w.u32(static_cast<std::uint32_t>(s.size()));
    for (auto x : s)
        w.u64(x);
}

std::set<TxId> get_ids(Reader& r)
{
    std::set<TxId> s;
    std::uint32_t n = r.count(8);
    for (std::uint32_t i = 0; i < n; ++i)
        s.insert(r.u64());
    return s;
}

nlohmann::json balances_json(Balances const& b)
{
    nlohmann::json j = nlohmann::json::array();
    for (auto const& [k, v] : b)
        j.push_back(nlohmann::json::array({k.contract, k.account, v}));
    return j;
}

} // namespace

Balances genesis_balances(Economy const& eco, ShardId sid)
{
    Balances b;
    for (std::uint32_t j = 0; j < eco.contracts_per_shard; ++j)
        for (AccountId a = 0; a < eco.accounts; ++a)
            b[{eco.contract(sid, j), a}] = eco.initial_balance;
    return b;
}

Digest state_root_of(Balances const& b)
{
    Writer w;
    w.u8(0xB0);
    put_balances(w, b);
    return sha256(w.data());
}

bool apply_op(Balances& b, SubOperation const& op)
{
    return run_committed(b, {op});
}

std::unique_ptr<Executor> Executor::make(ExecutorKind kind, ShardId sid, Balances genesis)
{
    if (kind == ExecutorKind::lockfree)
        return std::make_unique<LockFreeExecutor>(sid, std::move(genesis));
    return std::make_unique<TwoPhaseLockExecutor>(sid, std::move(genesis));
}

std::unique_ptr<Executor> Executor::restore(ExecutorKind kind, Bytes const& snapshot)
{
    if (kind == ExecutorKind::lockfree)
        return LockFreeExecutor::restore(snapshot);
    return TwoPhaseLockExecutor::restore(snapshot);
}

// ---- lock-free --------------------------------------------------------------

LockFreeExecutor::LockFreeExecutor(ShardId sid, Balances genesis) : sid_(sid), committed_(std::move(genesis)) {}

Amount LockFreeExecutor::working_balance(StateKey const& k) const
{
    return read(committed_, overlay_, k);
}

std::set<StateKey> LockFreeExecutor::pending_keys() const
{
    std::set<StateKey> s;
    for (auto const& p : pending_)
        if (!p.is_ctx || p.ok)
            s.insert(p.local_keys.begin(), p.local_keys.end());
    return s;
}

std::set<StateKey> LockFreeExecutor::aborted_keys() const
{
    std::set<StateKey> s;
    for (auto const& e : aborted_)
        s.insert(e.keys.begin(), e.keys.end());
    for (auto const& [pos, keys] : local_aborted_)
        s.insert(keys.begin(), keys.end());
    return s;
}

std::set<StateKey> LockFreeExecutor::deferred_itx_keys() const
{
    std::set<StateKey> s;
    for (auto const& p : pending_)
        if (!p.is_ctx)
            s.insert(p.local_keys.begin(), p.local_keys.end());
    return s;
}

bool LockFreeExecutor::exec_on_working(std::vector<SubOperation> const& ops)
{
    return run_ops(committed_, overlay_, ops);
}

void LockFreeExecutor::rebuild_working()
{
    overlay_.clear();
    for (auto& p : pending_)
        p.ok = exec_on_working(p.ops);
}

void LockFreeExecutor::finalize(FinalizedTx ft, RoundOutput& out)
{
    out.entry.finalized.push_back(std::move(ft));
}

bool LockFreeExecutor::overlaps_aborted(std::vector<StateKey> const& keys, CtxPos const& pos, Round exec_round) const
{
    for (auto const& e : aborted_)
        if (e.pos < pos && exec_round < e.known_round && intersects(keys, e.keys))
            return true;
    return false;
}

void LockFreeExecutor::settle(ArgInput const& a, Round known_round, RoundOutput& out)
{
    Round const rho = a.arg.round;
    for (std::uint32_t bi = 0; bi < a.metas.size(); ++bi)
    {
        CtxMeta const& meta = a.metas[bi];
        auto vit = a.arg.vote.find(meta.batch);
        bool const involved = meta.origin == sid_ || meta.dest == sid_;
        for (std::uint32_t ti = 0; ti < meta.txs.size(); ++ti)
        {
            CtxPos const pos{rho, bi, ti};
            auto rit = records_.find(pos);
            bool const dup = rit != records_.end() ? rit->second.dup : false;
            if (dup)
            {
                records_.erase(rit);
                continue;
            }
            if (!involved && seen_dup_.erase(pos))
                continue;
            bool const bit = vit != a.arg.vote.end() && ti < vit->second.size() && vit->second[ti];
            bool const cascade = overlaps_aborted(meta.txs[ti].keys, pos, rho);
            bool const commit = bit && !cascade;
            if (!commit)
                aborted_.push_back({pos, known_round, meta.txs[ti].keys});
            if (!involved)
                continue;
            if (rit == records_.end())
                throw std::logic_error("settling an unknown cross-shard transaction");
            CtxRecord rec = rit->second;
            records_.erase(rit);
            local_aborted_.erase(pos);

            FinalizedTx ft;
            ft.id = rec.id;
            ft.cross = true;
            ft.ops = rec.ops;
            auto pit = std::find_if(pending_.begin(), pending_.end(),
                                    [&](Pending const& p) { return p.seq == rec.pending_seq && p.is_ctx; });
            if (commit)
            {
                if (pit == pending_.end() || !pit->ok)
                    throw std::logic_error("committing a cross-shard transaction without a tentative result");
                if (!run_committed(committed_, pit->ops))
                    throw std::logic_error("committed cross-shard transaction no longer applies");
                pending_.erase(pit);
                ft.outcome = Outcome::committed;
            }
            else
            {
                if (pit != pending_.end())
                    pending_.erase(pit);
                ft.outcome = Outcome::aborted;
                ft.cause = (cascade || rec.conflict) ? AbortCause::cascading : AbortCause::execution_failure;
            }
            finalize(std::move(ft), out);
        }
    }
    rebuild_working();
    release_itxs(out);
    std::erase_if(aborted_, [&](AbortedEntry const& e) { return e.known_round <= rho + 1; });
}

void LockFreeExecutor::release_itxs(RoundOutput& out)
{
    std::set<std::uint64_t> live;
    for (auto const& p : pending_)
        live.insert(p.seq);
    bool any = false;
    for (std::size_t i = 0; i < pending_.size();)
    {
        Pending& p = pending_[i];
        if (!p.is_ctx)
        {
            std::erase_if(p.blockers, [&](std::uint64_t b) { return !live.count(b); });
            if (p.blockers.empty())
            {
                FinalizedTx ft;
                ft.id = p.tx.id;
                ft.ops = p.ops;
                bool const ok = run_committed(committed_, p.ops);
                ft.outcome = ok ? Outcome::committed : Outcome::aborted;
                ft.cause = ok ? AbortCause::none : AbortCause::execution_failure;
                finalize(std::move(ft), out);
                live.erase(p.seq);
                pending_.erase(pending_.begin() + static_cast<std::ptrdiff_t>(i));
                any = true;
                continue;
            }
        }
        ++i;
    }
    if (any)
        rebuild_working();
}

void LockFreeExecutor::execute_itx(Transaction const& tx, RoundOutput& out)
{
    if (!seen_itx_.insert(tx.id).second)
        return;
    auto ops = tx.ops_on(sid_);
    auto keys = keys_of(ops);
    std::set<std::uint64_t> blockers;
    for (auto const& p : pending_)
        if ((!p.is_ctx || p.ok) && intersects(keys, p.local_keys))
            blockers.insert(p.seq);
    if (blockers.empty())
    {
        FinalizedTx ft;
        ft.id = tx.id;
        ft.ops = ops;
        bool const ok = run_committed(committed_, ops);
        ft.outcome = ok ? Outcome::committed : Outcome::aborted;
        ft.cause = ok ? AbortCause::none : AbortCause::execution_failure;
        finalize(std::move(ft), out);
        return;
    }
    Pending p;
    p.seq = next_seq_++;
    p.tx = tx;
    p.ops = std::move(ops);
    p.local_keys = std::move(keys);
    p.blockers = std::move(blockers);
    p.ok = exec_on_working(p.ops);
    pending_.push_back(std::move(p));
    out.deferred.push_back(tx.id);
}

void LockFreeExecutor::vote(RoundInput const& in, RoundOutput& out)
{
    std::set<StateKey> const deferred_keys = deferred_itx_keys();
    std::set<StateKey> const aborted = aborted_keys();
    for (std::uint32_t bi = 0; bi < in.metas.size(); ++bi)
    {
        CtxMeta const& meta = in.metas[bi];
        bool const involved = meta.origin == sid_ || meta.dest == sid_;
        BatchVote bv;
        bv.batch = meta.batch;
        for (std::uint32_t ti = 0; ti < meta.txs.size(); ++ti)
        {
            CtxPos const pos{in.round, bi, ti};
            bool const dup = !seen_ctx_.insert(meta.txs[ti].id).second;
            if (!involved)
            {
                if (dup)
                    seen_dup_.insert(pos);
                continue;
            }
            CtxRecord rec;
            rec.id = meta.txs[ti].id;
            if (dup)
            {
                rec.dup = true;
                records_[pos] = rec;
                bv.bits.push_back(1);
                continue;
            }
            auto body = in.ctx_bodies.find(rec.id);
            if (body == in.ctx_bodies.end())
                throw std::logic_error("missing cross-shard transaction body");
            rec.ops = body->second.ops_on(sid_);
            auto const local = keys_of(rec.ops);
            bool conflict = false;
            for (auto const& k : meta.txs[ti].keys)
                if (aborted.count(k))
                    conflict = true;
            for (auto const& k : local)
                if (deferred_keys.count(k))
                    conflict = true;
            if (conflict)
            {
                rec.conflict = true;
                rec.bit = 0;
            }
            else if (exec_on_working(rec.ops))
            {
                Pending p;
                p.seq = next_seq_++;
                p.is_ctx = true;
                p.pos = pos;
                p.tx = body->second;
                p.ops = rec.ops;
                p.local_keys = local;
                p.ok = true;
                rec.pending_seq = p.seq;
                rec.bit = 1;
                pending_.push_back(std::move(p));
            }
            else
            {
                rec.bit = 0;
                local_aborted_[pos] = meta.txs[ti].keys;
            }
            bv.bits.push_back(rec.bit);
            records_[pos] = std::move(rec);
        }
        if (involved)
            out.votes.push_back(std::move(bv));
    }
}

RoundOutput LockFreeExecutor::apply(RoundInput const& in)
{
    if (in.round != round_ + 1)
        throw std::logic_error("ordering rounds must be applied contiguously");
    round_ = in.round;
    RoundOutput out;
    out.entry.round = in.round;
    for (auto const& a : in.args)
        settle(a, in.round, out);
    for (auto const& tx : in.itxs)
        execute_itx(tx, out);
    vote(in, out);
    out.entry.state_root = state_root_of(committed_);
    return out;
}

Bytes LockFreeExecutor::snapshot() const
{
    Writer w;
    w.u8(0x51);
    w.u32(sid_);
    w.u64(round_);
    w.u64(next_seq_);
    put_balances(w, committed_);
    put_balances(w, overlay_);
    w.u32(static_cast<std::uint32_t>(pending_.size()));
    for (auto const& p : pending_)
    {
        w.u64(p.seq);
        w.boolean(p.is_ctx);
        put_pos(w, p.pos);
        encode(w, p.tx);
        put_vec(w, p.ops);
        put_vec(w, p.local_keys);
        w.boolean(p.ok);
        w.u32(static_cast<std::uint32_t>(p.blockers.size()));
        for (auto b : p.blockers)
            w.u64(b);
    }
    w.u32(static_cast<std::uint32_t>(records_.size()));
    for (auto const& [pos, r] : records_)
    {
        put_pos(w, pos);
        w.u64(r.id);
        w.u8(r.bit);
        w.boolean(r.conflict);
        w.boolean(r.dup);
        w.u64(r.pending_seq);
        put_vec(w, r.ops);
    }
    w.u32(static_cast<std::uint32_t>(aborted_.size()));
    for (auto const& e : aborted_)
    {
        put_pos(w, e.pos);
        w.u64(e.known_round);
        put_vec(w, e.keys);
    }
    w.u32(static_cast<std::uint32_t>(local_aborted_.size()));
    for (auto const& [pos, keys] : local_aborted_)
    {
        put_pos(w, pos);
        put_vec(w, keys);
    }
    put_ids(w, seen_itx_);
    put_ids(w, seen_ctx_);
    w.u32(static_cast<std::uint32_t>(seen_dup_.size()));
    for (auto const& p : seen_dup_)
        put_pos(w, p);
    return w.take();
}

std::unique_ptr<LockFreeExecutor> LockFreeExecutor::restore(Bytes const& b)
{
    Reader r(b);
    if (r.u8() != 0x51)
        throw DecodeError("not a lock-free executor snapshot");
    auto e = std::make_unique<LockFreeExecutor>(0, Balances{});
    e->sid_ = r.u32();
    e->round_ = r.u64();
    e->next_seq_ = r.u64();
    e->committed_ = get_balances(r);
    e->overlay_ = get_balances(r);
    std::uint32_t np = r.count();
    for (std::uint32_t i = 0; i < np; ++i)
    {
        Pending p;
        p.seq = r.u64();
        p.is_ctx = r.boolean();
        p.pos = get_pos(r);
        p.tx = decode<Transaction>(r);
        p.ops = get_vec<SubOperation>(r);
        p.local_keys = get_vec<StateKey>(r);
        p.ok = r.boolean();
        std::uint32_t nb = r.count(8);
        for (std::uint32_t j = 0; j < nb; ++j)
            p.blockers.insert(r.u64());
        e->pending_.push_back(std::move(p));
    }
    std::uint32_t nr = r.count();
    for (std::uint32_t i = 0; i < nr; ++i)
    {
        CtxPos pos = get_pos(r);
        CtxRecord rec;
        rec.id = r.u64();
        rec.bit = r.u8();
        rec.conflict = r.boolean();
        rec.dup = r.boolean();
        rec.pending_seq = r.u64();
        rec.ops = get_vec<SubOperation>(r);
        e->records_[pos] = std::move(rec);
    }
    std::uint32_t na = r.count();
    for (std::uint32_t i = 0; i < na; ++i)
    {
        AbortedEntry a;
        a.pos = get_pos(r);
        a.known_round = r.u64();
        a.keys = get_vec<StateKey>(r);
        e->aborted_.push_back(std::move(a));
    }
    std::uint32_t nl = r.count();
    for (std::uint32_t i = 0; i < nl; ++i)
    {
        CtxPos pos = get_pos(r);
        e->local_aborted_[pos] = get_vec<StateKey>(r);
    }
    e->seen_itx_ = get_ids(r);
    e->seen_ctx_ = get_ids(r);
    std::uint32_t nd = r.count(16);
    for (std::uint32_t i = 0; i < nd; ++i)
        e->seen_dup_.insert(get_pos(r));
    if (!r.done())
        throw DecodeError("trailing snapshot bytes");
    return e;
}

nlohmann::json LockFreeExecutor::debug_json() const
{
    nlohmann::json pend = nlohmann::json::array();
    for (auto const& p : pending_)
        pend.push_back({{"tx", p.tx.id}, {"ctx", p.is_ctx}, {"ok", p.ok}, {"keys", p.local_keys}});
    return {{"executor", "lockfree"},
            {"sid", sid_},
            {"round", round_},
            {"balances", balances_json(committed_)},
            {"cur_pending", pending_keys()},
            {"cur_aborted", aborted_keys()},
            {"ordered_itxs", pend}};
}

// ---- two-phase lock ---------------------------------------------------------

TwoPhaseLockExecutor::TwoPhaseLockExecutor(ShardId sid, Balances genesis)
    : sid_(sid), committed_(std::move(genesis))
{
}

Amount TwoPhaseLockExecutor::working_balance(StateKey const& k) const
{
    return read(committed_, overlay_, k);
}

std::set<StateKey> TwoPhaseLockExecutor::pending_keys() const
{
    std::set<StateKey> s;
    for (auto const& [k, holder] : locks_)
        s.insert(k);
    return s;
}

std::vector<StateKey> TwoPhaseLockExecutor::local_keys(Transaction const& tx) const
{
    return keys_of(tx.ops_on(sid_));
}

bool TwoPhaseLockExecutor::blocked(std::vector<StateKey> const& keys, std::size_t queue_limit) const
{
    for (auto const& k : keys)
        if (locks_.count(k))
            return true;
    for (std::size_t i = 0; i < queue_limit && i < queue_.size(); ++i)
        if (intersects(keys, local_keys(queue_[i].tx)))
            return true;
    return false;
}

void TwoPhaseLockExecutor::finalize(FinalizedTx ft, RoundOutput& out)
{
    out.entry.finalized.push_back(std::move(ft));
}

void TwoPhaseLockExecutor::run_item(Item const& it, RoundOutput& out)
{
    auto ops = it.tx.ops_on(sid_);
    if (!it.is_ctx)
    {
        FinalizedTx ft;
        ft.id = it.tx.id;
        ft.ops = ops;
        bool const ok = run_committed(committed_, ops);
        ft.outcome = ok ? Outcome::committed : Outcome::aborted;
        ft.cause = ok ? AbortCause::none : AbortCause::execution_failure;
        finalize(std::move(ft), out);
        return;
    }
    Held h;
    h.tx = it.tx;
    h.pos = it.pos;
    h.batch = it.batch;
    h.ordered_round = it.ordered_round;
    h.ok = run_ops(committed_, overlay_, ops);
    if (h.ok)
        for (auto const& k : keys_of(ops))
            locks_[k] = it.tx.id;
    TxVote v;
    v.round = it.pos.round;
    v.batch = it.batch;
    v.index = it.pos.index;
    v.tx = it.tx.id;
    v.bit = h.ok ? 1 : 0;
    out.tx_votes.push_back(v);
    held_[it.pos] = std::move(h);
}

RoundOutput TwoPhaseLockExecutor::apply(RoundInput const& in)
{
    if (in.round != round_ + 1)
        throw std::logic_error("ordering rounds must be applied contiguously");
    round_ = in.round;
    RoundOutput out;
    out.entry.round = in.round;

    // (1) coordinator decisions release locks
    for (auto const& d : in.decisions)
    {
        auto it = std::find_if(held_.begin(), held_.end(), [&](auto const& kv) {
            return kv.first.round == d.round && kv.second.batch == d.batch && kv.first.index == d.index &&
                   kv.second.tx.id == d.tx;
        });
        if (it == held_.end())
            continue;
        Held h = it->second;
        held_.erase(it);
        voted_.erase(h.pos);
        auto ops = h.tx.ops_on(sid_);
        auto keys = keys_of(ops);
        FinalizedTx ft;
        ft.id = h.tx.id;
        ft.cross = true;
        ft.ops = ops;
        if (d.commit)
        {
            if (!h.ok || !run_committed(committed_, ops))
                throw std::logic_error("commit decision for a transaction that did not execute");
            ft.outcome = Outcome::committed;
        }
        else
        {
            ft.outcome = Outcome::aborted;
            ft.cause = AbortCause::execution_failure;
        }
        if (h.ok)
            for (auto const& k : keys)
            {
                locks_.erase(k);
                overlay_.erase(k);
            }
        finalize(std::move(ft), out);
    }

    // drain the wait queue in arrival order
    {
        std::vector<Item> remaining;
        std::vector<Item> pending = std::move(queue_);
        queue_.clear();
        for (auto& it : pending)
        {
            auto keys = local_keys(it.tx);
            bool blk = false;
            for (auto const& k : keys)
                if (locks_.count(k))
                    blk = true;
            for (auto const& r : remaining)
                if (intersects(keys, local_keys(r.tx)))
                    blk = true;
            if (blk)
            {
                remaining.push_back(std::move(it));
                continue;
            }
            out.lock_waits.push_back({it.tx.id, in.round - it.ordered_round});
            run_item(it, out);
        }
        queue_ = std::move(remaining);
    }

    // (2) intra-shard transactions
    for (auto const& tx : in.itxs)
    {
        if (!seen_itx_.insert(tx.id).second)
            continue;
        Item it;
        it.tx = tx;
        it.ordered_round = in.round;
        if (blocked(local_keys(tx), queue_.size()))
        {
            out.deferred.push_back(tx.id);
            queue_.push_back(std::move(it));
            continue;
        }
        run_item(it, out);
    }

    // (3) newly ordered cross-shard transactions
    for (std::uint32_t bi = 0; bi < in.metas.size(); ++bi)
    {
        CtxMeta const& meta = in.metas[bi];
        bool const involved = meta.origin == sid_ || meta.dest == sid_;
        for (std::uint32_t ti = 0; ti < meta.txs.size(); ++ti)
        {
            CtxPos const pos{in.round, bi, ti};
            bool const dup = !seen_ctx_.insert(meta.txs[ti].id).second;
            if (!involved)
                continue;
            if (dup)
            {
                out.tx_votes.push_back({in.round, meta.batch, ti, meta.txs[ti].id, 1});
                continue;
            }
            auto body = in.ctx_bodies.find(meta.txs[ti].id);
            if (body == in.ctx_bodies.end())
                throw std::logic_error("missing cross-shard transaction body");
            Item it;
            it.is_ctx = true;
            it.tx = body->second;
            it.pos = pos;
            it.batch = meta.batch;
            it.ordered_round = in.round;
            voted_.insert(pos);
            if (blocked(local_keys(it.tx), queue_.size()))
            {
                queue_.push_back(std::move(it));
                continue;
            }
            out.lock_waits.push_back({it.tx.id, 0});
            run_item(it, out);
        }
    }

    out.entry.state_root = state_root_of(committed_);
    return out;
}

Bytes TwoPhaseLockExecutor::snapshot() const
{
    Writer w;
    w.u8(0x52);
    w.u32(sid_);
    w.u64(round_);
    put_balances(w, committed_);
    put_balances(w, overlay_);
    w.u32(static_cast<std::uint32_t>(locks_.size()));
    for (auto const& [k, t] : locks_)
    {
        encode(w, k);
        w.u64(t);
    }
    w.u32(static_cast<std::uint32_t>(held_.size()));
    for (auto const& [pos, h] : held_)
    {
        put_pos(w, pos);
        encode(w, h.tx);
        w.digest(h.batch);
        w.boolean(h.ok);
        w.u64(h.ordered_round);
    }
    w.u32(static_cast<std::uint32_t>(voted_.size()));
    for (auto const& p : voted_)
        put_pos(w, p);
    w.u32(static_cast<std::uint32_t>(queue_.size()));
    for (auto const& it : queue_)
    {
        w.boolean(it.is_ctx);
        encode(w, it.tx);
        put_pos(w, it.pos);
        w.digest(it.batch);
        w.u64(it.ordered_round);
    }
    put_ids(w, seen_itx_);
    put_ids(w, seen_ctx_);
    return w.take();
}

std::unique_ptr<TwoPhaseLockExecutor> TwoPhaseLockExecutor::restore(Bytes const& b)
{
    Reader r(b);
    if (r.u8() != 0x52)
        throw DecodeError("not a two-phase-lock executor snapshot");
    auto e = std::make_unique<TwoPhaseLockExecutor>(0, Balances{});
    e->sid_ = r.u32();
    e->round_ = r.u64();
    e->committed_ = get_balances(r);
    e->overlay_ = get_balances(r);
    std::uint32_t nl = r.count(16);
    for (std::uint32_t i = 0; i < nl; ++i)
    {
        StateKey k = decode<StateKey>(r);
        e->locks_[k] = r.u64();
    }
    std::uint32_t nh = r.count();
    for (std::uint32_t i = 0; i < nh; ++i)
    {
        Held h;
        CtxPos pos = get_pos(r);
        h.tx = decode<Transaction>(r);
        h.batch = r.digest();
        h.pos = pos;
        h.ok = r.boolean();
        h.ordered_round = r.u64();
        e->held_[pos] = std::move(h);
    }
    std::uint32_t nv = r.count(16);
    for (std::uint32_t i = 0; i < nv; ++i)
        e->voted_.insert(get_pos(r));
    std::uint32_t nq = r.count();
    for (std::uint32_t i = 0; i < nq; ++i)
    {
        Item it;
        it.is_ctx = r.boolean();
        it.tx = decode<Transaction>(r);
        it.pos = get_pos(r);
        it.batch = r.digest();
        it.ordered_round = r.u64();
        e->queue_.push_back(std::move(it));
    }
    e->seen_itx_ = get_ids(r);
    e->seen_ctx_ = get_ids(r);
    if (!r.done())
        throw DecodeError("trailing snapshot bytes");
    return e;
}

nlohmann::json TwoPhaseLockExecutor::debug_json() const
{
    nlohmann::json locks = nlohmann::json::array();
    for (auto const& [k, t] : locks_)
        locks.push_back({{"key", k}, {"holder", t}});
    nlohmann::json q = nlohmann::json::array();
    for (auto const& it : queue_)
        q.push_back(it.tx.id);
    return {{"executor", "two_phase_lock"},
            {"sid", sid_},
            {"round", round_},
            {"balances", balances_json(committed_)},
            {"locks", locks},
            {"queue", q}};
}

} // namespace coe

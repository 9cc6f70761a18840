#include "coe/ordering.hpp"

#include <algorithm>

namespace coe {

void ChainState::apply(OrderingBlock const& ob, MembershipRegistry const& reg, ExecutorKind kind)
{
    if (ob.round != round + 1)
        throw std::logic_error("ordering blocks must be applied in round order");
    round = ob.round;
    Epoch const e = reg.epoch_of(ob.round);
    for (auto const& ref : ob.eb_digests)
    {
        included.insert(ref.digest);
        if (reg.known(e) && reg.config(ref.sid, e).contains(ref.creator))
            participation[e][ref.sid].insert(ref.creator);
    }
    if (kind == ExecutorKind::lockfree)
    {
        metas[ob.round] = ob.ctx_meta;
        for (auto const& a : ob.args)
            args_upto = std::max(args_upto, a.round);
        metas.erase(metas.begin(), metas.upper_bound(args_upto));
    }
    else
    {
        for (auto const& d : ob.decisions)
            undecided.erase({d.round, d.batch, d.index});
        for (auto const& meta : ob.ctx_meta)
            for (std::uint32_t i = 0; i < meta.txs.size(); ++i)
                undecided[{ob.round, meta.batch, i}] = {meta.txs[i].id, meta.origin, meta.dest};
    }
    while (!participation.empty() && participation.begin()->first + 2 < e)
        participation.erase(participation.begin());
}

bool cb_includable(CertificateBlock const& cb, ChainState const& chain, MembershipRegistry const& reg, Round r)
{
    Epoch const e = reg.epoch_of(r);
    if (cb.sid >= reg.k() || !reg.known(cb.epoch))
        return false;
    if (cb.epoch != e && cb.epoch + 1 != e)
        return false;
    if (chain.included.count(cb.eb_digest))
        return false;
    auto const& cfg = reg.config(cb.sid, cb.epoch);
    if (!cfg.contains(cb.creator) || cb.quorum.subject != body_digest(cb))
        return false;
    if (!verify_quorum(cb.quorum, cfg, ThresholdKind::processing))
        return false;
    ShardId prev = 0;
    bool first = true;
    for (auto const& b : cb.ctx_batches)
    {
        if (b.dest == cb.sid || b.dest >= reg.k() || b.txs.empty())
            return false;
        if (!first && b.dest <= prev)
            return false;
        first = false;
        prev = b.dest;
    }
    return true;
}

bool vr_signed(VoteResult const& vr, MembershipRegistry const& reg)
{
    if (vr.sid >= reg.k() || !reg.known(vr.epoch) || vr.epoch < reg.epoch_of(vr.round))
        return false;
    if (vr.quorum.subject != body_digest(vr))
        return false;
    for (auto const& tv : vr.tx_votes)
        if (tv.bit > 1 || tv.round > vr.round)
            return false;
    for (auto const& bv : vr.votes)
        for (auto b : bv.bits)
            if (b > 1)
                return false;
    return verify_quorum(vr.quorum, reg.config(vr.sid, vr.epoch), ThresholdKind::processing);
}

bool vr_shape_ok(VoteResult const& vr, ChainState const& chain)
{
    if (!vr.tx_votes.empty())
    {
        // votes on already decided positions are harmless leftovers
        if (!vr.votes.empty())
            return false;
        for (auto const& tv : vr.tx_votes)
        {
            auto it = chain.undecided.find({tv.round, tv.batch, tv.index});
            if (it == chain.undecided.end())
                continue;
            auto const& u = it->second;
            if (u.tx != tv.tx || (u.origin != vr.sid && u.dest != vr.sid))
                return false;
        }
        return true;
    }
    auto it = chain.metas.find(vr.round);
    if (it == chain.metas.end())
        return false;
    std::size_t j = 0;
    for (auto const& meta : it->second)
    {
        if (meta.origin != vr.sid && meta.dest != vr.sid)
            continue;
        if (j >= vr.votes.size())
            return false;
        auto const& bv = vr.votes[j++];
        if (bv.batch != meta.batch || bv.bits.size() != meta.txs.size())
            return false;
    }
    return j == vr.votes.size();
}

std::set<ShardId> involved_shards(std::vector<CtxMeta> const& metas)
{
    std::set<ShardId> s;
    for (auto const& m : metas)
    {
        s.insert(m.origin);
        s.insert(m.dest);
    }
    return s;
}

Proposal compose(ChainState const& chain, MembershipRegistry const& reg, ExecutorKind kind, Round r,
                 NodeId proposer, std::vector<CertificateBlock> cbs, std::vector<VoteResult> vrs)
{
    Proposal p;
    OrderingBlock& ob = p.ob;
    ob.round = r;
    ob.proposer = proposer;

    std::sort(cbs.begin(), cbs.end(), [](CertificateBlock const& a, CertificateBlock const& b) {
        return std::tie(a.sid, a.creator, a.eb_digest) < std::tie(b.sid, b.creator, b.eb_digest);
    });
    std::set<Digest> seen;
    for (auto& cb : cbs)
    {
        if (!seen.insert(cb.eb_digest).second || !cb_includable(cb, chain, reg, r))
            continue;
        auto const& cfg = reg.config(cb.sid, cb.epoch);
        auto signers = cb.quorum.valid_signers(&cfg.members);
        ob.eb_digests.push_back({cb.sid, cb.eb_digest, cb.creator, {signers.begin(), signers.end()}});
        for (auto const& b : cb.ctx_batches)
            ob.ctx_meta.push_back({b.batch, cb.sid, b.dest, cb.eb_digest, b.txs});
        p.cbs.push_back(std::move(cb));
    }

    // one usable vote result per (shard, round)
    std::sort(vrs.begin(), vrs.end(), [](VoteResult const& a, VoteResult const& b) {
        return std::tie(a.sid, a.round, a.epoch) < std::tie(b.sid, b.round, b.epoch);
    });
    std::map<std::pair<ShardId, Round>, VoteResult const*> usable;
    for (auto const& vr : vrs)
    {
        if (vr.round > chain.round || usable.count({vr.sid, vr.round}))
            continue;
        if (!vr_signed(vr, reg) || !vr_shape_ok(vr, chain))
            continue;
        usable[{vr.sid, vr.round}] = &vr;
    }
    std::set<VoteResult const*> used;

    if (kind == ExecutorKind::lockfree)
    {
        for (Round rho = chain.args_upto + 1; rho + 2 <= r && rho <= chain.round; ++rho)
        {
            auto m = chain.metas.find(rho);
            if (m == chain.metas.end())
                break;
            auto shards = involved_shards(m->second);
            bool ready = true;
            for (ShardId s : shards)
                ready = ready && usable.count({s, rho});
            if (!ready)
                break;
            Aggregator a;
            a.round = rho;
            for (ShardId s : shards)
            {
                auto const* vr = usable.at({s, rho});
                a = aggregate_vote(std::move(a), vr->votes);
                used.insert(vr);
            }
            ob.args.push_back(std::move(a));
        }
    }
    else
    {
        std::map<TxKey, std::map<ShardId, std::uint8_t>> votes;
        std::map<TxKey, std::vector<VoteResult const*>> sources;
        for (auto const& [key, vr] : usable)
        {
            if (vr->round + 2 > r)
                continue;
            for (auto const& tv : vr->tx_votes)
            {
                TxKey k{tv.round, tv.batch, tv.index};
                if (!chain.undecided.count(k))
                    continue;
                votes[k].emplace(vr->sid, tv.bit);
                sources[k].push_back(vr);
            }
        }
        for (auto const& [k, u] : chain.undecided)
        {
            auto it = votes.find(k);
            if (it == votes.end() || !it->second.count(u.origin) || !it->second.count(u.dest))
                continue;
            bool const commit = it->second.at(u.origin) == 1 && it->second.at(u.dest) == 1;
            ob.decisions.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), u.tx, commit});
            for (auto const* vr : sources[k])
                used.insert(vr);
        }
    }
    for (auto const& vr : vrs)
        if (used.count(&vr))
            p.vrs.push_back(vr);

    if (reg.is_boundary(r))
    {
        Epoch const e = reg.epoch_of(r);
        std::map<ShardId, std::set<NodeId>> part;
        if (auto it = chain.participation.find(e); it != chain.participation.end())
            part = it->second;
        for (auto const& ref : ob.eb_digests)
            if (reg.config(ref.sid, e).contains(ref.creator))
                part[ref.sid].insert(ref.creator);
        ob.plans = reg.compute_plans(e, part);
    }
    p.digest = body_digest(ob);
    return p;
}

Digest prepare_subject(Round r, std::uint32_t view, Digest const& d)
{
    Writer w;
    w.u8(0xD1);
    w.u64(r);
    w.u32(view);
    w.digest(d);
    return sha256(w.data());
}

Digest viewchange_subject(Round r, std::uint32_t view)
{
    Writer w;
    w.u8(0xD2);
    w.u64(r);
    w.u32(view);
    return sha256(w.data());
}

} // namespace coe

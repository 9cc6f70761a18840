#include "coe/ordering.hpp"

#include <algorithm>

namespace coe {

namespace {

bool prepare_cert_ok(QuorumAttestation const& cert, Round r, std::uint32_t view, Digest const& d,
                     ShardConfig const& ordering)
{
    return cert.subject == prepare_subject(r, view, d) && verify_quorum(cert, ordering, ThresholdKind::ordering);
}

} // namespace

OrderingReplica::OrderingReplica(NodeContext& ctx) : ctx_(ctx)
{
}

NodeId OrderingReplica::leader(Round r, std::uint32_t view) const
{
    auto const& m = ctx_.registry().ordering().members;
    return m[(r + view) % m.size()];
}

void OrderingReplica::start()
{
    enter_round();
}

void OrderingReplica::enter_round()
{
    view_ = 0;
    prepared_in_view_.clear();
    bodies_.clear();
    prepares_.clear();
    prepared_sent_.clear();
    proposed_.clear();
    committed_views_.clear();
    commits_.clear();
    viewchanges_.clear();
    vc_locks_.clear();
    done_ = false;
    lock_.reset();
    arm_view_timer();
    if (leader(cur(), 0) == ctx_.id())
    {
        TimerTag t;
        t.kind = TimerKind::propose;
        t.a = cur();
        ctx_.set_timer(ctx_.params().block_interval, t);
    }
    future_.erase(future_.begin(), future_.lower_bound(cur()));
    if (auto it = future_.find(cur()); it != future_.end())
    {
        auto msgs = std::move(it->second);
        future_.erase(it);
        for (auto const& m : msgs)
        {
            on_message(m);
            if (done_)
                return;
        }
    }
}

void OrderingReplica::arm_view_timer()
{
    TimerTag t;
    t.kind = TimerKind::view_timeout;
    t.a = cur();
    t.b = view_;
    ctx_.set_timer(ctx_.params().view_timeout * (view_ + 1), t);
}

void OrderingReplica::on_timer(TimerTag const& t)
{
    if (t.a != cur() || done_)
        return;
    if (t.kind == TimerKind::propose)
    {
        if (view_ == 0 && !proposed_.count(0))
            propose_fresh();
        return;
    }
    if (t.kind != TimerKind::view_timeout || t.b != view_)
        return;
    ++view_;
    auto a = attest(ctx_, viewchange_subject(cur(), view_));
    if (a)
    {
        Message m;
        m.type = MsgType::viewchange;
        m.from = ctx_.id();
        m.round = cur();
        m.view = view_;
        m.att = *a;
        if (lock_)
        {
            m.lock_view = lock_->view;
            m.proposal = lock_->proposal;
            m.cert = lock_->cert;
        }
        ctx_.send(leader(cur(), view_), seal(std::move(m)));
    }
    arm_view_timer();
    ctx_.request_ob_sync();
}

void OrderingReplica::on_finalized(OrderingBlock const& ob)
{
    chain_.apply(ob, ctx_.registry(), ctx_.params().executor);
    prune();
    enter_round();
}

void OrderingReplica::prune()
{
    auto const& reg = ctx_.registry();
    Epoch const e = reg.epoch_of(cur());
    std::erase_if(cb_pool_, [&](auto const& kv) {
        return chain_.included.count(kv.first) || kv.second.epoch + 1 < e;
    });
    if (ctx_.params().executor == ExecutorKind::lockfree)
    {
        std::erase_if(vr_pool_, [&](auto const& kv) { return kv.second.round <= chain_.args_upto; });
    }
    else
    {
        std::erase_if(vr_pool_, [&](auto const& kv) {
            for (auto const& tv : kv.second.tx_votes)
                if (chain_.undecided.count({tv.round, tv.batch, tv.index}))
                    return false;
            return true;
        });
    }
    for (auto it = vote_sync_sent_.begin(); it != vote_sync_sent_.end();)
        it = it->first.second <= chain_.args_upto ? vote_sync_sent_.erase(it) : std::next(it);
}

// ---- intake -------------------------------------------------------------------

void OrderingReplica::on_cert_block(Message const& m)
{
    if (!m.cb)
        return;
    auto const& cb = *m.cb;
    auto const& reg = ctx_.registry();
    if (chain_.included.count(cb.eb_digest) || cb_pool_.count(cb.eb_digest))
        return;
    Epoch const e = reg.epoch_of(cur());
    if (cb.epoch + 1 < e)
        return;
    bool ok = cb.sid < reg.k() && reg.known(cb.epoch) && cb.quorum.subject == body_digest(cb);
    if (ok)
    {
        auto const& cfg = reg.config(cb.sid, cb.epoch);
        ok = cfg.contains(cb.creator) && verify_quorum(cb.quorum, cfg, ThresholdKind::processing);
    }
    if (!ok)
    {
        ++rejected_;
        return;
    }
    cb_pool_.emplace(cb.eb_digest, cb);
}

void OrderingReplica::on_vote_result(Message const& m)
{
    if (!m.vr)
        return;
    auto const& vr = *m.vr;
    if (ctx_.params().executor == ExecutorKind::lockfree && vr.round <= chain_.args_upto)
        return;
    std::tuple<ShardId, Round, Epoch> key{vr.sid, vr.round, vr.epoch};
    if (vr_pool_.count(key))
        return;
    if (!vr_signed(vr, ctx_.registry()))
    {
        ++rejected_;
        return;
    }
    vr_pool_.emplace(key, vr);
}

void OrderingReplica::request_votes(Round rho)
{
    auto m = chain_.metas.find(rho);
    if (m == chain_.metas.end())
        return;
    auto const& reg = ctx_.registry();
    Tick const now = ctx_.now();
    for (ShardId s : involved_shards(m->second))
    {
        bool have = false;
        for (auto const& [key, vr] : vr_pool_)
            have = have || (std::get<0>(key) == s && std::get<1>(key) == rho);
        if (have)
            continue;
        auto& last = vote_sync_sent_[{s, rho}];
        if (last != 0 && now - last < ctx_.params().vote_retry)
            continue;
        last = now;
        Message req;
        req.type = MsgType::vote_sync_req;
        req.from = ctx_.id();
        req.sid = s;
        req.round = rho;
        auto msg = seal(std::move(req));
        std::set<NodeId> to;
        for (Epoch e : {reg.epoch_of(rho), reg.latest()})
            for (NodeId id : reg.config(s, e).members)
                to.insert(id);
        for (NodeId id : to)
            ctx_.send(id, msg);
    }
}

// ---- consensus ------------------------------------------------------------------

bool OrderingReplica::proposal_valid(Proposal const& p) const
{
    if (p.ob.round != cur() || p.digest != body_digest(p.ob))
        return false;
    if (!ctx_.registry().ordering().contains(p.ob.proposer))
        return false;
    Proposal again;
    try
    {
        again = compose(chain_, ctx_.registry(), ctx_.params().executor, cur(), p.ob.proposer, p.cbs, p.vrs);
    }
    catch (std::exception const&)
    {
        return false;
    }
    return again.digest == p.digest;
}

void OrderingReplica::propose_fresh()
{
    std::vector<CertificateBlock> cbs;
    for (auto const& [d, cb] : cb_pool_)
        cbs.push_back(cb);
    std::vector<VoteResult> vrs;
    for (auto const& [k, vr] : vr_pool_)
        vrs.push_back(vr);
    auto const kind = ctx_.params().executor;
    auto p = std::make_shared<Proposal>(compose(chain_, ctx_.registry(), kind, cur(), ctx_.id(), cbs, vrs));

    if (kind == ExecutorKind::lockfree && chain_.args_upto + 3 <= cur())
        request_votes(chain_.args_upto + 1);

    if (ctx_.behavior() == Behavior::equivocate_proposals && (!p->cbs.empty() || !p->vrs.empty()))
    {
        auto alt_cbs = p->cbs;
        auto alt_vrs = p->vrs;
        if (!alt_cbs.empty())
            alt_cbs.pop_back();
        else
            alt_vrs.pop_back();
        auto q = std::make_shared<Proposal>(compose(chain_, ctx_.registry(), kind, cur(), ctx_.id(), alt_cbs, alt_vrs));
        if (q->digest != p->digest)
        {
            proposed_.insert(view_);
            auto const& members = ctx_.registry().ordering().members;
            for (std::size_t i = 0; i < members.size(); ++i)
            {
                Message m;
                m.type = MsgType::propose;
                m.from = ctx_.id();
                m.round = cur();
                m.view = view_;
                m.proposal = i % 2 == 0 ? p : q;
                ctx_.send(members[i], seal(std::move(m)));
            }
            return;
        }
    }
    send_proposal(p, nullptr);
}

void OrderingReplica::send_proposal(ProposalPtr p, std::shared_ptr<QuorumAttestation const> vc_cert)
{
    proposed_.insert(view_);
    Message m;
    m.type = MsgType::propose;
    m.from = ctx_.id();
    m.round = cur();
    m.view = view_;
    m.proposal = std::move(p);
    m.cert = std::move(vc_cert);
    auto msg = seal(std::move(m));
    for (NodeId id : ctx_.registry().ordering().members)
        ctx_.send(id, msg);
}

void OrderingReplica::on_message(Message const& m)
{
    switch (m.type)
    {
    case MsgType::cert_block: on_cert_block(m); return;
    case MsgType::vote_result: on_vote_result(m); return;
    case MsgType::propose:
    case MsgType::prepare:
    case MsgType::prepared:
    case MsgType::ocommit:
    case MsgType::viewchange: break;
    default: return;
    }
    if (m.round < cur())
    {
        if (m.type == MsgType::propose || m.type == MsgType::viewchange)
            send_finalized(m.from, m.round);
        return;
    }
    if (m.round > cur())
    {
        auto& buf = future_[m.round];
        if (buf.size() < 512)
            buf.push_back(m);
        ctx_.request_ob_sync();
        return;
    }
    if (done_)
        return;
    switch (m.type)
    {
    case MsgType::propose: on_propose(m); break;
    case MsgType::prepare: on_prepare(m); break;
    case MsgType::prepared: on_prepared(m); break;
    case MsgType::ocommit: on_ocommit(m); break;
    case MsgType::viewchange: on_viewchange(m); break;
    default: break;
    }
}

void OrderingReplica::send_finalized(NodeId to, Round r)
{
    auto ob = ctx_.ob(r);
    if (!ob)
        return;
    Message f;
    f.type = MsgType::finalized;
    f.from = ctx_.id();
    f.round = r;
    f.obs.push_back(ob);
    ctx_.send(to, seal(std::move(f)));
}

void OrderingReplica::on_propose(Message const& m)
{
    if (!m.proposal || leader(cur(), m.view) != m.from)
        return;
    auto const& ordering = ctx_.registry().ordering();
    std::uint32_t const v = m.view;
    if (v < view_)
        return;
    if (v > view_)
    {
        if (!m.cert || m.cert->subject != viewchange_subject(cur(), v) ||
            !verify_quorum(*m.cert, ordering, ThresholdKind::ordering))
            return;
        view_ = v;
        arm_view_timer();
    }
    bool const byz = ctx_.behavior() == Behavior::equivocate_proposals;
    if (prepared_in_view_.count(v) && !byz)
        return;
    Proposal const& p = *m.proposal;
    if (!proposal_valid(p))
        return;
    if (lock_ && lock_->proposal->digest != p.digest && !byz)
    {
        if (!p.justify || p.justify_view < lock_->view ||
            !prepare_cert_ok(*p.justify, cur(), p.justify_view, p.digest, ordering))
            return;
    }
    bodies_.emplace(p.digest, m.proposal);
    prepared_in_view_.emplace(v, p.digest);
    auto a = attest(ctx_, prepare_subject(cur(), v, p.digest));
    if (!a)
        return;
    Message r;
    r.type = MsgType::prepare;
    r.from = ctx_.id();
    r.round = cur();
    r.view = v;
    r.digest = p.digest;
    r.att = *a;
    ctx_.send(m.from, seal(std::move(r)));
}

void OrderingReplica::on_prepare(Message const& m)
{
    if (leader(cur(), m.view) != ctx_.id() || m.att.signer != m.from)
        return;
    Digest const subject = prepare_subject(cur(), m.view, m.digest);
    if (m.att.subject != subject || prepared_sent_.count(subject))
        return;
    auto body = bodies_.find(m.digest);
    auto& q = prepares_[subject];
    q.subject = subject;
    q.add(m.att);
    auto const& ordering = ctx_.registry().ordering();
    if (body == bodies_.end() || !verify_quorum(q, ordering, ThresholdKind::ordering))
        return;
    prepared_sent_.insert(subject);
    Message r;
    r.type = MsgType::prepared;
    r.from = ctx_.id();
    r.round = cur();
    r.view = m.view;
    r.digest = m.digest;
    r.proposal = body->second;
    r.cert = std::make_shared<QuorumAttestation const>(q);
    auto msg = seal(std::move(r));
    for (NodeId id : ordering.members)
        ctx_.send(id, msg);
}

void OrderingReplica::on_prepared(Message const& m)
{
    if (!m.proposal || !m.cert || m.proposal->digest != m.digest || body_digest(m.proposal->ob) != m.digest)
        return;
    if (m.proposal->ob.round != cur())
        return;
    auto const& ordering = ctx_.registry().ordering();
    if (!prepare_cert_ok(*m.cert, cur(), m.view, m.digest, ordering))
        return;
    bodies_.emplace(m.digest, m.proposal);
    if (!lock_ || lock_->view <= m.view)
        lock_ = Lock{m.view, m.proposal, m.cert};
    if (m.view < view_ && ctx_.behavior() != Behavior::equivocate_proposals)
        return;
    if (m.view > view_)
    {
        view_ = m.view;
        arm_view_timer();
    }
    if (!committed_views_.insert(m.view).second)
        return;
    auto a = attest(ctx_, m.digest);
    if (!a)
        return;
    Message c;
    c.type = MsgType::ocommit;
    c.from = ctx_.id();
    c.round = cur();
    c.view = m.view;
    c.digest = m.digest;
    c.att = *a;
    auto msg = seal(std::move(c));
    for (NodeId id : ordering.members)
        ctx_.send(id, msg);
}

void OrderingReplica::on_ocommit(Message const& m)
{
    if (m.att.signer != m.from || m.att.subject != m.digest)
        return;
    auto& q = commits_[{m.view, m.digest}];
    q.subject = m.digest;
    q.add(m.att);
    try_finalize(m.view, m.digest);
}

void OrderingReplica::try_finalize(std::uint32_t view, Digest const& d)
{
    if (done_)
        return;
    auto const& q = commits_[{view, d}];
    if (!verify_quorum(q, ctx_.registry().ordering(), ThresholdKind::ordering))
        return;
    auto body = bodies_.find(d);
    if (body == bodies_.end())
    {
        ctx_.request_ob_sync();
        return;
    }
    done_ = true;
    OrderingBlock ob = body->second->ob;
    ob.quorum = q;
    ctx_.finalize_ob(std::move(ob));
}

void OrderingReplica::on_viewchange(Message const& m)
{
    if (leader(cur(), m.view) != ctx_.id() || m.att.signer != m.from)
        return;
    if (m.att.subject != viewchange_subject(cur(), m.view) || proposed_.count(m.view))
        return;
    auto const& ordering = ctx_.registry().ordering();
    if (m.proposal && m.cert && m.proposal->ob.round == cur() &&
        prepare_cert_ok(*m.cert, cur(), m.lock_view, m.proposal->digest, ordering))
    {
        auto it = vc_locks_.find(m.view);
        if (it == vc_locks_.end() || it->second.view < m.lock_view)
            vc_locks_[m.view] = Lock{m.lock_view, m.proposal, m.cert};
    }
    auto& q = viewchanges_[m.view];
    q.subject = m.att.subject;
    q.add(m.att);
    if (verify_quorum(q, ordering, ThresholdKind::ordering))
        become_leader(m.view);
}

void OrderingReplica::become_leader(std::uint32_t v)
{
    if (v < view_)
        return;
    if (v > view_)
    {
        view_ = v;
        arm_view_timer();
    }
    auto cert = std::make_shared<QuorumAttestation const>(viewchanges_.at(v));
    if (auto it = vc_locks_.find(v); it != vc_locks_.end())
    {
        auto p = std::make_shared<Proposal>(*it->second.proposal);
        p->justify_view = it->second.view;
        p->justify = it->second.cert;
        bodies_.emplace(p->digest, p);
        send_proposal(p, cert);
        return;
    }
    std::vector<CertificateBlock> cbs;
    for (auto const& [d, cb] : cb_pool_)
        cbs.push_back(cb);
    std::vector<VoteResult> vrs;
    for (auto const& [k, vr] : vr_pool_)
        vrs.push_back(vr);
    auto p = std::make_shared<Proposal>(
        compose(chain_, ctx_.registry(), ctx_.params().executor, cur(), ctx_.id(), cbs, vrs));
    send_proposal(p, cert);
}

} // namespace coe

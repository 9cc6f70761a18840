#include "coe/processing.hpp"

#include <algorithm>

namespace coe {

std::vector<CtxBatchRef> make_batches(ExecutionBlock const& eb, Digest const& eb_digest)
{
    std::map<ShardId, std::vector<Transaction>> by_dest;
    for (auto const& tx : eb.ctxs)
        for (ShardId s : tx.shards())
            if (s != eb.sid)
                by_dest[s].push_back(tx);
    std::vector<CtxBatchRef> out;
    for (auto const& [dest, txs] : by_dest)
    {
        CtxBatchRef ref;
        ref.dest = dest;
        ref.batch = batch_digest(eb_digest, eb.sid, dest, txs);
        for (auto const& tx : txs)
            ref.txs.push_back({tx.id, tx.keys()});
        out.push_back(std::move(ref));
    }
    return out;
}

bool ledger_verifiable(LedgerEntry const& entry, Digest const& exec_digest, ShardId sid,
                       QuorumAttestation const& commits, ShardConfig const& cfg)
{
    if (commits.subject != commit_subject(entry.state_root, exec_digest, entry.round, sid))
        return false;
    return verify_quorum(commits, cfg, ThresholdKind::processing);
}

ProcessingReplica::ProcessingReplica(NodeContext& ctx, ShardId sid, Balances genesis)
    : ctx_(ctx), sid_(sid), exec_(Executor::make(ctx.params().executor, sid, std::move(genesis)))
{
}

ProcessingReplica::ProcessingReplica(NodeContext& ctx, ShardId sid, Round from)
    : ctx_(ctx), sid_(sid), applied_(from), join_round_(from)
{
}

ShardConfig const* ProcessingReplica::config(Epoch e) const
{
    auto const& reg = ctx_.registry();
    if (!reg.known(e))
        return nullptr;
    return &reg.config(sid_, e);
}

bool ProcessingReplica::member(Epoch e) const
{
    auto const* c = config(e);
    return c && c->contains(ctx_.id());
}

Epoch ProcessingReplica::working_epoch() const
{
    return ctx_.registry().epoch_of(applied_ + 1);
}

void ProcessingReplica::broadcast(ShardConfig const& cfg, MsgPtr const& m, bool include_self)
{
    for (NodeId id : cfg.members)
        if (include_self || id != ctx_.id())
            ctx_.send(id, m);
}

void ProcessingReplica::to_ordering(MsgPtr const& m)
{
    for (NodeId id : ctx_.registry().ordering().members)
        ctx_.send(id, m);
}

void ProcessingReplica::arm(Tick delay, TimerTag t)
{
    t.sid = sid_;
    t.b = gen_;
    ctx_.set_timer(delay, t);
}

void ProcessingReplica::start()
{
    if (started_)
        return;
    started_ = true;
    TimerTag t;
    t.kind = TimerKind::vote_retry;
    t.sid = sid_;
    arm(ctx_.params().vote_retry, t);
    if (exec_)
    {
        try_apply();
        maybe_create_eb();
        return;
    }
    // a flagged shard cannot certify its boundary state: rebuild from the chain directly
    if (ctx_.registry().recovered_after(ctx_.registry().epoch_of(join_round_), sid_))
    {
        fallback_replay();
        return;
    }
    // joiner: ask the outgoing configuration for a certified snapshot
    auto const* old = config(ctx_.registry().epoch_of(join_round_));
    Message m;
    m.type = MsgType::snap_req;
    m.from = ctx_.id();
    m.sid = sid_;
    m.round = join_round_;
    auto msg = seal(std::move(m));
    if (old)
        broadcast(*old, msg);
    TimerTag w;
    w.kind = TimerKind::snapshot_wait;
    w.sid = sid_;
    arm(ctx_.params().snapshot_timeout, w);
}

void ProcessingReplica::retire_after(Round r)
{
    retire_after_ = r;
    if (applied_ >= r)
        do_retire();
}

void ProcessingReplica::on_message(Message const& m)
{
    switch (m.type)
    {
    case MsgType::certify: on_certify(m); break;
    case MsgType::certified: on_certified(m); break;
    case MsgType::cvote: on_cvote(m); break;
    case MsgType::commit: on_commit(m); break;
    case MsgType::eb_resp: on_eb_resp(m); break;
    case MsgType::snap_req: on_snap_req(m); break;
    case MsgType::snap_resp: on_snap_resp(m); break;
    case MsgType::vote_sync_req:
        if (auto it = my_votes_.find(m.round); it != my_votes_.end() && it->second.formed)
        {
            auto const& vs = it->second;
            VoteResult vr = vs.body;
            vr.quorum = cvotes_[m.round][vs.subject];
            Message r;
            r.type = MsgType::vote_result;
            r.from = ctx_.id();
            r.sid = sid_;
            r.round = m.round;
            r.vr = std::make_shared<VoteResult const>(std::move(vr));
            ctx_.send(m.from, seal(std::move(r)));
        }
        break;
    case MsgType::client_tx:
    case MsgType::forward_txs: submit(m.txs); break;
    default: break;
    }
}

void ProcessingReplica::on_timer(TimerTag const& t)
{
    if (t.b != gen_)
        return;
    switch (t.kind)
    {
    case TimerKind::certify_retry:
        if (inflight_ && inflight_->eb->seq == t.a)
        {
            resend_certify();
            arm(ctx_.params().certify_retry, t);
        }
        break;
    case TimerKind::eb_retrieve:
        if (auto it = retrievals_.find(t.d); it != retrievals_.end() && it->second.attempt == t.a)
            request_eb(t.d);
        break;
    case TimerKind::snapshot_wait:
        if (!exec_)
            fallback_replay();
        break;
    case TimerKind::vote_retry:
        maintenance();
        arm(ctx_.params().vote_retry, t);
        break;
    default: break;
    }
}

// ---- mempool and block creation -------------------------------------------

void ProcessingReplica::submit(std::vector<Transaction> const& txs)
{
    if (retired())
    {
        // hand over to the configuration that replaced us
        auto const* next = config(ctx_.registry().epoch_of(*retire_after_ + 1));
        if (!next)
            return;
        std::vector<Transaction> fwd;
        for (auto const& tx : txs)
            if (!finalized_ids_.count(tx.id))
                fwd.push_back(tx);
        if (fwd.empty())
            return;
        Message m;
        m.type = MsgType::forward_txs;
        m.from = ctx_.id();
        m.sid = sid_;
        m.txs = std::move(fwd);
        auto msg = seal(std::move(m));
        std::size_t want = static_cast<std::size_t>(next->f_L * static_cast<double>(next->size())) + 1;
        std::size_t sent = 0;
        for (std::size_t i = 0; i < next->size() && sent < want; ++i)
        {
            NodeId id = next->members[(ctx_.id() + i) % next->size()];
            if (id == ctx_.id())
                continue;
            ctx_.send(id, msg);
            ++sent;
        }
        return;
    }
    for (auto const& tx : txs)
    {
        if (!tx.well_formed() || tx.sub_ops.front().shard != sid_)
            continue;
        if (finalized_ids_.count(tx.id) || mempool_ids_.count(tx.id))
            continue;
        mempool_ids_.insert(tx.id);
        mempool_.push_back(tx);
    }
}

void ProcessingReplica::remove_from_mempool(std::set<TxId> const& ids)
{
    if (ids.empty() || mempool_.empty())
        return;
    std::erase_if(mempool_, [&](Transaction const& t) { return ids.count(t.id) != 0; });
    for (TxId id : ids)
        mempool_ids_.erase(id);
}

void ProcessingReplica::maybe_create_eb()
{
    if (!exec_ || inflight_ || ctx_.behavior() == Behavior::silent)
        return;
    if (retire_after_ && applied_ >= *retire_after_)
        return;
    Epoch const e = working_epoch();
    auto const* cfg = config(e);
    if (!cfg || !cfg->contains(ctx_.id()))
        return;
    auto const& params = ctx_.params();
    bool const designated = params.creators.empty() || params.creators.count(ctx_.id());
    if ((mempool_.empty() || !designated) && applied_ % params.heartbeat_rounds != 0)
        return;

    auto eb = std::make_shared<ExecutionBlock>();
    eb->sid = sid_;
    eb->creator = ctx_.id();
    eb->seq = ++eb_seq_;
    std::size_t take = 0;
    for (auto const& tx : mempool_)
    {
        if (take == params.block_capacity || !designated)
            break;
        ++take;
        if (finalized_ids_.count(tx.id))
            continue;
        (tx.is_cross() ? eb->ctxs : eb->itxs).push_back(tx);
    }
    for (std::size_t i = 0; i < take; ++i)
        mempool_ids_.erase(mempool_[i].id);
    mempool_.erase(mempool_.begin(), mempool_.begin() + static_cast<std::ptrdiff_t>(take));

    Digest const d = canonical_digest(*eb);
    auto cb = std::make_shared<CertificateBlock>();
    cb->eb_digest = d;
    cb->ctx_batches = make_batches(*eb, d);
    cb->sid = sid_;
    cb->creator = ctx_.id();
    cb->epoch = e;
    cb->quorum.subject = body_digest(*cb);
    ctx_.store_eb(d, eb);

    inflight_ = Inflight{eb, cb, e};
    if (auto a = attest(ctx_, cb->quorum.subject))
        cb->quorum.add(*a);

    Message m;
    m.type = MsgType::certify;
    m.from = ctx_.id();
    m.sid = sid_;
    m.epoch = e;
    m.eb = eb;
    m.cb = cb;
    broadcast(*cfg, seal(std::move(m)));

    TimerTag t;
    t.kind = TimerKind::certify_retry;
    t.sid = sid_;
    t.a = eb->seq;
    arm(params.certify_retry, t);
    check_certified();
}

void ProcessingReplica::resend_certify()
{
    if (!inflight_)
        return;
    // still uncertified after the epoch moved on: rebuild it against the new configuration
    if (inflight_->epoch < working_epoch() || (retire_after_ && applied_ >= *retire_after_))
    {
        abandon_inflight();
        maybe_create_eb();
        return;
    }
    auto const* cfg = config(inflight_->epoch);
    if (!cfg)
        return;
    auto have = inflight_->cb->quorum.valid_signers(&cfg->members);
    Message m;
    m.type = MsgType::certify;
    m.from = ctx_.id();
    m.sid = sid_;
    m.epoch = inflight_->epoch;
    m.eb = inflight_->eb;
    auto body = std::make_shared<CertificateBlock>(*inflight_->cb);
    body->quorum.sigs.clear();
    m.cb = body;
    auto msg = seal(std::move(m));
    for (NodeId id : cfg->members)
        if (id != ctx_.id() && !have.count(id))
            ctx_.send(id, msg);
}

void ProcessingReplica::abandon_inflight()
{
    if (!inflight_)
        return;
    std::vector<Transaction> txs = inflight_->eb->itxs;
    txs.insert(txs.end(), inflight_->eb->ctxs.begin(), inflight_->eb->ctxs.end());
    inflight_.reset();
    submit(txs);
}

void ProcessingReplica::on_certify(Message const& m)
{
    if (!m.eb || !m.cb || m.cb->sid != sid_ || m.eb->sid != sid_ || m.eb->creator != m.from ||
        m.cb->creator != m.from)
        return;
    auto const* cfg = config(m.cb->epoch);
    if (!cfg || !cfg->contains(ctx_.id()) || !cfg->contains(m.from))
        return;
    if (!m.eb->well_formed())
        return;
    Digest const d = canonical_digest(*m.eb);
    if (d != m.cb->eb_digest || make_batches(*m.eb, d) != m.cb->ctx_batches)
        return;
    ctx_.store_eb(d, m.eb);
    CertificateBlock body = *m.cb;
    body.quorum = {};
    auto a = attest(ctx_, body_digest(body));
    if (!a)
        return;
    Message r;
    r.type = MsgType::certified;
    r.from = ctx_.id();
    r.sid = sid_;
    r.digest = d;
    r.att = *a;
    ctx_.send(m.from, seal(std::move(r)));
}

void ProcessingReplica::on_certified(Message const& m)
{
    if (!inflight_ || m.att.subject != inflight_->cb->quorum.subject || m.att.signer != m.from)
        return;
    auto const* cfg = config(inflight_->epoch);
    if (!cfg || !cfg->contains(m.from))
        return;
    inflight_->cb->quorum.add(m.att);
    check_certified();
}

void ProcessingReplica::check_certified()
{
    if (!inflight_)
        return;
    auto const* cfg = config(inflight_->epoch);
    if (!cfg || !verify_quorum(inflight_->cb->quorum, *cfg, ThresholdKind::processing))
        return;
    auto cb = std::shared_ptr<CertificateBlock const>(inflight_->cb);
    std::vector<Transaction> txs = inflight_->eb->itxs;
    txs.insert(txs.end(), inflight_->eb->ctxs.begin(), inflight_->eb->ctxs.end());
    std::size_t const count = txs.size();
    unordered_[cb->eb_digest] = Unordered{cb, ctx_.now(), std::move(txs)};
    inflight_.reset();

    Message m;
    m.type = MsgType::cert_block;
    m.from = ctx_.id();
    m.sid = sid_;
    m.cb = cb;
    to_ordering(seal(std::move(m)));
    ctx_.observer().on_cb_quorum(ctx_.id(), *cb, count, ctx_.now());
}

// ---- retrieval --------------------------------------------------------------

bool ProcessingReplica::need_eb(EbRef const& ref)
{
    if (ctx_.eb(ref.digest))
        return false;
    if (!retrievals_.count(ref.digest))
    {
        Retrieval r;
        r.holders = ref.signers;
        if (std::find(r.holders.begin(), r.holders.end(), ref.creator) == r.holders.end())
            r.holders.push_back(ref.creator);
        std::erase(r.holders, ctx_.id());
        if (r.holders.empty())
            return true;
        r.next = ctx_.id() % r.holders.size();
        retrievals_[ref.digest] = std::move(r);
        request_eb(ref.digest);
    }
    return true;
}

void ProcessingReplica::request_eb(Digest const& d)
{
    auto& r = retrievals_.at(d);
    NodeId to = r.holders[r.next % r.holders.size()];
    r.next++;
    r.attempt++;
    Message m;
    m.type = MsgType::eb_req;
    m.from = ctx_.id();
    m.sid = sid_;
    m.digest = d;
    ctx_.send(to, seal(std::move(m)));
    TimerTag t;
    t.kind = TimerKind::eb_retrieve;
    t.sid = sid_;
    t.a = r.attempt;
    t.d = d;
    arm(ctx_.params().eb_retrieve_timeout, t);
}

void ProcessingReplica::on_eb_resp(Message const& m)
{
    auto it = retrievals_.find(m.digest);
    if (it == retrievals_.end())
        return;
    if (!m.eb || canonical_digest(*m.eb) != m.digest)
    {
        request_eb(m.digest);
        return;
    }
    ctx_.store_eb(m.digest, m.eb);
    retrievals_.erase(it);
    try_apply();
}

// ---- execution ----------------------------------------------------------------

void ProcessingReplica::try_apply()
{
    while (exec_)
    {
        Round const r = applied_ + 1;
        if (retire_after_ && r > *retire_after_)
            return;
        ObPtr ob = ctx_.ob(r);
        if (!ob)
            return;
        std::map<Digest, EbRef const*> refs;
        for (auto const& ref : ob->eb_digests)
            refs[ref.digest] = &ref;
        bool missing = false;
        for (auto const& ref : ob->eb_digests)
            if (ref.sid == sid_)
                missing |= need_eb(ref);
        for (auto const& meta : ob->ctx_meta)
            if (meta.dest == sid_)
                if (auto it = refs.find(meta.eb_digest); it != refs.end())
                    missing |= need_eb(*it->second);
        if (missing)
            return;

        RoundInput in;
        in.round = r;
        for (auto const& arg : ob->args)
        {
            ObPtr src = ctx_.ob(arg.round);
            if (!src)
                return;
            in.args.push_back({arg, src->ctx_meta});
        }
        in.decisions = ob->decisions;
        for (auto const& ref : ob->eb_digests)
            if (ref.sid == sid_)
            {
                auto eb = ctx_.eb(ref.digest);
                in.itxs.insert(in.itxs.end(), eb->itxs.begin(), eb->itxs.end());
            }
        in.metas = ob->ctx_meta;
        for (auto const& meta : ob->ctx_meta)
        {
            if (meta.origin != sid_ && meta.dest != sid_)
                continue;
            auto eb = ctx_.eb(meta.eb_digest);
            if (!eb)
                return;
            std::set<TxId> ids;
            for (auto const& t : meta.txs)
                ids.insert(t.id);
            for (auto const& tx : eb->ctxs)
                if (ids.count(tx.id))
                    in.ctx_bodies.emplace(tx.id, tx);
        }
        RoundOutput out = exec_->apply(in);
        after_apply(r, *ob, in, out);
    }
}

void ProcessingReplica::after_apply(Round r, OrderingBlock const& ob, RoundInput const& in, RoundOutput const& out)
{
    applied_ = r;
    ledger_[r] = out.entry;

    std::set<TxId> done;
    for (auto const& ft : out.entry.finalized)
    {
        finalized_ids_.insert(ft.id);
        done.insert(ft.id);
    }
    for (auto const& tx : in.itxs)
        done.insert(tx.id);
    for (auto const& meta : in.metas)
        for (auto const& t : meta.txs)
            done.insert(t.id);
    remove_from_mempool(done);
    for (auto const& ref : ob.eb_digests)
        unordered_.erase(ref.digest);

    ApplyRecord rec{ctx_.id(), sid_, r, ctx_.now(), &in, &out};
    ctx_.observer().on_applied(rec);

    // settle our outstanding votes
    for (auto const& arg : ob.args)
    {
        my_votes_.erase(arg.round);
        cvotes_.erase(arg.round);
    }
    if (!ob.decisions.empty())
    {
        for (auto it = my_votes_.begin(); it != my_votes_.end();)
        {
            for (auto const& d : ob.decisions)
                it->second.open.erase({d.round, d.batch, d.index});
            if (it->second.body.votes.empty() && it->second.open.empty())
            {
                cvotes_.erase(it->first);
                it = my_votes_.erase(it);
            }
            else
                ++it;
        }
    }

    if (!out.votes.empty() || !out.tx_votes.empty())
    {
        VoteResult body;
        body.round = r;
        body.sid = sid_;
        body.epoch = ctx_.registry().epoch_of(r);
        body.votes = out.votes;
        body.tx_votes = out.tx_votes;
        start_vote(std::move(body));
    }

    auto const& reg = ctx_.registry();
    bool const boundary = reg.is_boundary(r);
    Digest const exec = boundary ? exec_->exec_digest() : Digest{};
    Digest const subject = commit_subject(out.entry.state_root, exec, r, sid_);
    my_commit_[r] = subject;
    if (boundary)
    {
        SnapshotData s;
        s.sid = sid_;
        s.round = r;
        s.exec = exec_->snapshot();
        s.state_root = out.entry.state_root;
        for (auto const& [vr, vs] : my_votes_)
            s.pending_votes.push_back(vs.body);
        snapshots_[r] = std::move(s);
    }
    auto const* cfg = config(reg.epoch_of(r));
    if (cfg && cfg->contains(ctx_.id()))
    {
        if (auto a = attest(ctx_, subject))
        {
            commits_[r][subject].add(*a);
            Message m;
            m.type = MsgType::commit;
            m.from = ctx_.id();
            m.sid = sid_;
            m.round = r;
            m.att = *a;
            broadcast(*cfg, seal(std::move(m)));
        }
    }
    check_commit(r);

    // bounded memory for non-boundary rounds
    Round const keep = 3 * reg.params().epoch_length;
    while (!commits_.empty() && commits_.begin()->first + keep < r)
    {
        commits_.erase(commits_.begin());
    }
    while (!my_commit_.empty() && my_commit_.begin()->first + keep < r)
        my_commit_.erase(my_commit_.begin());
    while (!snapshots_.empty() && snapshots_.begin()->first + keep < r)
        snapshots_.erase(snapshots_.begin());

    if (retire_after_ && r == *retire_after_)
        do_retire();
    maybe_create_eb();
}

void ProcessingReplica::start_vote(VoteResult body)
{
    Round const r = body.round;
    VoteState vs;
    vs.body = std::move(body);
    vs.subject = body_digest(vs.body);
    vs.last = ctx_.now();
    for (auto const& tv : vs.body.tx_votes)
        vs.open.insert({tv.round, tv.batch, tv.index});
    auto& slot = my_votes_[r] = std::move(vs);
    sign_vote(slot);
    check_vote(r);
}

void ProcessingReplica::sign_vote(VoteState& vs)
{
    auto const* cfg = config(vs.body.epoch);
    if (!cfg || !cfg->contains(ctx_.id()))
        return;
    auto body = std::make_shared<VoteResult>(vs.body);
    Digest subject = vs.subject;
    if (ctx_.behavior() == Behavior::false_votes)
    {
        for (auto& bv : body->votes)
            for (auto& b : bv.bits)
                b = static_cast<std::uint8_t>(b ^ 1);
        for (auto& tv : body->tx_votes)
            tv.bit = static_cast<std::uint8_t>(tv.bit ^ 1);
        subject = body_digest(*body);
    }
    auto a = attest(ctx_, subject);
    if (!a)
        return;
    if (subject == vs.subject)
        cvotes_[vs.body.round][subject].add(*a);
    Message m;
    m.type = MsgType::cvote;
    m.from = ctx_.id();
    m.sid = sid_;
    m.round = vs.body.round;
    m.att = *a;
    m.vr = body;
    broadcast(*cfg, seal(std::move(m)));
}

void ProcessingReplica::check_vote(Round r)
{
    auto it = my_votes_.find(r);
    if (it == my_votes_.end() || it->second.formed)
        return;
    auto& vs = it->second;
    auto const* cfg = config(vs.body.epoch);
    if (!cfg)
        return;
    auto& q = cvotes_[r][vs.subject];
    q.subject = vs.subject;
    if (!verify_quorum(q, *cfg, ThresholdKind::processing))
        return;
    vs.formed = true;
    vs.last = ctx_.now();
    VoteResult vr = vs.body;
    vr.quorum = q;
    Message m;
    m.type = MsgType::vote_result;
    m.from = ctx_.id();
    m.sid = sid_;
    m.round = r;
    m.vr = std::make_shared<VoteResult const>(std::move(vr));
    to_ordering(seal(std::move(m)));
}

void ProcessingReplica::on_cvote(Message const& m)
{
    if (!m.vr || m.vr->sid != sid_ || m.att.signer != m.from)
        return;
    auto const* cfg = config(m.vr->epoch);
    if (!cfg || !cfg->contains(m.from))
        return;
    auto& q = cvotes_[m.vr->round][m.att.subject];
    q.subject = m.att.subject;
    q.add(m.att);
    check_vote(m.vr->round);
}

void ProcessingReplica::on_commit(Message const& m)
{
    if (m.att.signer != m.from)
        return;
    auto const* cfg = config(ctx_.registry().epoch_of(m.round));
    if (!cfg || !cfg->contains(m.from))
        return;
    if (applied_ > m.round + 3 * ctx_.registry().params().epoch_length)
        return;
    auto& q = commits_[m.round][m.att.subject];
    q.subject = m.att.subject;
    q.add(m.att);
    check_commit(m.round);
}

void ProcessingReplica::check_commit(Round r)
{
    if (commit_certs_.count(r))
        return;
    auto mine = my_commit_.find(r);
    if (mine == my_commit_.end())
        return;
    auto const* cfg = config(ctx_.registry().epoch_of(r));
    if (!cfg)
        return;
    auto& q = commits_[r][mine->second];
    q.subject = mine->second;
    if (!verify_quorum(q, *cfg, ThresholdKind::processing))
        return;
    commit_certs_[r] = q;
    for (auto it = commit_certs_.begin(); it != commit_certs_.end() && it->first + 8 < r;)
        it = ctx_.registry().is_boundary(it->first) ? std::next(it) : commit_certs_.erase(it);
    serve_snapshots(r);
}

std::optional<QuorumAttestation> ProcessingReplica::commit_cert(Round r) const
{
    if (auto it = commit_certs_.find(r); it != commit_certs_.end())
        return it->second;
    return std::nullopt;
}

// ---- snapshots ----------------------------------------------------------------

void ProcessingReplica::serve_snapshots(Round r)
{
    auto w = snap_waiters_.find(r);
    if (w == snap_waiters_.end())
        return;
    auto s = snapshots_.find(r);
    auto c = commit_certs_.find(r);
    if (s == snapshots_.end() || c == commit_certs_.end())
        return;
    SnapshotData data = s->second;
    data.commit_cert = c->second;
    Message m;
    m.type = MsgType::snap_resp;
    m.from = ctx_.id();
    m.sid = sid_;
    m.round = r;
    m.snap = std::make_shared<SnapshotData const>(std::move(data));
    auto msg = seal(std::move(m));
    for (NodeId id : w->second)
        ctx_.send(id, msg);
    snap_waiters_.erase(w);
}

void ProcessingReplica::on_snap_req(Message const& m)
{
    if (ctx_.behavior() == Behavior::silent || ctx_.behavior() == Behavior::withhold_certificates)
        return;
    if (m.round < join_round_ || (exec_ == nullptr))
        return;
    auto& w = snap_waiters_[m.round];
    if (std::find(w.begin(), w.end(), m.from) == w.end())
        w.push_back(m.from);
    serve_snapshots(m.round);
}

void ProcessingReplica::on_snap_resp(Message const& m)
{
    if (exec_ || !m.snap || m.snap->round != join_round_ || m.snap->sid != sid_)
        return;
    auto const& s = *m.snap;
    auto const* cfg = config(ctx_.registry().epoch_of(s.round));
    if (!cfg)
        return;
    Digest const exec = sha256(s.exec);
    if (s.commit_cert.subject != commit_subject(s.state_root, exec, s.round, sid_) ||
        !verify_quorum(s.commit_cert, *cfg, ThresholdKind::processing))
        return;
    std::unique_ptr<Executor> e;
    try
    {
        e = Executor::restore(ctx_.params().executor, s.exec);
    }
    catch (DecodeError const&)
    {
        return;
    }
    if (state_root_of(e->committed()) != s.state_root || e->applied_round() != s.round)
        return;
    exec_ = std::move(e);
    applied_ = s.round;
    commit_certs_[s.round] = s.commit_cert;
    for (auto const& body : s.pending_votes)
    {
        VoteState vs;
        vs.body = body;
        vs.subject = body_digest(body);
        vs.last = ctx_.now();
        for (auto const& tv : body.tx_votes)
            vs.open.insert({tv.round, tv.batch, tv.index});
        my_votes_[body.round] = std::move(vs);
    }
    ctx_.observer().on_joined(ctx_.id(), sid_, s.round, true, ctx_.now());
    try_apply();
    maybe_create_eb();
}

void ProcessingReplica::fallback_replay()
{
    Balances g = genesis_balances(ctx_.params().economy, sid_);
    exec_ = Executor::make(ctx_.params().executor, sid_, std::move(g));
    applied_ = 0;
    ctx_.observer().on_joined(ctx_.id(), sid_, join_round_, false, ctx_.now());
    try_apply();
}

// ---- periodic work ----------------------------------------------------------------

void ProcessingReplica::maintenance()
{
    Tick const now = ctx_.now();
    auto const& params = ctx_.params();
    Epoch const cur = working_epoch();
    for (auto& [r, vs] : my_votes_)
    {
        if (now - vs.last < params.vote_retry)
            continue;
        vs.last = now;
        if (vs.formed)
        {
            VoteResult vr = vs.body;
            vr.quorum = cvotes_[r][vs.subject];
            Message m;
            m.type = MsgType::vote_result;
            m.from = ctx_.id();
            m.sid = sid_;
            m.round = r;
            m.vr = std::make_shared<VoteResult const>(std::move(vr));
            to_ordering(seal(std::move(m)));
        }
        else if (cur > vs.body.epoch && member(cur) && !retired())
        {
            vs.body.epoch = cur;
            vs.subject = body_digest(vs.body);
            sign_vote(vs);
            check_vote(r);
        }
        else
            sign_vote(vs);
    }
    for (auto it = unordered_.begin(); it != unordered_.end();)
    {
        auto& u = it->second;
        if (now - u.since < params.cb_retry)
        {
            ++it;
            continue;
        }
        if (u.cb->epoch + 1 < cur)
        {
            std::vector<Transaction> txs = std::move(u.txs);
            it = unordered_.erase(it);
            submit(txs);
            continue;
        }
        u.since = now;
        Message m;
        m.type = MsgType::cert_block;
        m.from = ctx_.id();
        m.sid = sid_;
        m.cb = u.cb;
        to_ordering(seal(std::move(m)));
        ++it;
    }
    if (inflight_ && (inflight_->epoch + 1 < cur || retired()))
        abandon_inflight();
    if (exec_ && !retired())
        maybe_create_eb();
}

void ProcessingReplica::do_retire()
{
    abandon_inflight();
    std::vector<Transaction> txs = std::move(mempool_);
    mempool_.clear();
    mempool_ids_.clear();
    submit(txs);
}

nlohmann::json ProcessingReplica::debug_json() const
{
    nlohmann::json ledger = nlohmann::json::array();
    for (auto const& [r, e] : ledger_)
        ledger.push_back({{"round", r}, {"state_root", e.state_root}, {"finalized", e.finalized.size()}});
    nlohmann::json j{{"node", ctx_.id()},
                     {"sid", sid_},
                     {"order_round", applied_},
                     {"mempool", mempool_.size()},
                     {"ledger", ledger}};
    if (exec_)
        j["executor"] = exec_->debug_json();
    return j;
}

} // namespace coe

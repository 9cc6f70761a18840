#include "coe/node.hpp"

namespace coe {

Node::Node(NodeId id, Transport& net, MembershipRegistry& reg, ProtocolParams const& params, Observer& obs,
           Behavior behavior, std::uint64_t seed)
    : id_(id), net_(net), reg_(reg), params_(params), obs_(obs), behavior_(behavior),
      rng_(seed ^ (0x9E3779B97F4A7C15ull * (id + 1)))
{
}

void Node::start()
{
    if (behavior_ == Behavior::silent)
        return;
    for (auto const& cfg : reg_.processing(0))
        if (cfg.contains(id_))
            add_replica(cfg.shard_id, std::make_unique<ProcessingReplica>(
                                          *this, cfg.shard_id, genesis_balances(params_.economy, cfg.shard_id)));
    if (reg_.ordering().contains(id_))
    {
        ordering_ = std::make_unique<OrderingReplica>(*this);
        ordering_->start();
    }
    TimerTag t;
    t.kind = TimerKind::ob_sync;
    set_timer(params_.ob_sync_interval, t);
}

void Node::add_replica(ShardId sid, std::unique_ptr<ProcessingReplica> r)
{
    r->set_generation(++generation_[sid]);
    auto& slot = replicas_[sid];
    slot = std::move(r);
    slot->start();
}

ProcessingReplica const* Node::processing(ShardId sid) const
{
    auto it = replicas_.find(sid);
    return it == replicas_.end() ? nullptr : it->second.get();
}

void Node::send(NodeId to, MsgPtr const& m)
{
    net_.send(id_, to, m);
}

void Node::set_timer(Tick delay, TimerTag const& tag)
{
    net_.set_timer(id_, delay, tag);
}

ObPtr Node::ob(Round r) const
{
    if (r == 0 || r > contiguous_)
        return nullptr;
    return obs_store_.at(r);
}

EbPtr Node::eb(Digest const& d) const
{
    auto it = ebs_.find(d);
    return it == ebs_.end() ? nullptr : it->second;
}

void Node::store_eb(Digest const& d, EbPtr eb)
{
    ebs_.emplace(d, std::move(eb));
}

std::uint64_t Node::random(std::uint64_t bound)
{
    return bound == 0 ? 0 : rng_() % bound;
}

void Node::request_ob_sync()
{
    Tick const now = net_.now();
    if (sync_sent_ && now - last_sync_ < 2 * params_.delta)
        return;
    sync_sent_ = true;
    last_sync_ = now;
    auto const& members = reg_.ordering().members;
    NodeId to = members[random(members.size())];
    if (to == id_)
        to = members[(std::find(members.begin(), members.end(), id_) - members.begin() + 1) % members.size()];
    Message m;
    m.type = MsgType::ob_sync_req;
    m.from = id_;
    m.round = contiguous_ + 1;
    send(to, seal(std::move(m)));
}

bool Node::accept_ob(OrderingBlock const& ob)
{
    Digest const d = body_digest(ob);
    if (ob.round == 0)
        return false;
    if (auto it = obs_store_.find(ob.round); it != obs_store_.end())
    {
        if (body_digest(*it->second) != d)
            obs_.on_note("ob_conflict", {{"node", id_}, {"round", ob.round}});
        return false;
    }
    if (ob.quorum.subject != d || !verify_quorum(ob.quorum, reg_.ordering(), ThresholdKind::ordering))
        return false;
    obs_store_.emplace(ob.round, std::make_shared<OrderingBlock const>(ob));
    if (ob.round > contiguous_ + 1)
        request_ob_sync();
    advance_chain();
    return true;
}

void Node::finalize_ob(OrderingBlock ob)
{
    Round const r = ob.round;
    if (!accept_ob(ob))
        return;
    if (auto it = obs_store_.find(r); it != obs_store_.end())
        fanout(it->second);
}

void Node::fanout(ObPtr const& ob)
{
    auto const& members = reg_.ordering().members;
    std::size_t const m = members.size();
    std::size_t const mine = static_cast<std::size_t>(std::find(members.begin(), members.end(), id_) - members.begin());
    std::size_t const copies = static_cast<std::size_t>(reg_.ordering().f_L * static_cast<double>(m)) + 1;
    Message f;
    f.type = MsgType::finalized;
    f.from = id_;
    f.round = ob->round;
    f.obs.push_back(ob);
    auto msg = seal(std::move(f));
    for (NodeId j = 0; j < reg_.params().n; ++j)
    {
        if (j == id_)
            continue;
        // node j hears from members[(j + t) % m] for t < copies
        std::size_t const t = (mine + m - j % m) % m;
        if (t < copies)
            send(j, msg);
    }
}

void Node::advance_chain()
{
    while (true)
    {
        auto it = obs_store_.find(contiguous_ + 1);
        if (it == obs_store_.end())
            return;
        ObPtr ob = it->second;
        contiguous_ = ob->round;
        last_ob_time_ = net_.now();
        sync_sent_ = false;
        obs_.on_ob_finalized(id_, *ob, body_digest(*ob), net_.now());
        if (reg_.is_boundary(ob->round))
            on_boundary(ob->round, *ob);
        if (ordering_)
            ordering_->on_finalized(*ob);
        for (auto& [sid, r] : replicas_)
            r->try_apply();
    }
}

void Node::on_boundary(Round r, OrderingBlock const& ob)
{
    Epoch const e = reg_.epoch_of(r);
    try
    {
        reg_.advance(e, ob.plans);
    }
    catch (std::logic_error const& ex)
    {
        obs_.on_note("reconfiguration_conflict", {{"node", id_}, {"round", r}, {"what", ex.what()}});
        return;
    }
    for (auto& [sid, rep] : replicas_)
        if (!rep->retire_round() && !reg_.config(sid, e + 1).contains(id_))
            rep->retire_after(r);
    for (auto const& cfg : reg_.processing(e + 1))
    {
        if (!cfg.contains(id_))
            continue;
        auto it = replicas_.find(cfg.shard_id);
        if (it != replicas_.end() && !it->second->retire_round())
            continue;
        add_replica(cfg.shard_id, std::make_unique<ProcessingReplica>(*this, cfg.shard_id, r));
    }
}

void Node::deliver(Message const& m)
{
    if (behavior_ == Behavior::silent)
        return;
    switch (m.type)
    {
    case MsgType::finalized:
    case MsgType::ob_sync_resp:
        for (auto const& ob : m.obs)
            if (ob)
                accept_ob(*ob);
        return;
    case MsgType::ob_sync_req:
    {
        if (m.round == 0 || m.round > contiguous_)
            return;
        Message r;
        r.type = MsgType::ob_sync_resp;
        r.from = id_;
        r.round = m.round;
        for (Round x = m.round; x <= contiguous_ && x < m.round + 20; ++x)
            r.obs.push_back(obs_store_.at(x));
        send(m.from, seal(std::move(r)));
        return;
    }
    case MsgType::eb_req:
    {
        if (behavior_ == Behavior::withhold_certificates)
            return;
        auto e = eb(m.digest);
        if (!e)
            return;
        Message r;
        r.type = MsgType::eb_resp;
        r.from = id_;
        r.sid = m.sid;
        r.digest = m.digest;
        r.eb = e;
        send(m.from, seal(std::move(r)));
        return;
    }
    case MsgType::cert_block:
    case MsgType::vote_result:
    case MsgType::propose:
    case MsgType::prepare:
    case MsgType::prepared:
    case MsgType::ocommit:
    case MsgType::viewchange:
        if (ordering_)
            ordering_->on_message(m);
        return;
    default: break;
    }
    auto it = replicas_.find(m.sid);
    if (it != replicas_.end())
        it->second->on_message(m);
}

void Node::timer(TimerTag const& t)
{
    if (behavior_ == Behavior::silent)
        return;
    switch (t.kind)
    {
    case TimerKind::propose:
    case TimerKind::view_timeout:
        if (ordering_)
            ordering_->on_timer(t);
        return;
    case TimerKind::ob_sync:
        if (net_.now() - last_ob_time_ >= params_.ob_sync_interval || obs_store_.size() > contiguous_)
            request_ob_sync();
        set_timer(params_.ob_sync_interval, t);
        return;
    default: break;
    }
    auto it = replicas_.find(t.sid);
    if (it != replicas_.end())
        it->second->on_timer(t);
}

} // namespace coe

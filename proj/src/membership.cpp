#include "coe/membership.hpp"

#include "coe/codec.hpp"

#include <algorithm>
#include <cmath>

namespace coe {

BootstrapSizes plan_bootstrap(BootstrapParams const& p)
{
    BootstrapSizes out;
    out.f_L = p.f_L_target;
    out.f_S = 1.0 - p.f_L_target - p.epsilon;
    sizing::SizingParams sp;
    sp.n = p.n;
    sp.s = p.s;
    sp.lambda = p.lambda;
    sp.f = p.f_ordering;
    out.m_ordering = static_cast<std::uint32_t>(sizing::min_shard_size(sp).m_star);
    sp.f = out.f_S;
    auto r = sizing::min_shard_size(sp);
    out.m_star = static_cast<std::uint32_t>(r.m_star);
    out.k = static_cast<std::uint32_t>(r.k);
    return out;
}

double rank_value(std::uint64_t seed, std::uint32_t tag, Epoch epoch, NodeId node)
{
    Writer w;
    w.u64(seed);
    w.u32(tag);
    w.u64(epoch);
    w.u32(node);
    Digest d = sha256(w.data());
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i)
        x = (x << 8) | d.bytes[static_cast<std::size_t>(i)];
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

namespace {

std::vector<NodeId> ranked(std::uint64_t seed, std::uint32_t tag, Epoch e, std::vector<NodeId> nodes)
{
    std::sort(nodes.begin(), nodes.end(), [&](NodeId a, NodeId b) {
        double ra = rank_value(seed, tag, e, a), rb = rank_value(seed, tag, e, b);
        return ra != rb ? ra < rb : a < b;
    });
    return nodes;
}

} // namespace

MembershipRegistry::MembershipRegistry(BootstrapParams p) : params_(p), sizes_(plan_bootstrap(p))
{
    if (sizes_.m_ordering > p.n || sizes_.m_star > p.n || sizes_.k == 0)
        throw sizing::Infeasible("bootstrap does not fit in n nodes", 1.0);
    std::vector<NodeId> all(p.n);
    for (NodeId i = 0; i < p.n; ++i)
        all[i] = i;
    auto order = ranked(p.seed, 0, 0, all);
    ordering_.shard_id = kOrderingShard;
    ordering_.members.assign(order.begin(), order.begin() + sizes_.m_ordering);
    std::sort(ordering_.members.begin(), ordering_.members.end());
    ordering_.f_S = ordering_.f_L = p.f_ordering;
    ordering_.role = Role::ordering;
    ordering_.epoch_length = p.epoch_length;
    epochs_[0] = randomize(0, {});
}

std::vector<ShardConfig> MembershipRegistry::randomize(Epoch e, std::vector<ShardConfig> const& keep) const
{
    std::set<NodeId> taken;
    for (auto const& c : keep)
        taken.insert(c.members.begin(), c.members.end());
    std::vector<NodeId> pool;
    for (NodeId i = 0; i < params_.n; ++i)
        if (!taken.count(i))
            pool.push_back(i);
    pool = ranked(params_.seed, 1, e, pool);

    std::vector<ShardConfig> out;
    std::size_t next = 0;
    for (ShardId sid = 0; sid < sizes_.k; ++sid)
    {
        auto kept = std::find_if(keep.begin(), keep.end(), [&](ShardConfig const& c) { return c.shard_id == sid; });
        if (kept != keep.end())
        {
            out.push_back(*kept);
            continue;
        }
        if (next + sizes_.m_star > pool.size())
            throw Unrecoverable("not enough nodes to re-form processing shards");
        ShardConfig c;
        c.shard_id = sid;
        c.members.assign(pool.begin() + static_cast<std::ptrdiff_t>(next),
                         pool.begin() + static_cast<std::ptrdiff_t>(next + sizes_.m_star));
        std::sort(c.members.begin(), c.members.end());
        next += sizes_.m_star;
        c.f_S = sizes_.f_S;
        c.f_L = sizes_.f_L;
        c.role = Role::processing;
        c.epoch_length = params_.epoch_length;
        c.epoch = e;
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<ShardConfig> const& MembershipRegistry::processing(Epoch e) const
{
    auto it = epochs_.find(e);
    if (it == epochs_.end())
        throw std::out_of_range("membership for epoch " + std::to_string(e) + " not known yet");
    return it->second;
}

ShardConfig const& MembershipRegistry::config(ShardId sid, Epoch e) const
{
    auto const& v = processing(e);
    if (sid >= v.size())
        throw std::out_of_range("unknown shard " + std::to_string(sid));
    return v[sid];
}

std::optional<ShardId> MembershipRegistry::shard_of(NodeId node, Epoch e) const
{
    for (auto const& c : processing(e))
        if (c.contains(node))
            return c.shard_id;
    return std::nullopt;
}

std::vector<NodeId> MembershipRegistry::reserve(Epoch e) const
{
    std::set<NodeId> used;
    for (auto const& c : processing(e))
        used.insert(c.members.begin(), c.members.end());
    std::vector<NodeId> out;
    for (NodeId i = 0; i < params_.n; ++i)
        if (!used.count(i))
            out.push_back(i);
    return out;
}

std::vector<RecoveryPlan> MembershipRegistry::compute_plans(
    Epoch e, std::map<ShardId, std::set<NodeId>> const& participation) const
{
    std::vector<RecoveryPlan> plans;
    auto reserves = ranked(params_.seed, 2, e, reserve(e));
    std::size_t next = 0;
    for (auto const& cfg : processing(e))
    {
        std::size_t seen = 0;
        if (auto it = participation.find(cfg.shard_id); it != participation.end())
            for (NodeId id : it->second)
                seen += cfg.contains(id) ? 1 : 0;
        if (seen >= cfg.quorum())
            continue;

        RecoveryPlan plan;
        plan.shard_id = cfg.shard_id;
        plan.effective_round = last_round(e) + 1;
        double f_L = cfg.f_L;
        std::size_t size = cfg.size();
        while (size <= cfg.size())
        {
            f_L += params_.recovery_step;
            double f_S = 1.0 - f_L - params_.epsilon;
            if (f_S <= 0 || f_S <= params_.s)
                throw Unrecoverable("shard " + std::to_string(cfg.shard_id) + " cannot lower f_S any further");
            sizing::SizingParams sp;
            sp.n = params_.n;
            sp.s = params_.s;
            sp.f = f_S;
            sp.lambda = params_.lambda;
            try
            {
                size = static_cast<std::size_t>(sizing::min_shard_size(sp).m_star);
            }
            catch (sizing::Infeasible const&)
            {
                throw Unrecoverable("no feasible recovered size for shard " + std::to_string(cfg.shard_id));
            }
            plan.new_f_L = f_L;
            plan.new_f_S = f_S;
        }
        std::size_t add = size - cfg.size();
        if (next + add > reserves.size())
            throw Unrecoverable("reserve pool exhausted recovering shard " + std::to_string(cfg.shard_id));
        plan.added_nodes.assign(reserves.begin() + static_cast<std::ptrdiff_t>(next),
                                reserves.begin() + static_cast<std::ptrdiff_t>(next + add));
        std::sort(plan.added_nodes.begin(), plan.added_nodes.end());
        next += add;
        plan.new_size = static_cast<std::uint32_t>(size);
        plans.push_back(std::move(plan));
    }
    return plans;
}

bool MembershipRegistry::recovered_after(Epoch e, ShardId sid) const
{
    auto it = plans_.find(e);
    return it != plans_.end() &&
           std::any_of(it->second.begin(), it->second.end(), [&](RecoveryPlan const& p) { return p.shard_id == sid; });
}

void MembershipRegistry::advance(Epoch e, std::vector<RecoveryPlan> const& plans)
{
    if (known(e + 1))
    {
        if (plans_.at(e) != plans)
            throw std::logic_error("conflicting reconfiguration for epoch " + std::to_string(e + 1));
        return;
    }
    if (!known(e))
        throw std::logic_error("epochs must be installed in order");
    std::vector<ShardConfig> keep;
    for (auto const& p : plans)
    {
        ShardConfig c = config(p.shard_id, e);
        c.members.insert(c.members.end(), p.added_nodes.begin(), p.added_nodes.end());
        std::sort(c.members.begin(), c.members.end());
        c.f_L = p.new_f_L;
        c.f_S = p.new_f_S;
        c.epoch = e + 1;
        keep.push_back(std::move(c));
    }
    epochs_[e + 1] = randomize(e + 1, keep);
    plans_[e] = plans;
}

} // namespace coe

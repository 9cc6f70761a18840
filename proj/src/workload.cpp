#include "coe/workload.hpp"

namespace coe {

Workload::Workload(WorkloadConfig cfg, Simulator& sim, MembershipRegistry const& reg, ProtocolParams const& params,
                   std::uint64_t seed, std::function<bool(TxId)> finalized)
    : cfg_(cfg), sim_(sim), reg_(reg), params_(params), rng_(seed), route_rng_(seed ^ 0x9E3779B97F4A7C15ull), finalized_(std::move(finalized))
{
}

void Workload::start()
{
    for (std::size_t i = 0; i < cfg_.script.size(); ++i)
        sim_.schedule(cfg_.script[i].at, [this, i] {
            Transaction tx;
            tx.sub_ops = cfg_.script[i].ops;
            std::set<ShardId> shards;
            for (auto const& op : tx.sub_ops)
                shards.insert(op.shard);
            tx.kind = shards.size() > 1 ? TxKind::cross : TxKind::intra;
            tx.id = next_id_++;
            admit(std::move(tx));
        });
    if (cfg_.tx_rate <= 0)
        return;
    sim_.schedule(cfg_.start, [this] { arrive(); });
}

void Workload::admit(Transaction tx)
{
    TxId const id = tx.id;
    Submission s;
    s.tx = std::move(tx);
    s.submit = sim_.now();
    s.tx.submit_time = s.submit;
    subs_[id] = s;
    if (on_submit)
        on_submit(subs_[id]);
    send(id);
}

void Workload::arrive()
{
    if (stopped_ || (cfg_.max_txs && next_id_ > cfg_.max_txs))
        return;
    TxId const id = next_id_++;
    admit(make_tx(id));
    std::exponential_distribution<double> gap(cfg_.tx_rate / 1000.0);
    sim_.schedule(sim_.now() + static_cast<Tick>(gap(rng_)), [this] { arrive(); });
}

Transaction Workload::make_tx(TxId id)
{
    Economy const& eco = params_.economy;
    std::uint32_t const k = eco.shards;
    auto pick = [&](std::uint64_t n) { return static_cast<std::uint32_t>(rng_() % n); };
    auto amount = [&] { return static_cast<Amount>(1 + rng_() % static_cast<std::uint64_t>(cfg_.max_amount)); };
    auto two_accounts = [&](std::uint32_t range, AccountId& a, AccountId& b) {
        a = pick(range);
        b = (a + 1 + pick(range - 1)) % range;
    };

    bool const hot = cfg_.hotspot && std::uniform_real_distribution<double>(0, 1)(rng_) < cfg_.hotspot_share;
    bool const cross = k > 1 && std::uniform_real_distribution<double>(0, 1)(rng_) < cfg_.ctx_ratio;
    ShardId const origin = hot ? 0 : pick(k);

    Transaction tx;
    tx.id = id;
    SubOperation op;
    op.shard = origin;
    if (hot)
    {
        op.contract = 0;
        two_accounts(std::max<std::uint32_t>(cfg_.hot_accounts, 2), op.debit_account, op.credit_account);
    }
    else
    {
        op.contract = eco.contract(origin, pick(eco.contracts_per_shard));
        two_accounts(eco.accounts, op.debit_account, op.credit_account);
    }
    op.amount = amount();
    tx.sub_ops.push_back(op);
    if (cross)
    {
        // swap: the counterparty pays back on another shard
        ShardId const dest = (origin + 1 + pick(k - 1)) % k;
        SubOperation back;
        back.shard = dest;
        back.contract = eco.contract(dest, pick(eco.contracts_per_shard));
        back.debit_account = op.credit_account % eco.accounts;
        back.credit_account = op.debit_account % eco.accounts;
        if (back.debit_account == back.credit_account)
            back.credit_account = (back.credit_account + 1) % eco.accounts;
        back.amount = amount();
        tx.kind = TxKind::cross;
        tx.sub_ops.push_back(back);
    }
    return tx;
}

void Workload::send(TxId id)
{
    auto& s = subs_.at(id);
    ShardId const origin = s.tx.sub_ops.front().shard;
    auto const& cfg = reg_.config(origin, reg_.latest());
    std::vector<NodeId> targets;
    if (cfg_.designated_only)
        for (NodeId n : cfg.members)
            if (params_.creators.count(n))
                targets.push_back(n);
    if (targets.empty())
        targets = cfg.members;
    NodeId const to = targets[route_rng_() % targets.size()];
    Message m;
    m.type = MsgType::client_tx;
    m.from = kClientId;
    m.sid = origin;
    m.txs.push_back(s.tx);
    sim_.send(kClientId, to, seal(std::move(m)));
    sim_.schedule(sim_.now() + cfg_.resubmit_timeout, [this, id] {
        if (finalized_(id))
            return;
        subs_.at(id).resubmits++;
        send(id);
    });
}

} // namespace coe

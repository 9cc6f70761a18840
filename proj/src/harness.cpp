#include "coe/harness.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace coe {

namespace {

std::string hex(Bytes const& b)
{
    static char const* digits = "0123456789abcdef";
    std::string s;
    s.reserve(b.size() * 2);
    for (auto c : b)
    {
        s.push_back(digits[c >> 4]);
        s.push_back(digits[c & 15]);
    }
    return s;
}

char const* executor_name(ExecutorKind k)
{
    return k == ExecutorKind::lockfree ? "coe_lockfree" : "two_phase_lock";
}

ExecutorKind executor_from(std::string const& s)
{
    if (s == "coe_lockfree" || s == "lockfree")
        return ExecutorKind::lockfree;
    if (s == "two_phase_lock" || s == "2pl")
        return ExecutorKind::two_phase_lock;
    throw std::invalid_argument("unknown executor '" + s + "'");
}

std::size_t cap_count(double fraction, std::size_t m)
{
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(m) + 1e-9));
}

struct ShardFinal
{
    Round round = 0;
    Tick time = 0;
    Outcome outcome = Outcome::committed;
    AbortCause cause = AbortCause::none;
};

class HarnessObserver final : public Observer
{
public:
    HarnessObserver(Observations& obs, TraceSink& trace) : obs_(obs), trace_(trace) {}

    Simulator* sim = nullptr;
    std::set<NodeId> crash_on_cb;
    std::map<NodeId, Tick>* crash_times = nullptr;
    std::map<TxId, Round> ordered;
    std::set<TxId> deferred;
    std::map<TxId, Round> lock_wait;
    std::map<TxId, std::map<ShardId, ShardFinal>> finals;
    std::vector<JoinEvent> joins;
    std::vector<RecoveryPlan> recoveries;
    std::map<Round, std::size_t> ob_bytes;
    Round max_round = 0;
    std::function<void(Round)> on_round;

    void on_applied(ApplyRecord const& rec) override
    {
        bool const honest = obs_.honest.count(rec.node) != 0;
        SlotKey const key{rec.sid, rec.round};
        bool const first = honest && !obs_.entries.count(key);
        auto const& entry = rec.output->entry;
        obs_.record_apply(rec.node, entry, rec.sid, rec.time);
        if (trace_.enabled())
        {
            nlohmann::json j{{"t", rec.time},
                             {"ev", "apply"},
                             {"node", rec.node},
                             {"sid", rec.sid},
                             {"round", rec.round},
                             {"digest", obs_.ledgers[rec.node][key].hex()}};
            if (first)
                j["entry"] = hex(to_bytes(entry));
            trace_.write(j);
        }
        if (!honest)
            return;
        for (auto const& tx : rec.input->itxs)
            ordered.emplace(tx.id, rec.round);
        for (auto const& meta : rec.input->metas)
            for (auto const& t : meta.txs)
                ordered.emplace(t.id, rec.round);
        for (TxId id : rec.output->deferred)
            deferred.insert(id);
        for (auto const& lw : rec.output->lock_waits)
        {
            auto& w = lock_wait[lw.tx];
            w = std::max(w, lw.rounds);
        }
        for (auto const& ft : entry.finalized)
            finals[ft.id].emplace(rec.sid, ShardFinal{rec.round, rec.time, ft.outcome, ft.cause});
    }

    void on_ob_finalized(NodeId node, OrderingBlock const& ob, Digest const& d, Tick t) override
    {
        obs_.record_ob(node, ob.round, d);
        if (trace_.enabled())
            trace_.write({{"t", t}, {"ev", "ob"}, {"node", node}, {"round", ob.round}, {"digest", d.hex()}});
        if (!obs_.honest.count(node))
            return;
        if (!ob_bytes.count(ob.round))
        {
            ob_bytes[ob.round] = wire_size(ob);
            for (auto const& p : ob.plans)
                recoveries.push_back(p);
        }
        if (ob.round > max_round)
        {
            max_round = ob.round;
            if (on_round)
                on_round(max_round);
        }
    }

    void on_cb_quorum(NodeId node, CertificateBlock const&, std::size_t txs, Tick t) override
    {
        if (txs == 0 || !crash_on_cb.count(node) || !sim || sim->crashed(node))
            return;
        crash_on_cb.erase(node);
        sim->crash(node, t);
        if (crash_times)
            (*crash_times)[node] = t;
    }

    void on_joined(NodeId node, ShardId sid, Round r, bool via_snapshot, Tick t) override
    {
        joins.push_back({node, sid, r, via_snapshot, t});
        if (trace_.enabled())
            trace_.write({{"t", t},
                          {"ev", "join"},
                          {"node", node},
                          {"sid", sid},
                          {"round", r},
                          {"snapshot", via_snapshot}});
    }

    void on_note(std::string const& what, nlohmann::json const& detail) override
    {
        obs_.notes.push_back(what);
        if (trace_.enabled())
            trace_.write({{"ev", "note"}, {"what", what}, {"detail", detail}});
    }

private:
    Observations& obs_;
    TraceSink& trace_;
};

} // namespace

// ---- configuration -------------------------------------------------------------

ScenarioConfig scenario_from_json(nlohmann::json const& j)
{
    ScenarioConfig c;
    c.name = j.value("name", c.name);
    c.seed = j.value("seed", c.seed);
    c.boot.n = j.value("n", c.boot.n);
    c.boot.s = j.value("s", c.boot.s);
    c.boot.lambda = j.value("lambda", c.boot.lambda);
    c.boot.f_L_target = j.value("f_L_target", c.boot.f_L_target);
    c.boot.epsilon = j.value("epsilon", c.boot.epsilon);
    c.boot.epoch_length = j.value("epoch_length", c.boot.epoch_length);
    c.load.ctx_ratio = j.value("ctx_ratio", c.load.ctx_ratio);
    c.load.tx_rate = j.value("tx_rate", c.load.tx_rate);
    c.load.max_txs = j.value("max_txs", c.load.max_txs);
    c.load.hotspot = j.value("hotspot", c.load.hotspot);
    c.load.hotspot_share = j.value("hotspot_share", c.load.hotspot_share);
    c.load.hot_accounts = j.value("hot_accounts", c.load.hot_accounts);
    c.load.resubmit_timeout = j.value("resubmit_timeout", c.load.resubmit_timeout);
    c.duration_rounds = j.value("duration_rounds", c.duration_rounds);
    c.drain_rounds = j.value("drain_rounds", c.drain_rounds);
    c.max_time = j.value("max_time", c.max_time);
    c.net.gst = j.value("gst", c.net.gst);
    c.net.delta = j.value("delta", c.net.delta);
    c.net.pre_gst_max_delay = j.value("pre_gst_max_delay", 10 * c.net.delta);
    c.net.drop_rate_pre_gst = j.value("drop_rate_pre_gst", c.net.drop_rate_pre_gst);
    c.proto.delta = c.net.delta;
    c.proto.executor = executor_from(j.value("executor", std::string("coe_lockfree")));
    c.proto.block_capacity = j.value("block_capacity", c.proto.block_capacity);
    c.proto.block_interval = j.value("block_interval", c.proto.block_interval);
    c.proto.view_timeout = j.value("view_timeout", c.proto.view_timeout);
    c.proto.economy.contracts_per_shard = j.value("contracts_per_shard", c.proto.economy.contracts_per_shard);
    c.proto.economy.accounts = j.value("accounts", c.proto.economy.accounts);
    c.proto.economy.initial_balance = j.value("initial_balance", c.proto.economy.initial_balance);
    c.designated_creators = j.value("designated_creators", c.designated_creators);
    for (auto const& st : j.value("script", nlohmann::json::array()))
    {
        ScriptedTx tx;
        tx.at = st.value("at", Tick{0});
        for (auto const& o : st.at("ops"))
        {
            SubOperation op;
            op.shard = o.at("shard");
            op.contract = o.at("contract");
            op.debit_account = o.at("debit");
            op.credit_account = o.at("credit");
            op.amount = o.at("amount");
            tx.ops.push_back(op);
        }
        c.load.script.push_back(std::move(tx));
    }
    if (j.contains("faults"))
    {
        auto const& f = j.at("faults");
        if (f.contains("byzantine"))
            for (auto const& [node, b] : f.at("byzantine").items())
                c.faults.byzantine[static_cast<NodeId>(std::stoul(node))] = behavior_from_string(b.get<std::string>());
        if (f.contains("crashes"))
            for (auto const& [node, t] : f.at("crashes").items())
                c.faults.crashes[static_cast<NodeId>(std::stoul(node))] = t.get<Tick>();
        c.faults.crash_creators_after_cb = f.value("crash_creators_after_cb", false);
        c.faults.allow_threshold_breach = f.value("allow_threshold_breach", false);
    }
    return c;
}

nlohmann::json to_json(ScenarioConfig const& c)
{
    nlohmann::json byz = nlohmann::json::object();
    for (auto const& [n, b] : c.faults.byzantine)
        byz[std::to_string(n)] = to_string(b);
    nlohmann::json crashes = nlohmann::json::object();
    for (auto const& [n, t] : c.faults.crashes)
        crashes[std::to_string(n)] = t;
    nlohmann::json script = nlohmann::json::array();
    for (auto const& st : c.load.script)
    {
        nlohmann::json ops = nlohmann::json::array();
        for (auto const& op : st.ops)
            ops.push_back({{"shard", op.shard},
                           {"contract", op.contract},
                           {"debit", op.debit_account},
                           {"credit", op.credit_account},
                           {"amount", op.amount}});
        script.push_back({{"at", st.at}, {"ops", ops}});
    }
    return {{"name", c.name},
            {"seed", c.seed},
            {"n", c.boot.n},
            {"s", c.boot.s},
            {"lambda", c.boot.lambda},
            {"f_L_target", c.boot.f_L_target},
            {"epsilon", c.boot.epsilon},
            {"epoch_length", c.boot.epoch_length},
            {"ctx_ratio", c.load.ctx_ratio},
            {"tx_rate", c.load.tx_rate},
            {"max_txs", c.load.max_txs},
            {"hotspot", c.load.hotspot},
            {"hotspot_share", c.load.hotspot_share},
            {"hot_accounts", c.load.hot_accounts},
            {"resubmit_timeout", c.load.resubmit_timeout},
            {"duration_rounds", c.duration_rounds},
            {"drain_rounds", c.drain_rounds},
            {"max_time", c.max_time},
            {"gst", c.net.gst},
            {"delta", c.net.delta},
            {"pre_gst_max_delay", c.net.pre_gst_max_delay},
            {"drop_rate_pre_gst", c.net.drop_rate_pre_gst},
            {"executor", executor_name(c.proto.executor)},
            {"block_capacity", c.proto.block_capacity},
            {"block_interval", c.proto.block_interval},
            {"view_timeout", c.proto.view_timeout},
            {"contracts_per_shard", c.proto.economy.contracts_per_shard},
            {"accounts", c.proto.economy.accounts},
            {"initial_balance", c.proto.economy.initial_balance},
            {"designated_creators", c.designated_creators},
            {"script", script},
            {"faults",
             {{"byzantine", byz},
              {"crashes", crashes},
              {"crash_creators_after_cb", c.faults.crash_creators_after_cb},
              {"allow_threshold_breach", c.faults.allow_threshold_breach}}}};
}

// ---- fault plans ------------------------------------------------------------------

FaultPlan random_fault_plan(MembershipRegistry const& reg, FaultSpec const& spec, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    FaultPlan plan;
    auto const& ordering = reg.ordering();
    std::size_t in_ordering = 0;
    auto const& shards = reg.processing(0);
    std::map<ShardId, std::size_t> per_shard;

    auto shard_of = [&](NodeId n) { return reg.shard_of(n, 0); };
    auto room = [&](NodeId n) {
        if (plan.byzantine.count(n))
            return false;
        if (ordering.contains(n) && in_ordering >= spec.ordering_cap)
            return false;
        if (auto s = shard_of(n); s && per_shard[*s] >= cap_count(spec.max_fraction, reg.config(*s, 0).size()))
            return false;
        return true;
    };
    auto mark = [&](NodeId n, Behavior b) {
        plan.byzantine[n] = b;
        if (ordering.contains(n))
            ++in_ordering;
        if (auto s = shard_of(n))
            ++per_shard[*s];
    };

    if (spec.equivocator)
    {
        std::vector<NodeId> cands(ordering.members.begin(), ordering.members.end());
        std::shuffle(cands.begin(), cands.end(), rng);
        // prefer a proposer outside the processing shards so shard budgets stay intact
        std::stable_partition(cands.begin(), cands.end(), [&](NodeId n) { return !shard_of(n); });
        for (NodeId n : cands)
            if (room(n) && (!shard_of(n) || cap_count(spec.max_fraction, reg.config(*shard_of(n), 0).size()) > 0))
            {
                mark(n, Behavior::equivocate_proposals);
                break;
            }
    }
    for (auto const& cfg : shards)
    {
        std::size_t const cap = cap_count(spec.max_fraction, cfg.size());
        std::size_t const want = static_cast<std::size_t>(rng() % (cap + 1));
        std::vector<NodeId> cands = cfg.members;
        std::shuffle(cands.begin(), cands.end(), rng);
        for (NodeId n : cands)
        {
            if (per_shard[cfg.shard_id] >= want)
                break;
            if (!room(n) || spec.behaviors.empty())
                continue;
            mark(n, spec.behaviors[rng() % spec.behaviors.size()]);
        }
    }
    return plan;
}

std::pair<double, std::size_t> plan_load(MembershipRegistry const& reg, FaultPlan const& plan)
{
    std::set<NodeId> faulty;
    for (auto const& [n, b] : plan.byzantine)
        if (b != Behavior::honest)
            faulty.insert(n);
    for (auto const& [n, t] : plan.crashes)
        faulty.insert(n);
    double worst = 0;
    for (auto const& cfg : reg.processing(0))
    {
        std::size_t c = 0;
        for (NodeId n : cfg.members)
            c += faulty.count(n);
        worst = std::max(worst, static_cast<double>(c) / static_cast<double>(cfg.size()));
    }
    std::size_t ord = 0;
    for (NodeId n : reg.ordering().members)
        ord += faulty.count(n);
    return {worst, ord};
}

// ---- metrics ------------------------------------------------------------------------

Distribution distribution(std::vector<double> v)
{
    Distribution d;
    if (v.empty())
        return d;
    std::sort(v.begin(), v.end());
    d.count = v.size();
    double sum = 0;
    for (double x : v)
        sum += x;
    d.mean = sum / static_cast<double>(v.size());
    auto q = [&](double p) { return v[static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()))) - 1]; };
    d.p50 = q(0.5);
    d.p95 = q(0.95);
    d.max = v.back();
    return d;
}

namespace {

nlohmann::json dist_json(Distribution const& d)
{
    return {{"count", d.count}, {"mean", d.mean}, {"p50", d.p50}, {"p95", d.p95}, {"max", d.max}};
}

} // namespace

nlohmann::json MetricsReport::to_json() const
{
    nlohmann::json rec = nlohmann::json::array();
    for (auto const& p : recoveries)
        rec.push_back({{"shard", p.shard_id},
                       {"added", p.added_nodes},
                       {"new_f_L", p.new_f_L},
                       {"new_f_S", p.new_f_S},
                       {"new_size", p.new_size},
                       {"effective_round", p.effective_round}});
    nlohmann::json js = nlohmann::json::array();
    for (auto const& j : joins)
        js.push_back({{"node", j.node}, {"sid", j.sid}, {"round", j.round}, {"snapshot", j.via_snapshot}, {"t", j.time}});
    nlohmann::json ob = nlohmann::json::array();
    for (auto const& [r, b] : ob_bytes)
        ob.push_back({r, b});
    return {{"name", name},
            {"seed", seed},
            {"executor", executor},
            {"rounds", rounds},
            {"end_time", end_time},
            {"submitted", submitted},
            {"finalized", finalized},
            {"committed", committed},
            {"aborts", aborts},
            {"throughput", throughput},
            {"intra_rounds", dist_json(intra_rounds)},
            {"intra_ticks", dist_json(intra_ticks)},
            {"cross_rounds", dist_json(cross_rounds)},
            {"cross_ticks", dist_json(cross_ticks)},
            {"lock_wait_rounds", dist_json(lock_wait_rounds)},
            {"deferred", deferred},
            {"lock_waited", lock_waited},
            {"recoveries", rec},
            {"joins", js},
            {"ob_bytes", ob},
            {"net_bytes", net_bytes},
            {"messages", messages},
            {"saturated", saturated},
            {"error", error}};
}

// ---- run ------------------------------------------------------------------------------

RunResult run_scenario(ScenarioConfig const& cfg_in, TraceSink* trace_in)
{
    RunResult res;
    res.config = cfg_in;
    ScenarioConfig& cfg = res.config;
    cfg.boot.seed = cfg.seed;
    cfg.net.seed = cfg.seed * 0x100000001B3ull + 7;
    cfg.proto.delta = cfg.net.delta;

    MembershipRegistry reg(cfg.boot);
    ProtocolParams params = cfg.proto;
    params.economy.shards = reg.k();

    if (!cfg.faults.allow_threshold_breach)
    {
        auto [worst, ord] = plan_load(reg, cfg.faults);
        std::size_t const max_ord = cap_count(reg.ordering().f_L, reg.ordering().size());
        bool over = ord > max_ord;
        for (auto const& c : reg.processing(0))
        {
            std::size_t n = 0;
            for (NodeId id : c.members)
                n += cfg.faults.byzantine.count(id) + cfg.faults.crashes.count(id);
            over = over || n > cap_count(c.f_S, c.size());
        }
        if (over)
            throw std::invalid_argument("fault plan exceeds the safety thresholds (set allow_threshold_breach)");
        (void)worst;
    }

    std::set<NodeId> designated;
    if (cfg.designated_creators > 0)
    {
        for (auto const& c : reg.processing(0))
        {
            std::uint32_t taken = 0;
            for (NodeId id : c.members)
                if (!reg.ordering().contains(id) && taken < cfg.designated_creators)
                {
                    designated.insert(id);
                    ++taken;
                }
        }
        params.creators = designated;
        cfg.load.designated_only = true;
    }
    res.designated = designated;

    NullSink null_sink;
    TraceSink& trace = trace_in ? *trace_in : null_sink;
    Observations& obs = res.obs;
    obs.economy = params.economy;
    for (NodeId id = 0; id < cfg.boot.n; ++id)
    {
        auto it = cfg.faults.byzantine.find(id);
        if (it == cfg.faults.byzantine.end() || it->second == Behavior::honest)
            obs.honest.insert(id);
    }
    {
        auto [worst, ord] = plan_load(reg, cfg.faults);
        bool live = ord <= 6 && !cfg.faults.crash_creators_after_cb;
        for (auto const& c : reg.processing(0))
        {
            std::size_t n = 0;
            for (NodeId id : c.members)
                n += (cfg.faults.byzantine.count(id) || cfg.faults.crashes.count(id)) ? 1 : 0;
            live = live && n <= cap_count(cfg.boot.f_L_target, c.size());
        }
        obs.liveness_expected = live && cfg.drain_rounds >= 10;
        (void)worst;
    }
    if (trace.enabled())
        trace.write({{"ev", "scenario"},
                     {"config", to_json(cfg)},
                     {"honest", obs.honest},
                     {"liveness", obs.liveness_expected},
                     {"economy",
                      {{"shards", params.economy.shards},
                       {"contracts_per_shard", params.economy.contracts_per_shard},
                       {"accounts", params.economy.accounts},
                       {"initial_balance", params.economy.initial_balance}}}});

    HarnessObserver observer(obs, trace);
    Simulator sim(cfg.net, trace);
    observer.sim = &sim;
    observer.crash_times = &res.crash_times;
    if (cfg.faults.crash_creators_after_cb)
        observer.crash_on_cb = designated;

    for (NodeId id = 0; id < cfg.boot.n; ++id)
    {
        Behavior b = Behavior::honest;
        if (auto it = cfg.faults.byzantine.find(id); it != cfg.faults.byzantine.end())
            b = it->second;
        sim.add_node(std::make_unique<Node>(id, sim, reg, params, observer, b, cfg.seed));
    }
    for (auto const& [id, t] : cfg.faults.crashes)
    {
        sim.crash(id, t);
        res.crash_times[id] = t;
    }

    auto finalized = [&](TxId id) {
        auto it = observer.finals.find(id);
        if (it == observer.finals.end())
            return false;
        auto s = res.obs.submitted.find(id);
        return s != res.obs.submitted.end() && it->second.size() >= s->second.shards().size();
    };
    Workload load(cfg.load, sim, reg, params, cfg.seed * 31 + 17, finalized);
    load.on_submit = [&](Submission const& s) {
        obs.submitted.emplace(s.tx.id, s.tx);
        if (trace.enabled())
            trace.write({{"t", s.submit}, {"ev", "submit"}, {"tx", hex(to_bytes(s.tx))}});
    };

    Round const target = cfg.duration_rounds + cfg.drain_rounds;
    std::vector<std::size_t> mempool_samples; // load phase only
    observer.on_round = [&](Round r) {
        if (r >= cfg.duration_rounds)
            load.stop();
        if (r > cfg.duration_rounds)
            return;
        std::size_t depth = 0;
        for (NodeId id : obs.honest)
            for (auto const& [sid, rep] : sim.node(id).replicas())
                depth += rep->mempool_size();
        mempool_samples.push_back(depth);
    };

    for (NodeId id = 0; id < cfg.boot.n; ++id)
        sim.schedule(0, [&sim, id] { sim.node(id).start(); });
    load.start();

    Tick const limit = cfg.max_time ? cfg.max_time : (target + 10) * 4000 + 20000;
    try
    {
        sim.run([&] { return observer.max_round >= target; }, limit);
        Tick const grace = sim.now() + 6 * cfg.net.delta;
        sim.run([] { return false; }, grace);
    }
    catch (Unrecoverable const& e)
    {
        res.metrics.error = e.what();
    }

    // ---- collect --------------------------------------------------------------
    for (Epoch e = 0; reg.known(e); ++e)
        res.configs[e] = reg.processing(e);
    for (NodeId id : obs.honest)
        for (auto const& [sid, rep] : sim.node(id).replicas())
        {
            if (rep->synced())
                res.applied[id][sid] = rep->applied();
            if (rep->retire_round())
                res.retired[{id, sid}] = *rep->retire_round();
        }
    res.net = sim.stats();
    res.verdicts = check(obs);

    MetricsReport& m = res.metrics;
    m.name = cfg.name;
    m.seed = cfg.seed;
    m.executor = executor_name(params.executor);
    m.rounds = observer.max_round;
    m.end_time = sim.now();
    m.submitted = load.submissions().size();
    std::vector<double> ir, it, cr, ct, lw;
    for (auto const& [id, sub] : load.submissions())
    {
        TxMetric t;
        t.id = id;
        t.cross = sub.tx.is_cross();
        t.submit = sub.submit;
        t.resubmits = sub.resubmits;
        if (auto o = observer.ordered.find(id); o != observer.ordered.end())
            t.ordered = o->second;
        t.deferred = observer.deferred.count(id) != 0;
        if (auto w = observer.lock_wait.find(id); w != observer.lock_wait.end())
            t.lock_wait = w->second;
        auto f = observer.finals.find(id);
        if (f != observer.finals.end() && f->second.size() >= sub.tx.shards().size())
        {
            Round fr = 0;
            Tick ft = 0;
            for (auto const& [sid, sf] : f->second)
            {
                fr = std::max(fr, sf.round);
                ft = std::max(ft, sf.time);
                if (sf.outcome == Outcome::aborted)
                {
                    t.outcome = Outcome::aborted;
                    t.cause = std::max(t.cause, sf.cause);
                }
            }
            t.final_round = fr;
            t.final_time = ft;
            ++m.finalized;
            if (t.outcome == Outcome::committed)
                ++m.committed;
            else
                ++m.aborts[to_string(t.cause)];
            double const rounds = t.ordered ? static_cast<double>(fr - *t.ordered) : 0.0;
            double const ticks = static_cast<double>(ft - t.submit);
            (t.cross ? cr : ir).push_back(rounds);
            (t.cross ? ct : it).push_back(ticks);
        }
        if (t.deferred)
            ++m.deferred;
        if (t.cross && t.lock_wait)
        {
            lw.push_back(static_cast<double>(*t.lock_wait));
            if (*t.lock_wait > 0)
                ++m.lock_waited;
        }
        res.txs[id] = t;
    }
    m.intra_rounds = distribution(ir);
    m.intra_ticks = distribution(it);
    m.cross_rounds = distribution(cr);
    m.cross_ticks = distribution(ct);
    m.lock_wait_rounds = distribution(lw);
    m.throughput = m.end_time ? 1000.0 * static_cast<double>(m.finalized) / static_cast<double>(m.end_time) : 0;
    m.recoveries = observer.recoveries;
    m.joins = observer.joins;
    for (auto const& [r, b] : observer.ob_bytes)
        m.ob_bytes.push_back({r, b});
    m.net_bytes = res.net.bytes_by_type;
    m.messages = res.net.sent;
    // backlog left after the drain, or a mempool that only grew over the last third of the load phase
    m.saturated = m.finalized < m.submitted;
    if (mempool_samples.size() >= 6)
    {
        std::size_t const from = mempool_samples.size() * 2 / 3;
        bool grows = mempool_samples.back() > mempool_samples[from];
        for (std::size_t i = from + 1; i < mempool_samples.size(); ++i)
            grows = grows && mempool_samples[i] >= mempool_samples[i - 1];
        m.saturated = m.saturated || grows;
    }
    return res;
}

} // namespace coe

#include "coe/checker.hpp"

#include "coe/codec.hpp"

#include <fstream>
#include <stdexcept>

namespace coe {

namespace {

Bytes unhex(std::string const& h)
{
    if (h.size() % 2)
        throw DecodeError("odd hex length");
    Bytes b(h.size() / 2);
    for (std::size_t i = 0; i < b.size(); ++i)
        b[i] = static_cast<std::uint8_t>(std::stoul(h.substr(2 * i, 2), nullptr, 16));
    return b;
}

void note(Verdict& v, nlohmann::json item)
{
    v.ok = false;
    if (v.violations++ < 5)
        v.counterexample.push_back(std::move(item));
}

} // namespace

void Observations::record_apply(NodeId node, LedgerEntry const& e, ShardId sid, Tick t)
{
    SlotKey const key{sid, e.round};
    ledgers[node][key] = canonical_digest(e);
    if (honest.count(node) && !entries.count(key))
    {
        entries.emplace(key, e);
        entry_time.emplace(key, t);
    }
}

void Observations::record_ob(NodeId node, Round r, Digest const& d)
{
    obs[node][r] = d;
}

Observations Observations::from_trace(std::string const& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open trace " + path);
    Observations o;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (line.empty())
            continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": not JSON");
        std::string const ev = j.value("ev", "");
        if (ev == "scenario")
        {
            for (auto const& h : j.at("honest"))
                o.honest.insert(h.get<NodeId>());
            o.liveness_expected = j.at("liveness").get<bool>();
            auto const& e = j.at("economy");
            o.economy.shards = e.at("shards");
            o.economy.contracts_per_shard = e.at("contracts_per_shard");
            o.economy.accounts = e.at("accounts");
            o.economy.initial_balance = e.at("initial_balance");
        }
        else if (ev == "apply")
        {
            NodeId const node = j.at("node");
            SlotKey const key{j.at("sid").get<ShardId>(), j.at("round").get<Round>()};
            o.ledgers[node][key] = Digest::from_hex(j.at("digest"));
            if (j.contains("entry"))
            {
                auto e = from_bytes<LedgerEntry>(unhex(j.at("entry")));
                o.entries.emplace(key, std::move(e));
                o.entry_time.emplace(key, j.at("t").get<Tick>());
            }
        }
        else if (ev == "ob")
            o.obs[j.at("node").get<NodeId>()][j.at("round").get<Round>()] = Digest::from_hex(j.at("digest"));
        else if (ev == "submit")
        {
            auto tx = from_bytes<Transaction>(unhex(j.at("tx")));
            o.submitted.emplace(tx.id, std::move(tx));
        }
        else if (ev == "note")
            o.notes.push_back(j.at("what"));
    }
    return o;
}

std::vector<Verdict> check(Observations const& o)
{
    std::vector<Verdict> out;

    // prefix safety: honest nodes agree on every slot, canonical ledgers have no holes
    {
        Verdict v{"prefix_safety"};
        std::map<SlotKey, std::pair<NodeId, Digest>> first;
        for (auto const& [node, ledger] : o.ledgers)
        {
            if (!o.honest.count(node))
                continue;
            for (auto const& [slot, d] : ledger)
            {
                auto [it, fresh] = first.emplace(slot, std::make_pair(node, d));
                if (!fresh && it->second.second != d)
                    note(v, {{"sid", slot.first},
                             {"round", slot.second},
                             {"node_a", it->second.first},
                             {"node_b", node},
                             {"digest_a", it->second.second.hex()},
                             {"digest_b", d.hex()}});
            }
        }
        std::map<ShardId, Round> last;
        for (auto const& [slot, e] : o.entries)
        {
            Round const expect = last.count(slot.first) ? last[slot.first] + 1 : 1;
            if (slot.second != expect)
                note(v, {{"sid", slot.first}, {"gap_before", slot.second}});
            last[slot.first] = slot.second;
        }
        out.push_back(v);
    }

    // one finalized ordering block per round
    {
        Verdict v{"one_ob_per_round"};
        std::map<Round, std::pair<NodeId, Digest>> first;
        for (auto const& [node, chain] : o.obs)
        {
            if (!o.honest.count(node))
                continue;
            for (auto const& [r, d] : chain)
            {
                auto [it, fresh] = first.emplace(r, std::make_pair(node, d));
                if (!fresh && it->second.second != d)
                    note(v, {{"round", r}, {"node_a", it->second.first}, {"node_b", node}});
            }
        }
        for (auto const& n : o.notes)
            if (n == "ob_conflict")
                note(v, {{"note", n}});
        out.push_back(v);
    }

    // per-shard finalization positions
    struct Final
    {
        Round round;
        std::size_t index;
        Outcome outcome;
    };
    std::map<TxId, std::map<ShardId, Final>> finals;
    Verdict dup{"no_double_finalization"};
    for (auto const& [slot, e] : o.entries)
        for (std::size_t i = 0; i < e.finalized.size(); ++i)
        {
            auto const& ft = e.finalized[i];
            auto [it, fresh] = finals[ft.id].emplace(slot.first, Final{slot.second, i, ft.outcome});
            if (!fresh)
                note(dup, {{"tx", ft.id}, {"sid", slot.first}, {"rounds", {it->second.round, slot.second}}});
        }

    auto shards_of = [&](TxId id) {
        std::set<ShardId> s;
        if (auto it = o.submitted.find(id); it != o.submitted.end())
            for (ShardId x : it->second.shards())
                s.insert(x);
        else
            for (auto const& [sid, f] : finals.at(id))
                s.insert(sid);
        return s;
    };

    // atomicity: every involved shard that finalized agrees on the outcome
    {
        Verdict v{"atomicity"};
        for (auto const& [id, per] : finals)
        {
            if (per.size() < 2 && shards_of(id).size() < 2)
                continue;
            Outcome const first = per.begin()->second.outcome;
            for (auto const& [sid, f] : per)
                if (f.outcome != first)
                {
                    nlohmann::json detail;
                    for (auto const& [s2, f2] : per)
                        detail[std::to_string(s2)] = to_string(f2.outcome);
                    note(v, {{"tx", id}, {"outcomes", detail}});
                    break;
                }
        }
        out.push_back(v);
    }

    // consistency: shared cross-shard transactions finalize in the same relative order
    {
        Verdict v{"consistency"};
        std::map<std::pair<ShardId, ShardId>, std::map<ShardId, std::vector<std::pair<std::pair<Round, std::size_t>, TxId>>>>
            seqs;
        for (auto const& [id, per] : finals)
        {
            if (per.size() < 2)
                continue;
            for (auto a = per.begin(); a != per.end(); ++a)
                for (auto b = std::next(a); b != per.end(); ++b)
                {
                    auto& pair = seqs[{a->first, b->first}];
                    pair[a->first].push_back({{a->second.round, a->second.index}, id});
                    pair[b->first].push_back({{b->second.round, b->second.index}, id});
                }
        }
        for (auto& [pair, per] : seqs)
        {
            auto& sa = per[pair.first];
            auto& sb = per[pair.second];
            std::sort(sa.begin(), sa.end());
            std::sort(sb.begin(), sb.end());
            for (std::size_t i = 0; i < sa.size() && i < sb.size(); ++i)
                if (sa[i].second != sb[i].second)
                {
                    note(v, {{"shards", {pair.first, pair.second}}, {"tx_a", sa[i].second}, {"tx_b", sb[i].second}});
                    break;
                }
        }
        out.push_back(v);
    }
    out.push_back(dup);

    // data availability: replaying the finalized ledgers reproduces every state root
    Verdict replay{"replay"};
    Verdict conservation{"conservation"};
    {
        std::map<ShardId, Balances> state;
        for (auto const& [slot, e] : o.entries)
        {
            auto it = state.find(slot.first);
            if (it == state.end())
                it = state.emplace(slot.first, genesis_balances(o.economy, slot.first)).first;
            Balances& b = it->second;
            for (auto const& ft : e.finalized)
            {
                if (ft.outcome != Outcome::committed)
                    continue;
                Balances trial = b;
                bool ok = true;
                for (auto const& op : ft.ops)
                    ok = ok && apply_op(trial, op);
                if (!ok)
                    note(replay, {{"sid", slot.first}, {"round", slot.second}, {"tx", ft.id}, {"why", "overdraft"}});
                else
                    b = std::move(trial);
            }
            if (state_root_of(b) != e.state_root)
                note(replay, {{"sid", slot.first}, {"round", slot.second}, {"why", "state_root"}});
        }
        for (auto const& [sid, b] : state)
        {
            std::map<ContractId, Amount> totals, expect;
            for (auto const& [k, amt] : b)
                totals[k.contract] += amt;
            for (auto const& [k, amt] : genesis_balances(o.economy, sid))
                expect[k.contract] += amt;
            if (totals != expect)
                note(conservation, {{"sid", sid}});
        }
    }
    out.push_back(replay);
    out.push_back(conservation);

    // liveness: every submitted transaction finalized by all involved shards
    {
        Verdict v{"liveness"};
        if (o.liveness_expected)
        {
            for (auto const& [id, tx] : o.submitted)
            {
                auto it = finals.find(id);
                for (ShardId s : tx.shards())
                    if (it == finals.end() || !it->second.count(s))
                    {
                        note(v, {{"tx", id}, {"sid", s}});
                        break;
                    }
            }
        }
        else
            v.counterexample = "not asserted for this fault plan";
        out.push_back(v);
    }
    return out;
}

bool all_ok(std::vector<Verdict> const& v)
{
    return std::all_of(v.begin(), v.end(), [](Verdict const& x) { return x.ok; });
}

nlohmann::json to_json(std::vector<Verdict> const& v)
{
    nlohmann::json j = nlohmann::json::array();
    for (auto const& x : v)
        j.push_back({{"property", x.property},
                     {"ok", x.ok},
                     {"violations", x.violations},
                     {"counterexample", x.counterexample}});
    return j;
}

} // namespace coe

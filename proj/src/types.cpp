#include "coe/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coe {

bool Digest::is_zero() const
{
    return std::all_of(bytes.begin(), bytes.end(), [](std::uint8_t b) { return b == 0; });
}

std::string Digest::hex() const
{
    static char const* hexd = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (auto b : bytes)
    {
        s.push_back(hexd[b >> 4]);
        s.push_back(hexd[b & 15]);
    }
    return s;
}

std::string Digest::short_hex() const
{
    return hex().substr(0, 8);
}

Digest Digest::from_hex(std::string const& h)
{
    if (h.size() != 64)
        throw std::invalid_argument("digest hex must be 64 chars");
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9')
            return c - '0';
        if (c >= 'a' && c <= 'f')
            return c - 'a' + 10;
        if (c >= 'A' && c <= 'F')
            return c - 'A' + 10;
        throw std::invalid_argument("bad hex digit");
    };
    Digest d;
    for (std::size_t i = 0; i < 32; ++i)
        d.bytes[i] = static_cast<std::uint8_t>(nib(h[2 * i]) * 16 + nib(h[2 * i + 1]));
    return d;
}

std::vector<ShardId> Transaction::shards() const
{
    std::vector<ShardId> s;
    for (auto const& op : sub_ops)
        s.push_back(op.shard);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

std::vector<StateKey> Transaction::keys() const
{
    std::vector<StateKey> k;
    for (auto const& op : sub_ops)
    {
        k.push_back(op.debit_key());
        k.push_back(op.credit_key());
    }
    std::sort(k.begin(), k.end());
    k.erase(std::unique(k.begin(), k.end()), k.end());
    return k;
}

std::vector<SubOperation> Transaction::ops_on(ShardId sid) const
{
    std::vector<SubOperation> out;
    for (auto const& op : sub_ops)
        if (op.shard == sid)
            out.push_back(op);
    return out;
}

bool Transaction::well_formed() const
{
    if (sub_ops.empty())
        return false;
    for (auto const& op : sub_ops)
        if (op.amount <= 0)
            return false;
    auto const s = shards();
    if (kind == TxKind::intra)
        return sub_ops.size() == 1 && s.size() == 1;
    return sub_ops.size() == 2 && s.size() == 2;
}

bool ExecutionBlock::well_formed() const
{
    std::set<TxId> seen;
    for (auto const& t : itxs)
    {
        if (!t.well_formed() || t.is_cross() || t.sub_ops[0].shard != sid || !seen.insert(t.id).second)
            return false;
    }
    for (auto const& t : ctxs)
    {
        if (!t.well_formed() || !t.is_cross() || !seen.insert(t.id).second)
            return false;
        auto s = t.shards();
        if (std::find(s.begin(), s.end(), sid) == s.end())
            return false;
    }
    return true;
}

bool QuorumAttestation::add(Attestation const& a)
{
    for (auto const& s : sigs)
        if (s.signer == a.signer)
            return false;
    sigs.push_back(a);
    return true;
}

std::set<NodeId> QuorumAttestation::valid_signers(std::vector<NodeId> const* members) const
{
    std::set<NodeId> out;
    for (auto const& a : sigs)
    {
        if (!a.valid || a.subject != subject)
            continue;
        if (members && !std::binary_search(members->begin(), members->end(), a.signer))
            continue;
        out.insert(a.signer);
    }
    return out;
}

Aggregator aggregate_vote(Aggregator arg, std::vector<BatchVote> const& votes)
{
    for (auto const& v : votes)
    {
        auto it = arg.vote.find(v.batch);
        if (it == arg.vote.end())
        {
            arg.vote.emplace(v.batch, v.bits);
            continue;
        }
        auto& cur = it->second;
        if (cur.size() != v.bits.size())
            throw std::invalid_argument("vote bit-string length mismatch");
        for (std::size_t i = 0; i < cur.size(); ++i)
            cur[i] = static_cast<std::uint8_t>(cur[i] & v.bits[i]);
    }
    return arg;
}

bool ShardConfig::contains(NodeId id) const
{
    return std::binary_search(members.begin(), members.end(), id);
}

std::size_t quorum_threshold(std::size_t m, double f, ThresholdKind kind)
{
    double const x = (kind == ThresholdKind::ordering ? 2.0 * f : f) * static_cast<double>(m);
    double r = std::round(x);
    double fl = std::fabs(x - r) < 1e-9 ? r : std::floor(x);
    return static_cast<std::size_t>(fl) + 1;
}

std::size_t ShardConfig::quorum() const
{
    return quorum_threshold(members.size(), f_S,
                            role == Role::ordering ? ThresholdKind::ordering : ThresholdKind::processing);
}

bool ShardConfig::regime_ok() const
{
    if (role == Role::ordering)
        return std::fabs(f_S - f_L) < 1e-12 && f_S <= 1.0 / 3.0 + 1e-9;
    return f_S + f_L < 1.0;
}

bool verify_quorum(QuorumAttestation const& att, ShardConfig const& shard, ThresholdKind kind)
{
    return att.valid_signers(&shard.members).size() >= quorum_threshold(shard.members.size(), shard.f_S, kind);
}

bool verify_quorum(QuorumAttestation const& att, ShardConfig const& shard)
{
    return verify_quorum(att, shard,
                         shard.role == Role::ordering ? ThresholdKind::ordering : ThresholdKind::processing);
}

char const* to_string(Outcome o)
{
    return o == Outcome::committed ? "committed" : "aborted";
}

char const* to_string(AbortCause c)
{
    switch (c)
    {
    case AbortCause::none: return "none";
    case AbortCause::execution_failure: return "execution_failure";
    case AbortCause::cascading: return "cascading";
    case AbortCause::duplicate: return "duplicate";
    }
    return "?";
}

} // namespace coe

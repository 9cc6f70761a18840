#include "coe/codec.hpp"

#include <openssl/sha.h>

#include <cstring>

namespace coe {

// ---- Writer / Reader ------------------------------------------------------

void Writer::u32(std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::u64(std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::f64(double v)
{
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
}

void Writer::bytes(Bytes const& b)
{
    u32(static_cast<std::uint32_t>(b.size()));
    raw(b.data(), b.size());
}

void Writer::str(std::string const& s)
{
    u32(static_cast<std::uint32_t>(s.size()));
    raw(reinterpret_cast<std::uint8_t const*>(s.data()), s.size());
}

void Reader::need(std::size_t n) const
{
    if (static_cast<std::size_t>(end_ - p_) < n)
        throw DecodeError("truncated input");
}

std::uint8_t Reader::u8()
{
    need(1);
    return *p_++;
}

std::uint32_t Reader::u32()
{
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(p_[i]) << (8 * i);
    p_ += 4;
    return v;
}

std::uint64_t Reader::u64()
{
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(p_[i]) << (8 * i);
    p_ += 8;
    return v;
}

double Reader::f64()
{
    std::uint64_t bits = u64();
    double v = 0;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

bool Reader::boolean()
{
    std::uint8_t b = u8();
    if (b > 1)
        throw DecodeError("bad bool");
    return b == 1;
}

Bytes Reader::bytes()
{
    std::uint32_t n = u32();
    need(n);
    Bytes b(p_, p_ + n);
    p_ += n;
    return b;
}

std::string Reader::str()
{
    std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<char const*>(p_), n);
    p_ += n;
    return s;
}

Digest Reader::digest()
{
    need(32);
    Digest d;
    std::memcpy(d.bytes.data(), p_, 32);
    p_ += 32;
    return d;
}

std::uint32_t Reader::count(std::size_t min_elem_bytes)
{
    std::uint32_t n = u32();
    if (min_elem_bytes > 0 && static_cast<std::size_t>(end_ - p_) / min_elem_bytes < n)
        throw DecodeError("sequence length exceeds input");
    return n;
}

// ---- helpers --------------------------------------------------------------

namespace {

template <class T, class F> void seq(Writer& w, std::vector<T> const& v, F&& f)
{
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (auto const& x : v)
        f(w, x);
}

template <class T> void seq(Writer& w, std::vector<T> const& v)
{
    seq(w, v, [](Writer& ww, T const& x) { encode(ww, x); });
}

template <class T> std::vector<T> dseq(Reader& r)
{
    std::uint32_t n = r.count();
    std::vector<T> v;
    v.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i)
        v.push_back(decode<T>(r));
    return v;
}

void bits(Writer& w, std::vector<std::uint8_t> const& b)
{
    w.u32(static_cast<std::uint32_t>(b.size()));
    if (w.compressed())
    {
        std::uint8_t acc = 0;
        for (std::size_t i = 0; i < b.size(); ++i)
        {
            if (b[i])
                acc |= static_cast<std::uint8_t>(1u << (i % 8));
            if (i % 8 == 7)
            {
                w.u8(acc);
                acc = 0;
            }
        }
        if (b.size() % 8)
            w.u8(acc);
    }
    else
    {
        for (auto x : b)
            w.u8(x ? 1 : 0);
    }
}

std::vector<std::uint8_t> dbits(Reader& r)
{
    std::uint32_t n = r.count();
    std::vector<std::uint8_t> b(n);
    for (auto& x : b)
    {
        std::uint8_t v = r.u8();
        if (v > 1)
            throw DecodeError("bad bit");
        x = v;
    }
    return b;
}

void ids(Writer& w, std::vector<NodeId> const& v)
{
    seq(w, v, [](Writer& ww, NodeId x) { ww.u32(x); });
}

std::vector<NodeId> dids(Reader& r)
{
    std::uint32_t n = r.count(4);
    std::vector<NodeId> v(n);
    for (auto& x : v)
        x = r.u32();
    return v;
}

} // namespace

// ---- encode ---------------------------------------------------------------

void encode(Writer& w, StateKey const& v)
{
    w.u32(v.contract);
    w.u32(v.account);
}

void encode(Writer& w, SubOperation const& v)
{
    w.u32(v.shard);
    w.u32(v.contract);
    w.u32(v.debit_account);
    w.u32(v.credit_account);
    w.i64(v.amount);
}

void encode(Writer& w, Transaction const& v)
{
    w.u64(v.id);
    w.u8(static_cast<std::uint8_t>(v.kind));
    seq(w, v.sub_ops);
    w.u64(v.submit_time);
}

void encode(Writer& w, ExecutionBlock const& v)
{
    w.u32(v.sid);
    w.u32(v.creator);
    w.u64(v.seq);
    seq(w, v.itxs);
    seq(w, v.ctxs);
}

void encode(Writer& w, Attestation const& v)
{
    w.u32(v.signer);
    w.digest(v.subject);
    w.boolean(v.valid);
}

void encode(Writer& w, QuorumAttestation const& v)
{
    w.digest(v.subject);
    if (w.compressed())
    {
        // aggregate signature + signer bitmap
        static std::uint8_t const agg[96] = {};
        w.raw(agg, sizeof agg);
        w.u32(static_cast<std::uint32_t>(v.sigs.size()));
        for (std::size_t i = 0; i < (v.sigs.size() + 7) / 8; ++i)
            w.u8(0);
        return;
    }
    seq(w, v.sigs);
}

void encode(Writer& w, CtxTxMeta const& v)
{
    w.u64(v.id);
    seq(w, v.keys);
}

void encode(Writer& w, CtxBatchRef const& v)
{
    w.u32(v.dest);
    w.digest(v.batch);
    seq(w, v.txs);
}

namespace {
void encode_body(Writer& w, CertificateBlock const& v)
{
    w.digest(v.eb_digest);
    seq(w, v.ctx_batches);
    w.u32(v.sid);
    w.u32(v.creator);
    w.u64(v.epoch);
}

void encode_body(Writer& w, VoteResult const& v)
{
    w.u64(v.round);
    w.u32(v.sid);
    w.u64(v.epoch);
    seq(w, v.votes);
    seq(w, v.tx_votes);
}

void encode_body(Writer& w, OrderingBlock const& v)
{
    w.u64(v.round);
    seq(w, v.args);
    seq(w, v.eb_digests);
    seq(w, v.ctx_meta);
    seq(w, v.decisions);
    seq(w, v.plans);
    w.u32(v.proposer);
}
} // namespace

void encode(Writer& w, CertificateBlock const& v)
{
    encode_body(w, v);
    encode(w, v.quorum);
}

void encode(Writer& w, BatchVote const& v)
{
    w.digest(v.batch);
    bits(w, v.bits);
}

void encode(Writer& w, TxVote const& v)
{
    w.u64(v.round);
    w.digest(v.batch);
    w.u32(v.index);
    w.u64(v.tx);
    w.u8(v.bit);
}

void encode(Writer& w, VoteResult const& v)
{
    encode_body(w, v);
    encode(w, v.quorum);
}

void encode(Writer& w, Aggregator const& v)
{
    w.u64(v.round);
    w.u32(static_cast<std::uint32_t>(v.vote.size()));
    for (auto const& [d, b] : v.vote)
    {
        w.digest(d);
        bits(w, b);
    }
    w.u32(static_cast<std::uint32_t>(v.pending_shards.size()));
    for (auto s : v.pending_shards)
        w.u32(s);
}

void encode(Writer& w, TxDecision const& v)
{
    w.u64(v.round);
    w.digest(v.batch);
    w.u32(v.index);
    w.u64(v.tx);
    w.boolean(v.commit);
}

void encode(Writer& w, EbRef const& v)
{
    w.u32(v.sid);
    w.digest(v.digest);
    w.u32(v.creator);
    if (w.compressed())
    {
        w.u32(static_cast<std::uint32_t>(v.signers.size()));
        for (std::size_t i = 0; i < (v.signers.size() + 7) / 8; ++i)
            w.u8(0);
        return;
    }
    ids(w, v.signers);
}

void encode(Writer& w, CtxMeta const& v)
{
    w.digest(v.batch);
    w.u32(v.origin);
    w.u32(v.dest);
    w.digest(v.eb_digest);
    seq(w, v.txs);
}

void encode(Writer& w, RecoveryPlan const& v)
{
    w.u32(v.shard_id);
    ids(w, v.added_nodes);
    w.f64(v.new_f_L);
    w.f64(v.new_f_S);
    w.u32(v.new_size);
    w.u64(v.effective_round);
}

void encode(Writer& w, OrderingBlock const& v)
{
    encode_body(w, v);
    encode(w, v.quorum);
}

void encode(Writer& w, ShardConfig const& v)
{
    w.u32(v.shard_id);
    ids(w, v.members);
    w.f64(v.f_S);
    w.f64(v.f_L);
    w.u8(static_cast<std::uint8_t>(v.role));
    w.u32(v.epoch_length);
    w.u64(v.epoch);
}

void encode(Writer& w, FinalizedTx const& v)
{
    w.u64(v.id);
    w.u8(static_cast<std::uint8_t>(v.outcome));
    w.u8(static_cast<std::uint8_t>(v.cause));
    w.boolean(v.cross);
    seq(w, v.ops);
}

void encode(Writer& w, LedgerEntry const& v)
{
    w.u64(v.round);
    seq(w, v.finalized);
    w.digest(v.state_root);
}

// ---- decode ---------------------------------------------------------------

template <> StateKey decode<StateKey>(Reader& r)
{
    StateKey v;
    v.contract = r.u32();
    v.account = r.u32();
    return v;
}

template <> SubOperation decode<SubOperation>(Reader& r)
{
    SubOperation v;
    v.shard = r.u32();
    v.contract = r.u32();
    v.debit_account = r.u32();
    v.credit_account = r.u32();
    v.amount = r.i64();
    return v;
}

template <> Transaction decode<Transaction>(Reader& r)
{
    Transaction v;
    v.id = r.u64();
    std::uint8_t k = r.u8();
    if (k > 1)
        throw DecodeError("bad tx kind");
    v.kind = static_cast<TxKind>(k);
    v.sub_ops = dseq<SubOperation>(r);
    v.submit_time = r.u64();
    return v;
}

template <> ExecutionBlock decode<ExecutionBlock>(Reader& r)
{
    ExecutionBlock v;
    v.sid = r.u32();
    v.creator = r.u32();
    v.seq = r.u64();
    v.itxs = dseq<Transaction>(r);
    v.ctxs = dseq<Transaction>(r);
    return v;
}

template <> Attestation decode<Attestation>(Reader& r)
{
    Attestation v;
    v.signer = r.u32();
    v.subject = r.digest();
    v.valid = r.boolean();
    return v;
}

template <> QuorumAttestation decode<QuorumAttestation>(Reader& r)
{
    QuorumAttestation v;
    v.subject = r.digest();
    v.sigs = dseq<Attestation>(r);
    return v;
}

template <> CtxTxMeta decode<CtxTxMeta>(Reader& r)
{
    CtxTxMeta v;
    v.id = r.u64();
    v.keys = dseq<StateKey>(r);
    return v;
}

template <> CtxBatchRef decode<CtxBatchRef>(Reader& r)
{
    CtxBatchRef v;
    v.dest = r.u32();
    v.batch = r.digest();
    v.txs = dseq<CtxTxMeta>(r);
    return v;
}

template <> CertificateBlock decode<CertificateBlock>(Reader& r)
{
    CertificateBlock v;
    v.eb_digest = r.digest();
    v.ctx_batches = dseq<CtxBatchRef>(r);
    v.sid = r.u32();
    v.creator = r.u32();
    v.epoch = r.u64();
    v.quorum = decode<QuorumAttestation>(r);
    return v;
}

template <> BatchVote decode<BatchVote>(Reader& r)
{
    BatchVote v;
    v.batch = r.digest();
    v.bits = dbits(r);
    return v;
}

template <> TxVote decode<TxVote>(Reader& r)
{
    TxVote v;
    v.round = r.u64();
    v.batch = r.digest();
    v.index = r.u32();
    v.tx = r.u64();
    v.bit = r.u8();
    if (v.bit > 1)
        throw DecodeError("bad bit");
    return v;
}

template <> VoteResult decode<VoteResult>(Reader& r)
{
    VoteResult v;
    v.round = r.u64();
    v.sid = r.u32();
    v.epoch = r.u64();
    v.votes = dseq<BatchVote>(r);
    v.tx_votes = dseq<TxVote>(r);
    v.quorum = decode<QuorumAttestation>(r);
    return v;
}

template <> Aggregator decode<Aggregator>(Reader& r)
{
    Aggregator v;
    v.round = r.u64();
    std::uint32_t n = r.count(36);
    for (std::uint32_t i = 0; i < n; ++i)
    {
        Digest d = r.digest();
        v.vote[d] = dbits(r);
    }
    std::uint32_t p = r.count(4);
    for (std::uint32_t i = 0; i < p; ++i)
        v.pending_shards.insert(r.u32());
    return v;
}

template <> TxDecision decode<TxDecision>(Reader& r)
{
    TxDecision v;
    v.round = r.u64();
    v.batch = r.digest();
    v.index = r.u32();
    v.tx = r.u64();
    v.commit = r.boolean();
    return v;
}

template <> EbRef decode<EbRef>(Reader& r)
{
    EbRef v;
    v.sid = r.u32();
    v.digest = r.digest();
    v.creator = r.u32();
    v.signers = dids(r);
    return v;
}

template <> CtxMeta decode<CtxMeta>(Reader& r)
{
    CtxMeta v;
    v.batch = r.digest();
    v.origin = r.u32();
    v.dest = r.u32();
    v.eb_digest = r.digest();
    v.txs = dseq<CtxTxMeta>(r);
    return v;
}

template <> RecoveryPlan decode<RecoveryPlan>(Reader& r)
{
    RecoveryPlan v;
    v.shard_id = r.u32();
    v.added_nodes = dids(r);
    v.new_f_L = r.f64();
    v.new_f_S = r.f64();
    v.new_size = r.u32();
    v.effective_round = r.u64();
    return v;
}

template <> OrderingBlock decode<OrderingBlock>(Reader& r)
{
    OrderingBlock v;
    v.round = r.u64();
    v.args = dseq<Aggregator>(r);
    v.eb_digests = dseq<EbRef>(r);
    v.ctx_meta = dseq<CtxMeta>(r);
    v.decisions = dseq<TxDecision>(r);
    v.plans = dseq<RecoveryPlan>(r);
    v.proposer = r.u32();
    v.quorum = decode<QuorumAttestation>(r);
    return v;
}

template <> ShardConfig decode<ShardConfig>(Reader& r)
{
    ShardConfig v;
    v.shard_id = r.u32();
    v.members = dids(r);
    v.f_S = r.f64();
    v.f_L = r.f64();
    std::uint8_t role = r.u8();
    if (role > 1)
        throw DecodeError("bad role");
    v.role = static_cast<Role>(role);
    v.epoch_length = r.u32();
    v.epoch = r.u64();
    return v;
}

template <> FinalizedTx decode<FinalizedTx>(Reader& r)
{
    FinalizedTx v;
    std::uint8_t o = 0, c = 0;
    v.id = r.u64();
    o = r.u8();
    c = r.u8();
    if (o > 1 || c > 3)
        throw DecodeError("bad outcome");
    v.outcome = static_cast<Outcome>(o);
    v.cause = static_cast<AbortCause>(c);
    v.cross = r.boolean();
    v.ops = dseq<SubOperation>(r);
    return v;
}

template <> LedgerEntry decode<LedgerEntry>(Reader& r)
{
    LedgerEntry v;
    v.round = r.u64();
    v.finalized = dseq<FinalizedTx>(r);
    v.state_root = r.digest();
    return v;
}

// ---- digests --------------------------------------------------------------

Digest sha256(std::uint8_t const* p, std::size_t n)
{
    Digest d;
    SHA256(p, n, d.bytes.data());
    return d;
}

namespace {
thread_local DigestRegistry* tl_registry = nullptr;

std::uint64_t fnv1a(Bytes const& b)
{
    std::uint64_t h = 1469598103934665603ull;
    for (auto c : b)
    {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}
} // namespace

void DigestRegistry::record(Digest const& d, Bytes const& content)
{
    auto fp = std::make_pair(content.size(), fnv1a(content));
    auto [it, inserted] = seen_.emplace(d, fp);
    if (!inserted && it->second != fp)
        throw DigestCollision("digest collision on " + d.hex());
}

DigestRegistry* DigestRegistry::current()
{
    return tl_registry;
}

DigestRegistry::Scope::Scope(DigestRegistry* r) : prev_(tl_registry)
{
    tl_registry = r;
}

DigestRegistry::Scope::~Scope()
{
    tl_registry = prev_;
}

namespace {
template <class T> Digest body_of(T const& v, std::uint8_t tag)
{
    Writer w;
    w.u8(tag);
    encode_body(w, v);
    Bytes b = w.take();
    Digest d = sha256(b);
    if (auto* reg = DigestRegistry::current())
        reg->record(d, b);
    return d;
}
} // namespace

Digest body_digest(CertificateBlock const& cb)
{
    return body_of(cb, 0xC1);
}

Digest body_digest(VoteResult const& v)
{
    return body_of(v, 0xC2);
}

Digest body_digest(OrderingBlock const& ob)
{
    return body_of(ob, 0xC3);
}

Digest batch_digest(Digest const& eb, ShardId origin, ShardId dest, std::vector<Transaction> const& txs)
{
    Writer w;
    w.u8(0xC4);
    w.digest(eb);
    w.u32(origin);
    w.u32(dest);
    seq(w, txs);
    return sha256(w.data());
}

Digest commit_subject(Digest const& state_root, Digest const& exec, Round round, ShardId sid)
{
    Writer w;
    w.u8(0xC5);
    w.digest(state_root);
    w.digest(exec);
    w.u64(round);
    w.u32(sid);
    return sha256(w.data());
}

// ---- JSON -----------------------------------------------------------------

using nlohmann::json;

void to_json(json& j, Digest const& v)
{
    j = v.hex();
}

void to_json(json& j, StateKey const& v)
{
    j = json::array({v.contract, v.account});
}

void to_json(json& j, SubOperation const& v)
{
    j = json{{"shard", v.shard}, {"contract", v.contract}, {"debit", v.debit_account},
             {"credit", v.credit_account}, {"amount", v.amount}};
}

void to_json(json& j, Transaction const& v)
{
    j = json{{"id", v.id}, {"kind", v.is_cross() ? "cross" : "intra"}, {"sub_ops", v.sub_ops},
             {"submit_time", v.submit_time}};
}

void to_json(json& j, ExecutionBlock const& v)
{
    j = json{{"sid", v.sid}, {"creator", v.creator}, {"seq", v.seq}, {"itxs", v.itxs}, {"ctxs", v.ctxs}};
}

void to_json(json& j, Attestation const& v)
{
    j = json{{"signer", v.signer}, {"subject", v.subject}, {"valid", v.valid}};
}

void to_json(json& j, QuorumAttestation const& v)
{
    json s = json::array();
    for (auto const& a : v.sigs)
        s.push_back(json{{"signer", a.signer}, {"valid", a.valid}});
    j = json{{"subject", v.subject}, {"sigs", s}};
}

void to_json(json& j, CtxTxMeta const& v)
{
    j = json{{"id", v.id}, {"keys", v.keys}};
}

void to_json(json& j, CtxBatchRef const& v)
{
    j = json{{"dest", v.dest}, {"batch", v.batch}, {"txs", v.txs}};
}

void to_json(json& j, CertificateBlock const& v)
{
    j = json{{"eb_digest", v.eb_digest}, {"ctx_batches", v.ctx_batches}, {"sid", v.sid},
             {"creator", v.creator}, {"epoch", v.epoch}, {"quorum", v.quorum}};
}

void to_json(json& j, BatchVote const& v)
{
    std::string b;
    for (auto x : v.bits)
        b.push_back(x ? '1' : '0');
    j = json{{"batch", v.batch}, {"bits", b}};
}

void to_json(json& j, TxVote const& v)
{
    j = json{{"round", v.round}, {"batch", v.batch}, {"index", v.index}, {"tx", v.tx}, {"bit", v.bit}};
}

void to_json(json& j, VoteResult const& v)
{
    j = json{{"round", v.round}, {"sid", v.sid}, {"epoch", v.epoch}, {"votes", v.votes}, {"tx_votes", v.tx_votes},
             {"quorum", v.quorum}};
}

void to_json(json& j, Aggregator const& v)
{
    json votes = json::object();
    for (auto const& [d, b] : v.vote)
    {
        std::string s;
        for (auto x : b)
            s.push_back(x ? '1' : '0');
        votes[d.hex()] = s;
    }
    j = json{{"round", v.round}, {"vote", votes}, {"pending_shards", v.pending_shards}};
}

void to_json(json& j, TxDecision const& v)
{
    j = json{{"round", v.round}, {"batch", v.batch}, {"index", v.index}, {"tx", v.tx}, {"commit", v.commit}};
}

void to_json(json& j, EbRef const& v)
{
    j = json{{"sid", v.sid}, {"digest", v.digest}, {"creator", v.creator}, {"signers", v.signers}};
}

void to_json(json& j, CtxMeta const& v)
{
    j = json{{"batch", v.batch}, {"origin", v.origin}, {"dest", v.dest}, {"eb_digest", v.eb_digest},
             {"txs", v.txs}};
}

void to_json(json& j, RecoveryPlan const& v)
{
    j = json{{"shard_id", v.shard_id}, {"added_nodes", v.added_nodes}, {"new_f_L", v.new_f_L},
             {"new_f_S", v.new_f_S}, {"new_size", v.new_size}, {"effective_round", v.effective_round}};
}

void to_json(json& j, OrderingBlock const& v)
{
    j = json{{"round", v.round}, {"args", v.args}, {"eb_digests", v.eb_digests}, {"ctx_meta", v.ctx_meta},
             {"decisions", v.decisions}, {"plans", v.plans}, {"proposer", v.proposer}, {"quorum", v.quorum}};
}

void to_json(json& j, ShardConfig const& v)
{
    j = json{{"shard_id", v.shard_id}, {"members", v.members}, {"f_S", v.f_S}, {"f_L", v.f_L},
             {"role", v.role == Role::ordering ? "ordering" : "processing"},
             {"epoch_length", v.epoch_length}, {"epoch", v.epoch}};
}

void to_json(json& j, FinalizedTx const& v)
{
    j = json{{"id", v.id}, {"outcome", to_string(v.outcome)}, {"cause", to_string(v.cause)},
             {"cross", v.cross}, {"ops", v.ops}};
}

void to_json(json& j, LedgerEntry const& v)
{
    j = json{{"round", v.round}, {"finalized", v.finalized}, {"state_root", v.state_root}};
}

} // namespace coe

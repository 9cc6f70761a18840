// Canonical byte layout, SHA-256 digests and JSON debug encoding.
//
// Layout: integers little-endian fixed width; bool as one byte; double as its
// IEEE-754 bit pattern (u64); sequences and byte strings prefixed with a u32
// element count; struct fields in declaration order; maps as sorted
// (key, value) sequences. In compressed mode a QuorumAttestation is written as
// a 96-byte aggregate signature plus a signer bitmap, which is what wire sizes
// are measured with.
#pragma once

#include "coe/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace coe {

using Bytes = std::vector<std::uint8_t>;

class DecodeError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class Writer
{
public:
    explicit Writer(bool compressed = false) : compressed_(compressed) {}

    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v);
    void boolean(bool v) { u8(v ? 1 : 0); }
    void raw(std::uint8_t const* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
    void bytes(Bytes const& b);
    void str(std::string const& s);
    void digest(Digest const& d) { raw(d.bytes.data(), d.bytes.size()); }

    bool compressed() const { return compressed_; }
    Bytes const& data() const { return buf_; }
    Bytes take() { return std::move(buf_); }
    std::size_t size() const { return buf_.size(); }

private:
    Bytes buf_;
    bool compressed_;
};

class Reader
{
public:
    explicit Reader(Bytes const& b) : p_(b.data()), end_(b.data() + b.size()) {}
    Reader(std::uint8_t const* p, std::size_t n) : p_(p), end_(p + n) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64();
    bool boolean();
    Bytes bytes();
    std::string str();
    Digest digest();
    std::uint32_t count(std::size_t min_elem_bytes = 1);
    bool done() const { return p_ == end_; }

private:
    void need(std::size_t n) const;
    std::uint8_t const* p_;
    std::uint8_t const* end_;
};

// encode / decode for every protocol type
void encode(Writer& w, StateKey const& v);
void encode(Writer& w, SubOperation const& v);
void encode(Writer& w, Transaction const& v);
void encode(Writer& w, ExecutionBlock const& v);
void encode(Writer& w, Attestation const& v);
void encode(Writer& w, QuorumAttestation const& v);
void encode(Writer& w, CtxTxMeta const& v);
void encode(Writer& w, CtxBatchRef const& v);
void encode(Writer& w, CertificateBlock const& v);
void encode(Writer& w, BatchVote const& v);
void encode(Writer& w, TxVote const& v);
void encode(Writer& w, VoteResult const& v);
void encode(Writer& w, Aggregator const& v);
void encode(Writer& w, TxDecision const& v);
void encode(Writer& w, EbRef const& v);
void encode(Writer& w, CtxMeta const& v);
void encode(Writer& w, RecoveryPlan const& v);
void encode(Writer& w, OrderingBlock const& v);
void encode(Writer& w, ShardConfig const& v);
void encode(Writer& w, FinalizedTx const& v);
void encode(Writer& w, LedgerEntry const& v);

template <class T> T decode(Reader& r);

template <class T> Bytes to_bytes(T const& v, bool compressed = false)
{
    Writer w(compressed);
    encode(w, v);
    return w.take();
}

template <class T> T from_bytes(Bytes const& b)
{
    Reader r(b);
    T v = decode<T>(r);
    if (!r.done())
        throw DecodeError("trailing bytes");
    return v;
}

template <class T> std::size_t wire_size(T const& v)
{
    Writer w(true);
    encode(w, v);
    return w.size();
}

Digest sha256(std::uint8_t const* p, std::size_t n);
inline Digest sha256(Bytes const& b) { return sha256(b.data(), b.size()); }

/// Records digest -> content fingerprint; throws on a mismatch.
class DigestRegistry
{
public:
    void record(Digest const& d, Bytes const& content);
    std::size_t size() const { return seen_.size(); }

    /// Registry used by canonical_digest on this thread (may be null).
    static DigestRegistry* current();

    class Scope
    {
    public:
        explicit Scope(DigestRegistry* r);
        ~Scope();
        Scope(Scope const&) = delete;
        Scope& operator=(Scope const&) = delete;

    private:
        DigestRegistry* prev_;
    };

private:
    std::map<Digest, std::pair<std::size_t, std::uint64_t>> seen_;
};

class DigestCollision : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

template <class T> Digest canonical_digest(T const& v)
{
    Bytes b = to_bytes(v);
    Digest d = sha256(b);
    if (auto* reg = DigestRegistry::current())
        reg->record(d, b);
    return d;
}

/// Digests of the signed part of quorum-carrying objects.
Digest body_digest(CertificateBlock const& cb);
Digest body_digest(VoteResult const& v);
Digest body_digest(OrderingBlock const& ob);
Digest batch_digest(Digest const& eb, ShardId origin, ShardId dest, std::vector<Transaction> const& txs);
/// Digest of (state_root, exec digest, round, sid) covered by COMMIT.
Digest commit_subject(Digest const& state_root, Digest const& exec, Round round, ShardId sid);

// JSON debug encoding
void to_json(nlohmann::json& j, Digest const& v);
void to_json(nlohmann::json& j, StateKey const& v);
void to_json(nlohmann::json& j, SubOperation const& v);
void to_json(nlohmann::json& j, Transaction const& v);
void to_json(nlohmann::json& j, ExecutionBlock const& v);
void to_json(nlohmann::json& j, Attestation const& v);
void to_json(nlohmann::json& j, QuorumAttestation const& v);
void to_json(nlohmann::json& j, CtxTxMeta const& v);
void to_json(nlohmann::json& j, CtxBatchRef const& v);
void to_json(nlohmann::json& j, CertificateBlock const& v);
void to_json(nlohmann::json& j, BatchVote const& v);
void to_json(nlohmann::json& j, TxVote const& v);
void to_json(nlohmann::json& j, VoteResult const& v);
void to_json(nlohmann::json& j, Aggregator const& v);
void to_json(nlohmann::json& j, TxDecision const& v);
void to_json(nlohmann::json& j, EbRef const& v);
void to_json(nlohmann::json& j, CtxMeta const& v);
void to_json(nlohmann::json& j, RecoveryPlan const& v);
void to_json(nlohmann::json& j, OrderingBlock const& v);
void to_json(nlohmann::json& j, ShardConfig const& v);
void to_json(nlohmann::json& j, FinalizedTx const& v);
void to_json(nlohmann::json& j, LedgerEntry const& v);

} // namespace coe

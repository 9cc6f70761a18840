#include "coe/messages.hpp"

#include <stdexcept>

namespace coe {

char const* to_string(MsgType t)
{
    switch (t)
    {
    case MsgType::client_tx: return "client_tx";
    case MsgType::forward_txs: return "forward_txs";
    case MsgType::certify: return "certify";
    case MsgType::certified: return "certified";
    case MsgType::cert_block: return "cert_block";
    case MsgType::cvote: return "cvote";
    case MsgType::vote_result: return "vote_result";
    case MsgType::vote_sync_req: return "vote_sync_req";
    case MsgType::commit: return "commit";
    case MsgType::eb_req: return "eb_req";
    case MsgType::eb_resp: return "eb_resp";
    case MsgType::snap_req: return "snap_req";
    case MsgType::snap_resp: return "snap_resp";
    case MsgType::ob_sync_req: return "ob_sync_req";
    case MsgType::ob_sync_resp: return "ob_sync_resp";
    case MsgType::propose: return "propose";
    case MsgType::prepare: return "prepare";
    case MsgType::prepared: return "prepared";
    case MsgType::ocommit: return "ocommit";
    case MsgType::viewchange: return "viewchange";
    case MsgType::finalized: return "finalized";
    }
    return "?";
}

char const* to_string(Behavior b)
{
    switch (b)
    {
    case Behavior::honest: return "honest";
    case Behavior::withhold_certificates: return "withhold_certificates";
    case Behavior::invalid_attestations: return "invalid_attestations";
    case Behavior::equivocate_proposals: return "equivocate_proposals";
    case Behavior::false_votes: return "false_votes";
    case Behavior::silent: return "silent";
    }
    return "?";
}

Behavior behavior_from_string(std::string const& s)
{
    for (auto b : {Behavior::honest, Behavior::withhold_certificates, Behavior::invalid_attestations,
                   Behavior::equivocate_proposals, Behavior::false_votes, Behavior::silent})
        if (s == to_string(b))
            return b;
    throw std::invalid_argument("unknown behavior '" + s + "'");
}

MsgPtr seal(Message m)
{
    std::size_t n = 24;
    switch (m.type)
    {
    case MsgType::certified:
    case MsgType::cvote:
    case MsgType::commit:
    case MsgType::prepare:
    case MsgType::ocommit:
    case MsgType::viewchange: n += 4 + 32 + 1 + 96; break;
    default: break;
    }
    for (auto const& t : m.txs)
        n += wire_size(t);
    if (m.eb)
        n += wire_size(*m.eb);
    if (m.cb)
        n += wire_size(*m.cb);
    if (m.vr)
        n += wire_size(*m.vr);
    if (m.proposal)
    {
        n += wire_size(m.proposal->ob);
        for (auto const& cb : m.proposal->cbs)
            n += wire_size(cb);
        for (auto const& vr : m.proposal->vrs)
            n += wire_size(vr);
        if (m.proposal->justify)
            n += wire_size(*m.proposal->justify);
    }
    if (m.cert)
        n += wire_size(*m.cert);
    for (auto const& ob : m.obs)
        n += wire_size(*ob);
    if (m.snap)
    {
        n += m.snap->exec.size() + 32 + wire_size(m.snap->commit_cert);
        for (auto const& vr : m.snap->pending_votes)
            n += wire_size(vr);
    }
    m.bytes = n;
    return std::make_shared<Message const>(std::move(m));
}

std::optional<Attestation> attest(NodeContext& ctx, Digest const& subject)
{
    switch (ctx.behavior())
    {
    case Behavior::withhold_certificates:
    case Behavior::silent: return std::nullopt;
    case Behavior::invalid_attestations: return Attestation{ctx.id(), subject, false};
    default: return Attestation{ctx.id(), subject, true};
    }
}

} // namespace coe

// A simulated node: hosts the ordering replica (if any) and its processing
// replicas, keeps the finalized ordering chain and the execution-block store.
#pragma once

#include "coe/ordering.hpp"
#include "coe/processing.hpp"

#include <map>
#include <memory>
#include <random>

namespace coe {

/// What a node needs from the network substrate.
class Transport
{
public:
    virtual ~Transport() = default;
    virtual Tick now() const = 0;
    virtual void send(NodeId from, NodeId to, MsgPtr const& m) = 0;
    virtual void set_timer(NodeId node, Tick delay, TimerTag const& tag) = 0;
};

class Node final : public NodeContext
{
public:
    Node(NodeId id, Transport& net, MembershipRegistry& reg, ProtocolParams const& params, Observer& obs,
         Behavior behavior, std::uint64_t seed);

    /// Creates the genesis replicas and arms periodic timers.
    void start();
    void deliver(Message const& m);
    void timer(TimerTag const& t);

    // NodeContext
    NodeId id() const override { return id_; }
    Tick now() const override { return net_.now(); }
    void send(NodeId to, MsgPtr const& m) override;
    void set_timer(Tick delay, TimerTag const& tag) override;
    MembershipRegistry const& registry() const override { return reg_; }
    ProtocolParams const& params() const override { return params_; }
    Behavior behavior() const override { return behavior_; }
    Observer& observer() override { return obs_; }
    ObPtr ob(Round r) const override;
    Round ob_contiguous() const override { return contiguous_; }
    EbPtr eb(Digest const& d) const override;
    void store_eb(Digest const& d, EbPtr eb) override;
    void request_ob_sync() override;
    void finalize_ob(OrderingBlock ob) override;
    std::uint64_t random(std::uint64_t bound) override;

    OrderingReplica const* ordering() const { return ordering_.get(); }
    ProcessingReplica const* processing(ShardId sid) const;
    std::map<ShardId, std::unique_ptr<ProcessingReplica>> const& replicas() const { return replicas_; }
    std::size_t eb_count() const { return ebs_.size(); }

private:
    bool accept_ob(OrderingBlock const& ob);
    void advance_chain();
    void on_boundary(Round r, OrderingBlock const& ob);
    void fanout(ObPtr const& ob);
    void add_replica(ShardId sid, std::unique_ptr<ProcessingReplica> r);

    NodeId id_;
    Transport& net_;
    MembershipRegistry& reg_;
    ProtocolParams const& params_;
    Observer& obs_;
    Behavior behavior_;
    std::mt19937_64 rng_;

    std::unique_ptr<OrderingReplica> ordering_;
    std::map<ShardId, std::unique_ptr<ProcessingReplica>> replicas_;
    std::map<ShardId, std::uint64_t> generation_;

    std::map<Round, ObPtr> obs_store_;
    Round contiguous_ = 0;
    Tick last_ob_time_ = 0;
    Tick last_sync_ = 0;
    bool sync_sent_ = false;
    std::map<Digest, EbPtr> ebs_;
};

} // namespace coe

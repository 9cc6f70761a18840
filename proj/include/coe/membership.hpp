// Shard formation from hash rankings and the per-epoch membership registry.
#pragma once

#include "coe/sizing.hpp"
#include "coe/types.hpp"

#include <map>
#include <set>
#include <stdexcept>
#include <vector>

namespace coe {

struct BootstrapParams
{
    std::uint32_t n = 50;
    double s = 0.15;
    int lambda = 20;
    double f_L_target = 0.42;
    double epsilon = 0.01;
    double f_ordering = 1.0 / 3.0;
    std::uint32_t epoch_length = 20;
    std::uint64_t seed = 1;
    double recovery_step = 0.05;
};

struct BootstrapSizes
{
    std::uint32_t m_ordering = 0; // m#
    std::uint32_t m_star = 0;
    std::uint32_t k = 0;
    double f_S = 0;
    double f_L = 0;
};

/// m#, m* and k for the parameters; throws sizing::Infeasible.
BootstrapSizes plan_bootstrap(BootstrapParams const& p);

/// Uniform value in [0,1) from hash(seed, tag, epoch, node).
double rank_value(std::uint64_t seed, std::uint32_t tag, Epoch epoch, NodeId node);

class Unrecoverable : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Configurations for every epoch reached so far. Epoch e covers rounds
/// e*L+1 .. (e+1)*L; round 0 is genesis.
class MembershipRegistry
{
public:
    explicit MembershipRegistry(BootstrapParams p);

    BootstrapParams const& params() const { return params_; }
    BootstrapSizes const& sizes() const { return sizes_; }
    std::uint32_t k() const { return sizes_.k; }
    ShardConfig const& ordering() const { return ordering_; }

    Epoch epoch_of(Round r) const { return r == 0 ? 0 : (r - 1) / params_.epoch_length; }
    bool is_boundary(Round r) const { return r > 0 && r % params_.epoch_length == 0; }
    Round first_round(Epoch e) const { return e * params_.epoch_length + 1; }
    Round last_round(Epoch e) const { return (e + 1) * params_.epoch_length; }

    bool known(Epoch e) const { return epochs_.count(e) != 0; }
    Epoch latest() const { return epochs_.rbegin()->first; }
    std::vector<ShardConfig> const& processing(Epoch e) const;
    ShardConfig const& config(ShardId sid, Epoch e) const;
    ShardConfig const& config_for_round(ShardId sid, Round r) const { return config(sid, epoch_of(r)); }
    /// Processing shard of `node` in epoch e, if any.
    std::optional<ShardId> shard_of(NodeId node, Epoch e) const;
    std::vector<NodeId> reserve(Epoch e) const;

    /// Plans for the boundary that closes epoch e, given the distinct CB creators seen.
    std::vector<RecoveryPlan> compute_plans(Epoch e, std::map<ShardId, std::set<NodeId>> const& participation) const;
    /// Plans applied at the end of epoch e (empty if none or not yet advanced).
    bool recovered_after(Epoch e, ShardId sid) const;
    /// Installs epoch e+1 from the plans finalized at the end of epoch e. Idempotent.
    void advance(Epoch e, std::vector<RecoveryPlan> const& plans);

private:
    std::vector<ShardConfig> randomize(Epoch e, std::vector<ShardConfig> const& keep) const;

    BootstrapParams params_;
    BootstrapSizes sizes_;
    ShardConfig ordering_;
    std::map<Epoch, std::vector<ShardConfig>> epochs_;
    std::map<Epoch, std::vector<RecoveryPlan>> plans_;
};

} // namespace coe

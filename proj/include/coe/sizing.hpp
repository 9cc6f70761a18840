// Shard sizing: hypergeometric failure probabilities, minimum shard size,
// liveness/availability arithmetic and the metadata bottleneck estimate.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace coe::sizing {

using Rational = boost::multiprecision::cpp_rational;

/// How n*s is turned into a Byzantine head count B.
enum class ByzRounding { floor, nearest, ceil };

/// First Byzantine count x that counts as a failure for shard size m.
///  ceil:       x >= ceil(m*f)
///  strict:     x >= floor(m*f) + 1
///  above_ceil: x >= ceil(m*f) + 1
enum class TailBound { ceil, strict, above_ceil };

enum class Backend { log_space, exact };

struct SizingParams
{
    std::int64_t n = 0;
    double s = 0.0;
    double f = 0.0;
    int lambda = 1;
    ByzRounding rounding = ByzRounding::floor;
    TailBound tail = TailBound::strict;

    /// Same population, liveness convention (x <= ceil(m*f_L) still live).
    static SizingParams liveness(std::int64_t n, double s, double f_L);
};

struct SizingResult
{
    std::int64_t m_star = 0;
    double pr_fau_at_m_star = 0.0;
    std::int64_t k = 0;
};

class InvalidInput : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

class Infeasible : public std::runtime_error
{
public:
    Infeasible(std::string const& what, double best) : std::runtime_error(what), best_pr(best) {}
    double best_pr;
};

std::int64_t byzantine_count(SizingParams const& p);
std::int64_t tail_lower_bound(std::int64_t m, double f, TailBound tail);

/// Probability that a uniformly sampled shard of size m fails the threshold.
double pr_fau(SizingParams const& p, std::int64_t m, Backend backend = Backend::log_space);
Rational pr_fau_exact(SizingParams const& p, std::int64_t m);
/// log(pr_fau); -inf when the tail is empty.
double log_pr_fau(SizingParams const& p, std::int64_t m);

/// Smallest m (linear scan from 1) with pr_fau(m) <= 2^-lambda.
SizingResult min_shard_size(SizingParams const& p, Backend backend = Backend::log_space);

/// Lower tail, computed independently of pr_fau.
double pr_liveness(SizingParams const& p, std::int64_t m, Backend backend = Backend::log_space);
Rational pr_liveness_exact(SizingParams const& p, std::int64_t m);

struct Availability
{
    double downtime_per_year = 0.0;
    double downtime_per_interval = 0.0;
};
Availability availability_from_liveness(double p, double reconfig_interval_years);

double recovery_cost_expectation(double p, double sync_hours);

/// Metadata-to-payload ratio for k shards (per ordering block).
double bottleneck_ratio(double k, double block_txs, double tx_bytes,
                        double digest_bytes = 32, double sig_bytes = 96);
std::int64_t bottleneck_shards(double block_txs = 5000, double tx_bytes = 512,
                               double digest_bytes = 32, double sig_bytes = 96);

} // namespace coe::sizing

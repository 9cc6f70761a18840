#include "coe/sizing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace coe::sizing {

using boost::multiprecision::cpp_int;

namespace {

constexpr double kSnap = 1e-9;

void validate(SizingParams const& p)
{
    if (p.n < 1)
        throw InvalidInput("n must be >= 1");
    if (!(p.s >= 0.0 && p.s < 1.0))
        throw InvalidInput("s must lie in [0, 1)");
    if (!(p.f > 0.0 && p.f < 1.0))
        throw InvalidInput("f must lie in (0, 1)");
    if (p.lambda < 1)
        throw InvalidInput("lambda must be >= 1");
}

void validate(SizingParams const& p, std::int64_t m)
{
    validate(p);
    if (m < 1 || m > p.n)
        throw InvalidInput("shard size must satisfy 1 <= m <= n");
}

std::int64_t snapped_floor(double x)
{
    double r = std::round(x);
    if (std::fabs(x - r) < kSnap)
        return static_cast<std::int64_t>(r);
    return static_cast<std::int64_t>(std::floor(x));
}

std::int64_t snapped_ceil(double x)
{
    double r = std::round(x);
    if (std::fabs(x - r) < kSnap)
        return static_cast<std::int64_t>(r);
    return static_cast<std::int64_t>(std::ceil(x));
}

long double log_choose(std::int64_t a, std::int64_t b)
{
    return std::lgammal(static_cast<long double>(a) + 1) - std::lgammal(static_cast<long double>(b) + 1)
        - std::lgammal(static_cast<long double>(a - b) + 1);
}

// log of sum_{x=lo}^{hi} C(B,x) C(n-B,m-x) / C(n,m); -inf when empty.
long double log_tail(std::int64_t n, std::int64_t B, std::int64_t m, std::int64_t lo, std::int64_t hi)
{
    lo = std::max<std::int64_t>({lo, 0, m - (n - B)});
    hi = std::min<std::int64_t>({hi, m, B});
    if (lo > hi)
        return -std::numeric_limits<long double>::infinity();
    long double const denom = log_choose(n, m);
    std::vector<long double> terms;
    terms.reserve(static_cast<std::size_t>(hi - lo + 1));
    long double mx = -std::numeric_limits<long double>::infinity();
    for (std::int64_t x = lo; x <= hi; ++x)
    {
        long double t = log_choose(B, x) + log_choose(n - B, m - x) - denom;
        terms.push_back(t);
        mx = std::max(mx, t);
    }
    long double acc = 0;
    for (long double t : terms)
        acc += std::exp(t - mx);
    return mx + std::log(acc);
}

std::vector<cpp_int> binomial_row(std::int64_t a)
{
    std::vector<cpp_int> row(static_cast<std::size_t>(a + 1));
    row[0] = 1;
    for (std::int64_t j = 1; j <= a; ++j)
        row[j] = row[j - 1] * (a - j + 1) / j;
    return row;
}

cpp_int tail_count(std::vector<cpp_int> const& cb, std::vector<cpp_int> const& cnb,
                   std::int64_t n, std::int64_t B, std::int64_t m, std::int64_t lo, std::int64_t hi)
{
    lo = std::max<std::int64_t>({lo, 0, m - (n - B)});
    hi = std::min<std::int64_t>({hi, m, B});
    cpp_int sum = 0;
    for (std::int64_t x = lo; x <= hi; ++x)
        sum += cb[x] * cnb[m - x];
    return sum;
}

double to_double(Rational const& r)
{
    return r.convert_to<double>();
}

} // namespace

SizingParams SizingParams::liveness(std::int64_t n, double s, double f_L)
{
    SizingParams p;
    p.n = n;
    p.s = s;
    p.f = f_L;
    p.tail = TailBound::above_ceil;
    return p;
}

std::int64_t byzantine_count(SizingParams const& p)
{
    double const x = static_cast<double>(p.n) * p.s;
    std::int64_t B = 0;
    switch (p.rounding)
    {
    case ByzRounding::floor: B = snapped_floor(x); break;
    case ByzRounding::nearest: B = static_cast<std::int64_t>(std::floor(x + 0.5 + kSnap)); break;
    case ByzRounding::ceil: B = snapped_ceil(x); break;
    }
    if (B < 0 || B > p.n)
        throw InvalidInput("Byzantine count outside [0, n]");
    return B;
}

std::int64_t tail_lower_bound(std::int64_t m, double f, TailBound tail)
{
    double const x = static_cast<double>(m) * f;
    switch (tail)
    {
    case TailBound::ceil: return snapped_ceil(x);
    case TailBound::strict: return snapped_floor(x) + 1;
    case TailBound::above_ceil: return snapped_ceil(x) + 1;
    }
    return snapped_ceil(x);
}

double log_pr_fau(SizingParams const& p, std::int64_t m)
{
    validate(p, m);
    std::int64_t const B = byzantine_count(p);
    return static_cast<double>(log_tail(p.n, B, m, tail_lower_bound(m, p.f, p.tail), m));
}

double pr_fau(SizingParams const& p, std::int64_t m, Backend backend)
{
    if (backend == Backend::exact)
        return to_double(pr_fau_exact(p, m));
    double const l = log_pr_fau(p, m);
    return std::isinf(l) ? 0.0 : std::exp(l);
}

Rational pr_fau_exact(SizingParams const& p, std::int64_t m)
{
    validate(p, m);
    std::int64_t const B = byzantine_count(p);
    auto const cb = binomial_row(B);
    auto const cnb = binomial_row(p.n - B);
    cpp_int const num = tail_count(cb, cnb, p.n, B, m, tail_lower_bound(m, p.f, p.tail), m);
    cpp_int const den = binomial_row(p.n)[m];
    return Rational(num, den);
}

double pr_liveness(SizingParams const& p, std::int64_t m, Backend backend)
{
    if (backend == Backend::exact)
        return to_double(pr_liveness_exact(p, m));
    validate(p, m);
    std::int64_t const B = byzantine_count(p);
    long double const l = log_tail(p.n, B, m, 0, tail_lower_bound(m, p.f, p.tail) - 1);
    return std::isinf(l) ? 0.0 : static_cast<double>(std::exp(l));
}

Rational pr_liveness_exact(SizingParams const& p, std::int64_t m)
{
    validate(p, m);
    std::int64_t const B = byzantine_count(p);
    auto const cb = binomial_row(B);
    auto const cnb = binomial_row(p.n - B);
    cpp_int const num = tail_count(cb, cnb, p.n, B, m, 0, tail_lower_bound(m, p.f, p.tail) - 1);
    cpp_int const den = binomial_row(p.n)[m];
    return Rational(num, den);
}

SizingResult min_shard_size(SizingParams const& p, Backend backend)
{
    validate(p);
    std::int64_t const B = byzantine_count(p);
    double best = std::numeric_limits<double>::infinity();

    if (backend == Backend::exact)
    {
        auto const cb = binomial_row(B);
        auto const cnb = binomial_row(p.n - B);
        cpp_int cnm = 1;
        cpp_int const scale = cpp_int(1) << p.lambda;
        for (std::int64_t m = 1; m <= p.n; ++m)
        {
            cnm = cnm * (p.n - m + 1) / m;
            cpp_int const num = tail_count(cb, cnb, p.n, B, m, tail_lower_bound(m, p.f, p.tail), m);
            double const pr = to_double(Rational(num, cnm));
            best = std::min(best, pr);
            if (num * scale <= cnm)
                return {m, pr, p.n / m};
        }
    }
    else
    {
        long double const target = -static_cast<long double>(p.lambda) * std::log(2.0L);
        for (std::int64_t m = 1; m <= p.n; ++m)
        {
            long double const l = log_tail(p.n, B, m, tail_lower_bound(m, p.f, p.tail), m);
            double const pr = std::isinf(l) ? 0.0 : static_cast<double>(std::exp(l));
            best = std::min(best, pr);
            if (l <= target)
                return {m, pr, p.n / m};
        }
    }
    throw Infeasible("no shard size up to n reaches 2^-" + std::to_string(p.lambda)
                         + "; smallest pr_fau achieved = " + std::to_string(best),
                     best);
}

Availability availability_from_liveness(double p, double reconfig_interval_years)
{
    if (!(p >= 0.0 && p <= 1.0))
        throw InvalidInput("probability must lie in [0, 1]");
    if (!(reconfig_interval_years > 0.0))
        throw InvalidInput("interval must be positive");
    return {1.0 - p, (1.0 - p) * reconfig_interval_years};
}

double recovery_cost_expectation(double p, double sync_hours)
{
    if (!(p >= 0.0 && p <= 1.0))
        throw InvalidInput("probability must lie in [0, 1]");
    return sync_hours * (1.0 - p);
}

double bottleneck_ratio(double k, double block_txs, double tx_bytes, double digest_bytes, double sig_bytes)
{
    double const meta = (k - 1) / 8 + digest_bytes + digest_bytes * (k - 1) + 8 / k + sig_bytes / k;
    return meta / (digest_bytes * k + block_txs * tx_bytes);
}

std::int64_t bottleneck_shards(double block_txs, double tx_bytes, double digest_bytes, double sig_bytes)
{
    if (block_txs < 0 || tx_bytes < 0 || digest_bytes <= 0 || sig_bytes <= 0)
        throw InvalidInput("sizes must be positive");
    for (std::int64_t k = 1;; ++k)
    {
        double const kk = static_cast<double>(k);
        if (bottleneck_ratio(kk, block_txs, tx_bytes, digest_bytes, sig_bytes) * kk >= 1.0)
            return k;
    }
}

} // namespace coe::sizing

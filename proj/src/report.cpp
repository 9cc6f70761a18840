#include "coe/report.hpp"

#include <fstream>
#include <iomanip>

namespace coe {

namespace {

template <class T>
std::string opt(std::optional<T> const& v)
{
    return v ? std::to_string(*v) : std::string();
}

std::ofstream open(std::filesystem::path const& p)
{
    std::ofstream f(p, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + p.string());
    return f;
}

} // namespace

void write_metrics_csv(std::ostream& out, MetricsReport const& m, bool header)
{
    if (header)
        out << "name,seed,executor,metric,value\n";
    auto row = [&](std::string const& k, auto v) {
        out << m.name << ',' << m.seed << ',' << m.executor << ',' << k << ',' << v << '\n';
    };
    auto dist = [&](std::string const& k, Distribution const& d) {
        row(k + ".count", d.count);
        row(k + ".mean", d.mean);
        row(k + ".p50", d.p50);
        row(k + ".p95", d.p95);
        row(k + ".max", d.max);
    };
    out << std::setprecision(10);
    row("rounds", m.rounds);
    row("end_time", m.end_time);
    row("submitted", m.submitted);
    row("finalized", m.finalized);
    row("committed", m.committed);
    for (auto const& [cause, n] : m.aborts)
        row("aborts." + cause, n);
    row("throughput", m.throughput);
    dist("intra_rounds", m.intra_rounds);
    dist("intra_ticks", m.intra_ticks);
    dist("cross_rounds", m.cross_rounds);
    dist("cross_ticks", m.cross_ticks);
    dist("lock_wait_rounds", m.lock_wait_rounds);
    row("deferred", m.deferred);
    row("lock_waited", m.lock_waited);
    row("recoveries", m.recoveries.size());
    row("joins", m.joins.size());
    for (auto const& [r, b] : m.ob_bytes)
        row("ob_bytes." + std::to_string(r), b);
    for (auto const& [type, b] : m.net_bytes)
        row("net_bytes." + type, b);
    row("messages", m.messages);
    row("saturated", m.saturated ? 1 : 0);
}

void write_txs_csv(std::ostream& out, std::map<TxId, TxMetric> const& txs)
{
    out << "id,cross,submit,ordered,final_round,final_time,outcome,cause,deferred,resubmits,lock_wait\n";
    for (auto const& [id, t] : txs)
        out << id << ',' << (t.cross ? 1 : 0) << ',' << t.submit << ',' << opt(t.ordered) << ','
            << opt(t.final_round) << ',' << opt(t.final_time) << ','
            << (t.final_round ? to_string(t.outcome) : std::string("pending")) << ',' << to_string(t.cause) << ','
            << (t.deferred ? 1 : 0) << ',' << t.resubmits << ',' << opt(t.lock_wait) << '\n';
}

void write_report(std::filesystem::path const& dir, RunResult const& r)
{
    std::filesystem::create_directories(dir);
    {
        auto f = open(dir / "metrics.json");
        f << r.metrics.to_json().dump(2) << '\n';
    }
    {
        auto f = open(dir / "metrics.csv");
        write_metrics_csv(f, r.metrics);
    }
    {
        auto f = open(dir / "txs.csv");
        write_txs_csv(f, r.txs);
    }
    {
        auto f = open(dir / "verdicts.json");
        f << to_json(r.verdicts).dump(2) << '\n';
    }
    {
        auto f = open(dir / "config.json");
        f << to_json(r.config).dump(2) << '\n';
    }
}

} // namespace coe

// coesim: run scenarios, check traces, size shards.
#include "coe/harness.hpp"
#include "coe/report.hpp"
#include "coe/sizing.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace {

nlohmann::json load_json(std::string const& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    return nlohmann::json::parse(in);
}

std::string env_or(char const* name, std::string const& fallback)
{
    char const* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

void print_verdicts(std::vector<coe::Verdict> const& v)
{
    for (auto const& x : v)
    {
        std::cout << (x.ok ? "ok    " : "FAIL  ") << x.property;
        if (!x.ok)
            std::cout << "  " << x.violations << " violation(s) " << x.counterexample.dump();
        std::cout << '\n';
    }
}

int simulate(std::string const& config, std::optional<std::uint64_t> seed, std::string out)
{
    auto cfg = coe::scenario_from_json(load_json(config));
    if (auto s = std::getenv("COESIM_SEED"); s && *s)
        cfg.seed = std::stoull(s);
    if (seed)
        cfg.seed = *seed;
    out = env_or("COESIM_OUT", out);
    std::filesystem::create_directories(out);
    coe::FileSink trace((std::filesystem::path(out) / "trace.jsonl").string());
    auto res = coe::run_scenario(cfg, &trace);
    coe::write_report(out, res);
    auto const& m = res.metrics;
    std::cout << "rounds " << m.rounds << "  submitted " << m.submitted << "  finalized " << m.finalized
              << "  committed " << m.committed << "  throughput " << m.throughput << "/1000 ticks\n";
    std::cout << "intra latency mean " << m.intra_rounds.mean << " rounds, cross latency mean " << m.cross_rounds.mean
              << " rounds\n";
    if (!m.error.empty())
        std::cout << "error: " << m.error << '\n';
    print_verdicts(res.verdicts);
    std::cout << "artifacts in " << out << '\n';
    return coe::all_ok(res.verdicts) && m.error.empty() ? 0 : 1;
}

int check_trace(std::string const& path)
{
    auto v = coe::check(coe::Observations::from_trace(path));
    print_verdicts(v);
    return coe::all_ok(v) ? 0 : 1;
}

int sweep(std::string const& config, std::string const& param, std::vector<double> const& values, std::string out,
          std::optional<std::uint64_t> seed)
{
    auto base = coe::scenario_from_json(load_json(config));
    if (auto s = std::getenv("COESIM_SEED"); s && *s)
        base.seed = std::stoull(s);
    if (seed)
        base.seed = *seed;
    out = env_or("COESIM_OUT", out);
    std::filesystem::create_directories(out);
    std::ofstream csv(std::filesystem::path(out) / "sweep.csv");
    csv << param << ",name,seed,executor,metric,value\n";
    for (double v : values)
    {
        auto cfg = base;
        cfg.name = base.name + "_" + param + "_" + std::to_string(v);
        if (param == "nodes")
            cfg.boot.n = static_cast<std::uint32_t>(v);
        else if (param == "ctx_ratio")
            cfg.load.ctx_ratio = v;
        else if (param == "crash")
        {
            // crash this fraction of every shard's epoch-0 members at tick 0, lowest ids first
            coe::MembershipRegistry reg([&] {
                auto b = cfg.boot;
                b.seed = cfg.seed;
                return b;
            }());
            cfg.faults.crashes.clear();
            for (auto const& sc : reg.processing(0))
            {
                auto const want = static_cast<std::size_t>(v * static_cast<double>(sc.size()));
                for (std::size_t i = 0; i < want && i < sc.members.size(); ++i)
                    cfg.faults.crashes[sc.members[i]] = 0;
            }
            cfg.faults.allow_threshold_breach = true;
        }
        else
            throw std::invalid_argument("unknown sweep parameter " + param);
        auto res = coe::run_scenario(cfg);
        std::ostringstream rows;
        coe::write_metrics_csv(rows, res.metrics, false);
        std::istringstream in(rows.str());
        for (std::string line; std::getline(in, line);)
            csv << v << ',' << line << '\n';
        std::cout << param << '=' << v << "  finalized " << res.metrics.finalized << '/' << res.metrics.submitted
                  << "  throughput " << res.metrics.throughput << "  cross mean " << res.metrics.cross_rounds.mean
                  << (coe::all_ok(res.verdicts) ? "" : "  (property violations)") << '\n';
    }
    return 0;
}

struct SizeArgs
{
    std::int64_t n = 1000;
    double s = 0.25, f_S = 0.57, f_L = 0.42;
    int lambda = 30;
    std::optional<std::int64_t> m;
    std::string mode = "threshold";
    std::string backend = "log";
};

namespace sz = coe::sizing;

std::string pct(double x)
{
    std::ostringstream o;
    o << std::lround(x * 100) << '%';
    return o.str();
}

/// Pr[f_L] as printed in comparison tables: four decimals, or 1-2^-lambda when that close to 1.
std::string pr_cell(double p, int lambda)
{
    if (1.0 - p <= std::ldexp(1.0, -lambda))
        return "1-2^-" + std::to_string(lambda);
    std::ostringstream o;
    o << std::fixed << std::setprecision(4) << p;
    return o.str();
}

void table_row(std::ostream& out, SizeArgs const& a, sz::Backend b)
{
    sz::SizingParams p;
    p.n = a.n;
    p.s = a.s;
    p.f = a.f_S;
    p.lambda = a.lambda;
    auto r = sz::min_shard_size(p, b);
    double const live = sz::pr_liveness(sz::SizingParams::liveness(a.n, a.s, a.f_L), r.m_star, b);
    out << "| " << pct(a.s) << " | " << pct(a.f_S) << " | " << pct(a.f_L) << " | " << r.m_star << " | " << r.k
        << " | " << pr_cell(live, a.lambda) << " |\n";
}

int size_cmd(SizeArgs const& a, bool explicit_params)
{
    auto const b = a.backend == "exact" ? sz::Backend::exact : sz::Backend::log_space;
    if (a.mode == "table")
    {
        std::cout << "| s | f_S | f_L | m* | k | Pr[f_L] |\n|---|---|---|---|---|---|\n";
        if (explicit_params)
        {
            table_row(std::cout, a, b);
            return 0;
        }
        for (auto [s, f_S, f_L] : std::vector<std::tuple<double, double, double>>{{0.25, 1.0 / 3, 1.0 / 3},
                                                                                 {0.33, 0.49, 0.49},
                                                                                 {0.30, 0.49, 0.49},
                                                                                 {0.30, 0.39, 0.30},
                                                                                 {0.25, 0.35, 0.32},
                                                                                 {0.25, 0.57, 0.21},
                                                                                 {0.30, 0.54, 0.45},
                                                                                 {0.25, 0.57, 0.42}})
        {
            SizeArgs row = a;
            row.s = s;
            row.f_S = f_S;
            row.f_L = f_L;
            table_row(std::cout, row, b);
        }
        return 0;
    }
    sz::SizingParams p;
    p.n = a.n;
    p.s = a.s;
    p.f = a.f_S;
    p.lambda = a.lambda;
    nlohmann::json out;
    std::int64_t m = 0;
    if (a.mode == "liveness" && a.m)
    {
        m = *a.m;
        out["m"] = m;
        out["pr_fau"] = sz::pr_fau(p, m, b);
    }
    else
    {
        auto r = sz::min_shard_size(p, b);
        m = r.m_star;
        out["m_star"] = r.m_star;
        out["k"] = r.k;
        out["pr_fau"] = r.pr_fau_at_m_star;
    }
    out["pr_liveness"] = sz::pr_liveness(sz::SizingParams::liveness(a.n, a.s, a.f_L), m, b);
    std::cout << out.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"coesim: sharded ledger simulator"};
    app.require_subcommand(1);

    std::string config, out = "out", trace;
    std::optional<std::uint64_t> seed;

    auto* sim = app.add_subcommand("simulate", "run one scenario");
    sim->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
    sim->add_option("--seed", seed, "override the scenario seed");
    sim->add_option("--out", out, "artifact directory");

    auto* chk = app.add_subcommand("check", "check the properties of a recorded trace");
    chk->add_option("--trace", trace, "trace.jsonl")->required()->check(CLI::ExistingFile);

    SizeArgs sa;
    auto* size = app.add_subcommand("size", "minimum shard size and liveness probability");
    size->add_option("--n", sa.n, "total nodes")->check(CLI::PositiveNumber);
    size->add_option("--s", sa.s, "Byzantine fraction")->check(CLI::Range(0.0, 1.0));
    size->add_option("--lambda", sa.lambda, "security parameter")->check(CLI::Range(1, 200));
    size->add_option("--f-s", sa.f_S, "safety threshold")->check(CLI::Range(0.0, 1.0));
    size->add_option("--f-l", sa.f_L, "liveness threshold")->check(CLI::Range(0.0, 1.0));
    size->add_option("--m", sa.m, "shard size for liveness mode (default: m* for --f-s)");
    size->add_option("--mode", sa.mode)->check(CLI::IsMember({"threshold", "liveness", "table"}));
    size->add_option("--backend", sa.backend)->check(CLI::IsMember({"log", "exact"}));

    double block_txs = 5000, tx_bytes = 512, digest = 32, sig = 96;
    auto* bn = app.add_subcommand("bottleneck", "shard count where metadata matches payload");
    bn->add_option("--block-txs", block_txs);
    bn->add_option("--tx-bytes", tx_bytes);
    bn->add_option("--digest-bytes", digest);
    bn->add_option("--sig-bytes", sig);

    std::string param;
    std::vector<double> values;
    auto* sw = app.add_subcommand("sweep", "run a scenario across parameter values");
    sw->add_option("--config", config)->required()->check(CLI::ExistingFile);
    sw->add_option("--param", param)->required()->check(CLI::IsMember({"nodes", "ctx_ratio", "crash"}));
    sw->add_option("--values", values)->required();
    sw->add_option("--seed", seed);
    sw->add_option("--out", out);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*sim)
            return simulate(config, seed, out);
        if (*chk)
            return check_trace(trace);
        if (*size)
            return size_cmd(sa, size->count("--n") + size->count("--s") + size->count("--f-s") +
                                    size->count("--f-l") + size->count("--lambda") >
                                0);
        if (*bn)
        {
            std::cout << nlohmann::json{{"k_threshold", coe::sizing::bottleneck_shards(block_txs, tx_bytes, digest, sig)}}
                      << '\n';
            return 0;
        }
        if (*sw)
            return sweep(config, param, values, out, seed);
    }
    catch (coe::sizing::Infeasible const& e)
    {
        std::cerr << "infeasible: " << e.what() << " (best " << e.best_pr << ")\n";
        return 2;
    }
    catch (std::exception const& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

// Deterministic discrete-event network: logical clock, seeded delays under a
// partial-synchrony model, crash injection and a JSON-lines trace.
#pragma once

#include "coe/node.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <string>
#include <vector>

namespace coe {

inline constexpr NodeId kClientId = 0xFFFFFFF0u;

struct NetConfig
{
    Tick delta = 100;
    Tick gst = 0;
    Tick pre_gst_max_delay = 1000;
    double drop_rate_pre_gst = 0.05;
    std::uint64_t seed = 1;
};

class TraceSink
{
public:
    virtual ~TraceSink() = default;
    virtual bool enabled() const { return true; }
    virtual void write(nlohmann::json const& line) = 0;
};

class NullSink final : public TraceSink
{
public:
    bool enabled() const override { return false; }
    void write(nlohmann::json const&) override {}
};

class FileSink final : public TraceSink
{
public:
    explicit FileSink(std::string const& path);
    void write(nlohmann::json const& line) override;

private:
    std::ofstream out_;
};

class MemorySink final : public TraceSink
{
public:
    void write(nlohmann::json const& line) override { lines.push_back(line); }
    std::vector<nlohmann::json> lines;
};

struct NetStats
{
    std::uint64_t sent = 0;
    std::uint64_t dropped = 0;
    std::uint64_t bytes = 0;
    std::map<std::string, std::uint64_t> bytes_by_type;
    std::map<std::string, std::uint64_t> count_by_type;
    Tick max_post_gst_delay = 0;
};

class Simulator final : public Transport
{
public:
    Simulator(NetConfig cfg, TraceSink& trace);

    Tick now() const override { return now_; }
    void send(NodeId from, NodeId to, MsgPtr const& m) override;
    void set_timer(NodeId node, Tick delay, TimerTag const& tag) override;

    void add_node(std::unique_ptr<Node> n);
    Node& node(NodeId id) { return *nodes_.at(id); }
    Node const& node(NodeId id) const { return *nodes_.at(id); }
    std::size_t size() const { return nodes_.size(); }

    /// Runs `fn` at absolute time `at` (clients, harness hooks).
    void schedule(Tick at, std::function<void()> fn);
    /// From `at` on the node neither receives nor acts.
    void crash(NodeId id, Tick at);
    bool crashed(NodeId id) const;

    /// Processes one event; false when the queue is empty.
    bool step();
    /// Steps until `stop()` holds, the queue drains or time passes `limit`.
    void run(std::function<bool()> const& stop, Tick limit);

    NetStats const& stats() const { return stats_; }
    TraceSink& trace() { return trace_; }
    std::uint64_t events() const { return seq_; }

private:
    enum class Kind : std::uint8_t { deliver, timer, call, crash };
    struct Event
    {
        Tick at = 0;
        std::uint64_t seq = 0;
        Kind kind = Kind::call;
        NodeId node = 0;
        NodeId from = 0;
        MsgPtr msg;
        TimerTag tag;
        std::function<void()> fn;
    };
    struct Later
    {
        bool operator()(Event const& a, Event const& b) const
        {
            return a.at != b.at ? a.at > b.at : a.seq > b.seq;
        }
    };

    void push(Event e);

    NetConfig cfg_;
    TraceSink& trace_;
    std::mt19937_64 rng_;
    Tick now_ = 0;
    std::uint64_t seq_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::vector<bool> crashed_;
    NetStats stats_;
};

} // namespace coe

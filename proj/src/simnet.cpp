#include "coe/simnet.hpp"

#include <stdexcept>

namespace coe {

FileSink::FileSink(std::string const& path) : out_(path, std::ios::binary | std::ios::trunc)
{
    if (!out_)
        throw std::runtime_error("cannot open trace file " + path);
}

void FileSink::write(nlohmann::json const& line)
{
    out_ << line.dump() << '\n';
}

Simulator::Simulator(NetConfig cfg, TraceSink& trace) : cfg_(cfg), trace_(trace), rng_(cfg.seed)
{
}

void Simulator::add_node(std::unique_ptr<Node> n)
{
    if (n->id() != nodes_.size())
        throw std::invalid_argument("nodes must be added in id order");
    nodes_.push_back(std::move(n));
    crashed_.push_back(false);
}

void Simulator::push(Event e)
{
    e.seq = seq_++;
    queue_.push(std::move(e));
}

void Simulator::send(NodeId from, NodeId to, MsgPtr const& m)
{
    if (to >= nodes_.size())
        return;
    ++stats_.sent;
    stats_.bytes += m->bytes;
    char const* type = to_string(m->type);
    stats_.bytes_by_type[type] += m->bytes;
    stats_.count_by_type[type] += 1;

    Tick delay = 0;
    bool drop = false;
    if (from != to)
    {
        Tick const lo = cfg_.delta / 2;
        if (now_ >= cfg_.gst)
        {
            delay = lo + rng_() % (cfg_.delta - lo + 1);
            stats_.max_post_gst_delay = std::max(stats_.max_post_gst_delay, delay);
        }
        else
        {
            delay = lo + rng_() % (std::max(cfg_.pre_gst_max_delay, lo) - lo + 1);
            drop = std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < cfg_.drop_rate_pre_gst;
        }
    }
    if (trace_.enabled())
        trace_.write({{"t", now_},
                      {"ev", drop ? "drop" : "send"},
                      {"from", from},
                      {"to", to},
                      {"type", type},
                      {"bytes", m->bytes},
                      {"at", now_ + delay}});
    if (drop)
    {
        ++stats_.dropped;
        return;
    }
    Event e;
    e.at = now_ + delay;
    e.kind = Kind::deliver;
    e.node = to;
    e.from = from;
    e.msg = m;
    push(std::move(e));
}

void Simulator::set_timer(NodeId node, Tick delay, TimerTag const& tag)
{
    Event e;
    e.at = now_ + delay;
    e.kind = Kind::timer;
    e.node = node;
    e.tag = tag;
    push(std::move(e));
}

void Simulator::schedule(Tick at, std::function<void()> fn)
{
    Event e;
    e.at = std::max(at, now_);
    e.kind = Kind::call;
    e.fn = std::move(fn);
    push(std::move(e));
}

void Simulator::crash(NodeId id, Tick at)
{
    Event e;
    e.at = std::max(at, now_);
    e.kind = Kind::crash;
    e.node = id;
    push(std::move(e));
}

bool Simulator::crashed(NodeId id) const
{
    return id < crashed_.size() && crashed_[id];
}

bool Simulator::step()
{
    if (queue_.empty())
        return false;
    Event e = queue_.top();
    queue_.pop();
    now_ = e.at;
    switch (e.kind)
    {
    case Kind::deliver:
        if (!crashed_[e.node])
            nodes_[e.node]->deliver(*e.msg);
        break;
    case Kind::timer:
        if (!crashed_[e.node])
            nodes_[e.node]->timer(e.tag);
        break;
    case Kind::call: e.fn(); break;
    case Kind::crash:
        if (!crashed_[e.node])
        {
            crashed_[e.node] = true;
            if (trace_.enabled())
                trace_.write({{"t", now_}, {"ev", "crash"}, {"node", e.node}});
        }
        break;
    }
    return true;
}

void Simulator::run(std::function<bool()> const& stop, Tick limit)
{
    while (!stop())
    {
        if (queue_.empty() || queue_.top().at > limit)
            return;
        step();
    }
}

} // namespace coe

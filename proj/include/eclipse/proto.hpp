// Discv4 message model, bonding bookkeeping and the ping-rate blacklist.
#pragma once

#include <deque>
#include <map>
#include <unordered_map>

#include "eclipse/table.hpp"

namespace eclipse {

inline constexpr Duration kBondExpiry = std::chrono::hours(24);
inline constexpr Duration kReplyTimeout = std::chrono::milliseconds(500);
inline constexpr std::size_t kMaxNeighbors = 16;

enum class MsgKind : std::uint8_t { ping, pong, find_node, neighbors, enr_request, enr_response };

inline const char* to_string(MsgKind k) {
    switch (k) {
        case MsgKind::ping: return "Ping";
        case MsgKind::pong: return "Pong";
        case MsgKind::find_node: return "FindNode";
        case MsgKind::neighbors: return "Neighbors";
        case MsgKind::enr_request: return "ENRRequest";
        case MsgKind::enr_response: return "ENRResponse";
    }
    return "?";
}

struct Message {
    MsgKind kind = MsgKind::ping;
    NodeRecord from;
    Endpoint to;
    std::uint64_t token = 0;          // request id, echoed by the reply
    NodeId target;                    // FindNode
    std::vector<NodeRecord> nodes;    // Neighbors, at most 16
    NodeRecord record;                // ENRResponse

    static Message ping(const NodeRecord& from, Endpoint to, std::uint64_t token) {
        return Message{MsgKind::ping, from, to, token, {}, {}, {}};
    }
    static Message pong(const NodeRecord& from, Endpoint to, std::uint64_t token) {
        return Message{MsgKind::pong, from, to, token, {}, {}, from};
    }
    static Message find_node(const NodeRecord& from, Endpoint to, std::uint64_t token, const NodeId& target) {
        return Message{MsgKind::find_node, from, to, token, target, {}, {}};
    }
    static Message neighbors(const NodeRecord& from, Endpoint to, std::uint64_t token, std::vector<NodeRecord> nodes) {
        if (nodes.size() > kMaxNeighbors) nodes.resize(kMaxNeighbors);
        return Message{MsgKind::neighbors, from, to, token, {}, std::move(nodes), {}};
    }
    static Message enr_request(const NodeRecord& from, Endpoint to, std::uint64_t token) {
        return Message{MsgKind::enr_request, from, to, token, {}, {}, {}};
    }
    static Message enr_response(const NodeRecord& from, Endpoint to, std::uint64_t token) {
        return Message{MsgKind::enr_response, from, to, token, {}, {}, from};
    }
};

// One trace line per message: time from to kind.
inline std::string trace_line(SimTime t, const Message& m) {
    return std::to_string(to_ms(t)) + ' ' + m.from.ip.str() + ':' + std::to_string(m.from.udp_port) + ' ' +
           m.to.ip.str() + ':' + std::to_string(m.to.udp_port) + ' ' + to_string(m.kind);
}

// Endpoint proof state kept per remote id.
class BondBook {
public:
    void mark_pong(const NodeId& id, SimTime now) {
        auto& t = book_[id];
        t.last_pong = now;
        t.has_pong = true;
    }
    void mark_ping(const NodeId& id, SimTime now) {
        auto& t = book_[id];
        t.last_ping = now;
        t.has_ping = true;
    }

    // The remote answered one of our pings recently, so we serve its queries.
    bool bonded(const NodeId& id, SimTime now) const {
        const auto it = book_.find(id);
        return it != book_.end() && it->second.has_pong && now - it->second.last_pong <= kBondExpiry;
    }
    // The remote pinged us recently, so it will serve our queries.
    bool peer_bonded(const NodeId& id, SimTime now) const {
        const auto it = book_.find(id);
        return it != book_.end() && it->second.has_ping && now - it->second.last_ping <= kBondExpiry;
    }
    void clear() { book_.clear(); }

private:
    struct Times {
        SimTime last_pong{};
        SimTime last_ping{};
        bool has_pong = false;
        bool has_ping = false;
    };
    std::unordered_map<NodeId, Times, NodeIdHash> book_;
};

struct BlacklistConfig {
    bool enabled = false;
    int max_pings = 5;
    Duration window = std::chrono::seconds(60);
    Duration base_ban = std::chrono::minutes(1);
    Duration max_ban = std::chrono::hours(24);
};

// More than max_pings in the trailing window bans the sender; each repeat
// doubles the ban up to max_ban.
class PingBlacklist {
public:
    enum class Verdict { accepted, newly_banned, dropped };

    PingBlacklist() = default;
    explicit PingBlacklist(BlacklistConfig cfg) : cfg_(cfg) {}

    const BlacklistConfig& config() const { return cfg_; }
    bool enabled() const { return cfg_.enabled; }

    bool banned(const NodeId& id, SimTime now) const {
        if (!cfg_.enabled) return false;
        const auto it = peers_.find(id);
        return it != peers_.end() && now < it->second.banned_until;
    }

    Verdict on_ping(const NodeId& id, SimTime now) {
        if (!cfg_.enabled) return Verdict::accepted;
        auto& p = peers_[id];
        if (now < p.banned_until) return Verdict::dropped;
        while (!p.pings.empty() && now - p.pings.front() >= cfg_.window) p.pings.pop_front();
        p.pings.push_back(now);
        if (static_cast<int>(p.pings.size()) <= cfg_.max_pings) return Verdict::accepted;
        Duration ban = cfg_.base_ban;
        for (int i = 0; i < p.strikes && ban < cfg_.max_ban; ++i) ban *= 2;
        ban = std::min(ban, cfg_.max_ban);
        ++p.strikes;
        p.banned_until = now + ban;
        p.pings.clear();
        bans_.push_back(Ban{id, now, ban});
        return Verdict::newly_banned;
    }

    struct Ban {
        NodeId id;
        SimTime at;
        Duration length;
    };
    const std::vector<Ban>& bans() const { return bans_; }

private:
    struct Peer {
        std::deque<SimTime> pings;
        SimTime banned_until{};
        int strikes = 0;
    };
    BlacklistConfig cfg_;
    std::unordered_map<NodeId, Peer, NodeIdHash> peers_;
    std::vector<Ban> bans_;
};

// FindNode answer for a modified attacker: its own side's records closest to
// the requested target.
inline std::vector<NodeRecord> attacker_handle_findnode(const ClosestIndex& attacker_set, const NodeId& target) {
    return attacker_set.closest(target, kMaxNeighbors);
}

// FindNode answer for an honest full node.
inline std::vector<NodeRecord> honest_handle_findnode(const DiscoveryTable& table, const NodeId& target) {
    return table.closest(target, kMaxNeighbors);
}

}  // namespace eclipse

// Inbound/outbound slot accounting, the inbound IP throttle and the two dial
// candidate buffers.
#pragma once

#include <deque>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "eclipse/core.hpp"
#include "eclipse/nodedb.hpp"

namespace eclipse {

inline constexpr std::size_t kMaxInbound = 34;
inline constexpr std::size_t kMaxOutbound = 16;
inline constexpr std::size_t kLookupBufferCap = 16;
inline constexpr Duration kInboundThrottle = std::chrono::seconds(30);
inline constexpr Duration kDialHistoryExpiry = std::chrono::seconds(35);
inline constexpr Duration kDialTick = std::chrono::seconds(1);

enum class Direction : std::uint8_t { inbound, outbound };

enum class ConnResult : std::uint8_t {
    accepted,
    slots_full,
    rate_limited,
    duplicate_peer,
    self,
    handshake_mismatch,
    unreachable,
};

inline const char* to_string(ConnResult r) {
    switch (r) {
        case ConnResult::accepted: return "accepted";
        case ConnResult::slots_full: return "slots-full";
        case ConnResult::rate_limited: return "rate-limited";
        case ConnResult::duplicate_peer: return "duplicate-peer";
        case ConnResult::self: return "self";
        case ConnResult::handshake_mismatch: return "handshake-mismatch";
        case ConnResult::unreachable: return "unreachable";
    }
    return "?";
}

struct PeerConnection {
    NodeRecord remote;
    Direction direction = Direction::inbound;
    SimTime established_at{};
    bool attacker_owned = false;
};

// Per-IP attempt throttle. An attempt that passes opens a new window; attempts
// refused inside the window do not extend it.
class InboundThrottle {
public:
    bool admit(Ipv4 ip, SimTime now, Duration window = kInboundThrottle) {
        const auto it = last_.find(ip.value());
        if (it != last_.end() && now - it->second < window) return false;
        last_[ip.value()] = now;
        return true;
    }
    void clear() { last_.clear(); }

private:
    std::unordered_map<std::uint32_t, SimTime> last_;
};

enum class DialSource : std::uint8_t { static_peer, lookup, dns };

struct DialDecision {
    NodeRecord target;
    DialSource source = DialSource::lookup;
};

struct ConnConfig {
    std::size_t max_inbound = kMaxInbound;
    std::size_t max_outbound = kMaxOutbound;
    bool rate_limit = true;
    std::uint32_t network_id = 1;
};

class ConnectionManager {
public:
    ConnectionManager(NodeId self, ConnConfig cfg = {}) : self_(self), cfg_(cfg) {}

    const ConnConfig& config() const { return cfg_; }
    ConnConfig& config() { return cfg_; }
    const NodeId& self_id() const { return self_; }

    std::size_t inbound_count() const { return count(Direction::inbound); }
    std::size_t outbound_count() const { return count(Direction::outbound); }
    bool connected(const NodeId& id) const { return conns_.count(id) != 0; }
    const std::map<NodeId, PeerConnection>& connections() const { return conns_; }

    ConnResult accept_incoming(const NodeRecord& dialer, std::uint32_t dialer_network, SimTime now,
                               bool attacker_flag = false) {
        if (dialer.id == self_) return ConnResult::self;
        if (cfg_.rate_limit && !throttle_.admit(dialer.ip, now)) return ConnResult::rate_limited;
        if (inbound_count() >= cfg_.max_inbound) return ConnResult::slots_full;
        if (connected(dialer.id)) return ConnResult::duplicate_peer;
        if (dialer_network != cfg_.network_id) return ConnResult::handshake_mismatch;
        conns_.emplace(dialer.id, PeerConnection{dialer, Direction::inbound, now, attacker_flag});
        return ConnResult::accepted;
    }

    // Registers an outbound connection after the remote accepted it.
    bool add_outbound(const NodeRecord& remote, SimTime now, bool attacker_flag = false) {
        if (remote.id == self_ || connected(remote.id) || outbound_count() >= cfg_.max_outbound) return false;
        conns_.emplace(remote.id, PeerConnection{remote, Direction::outbound, now, attacker_flag});
        return true;
    }

    bool drop(const NodeId& id) { return conns_.erase(id) != 0; }

    void reset() {
        conns_.clear();
        throttle_.clear();
        lookup_buffer_.clear();
        lookup_seen_.clear();
        dns_buffer_.clear();
        history_.clear();
        dialing_.clear();
    }

    std::size_t get_occupied_incon(const IdSet& attackers) const { return occupied(Direction::inbound, attackers); }
    std::size_t get_occupied_outcon(const IdSet& attackers) const { return occupied(Direction::outbound, attackers); }

    // Static peers.
    void add_static(const NodeRecord& r) { static_.push_back(r); }
    const std::vector<NodeRecord>& static_peers() const { return static_; }

    // Lookup buffer: capacity 16, each id buffered at most once per node life.
    bool offer_lookup(const NodeRecord& r) {
        if (lookup_buffer_.size() >= kLookupBufferCap || r.id == self_) return false;
        if (!lookup_seen_.insert(r.id).second) return false;
        lookup_buffer_.push_back(r);
        return true;
    }
    bool lookup_full() const { return lookup_buffer_.size() >= kLookupBufferCap; }
    const std::deque<NodeRecord>& lookup_buffer() const { return lookup_buffer_; }
    bool lookup_seen(const NodeId& id) const { return lookup_seen_.count(id) != 0; }

    // DNS buffer: unbounded, filled in random order.
    std::size_t fill_dns(std::vector<NodeRecord> records, Rng& rng) {
        std::shuffle(records.begin(), records.end(), rng);
        for (auto& r : records) dns_buffer_.push_back(std::move(r));
        return records.size();
    }
    const std::deque<NodeRecord>& dns_buffer() const { return dns_buffer_; }

    bool dialing(const NodeId& id) const { return dialing_.count(id) != 0; }
    void dial_started(const NodeId& id, SimTime now) {
        dialing_.insert(id);
        history_[id] = now;
    }
    void dial_finished(const NodeId& id) { dialing_.erase(id); }

    // One dial decision. Static peers first; otherwise a fair coin picks a
    // buffer, and an empty pick asks for a refill and falls through to the
    // other buffer.
    template <class RefillLookup, class RefillDns>
    std::optional<DialDecision> dial_step(Rng& rng, SimTime now, RefillLookup&& refill_lookup, RefillDns&& refill_dns) {
        if (outbound_count() + dialing_.size() >= cfg_.max_outbound) return std::nullopt;
        for (const auto& s : static_)
            if (dialable(s, now)) return DialDecision{s, DialSource::static_peer};
        const bool lookup_first = std::bernoulli_distribution(0.5)(rng);
        ++coin_[lookup_first ? 0 : 1];
        for (int attempt = 0; attempt < 2; ++attempt) {
            const bool use_lookup = (attempt == 0) == lookup_first;
            auto& buf = use_lookup ? lookup_buffer_ : dns_buffer_;
            while (!buf.empty()) {
                auto r = buf.front();
                buf.pop_front();
                if (dialable(r, now)) return DialDecision{r, use_lookup ? DialSource::lookup : DialSource::dns};
            }
            if (use_lookup) refill_lookup();
            else refill_dns();
        }
        return std::nullopt;
    }

    // Coin outcomes so far: {lookup, dns}.
    std::array<std::uint64_t, 2> coin_counts() const { return coin_; }

    // time,direction,remote,attacker
    std::string csv_snapshot(SimTime now, const IdSet& attackers) const {
        std::ostringstream out;
        for (const auto& [id, c] : conns_) {
            out << to_ms(now) << ',' << (c.direction == Direction::inbound ? "inbound" : "outbound") << ','
                << id.hex() << ',' << (attackers.count(id) ? 1 : 0) << '\n';
        }
        return out.str();
    }

private:
    std::size_t count(Direction d) const {
        std::size_t n = 0;
        for (const auto& [id, c] : conns_) n += c.direction == d;
        return n;
    }
    std::size_t occupied(Direction d, const IdSet& attackers) const {
        std::size_t n = 0;
        for (const auto& [id, c] : conns_) n += c.direction == d && attackers.count(id);
        return n;
    }
    bool dialable(const NodeRecord& r, SimTime now) const {
        if (r.id == self_ || connected(r.id) || dialing(r.id)) return false;
        const auto it = history_.find(r.id);
        return it == history_.end() || now - it->second >= kDialHistoryExpiry;
    }

    NodeId self_;
    ConnConfig cfg_;
    std::map<NodeId, PeerConnection> conns_;
    InboundThrottle throttle_;
    std::vector<NodeRecord> static_;
    std::deque<NodeRecord> lookup_buffer_;
    IdSet lookup_seen_;
    std::deque<NodeRecord> dns_buffer_;
    std::unordered_map<NodeId, SimTime, NodeIdHash> history_;
    IdSet dialing_;
    std::array<std::uint64_t, 2> coin_{};
};

}  // namespace eclipse

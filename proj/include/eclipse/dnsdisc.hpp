// DNS peer list: crawler scoring, top-N publication, client resolution and
// the list-side defenses.
#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include "json.hpp"

#include "eclipse/nodedb.hpp"

namespace eclipse {

inline constexpr Duration kCrawlInterval = std::chrono::hours(5) + std::chrono::minutes(40);
inline constexpr Duration kCrawlDuration = std::chrono::minutes(30);
inline constexpr Duration kEnrGrantThrottle = std::chrono::minutes(10);
inline constexpr std::size_t kTopNMainnet = 3000;
inline constexpr std::size_t kTopNTestnet = 250;
inline constexpr double kDailyAdvantage = 5.0;

struct DnsEntry {
    NodeRecord record;
    std::int64_t score = 0;
    SimTime last_enr_grant{};
    bool granted = false;
};

struct DnsList {
    std::vector<DnsEntry> entries;   // score descending
    std::size_t top_n = kTopNTestnet;

    std::size_t size() const { return entries.size(); }
    bool contains(const NodeId& id) const {
        return std::any_of(entries.begin(), entries.end(), [&](const DnsEntry& e) { return e.record.id == id; });
    }
    std::int64_t min_score() const { return entries.empty() ? 0 : entries.back().score; }
};

// Scores of every node the crawler knows, keyed (and therefore iterated) in
// id order; that order is the phase-one contact order.
class CrawlerScores {
public:
    const std::map<NodeId, DnsEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    const DnsEntry* find(const NodeId& id) const {
        const auto it = entries_.find(id);
        return it == entries_.end() ? nullptr : &it->second;
    }

    void seed(const DnsEntry& e) { entries_[e.record.id] = e; }

    // Whether a grant to id would pass the throttle right now.
    bool grant_allowed(const NodeId& id, SimTime now) const {
        const auto it = entries_.find(id);
        return it == entries_.end() || !it->second.granted || now - it->second.last_enr_grant >= kEnrGrantThrottle;
    }

    // +1 for a node that answered, at most once per throttle window.
    bool grant(const NodeRecord& rec, SimTime now) {
        auto [it, fresh] = entries_.try_emplace(rec.id, DnsEntry{rec, 0, {}, false});
        auto& e = it->second;
        if (e.granted && now - e.last_enr_grant < kEnrGrantThrottle) return false;
        if (rec.seq >= e.record.seq) e.record = rec;
        ++e.score;
        e.granted = true;
        e.last_enr_grant = now;
        grants_.push_back(Grant{rec.id, now});
        return true;
    }

    // Halving for a node that did not answer. Integer halving never goes
    // negative, so a failure at score <= 1 drops the node below zero.
    void halve(const NodeId& id) {
        const auto it = entries_.find(id);
        if (it == entries_.end()) return;
        auto& s = it->second.score;
        s = s > 1 ? s / 2 : -1;
    }

    std::size_t evict_negative() {
        return std::erase_if(entries_, [](const auto& kv) { return kv.second.score < 0; });
    }

    struct Grant {
        NodeId id;
        SimTime at;
    };
    const std::vector<Grant>& grants() const { return grants_; }

private:
    std::map<NodeId, DnsEntry> entries_;
    std::vector<Grant> grants_;
};

// Merges candidate lists by id (max score wins), drops negative scores, sorts
// by score descending (id ascending on ties) and truncates to top_n.
inline DnsList aggregate_top_n(const std::vector<std::vector<DnsEntry>>& lists, std::size_t top_n) {
    std::map<NodeId, DnsEntry> merged;
    for (const auto& l : lists)
        for (const auto& e : l) {
            auto [it, fresh] = merged.try_emplace(e.record.id, e);
            if (!fresh && e.score > it->second.score) it->second = e;
        }
    DnsList out;
    out.top_n = top_n;
    for (auto& [id, e] : merged)
        if (e.score >= 0) out.entries.push_back(e);
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const DnsEntry& a, const DnsEntry& b) { return a.score > b.score; });
    if (out.entries.size() > top_n) out.entries.resize(top_n);
    return out;
}

inline DnsList aggregate_top_n(const CrawlerScores& scores, std::size_t top_n) {
    std::vector<DnsEntry> all;
    all.reserve(scores.size());
    for (const auto& [id, e] : scores.entries()) all.push_back(e);
    return aggregate_top_n(std::vector<std::vector<DnsEntry>>{all}, top_n);
}

inline std::vector<NodeRecord> client_resolve(const DnsList& list) {
    std::vector<NodeRecord> out;
    out.reserve(list.entries.size());
    for (const auto& e : list.entries) out.push_back(e.record);
    return out;
}

// Days for a net daily advantage to overtake target_score.
inline std::int64_t estimate_fill_time(std::int64_t target_score, double daily_advantage = kDailyAdvantage) {
    if (daily_advantage <= 0) throw std::invalid_argument("daily advantage must be positive");
    if (target_score < 0) throw std::invalid_argument("target score must be non-negative");
    return static_cast<std::int64_t>(std::ceil(static_cast<double>(target_score) / daily_advantage));
}

// Replaces the lowest-scored round(size * rate) entries with the given
// records, each taking the score of the entry it displaces.
inline DnsList poison_lowest(const DnsList& list, double rate, const std::vector<NodeRecord>& attackers) {
    DnsList out = list;
    const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(list.size()) * rate));
    if (n > attackers.size()) throw std::invalid_argument("not enough attacker records to poison the list");
    for (std::size_t i = 0; i < n; ++i) {
        auto& e = out.entries[out.entries.size() - 1 - i];
        e.record = attackers[i];
        e.granted = false;
    }
    return out;
}

struct DnsDefenses {
    bool enabled = false;
    std::size_t per_ip_cap = 2;
    std::size_t report_threshold = 3;
};

// Keeps at most per_ip_cap entries per IP (highest scores first) and drops
// ids with report_threshold or more independent reports.
inline DnsList apply_dns_defenses(const DnsList& list, const DnsDefenses& d,
                                  const std::unordered_map<NodeId, std::size_t, NodeIdHash>& reports = {}) {
    if (!d.enabled) return list;
    DnsList out;
    out.top_n = list.top_n;
    std::unordered_map<std::uint32_t, std::size_t> per_ip;
    auto sorted = list.entries;
    std::stable_sort(sorted.begin(), sorted.end(), [](const DnsEntry& a, const DnsEntry& b) { return a.score > b.score; });
    for (const auto& e : sorted) {
        if (const auto it = reports.find(e.record.id); it != reports.end() && it->second >= d.report_threshold) continue;
        if (per_ip[e.record.ip.value()]++ >= d.per_ip_cap) continue;
        out.entries.push_back(e);
    }
    return out;
}

inline nlohmann::json to_json(const DnsList& list) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& e : list.entries) {
        nodes.push_back({{"id", e.record.id.hex()},
                         {"ip", e.record.ip.str()},
                         {"udp", e.record.udp_port},
                         {"tcp", e.record.tcp_port},
                         {"seq", e.record.seq},
                         {"score", e.score}});
    }
    return {{"top_n", list.top_n}, {"nodes", nodes}};
}

inline DnsList dns_list_from_json(const nlohmann::json& j) {
    DnsList list;
    list.top_n = j.at("top_n").get<std::size_t>();
    for (const auto& n : j.at("nodes")) {
        DnsEntry e;
        e.record.id = NodeId::from_hex(n.at("id").get<std::string>());
        e.record.ip = Ipv4::parse(n.at("ip").get<std::string>());
        e.record.udp_port = n.at("udp").get<std::uint16_t>();
        e.record.tcp_port = n.at("tcp").get<std::uint16_t>();
        e.record.seq = n.value("seq", std::uint64_t{1});
        e.score = n.at("score").get<std::int64_t>();
        list.entries.push_back(e);
    }
    return list;
}

}  // namespace eclipse

// Long-term node store. Survives restarts, has no size cap, expires records by
// last pong and serves the lexicographic random seed query.
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "eclipse/core.hpp"

namespace eclipse {

inline constexpr Duration kPersistInterval = std::chrono::seconds(30);
inline constexpr Duration kPersistMinResidence = std::chrono::minutes(5);
inline constexpr Duration kExpireInterval = std::chrono::hours(1);
inline constexpr Duration kRecordExpiry = std::chrono::hours(24);
inline constexpr std::size_t kDbSeedCount = 30;

struct DbRecord {
    NodeRecord record;
    SimTime last_pong{};
    SimTime first_table_entry_at{};
    std::uint32_t liveness_checks = 0;

    bool operator==(const DbRecord&) const = default;
};

struct DbFillStats {
    std::size_t size = 0;
    double attacker_fraction = 0.0;
};

using IdSet = std::unordered_set<NodeId, NodeIdHash>;

class NodeDatabase {
public:
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    bool contains(const NodeId& id) const { return records_.count(id) != 0; }
    const DbRecord* find(const NodeId& id) const {
        const auto it = records_.find(id);
        return it == records_.end() ? nullptr : &it->second;
    }
    const std::map<NodeId, DbRecord>& records() const { return records_; }

    // Inserts or refreshes a record; returns true when the id is new.
    bool upsert(const DbRecord& rec) {
        auto [it, inserted] = records_.try_emplace(rec.record.id, rec);
        if (!inserted) {
            auto& cur = it->second;
            if (rec.record.seq >= cur.record.seq) cur.record = rec.record;
            cur.last_pong = std::max(cur.last_pong, rec.last_pong);
            cur.liveness_checks = std::max(cur.liveness_checks, rec.liveness_checks);
        }
        return inserted;
    }

    void erase(const NodeId& id) { records_.erase(id); }
    void clear() { records_.clear(); }

    // Absent ids are ignored: a pong alone never creates a record.
    void update_lastpong(const NodeId& id, SimTime now) {
        if (auto it = records_.find(id); it != records_.end()) it->second.last_pong = now;
    }

    // Removes every record whose last pong is more than 24 h old.
    std::size_t expire_cycle(SimTime now) {
        return std::erase_if(records_, [&](const auto& kv) { return now - kv.second.last_pong > kRecordExpiry; });
    }

    // Draws n random ids; each draw selects the first record whose id is >=
    // the draw, wrapping to the smallest id. Duplicate hits are dropped.
    std::vector<NodeRecord> query_seeds(std::size_t n, Rng& rng) const {
        std::vector<NodeRecord> out;
        if (records_.empty()) return out;
        std::unordered_set<NodeId, NodeIdHash> picked;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& rec = seed_for_draw(NodeId::random(rng));
            if (picked.insert(rec.id).second) out.push_back(rec);
        }
        return out;
    }

    // The record a single draw resolves to.
    const NodeRecord& seed_for_draw(const NodeId& draw) const {
        if (records_.empty()) throw std::logic_error("seed query on empty database");
        auto it = records_.lower_bound(draw);
        if (it == records_.end()) it = records_.begin();
        return it->second.record;
    }

    DbFillStats fill_stats(const IdSet& attacker_ids) const {
        DbFillStats s;
        s.size = records_.size();
        if (s.size == 0) return s;
        std::size_t bad = 0;
        for (const auto& [id, rec] : records_) bad += attacker_ids.count(id);
        s.attacker_fraction = static_cast<double>(bad) / static_cast<double>(s.size);
        return s;
    }

    // Sorted record file: hex id, ip, udp, tcp, seq, last_pong_ms, first_entry_ms, checks.
    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write node database file: " + path);
        for (const auto& [id, r] : records_) {
            out << id.hex() << ' ' << r.record.ip.str() << ' ' << r.record.udp_port << ' ' << r.record.tcp_port
                << ' ' << r.record.seq << ' ' << to_ms(r.last_pong) << ' ' << to_ms(r.first_table_entry_at) << ' '
                << r.liveness_checks << '\n';
        }
    }

    static NodeDatabase load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read node database file: " + path);
        NodeDatabase db;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string hex, ip;
            unsigned udp = 0, tcp = 0;
            std::uint64_t seq = 0;
            std::int64_t pong = 0, first = 0;
            std::uint32_t checks = 0;
            if (!(ls >> hex >> ip >> udp >> tcp >> seq >> pong >> first >> checks) || udp > 65535 || tcp > 65535) {
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed node database line");
            }
            DbRecord r;
            r.record = NodeRecord{NodeId::from_hex(hex), Ipv4::parse(ip), static_cast<std::uint16_t>(udp),
                                  static_cast<std::uint16_t>(tcp), seq};
            r.last_pong = SimTime{Duration{pong}};
            r.first_table_entry_at = SimTime{Duration{first}};
            r.liveness_checks = checks;
            db.records_.emplace(r.record.id, r);
        }
        return db;
    }

    bool operator==(const NodeDatabase&) const = default;

private:
    std::map<NodeId, DbRecord> records_;
};

// Copies every table entry that has been resident for more than five minutes
// and passed at least one liveness check. Table must expose for_each_entry.
template <class Table>
std::size_t persist_cycle(NodeDatabase& db, const Table& table, SimTime now) {
    std::size_t added = 0;
    table.for_each_entry([&](const auto& entry) {
        if (now - entry.added_at > kPersistMinResidence && entry.liveness_checks_passed >= 1) {
            DbRecord r;
            r.record = entry.record;
            r.last_pong = entry.last_seen;
            r.first_table_entry_at = entry.added_at;
            r.liveness_checks = entry.liveness_checks_passed;
            if (db.upsert(r)) ++added;
        }
    });
    return added;
}

inline DbFillStats db_fill_stats(const NodeDatabase& db, const IdSet& attacker_ids) {
    return db.fill_stats(attacker_ids);
}

}  // namespace eclipse

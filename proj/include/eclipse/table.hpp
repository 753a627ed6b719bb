// Short-term discovery table: 17 buckets, replacement lists, /24 limits,
// revalidation and the sequential iterative lookup.
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "eclipse/nodedb.hpp"

namespace eclipse {

inline constexpr std::size_t kReplacementCap = 10;
inline constexpr int kBucketSubnetLimit = 2;
inline constexpr int kTableSubnetLimit = 10;
inline constexpr std::size_t kLookupResultSize = 16;
inline constexpr int kRefreshRandomLookups = 3;
inline constexpr Duration kRefreshMin = std::chrono::minutes(15);
inline constexpr Duration kRefreshMax = std::chrono::minutes(30);
inline constexpr Duration kRevalidateMax = std::chrono::seconds(10);

struct BucketEntry {
    NodeRecord record;
    SimTime added_at{};
    SimTime last_seen{};
    std::uint32_t liveness_checks_passed = 0;
};

struct KBucket {
    std::vector<BucketEntry> entries;        // most recently validated first
    std::vector<NodeRecord> replacements;    // newest first
};

enum class AddOutcome { added, bumped, replacement_listed, rejected_ip_limit };

inline const char* to_string(AddOutcome o) {
    switch (o) {
        case AddOutcome::added: return "added";
        case AddOutcome::bumped: return "bumped";
        case AddOutcome::replacement_listed: return "replacement-listed";
        case AddOutcome::rejected_ip_limit: return "rejected(ip-limit)";
    }
    return "?";
}

struct TableConfig {
    bool ip_limits = true;
    int bucket_subnet_limit = kBucketSubnetLimit;
    int table_subnet_limit = kTableSubnetLimit;
    std::size_t replacement_cap = kReplacementCap;
};

class DiscoveryTable {
public:
    explicit DiscoveryTable(NodeId self, TableConfig cfg = {}) : self_(self), cfg_(cfg) {}

    const NodeId& self_id() const { return self_; }
    const TableConfig& config() const { return cfg_; }

    // Bucket k in [1, 17].
    const KBucket& bucket(int k) const { return buckets_.at(static_cast<std::size_t>(k - 1)); }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& b : buckets_) n += b.entries.size();
        return n;
    }

    template <class F>
    void for_each_entry(F&& f) const {
        for (const auto& b : buckets_)
            for (const auto& e : b.entries) f(e);
    }

    const BucketEntry* find(const NodeId& id) const {
        if (id == self_) return nullptr;
        const auto& b = buckets_[slot(id)];
        for (const auto& e : b.entries)
            if (e.record.id == id) return &e;
        return nullptr;
    }
    bool contains(const NodeId& id) const { return find(id) != nullptr; }

    bool in_replacements(const NodeId& id) const {
        if (id == self_) return false;
        const auto& r = buckets_[slot(id)].replacements;
        return std::any_of(r.begin(), r.end(), [&](const NodeRecord& x) { return x.id == id; });
    }

    // initial_checks lets callers mark a node that already proved liveness
    // (an inbound ping whose sender answered our ping-back).
    AddOutcome add_seen_node(const NodeRecord& rec, SimTime now, std::uint32_t initial_checks = 0) {
        if (rec.id == self_) throw std::invalid_argument("self-entry: a node never tables itself");
        if (!rec.valid_endpoint()) throw std::invalid_argument("malformed endpoint in node record");
        const std::size_t bi = slot(rec.id);
        auto& b = buckets_[bi];
        for (std::size_t i = 0; i < b.entries.size(); ++i) {
            if (b.entries[i].record.id != rec.id) continue;
            auto e = b.entries[i];
            e.last_seen = now;
            if (rec.seq > e.record.seq && rec.ip == e.record.ip) e.record = rec;
            b.entries.erase(b.entries.begin() + static_cast<std::ptrdiff_t>(i));
            b.entries.insert(b.entries.begin(), e);
            return AddOutcome::bumped;
        }
        if (b.entries.size() >= static_cast<std::size_t>(kBucketSize)) return add_replacement(bi, rec);
        const bool was_replacement = remove_replacement(bi, rec.id);
        if (!was_replacement && !admit_ip(bi, rec.ip)) return AddOutcome::rejected_ip_limit;
        b.entries.push_back(BucketEntry{rec, now, now, initial_checks});
        return AddOutcome::added;
    }

    // Removes from entries and replacements; returns true if an entry left.
    bool remove(const NodeId& id) {
        if (id == self_) return false;
        const std::size_t bi = slot(id);
        auto& b = buckets_[bi];
        remove_replacement(bi, id, true);
        for (auto it = b.entries.begin(); it != b.entries.end(); ++it) {
            if (it->record.id == id) {
                release_ip(bi, it->record.ip);
                b.entries.erase(it);
                return true;
            }
        }
        return false;
    }

    std::vector<NodeRecord> closest(const NodeId& target, std::size_t n) const {
        std::vector<NodeRecord> all;
        all.reserve(size());
        for_each_entry([&](const BucketEntry& e) { all.push_back(e.record); });
        const auto cmp = [&](const NodeRecord& a, const NodeRecord& b) { return closer_to(target, a.id, b.id); };
        if (all.size() > n) {
            std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), cmp);
            all.resize(n);
        } else {
            std::sort(all.begin(), all.end(), cmp);
        }
        return all;
    }

    // Single nearest entry; a linear scan without allocation.
    const BucketEntry* nearest(const NodeId& target) const {
        const BucketEntry* best = nullptr;
        for_each_entry([&](const BucketEntry& e) {
            if (!best || closer_to(target, e.record.id, best->record.id)) best = &e;
        });
        return best;
    }

    // Last entry of a uniformly chosen non-empty bucket.
    std::optional<NodeRecord> revalidation_candidate(Rng& rng) const {
        std::vector<std::size_t> nonempty;
        for (std::size_t i = 0; i < buckets_.size(); ++i)
            if (!buckets_[i].entries.empty()) nonempty.push_back(i);
        if (nonempty.empty()) return std::nullopt;
        const auto pick = nonempty[std::uniform_int_distribution<std::size_t>(0, nonempty.size() - 1)(rng)];
        return buckets_[pick].entries.back().record;
    }

    void on_revalidation_pong(const NodeId& id, SimTime now, const std::optional<NodeRecord>& fresh = {}) {
        if (id == self_) return;
        auto& b = buckets_[slot(id)];
        for (std::size_t i = 0; i < b.entries.size(); ++i) {
            if (b.entries[i].record.id != id) continue;
            auto e = b.entries[i];
            ++e.liveness_checks_passed;
            e.last_seen = now;
            if (fresh && fresh->seq > e.record.seq && fresh->ip == e.record.ip) e.record = *fresh;
            b.entries.erase(b.entries.begin() + static_cast<std::ptrdiff_t>(i));
            b.entries.insert(b.entries.begin(), e);
            return;
        }
    }

    // Evicts the entry and promotes a random replacement into its place.
    // Returns the promoted record, if any.
    std::optional<NodeRecord> on_revalidation_timeout(const NodeId& id, SimTime now, Rng& rng) {
        if (id == self_) return std::nullopt;
        const std::size_t bi = slot(id);
        auto& b = buckets_[bi];
        const auto it = std::find_if(b.entries.begin(), b.entries.end(),
                                     [&](const BucketEntry& e) { return e.record.id == id; });
        if (it == b.entries.end()) return std::nullopt;
        release_ip(bi, it->record.ip);
        const auto pos = b.entries.erase(it);
        if (b.replacements.empty()) return std::nullopt;
        const auto r = std::uniform_int_distribution<std::size_t>(0, b.replacements.size() - 1)(rng);
        const NodeRecord promoted = b.replacements[r];
        // its subnet slot was already charged when it was listed
        b.replacements.erase(b.replacements.begin() + static_cast<std::ptrdiff_t>(r));
        b.entries.insert(pos, BucketEntry{promoted, now, now, 0});
        return promoted;
    }

    void clear() {
        for (auto& b : buckets_) b = KBucket{};
        for (auto& m : bucket_subnets_) m.clear();
        table_subnets_.clear();
    }

    // Empty string when every structural invariant holds.
    std::string audit() const {
        std::ostringstream err;
        std::unordered_map<std::uint32_t, int> table_count;
        std::unordered_set<NodeId, NodeIdHash> seen;
        std::size_t total = 0;
        for (int k = 1; k <= kBucketCount; ++k) {
            const auto& b = bucket(k);
            if (b.entries.size() > static_cast<std::size_t>(kBucketSize)) err << "bucket " << k << " over capacity; ";
            if (b.replacements.size() > cfg_.replacement_cap) err << "bucket " << k << " replacements over cap; ";
            std::unordered_map<std::uint32_t, int> local;
            for (const auto& e : b.entries) {
                ++total;
                if (!seen.insert(e.record.id).second) err << "duplicate id " << e.record.id.hex() << "; ";
                if (e.record.id == self_) err << "self in table; ";
                else if (bucket_index(self_, e.record.id) != k) err << "entry in wrong bucket; ";
                ++local[subnet_key(e.record.ip).prefix];
                ++table_count[subnet_key(e.record.ip).prefix];
            }
            for (const auto& r : b.replacements)
                if (!seen.insert(r.id).second) err << "duplicate id in replacements; ";
            if (cfg_.ip_limits)
                for (const auto& [s, c] : local)
                    if (c > cfg_.bucket_subnet_limit) err << "bucket " << k << " subnet limit exceeded; ";
        }
        if (total > static_cast<std::size_t>(kTableCapacity)) err << "table over capacity; ";
        if (cfg_.ip_limits)
            for (const auto& [s, c] : table_count)
                if (c > cfg_.table_subnet_limit) err << "table subnet limit exceeded; ";
        return err.str();
    }

    // One line per entry: bucket slot hex-id ip attacker-flag.
    std::string snapshot(const IdSet& attackers = {}) const {
        std::ostringstream out;
        for (int k = 1; k <= kBucketCount; ++k) {
            const auto& b = bucket(k);
            for (std::size_t i = 0; i < b.entries.size(); ++i) {
                const auto& r = b.entries[i].record;
                out << k << ' ' << i << ' ' << r.id.hex() << ' ' << r.ip.str() << ' '
                    << (attackers.count(r.id) ? 1 : 0) << '\n';
            }
        }
        return out.str();
    }

private:
    std::size_t slot(const NodeId& id) const { return static_cast<std::size_t>(bucket_index(self_, id) - 1); }

    bool admit_ip(std::size_t bi, Ipv4 ip) {
        if (!cfg_.ip_limits) return true;
        const auto key = subnet_key(ip).prefix;
        auto& local = bucket_subnets_[bi][key];
        auto& global = table_subnets_[key];
        if (local >= cfg_.bucket_subnet_limit || global >= cfg_.table_subnet_limit) return false;
        ++local;
        ++global;
        return true;
    }

    void release_ip(std::size_t bi, Ipv4 ip) {
        if (!cfg_.ip_limits) return;
        const auto key = subnet_key(ip).prefix;
        if (auto it = bucket_subnets_[bi].find(key); it != bucket_subnets_[bi].end() && --it->second == 0)
            bucket_subnets_[bi].erase(it);
        if (auto it = table_subnets_.find(key); it != table_subnets_.end() && --it->second == 0)
            table_subnets_.erase(it);
    }

    AddOutcome add_replacement(std::size_t bi, const NodeRecord& rec) {
        auto& r = buckets_[bi].replacements;
        if (std::any_of(r.begin(), r.end(), [&](const NodeRecord& x) { return x.id == rec.id; }))
            return AddOutcome::replacement_listed;
        if (!admit_ip(bi, rec.ip)) return AddOutcome::rejected_ip_limit;
        r.insert(r.begin(), rec);
        if (r.size() > cfg_.replacement_cap) {
            release_ip(bi, r.back().ip);
            r.pop_back();
        }
        return AddOutcome::replacement_listed;
    }

    // Drops id from the replacement list. The subnet charge is released only
    // when asked; a promotion keeps it.
    bool remove_replacement(std::size_t bi, const NodeId& id, bool release = false) {
        auto& r = buckets_[bi].replacements;
        const auto it = std::find_if(r.begin(), r.end(), [&](const NodeRecord& x) { return x.id == id; });
        if (it == r.end()) return false;
        if (release) release_ip(bi, it->ip);
        r.erase(it);
        return true;
    }

    NodeId self_;
    TableConfig cfg_;
    std::array<KBucket, kBucketCount> buckets_{};
    std::array<std::unordered_map<std::uint32_t, int>, kBucketCount> bucket_subnets_{};
    std::unordered_map<std::uint32_t, int> table_subnets_;
};

// Share of slots in the last_n highest buckets held by attacker ids, over a
// 16 * last_n slot denominator.
inline double fill_rate(const DiscoveryTable& table, const IdSet& attacker_ids, int last_n) {
    if (last_n < 1 || last_n > kBucketCount) throw std::out_of_range("last_n must be in [1, 17]");
    std::size_t held = 0;
    for (int k = kBucketCount - last_n + 1; k <= kBucketCount; ++k)
        for (const auto& e : table.bucket(k).entries) held += attacker_ids.count(e.record.id);
    return static_cast<double>(held) / static_cast<double>(kBucketSize * last_n);
}

// DB seeds first, bootnodes after. Returns how many landed in buckets.
inline std::size_t load_seed_nodes(DiscoveryTable& table, const NodeDatabase& db,
                                   const std::vector<NodeRecord>& bootnodes, SimTime now, Rng& rng,
                                   std::size_t db_seeds = kDbSeedCount) {
    std::size_t landed = 0;
    auto seeds = db.query_seeds(db_seeds, rng);
    seeds.insert(seeds.end(), bootnodes.begin(), bootnodes.end());
    for (const auto& s : seeds) {
        if (s.id == table.self_id()) continue;
        const auto o = table.add_seen_node(s, now);
        if (o == AddOutcome::added) ++landed;
    }
    return landed;
}

// What the table logic needs from the network. Callbacks may fire later in
// simulated time; an empty optional means the request timed out.
class DiscoveryTransport {
public:
    using NeighborsCallback = std::function<void(std::optional<std::vector<NodeRecord>>)>;
    using PongCallback = std::function<void(std::optional<NodeRecord>)>;

    virtual ~DiscoveryTransport() = default;
    virtual SimTime now() const = 0;
    virtual Rng& rng() = 0;
    virtual void find_node(const NodeRecord& to, const NodeId& target, NeighborsCallback cb) = 0;
    virtual void ping(const NodeRecord& to, PongCallback cb) = 0;
};

// Sequential iterative lookup. Each reply is merged into a 16-entry result
// set ordered by distance; every learned record is offered to the table.
class Lookup : public std::enable_shared_from_this<Lookup> {
public:
    using DoneCallback = std::function<void(const std::vector<NodeRecord>&)>;
    using LearnedCallback = std::function<void(const NodeRecord&)>;

    static std::shared_ptr<Lookup> start(DiscoveryTable& table, DiscoveryTransport& net, const NodeId& target,
                                         DoneCallback done, LearnedCallback learned = {}) {
        auto l = std::shared_ptr<Lookup>(new Lookup(table, net, target, std::move(done), std::move(learned)));
        l->result_ = table.closest(target, kLookupResultSize);
        l->step();
        return l;
    }

    const NodeId& target() const { return target_; }
    const std::vector<NodeRecord>& result() const { return result_; }
    bool finished() const { return finished_; }
    std::size_t queries() const { return asked_.size(); }
    void cancel() { cancelled_ = true; }

private:
    Lookup(DiscoveryTable& t, DiscoveryTransport& n, NodeId target, DoneCallback d, LearnedCallback l)
        : table_(t), net_(n), target_(target), done_(std::move(d)), learned_(std::move(l)) {}

    void step() {
        if (cancelled_) return;
        const NodeRecord* next = nullptr;
        for (const auto& r : result_)
            if (!asked_.count(r.id)) { next = &r; break; }
        if (!next) {
            finished_ = true;
            if (done_) done_(result_);
            return;
        }
        const NodeRecord to = *next;
        asked_.insert(to.id);
        auto self = shared_from_this();
        net_.find_node(to, target_, [self](std::optional<std::vector<NodeRecord>> reply) {
            if (self->cancelled_) return;
            if (reply) self->merge(*reply);
            self->step();
        });
    }

    void merge(const std::vector<NodeRecord>& reply) {
        const auto now = net_.now();
        for (std::size_t i = 0; i < reply.size() && i < kLookupResultSize; ++i) {
            const auto& r = reply[i];
            if (r.id == table_.self_id() || !r.valid_endpoint()) continue;
            table_.add_seen_node(r, now);
            if (learned_) learned_(r);
            if (std::any_of(result_.begin(), result_.end(), [&](const NodeRecord& x) { return x.id == r.id; }))
                continue;
            result_.push_back(r);
        }
        sort_by_distance(result_, target_);
        if (result_.size() > kLookupResultSize) result_.resize(kLookupResultSize);
    }

    DiscoveryTable& table_;
    DiscoveryTransport& net_;
    NodeId target_;
    DoneCallback done_;
    LearnedCallback learned_;
    std::vector<NodeRecord> result_;
    IdSet asked_;
    bool finished_ = false;
    bool cancelled_ = false;
};

// Runs lookups for the given targets one after another.
inline void run_lookup_chain(DiscoveryTable& table, DiscoveryTransport& net, std::vector<NodeId> targets,
                             std::function<void()> done, std::function<void(std::shared_ptr<Lookup>)> track = {}) {
    if (targets.empty()) {
        if (done) done();
        return;
    }
    const NodeId first = targets.front();
    targets.erase(targets.begin());
    auto l = Lookup::start(table, net, first,
                           [&table, &net, rest = std::move(targets), done, track](const std::vector<NodeRecord>&) mutable {
                               run_lookup_chain(table, net, std::move(rest), std::move(done), std::move(track));
                           });
    if (track) track(l);
}

// Seeds, then a self lookup and `random_lookups` random ones.
inline void do_refresh(DiscoveryTable& table, const NodeDatabase& db, const std::vector<NodeRecord>& bootnodes,
                       DiscoveryTransport& net, int random_lookups = kRefreshRandomLookups,
                       std::function<void()> done = {}, std::function<void(std::shared_ptr<Lookup>)> track = {}) {
    load_seed_nodes(table, db, bootnodes, net.now(), net.rng());
    std::vector<NodeId> targets{table.self_id()};
    for (int i = 0; i < random_lookups; ++i) targets.push_back(NodeId::random(net.rng()));
    run_lookup_chain(table, net, std::move(targets), std::move(done), std::move(track));
}

// Pings the last entry of a random non-empty bucket and applies the outcome.
inline void do_revalidate(DiscoveryTable& table, DiscoveryTransport& net, std::function<void()> done = {}) {
    const auto cand = table.revalidation_candidate(net.rng());
    if (!cand) {
        if (done) done();
        return;
    }
    const NodeId id = cand->id;
    net.ping(*cand, [&table, &net, id, done](std::optional<NodeRecord> pong) {
        if (pong) table.on_revalidation_pong(id, net.now(), pong);
        else table.on_revalidation_timeout(id, net.now(), net.rng());
        if (done) done();
    });
}

}  // namespace eclipse

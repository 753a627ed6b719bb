// Scenario profiles and world construction: the honest population, its
// free-slot shape, the target, the crawler and the published DNS list.
#pragma once

#include <fstream>
#include <numeric>

#include "json.hpp"

#include "eclipse/world.hpp"

namespace eclipse {

struct SlotBin {
    std::uint32_t lo = 1;
    std::uint32_t hi = 10;
    double fraction = 0;
    std::string label() const { return hi == 0 ? std::to_string(lo) + "+" : std::to_string(lo) + "-" + std::to_string(hi); }
};

// Free inbound slot distribution among nodes that have any.
inline std::vector<SlotBin> sepolia_slot_histogram() {
    return {{1, 10, 0.801}, {11, 50, 0.166}, {51, 99, 0.014}, {100, 300, 0.019}};
}
inline std::vector<SlotBin> mainnet_slot_histogram() {
    return {{1, 10, 0.627}, {11, 50, 0.098}, {51, 99, 0.049}, {100, 300, 0.225}};
}

// Points of the published score distribution: score at each rank quantile,
// quantile 0 being the lowest-ranked entry.
inline constexpr std::array<double, 5> kDnsScoreQuantiles{275, 325, 506, 831, 2688};

struct ScenarioProfile {
    std::string name = "sepolia";
    std::uint32_t network_id = kTargetNetwork;
    std::size_t network_nodes = 1268;     // honest nodes on the target's network
    std::size_t foreign_nodes = 8732;     // discv4 nodes of other networks
    std::size_t free_slot_nodes = 321;    // network nodes accepting inbound peers
    std::vector<SlotBin> slot_histogram = sepolia_slot_histogram();
    ChurnModel churn{true};
    std::size_t bootnodes = 4;
    std::size_t dns_top_n = kTopNTestnet;
    std::vector<double> dns_score_quantiles{kDnsScoreQuantiles.begin(), kDnsScoreQuantiles.end()};
    double dns_poison_rate = 0;
    std::size_t db_benign_seeds = 250;
    double db_fill_rate = 0;
    bool ping_blacklist = false;
    bool rate_limit = true;
    DnsDefenses dns_defenses;
    LatencyModel latency;
    bool with_crawler = false;
    Duration dial_tick = kDialTick;
    Duration restart_downtime = std::chrono::seconds(60);
    double time_budget_h = 24;
    int trials = 20;
    std::uint64_t base_seed = 1;

    void validate() const {
        double sum = 0;
        for (const auto& b : slot_histogram) {
            if (b.fraction < 0 || b.lo == 0 || (b.hi != 0 && b.hi < b.lo)) throw std::invalid_argument("bad slot bin");
            sum += b.fraction;
        }
        // published percentages are rounded, so allow a little slack
        if (!slot_histogram.empty() && std::abs(sum - 1.0) > 0.01)
            throw std::invalid_argument("slot histogram fractions must sum to 1");
        if (free_slot_nodes > network_nodes) throw std::invalid_argument("more free-slot nodes than network nodes");
        if (bootnodes > network_nodes) throw std::invalid_argument("more bootnodes than network nodes");
        if (dns_poison_rate < 0 || dns_poison_rate > 1) throw std::invalid_argument("dns_poison_rate outside [0,1]");
        if (db_fill_rate < 0 || db_fill_rate >= 1) throw std::invalid_argument("db_fill_rate outside [0,1)");
        if (dns_score_quantiles.size() < 2) throw std::invalid_argument("need at least two score quantiles");
        if (latency.min < Duration::zero() || latency.max < latency.min) throw std::invalid_argument("bad latency range");
        if (trials <= 0) throw std::invalid_argument("trials must be positive");
    }
};

inline ScenarioProfile sepolia_profile() { return {}; }

inline ScenarioProfile mainnet_profile() {
    ScenarioProfile p;
    p.name = "mainnet";
    p.network_id = kForeignNetwork;
    p.network_nodes = 5887;
    p.foreign_nodes = 4113;
    p.free_slot_nodes = 165;   // 2.8% of the network
    p.slot_histogram = mainnet_slot_histogram();
    p.dns_top_n = kTopNMainnet;
    return p;
}

inline ScenarioProfile profile_from_json(const nlohmann::json& j) {
    ScenarioProfile p = j.value("profile", std::string("sepolia")) == "mainnet" ? mainnet_profile() : sepolia_profile();
    p.name = j.value("name", p.name);
    p.network_nodes = j.value("network_nodes", p.network_nodes);
    p.foreign_nodes = j.value("foreign_nodes", p.foreign_nodes);
    p.free_slot_nodes = j.value("free_slot_nodes", p.free_slot_nodes);
    if (j.contains("slot_histogram")) {
        p.slot_histogram.clear();
        for (const auto& b : j.at("slot_histogram"))
            p.slot_histogram.push_back(SlotBin{b.at("lo").get<std::uint32_t>(), b.value("hi", 0u), b.at("fraction").get<double>()});
    }
    if (j.contains("churn")) {
        const auto& c = j.at("churn");
        p.churn.enabled = c.value("enabled", p.churn.enabled);
        p.churn.mean_online = std::chrono::minutes(static_cast<std::int64_t>(c.value("mean_online_min", 360.0)));
        p.churn.mean_offline = std::chrono::minutes(static_cast<std::int64_t>(c.value("mean_offline_min", 60.0)));
    }
    p.bootnodes = j.value("bootnodes", p.bootnodes);
    p.dns_top_n = j.value("dns_top_n", p.dns_top_n);
    p.dns_score_quantiles = j.value("dns_score_quantiles", p.dns_score_quantiles);
    p.dns_poison_rate = j.value("dns_poison_rate", p.dns_poison_rate);
    p.db_benign_seeds = j.value("db_benign_seeds", p.db_benign_seeds);
    p.db_fill_rate = j.value("db_fill_rate", p.db_fill_rate);
    if (j.contains("defenses")) {
        const auto& d = j.at("defenses");
        p.ping_blacklist = d.value("ping_blacklist", p.ping_blacklist);
        p.rate_limit = d.value("rate_limit", p.rate_limit);
        p.dns_defenses.enabled = d.value("dns_ip_cap", false);
        p.dns_defenses.per_ip_cap = d.value("dns_per_ip", p.dns_defenses.per_ip_cap);
    }
    if (j.contains("latency_ms")) {
        const auto& l = j.at("latency_ms");
        p.latency.min = std::chrono::milliseconds(l.at(0).get<std::int64_t>());
        p.latency.max = std::chrono::milliseconds(l.at(1).get<std::int64_t>());
    }
    p.with_crawler = j.value("with_crawler", p.with_crawler);
    p.dial_tick = std::chrono::milliseconds(j.value("dial_tick_ms", static_cast<std::int64_t>(p.dial_tick.count())));
    p.restart_downtime =
        std::chrono::seconds(j.value("restart_downtime_s", static_cast<std::int64_t>(p.restart_downtime.count() / 1000)));
    p.time_budget_h = j.value("time_budget_h", p.time_budget_h);
    p.trials = j.value("trials", p.trials);
    p.base_seed = j.value("base_seed", p.base_seed);
    p.validate();
    return p;
}

// Exact per-bin counts by largest remainder, so small populations still
// reproduce the histogram as closely as integers allow.
inline std::vector<std::size_t> apportion(const std::vector<SlotBin>& bins, std::size_t n) {
    std::vector<std::size_t> counts(bins.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t used = 0;
    for (std::size_t i = 0; i < bins.size(); ++i) {
        const double exact = bins[i].fraction * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        used += counts[i];
        rem.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; used < n && k < rem.size(); ++k, ++used) ++counts[rem[k].second];
    return counts;
}

// Free-slot capacities for n nodes, shuffled.
inline std::vector<std::uint32_t> sample_free_slots(const std::vector<SlotBin>& bins, std::size_t n, Rng& rng) {
    std::vector<std::uint32_t> out;
    out.reserve(n);
    const auto counts = apportion(bins, n);
    for (std::size_t i = 0; i < bins.size(); ++i) {
        const auto hi = bins[i].hi == 0 ? bins[i].lo * 3 : bins[i].hi;
        std::uniform_int_distribution<std::uint32_t> d(bins[i].lo, hi);
        for (std::size_t k = 0; k < counts[i]; ++k) out.push_back(d(rng));
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

// Fraction of values falling in each bin.
inline std::vector<double> histogram_fractions(const std::vector<SlotBin>& bins, const std::vector<std::uint32_t>& v) {
    std::vector<double> f(bins.size());
    if (v.empty()) return f;
    for (auto x : v)
        for (std::size_t i = 0; i < bins.size(); ++i)
            if (x >= bins[i].lo && (bins[i].hi == 0 || x <= bins[i].hi)) {
                f[i] += 1;
                break;
            }
    for (auto& x : f) x /= static_cast<double>(v.size());
    return f;
}

// Score at rank quantile q (0 = lowest entry) by linear interpolation.
inline std::int64_t interpolate_score(const std::vector<double>& quantiles, double q) {
    q = std::clamp(q, 0.0, 1.0);
    const double pos = q * static_cast<double>(quantiles.size() - 1);
    const auto i = std::min(static_cast<std::size_t>(pos), quantiles.size() - 2);
    const double t = pos - static_cast<double>(i);
    return std::llround(quantiles[i] + t * (quantiles[i + 1] - quantiles[i]));
}

// Hands out endpoints. Honest hosts are scattered over 1.0.0.0/8-99.0.0.0/8;
// attacker pools get whole /24s out of 150.0.0.0 upward.
class IpAllocator {
public:
    explicit IpAllocator(std::uint64_t seed) : rng_(mix_seed(seed, 0x1b)) {}

    Ipv4 honest() {
        for (;;) {
            const auto a = 1 + static_cast<std::uint32_t>(rng_() % 99);
            const Ipv4 ip((a << 24) | static_cast<std::uint32_t>(rng_() & 0xffffff));
            if ((ip.value() & 0xff) == 0 || (ip.value() & 0xff) == 255) continue;
            if (used_.insert(ip.value()).second) return ip;
        }
    }

    // First address of `count` fresh consecutive /24s.
    std::vector<Ipv4> subnets(std::size_t count) {
        std::vector<Ipv4> out;
        for (std::size_t i = 0; i < count; ++i) out.push_back(Ipv4((150u << 24) + ((next_subnet_++) << 8)));
        return out;
    }

private:
    Rng rng_;
    std::unordered_set<std::uint32_t> used_;
    std::uint32_t next_subnet_ = 0;
};

inline void rebuild_indexes(World& w) {
    std::vector<NodeRecord> honest, attackers;
    for (const auto& n : w.nodes()) {
        if (n->role() == Role::honest) honest.push_back(n->record());
        else if (n->role() == Role::attacker) attackers.push_back(n->record());
    }
    auto combined = honest;
    combined.insert(combined.end(), attackers.begin(), attackers.end());
    w.honest_index() = ClosestIndex(std::move(honest));
    w.attacker_index() = ClosestIndex(std::move(attackers));
    w.combined_index() = ClosestIndex(std::move(combined));
}

struct ScenarioWorld {
    ScenarioProfile profile;
    std::uint64_t seed = 0;
    std::unique_ptr<World> world;
    IpAllocator ips{0};
    FullNode* target = nullptr;
    CrawlerNode* crawler = nullptr;
    std::vector<PassivePeer*> network_peers;
    std::vector<PassivePeer*> foreign_peers;
    std::vector<PassivePeer*> free_slot_peers;
    std::vector<std::uint32_t> free_slot_sample;
    std::vector<NodeRecord> bootnodes;
    DnsList honest_dns;   // the list as the honest crawl produced it

    World& w() { return *world; }
    Rng& rng() { return world->rng(); }
    const IdSet& attacker_ids() const { return world->attacker_ids(); }

    // Republishes the honest list poisoned at `rate` with the given records,
    // after the list-side defenses.
    void publish_dns(double rate, const std::vector<NodeRecord>& attackers,
                     const std::unordered_map<NodeId, std::size_t, NodeIdHash>& reports = {}) {
        world->publish_dns(apply_dns_defenses(poison_lowest(honest_dns, rate, attackers), profile.dns_defenses, reports));
    }
};

inline FullNodeConfig target_config(const ScenarioProfile& p, const std::vector<NodeRecord>& bootnodes) {
    FullNodeConfig cfg;
    cfg.bootnodes = bootnodes;
    cfg.blacklist.enabled = p.ping_blacklist;
    cfg.conn.rate_limit = p.rate_limit;
    cfg.dial_tick = p.dial_tick;
    return cfg;
}

// Builds the honest world. Nothing runs until the caller starts the target;
// honest peers start immediately.
inline std::unique_ptr<ScenarioWorld> build_world(const ScenarioProfile& profile, std::uint64_t seed) {
    profile.validate();
    auto sw = std::make_unique<ScenarioWorld>();
    sw->profile = profile;
    sw->seed = seed;
    sw->world = std::make_unique<World>(seed, profile.latency);
    sw->ips = IpAllocator(seed);
    World& w = *sw->world;
    Rng build = w.fork_rng();

    // network peers: a shuffled prefix carries the free slots
    sw->free_slot_sample = sample_free_slots(profile.slot_histogram, profile.free_slot_nodes, build);
    std::vector<std::size_t> order(profile.network_nodes);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), build);
    std::vector<std::uint32_t> slots(profile.network_nodes, 0);
    for (std::size_t i = 0; i < profile.free_slot_nodes; ++i) slots[order[i]] = sw->free_slot_sample[i];
    for (std::size_t i = 0; i < profile.network_nodes; ++i) {
        // bootnodes are the first few and never churn
        const bool boot = i < profile.bootnodes;
        NodeRecord r{NodeId::random(build), sw->ips.honest(), kDefaultPort, kDefaultPort};
        auto& p = w.add<PassivePeer>(r, profile.network_id, slots[i], boot ? ChurnModel{} : profile.churn);
        sw->network_peers.push_back(&p);
        if (slots[i] > 0) sw->free_slot_peers.push_back(&p);
        if (boot) sw->bootnodes.push_back(r);
    }
    const std::uint32_t foreign = profile.network_id == kForeignNetwork ? kForeignNetwork + 1 : kForeignNetwork;
    for (std::size_t i = 0; i < profile.foreign_nodes; ++i) {
        NodeRecord r{NodeId::random(build), sw->ips.honest(), kDefaultPort, kDefaultPort};
        sw->foreign_peers.push_back(&w.add<PassivePeer>(r, foreign, 0, profile.churn));
    }

    // the target, with a database of honest records
    NodeRecord tr{NodeId::random(build), sw->ips.honest(), kDefaultPort, kDefaultPort};
    sw->target = &w.add<FullNode>(tr, profile.network_id, target_config(profile, sw->bootnodes));
    std::vector<PassivePeer*> all_honest = sw->network_peers;
    all_honest.insert(all_honest.end(), sw->foreign_peers.begin(), sw->foreign_peers.end());
    std::shuffle(all_honest.begin(), all_honest.end(), build);
    for (std::size_t i = 0; i < profile.db_benign_seeds && i < all_honest.size(); ++i) {
        DbRecord d;
        d.record = all_honest[i]->record();
        d.last_pong = w.now();
        d.first_table_entry_at = w.now();
        d.liveness_checks = 1;
        sw->target->db().upsert(d);
    }

    // published list: a random top-N of the target's network
    auto dns_pool = sw->network_peers;
    std::shuffle(dns_pool.begin(), dns_pool.end(), build);
    const auto n = std::min(profile.dns_top_n, dns_pool.size());
    sw->honest_dns.top_n = profile.dns_top_n;
    for (std::size_t i = 0; i < n; ++i) {
        const double q = n == 1 ? 1.0 : 1.0 - static_cast<double>(i) / static_cast<double>(n - 1);
        sw->honest_dns.entries.push_back(DnsEntry{dns_pool[i]->record(), interpolate_score(profile.dns_score_quantiles, q)});
    }
    sw->publish_dns(0, {});

    if (profile.with_crawler) {
        NodeRecord cr{NodeId::random(build), sw->ips.honest(), kDefaultPort, kDefaultPort};
        auto cfg = target_config(profile, sw->bootnodes);
        cfg.blacklist.enabled = false;
        sw->crawler = &w.add<CrawlerNode>(cr, profile.network_id, cfg, CrawlerConfig{});
        for (const auto& e : sw->honest_dns.entries) sw->crawler->scores().seed(e);
    }

    rebuild_indexes(w);
    for (auto* p : sw->network_peers) p->start();
    for (auto* p : sw->foreign_peers) p->start();
    return sw;
}

// Stops a full node, drops its connections and starts it again after
// `downtime`. The table is rebuilt from the surviving database.
inline void restart_node(World& w, const Endpoint& ep, Duration downtime = Duration::zero()) {
    auto* n = dynamic_cast<FullNode*>(w.find(ep));
    if (!n) throw std::invalid_argument("restart of unknown endpoint " + ep.ip.str() + ":" + std::to_string(ep.udp_port));
    n->stop();
    if (downtime == Duration::zero()) n->start();
    else w.loop().schedule(downtime, [n] { n->start(); });
}

}  // namespace eclipse

// Experiment runners shared by the command-line tool and the acceptance
// binary. Each runner is seeded and returns plain numbers; formatting lives
// next to them so CLI output and test diffs use the same labels.
#pragma once

#include <iomanip>

#include "eclipse/attack.hpp"

namespace eclipse {

inline Duration seconds_f(double s) {
    return std::chrono::duration_cast<Duration>(std::chrono::duration<double>(s));
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

// Puts count/(1-count) attacker records next to the benign seeds so that
// attackers make up `fraction` of the target's database.
inline AttackerPool prefill_db(ScenarioWorld& sw, double fraction, bool modified) {
    if (fraction < 0 || fraction >= 1) throw std::invalid_argument("db fill fraction outside [0,1)");
    const auto benign = sw.target->db().size();
    const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(benign) * fraction / (1 - fraction)));
    auto pool = spawn_stratified(sw, n, modified);
    for (auto* a : pool.nodes) {
        DbRecord d;
        d.record = a->record();
        d.last_pong = sw.w().now();
        d.first_table_entry_at = sw.w().now();
        d.liveness_checks = 1;
        sw.target->db().upsert(d);
    }
    return pool;
}

// ---- selection rates ------------------------------------------------------

struct BucketRates {
    std::array<int, 4> last{2, 5, 8, 17};
    std::array<double, 4> exact{};
    std::array<double, 4> monte_carlo{};
    std::uint64_t samples = 0;
};

// Exact sums and a sampled check: a uniform dial target lands in bucket k of
// a full table with probability P_k.
inline BucketRates bucket_rates(std::uint64_t samples, std::uint64_t seed) {
    BucketRates r;
    r.samples = samples;
    Rng rng(mix_seed(seed, 0xb0c));
    const NodeId self = NodeId::random(rng);
    std::array<std::uint64_t, kBucketCount + 1> hits{};
    for (std::uint64_t i = 0; i < samples; ++i) ++hits[bucket_index(self, NodeId::random(rng))];
    for (std::size_t c = 0; c < r.last.size(); ++c) {
        std::uint64_t h = 0;
        for (int k = kBucketCount - r.last[c] + 1; k <= kBucketCount; ++k) {
            r.exact[c] += bucket_probability(k);
            h += hits[k];
        }
        r.monte_carlo[c] = samples ? static_cast<double>(h) / static_cast<double>(samples) : 0;
    }
    return r;
}

// ---- estimators -----------------------------------------------------------

struct EstimatorReport {
    std::vector<std::int64_t> scores;
    std::vector<std::int64_t> days;
    IpBudget sepolia, mainnet;
};

inline EstimatorReport estimators() {
    EstimatorReport r;
    for (double q : kDnsScoreQuantiles) {
        r.scores.push_back(static_cast<std::int64_t>(q));
        r.days.push_back(estimate_fill_time(static_cast<std::int64_t>(q)));
    }
    r.sepolia = estimate_ip_resources("sepolia");
    r.mainnet = estimate_ip_resources("mainnet");
    return r;
}

// ---- crawler dynamics -----------------------------------------------------

struct CrawlerDynamics {
    std::size_t crawls = 0;
    double days = 0;
    std::vector<double> attacker_gain;   // median over scorers, per crawl
    std::vector<double> benign_gain;     // median over online network nodes, per crawl
    double attacker_per_crawl = 0;
    double benign_per_crawl = 0;
    double crawls_per_day = 0;
    double daily_advantage = 0;
    std::vector<std::int64_t> final_attacker_scores;
};

// The crawler scores a churning network while a few leading-zero attackers
// stay online and advertise themselves through crafted door nodes. Gains are
// taken per crawl after `warmup`, once the crawler's candidate set settles.
inline CrawlerDynamics crawler_dynamics(double days, std::uint64_t seed, Duration warmup = std::chrono::hours(48),
                                        const ScenarioProfile& base = sepolia_profile()) {
    auto p = base;
    p.with_crawler = true;
    auto sw = build_world(p, seed);
    AttackConfig cfg;
    cfg.ping_interval = std::chrono::seconds(60);
    sw->crawler->start();
    auto dns = dns_list_poisoning(*sw, *sw->crawler, cfg, 5);
    sw->crawler->schedule_crawls(std::chrono::minutes(1));

    CrawlerDynamics r;
    r.days = days;
    const auto snap = [&] {
        std::unordered_map<NodeId, std::int64_t, NodeIdHash> m;
        for (const auto& [id, e] : sw->crawler->scores().entries()) m[id] = e.score;
        return m;
    };
    const auto end = SimTime{} + seconds_f(days * 86400);
    auto prev = snap();
    std::size_t seen = 0;
    while (sw->w().now() < end) {
        sw->w().loop().run_for(std::chrono::minutes(5));
        const auto& crawls = sw->crawler->crawls();
        if (crawls.size() == seen || sw->w().now() < crawls.back().end) continue;
        seen = crawls.size();
        auto cur = snap();
        if (crawls.back().start >= SimTime{} + warmup) {
            const auto gain = [&](const NodeId& id) {
                const auto a = cur.find(id), b = prev.find(id);
                return static_cast<double>((a == cur.end() ? 0 : a->second) - (b == prev.end() ? 0 : b->second));
            };
            std::vector<double> ag, bg;
            for (auto* a : dns.scorers.nodes) ag.push_back(gain(a->id()));
            for (auto* n : sw->network_peers)
                if (n->online() && cur.count(n->id()) && prev.count(n->id())) bg.push_back(gain(n->id()));
            r.attacker_gain.push_back(median_of(ag));
            r.benign_gain.push_back(median_of(bg));
        }
        prev = std::move(cur);
    }
    r.crawls = sw->crawler->crawls().size();
    r.attacker_per_crawl = median_of(r.attacker_gain);
    r.benign_per_crawl = median_of(r.benign_gain);
    r.crawls_per_day = static_cast<double>(r.crawls) / days;
    r.daily_advantage = (r.attacker_per_crawl - r.benign_per_crawl) * r.crawls_per_day;
    r.final_attacker_scores = dns.scores(sw->crawler->scores());
    return r;
}

// ---- discovery-table poisoning --------------------------------------------

struct TablePoisonTrial {
    std::uint64_t seed = 0;
    double fill_last2 = 0, fill_last5 = 0, fill_last17 = 0;
    std::size_t table_size = 0;
    std::optional<double> refill_minutes;   // new batch to >= 90%, if measured
    double refill_peak = 0;
};

struct TablePoisonOptions {
    std::size_t attackers = 272;
    Duration duration = std::chrono::hours(24);
    bool ping_blacklist = false;
    bool measure_refill = true;
    Duration refill_window = std::chrono::hours(2);
    double refill_threshold = 0.9;
};

inline TablePoisonTrial table_poisoning_trial(std::uint64_t seed, const TablePoisonOptions& o,
                                              const ScenarioProfile& base = sepolia_profile()) {
    auto p = base;
    p.ping_blacklist = p.ping_blacklist || o.ping_blacklist;
    auto sw = build_world(p, seed);
    AttackConfig cfg;
    sw->target->start();
    auto pool = spawn_poisoners(*sw, sw->target->id(), o.attackers, true);
    Rng rng = sw->w().fork_rng();
    discovery_table_poisoning(pool, sw->target->record(), cfg.ping_interval, rng);
    sw->w().loop().run_for(o.duration);
    const auto& t = sw->target->table();
    TablePoisonTrial r{seed,
                       fill_rate(t, sw->attacker_ids(), 2),
                       fill_rate(t, sw->attacker_ids(), 5),
                       fill_rate(t, sw->attacker_ids(), 17),
                       t.size(),
                       std::nullopt,
                       0};
    if (o.measure_refill) {
        // the batch stops; a fresh batch takes over
        pool.set_online(false);
        auto next = spawn_poisoners(*sw, sw->target->id(), o.attackers, true);
        discovery_table_poisoning(next, sw->target->record(), cfg.ping_interval, rng);
        const auto ids = next.ids();
        const auto t0 = sw->w().now();
        while (sw->w().now() - t0 < o.refill_window) {
            sw->w().loop().run_for(std::chrono::minutes(1));
            const double f = fill_rate(sw->target->table(), ids, kBucketCount);
            r.refill_peak = std::max(r.refill_peak, f);
            if (f >= o.refill_threshold) {
                r.refill_minutes = std::chrono::duration<double>(sw->w().now() - t0).count() / 60;
                break;
            }
        }
    }
    return r;
}

// ---- DB poisoning effect on post-restart fill ---------------------------

struct Table3Cell {
    double db_fill = 0;
    bool modified = true;
    int trials = 0;
    double last2 = 0, last5 = 0, last8 = 0, last17 = 0;
};

inline FillSample table3_trial(double db_fill, bool modified, std::uint64_t seed, Duration measure_after,
                               const ScenarioProfile& base = sepolia_profile()) {
    auto p = base;
    p.db_benign_seeds = 257;
    auto sw = build_world(p, seed);
    auto db_pool = prefill_db(*sw, db_fill, modified);
    AttackConfig cfg;
    sw->target->start();
    auto pool = spawn_poisoners(*sw, sw->target->id(), cfg.poisoners, modified);
    Rng rng = sw->w().fork_rng();
    // the restart is noticed one probe later
    sw->w().loop().run_for(cfg.restart_probe);
    discovery_table_poisoning(pool, sw->target->record(), cfg.ping_interval, rng);
    sw->w().loop().run_for(measure_after);
    return sample_fill(*sw->target, sw->attacker_ids(), sw->w().now());
}

inline Table3Cell table3_cell(double db_fill, bool modified, int trials, std::uint64_t base_seed,
                              Duration measure_after = std::chrono::minutes(30),
                              const ScenarioProfile& base = sepolia_profile()) {
    Table3Cell c{db_fill, modified, trials};
    for (int i = 0; i < trials; ++i) {
        const auto f =
            table3_trial(db_fill, modified, mix_seed(base_seed, static_cast<std::uint64_t>(i)), measure_after, base);
        c.last2 += f.last2 / trials;
        c.last5 += f.last5 / trials;
        c.last8 += f.last8 / trials;
        c.last17 += f.last17 / trials;
    }
    return c;
}

// ---- outgoing hijack ------------------------------------------------------

struct OutgoingTrial {
    std::uint64_t seed = 0;
    bool success = false;
    std::size_t attacker_outbound = 0;   // among the first 16
    std::size_t outbound = 0;
    double minutes = 0;
};

struct OutgoingOptions {
    double dns_fill = 0;
    double db_fill = 0.5;
    bool occupy = false;
    Duration occupy_for = std::chrono::hours(2);
    Duration budget = std::chrono::hours(2);
    std::size_t benign_seeds = 250;
};

// Success: the first 16 outbound connections after the restart all go to
// attackers.
inline OutgoingTrial outgoing_hijack_trial(std::uint64_t seed, const OutgoingOptions& o,
                                           const ScenarioProfile& base = sepolia_profile()) {
    auto p = base;
    p.db_benign_seeds = o.benign_seeds;
    auto sw = build_world(p, seed);
    AttackConfig cfg;
    auto db_pool = prefill_db(*sw, o.db_fill, true);
    auto dns_pool = spawn_stratified(*sw, p.dns_top_n, true);
    sw->publish_dns(o.dns_fill, dns_pool.records());
    std::unique_ptr<SlotCampaign> slots;
    if (o.occupy) {
        slots = occupy_available_slots(*sw, cfg);
        sw->w().loop().run_for(o.occupy_for);
    }
    auto& target = *sw->target;
    target.config().dial_loop = true;
    target.start();
    const auto t0 = sw->w().now();
    auto pool = spawn_poisoners(*sw, target.id(), cfg.poisoners, true);
    Rng rng = sw->w().fork_rng();
    sw->w().loop().run_for(cfg.restart_probe);
    discovery_table_poisoning(pool, target.record(), cfg.ping_interval, rng);

    const auto outbound = [&] {
        std::size_t n = 0;
        for (const auto& e : target.conn_log()) n += e.direction == Direction::outbound;
        return n;
    };
    while (sw->w().now() - t0 < o.budget && outbound() < kMaxOutbound) sw->w().loop().run_for(std::chrono::seconds(5));
    OutgoingTrial r;
    r.seed = seed;
    for (const auto& e : target.conn_log()) {
        if (e.direction != Direction::outbound || r.outbound >= kMaxOutbound) continue;
        ++r.outbound;
        r.attacker_outbound += sw->attacker_ids().count(e.remote);
    }
    r.success = r.outbound == kMaxOutbound && r.attacker_outbound == kMaxOutbound;
    r.minutes = std::chrono::duration<double>(sw->w().now() - t0).count() / 60;
    return r;
}

// ---- incoming hijack ------------------------------------------------------

struct IncomingTrial {
    std::uint64_t seed = 0;
    std::size_t attacker_inbound = 0;
    std::optional<double> seconds_to_full;   // after the restarted node is back
};

inline IncomingTrial incoming_hijack_trial(std::uint64_t seed, std::size_t hijackers, bool rate_limit,
                                           Duration window = std::chrono::seconds(30),
                                           const ScenarioProfile& base = sepolia_profile()) {
    auto p = base;
    p.rate_limit = rate_limit;
    auto sw = build_world(p, seed);
    AttackConfig cfg;
    auto& target = *sw->target;
    target.start();
    sw->w().loop().run_for(std::chrono::minutes(10));
    auto pool = occupy_in_connections(*sw, target.record(), hijackers, hijackers, cfg.static_redial);
    sw->w().loop().run_for(std::chrono::minutes(5));
    restart_node(sw->w(), target.record().endpoint(), p.restart_downtime);
    sw->w().loop().run_for(p.restart_downtime);
    IncomingTrial r{seed, 0, std::nullopt};
    const auto t0 = sw->w().now();
    while (sw->w().now() - t0 <= window) {
        r.attacker_inbound = target.conn().get_occupied_incon(sw->attacker_ids());
        if (r.attacker_inbound >= target.conn().config().max_inbound) {
            r.seconds_to_full = std::chrono::duration<double>(sw->w().now() - t0).count();
            break;
        }
        sw->w().loop().run_for(std::chrono::milliseconds(250));
    }
    return r;
}

// ---- slot occupation ------------------------------------------------------

struct SlotCampaignResult {
    std::uint64_t seed = 0;
    std::vector<SlotSample> samples;
    double occupied_fraction = 0;
    std::vector<double> histogram;   // sampled free-slot fractions per bin
    std::vector<std::string> bins;
};

inline SlotCampaignResult slot_campaign(std::uint64_t seed, Duration duration = std::chrono::hours(2),
                                        const AttackConfig& cfg = {}, const ScenarioProfile& base = sepolia_profile()) {
    const auto& p = base;
    auto sw = build_world(p, seed);
    auto c = occupy_available_slots(*sw, cfg);
    SlotCampaignResult r;
    r.seed = seed;
    const auto t0 = sw->w().now();
    while (sw->w().now() - t0 < duration) {
        sw->w().loop().run_for(std::chrono::minutes(10));
        r.samples.push_back(c->sample());
    }
    r.occupied_fraction = r.samples.empty() ? 0 : r.samples.back().occupied_fraction;
    r.histogram = histogram_fractions(p.slot_histogram, sw->free_slot_sample);
    for (const auto& b : p.slot_histogram) r.bins.push_back(b.label());
    return r;
}

// ---- DNS list cap ---------------------------------------------------------

struct DnsCapResult {
    std::size_t attackers = 0;
    std::size_t published_without_cap = 0;
    std::size_t published_with_cap = 0;
};

// A pool crowded into one /24 tries to take the whole list.
inline DnsCapResult dns_cap_check(std::uint64_t seed, std::size_t cap = 2, const ScenarioProfile& base = sepolia_profile()) {
    auto p = base;
    auto sw = build_world(p, seed);
    auto pool = spawn_on_ips(*sw, p.dns_top_n, 1, true);
    DnsCapResult r;
    r.attackers = pool.size();
    const auto count = [&](const DnsList& l) {
        std::size_t n = 0;
        for (const auto& e : l.entries) n += sw->attacker_ids().count(e.record.id);
        return n;
    };
    const auto poisoned = poison_lowest(sw->honest_dns, 1.0, pool.records());
    r.published_without_cap = count(apply_dns_defenses(poisoned, DnsDefenses{false, cap}));
    r.published_with_cap = count(apply_dns_defenses(poisoned, DnsDefenses{true, cap}));
    return r;
}

// ---- scenario files -------------------------------------------------------

struct Scenario {
    ScenarioProfile profile;
    AttackConfig attack;
    EclipsePlan plan;
    unsigned jobs = 0;   // trial workers; 0 means one per core
};

inline Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario s;
    s.profile = profile_from_json(j.value("network", nlohmann::json::object()));
    s.attack = attack_config_from_json(j.value("attack", nlohmann::json::object()));
    const auto plan = j.value("plan", nlohmann::json::object());
    s.plan.restart_at = seconds_f(plan.value("restart_at_h", to_hours(s.plan.restart_at)) * 3600);
    s.plan.downtime = seconds_f(plan.value("downtime_h", to_hours(s.plan.downtime)) * 3600);
    s.plan.budget = seconds_f(plan.value("budget_h", s.profile.time_budget_h) * 3600);
    if (s.plan.budget <= s.plan.restart_at + s.plan.downtime) throw std::invalid_argument("budget must extend past the restart");
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("scenario " + path + ": " + e.what());
    }
    return scenario_from_json(j);
}

// Full orchestrated run on a built world.
inline AttackRunReport eclipse_trial(const Scenario& s, std::uint64_t seed) {
    auto sw = build_world(s.profile, seed);
    return run_eclipse(*sw, s.attack, s.plan);
}

// ---- formatting -----------------------------------------------------------

inline std::string pct(double x, int digits = 1) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(digits) << 100 * x;
    return o.str();
}

inline std::string frac(std::size_t k, std::size_t n) { return std::to_string(k) + "/" + std::to_string(n); }

}  // namespace eclipse

// The five attack stages, the orchestrator that sequences them and the
// public-IP budget arithmetic. Every function here takes in-world node handles
// only.
#pragma once

#include <map>

#include "eclipse/sim.hpp"

namespace eclipse {

struct AttackConfig {
    std::size_t poisoners = 272;
    std::size_t db_round_size = 128;
    int db_rounds = 2;
    Duration round_interval = std::chrono::hours(2);
    Duration round_poison_time = std::chrono::minutes(10);
    std::size_t dns_attackers = 250;
    std::size_t crawler_door_per_bucket = 16;
    int dns_leading_zero_bits = 16;
    std::size_t slot_occupiers = 200;
    std::size_t occupier_ips = 1;
    Duration occupier_pace = std::chrono::seconds(5);
    std::size_t inbound_hijackers = 40;
    Duration static_redial = std::chrono::seconds(5);
    bool behavior_modified = true;
    Duration ping_interval = std::chrono::seconds(10);
    Duration restart_probe = std::chrono::seconds(10);
};

inline AttackConfig attack_config_from_json(const nlohmann::json& j) {
    AttackConfig c;
    const auto secs = [&](const char* key, Duration d) {
        return std::chrono::duration_cast<Duration>(
            std::chrono::duration<double>(j.value(key, std::chrono::duration<double>(d).count())));
    };
    c.poisoners = j.value("poisoners", c.poisoners);
    c.db_round_size = j.value("db_round_size", c.db_round_size);
    c.db_rounds = j.value("db_rounds", c.db_rounds);
    c.round_interval = secs("round_interval_s", c.round_interval);
    c.round_poison_time = secs("round_poison_time_s", c.round_poison_time);
    c.dns_attackers = j.value("dns_attackers", c.dns_attackers);
    c.crawler_door_per_bucket = j.value("crawler_door_per_bucket", c.crawler_door_per_bucket);
    c.dns_leading_zero_bits = j.value("dns_leading_zero_bits", c.dns_leading_zero_bits);
    c.slot_occupiers = j.value("slot_occupiers", c.slot_occupiers);
    c.occupier_ips = j.value("occupier_ips", c.occupier_ips);
    c.occupier_pace = secs("occupier_pace_s", c.occupier_pace);
    c.inbound_hijackers = j.value("inbound_hijackers", c.inbound_hijackers);
    c.static_redial = secs("static_redial_s", c.static_redial);
    c.behavior_modified = j.value("behavior_modified", c.behavior_modified);
    c.ping_interval = secs("ping_interval_s", c.ping_interval);
    c.restart_probe = secs("restart_probe_s", c.restart_probe);
    if (c.occupier_ips == 0 && c.slot_occupiers > 0) throw std::invalid_argument("occupier_ips must be positive");
    if (c.ping_interval <= Duration::zero() || c.restart_probe <= Duration::zero())
        throw std::invalid_argument("intervals must be positive");
    return c;
}

struct AttackerPool {
    std::vector<AttackerNode*> nodes;

    std::size_t size() const { return nodes.size(); }
    std::vector<NodeRecord> records() const {
        std::vector<NodeRecord> out;
        for (auto* n : nodes) out.push_back(n->record());
        return out;
    }
    IdSet ids() const {
        IdSet out;
        for (auto* n : nodes) out.insert(n->id());
        return out;
    }
    void set_online(bool on) {
        for (auto* n : nodes) n->set_online(on);
    }
    void set_behavior_modified(bool on) {
        for (auto* n : nodes) n->set_behavior_modified(on);
    }
};

// Greedy /24 assignment: each node goes to the least-used subnet that still
// has room under the per-bucket and per-table caps.
inline std::vector<std::size_t> assign_subnets(const std::vector<int>& buckets, std::size_t subnet_count,
                                               int per_bucket = kBucketSubnetLimit, int per_table = kTableSubnetLimit) {
    std::vector<std::size_t> out;
    std::vector<int> table(subnet_count, 0);
    std::map<std::pair<int, std::size_t>, int> in_bucket;
    for (int b : buckets) {
        std::size_t best = subnet_count;
        for (std::size_t s = 0; s < subnet_count; ++s) {
            if (table[s] >= per_table || in_bucket[{b, s}] >= per_bucket) continue;
            if (best == subnet_count || table[s] < table[best]) best = s;
        }
        if (best == subnet_count) throw std::invalid_argument("not enough subnets for the requested pool");
        ++table[best];
        ++in_bucket[{b, best}];
        out.push_back(best);
    }
    return out;
}

namespace detail {

inline AttackerPool spawn(ScenarioWorld& sw, const std::vector<NodeId>& ids, const std::vector<Ipv4>& ips,
                          const std::vector<std::uint16_t>& ports, bool modified) {
    AttackerPool pool;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        NodeRecord r{ids[i], ips[i], ports[i], ports[i]};
        auto& a = sw.w().add<AttackerNode>(r, sw.profile.network_id, modified);
        a.set_online(true);
        pool.nodes.push_back(&a);
    }
    rebuild_indexes(sw.w());
    return pool;
}

// Hosts inside subnet bases, one address per node, ten per /24 at most.
inline std::vector<Ipv4> hosts_for(const std::vector<Ipv4>& bases, const std::vector<std::size_t>& subnet_of) {
    std::vector<std::uint32_t> used(bases.size(), 0);
    std::vector<Ipv4> out;
    for (auto s : subnet_of) out.push_back(Ipv4(bases[s].value() + 1 + used[s]++));
    return out;
}

}  // namespace detail

inline std::size_t subnets_needed(std::size_t nodes) { return (nodes + kTableSubnetLimit - 1) / kTableSubnetLimit; }

// `per_bucket` ids crafted into each listed bucket of the victim, spread over
// fresh /24s so the table's subnet limits never bite.
inline AttackerPool spawn_crafted(ScenarioWorld& sw, const NodeId& victim, const std::vector<int>& buckets,
                                  std::size_t per_bucket, bool modified) {
    std::vector<int> bucket_of;
    std::vector<NodeId> ids;
    Rng rng = sw.w().fork_rng();
    for (int b : buckets)
        for (std::size_t i = 0; i < per_bucket; ++i) {
            bucket_of.push_back(b);
            ids.push_back(generate_id_in_bucket(rng, victim, b));
        }
    const auto subnet_of = assign_subnets(bucket_of, subnets_needed(ids.size()));
    const auto bases = sw.ips.subnets(subnets_needed(ids.size()));
    return detail::spawn(sw, ids, detail::hosts_for(bases, subnet_of),
                         std::vector<std::uint16_t>(ids.size(), kDefaultPort), modified);
}

inline std::vector<int> last_buckets(int n) {
    std::vector<int> out;
    for (int k = kBucketCount - n + 1; k <= kBucketCount; ++k) out.push_back(k);
    return out;
}

// The full-table pool: 16 crafted ids for each of the 17 buckets.
inline AttackerPool spawn_poisoners(ScenarioWorld& sw, const NodeId& victim, std::size_t count, bool modified) {
    if (count == 0) return {};
    const std::size_t per_bucket = std::min<std::size_t>(kBucketSize, (count + kBucketCount - 1) / kBucketCount);
    auto pool = spawn_crafted(sw, victim, last_buckets(kBucketCount), per_bucket, modified);
    while (pool.size() > count) {
        pool.nodes.back()->set_online(false);
        pool.nodes.pop_back();
    }
    return pool;
}

// Ids spread evenly over the key space, for database records.
inline AttackerPool spawn_stratified(ScenarioWorld& sw, std::size_t count, bool modified) {
    Rng rng = sw.w().fork_rng();
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < count; ++i) ids.push_back(generate_stratified_id(rng, i, count));
    std::vector<std::size_t> subnet_of(count);
    for (std::size_t i = 0; i < count; ++i) subnet_of[i] = i / kTableSubnetLimit;
    const auto bases = sw.ips.subnets(subnets_needed(count));
    return detail::spawn(sw, ids, detail::hosts_for(bases, subnet_of), std::vector<std::uint16_t>(count, kDefaultPort),
                         modified);
}

inline AttackerPool spawn_leading_zero(ScenarioWorld& sw, std::size_t count, int zero_bits, bool modified) {
    Rng rng = sw.w().fork_rng();
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < count; ++i) ids.push_back(generate_node_id(rng, zero_bits));
    std::vector<std::size_t> subnet_of(count);
    for (std::size_t i = 0; i < count; ++i) subnet_of[i] = i / kTableSubnetLimit;
    const auto bases = sw.ips.subnets(subnets_needed(count));
    return detail::spawn(sw, ids, detail::hosts_for(bases, subnet_of), std::vector<std::uint16_t>(count, kDefaultPort),
                         modified);
}

// `count` nodes sharing `ip_count` addresses, one port each.
inline AttackerPool spawn_on_ips(ScenarioWorld& sw, std::size_t count, std::size_t ip_count, bool modified) {
    if (ip_count == 0) throw std::invalid_argument("ip_count must be positive");
    Rng rng = sw.w().fork_rng();
    const auto bases = sw.ips.subnets(ip_count);
    std::vector<NodeId> ids;
    std::vector<Ipv4> ips;
    std::vector<std::uint16_t> ports;
    for (std::size_t i = 0; i < count; ++i) {
        ids.push_back(NodeId::random(rng));
        ips.push_back(Ipv4(bases[i % ip_count].value() + 1));
        ports.push_back(static_cast<std::uint16_t>(kDefaultPort + i / ip_count));
    }
    return detail::spawn(sw, ids, ips, ports, modified);
}

// Stage: every attacker pings the victim on a fixed interval; the victim's
// ping-back, FindNode and ENRRequest are answered by the node handlers.
inline void discovery_table_poisoning(AttackerPool& pool, const NodeRecord& victim, Duration interval, Rng& rng) {
    for (auto* a : pool.nodes) a->start_pinging(victim, interval, uniform_duration(rng, Duration::zero(), interval));
}

// Watches a node by pinging it; reports a liveness gap and the recovery.
class RestartDetector {
public:
    RestartDetector(ScenarioWorld& sw, const NodeRecord& target, Duration probe) : sw_(sw), target_(target), probe_(probe) {
        auto bases = sw.ips.subnets(1);
        NodeRecord r{NodeId::random(sw.rng()), Ipv4(bases[0].value() + 1), kDefaultPort, kDefaultPort};
        monitor_ = &sw.w().add<AttackerNode>(r, sw.profile.network_id, false);
        monitor_->set_online(true);
        monitor_->on_pong = [this](const NodeId& id) {
            if (id != target_.id) return;
            last_pong_ = sw_.w().now();
            seen_ = true;
            if (down_) {
                down_ = false;
                ++restarts_;
                if (on_up) on_up();
            }
        };
        tick();
    }

    std::function<void()> on_down;
    std::function<void()> on_up;
    bool down() const { return down_; }
    int restarts() const { return restarts_; }

private:
    void tick() {
        monitor_->ping_once(target_);
        sw_.w().loop().schedule(probe_, [this] {
            if (seen_ && !down_ && sw_.w().now() - last_pong_ > probe_ * 2 + probe_ / 2) {
                down_ = true;
                if (on_down) on_down();
            }
            tick();
        });
    }

    ScenarioWorld& sw_;
    NodeRecord target_;
    Duration probe_;
    AttackerNode* monitor_ = nullptr;
    SimTime last_pong_{};
    bool seen_ = false;
    bool down_ = false;
    int restarts_ = 0;
};

struct DbRound {
    SimTime start{};
    SimTime end{};
    std::size_t persisted = 0;
    double db_fraction = 0;
};

// Stage: rounds of crafted batches aimed at the last buckets. A batch pings
// until its entries have been persisted, then goes dark; the next batch
// starts round_interval after the previous one.
class DbPrefill {
public:
    DbPrefill(ScenarioWorld& sw, FullNode& target, AttackConfig cfg, int rounds)
        : sw_(sw), target_(target), cfg_(cfg), rounds_(rounds), rng_(sw.w().fork_rng()) {}

    void start() { next_round(); }
    bool finished() const { return static_cast<int>(log_.size()) == rounds_ && (log_.empty() || log_.back().end != SimTime{}); }
    const std::vector<DbRound>& rounds() const { return log_; }
    const std::vector<AttackerPool>& batches() const { return batches_; }
    double db_fraction() const { return db_fill_stats(target_.db(), sw_.attacker_ids()).attacker_fraction; }

private:
    void next_round() {
        if (static_cast<int>(log_.size()) >= rounds_) return;
        const int buckets = static_cast<int>(std::clamp<std::size_t>(cfg_.db_round_size / kBucketSize, 1, kBucketCount));
        batches_.push_back(spawn_crafted(sw_, target_.id(), last_buckets(buckets), kBucketSize, cfg_.behavior_modified));
        log_.push_back(DbRound{sw_.w().now(), {}, 0, 0});
        discovery_table_poisoning(batches_.back(), target_.record(), cfg_.ping_interval, rng_);
        const auto idx = batches_.size() - 1;
        sw_.w().loop().schedule(cfg_.round_poison_time, [this, idx] {
            auto& batch = batches_[idx];
            std::size_t persisted = 0;
            for (auto* a : batch.nodes) persisted += target_.db().contains(a->id());
            batch.set_online(false);
            log_[idx].end = sw_.w().now();
            log_[idx].persisted = persisted;
            log_[idx].db_fraction = db_fraction();
        });
        sw_.w().loop().schedule(cfg_.round_interval, [this] { next_round(); });
    }

    ScenarioWorld& sw_;
    FullNode& target_;
    AttackConfig cfg_;
    int rounds_;
    Rng rng_;
    std::vector<AttackerPool> batches_;
    std::vector<DbRound> log_;
};

// Stage: attackers fill the crawler's table with crafted "door" ids and
// answer its queries with the scoring set, which uses leading-zero ids so
// the crawler's id-ordered startup pass reaches it first.
struct DnsPoisoning {
    AttackerPool doors;
    AttackerPool scorers;

    std::vector<std::int64_t> scores(const CrawlerScores& s) const {
        std::vector<std::int64_t> out;
        for (auto* a : scorers.nodes) {
            const auto* e = s.find(a->id());
            out.push_back(e ? e->score : 0);
        }
        return out;
    }
};

inline DnsPoisoning dns_list_poisoning(ScenarioWorld& sw, CrawlerNode& crawler, const AttackConfig& cfg,
                                       std::size_t scorers, int door_buckets = 5) {
    DnsPoisoning d;
    d.scorers = spawn_leading_zero(sw, scorers, cfg.dns_leading_zero_bits, true);
    d.doors = spawn_crafted(sw, crawler.id(), last_buckets(door_buckets), cfg.crawler_door_per_bucket, true);
    auto adv = d.scorers.records();
    for (const auto& r : d.doors.records()) adv.push_back(r);
    auto idx = std::make_shared<const ClosestIndex>(adv);
    for (auto* a : d.scorers.nodes) a->set_advertised(idx);
    for (auto* a : d.doors.nodes) a->set_advertised(idx);
    Rng rng = sw.w().fork_rng();
    discovery_table_poisoning(d.doors, crawler.record(), cfg.ping_interval, rng);
    discovery_table_poisoning(d.scorers, crawler.record(), cfg.ping_interval, rng);
    return d;
}

struct SlotSample {
    SimTime at{};
    std::size_t residual = 0;   // initially free nodes still accepting
    double occupied_fraction = 0;
    std::size_t online = 0;
};

// Stage: occupiers dial a static list round-robin, one dial per pace each,
// skipping peers they are already connected or dialing to.
class SlotCampaign {
public:
    SlotCampaign(ScenarioWorld& sw, AttackerPool occupiers, std::vector<PassivePeer*> targets, Duration pace)
        : sw_(sw), occ_(std::move(occupiers)), targets_(std::move(targets)), pace_(pace), cursor_(occ_.size()) {
        for (std::size_t a = 0; a < occ_.size(); ++a) cursor_[a] = targets_.empty() ? 0 : a * targets_.size() / occ_.size();
    }

    void start() {
        if (targets_.empty()) return;
        Rng rng = sw_.w().fork_rng();
        for (std::size_t a = 0; a < occ_.size(); ++a)
            sw_.w().loop().schedule(uniform_duration(rng, Duration::zero(), pace_), [this, a] { step(a); });
    }

    const AttackerPool& occupiers() const { return occ_; }

    // Residual: online nodes of the initial free-slot set with a slot left.
    // Offline nodes count neither way.
    SlotSample sample() const {
        SlotSample s{sw_.w().now(), 0, 0, 0};
        for (const auto* p : initial_) {
            s.online += p->online();
            s.residual += p->online() && p->available_slots() > 0;
        }
        s.occupied_fraction = s.online == 0 ? 1.0 : 1.0 - static_cast<double>(s.residual) / static_cast<double>(s.online);
        return s;
    }
    void track(std::vector<PassivePeer*> initial_free) { initial_ = std::move(initial_free); }

private:
    void step(std::size_t a) {
        auto* n = occ_.nodes[a];
        if (!n->online()) return;
        for (std::size_t tries = 0; tries < targets_.size(); ++tries) {
            auto* t = targets_[cursor_[a]++ % targets_.size()];
            if (n->connected(t->id()) || n->dialing(t->id())) continue;
            n->dial(t->record());
            break;
        }
        sw_.w().loop().schedule(pace_, [this, a] { step(a); });
    }

    ScenarioWorld& sw_;
    AttackerPool occ_;
    std::vector<PassivePeer*> targets_;
    std::vector<PassivePeer*> initial_;
    Duration pace_;
    std::vector<std::size_t> cursor_;
};

inline std::unique_ptr<SlotCampaign> occupy_available_slots(ScenarioWorld& sw, const AttackConfig& cfg) {
    auto occ = spawn_on_ips(sw, cfg.slot_occupiers, cfg.occupier_ips, false);
    auto c = std::make_unique<SlotCampaign>(sw, std::move(occ), sw.network_peers, cfg.occupier_pace);
    c->track(sw.free_slot_peers);
    c->start();
    return c;
}

// Stage: each hijacker keeps the victim as a static peer and redials it
// whenever it is not connected.
inline void keep_connected(ScenarioWorld& sw, AttackerNode& a, const NodeRecord& to, Duration redial, Duration phase) {
    const auto inc = a.incarnation();
    sw.w().loop().schedule(phase, [&sw, &a, to, redial, inc] {
        if (a.incarnation() != inc || !a.online()) return;
        if (!a.connected(to.id) && !a.dialing(to.id)) a.dial(to);
        keep_connected(sw, a, to, redial, redial);
    });
}

inline AttackerPool occupy_in_connections(ScenarioWorld& sw, const NodeRecord& victim, std::size_t count,
                                          std::size_t ip_count, Duration redial) {
    auto pool = spawn_on_ips(sw, count, ip_count, false);
    Rng rng = sw.w().fork_rng();
    for (auto* a : pool.nodes) keep_connected(sw, *a, victim, redial, uniform_duration(rng, Duration::zero(), redial));
    return pool;
}

struct StageEvent {
    SimTime at{};
    std::string stage;
};

struct FillSample {
    SimTime at{};
    double last2 = 0, last5 = 0, last8 = 0, last17 = 0, db = 0;
    std::size_t in = 0, out = 0;
};

inline FillSample sample_fill(const FullNode& n, const IdSet& attackers, SimTime now) {
    return FillSample{now,
                      fill_rate(n.table(), attackers, 2),
                      fill_rate(n.table(), attackers, 5),
                      fill_rate(n.table(), attackers, 8),
                      fill_rate(n.table(), attackers, 17),
                      db_fill_stats(n.db(), attackers).attacker_fraction,
                      n.conn().get_occupied_incon(attackers),
                      n.conn().get_occupied_outcon(attackers)};
}

struct AttackRunReport {
    std::vector<StageEvent> stages;
    std::vector<FillSample> series;
    bool eclipse_success = false;
    std::optional<Duration> time_to_eclipse;

    nlohmann::json to_json() const {
        nlohmann::json st = nlohmann::json::array();
        for (const auto& s : stages) st.push_back({{"t_ms", to_ms(s.at)}, {"stage", s.stage}});
        nlohmann::json j{{"stages", st}, {"eclipse_success", eclipse_success}};
        j["time_to_eclipse_s"] = time_to_eclipse ? nlohmann::json(time_to_eclipse->count() / 1000.0) : nlohmann::json();
        if (!series.empty()) {
            const auto& f = series.back();
            j["final"] = {{"last2", f.last2}, {"last5", f.last5}, {"last8", f.last8}, {"last17", f.last17},
                          {"db", f.db},       {"in", f.in},       {"out", f.out}};
        }
        return j;
    }
    std::string csv() const {
        std::ostringstream o;
        o << "t_ms,last2,last5,last8,last17,db,in,out\n";
        for (const auto& f : series)
            o << to_ms(f.at) << ',' << f.last2 << ',' << f.last5 << ',' << f.last8 << ',' << f.last17 << ',' << f.db << ','
              << f.in << ',' << f.out << '\n';
        return o.str();
    }
};

struct EclipsePlan {
    Duration restart_at = std::chrono::hours(5);   // when the operator takes the target down
    Duration downtime = std::chrono::hours(2);
    Duration budget = std::chrono::hours(24);
    Duration sample_every = std::chrono::seconds(10);
};

// The orchestrator. Database pre-filling and list poisoning start at once;
// slot occupation starts when the target is seen going down; table poisoning
// and inbound hijacking start when it is seen coming back. Sampling runs
// until both connection sets are attacker-held or the budget ends.
inline AttackRunReport run_eclipse(ScenarioWorld& sw, const AttackConfig& cfg, const EclipsePlan& plan) {
    AttackRunReport rep;
    World& w = sw.w();
    FullNode& target = *sw.target;
    const auto t0 = w.now();
    const auto mark = [&rep, &w](std::string s) { rep.stages.push_back(StageEvent{w.now(), std::move(s)}); };
    target.config().dial_loop = true;
    if (!target.online()) target.start();

    DbPrefill prefill(sw, target, cfg, cfg.db_rounds);
    prefill.start();
    mark("db_pre_filling_attack");

    std::optional<DnsPoisoning> dns;
    if (sw.crawler) dns = dns_list_poisoning(sw, *sw.crawler, cfg, std::min<std::size_t>(cfg.dns_attackers, 5));
    // list poisoning completes over months; its end state is installed here
    const auto dns_pool = spawn_stratified(sw, cfg.dns_attackers, cfg.behavior_modified);
    sw.publish_dns(sw.profile.dns_poison_rate, dns_pool.records());
    mark("dns_list_poisoning_attack");

    std::unique_ptr<SlotCampaign> slots;
    AttackerPool poisoners, hijackers;
    Rng rng = w.fork_rng();
    RestartDetector det(sw, target.record(), cfg.restart_probe);
    det.on_down = [&] {
        if (slots) return;
        mark("occupy_available_slots");
        slots = occupy_available_slots(sw, cfg);
    };
    det.on_up = [&] {
        if (!poisoners.nodes.empty() || !slots) return;
        mark("discovery_table_poisoning_attack");
        poisoners = spawn_poisoners(sw, target.id(), cfg.poisoners, cfg.behavior_modified);
        discovery_table_poisoning(poisoners, target.record(), cfg.ping_interval, rng);
        mark("occupy_in_connections");
        hijackers = occupy_in_connections(sw, target.record(), cfg.inbound_hijackers, cfg.inbound_hijackers,
                                          cfg.static_redial);
    };
    w.loop().schedule(plan.restart_at, [&] { restart_node(w, target.record().endpoint(), plan.downtime); });

    const auto end = t0 + plan.budget;
    while (w.now() < end) {
        w.loop().run_for(plan.sample_every);
        auto s = sample_fill(target, sw.attacker_ids(), w.now());
        rep.series.push_back(s);
        if (!poisoners.nodes.empty() && s.in >= target.conn().config().max_inbound &&
            s.out >= target.conn().config().max_outbound) {
            rep.eclipse_success = true;
            rep.time_to_eclipse = w.now() - t0;
            mark("eclipsed");
            break;
        }
    }
    // stop callbacks that capture this frame
    det.on_down = nullptr;
    det.on_up = nullptr;
    target.stop();
    for (const auto& n : w.nodes())
        if (auto* a = dynamic_cast<AttackerNode*>(n.get())) a->set_online(false);
    return rep;
}

struct IpBudget {
    std::string profile;
    std::size_t db = 0, dns = 0, outgoing = 0, inbound = 0, total = 0;
    std::size_t rounds = 0, ips_per_round = 0;
};

// Public addresses per stage. A /24 holds at most 10 table entries, so every
// group of 10 attacker ids needs its own address block.
inline IpBudget estimate_ip_resources(const std::string& profile) {
    std::size_t population = 0;
    if (profile == "sepolia") population = 2000;
    else if (profile == "mainnet") population = 6000;
    else throw std::invalid_argument("unknown network profile: " + profile);
    constexpr std::size_t base_population = 2000, round_size = 128, table_slots = kTableCapacity;
    const auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
    IpBudget b;
    b.profile = profile;
    b.ips_per_round = ceil_div(round_size, kTableSubnetLimit);
    b.rounds = ceil_div(base_population, round_size) * ceil_div(population, base_population);
    b.db = b.ips_per_round * b.rounds;
    b.dns = ceil_div(table_slots, kTableSubnetLimit);
    b.outgoing = ceil_div(table_slots, kTableSubnetLimit);
    b.inbound = 40;
    b.total = b.db + b.dns + b.outgoing + b.inbound;
    return b;
}

}  // namespace eclipse

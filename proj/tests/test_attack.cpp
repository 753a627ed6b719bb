#include "doctest.h"

#include <map>
#include <set>

#include "eclipse/experiments.hpp"

using namespace eclipse;
using namespace std::chrono_literals;

namespace {

ScenarioProfile small_profile() {
    auto p = sepolia_profile();
    p.network_nodes = 300;
    p.foreign_nodes = 300;
    p.free_slot_nodes = 80;
    p.bootnodes = 4;
    p.db_benign_seeds = 100;
    return p;
}

}  // namespace

TEST_CASE("greedy subnet assignment respects both caps") {
    Rng rng(1);
    for (int round = 0; round < 50; ++round) {
        std::vector<int> buckets;
        const auto n = 1 + rng() % 272;
        for (std::size_t i = 0; i < n; ++i) buckets.push_back(1 + static_cast<int>(rng() % 17));
        std::sort(buckets.begin(), buckets.end());
        std::map<int, std::size_t> per_bucket;
        for (int b : buckets) ++per_bucket[b];
        // enough subnets for the table cap and for the fullest bucket
        std::size_t need = subnets_needed(n);
        for (auto& [b, c] : per_bucket) need = std::max<std::size_t>(need, (c + 1) / 2);
        const auto s = assign_subnets(buckets, need);
        std::map<std::size_t, int> table;
        std::map<std::pair<int, std::size_t>, int> bucket;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(++table[s[i]] <= kTableSubnetLimit);
            CHECK(++bucket[{buckets[i], s[i]}] <= kBucketSubnetLimit);
        }
    }
    CHECK_THROWS_AS(assign_subnets(std::vector<int>(21, 17), 10), std::invalid_argument);
    CHECK_THROWS_AS(assign_subnets(std::vector<int>(11, 5), 1), std::invalid_argument);
}

TEST_CASE("272 crafted poisoners fit a fresh table exactly") {
    auto sw = build_world(small_profile(), 2);
    const auto victim = sw->target->id();
    auto pool = spawn_poisoners(*sw, victim, 272, true);
    REQUIRE(pool.size() == 272);
    std::map<int, int> per;
    std::set<std::uint32_t> nets;
    DiscoveryTable t(victim);
    for (auto* a : pool.nodes) {
        ++per[bucket_index(victim, a->id())];
        nets.insert(a->record().ip.value() >> 8);
        CHECK(t.add_seen_node(a->record(), kEpoch, 1) == AddOutcome::added);
    }
    for (int k = 1; k <= kBucketCount; ++k) CHECK(per[k] == kBucketSize);
    CHECK(nets.size() == 28);
    CHECK(t.size() == 272);
    CHECK(t.audit().empty());
    CHECK(fill_rate(t, pool.ids(), 17) == 1.0);
    for (auto* a : pool.nodes) CHECK(sw->attacker_ids().count(a->id()));
    CHECK(sw->w().attacker_index().size() >= 272);
}

TEST_CASE("other attacker pools") {
    auto sw = build_world(small_profile(), 3);
    auto strat = spawn_stratified(*sw, 64, true);
    std::vector<std::uint64_t> tops;
    for (auto* a : strat.nodes) tops.push_back(a->id().words()[0]);
    CHECK(std::is_sorted(tops.begin(), tops.end()));
    for (std::size_t i = 0; i < tops.size(); ++i) CHECK((tops[i] >> 58) == i);   // one per slice

    auto lz = spawn_leading_zero(*sw, 5, 16, true);
    for (auto* a : lz.nodes) CHECK((a->id().words()[0] >> 48) == 0);

    auto shared = spawn_on_ips(*sw, 7, 2, false);
    std::set<std::uint32_t> ips;
    std::set<std::pair<std::uint32_t, std::uint16_t>> eps;
    for (auto* a : shared.nodes) {
        ips.insert(a->record().ip.value());
        eps.insert({a->record().ip.value(), a->record().udp_port});
    }
    CHECK(ips.size() == 2);
    CHECK(eps.size() == 7);
    CHECK_THROWS_AS(spawn_on_ips(*sw, 3, 0, false), std::invalid_argument);
}

TEST_CASE("IP budget") {
    const auto s = estimate_ip_resources("sepolia");
    CHECK(s.db == 208);
    CHECK(s.dns == 28);
    CHECK(s.outgoing == 28);
    CHECK(s.inbound == 40);
    CHECK(s.total == 304);
    const auto m = estimate_ip_resources("mainnet");
    CHECK(m.db == 624);
    CHECK(m.total == 720);
    CHECK(m.db + m.dns + m.outgoing + m.inbound == m.total);
    CHECK_THROWS_AS(estimate_ip_resources("goerli"), std::invalid_argument);
}

TEST_CASE("attack config JSON") {
    const auto c = attack_config_from_json(nlohmann::json{{"poisoners", 100}, {"ping_interval_s", 30}, {"behavior_modified", false}});
    CHECK(c.poisoners == 100);
    CHECK(c.ping_interval == Duration(30s));
    CHECK_FALSE(c.behavior_modified);
    CHECK(attack_config_from_json(nlohmann::json::object()).slot_occupiers == 200);
    CHECK_THROWS_AS(attack_config_from_json(nlohmann::json{{"ping_interval_s", 0}}), std::invalid_argument);
    CHECK_THROWS_AS(attack_config_from_json(nlohmann::json{{"occupier_ips", 0}}), std::invalid_argument);
}

TEST_CASE("restart detector sees the gap and the return") {
    auto sw = build_world(small_profile(), 4);
    auto& t = *sw->target;
    t.start();
    RestartDetector det(*sw, t.record(), 10s);
    std::vector<std::pair<std::string, SimTime>> ev;
    det.on_down = [&] { ev.emplace_back("down", sw->w().now()); };
    det.on_up = [&] { ev.emplace_back("up", sw->w().now()); };
    sw->w().loop().run_for(10min);
    CHECK(ev.empty());
    restart_node(sw->w(), t.record().endpoint(), 5min);
    sw->w().loop().run_for(10min);
    REQUIRE(ev.size() == 2);
    CHECK(ev[0].first == "down");
    CHECK(ev[1].first == "up");
    CHECK(ev[0].second - (kEpoch + 10min) <= 40s);
    CHECK(ev[1].second >= kEpoch + 15min);
    CHECK(ev[1].second - (kEpoch + 15min) <= 11s);
    CHECK(det.restarts() == 1);
}

TEST_CASE("db pre-filling rounds persist crafted records, then go dark") {
    auto sw = build_world(small_profile(), 5);
    auto& t = *sw->target;
    t.start();
    AttackConfig cfg;
    cfg.round_interval = 1h;
    DbPrefill pre(*sw, t, cfg, 2);
    pre.start();
    sw->w().loop().run_for(2h);
    REQUIRE(pre.rounds().size() == 2);
    CHECK(pre.finished());
    for (const auto& r : pre.rounds()) {
        CHECK(r.persisted > 64);
        CHECK(r.end - r.start == cfg.round_poison_time);
    }
    for (const auto& b : pre.batches()) {
        CHECK(b.size() == 128);
        for (auto* a : b.nodes) {
            CHECK_FALSE(a->online());
            CHECK(bucket_index(t.id(), a->id()) >= 10);
        }
    }
    CHECK(pre.db_fraction() > 0.3);
    // nobody answers for them any more: records age out a day later
    sw->w().loop().run_for(26h);
    std::size_t left = 0;
    for (const auto& b : pre.batches())
        for (auto* a : b.nodes) left += t.db().contains(a->id());
    CHECK(left == 0);
}

TEST_CASE("slot campaign never overfills a peer and drains residual capacity") {
    auto p = small_profile();
    p.churn.enabled = false;
    auto sw = build_world(p, 6);
    AttackConfig cfg;
    cfg.slot_occupiers = 60;
    auto c = occupy_available_slots(*sw, cfg);
    const auto s0 = c->sample();
    CHECK(s0.residual == 80);
    sw->w().loop().run_for(2h);
    const auto s1 = c->sample();
    CHECK(s1.residual < 10);
    for (auto* n : sw->network_peers) CHECK(n->used_slots() <= n->free_slots());
    // each occupier holds at most one connection per peer
    for (auto* a : c->occupiers().nodes) CHECK(a->connections().size() <= sw->network_peers.size());
}

TEST_CASE("inbound hijack fills all 34 slots right after a restart") {
    const auto r = incoming_hijack_trial(7, 40, false, 30s, small_profile());
    REQUIRE(r.seconds_to_full);
    CHECK(*r.seconds_to_full <= 30);
    CHECK(r.attacker_inbound == kMaxInbound);
}

TEST_CASE("run_eclipse sequences the stages") {
    Scenario s;
    s.profile = small_profile();
    s.profile.dns_poison_rate = 0.5;
    s.attack.db_rounds = 1;
    s.attack.slot_occupiers = 60;
    s.attack.dns_attackers = 250;
    s.plan.restart_at = 2h;
    s.plan.downtime = 1h;
    s.plan.budget = 8h;
    const auto r = eclipse_trial(s, 8);
    std::vector<std::string> order;
    for (const auto& st : r.stages) order.push_back(st.stage);
    REQUIRE(order.size() >= 5);
    CHECK(order[0] == "db_pre_filling_attack");
    CHECK(order[1] == "dns_list_poisoning_attack");
    CHECK(order[2] == "occupy_available_slots");
    CHECK(order[3] == "discovery_table_poisoning_attack");
    CHECK(order[4] == "occupy_in_connections");
    CHECK(r.stages[2].at >= kEpoch + 2h);
    CHECK(r.stages[3].at >= kEpoch + 3h);
    if (r.eclipse_success) {
        CHECK(order.back() == "eclipsed");
        CHECK(r.series.back().in == kMaxInbound);
        CHECK(r.series.back().out == kMaxOutbound);
    }
    const auto j = r.to_json();
    CHECK(j.contains("stages"));
    CHECK(r.csv().rfind("t_ms,last2", 0) == 0);
}

TEST_CASE("six hours of poisoning takes most of a fresh table") {
    TablePoisonOptions o;
    o.duration = 6h;
    o.measure_refill = false;
    const auto r = table_poisoning_trial(9, o);
    CHECK(r.fill_last17 > 0.85);
    CHECK(r.table_size <= static_cast<std::size_t>(kTableCapacity));
    o.ping_blacklist = true;
    CHECK(table_poisoning_trial(9, o).fill_last17 < 0.2);
}

#include "doctest.h"

#include "eclipse/attack.hpp"

using namespace eclipse;
using namespace std::chrono_literals;

namespace {

NodeRecord rec(Rng& rng, std::uint32_t ip) { return NodeRecord{NodeId::random(rng), Ipv4(ip), 30303, 30303}; }

DnsList list_of(Rng& rng, std::vector<std::int64_t> scores) {
    DnsList l;
    std::sort(scores.rbegin(), scores.rend());
    std::uint32_t ip = 0x05000000;
    for (auto s : scores) l.entries.push_back(DnsEntry{rec(rng, ++ip), s});
    return l;
}

}  // namespace

TEST_CASE("grants: +1, at most once per 10 minutes") {
    Rng rng(1);
    CrawlerScores s;
    const auto r = rec(rng, 1);
    CHECK(s.grant(r, kEpoch));
    CHECK_FALSE(s.grant(r, kEpoch + 9min + 59s));
    CHECK_FALSE(s.grant_allowed(r.id, kEpoch + 9min));
    CHECK(s.grant_allowed(r.id, kEpoch + 10min));
    CHECK(s.grant(r, kEpoch + 10min));
    CHECK(s.find(r.id)->score == 2);
    // 30 minutes of constant offers yields 3 grants
    CrawlerScores t;
    for (auto at = kEpoch; at < kEpoch + 30min; at += 1s) t.grant(r, at);
    CHECK(t.find(r.id)->score == 3);
}

TEST_CASE("halving: 8 -> 4 and never stuck at zero") {
    Rng rng(2);
    CrawlerScores s;
    auto e = DnsEntry{rec(rng, 1), 8};
    s.seed(e);
    s.halve(e.record.id);
    CHECK(s.find(e.record.id)->score == 4);
    // from any start, repeated failures go negative in bounded steps
    for (std::int64_t start : {0, 1, 2, 3, 1000, 2688}) {
        e.score = start;
        s.seed(e);
        int steps = 0;
        while (s.find(e.record.id)->score >= 0) {
            s.halve(e.record.id);
            REQUIRE(++steps < 64);
        }
        CHECK(s.find(e.record.id)->score == -1);
    }
    CHECK(s.evict_negative() == 1);
    CHECK(s.size() == 0);
}

TEST_CASE("aggregate_top_n merges by max, drops negatives, sorts and truncates") {
    Rng rng(3);
    const auto a = rec(rng, 1), b = rec(rng, 2), c = rec(rng, 3), d = rec(rng, 4);
    std::vector<std::vector<DnsEntry>> lists{{{a, 5}, {b, 9}, {c, -1}}, {{a, 12}, {d, 1}}};
    const auto l = aggregate_top_n(lists, 2);
    REQUIRE(l.size() == 2);
    CHECK(l.entries[0].record.id == a.id);
    CHECK(l.entries[0].score == 12);
    CHECK(l.entries[1].record.id == b.id);
    CHECK_FALSE(l.contains(c.id));
    CHECK(aggregate_top_n(lists, 10).size() == 3);
}

TEST_CASE("fill-time estimator against the published table") {
    const std::vector<std::int64_t> scores{275, 325, 506, 831, 2688};
    const std::vector<std::int64_t> published_days{54, 64, 100, 166, 538};
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto d = estimate_fill_time(scores[i]);
        CHECK(std::abs(d - published_days[i]) <= 2);
        // the overtaking day: advantage * d reaches the score, one day less does not
        CHECK(static_cast<double>(d) * kDailyAdvantage >= static_cast<double>(scores[i]));
        CHECK(static_cast<double>(d - 1) * kDailyAdvantage < static_cast<double>(scores[i]));
    }
    CHECK(estimate_fill_time(0) == 0);
    CHECK_THROWS_AS(estimate_fill_time(10, 0), std::invalid_argument);
    CHECK_THROWS_AS(estimate_fill_time(-1), std::invalid_argument);
}

TEST_CASE("poison_lowest replaces the bottom of the list in place") {
    Rng rng(4);
    auto l = list_of(rng, {50, 40, 30, 20, 10, 5, 4, 3});
    std::vector<NodeRecord> att;
    for (int i = 0; i < 8; ++i) att.push_back(rec(rng, 0x09000000u + static_cast<std::uint32_t>(i)));
    const auto p = poison_lowest(l, 0.25, att);
    CHECK(p.size() == l.size());
    for (std::size_t i = 0; i < 6; ++i) CHECK(p.entries[i].record.id == l.entries[i].record.id);
    CHECK(p.entries[6].record.id == att[1].id);
    CHECK(p.entries[7].record.id == att[0].id);
    CHECK(p.entries[7].score == 3);
    CHECK(poison_lowest(l, 0, att).entries[7].record.id == l.entries[7].record.id);
    CHECK_THROWS_AS(poison_lowest(l, 1.0, std::vector<NodeRecord>(att.begin(), att.begin() + 3)), std::invalid_argument);
}

TEST_CASE("per-IP cap and report threshold") {
    Rng rng(5);
    DnsList l;
    for (int i = 0; i < 10; ++i) l.entries.push_back(DnsEntry{NodeRecord{NodeId::random(rng), Ipv4(7, 7, 7, 7), 30303, 30303}, 100 - i});
    l.entries.push_back(DnsEntry{rec(rng, 0x01010101), 1});
    DnsDefenses d{true, 2, 3};
    const auto out = apply_dns_defenses(l, d);
    CHECK(out.size() == 3);
    CHECK(out.entries[0].score == 100);
    CHECK(out.entries[1].score == 99);
    std::unordered_map<NodeId, std::size_t, NodeIdHash> reports{{l.entries[0].record.id, 3}, {l.entries[1].record.id, 2}};
    const auto rep = apply_dns_defenses(l, d, reports);
    CHECK_FALSE(rep.contains(l.entries[0].record.id));
    CHECK(rep.contains(l.entries[1].record.id));
    CHECK(apply_dns_defenses(l, DnsDefenses{}).size() == l.size());
}

TEST_CASE("list JSON round trip") {
    Rng rng(6);
    auto l = list_of(rng, {9, 7, 3});
    l.top_n = 3;
    const auto back = dns_list_from_json(to_json(l));
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.entries[i].record.id == l.entries[i].record.id);
        CHECK(back.entries[i].record.ip == l.entries[i].record.ip);
        CHECK(back.entries[i].score == l.entries[i].score);
    }
    CHECK_THROWS(dns_list_from_json(nlohmann::json{{"nodes", nlohmann::json::array()}}));
}

TEST_CASE("client resolution keeps list order") {
    Rng rng(7);
    const auto l = list_of(rng, {3, 2, 1});
    const auto r = client_resolve(l);
    REQUIRE(r.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(r[i].id == l.entries[i].record.id);
}

TEST_CASE("crawler: schedule, per-crawl gains and the grant throttle") {
    auto p = sepolia_profile();
    p.with_crawler = true;
    p.network_nodes = 300;
    p.foreign_nodes = 300;
    p.free_slot_nodes = 50;
    p.dns_top_n = 100;
    p.churn.enabled = false;
    auto sw = build_world(p, 3);
    auto& c = *sw->crawler;
    AttackConfig cfg;
    cfg.ping_interval = 60s;
    c.start();
    auto d = dns_list_poisoning(*sw, c, cfg, 3);
    c.schedule_crawls(1min);
    const auto snapshot = [&] {
        std::map<NodeId, std::int64_t> m;
        for (const auto& [id, e] : c.scores().entries()) m[id] = e.score;
        return m;
    };
    sw->w().loop().run_for(7 * 24h);

    // start times exactly 5 h 40 min apart: 4-5 a day
    const auto& crawls = c.crawls();
    REQUIRE(crawls.size() >= 29);
    for (std::size_t i = 1; i < crawls.size(); ++i) CHECK(crawls[i].start - crawls[i - 1].start == kCrawlInterval);

    // throttle: consecutive grants to one id are >= 10 min apart
    std::unordered_map<NodeId, SimTime, NodeIdHash> last;
    for (const auto& g : c.scores().grants()) {
        if (auto it = last.find(g.id); it != last.end()) CHECK(g.at - it->second >= kEnrGrantThrottle);
        last[g.id] = g.at;
    }

    // one more crawl: attackers +3, always-online honest nodes at least +1
    const auto before = snapshot();
    sw->w().loop().run_for(kCrawlInterval);
    const auto after = snapshot();
    for (auto* a : d.scorers.nodes) CHECK(after.at(a->id()) - before.at(a->id()) == 3);
    int benign = 0;
    for (auto* n : sw->network_peers)
        if (before.count(n->id()) && after.count(n->id())) {
            const auto g = after.at(n->id()) - before.at(n->id());
            CHECK(g >= 1);
            CHECK(g <= 3);
            ++benign;
        }
    CHECK(benign > 50);
}

TEST_CASE("crawler halves nodes that went offline") {
    auto p = sepolia_profile();
    p.with_crawler = true;
    p.network_nodes = 100;
    p.foreign_nodes = 0;
    p.free_slot_nodes = 10;
    p.dns_top_n = 50;
    p.churn.enabled = false;
    auto sw = build_world(p, 4);
    auto& c = *sw->crawler;
    c.start();
    // a node from the list goes away before the crawl
    const auto& victim = sw->honest_dns.entries.front();
    auto* peer = dynamic_cast<PassivePeer*>(sw->w().find(victim.record.id));
    REQUIRE(peer);
    peer->set_online(false);
    const auto s0 = c.scores().find(victim.record.id)->score;
    c.crawl();
    sw->w().loop().run_for(31min);
    CHECK(c.scores().find(victim.record.id)->score == (s0 > 1 ? s0 / 2 : -1));
}

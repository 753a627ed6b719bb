#include "doctest.h"

#include "eclipse/table.hpp"

#include <cstdio>

using namespace eclipse;
using namespace std::chrono_literals;

namespace {

NodeRecord rec(const NodeId& id, std::uint8_t last = 1) { return NodeRecord{id, Ipv4(10, 9, last, 1), 30303, 30303}; }

DbRecord dbrec(const NodeId& id, SimTime pong) {
    DbRecord r;
    r.record = rec(id);
    r.last_pong = pong;
    return r;
}

}  // namespace

TEST_CASE("expire_cycle removes records older than 24h") {
    NodeDatabase db;
    Rng rng(1);
    const auto a = NodeId::random(rng), b = NodeId::random(rng);
    const SimTime now = kEpoch + 48h;
    db.upsert(dbrec(a, now - 25h));
    db.upsert(dbrec(b, now - 1h));
    CHECK(db.expire_cycle(now) == 1);
    CHECK(!db.contains(a));
    CHECK(db.contains(b));
    NodeDatabase empty;
    CHECK(empty.expire_cycle(now) == 0);
    // the boundary is strict: exactly 24h survives
    db.upsert(dbrec(a, now - 24h));
    CHECK(db.expire_cycle(now) == 0);
    CHECK(db.expire_cycle(now + 1ms) == 1);
}

TEST_CASE("update_lastpong only touches present ids") {
    NodeDatabase db;
    Rng rng(2);
    const auto a = NodeId::random(rng), b = NodeId::random(rng);
    db.upsert(dbrec(a, kEpoch));
    db.update_lastpong(a, kEpoch + 2h);
    CHECK(db.find(a)->last_pong == kEpoch + 2h);
    db.update_lastpong(b, kEpoch + 2h);
    CHECK(!db.contains(b));
    CHECK(db.size() == 1);
    CHECK(db.expire_cycle(kEpoch + 25h) == 0);
}

TEST_CASE("seed query matches a linear scan for every draw") {
    // 8 ids spread over the top byte; draws enumerate every top byte value
    NodeDatabase db;
    std::vector<NodeId> ids;
    for (std::uint64_t top : {3u, 40u, 41u, 90u, 128u, 200u, 201u, 250u}) {
        const NodeId id({top << 56, 0, 0, 0});
        ids.push_back(id);
        db.upsert(dbrec(id, kEpoch));
    }
    const auto scan = [&](const NodeId& draw) {
        const NodeId* best = nullptr;
        for (const auto& id : ids)
            if (id >= draw && (!best || id < *best)) best = &id;
        if (!best) best = &*std::min_element(ids.begin(), ids.end());
        return *best;
    };
    for (std::uint64_t top = 0; top < 256; ++top) {
        for (std::uint64_t low : {0ull, 1ull, ~0ull}) {
            const NodeId draw({(top << 56) | (low >> 8), low, low, low});
            CHECK(db.seed_for_draw(draw).id == scan(draw));
        }
    }
}

TEST_CASE("seed query drops duplicate hits and handles tiny dbs") {
    NodeDatabase db;
    Rng rng(3);
    CHECK(db.query_seeds(30, rng).empty());
    const auto a = NodeId::random(rng);
    db.upsert(dbrec(a, kEpoch));
    const auto seeds = db.query_seeds(30, rng);
    REQUIRE(seeds.size() == 1);
    CHECK(seeds[0].id == a);
}

TEST_CASE("persist_cycle applies the residence and liveness thresholds") {
    Rng rng(4);
    const auto self = NodeId::random(rng);
    DiscoveryTable t(self);
    const auto a = generate_id_in_bucket(rng, self, 17), b = generate_id_in_bucket(rng, self, 16),
               c = generate_id_in_bucket(rng, self, 15);
    t.add_seen_node(rec(a, 1), kEpoch, 2);   // resident 4 min at the check
    t.add_seen_node(rec(b, 2), kEpoch - 2min, 1);
    t.add_seen_node(rec(c, 3), kEpoch - 2min, 0);
    NodeDatabase db;
    CHECK(persist_cycle(db, t, kEpoch + 4min) == 1);
    CHECK(!db.contains(a));
    CHECK(db.contains(b));
    CHECK(!db.contains(c));
    // exactly 5 minutes is not "over 5 minutes"
    CHECK(persist_cycle(db, t, kEpoch + 5min) == 0);
    CHECK(persist_cycle(db, t, kEpoch + 5min + 1ms) == 1);
    CHECK(db.contains(a));
}

TEST_CASE("database survives a save/load round trip bit-exactly") {
    NodeDatabase db;
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        auto r = dbrec(NodeId::random(rng), kEpoch + std::chrono::minutes(i));
        r.liveness_checks = static_cast<std::uint32_t>(i);
        r.first_table_entry_at = kEpoch + std::chrono::seconds(i);
        db.upsert(r);
    }
    const std::string path = "nodedb_roundtrip.txt";
    db.save(path);
    const auto back = NodeDatabase::load(path);
    CHECK(back == db);
    std::remove(path.c_str());
    CHECK_THROWS(NodeDatabase::load("does/not/exist.txt"));
}

TEST_CASE("db_fill_stats") {
    NodeDatabase db;
    IdSet attackers;
    CHECK(db_fill_stats(db, attackers).size == 0);
    CHECK(db_fill_stats(db, attackers).attacker_fraction == 0.0);
    Rng rng(6);
    for (int i = 0; i < 10; ++i) {
        const auto id = NodeId::random(rng);
        db.upsert(dbrec(id, kEpoch));
        if (i < 4) attackers.insert(id);
    }
    CHECK(db_fill_stats(db, attackers).attacker_fraction == doctest::Approx(0.4));
}

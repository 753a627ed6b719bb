#include "doctest.h"

#include <sstream>

#include "eclipse/world.hpp"

using namespace eclipse;
using namespace std::chrono_literals;

namespace {

// Records everything it receives; sends whatever the test asks.
class Probe : public SimNode {
public:
    Probe(World& w, NodeRecord rec) : SimNode(w, rec, kTargetNetwork, Role::honest) { online_ = true; }
    std::vector<Message> inbox;
    bool answer_pings = true;

    void receive(const Message& m) override {
        inbox.push_back(m);
        if (m.kind == MsgKind::ping && answer_pings) world_.send(Message::pong(rec_, m.from.endpoint(), m.token));
    }
    ConnResult accept_tcp(const NodeRecord&, std::uint32_t) override { return ConnResult::accepted; }

    void send(Message m) { world_.send(std::move(m)); }
    std::size_t count(MsgKind k) const {
        std::size_t n = 0;
        for (const auto& m : inbox) n += m.kind == k;
        return n;
    }
};

NodeRecord rec(Rng& rng, std::uint8_t host) { return NodeRecord{NodeId::random(rng), Ipv4(10, 0, 0, host), 30303, 30303}; }

}  // namespace

TEST_CASE("bond book expiry is inclusive at 24 h") {
    Rng rng(3);
    const auto id = NodeId::random(rng);
    BondBook b;
    CHECK_FALSE(b.bonded(id, kEpoch));
    b.mark_pong(id, kEpoch);
    CHECK(b.bonded(id, kEpoch + kBondExpiry));
    CHECK_FALSE(b.bonded(id, kEpoch + kBondExpiry + 1ms));
    CHECK_FALSE(b.peer_bonded(id, kEpoch));
    b.mark_ping(id, kEpoch + 1h);
    CHECK(b.peer_bonded(id, kEpoch + 1h + kBondExpiry));
    CHECK_FALSE(b.peer_bonded(id, kEpoch + 1h + kBondExpiry + 1ms));
}

TEST_CASE("ping blacklist: sixth ping in a minute bans, bans double and cap") {
    Rng rng(4);
    const auto id = NodeId::random(rng);
    BlacklistConfig cfg;
    cfg.enabled = true;
    PingBlacklist bl(cfg);
    SimTime t = kEpoch;
    for (int i = 0; i < 5; ++i) CHECK(bl.on_ping(id, t + i * 1s) == PingBlacklist::Verdict::accepted);
    CHECK(bl.on_ping(id, t + 5s) == PingBlacklist::Verdict::newly_banned);
    CHECK(bl.banned(id, t + 5s + 59s));
    CHECK_FALSE(bl.banned(id, t + 5s + 60s));
    CHECK(bl.on_ping(id, t + 30s) == PingBlacklist::Verdict::dropped);

    // every later offence doubles, up to a day
    Duration expect = 1min;
    t += 5s;
    for (int strike = 0; strike < 14; ++strike) {
        REQUIRE(!bl.bans().empty());
        CHECK(bl.bans().back().length == std::min<Duration>(expect, 24h));
        t = bl.bans().back().at + bl.bans().back().length;
        for (int i = 0; i < 6; ++i) bl.on_ping(id, t + i * 1s);
        expect *= 2;
    }
    CHECK(bl.bans().back().length == Duration(24h));
}

TEST_CASE("ping blacklist: pings spaced out of the window never ban") {
    Rng rng(5);
    const auto id = NodeId::random(rng);
    BlacklistConfig cfg;
    cfg.enabled = true;
    PingBlacklist bl(cfg);
    // exactly 5 per trailing 60 s
    for (int i = 0; i < 1000; ++i) CHECK(bl.on_ping(id, kEpoch + i * 12s) == PingBlacklist::Verdict::accepted);
    PingBlacklist off;
    for (int i = 0; i < 100; ++i) CHECK(off.on_ping(id, kEpoch + i * 1ms) == PingBlacklist::Verdict::accepted);
    CHECK_FALSE(off.banned(id, kEpoch));
}

TEST_CASE("attacker findnode answers with the 16 closest of its own set") {
    Rng rng(6);
    std::vector<NodeRecord> all;
    for (int i = 0; i < 60; ++i) all.push_back(NodeRecord{NodeId::random(rng), Ipv4(9, 0, 0, static_cast<std::uint8_t>(i + 1)), 1, 1});
    const ClosestIndex idx(all);
    for (int q = 0; q < 50; ++q) {
        const auto target = NodeId::random(rng);
        auto brute = all;
        sort_by_distance(brute, target);
        brute.resize(kMaxNeighbors);
        const auto got = attacker_handle_findnode(idx, target);
        REQUIRE(got.size() == brute.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].id == brute[i].id);
    }
}

TEST_CASE("full node pings back an unbonded pinger and serves it afterwards") {
    World w(11, LatencyModel{1ms, 1ms});
    Rng rng(7);
    auto& node = w.add<FullNode>(rec(rng, 1), kTargetNetwork);
    auto& probe = w.add<Probe>(rec(rng, 2));
    node.start();
    w.loop().run_for(2s);
    probe.inbox.clear();

    // an unbonded FindNode is ignored
    probe.send(Message::find_node(probe.record(), node.record().endpoint(), 1, probe.id()));
    w.loop().run_for(1s);
    CHECK(probe.count(MsgKind::neighbors) == 0);

    probe.send(Message::ping(probe.record(), node.record().endpoint(), 2));
    w.loop().run_for(1s);
    CHECK(probe.count(MsgKind::pong) == 1);
    CHECK(probe.count(MsgKind::ping) == 1);   // the ping-back

    probe.send(Message::find_node(probe.record(), node.record().endpoint(), 3, probe.id()));
    probe.send(Message::enr_request(probe.record(), node.record().endpoint(), 4));
    w.loop().run_for(1s);
    CHECK(probe.count(MsgKind::neighbors) == 1);
    CHECK(probe.count(MsgKind::enr_response) == 1);
    // verified, so it went into the table
    CHECK(node.table().contains(probe.id()));

    // bonded: a second ping gets no ping-back
    probe.inbox.clear();
    probe.send(Message::ping(probe.record(), node.record().endpoint(), 5));
    w.loop().run_for(1s);
    CHECK(probe.count(MsgKind::ping) == 0);
}

TEST_CASE("a pinger that never answers the ping-back stays out of the table") {
    World w(12, LatencyModel{1ms, 1ms});
    Rng rng(8);
    auto& node = w.add<FullNode>(rec(rng, 1), kTargetNetwork);
    auto& probe = w.add<Probe>(rec(rng, 2));
    probe.answer_pings = false;
    node.start();
    probe.send(Message::ping(probe.record(), node.record().endpoint(), 1));
    w.loop().run_for(5s);
    CHECK_FALSE(node.table().contains(probe.id()));
}

TEST_CASE("banned pinger is dropped from the table and ignored") {
    World w(13, LatencyModel{1ms, 1ms});
    Rng rng(9);
    FullNodeConfig cfg;
    cfg.blacklist.enabled = true;
    auto& node = w.add<FullNode>(rec(rng, 1), kTargetNetwork, cfg);
    auto& probe = w.add<Probe>(rec(rng, 2));
    node.start();
    for (int i = 0; i < 5; ++i) {
        probe.send(Message::ping(probe.record(), node.record().endpoint(), static_cast<std::uint64_t>(i)));
        w.loop().run_for(1s);
    }
    CHECK(node.table().contains(probe.id()));
    probe.send(Message::ping(probe.record(), node.record().endpoint(), 9));
    w.loop().run_for(1s);
    CHECK_FALSE(node.table().contains(probe.id()));
    probe.inbox.clear();
    probe.send(Message::enr_request(probe.record(), node.record().endpoint(), 10));
    w.loop().run_for(1s);
    CHECK(probe.inbox.empty());
    CHECK(node.banned_drops() >= 2);
}

TEST_CASE("trace lines and trace hash") {
    Rng rng(10);
    const auto a = rec(rng, 1), b = rec(rng, 2);
    const auto line = trace_line(kEpoch + 1500ms, Message::ping(a, b.endpoint(), 1));
    CHECK(line == "1500 10.0.0.1:30303 10.0.0.2:30303 Ping");

    const auto run = [](std::uint64_t seed) {
        World w(seed);
        Rng r(1);
        auto& n = w.add<FullNode>(rec(r, 1), kTargetNetwork);
        auto& p = w.add<Probe>(rec(r, 2));
        n.start();
        std::ostringstream out;
        w.set_trace(&out);
        for (int i = 0; i < 20; ++i) p.send(Message::ping(p.record(), n.record().endpoint(), static_cast<std::uint64_t>(i)));
        w.loop().run_for(10s);
        return std::make_pair(w.loop().trace_hash(), out.str());
    };
    CHECK(run(5) == run(5));
    CHECK(run(5).first != run(6).first);
}

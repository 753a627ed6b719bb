#include "doctest.h"

#include "eclipse/core.hpp"

#include <set>

using namespace eclipse;

namespace {

// Bit-by-bit reference for log_distance.
int log_distance_oracle(const NodeId& a, const NodeId& b) {
    for (int i = 0; i < 256; ++i)
        if (a.bit(i) != b.bit(i)) return 256 - i;
    return 0;
}

NodeId id_with_first_bit() {
    NodeId x;
    x.set_bit(0, true);
    return x;
}

}  // namespace

TEST_CASE("log_distance trivial cases") {
    NodeId zero;
    CHECK(log_distance(zero, zero) == 0);
    CHECK(log_distance(zero, id_with_first_bit()) == 256);
    NodeId last;
    last.set_bit(255, true);
    CHECK(log_distance(zero, last) == 1);
}

TEST_CASE("log_distance matches a bit-loop oracle on a random sample") {
    Rng rng(7);
    for (int i = 0; i < 64; ++i) {
        const auto a = NodeId::random(rng);
        auto b = NodeId::random(rng);
        // force long shared prefixes on half the sample
        if (i % 2) {
            const int shared = static_cast<int>(rng() % 256);
            for (int k = 0; k < shared; ++k) b.set_bit(k, a.bit(k));
        }
        CHECK(log_distance(a, b) == log_distance_oracle(a, b));
    }
}

TEST_CASE("log_distance is symmetric and ultrametric") {
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const auto a = NodeId::random(rng), b = generate_id_in_bucket(rng, a, 1 + static_cast<int>(rng() % 17)),
                   c = generate_id_in_bucket(rng, a, 1 + static_cast<int>(rng() % 17));
        CHECK(log_distance(a, b) == log_distance(b, a));
        CHECK(log_distance(a, b) <= std::max(log_distance(a, c), log_distance(c, b)));
        CHECK((log_distance(a, b) == 0) == (a == b));
    }
}

TEST_CASE("bucket_index boundaries") {
    NodeId self;
    CHECK(bucket_index(self, id_with_first_bit()) == 17);
    NodeId d240;  // shares exactly 16 leading bits
    d240.set_bit(16, true);
    CHECK(log_distance(self, d240) == 240);
    CHECK(bucket_index(self, d240) == 1);
    NodeId d241;
    d241.set_bit(15, true);
    CHECK(bucket_index(self, d241) == 2);
    NodeId near;
    near.set_bit(200, true);
    CHECK(bucket_index(self, near) == 1);
    CHECK_THROWS_AS(bucket_index(self, self), std::invalid_argument);
}

TEST_CASE("bucket_probability closed form") {
    CHECK(bucket_probability(17) == 0.5);
    CHECK(bucket_probability(16) == 0.25);
    CHECK(bucket_probability(1) == std::ldexp(1.0, -16));
    CHECK(bucket_probability(16) + bucket_probability(17) == 0.75);
    double last5 = 0;
    for (int k = 13; k <= 17; ++k) last5 += bucket_probability(k);
    CHECK(last5 == 31.0 / 32.0);
    double total = 0;
    for (int k = 1; k <= 17; ++k) total += bucket_probability(k);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(bucket_probability(0), std::out_of_range);
    CHECK_THROWS_AS(bucket_probability(18), std::out_of_range);
}

TEST_CASE("uniform ids hit buckets at the closed-form rate") {
    Rng rng(2024);
    const auto self = NodeId::random(rng);
    constexpr int n = 1'000'000;
    std::array<int, 18> hits{};
    for (int i = 0; i < n; ++i) ++hits[static_cast<std::size_t>(bucket_index(self, NodeId::random(rng)))];
    for (int k = 12; k <= 17; ++k) {
        const double p = bucket_probability(k);
        const double se = std::sqrt(p * (1 - p) / n);
        CHECK(std::abs(hits[static_cast<std::size_t>(k)] / double(n) - p) < 3 * se + 1e-12);
    }
}

TEST_CASE("subnet keys") {
    CHECK(subnet_key(Ipv4::parse("10.1.2.3")) == subnet_key(Ipv4::parse("10.1.2.250")));
    CHECK(subnet_key(Ipv4::parse("10.1.2.3")) != subnet_key(Ipv4::parse("10.1.3.3")));
    CHECK(subnet_key(Ipv4::parse("0.0.0.0")).prefix == 0);
    CHECK(Ipv4::parse("192.168.0.17").str() == "192.168.0.17");
    CHECK_THROWS(Ipv4::parse("1.2.3"));
    CHECK_THROWS(Ipv4::parse("1.2.3.256"));
    CHECK_THROWS(Ipv4::parse("1..2.3"));
}

TEST_CASE("generate_node_id leading zeros and determinism") {
    Rng rng(5);
    CHECK(generate_node_id(rng, 256).is_zero());
    const auto id8 = generate_node_id(rng, 8);
    CHECK((id8.words()[0] >> 56) == 0);
    Rng a(99), b(99);
    CHECK(generate_node_id(a, 0) == generate_node_id(b, 0));
    // zero-prefixed ids sort before any id with a nonzero prefix
    Rng r(3);
    for (int i = 0; i < 200; ++i) {
        const auto z = generate_node_id(r, 12);
        auto other = NodeId::random(r);
        bool prefix_zero = true;
        for (int k = 0; k < 12; ++k) prefix_zero &= !other.bit(k);
        if (!prefix_zero) CHECK(z < other);
    }
    CHECK_THROWS(generate_node_id(rng, 257));
}

TEST_CASE("generate_id_in_bucket lands in the requested bucket") {
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const auto self = NodeId::random(rng);
        for (int k = 1; k <= 17; ++k) CHECK(bucket_index(self, generate_id_in_bucket(rng, self, k)) == k);
    }
}

TEST_CASE("node id hex round trip") {
    Rng rng(4);
    const auto id = NodeId::random(rng);
    CHECK(NodeId::from_hex(id.hex()) == id);
    CHECK(id.hex().size() == 64);
    CHECK_THROWS(NodeId::from_hex("abc"));
}

TEST_CASE("ClosestIndex equals brute force") {
    Rng rng(12);
    for (int n : {1, 5, 16, 17, 64, 500}) {
        std::vector<NodeRecord> recs;
        for (int i = 0; i < n; ++i) recs.push_back(NodeRecord{NodeId::random(rng), Ipv4(10, 0, 0, 1), 1, 1});
        // a few ids sharing long prefixes
        for (int i = 0; i < 4 && n > 4; ++i) {
            auto id = recs[0].id;
            id.set_bit(200 + i, !id.bit(200 + i));
            recs.push_back(NodeRecord{id, Ipv4(10, 0, 0, 2), 1, 1});
        }
        ClosestIndex idx(recs);
        for (int q = 0; q < 50; ++q) {
            const auto target = q % 5 == 0 ? recs[static_cast<std::size_t>(q) % recs.size()].id : NodeId::random(rng);
            auto brute = recs;
            sort_by_distance(brute, target);
            brute.resize(std::min<std::size_t>(16, brute.size()));
            const auto got = idx.closest(target, 16);
            REQUIRE(got.size() == brute.size());
            for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].id == brute[i].id);
        }
    }
}

TEST_CASE("stratified ids fall in their slice") {
    Rng rng(1);
    for (std::uint64_t i = 0; i < 100; ++i) {
        const auto id = generate_stratified_id(rng, i, 100);
        const double f = id.as_fraction();
        CHECK(f >= i / 100.0 - 1e-12);
        CHECK(f < (i + 1) / 100.0 + 1e-12);
    }
}

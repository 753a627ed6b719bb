// Node identity, XOR metric, bucket mapping and IPv4 subnet keys.
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eclipse {

// Simulated time. Millisecond resolution, epoch is the start of a world.
struct SimClock {
    using rep = std::int64_t;
    using period = std::milli;
    using duration = std::chrono::milliseconds;
    using time_point = std::chrono::time_point<SimClock>;
    static constexpr bool is_steady = true;
};
using Duration = SimClock::duration;
using SimTime = SimClock::time_point;

inline constexpr SimTime kEpoch{};

inline std::int64_t to_ms(SimTime t) { return t.time_since_epoch().count(); }
inline double to_hours(Duration d) { return static_cast<double>(d.count()) / 3'600'000.0; }

using Rng = std::mt19937_64;

// splitmix64 finalizer; derives independent stream seeds from (base, index).
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

template <class Rep, class Period>
Duration uniform_duration(Rng& rng, std::chrono::duration<Rep, Period> lo,
                          std::chrono::duration<Rep, Period> hi) {
    const auto a = std::chrono::duration_cast<Duration>(lo).count();
    const auto b = std::chrono::duration_cast<Duration>(hi).count();
    return Duration{std::uniform_int_distribution<std::int64_t>(a, b)(rng)};
}

// 256-bit opaque node identity. words[0] holds the most significant bits, so
// the defaulted comparison is plain numeric (lexicographic) order.
class NodeId {
public:
    static constexpr int kBits = 256;

    constexpr NodeId() = default;
    constexpr explicit NodeId(std::array<std::uint64_t, 4> words) : words_(words) {}

    static NodeId random(Rng& rng) {
        return NodeId({rng(), rng(), rng(), rng()});
    }

    static NodeId from_hex(std::string_view hex) {
        if (hex.size() != 64) throw std::invalid_argument("node id must be 64 hex characters");
        std::array<std::uint64_t, 4> w{};
        for (std::size_t i = 0; i < 64; ++i) {
            const char c = hex[i];
            std::uint64_t v;
            if (c >= '0' && c <= '9') v = static_cast<std::uint64_t>(c - '0');
            else if (c >= 'a' && c <= 'f') v = static_cast<std::uint64_t>(c - 'a' + 10);
            else if (c >= 'A' && c <= 'F') v = static_cast<std::uint64_t>(c - 'A' + 10);
            else throw std::invalid_argument("invalid hex digit in node id");
            w[i / 16] = (w[i / 16] << 4) | v;
        }
        return NodeId(w);
    }

    std::string hex() const {
        static constexpr char digits[] = "0123456789abcdef";
        std::string out(64, '0');
        for (std::size_t i = 0; i < 64; ++i) {
            const auto shift = 60 - 4 * (i % 16);
            out[i] = digits[(words_[i / 16] >> shift) & 0xf];
        }
        return out;
    }

    // Bit i counted from the most significant end (bit 0 is the top bit).
    constexpr bool bit(int i) const {
        return (words_[static_cast<std::size_t>(i / 64)] >> (63 - i % 64)) & 1U;
    }
    constexpr void set_bit(int i, bool v) {
        const auto mask = std::uint64_t{1} << (63 - i % 64);
        auto& w = words_[static_cast<std::size_t>(i / 64)];
        w = v ? (w | mask) : (w & ~mask);
    }

    constexpr const std::array<std::uint64_t, 4>& words() const { return words_; }

    constexpr NodeId operator^(const NodeId& o) const {
        return NodeId({words_[0] ^ o.words_[0], words_[1] ^ o.words_[1], words_[2] ^ o.words_[2],
                       words_[3] ^ o.words_[3]});
    }

    constexpr bool is_zero() const {
        return (words_[0] | words_[1] | words_[2] | words_[3]) == 0;
    }

    constexpr auto operator<=>(const NodeId&) const = default;
    constexpr bool operator==(const NodeId&) const = default;

    // Position of this id in [0, 1) when read as a binary fraction; used by
    // reporting and by stratified id generation.
    double as_fraction() const { return std::ldexp(static_cast<double>(words_[0]), -64); }

private:
    std::array<std::uint64_t, 4> words_{};
};

struct NodeIdHash {
    std::size_t operator()(const NodeId& id) const noexcept {
        const auto& w = id.words();
        return static_cast<std::size_t>(w[0] ^ (w[1] * 0x9e3779b97f4a7c15ULL) ^ (w[3] >> 7));
    }
};

inline int common_prefix_bits(const NodeId& a, const NodeId& b) {
    const auto x = a ^ b;
    for (std::size_t i = 0; i < 4; ++i) {
        if (x.words()[i] != 0) return static_cast<int>(64 * i) + std::countl_zero(x.words()[i]);
    }
    return NodeId::kBits;
}

// 256 minus the number of common leading bits; 0 iff a == b.
inline int log_distance(const NodeId& a, const NodeId& b) {
    return NodeId::kBits - common_prefix_bits(a, b);
}

// True when a is strictly closer to target than b under the XOR metric.
inline bool closer_to(const NodeId& target, const NodeId& a, const NodeId& b) {
    return (a ^ target) < (b ^ target);
}

inline constexpr int kBucketCount = 17;
inline constexpr int kBucketSize = 16;
inline constexpr int kTableCapacity = kBucketCount * kBucketSize;
inline constexpr int kBucketMinDistance = 240;

// Maps a peer to one of the 17 buckets: distances >= 240 go to d - 239, all
// nearer distances share bucket 1.
inline int bucket_index(const NodeId& self, const NodeId& other) {
    if (self == other) throw std::invalid_argument("self-entry: a node never buckets itself");
    const int d = log_distance(self, other);
    return d >= kBucketMinDistance ? d - (kBucketMinDistance - 1) : 1;
}

// Probability that a uniformly random id lands in bucket k.
inline double bucket_probability(int k) {
    if (k < 1 || k > kBucketCount) throw std::out_of_range("bucket index must be in [1, 17]");
    if (k == 1) return std::ldexp(1.0, -16);
    return std::ldexp(1.0, k - 18);
}

// Uniform id whose first leading_zero_bits bits are zero.
inline NodeId generate_node_id(Rng& rng, int leading_zero_bits = 0) {
    if (leading_zero_bits < 0 || leading_zero_bits > NodeId::kBits) {
        throw std::invalid_argument("leading_zero_bits must be in [0, 256]");
    }
    auto id = NodeId::random(rng);
    for (int i = 0; i < leading_zero_bits; ++i) id.set_bit(i, false);
    return id;
}

// Uniform id that falls into bucket k as seen from self. This is what an
// attacker grinds keys for when it wants a slot in a particular bucket.
inline NodeId generate_id_in_bucket(Rng& rng, const NodeId& self, int k) {
    if (k < 1 || k > kBucketCount) throw std::out_of_range("bucket index must be in [1, 17]");
    for (;;) {
        auto id = NodeId::random(rng);
        if (k == 1) {
            // share at least 16 leading bits
            for (int i = 0; i < 16; ++i) id.set_bit(i, self.bit(i));
        } else {
            const int shared = NodeId::kBits - (k + kBucketMinDistance - 1);
            for (int i = 0; i < shared; ++i) id.set_bit(i, self.bit(i));
            id.set_bit(shared, !self.bit(shared));
        }
        if (id != self) return id;
    }
}

// Id placed uniformly inside slice `index` of `count` equal slices of the key
// space. Spreading ids over slices maximises the key-space gap each id owns.
inline NodeId generate_stratified_id(Rng& rng, std::uint64_t index, std::uint64_t count) {
    if (count == 0 || index >= count) throw std::out_of_range("slice index out of range");
    auto id = NodeId::random(rng);
    auto words = id.words();
    // slice boundaries are taken on the top 64 bits; ties below that are random
    const long double width = 18446744073709551616.0L / static_cast<long double>(count);
    const long double lo = width * static_cast<long double>(index);
    const long double off = width * static_cast<long double>(uniform01(rng));
    long double v = lo + off;
    if (v >= 18446744073709551615.0L) v = 18446744073709551615.0L;
    words[0] = static_cast<std::uint64_t>(v);
    return NodeId(words);
}

// IPv4 address held in host order.
class Ipv4 {
public:
    constexpr Ipv4() = default;
    constexpr explicit Ipv4(std::uint32_t value) : value_(value) {}
    constexpr Ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
        : value_((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) | d) {}

    static Ipv4 parse(std::string_view s) {
        std::uint32_t parts[4]{};
        std::size_t part = 0;
        bool digit_seen = false;
        for (const char c : s) {
            if (c == '.') {
                if (!digit_seen || ++part > 3) throw std::invalid_argument("malformed IPv4 address");
                digit_seen = false;
            } else if (c >= '0' && c <= '9') {
                parts[part] = parts[part] * 10 + static_cast<std::uint32_t>(c - '0');
                if (parts[part] > 255) throw std::invalid_argument("malformed IPv4 address");
                digit_seen = true;
            } else {
                throw std::invalid_argument("malformed IPv4 address");
            }
        }
        if (part != 3 || !digit_seen) throw std::invalid_argument("malformed IPv4 address");
        return Ipv4((parts[0] << 24) | (parts[1] << 16) | (parts[2] << 8) | parts[3]);
    }

    std::string str() const {
        return std::to_string(value_ >> 24) + '.' + std::to_string((value_ >> 16) & 0xff) + '.' +
               std::to_string((value_ >> 8) & 0xff) + '.' + std::to_string(value_ & 0xff);
    }

    constexpr std::uint32_t value() const { return value_; }
    constexpr auto operator<=>(const Ipv4&) const = default;

private:
    std::uint32_t value_ = 0;
};

// First three octets of an IPv4 address.
struct SubnetKey {
    std::uint32_t prefix = 0;
    constexpr auto operator<=>(const SubnetKey&) const = default;
};

constexpr SubnetKey subnet_key(Ipv4 ip) { return SubnetKey{ip.value() >> 8}; }

struct SubnetKeyHash {
    std::size_t operator()(SubnetKey k) const noexcept { return std::hash<std::uint32_t>{}(k.prefix); }
};

struct Endpoint {
    Ipv4 ip;
    std::uint16_t udp_port = 0;
    constexpr auto operator<=>(const Endpoint&) const = default;
};

struct EndpointHash {
    std::size_t operator()(const Endpoint& e) const noexcept {
        return std::hash<std::uint64_t>{}((std::uint64_t{e.ip.value()} << 16) | e.udp_port);
    }
};

// Abstract node record: identity, endpoint and sequence number. No signature.
struct NodeRecord {
    NodeId id;
    Ipv4 ip;
    std::uint16_t udp_port = 0;
    std::uint16_t tcp_port = 0;
    std::uint64_t seq = 1;

    Endpoint endpoint() const { return Endpoint{ip, udp_port}; }
    bool valid_endpoint() const { return udp_port != 0 && tcp_port != 0; }
    bool operator==(const NodeRecord&) const = default;
};

// Sorts candidates by XOR distance to target and keeps at most n.
inline void sort_by_distance(std::vector<NodeRecord>& records, const NodeId& target) {
    std::sort(records.begin(), records.end(), [&](const NodeRecord& a, const NodeRecord& b) {
        return closer_to(target, a.id, b.id);
    });
}

// Static id set answering "k closest to target" queries in O(log n + k log k).
// The k XOR-closest ids always lie inside the smallest aligned prefix block
// around the target that holds at least k ids.
class ClosestIndex {
public:
    ClosestIndex() = default;
    explicit ClosestIndex(std::vector<NodeRecord> records) : records_(std::move(records)) {
        std::sort(records_.begin(), records_.end(),
                  [](const NodeRecord& a, const NodeRecord& b) { return a.id < b.id; });
    }

    std::size_t size() const { return records_.size(); }
    const std::vector<NodeRecord>& records() const { return records_; }

    std::vector<NodeRecord> closest(const NodeId& target, std::size_t k) const {
        if (records_.empty() || k == 0) return {};
        if (records_.size() <= k) {
            auto all = records_;
            sort_by_distance(all, target);
            return all;
        }
        // longest prefix whose block still holds at least k ids; block size is
        // non-increasing in the prefix length
        int good = 0, bad = NodeId::kBits + 1;
        while (bad - good > 1) {
            const int mid = (good + bad) / 2;
            const auto [a, b] = block(target, mid);
            if (b - a >= k) good = mid;
            else bad = mid;
        }
        const auto [lo, hi] = block(target, good);
        std::vector<NodeRecord> out(records_.begin() + static_cast<std::ptrdiff_t>(lo),
                                    records_.begin() + static_cast<std::ptrdiff_t>(hi));
        std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k), out.end(),
                          [&](const NodeRecord& x, const NodeRecord& y) { return closer_to(target, x.id, y.id); });
        out.resize(k);
        return out;
    }

private:
    std::pair<std::size_t, std::size_t> block(const NodeId& target, int prefix) const {
        auto lo_w = target.words(), hi_w = target.words();
        for (int w = 0; w < 4; ++w) {
            const int keep = std::clamp(prefix - 64 * w, 0, 64);
            const std::uint64_t mask = keep == 64 ? ~std::uint64_t{0} : keep == 0 ? 0 : ~(~std::uint64_t{0} >> keep);
            lo_w[static_cast<std::size_t>(w)] &= mask;
            hi_w[static_cast<std::size_t>(w)] |= ~mask;
        }
        const NodeId lo_id(lo_w), hi_id(hi_w);
        const auto cmp = [](const NodeRecord& r, const NodeId& id) { return r.id < id; };
        const auto a = std::lower_bound(records_.begin(), records_.end(), lo_id, cmp);
        const auto b = std::upper_bound(records_.begin(), records_.end(), hi_id,
                                        [](const NodeId& id, const NodeRecord& r) { return id < r.id; });
        return {static_cast<std::size_t>(a - records_.begin()), static_cast<std::size_t>(b - records_.begin())};
    }

    std::vector<NodeRecord> records_;
};

}  // namespace eclipse

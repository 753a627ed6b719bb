// Simulated world: node registry, message delivery, TCP dialing and the node
// runtimes (full node, lightweight honest peer, attacker, crawler).
#pragma once

#include <memory>
#include <ostream>
#include <unordered_map>

#include "eclipse/conn.hpp"
#include "eclipse/dnsdisc.hpp"
#include "eclipse/engine.hpp"
#include "eclipse/proto.hpp"

namespace eclipse {

inline constexpr std::uint16_t kDefaultPort = 30303;
inline constexpr std::uint32_t kTargetNetwork = 11155111;   // the network the target runs on
inline constexpr std::uint32_t kForeignNetwork = 1;

struct LatencyModel {
    Duration min = std::chrono::milliseconds(20);
    Duration max = std::chrono::milliseconds(200);
    Duration sample(Rng& rng) const { return uniform_duration(rng, min, max); }
};

struct NetStats {
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped_offline = 0;
    std::uint64_t dropped_unknown = 0;
    std::uint64_t dials = 0;
};

enum class Role : std::uint8_t { honest, attacker, crawler, target };

class World;

class SimNode {
public:
    SimNode(World& w, NodeRecord rec, std::uint32_t network, Role role) : world_(w), rec_(rec), network_(network), role_(role) {}
    virtual ~SimNode() = default;
    SimNode(const SimNode&) = delete;
    SimNode& operator=(const SimNode&) = delete;

    const NodeRecord& record() const { return rec_; }
    const NodeId& id() const { return rec_.id; }
    std::uint32_t network() const { return network_; }
    Role role() const { return role_; }
    bool online() const { return online_; }
    std::uint64_t incarnation() const { return incarnation_; }

    virtual void receive(const Message& m) = 0;
    virtual ConnResult accept_tcp(const NodeRecord& dialer, std::uint32_t network) = 0;
    virtual void on_tcp_closed(const NodeId&) {}

protected:
    World& world_;
    NodeRecord rec_;
    std::uint32_t network_;
    Role role_;
    bool online_ = false;
    std::uint64_t incarnation_ = 0;
};

class World {
public:
    explicit World(std::uint64_t seed, LatencyModel latency = {})
        : seed_(seed), rng_(mix_seed(seed, 0)), latency_(latency) {}

    EventLoop& loop() { return loop_; }
    SimTime now() const { return loop_.now(); }
    Rng& rng() { return rng_; }
    std::uint64_t seed() const { return seed_; }
    const LatencyModel& latency() const { return latency_; }
    const NetStats& stats() const { return stats_; }

    // Independent stream for the next registered component.
    Rng fork_rng() { return Rng(mix_seed(seed_, ++streams_)); }

    template <class T, class... Args>
    T& add(Args&&... args) {
        auto node = std::make_unique<T>(*this, std::forward<Args>(args)...);
        T& ref = *node;
        if (by_ep_.count(ref.record().endpoint())) throw std::invalid_argument("duplicate endpoint in world");
        if (by_id_.count(ref.id())) throw std::invalid_argument("duplicate node id in world");
        by_ep_[ref.record().endpoint()] = &ref;
        by_id_[ref.id()] = &ref;
        nodes_.push_back(std::move(node));
        return ref;
    }

    SimNode* find(const Endpoint& ep) const {
        const auto it = by_ep_.find(ep);
        return it == by_ep_.end() ? nullptr : it->second;
    }
    SimNode* find(const NodeId& id) const {
        const auto it = by_id_.find(id);
        return it == by_id_.end() ? nullptr : it->second;
    }
    const std::vector<std::unique_ptr<SimNode>>& nodes() const { return nodes_; }

    void send(Message m) {
        ++stats_.sent;
        const auto delay = latency_.sample(rng_);
        loop_.schedule(delay, [this, m = std::move(m)]() {
            SimNode* n = find(m.to);
            if (!n) {
                ++stats_.dropped_unknown;
                return;
            }
            if (!n->online()) {
                ++stats_.dropped_offline;
                return;
            }
            ++stats_.delivered;
            loop_.trace((static_cast<std::uint64_t>(m.kind) << 56) ^ (std::uint64_t{m.from.ip.value()} << 20) ^
                        m.to.ip.value());
            if (trace_out_) *trace_out_ << trace_line(now(), m) << '\n';
            n->receive(m);
        });
    }

    // TCP dial: the remote decides after one latency, the dialer learns the
    // outcome after a second one. An accepted link whose dialer went away in
    // between is torn down.
    void dial(SimNode& from, const NodeRecord& to, std::function<void(ConnResult)> cb) {
        ++stats_.dials;
        const auto inc = from.incarnation();
        SimNode* src = &from;
        loop_.schedule(latency_.sample(rng_), [this, src, inc, to, cb = std::move(cb)]() mutable {
            SimNode* r = find(to.endpoint());
            ConnResult res = ConnResult::unreachable;
            if (r && r->online() && r->id() == to.id) res = r->accept_tcp(src->record(), src->network());
            if (res == ConnResult::accepted) link(src->id(), to.id);
            loop_.trace(0xd1a1000000000000ULL ^ (static_cast<std::uint64_t>(res) << 40) ^ to.ip.value());
            loop_.schedule(latency_.sample(rng_), [this, src, inc, to, res, cb = std::move(cb)]() {
                if (src->incarnation() != inc || !src->online()) {
                    if (res == ConnResult::accepted) disconnect(src->id(), to.id);
                    return;
                }
                if (res == ConnResult::accepted && !linked(src->id(), to.id)) {
                    cb(ConnResult::unreachable);
                    return;
                }
                cb(res);
            });
        });
    }

    bool linked(const NodeId& a, const NodeId& b) const {
        const auto it = links_.find(a);
        return it != links_.end() && it->second.count(b);
    }

    std::size_t link_count(const NodeId& a) const {
        const auto it = links_.find(a);
        return it == links_.end() ? 0 : it->second.size();
    }

    void disconnect(const NodeId& a, const NodeId& b) {
        if (!linked(a, b)) return;
        links_[a].erase(b);
        links_[b].erase(a);
        if (auto* n = find(a)) n->on_tcp_closed(b);
        if (auto* n = find(b)) n->on_tcp_closed(a);
    }

    void drop_links(const NodeId& id) {
        const auto it = links_.find(id);
        if (it == links_.end()) return;
        const auto peers = it->second;
        for (const auto& p : peers) disconnect(id, p);
    }

    // Bookkeeping the metrics layer reads; nodes never consult it.
    IdSet& attacker_ids() { return attacker_ids_; }
    const IdSet& attacker_ids() const { return attacker_ids_; }

    // The currently published DNS list.
    const DnsList& dns_list() const { return dns_list_; }
    void publish_dns(DnsList l) { dns_list_ = std::move(l); }

    // Indexes honest peers and attackers answer FindNode from.
    ClosestIndex& honest_index() { return honest_index_; }
    ClosestIndex& attacker_index() { return attacker_index_; }
    ClosestIndex& combined_index() { return combined_index_; }

    void set_trace(std::ostream* out) { trace_out_ = out; }

private:
    void link(const NodeId& a, const NodeId& b) {
        links_[a].insert(b);
        links_[b].insert(a);
    }

    std::uint64_t seed_;
    std::uint64_t streams_ = 0;
    Rng rng_;
    LatencyModel latency_;
    EventLoop loop_;
    NetStats stats_;
    std::vector<std::unique_ptr<SimNode>> nodes_;
    std::unordered_map<Endpoint, SimNode*, EndpointHash> by_ep_;
    std::unordered_map<NodeId, SimNode*, NodeIdHash> by_id_;
    std::unordered_map<NodeId, IdSet, NodeIdHash> links_;
    IdSet attacker_ids_;
    DnsList dns_list_;
    ClosestIndex honest_index_, attacker_index_, combined_index_;
    std::ostream* trace_out_ = nullptr;
};

// Outstanding requests awaiting a reply, each with its own timeout.
class RequestTable {
public:
    using Callback = std::function<void(const Message*)>;

    std::uint64_t open(EventLoop& loop, MsgKind expect, const NodeId& from, Duration timeout, Callback cb) {
        const auto token = ++next_;
        pending_.emplace(token, Pending{expect, from, std::move(cb)});
        loop.schedule(timeout, [this, token]() {
            const auto it = pending_.find(token);
            if (it == pending_.end()) return;
            auto cb = std::move(it->second.cb);
            pending_.erase(it);
            cb(nullptr);
        });
        return token;
    }

    // True when m answered an outstanding request.
    bool resolve(const Message& m) {
        const auto it = pending_.find(m.token);
        if (it == pending_.end() || it->second.expect != m.kind || it->second.from != m.from.id) return false;
        auto cb = std::move(it->second.cb);
        pending_.erase(it);
        cb(&m);
        return true;
    }

    void clear() { pending_.clear(); }
    std::size_t size() const { return pending_.size(); }

private:
    struct Pending {
        MsgKind expect;
        NodeId from;
        Callback cb;
    };
    std::uint64_t next_ = 0;
    std::unordered_map<std::uint64_t, Pending> pending_;
};

struct FullNodeConfig {
    TableConfig table;
    BlacklistConfig blacklist;
    ConnConfig conn;
    bool dial_loop = false;
    Duration dial_tick = kDialTick;
    std::vector<NodeRecord> bootnodes;
    int init_random_lookups = 1;
    int refresh_random_lookups = kRefreshRandomLookups;
    Duration reply_timeout = kReplyTimeout;
};

struct ConnEvent {
    SimTime at;
    NodeId remote;
    Direction direction;
    DialSource source;   // outbound only
};

// A complete client: table, database, handlers, timers and dial loop.
class FullNode : public SimNode, public DiscoveryTransport {
public:
    FullNode(World& w, NodeRecord rec, std::uint32_t network, FullNodeConfig cfg = {}, Role role = Role::target)
        : SimNode(w, rec, network, role),
          cfg_(std::move(cfg)),
          rng_(w.fork_rng()),
          table_(rec.id, cfg_.table),
          blacklist_(cfg_.blacklist),
          conn_(rec.id, with_network(cfg_.conn, network)) {}

    DiscoveryTable& table() { return table_; }
    const DiscoveryTable& table() const { return table_; }
    NodeDatabase& db() { return db_; }
    const NodeDatabase& db() const { return db_; }
    ConnectionManager& conn() { return conn_; }
    const ConnectionManager& conn() const { return conn_; }
    PingBlacklist& blacklist() { return blacklist_; }
    BondBook& bonds() { return bonds_; }
    FullNodeConfig& config() { return cfg_; }
    SimTime started_at() const { return started_at_; }
    const std::vector<ConnEvent>& conn_log() const { return conn_log_; }
    std::uint64_t banned_drops() const { return banned_drops_; }
    std::uint64_t lookups_started() const { return lookups_started_; }

    // DiscoveryTransport
    SimTime now() const override { return world_.now(); }
    Rng& rng() override { return rng_; }

    void ping(const NodeRecord& to, PongCallback cb) override {
        send_ping(to, [cb = std::move(cb)](const Message* m) {
            if (m) cb(m->record);
            else cb(std::nullopt);
        });
    }

    void find_node(const NodeRecord& to, const NodeId& target, NeighborsCallback cb) override {
        ensure_bond(to, [this, to, target, cb](bool ok) {
            if (!ok) {
                cb(std::nullopt);
                return;
            }
            const auto token = requests_.open(world_.loop(), MsgKind::neighbors, to.id, cfg_.reply_timeout,
                                              [cb](const Message* m) {
                                                  if (m) cb(m->nodes);
                                                  else cb(std::nullopt);
                                              });
            world_.send(Message::find_node(rec_, to.endpoint(), token, target));
        });
    }

    void enr_request(const NodeRecord& to, std::function<void(std::optional<NodeRecord>)> cb) {
        ensure_bond(to, [this, to, cb](bool ok) {
            if (!ok) {
                cb(std::nullopt);
                return;
            }
            const auto token = requests_.open(world_.loop(), MsgKind::enr_response, to.id, cfg_.reply_timeout,
                                              [cb](const Message* m) {
                                                  if (m) cb(m->record);
                                                  else cb(std::nullopt);
                                              });
            world_.send(Message::enr_request(rec_, to.endpoint(), token));
        });
    }

    // Lifecycle. The database and bond records survive a restart; the
    // table, connections and in-flight work do not.
    void start() {
        if (online_) return;
        online_ = true;
        ++incarnation_;
        started_at_ = now();
        table_.clear();
        conn_.reset();
        for (const auto& s : statics_) conn_.add_static(s);
        blacklist_ = PingBlacklist(cfg_.blacklist);
        do_refresh(table_, db_, cfg_.bootnodes, *this, cfg_.init_random_lookups, {},
                   [this](std::shared_ptr<Lookup> l) { track(std::move(l)); });
        schedule_refresh();
        schedule_revalidate();
        every(kPersistInterval, [this] { persist_cycle(db_, table_, now()); });
        every(kExpireInterval, [this] { db_.expire_cycle(now()); });
        if (cfg_.dial_loop) every(cfg_.dial_tick, [this] { dial_tick(); });
        on_started();
    }

    void stop() {
        if (!online_) return;
        online_ = false;
        ++incarnation_;
        for (auto& l : lookups_) l->cancel();
        lookups_.clear();
        if (feeder_) feeder_->cancel();
        feeder_.reset();
        requests_.clear();
        world_.drop_links(rec_.id);
        conn_.reset();
    }

    void add_static(const NodeRecord& r) {
        statics_.push_back(r);
        conn_.add_static(r);
    }

    void receive(const Message& m) override {
        const auto t = now();
        if (blacklist_.banned(m.from.id, t)) {
            ++banned_drops_;
            return;
        }
        switch (m.kind) {
            case MsgKind::ping: handle_ping(m); break;
            case MsgKind::pong:
                bonds_.mark_pong(m.from.id, t);
                db_.update_lastpong(m.from.id, t);
                requests_.resolve(m);
                break;
            case MsgKind::find_node:
                if (bonds_.bonded(m.from.id, t))
                    world_.send(Message::neighbors(rec_, m.from.endpoint(), m.token, honest_handle_findnode(table_, m.target)));
                break;
            case MsgKind::enr_request:
                if (bonds_.bonded(m.from.id, t)) world_.send(Message::enr_response(rec_, m.from.endpoint(), m.token));
                break;
            case MsgKind::neighbors:
            case MsgKind::enr_response: requests_.resolve(m); break;
        }
    }

    ConnResult accept_tcp(const NodeRecord& dialer, std::uint32_t network) override {
        const auto r = conn_.accept_incoming(dialer, network, now(), world_.attacker_ids().count(dialer.id) != 0);
        if (r == ConnResult::accepted) conn_log_.push_back(ConnEvent{now(), dialer.id, Direction::inbound, DialSource::dns});
        return r;
    }

    void on_tcp_closed(const NodeId& peer) override { conn_.drop(peer); }

protected:
    virtual void on_started() {}

    // Runs fn every period for as long as this incarnation lives.
    void every(Duration period, std::function<void()> fn) {
        const auto inc = incarnation_;
        world_.loop().schedule(period, [this, inc, period, fn = std::move(fn)]() {
            if (inc != incarnation_ || !online_) return;
            fn();
            every(period, fn);
        });
    }

    void after(Duration d, std::function<void()> fn) {
        const auto inc = incarnation_;
        world_.loop().schedule(d, [this, inc, fn = std::move(fn)]() {
            if (inc == incarnation_ && online_) fn();
        });
    }

    void track(std::shared_ptr<Lookup> l) {
        ++lookups_started_;
        std::erase_if(lookups_, [](const auto& x) { return x->finished(); });
        lookups_.push_back(std::move(l));
    }

    void send_ping(const NodeRecord& to, RequestTable::Callback cb) {
        const auto token = requests_.open(world_.loop(), MsgKind::pong, to.id, cfg_.reply_timeout, std::move(cb));
        world_.send(Message::ping(rec_, to.endpoint(), token));
    }

    // Makes sure the remote will answer queries: if it has not pinged us in
    // 24 h, ping it, then wait one reply timeout for its ping-back.
    void ensure_bond(const NodeRecord& to, std::function<void(bool)> then) {
        if (bonds_.peer_bonded(to.id, now())) {
            then(true);
            return;
        }
        send_ping(to, [this, then = std::move(then)](const Message* m) {
            if (!m) {
                then(false);
                return;
            }
            after(cfg_.reply_timeout, [then] { then(true); });
        });
    }

    void handle_ping(const Message& m) {
        const auto t = now();
        if (blacklist_.on_ping(m.from.id, t) == PingBlacklist::Verdict::newly_banned) {
            table_.remove(m.from.id);
            ++banned_drops_;
            return;
        }
        world_.send(Message::pong(rec_, m.from.endpoint(), m.token));
        bonds_.mark_ping(m.from.id, t);
        const NodeRecord from = m.from;
        if (from.id == rec_.id || !from.valid_endpoint()) return;
        if (bonds_.bonded(from.id, t)) {
            table_.add_seen_node(from, t, 1);
            return;
        }
        send_ping(from, [this, from](const Message* reply) {
            if (reply && !blacklist_.banned(from.id, now())) table_.add_seen_node(from, now(), 1);
        });
    }

    void schedule_refresh() {
        after(uniform_duration(rng_, kRefreshMin, kRefreshMax), [this] {
            last_refresh_ = now();
            do_refresh(table_, db_, cfg_.bootnodes, *this, cfg_.refresh_random_lookups, {},
                       [this](std::shared_ptr<Lookup> l) { track(std::move(l)); });
            schedule_refresh();
        });
    }

    void schedule_revalidate() {
        after(uniform_duration(rng_, Duration::zero(), kRevalidateMax), [this] {
            const auto inc = incarnation_;
            do_revalidate(table_, *this, [this, inc] {
                if (inc == incarnation_ && online_) schedule_revalidate();
            });
        });
    }

    void refill_lookup() {
        if (feeder_ && !feeder_->finished()) return;
        feeder_ = Lookup::start(table_, *this, NodeId::random(rng_), {}, [this](const NodeRecord& r) {
            if (!conn_.lookup_full()) conn_.offer_lookup(r);
        });
        ++lookups_started_;
    }

    void refill_dns() { conn_.fill_dns(client_resolve(world_.dns_list()), rng_); }

    void dial_tick() {
        const auto d = conn_.dial_step(rng_, now(), [this] { refill_lookup(); }, [this] { refill_dns(); });
        if (!d) return;
        const auto target = d->target;
        const auto source = d->source;
        conn_.dial_started(target.id, now());
        world_.dial(*this, target, [this, target, source](ConnResult r) {
            conn_.dial_finished(target.id);
            if (r != ConnResult::accepted) return;
            if (conn_.add_outbound(target, now(), world_.attacker_ids().count(target.id) != 0))
                conn_log_.push_back(ConnEvent{now(), target.id, Direction::outbound, source});
            else world_.disconnect(rec_.id, target.id);
        });
    }

    static ConnConfig with_network(ConnConfig c, std::uint32_t network) {
        c.network_id = network;
        return c;
    }

    FullNodeConfig cfg_;
    Rng rng_;
    DiscoveryTable table_;
    NodeDatabase db_;
    PingBlacklist blacklist_;
    BondBook bonds_;
    ConnectionManager conn_;
    RequestTable requests_;
    std::vector<std::shared_ptr<Lookup>> lookups_;
    std::shared_ptr<Lookup> feeder_;
    std::vector<NodeRecord> statics_;
    std::vector<ConnEvent> conn_log_;
    SimTime started_at_{};
    SimTime last_refresh_{};
    std::uint64_t banned_drops_ = 0;
    std::uint64_t lookups_started_ = 0;
};

struct ChurnModel {
    bool enabled = false;
    Duration mean_online = std::chrono::hours(6);
    Duration mean_offline = std::chrono::hours(1);

    double availability() const {
        const double on = static_cast<double>(mean_online.count());
        return on / (on + static_cast<double>(mean_offline.count()));
    }
};

// Lightweight honest peer. It answers discovery queries from a shared view
// of the honest population and models inbound slot availability.
class PassivePeer : public SimNode {
public:
    PassivePeer(World& w, NodeRecord rec, std::uint32_t network, std::uint32_t free_slots, ChurnModel churn = {})
        : SimNode(w, rec, network, Role::honest), free_slots_(free_slots), churn_(churn), rng_(w.fork_rng()) {}

    std::uint32_t free_slots() const { return free_slots_; }
    std::uint32_t used_slots() const { return used_; }
    std::uint32_t available_slots() const { return used_ >= free_slots_ ? 0 : free_slots_ - used_; }
    bool fully_occupied() const { return used_ >= free_slots_; }
    void set_rate_limit(bool on) { rate_limit_ = on; }

    void start() {
        if (!churn_.enabled) {
            set_online(true);
            return;
        }
        // stationary start: online with the model's availability
        set_online(uniform01(rng_) < churn_.availability());
        schedule_flip();
    }

    void set_online(bool on) {
        if (on == online_) return;
        online_ = on;
        ++incarnation_;
        if (!on) {
            world_.drop_links(rec_.id);
            used_ = 0;
            conns_.clear();
        }
    }

    void receive(const Message& m) override {
        const auto t = world_.now();
        switch (m.kind) {
            case MsgKind::ping:
                world_.send(Message::pong(rec_, m.from.endpoint(), m.token));
                if (!bonded(m.from.id, t) && m.from.valid_endpoint())
                    world_.send(Message::ping(rec_, m.from.endpoint(), 0));
                break;
            case MsgKind::pong: bond_[m.from.id] = t; break;
            case MsgKind::find_node:
                if (bonded(m.from.id, t))
                    world_.send(Message::neighbors(rec_, m.from.endpoint(), m.token,
                                                   world_.honest_index().closest(m.target, kMaxNeighbors)));
                break;
            case MsgKind::enr_request:
                if (bonded(m.from.id, t)) world_.send(Message::enr_response(rec_, m.from.endpoint(), m.token));
                break;
            default: break;
        }
    }

    ConnResult accept_tcp(const NodeRecord& dialer, std::uint32_t network) override {
        if (dialer.id == rec_.id) return ConnResult::self;
        if (rate_limit_ && !throttle_.admit(dialer.ip, world_.now())) return ConnResult::rate_limited;
        if (used_ >= free_slots_) return ConnResult::slots_full;
        if (conns_.count(dialer.id)) return ConnResult::duplicate_peer;
        if (network != network_) return ConnResult::handshake_mismatch;
        conns_.insert(dialer.id);
        ++used_;
        return ConnResult::accepted;
    }

    void on_tcp_closed(const NodeId& peer) override {
        if (conns_.erase(peer) && used_ > 0) --used_;
    }

private:
    bool bonded(const NodeId& id, SimTime t) const {
        const auto it = bond_.find(id);
        return it != bond_.end() && t - it->second <= kBondExpiry;
    }

    void schedule_flip() {
        const auto mean = online_ ? churn_.mean_online : churn_.mean_offline;
        const double ms = std::exponential_distribution<double>(1.0 / static_cast<double>(mean.count()))(rng_);
        world_.loop().schedule(Duration{static_cast<std::int64_t>(ms) + 1}, [this] {
            set_online(!online_);
            schedule_flip();
        });
    }

    std::uint32_t free_slots_;
    std::uint32_t used_ = 0;
    ChurnModel churn_;
    Rng rng_;
    bool rate_limit_ = true;
    InboundThrottle throttle_;
    IdSet conns_;
    std::unordered_map<NodeId, SimTime, NodeIdHash> bond_;
};

// Attacker-controlled node. Always answers, accepts every connection and
// pings its targets on a fixed interval.
class AttackerNode : public SimNode {
public:
    AttackerNode(World& w, NodeRecord rec, std::uint32_t network, bool behavior_modified)
        : SimNode(w, rec, network, Role::attacker), modified_(behavior_modified) {
        w.attacker_ids().insert(rec.id);
    }

    bool behavior_modified() const { return modified_; }
    void set_behavior_modified(bool on) { modified_ = on; }
    const IdSet& connections() const { return conns_; }
    bool connected(const NodeId& id) const { return conns_.count(id) != 0; }
    bool dialing(const NodeId& id) const { return dialing_.count(id) != 0; }
    std::function<void(const NodeId&)> on_pong;

    // When set, a modified attacker answers FindNode from this set instead of
    // the world-wide attacker index.
    void set_advertised(std::shared_ptr<const ClosestIndex> idx) { advertised_ = std::move(idx); }

    void set_online(bool on) {
        if (on == online_) return;
        online_ = on;
        ++incarnation_;
        if (!on) {
            world_.drop_links(rec_.id);
            conns_.clear();
            dialing_.clear();
        }
    }

    // Pings target every interval, first after `phase`.
    void start_pinging(const NodeRecord& target, Duration interval, Duration phase) {
        const auto inc = incarnation_;
        world_.loop().schedule(phase, [this, target, interval, inc] {
            if (inc != incarnation_ || !online_) return;
            world_.send(Message::ping(rec_, target.endpoint(), ++token_));
            start_pinging(target, interval, interval);
        });
    }

    void ping_once(const NodeRecord& target) { world_.send(Message::ping(rec_, target.endpoint(), ++token_)); }

    void receive(const Message& m) override {
        switch (m.kind) {
            case MsgKind::ping: world_.send(Message::pong(rec_, m.from.endpoint(), m.token)); break;
            case MsgKind::pong:
                if (on_pong) on_pong(m.from.id);
                break;
            case MsgKind::find_node: {
                const auto& idx = !modified_ ? world_.combined_index()
                                  : advertised_ ? *advertised_
                                                : world_.attacker_index();
                world_.send(Message::neighbors(rec_, m.from.endpoint(), m.token, attacker_handle_findnode(idx, m.target)));
                break;
            }
            case MsgKind::enr_request: world_.send(Message::enr_response(rec_, m.from.endpoint(), m.token)); break;
            default: break;
        }
    }

    ConnResult accept_tcp(const NodeRecord& dialer, std::uint32_t) override {
        if (dialer.id == rec_.id) return ConnResult::self;
        if (conns_.count(dialer.id)) return ConnResult::duplicate_peer;
        conns_.insert(dialer.id);
        return ConnResult::accepted;
    }

    void on_tcp_closed(const NodeId& peer) override { conns_.erase(peer); }

    // Outbound connection from the attacker to some node.
    void dial(const NodeRecord& to, std::function<void(ConnResult)> cb = {}) {
        dialing_.insert(to.id);
        world_.dial(*this, to, [this, to, cb = std::move(cb)](ConnResult r) {
            dialing_.erase(to.id);
            if (r == ConnResult::accepted) conns_.insert(to.id);
            if (cb) cb(r);
        });
    }

private:
    bool modified_;
    std::shared_ptr<const ClosestIndex> advertised_;
    IdSet dialing_;
    std::uint64_t token_ = 0;
    IdSet conns_;
};

struct CrawlerConfig {
    Duration interval = kCrawlInterval;
    Duration duration = kCrawlDuration;
    std::size_t top_n = kTopNTestnet;
    Duration contact_spacing = std::chrono::milliseconds(20);
};

struct CrawlSummary {
    SimTime start{};
    SimTime end{};
    std::size_t published = 0;
};

// The list maintainer: a full node that periodically scores every node it
// knows and publishes the top-N.
class CrawlerNode : public FullNode {
public:
    CrawlerNode(World& w, NodeRecord rec, std::uint32_t network, FullNodeConfig cfg, CrawlerConfig ccfg)
        : FullNode(w, rec, network, std::move(cfg), Role::crawler), ccfg_(ccfg) {}

    CrawlerScores& scores() { return scores_; }
    const std::vector<CrawlSummary>& crawls() const { return crawls_; }
    const CrawlerConfig& crawler_config() const { return ccfg_; }

    void schedule_crawls(Duration first) {
        after(first, [this] {
            crawl();
            schedule_crawls(ccfg_.interval);
        });
    }

    void crawl() {
        const auto start = now();
        crawl_end_ = start + ccfg_.duration;
        crawls_.push_back(CrawlSummary{start, crawl_end_, 0});
        // phase one: every known node, in id order
        std::size_t i = 0;
        for (const auto& [id, e] : scores_.entries()) {
            const NodeRecord rec = e.record;
            after(ccfg_.contact_spacing * static_cast<std::int64_t>(i++), [this, rec] {
                enr_request(rec, [this, rec](std::optional<NodeRecord> r) {
                    if (r) scores_.grant(*r, now());
                    else scores_.halve(rec.id);
                });
            });
        }
        // phase two: discovery until the crawl ends
        discover();
        after(ccfg_.duration, [this] { finish_crawl(); });
    }

private:
    void discover() {
        if (now() >= crawl_end_) return;
        track(Lookup::start(table_, *this, NodeId::random(rng_),
                            [this](const std::vector<NodeRecord>&) { discover(); },
                            [this](const NodeRecord& r) { consider(r); }));
    }

    void consider(const NodeRecord& r) {
        if (now() >= crawl_end_ || pending_.count(r.id) || !scores_.grant_allowed(r.id, now())) return;
        pending_.insert(r.id);
        enr_request(r, [this, id = r.id](std::optional<NodeRecord> rec) {
            pending_.erase(id);
            if (rec && now() < crawl_end_) scores_.grant(*rec, now());
        });
    }

    void finish_crawl() {
        scores_.evict_negative();
        auto list = aggregate_top_n(scores_, ccfg_.top_n);
        crawls_.back().published = list.size();
        world_.publish_dns(std::move(list));
    }

    CrawlerConfig ccfg_;
    CrawlerScores scores_;
    IdSet pending_;
    SimTime crawl_end_{};
    std::vector<CrawlSummary> crawls_;
};

}  // namespace eclipse

// Command-line dispatch: experiment names, seed and value parsing, and the
// three output forms (per-trial CSV, aggregate JSON, text table).
#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

#include "eclipse/experiments.hpp"

namespace eclipse {

struct RunOutput {
    explicit RunOutput(std::string name = {}) : experiment(std::move(name)) {}
    std::string experiment;
    std::string csv;
    nlohmann::json aggregate;
    std::string table;
};

// Plain aligned text table; first column left-aligned.
class TextTable {
public:
    explicit TextTable(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
    void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
    std::string str() const {
        std::vector<std::size_t> w;
        for (const auto& r : rows_)
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (w.size() <= i) w.push_back(0);
                w[i] = std::max(w[i], r[i].size());
            }
        std::ostringstream o;
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) o << "  ";
                if (i == 0) o << std::left << std::setw(static_cast<int>(w[i])) << r[i];
                else o << std::right << std::setw(static_cast<int>(w[i])) << r[i];
            }
            o << '\n';
        }
        return o.str();
    }

private:
    std::vector<std::vector<std::string>> rows_;
};

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    return s.substr(a, s.find_last_not_of(" \t") - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// "1,2,7-9" -> {1,2,7,8,9}
inline std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    for (const auto& item : split_list(s)) {
        try {
            const auto dash = item.find('-');
            if (dash == std::string::npos) {
                out.push_back(std::stoull(item));
                continue;
            }
            const auto lo = std::stoull(item.substr(0, dash)), hi = std::stoull(item.substr(dash + 1));
            if (hi < lo || hi - lo > 100000) throw std::invalid_argument("range");
            for (auto x = lo; x <= hi; ++x) out.push_back(x);
        } catch (const std::logic_error&) {
            throw std::invalid_argument("bad seed '" + item + "'");
        }
    }
    if (out.empty()) throw std::invalid_argument("empty seed list");
    return out;
}

inline std::vector<double> parse_values(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(item, &used);
        } catch (const std::logic_error&) {
            used = 0;
        }
        if (used != item.size()) throw std::invalid_argument("bad value '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("empty value list");
    return out;
}

inline std::vector<std::uint64_t> default_seeds(const ScenarioProfile& p) {
    std::vector<std::uint64_t> out;
    for (int i = 0; i < p.trials; ++i) out.push_back(p.base_seed + static_cast<std::uint64_t>(i));
    return out;
}

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"table-poisoning", "db-prefill",    "dns-poisoning", "slot-occupation",
                                                "outgoing-hijack", "incoming-hijack", "full-eclipse",  "estimators",
                                                "bucket-rates",    "defenses"};
    return names;
}

inline const std::vector<std::string>& sweep_params() {
    static const std::vector<std::string> names{"dns_fill_rate", "db_fill_rate", "attacker_count"};
    return names;
}

inline std::string num(double x, int digits = 3) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(digits) << x;
    return o.str();
}

// Runs fn once per seed on at most `jobs` worker threads (0: one per core).
// Worlds share nothing, so results depend only on the seed; they come back
// in seed order.
template <class F>
auto parallel_map(const std::vector<std::uint64_t>& seeds, unsigned jobs, F&& fn) {
    using R = decltype(fn(seeds.front()));
    std::vector<std::optional<R>> slots(seeds.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    const auto work = [&] {
        for (std::size_t i; (i = next++) < seeds.size();) {
            try {
                slots[i] = fn(seeds[i]);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!err) err = std::current_exception();
            }
        }
    };
    const auto n = std::min<std::size_t>(jobs ? jobs : std::max(1u, std::thread::hardware_concurrency()), seeds.size());
    if (n <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < n; ++i) pool.emplace_back(work);
    }
    if (err) std::rethrow_exception(err);
    std::vector<R> out;
    out.reserve(slots.size());
    for (auto& x : slots) out.push_back(std::move(*x));
    return out;
}

namespace detail {

inline RunOutput bucket_rates_out(const Scenario& s, const std::vector<std::uint64_t>& seeds) {
    RunOutput out{"bucket-rates"};
    std::ostringstream csv;
    csv << "seed,buckets,exact,monte_carlo\n";
    TextTable t({"", "last-2", "last-5", "last-8", "last-17"});
    std::vector<std::string> exact_row{"outbound selection rate"};
    nlohmann::json runs = nlohmann::json::array();
    const auto all = parallel_map(seeds, s.jobs, [](std::uint64_t seed) { return bucket_rates(1'000'000, seed); });
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        const auto seed = seeds[k];
        const auto& r = all[k];
        std::vector<std::string> row{"monte carlo (seed " + std::to_string(seed) + ")"};
        for (std::size_t i = 0; i < r.last.size(); ++i) {
            csv << seed << ",last-" << r.last[i] << ',' << r.exact[i] << ',' << r.monte_carlo[i] << '\n';
            row.push_back(pct(r.monte_carlo[i], 2));
            if (seed == seeds.front()) exact_row.push_back(pct(r.exact[i], 3));
        }
        t.add(row);
        runs.push_back({{"seed", seed}, {"monte_carlo", r.monte_carlo}});
        if (seed == seeds.front()) out.aggregate["exact"] = r.exact;
    }
    t.add(exact_row);
    out.aggregate["runs"] = runs;
    out.csv = csv.str();
    out.table = t.str();
    return out;
}

inline RunOutput estimators_out() {
    RunOutput out{"estimators"};
    const auto r = estimators();
    std::ostringstream csv;
    csv << "kind,key,value\n";
    TextTable t({"score", "days to overtake"});
    for (std::size_t i = 0; i < r.scores.size(); ++i) {
        csv << "fill_days," << r.scores[i] << ',' << r.days[i] << '\n';
        t.add({std::to_string(r.scores[i]), std::to_string(r.days[i])});
    }
    TextTable ip({"network", "db", "dns", "outgoing", "inbound", "total"});
    for (const auto* b : {&r.sepolia, &r.mainnet}) {
        csv << "ip_total," << b->profile << ',' << b->total << '\n';
        ip.add({b->profile, std::to_string(b->db), std::to_string(b->dns), std::to_string(b->outgoing),
                std::to_string(b->inbound), std::to_string(b->total)});
        out.aggregate["ip_budget"][b->profile] = {{"db", b->db},           {"dns", b->dns},   {"outgoing", b->outgoing},
                                                  {"inbound", b->inbound}, {"total", b->total}, {"rounds", b->rounds}};
    }
    out.aggregate["fill_days"] = r.days;
    out.aggregate["scores"] = r.scores;
    out.csv = csv.str();
    out.table = t.str() + "\n" + ip.str();
    return out;
}

inline RunOutput dns_poisoning_out(const Scenario& s, const std::vector<std::uint64_t>& seeds) {
    RunOutput out{"dns-poisoning"};
    std::ostringstream csv;
    csv << "seed,crawls,attacker_per_crawl,benign_per_crawl,crawls_per_day,daily_advantage\n";
    TextTable t({"seed", "attacker/crawl", "benign/crawl", "crawls/day", "daily advantage"});
    std::vector<double> adv;
    const auto all = parallel_map(seeds, s.jobs, [&](std::uint64_t seed) {
        return crawler_dynamics(30, seed, std::chrono::hours(48), s.profile);
    });
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        const auto seed = seeds[k];
        const auto& r = all[k];
        csv << seed << ',' << r.crawls << ',' << r.attacker_per_crawl << ',' << r.benign_per_crawl << ','
            << r.crawls_per_day << ',' << r.daily_advantage << '\n';
        t.add({std::to_string(seed), num(r.attacker_per_crawl, 1), num(r.benign_per_crawl, 1), num(r.crawls_per_day, 3),
               num(r.daily_advantage, 2)});
        adv.push_back(r.daily_advantage);
    }
    out.aggregate = {{"daily_advantage_mean", mean_of(adv)}, {"trials", seeds.size()}};
    // days to overtake at the nominal constant and at what the crawler actually gave
    TextTable d({"score", "days (5/day)", "days (measured)"});
    for (double q : kDnsScoreQuantiles) {
        const auto score = static_cast<std::int64_t>(q);
        d.add({std::to_string(score), std::to_string(estimate_fill_time(score)),
               std::to_string(estimate_fill_time(score, mean_of(adv)))});
    }
    out.csv = csv.str();
    out.table = t.str() + "\n" + d.str();
    return out;
}

inline RunOutput table_poisoning_out(const Scenario& s, const std::vector<std::uint64_t>& seeds,
                                     std::size_t attackers, bool refill, const std::string& name) {
    RunOutput out{name};
    std::ostringstream csv;
    csv << "seed,attackers,last2,last5,last17,refill_minutes\n";
    TextTable t({"seed", "last-2", "last-5", "last-17", "refill (min)"});
    std::vector<double> fill;
    std::size_t reached = 0;
    TablePoisonOptions o;
    o.attackers = attackers;
    o.measure_refill = refill;
    const auto all = parallel_map(seeds, s.jobs, [&](std::uint64_t seed) { return table_poisoning_trial(seed, o, s.profile); });
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        const auto seed = seeds[k];
        const auto& r = all[k];
        const std::string rm = r.refill_minutes ? num(*r.refill_minutes, 0) : "";
        csv << seed << ',' << attackers << ',' << r.fill_last2 << ',' << r.fill_last5 << ',' << r.fill_last17 << ',' << rm
            << '\n';
        t.add({std::to_string(seed), pct(r.fill_last2), pct(r.fill_last5), pct(r.fill_last17), refill ? (rm.empty() ? ">120" : rm) : "-"});
        fill.push_back(r.fill_last17);
        reached += r.fill_last17 >= 0.91;
    }
    out.aggregate = {{"attackers", attackers},
                     {"mean_fill", mean_of(fill)},
                     {"trials_at_91", reached},
                     {"trials", seeds.size()},
                     {"ping_blacklist", s.profile.ping_blacklist}};
    out.csv = csv.str();
    out.table = t.str();
    return out;
}

inline const std::vector<double>& db_fills() {
    static const std::vector<double> f{0, 0.33, 0.5, 0.6, 0.66};
    return f;
}

inline RunOutput db_prefill_out(const Scenario& s, const std::vector<std::uint64_t>& seeds, const std::vector<double>& fills,
                            const std::vector<bool>& modes, const std::string& name) {
    RunOutput out{name};
    std::ostringstream csv;
    csv << "modified,db_fill,seed,last2,last5,last8,last17\n";
    std::vector<std::string> header{""};
    for (double f : fills) header.push_back("db " + pct(f, 0) + "%");
    TextTable t(header);
    nlohmann::json cells = nlohmann::json::array();
    for (bool mod : modes) {
        std::array<std::vector<std::string>, 4> rows;
        const std::array<const char*, 4> labels{"last-2", "last-5", "last-8", "last-17"};
        for (std::size_t i = 0; i < 4; ++i) rows[i].push_back(std::string(labels[i]) + (mod ? " (modified)" : " (unmodified)"));
        for (double f : fills) {
            std::array<double, 4> m{};
            const auto all = parallel_map(seeds, s.jobs, [&](std::uint64_t seed) {
                return table3_trial(f, mod, seed, std::chrono::minutes(30), s.profile);
            });
            for (std::size_t k = 0; k < seeds.size(); ++k) {
                const auto seed = seeds[k];
                const auto& x = all[k];
                csv << mod << ',' << f << ',' << seed << ',' << x.last2 << ',' << x.last5 << ',' << x.last8 << ','
                    << x.last17 << '\n';
                const double n = static_cast<double>(seeds.size());
                m[0] += x.last2 / n;
                m[1] += x.last5 / n;
                m[2] += x.last8 / n;
                m[3] += x.last17 / n;
            }
            for (std::size_t i = 0; i < 4; ++i) rows[i].push_back(pct(m[i]));
            cells.push_back({{"modified", mod}, {"db_fill", f}, {"last2", m[0]}, {"last5", m[1]}, {"last8", m[2]}, {"last17", m[3]},
                             {"trials", seeds.size()}});
        }
        for (auto& r : rows) t.add(r);
    }
    const auto br = bucket_rates(0, 0);
    out.aggregate = {{"cells", cells}, {"trials", seeds.size()}};
    out.csv = csv.str();
    TextTable r({"", "last-2", "last-5", "last-8", "last-17"});
    r.add({"outbound selection rate", pct(br.exact[0]), pct(br.exact[1]), pct(br.exact[2]), pct(br.exact[3])});
    out.table = t.str() + "\n" + r.str();
    return out;
}

struct OutgoingCell {
    double dns_fill;
    bool occupy;
};

inline RunOutput outgoing_out(const Scenario& s, const std::vector<std::uint64_t>& seeds,
                              const std::vector<OutgoingCell>& cells, const std::string& name) {
    RunOutput out{name};
    std::ostringstream csv;
    csv << "dns_fill,occupy,seed,success,attacker_outbound,outbound,minutes\n";
    TextTable t({"dns fill", "slot occupation", "success"});
    nlohmann::json agg = nlohmann::json::array();
    for (const auto& c : cells) {
        std::size_t ok = 0;
        OutgoingOptions o;
        o.dns_fill = c.dns_fill;
        o.occupy = c.occupy;
        o.db_fill = s.profile.db_fill_rate > 0 ? s.profile.db_fill_rate : 0.5;
        const auto all = parallel_map(seeds, s.jobs, [&](std::uint64_t seed) { return outgoing_hijack_trial(seed, o, s.profile); });
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            const auto seed = seeds[k];
            const auto& r = all[k];
            ok += r.success;
            csv << c.dns_fill << ',' << c.occupy << ',' << seed << ',' << r.success << ',' << r.attacker_outbound << ','
                << r.outbound << ',' << r.minutes << '\n';
        }
        t.add({pct(c.dns_fill, 0) + "%", c.occupy ? "yes" : "no", frac(ok, seeds.size())});
        agg.push_back({{"dns_fill", c.dns_fill}, {"occupy", c.occupy}, {"success", ok}, {"trials", seeds.size()}});
    }
    out.aggregate = {{"cells", agg}};
    out.csv = csv.str();
    out.table = t.str();
    return out;
}

inline RunOutput incoming_out(const Scenario& s, const std::vector<std::uint64_t>& seeds) {
    RunOutput out{"incoming-hijack"};
    std::ostringstream csv;
    csv << "seed,attacker_inbound,seconds_to_full\n";
    std::size_t full = 0;
    std::vector<double> secs;
    const auto all = parallel_map(seeds, s.jobs, [&](std::uint64_t seed) {
        return incoming_hijack_trial(seed, s.attack.inbound_hijackers, s.profile.rate_limit, std::chrono::seconds(30),
                                     s.profile);
    });
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        const auto seed = seeds[k];
        const auto& r = all[k];
        csv << seed << ',' << r.attacker_inbound << ',' << (r.seconds_to_full ? num(*r.seconds_to_full, 2) : "") << '\n';
        if (r.seconds_to_full) {
            ++full;
            secs.push_back(*r.seconds_to_full);
        }
    }
    TextTable t({"hijackers", "rate limit", "34/34 within 30 s", "median seconds"});
    t.add({std::to_string(s.attack.inbound_hijackers), s.profile.rate_limit ? "on" : "off", frac(full, seeds.size()),
           secs.empty() ? "-" : num(median_of(secs), 1)});
    out.aggregate = {{"full", full}, {"trials", seeds.size()}, {"median_seconds", median_of(secs)}};
    out.csv = csv.str();
    out.table = t.str();
    return out;
}

inline RunOutput slots_out(const Scenario& s, const std::vector<std::uint64_t>& seeds) {
    RunOutput out{"slot-occupation"};
    std::ostringstream csv;
    csv << "seed,t_min,residual,online,occupied_fraction\n";
    TextTable t({"seed", "occupied at 2 h", "1-10", "11-50", "51-99", "100+"});
    std::vector<double> occ;
    const auto all = parallel_map(seeds, s.jobs, [&](std::uint64_t seed) {
        return slot_campaign(seed, std::chrono::hours(2), s.attack, s.profile);
    });
    std::size_t reached = 0;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        const auto seed = seeds[k];
        const auto& r = all[k];
        reached += r.occupied_fraction >= 0.85;
        for (const auto& x : r.samples)
            csv << seed << ',' << to_ms(x.at) / 60000 << ',' << x.residual << ',' << x.online << ',' << x.occupied_fraction << '\n';
        std::vector<std::string> row{std::to_string(seed), pct(r.occupied_fraction)};
        for (double h : r.histogram) row.push_back(pct(h));
        t.add(row);
        occ.push_back(r.occupied_fraction);
    }
    out.aggregate = {{"mean_occupied", mean_of(occ)}, {"trials_at_85", reached}, {"trials", seeds.size()}};
    out.csv = csv.str();
    out.table = t.str();
    return out;
}

inline RunOutput defenses_out(Scenario s, const std::vector<std::uint64_t>& seeds) {
    s.profile.ping_blacklist = true;
    auto out = table_poisoning_out(s, seeds, s.attack.poisoners, false, "defenses");
    const auto cap = dns_cap_check(seeds.front(), s.profile.dns_defenses.per_ip_cap, s.profile);
    TextTable t({"single-/24 pool", "published without cap", "published with cap"});
    t.add({std::to_string(cap.attackers), std::to_string(cap.published_without_cap), std::to_string(cap.published_with_cap)});
    out.aggregate["dns_cap"] = {{"cap", s.profile.dns_defenses.per_ip_cap},
                                {"without", cap.published_without_cap},
                                {"with", cap.published_with_cap}};
    out.table = "ping blacklist on\n" + out.table + "\n" + t.str();
    return out;
}

inline RunOutput eclipse_out(const Scenario& s, const std::vector<std::uint64_t>& seeds) {
    RunOutput out{"full-eclipse"};
    std::ostringstream csv;
    csv << "seed,t_ms,last2,last5,last8,last17,db,in,out\n";
    TextTable t({"seed", "eclipsed", "hours", "in", "out", "last-5", "db"});
    nlohmann::json runs = nlohmann::json::array();
    std::size_t ok = 0;
    const auto all = parallel_map(seeds, s.jobs, [&](std::uint64_t seed) { return eclipse_trial(s, seed); });
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        const auto seed = seeds[k];
        const auto& r = all[k];
        for (const auto& f : r.series)
            csv << seed << ',' << to_ms(f.at) << ',' << f.last2 << ',' << f.last5 << ',' << f.last8 << ',' << f.last17 << ','
                << f.db << ',' << f.in << ',' << f.out << '\n';
        ok += r.eclipse_success;
        const FillSample last = r.series.empty() ? FillSample{} : r.series.back();
        t.add({std::to_string(seed), r.eclipse_success ? "yes" : "no",
               r.time_to_eclipse ? num(to_hours(*r.time_to_eclipse), 2) : "-", std::to_string(last.in),
               std::to_string(last.out), pct(last.last5), pct(last.db)});
        auto j = r.to_json();
        j["seed"] = seed;
        runs.push_back(j);
    }
    out.aggregate = {{"success", ok}, {"trials", seeds.size()}, {"runs", runs}};
    out.csv = csv.str();
    out.table = t.str();
    return out;
}

}  // namespace detail

inline RunOutput run_experiment(const std::string& name, const Scenario& s, const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("empty seed list");
    if (name == "bucket-rates") return detail::bucket_rates_out(s, seeds);
    if (name == "estimators") return detail::estimators_out();
    if (name == "dns-poisoning") return detail::dns_poisoning_out(s, seeds);
    if (name == "table-poisoning")
        return detail::table_poisoning_out(s, seeds, s.attack.poisoners, true, "table-poisoning");
    if (name == "db-prefill") return detail::db_prefill_out(s, seeds, detail::db_fills(), {true, false}, "db-prefill");
    if (name == "outgoing-hijack")
        return detail::outgoing_out(s, seeds, {{0, false}, {0.25, false}, {0.5, false}, {0.75, false}, {1, false}, {0.5, true}},
                                    "outgoing-hijack");
    if (name == "incoming-hijack") return detail::incoming_out(s, seeds);
    if (name == "slot-occupation") return detail::slots_out(s, seeds);
    if (name == "defenses") return detail::defenses_out(s, seeds);
    if (name == "full-eclipse") return detail::eclipse_out(s, seeds);
    throw std::invalid_argument("unknown experiment: " + name);
}

inline RunOutput run_sweep(const std::string& param, const std::vector<double>& values, const Scenario& s,
                           const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("empty seed list");
    if (values.empty()) throw std::invalid_argument("empty value list");
    if (param == "dns_fill_rate") {
        std::vector<detail::OutgoingCell> cells;
        for (double v : values) {
            if (v < 0 || v > 1) throw std::invalid_argument("dns_fill_rate outside [0,1]");
            cells.push_back({v, false});
        }
        return detail::outgoing_out(s, seeds, cells, "sweep-dns_fill_rate");
    }
    if (param == "db_fill_rate") {
        for (double v : values)
            if (v < 0 || v >= 1) throw std::invalid_argument("db_fill_rate outside [0,1)");
        return detail::db_prefill_out(s, seeds, values, {true}, "sweep-db_fill_rate");
    }
    if (param == "attacker_count") {
        RunOutput merged{"sweep-attacker_count"};
        merged.aggregate = nlohmann::json::array();
        for (double v : values) {
            if (v < 1 || v > kTableCapacity || v != std::floor(v))
                throw std::invalid_argument("attacker_count must be an integer in [1,272]");
            auto o = detail::table_poisoning_out(s, seeds, static_cast<std::size_t>(v), false, merged.experiment);
            merged.csv += merged.csv.empty() ? o.csv : o.csv.substr(o.csv.find('\n') + 1);
            merged.table += "attackers " + std::to_string(static_cast<int>(v)) + "\n" + o.table + "\n";
            merged.aggregate.push_back(o.aggregate);
        }
        return merged;
    }
    throw std::invalid_argument("unknown sweep parameter: " + param);
}

inline void write_outputs(const RunOutput& out, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto put = [&](const std::string& file, const std::string& body) {
        std::ofstream f(dir / file);
        if (!f) throw std::runtime_error("cannot write " + (dir / file).string());
        f << body;
    };
    put(out.experiment + "_trials.csv", out.csv);
    put(out.experiment + "_aggregate.json", out.aggregate.dump(2) + "\n");
    put(out.experiment + "_table.txt", out.table);
}

}  // namespace eclipse

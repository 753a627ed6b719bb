// Discrete-event loop with a virtual millisecond clock.
#pragma once

#include <functional>
#include <vector>

#include "eclipse/core.hpp"

namespace eclipse {

class EventLoop {
public:
    using Action = std::function<void()>;

    SimTime now() const { return now_; }
    std::uint64_t executed() const { return executed_; }
    std::size_t pending() const { return heap_.size(); }
    std::uint64_t trace_hash() const { return hash_; }

    void schedule(Duration delay, Action fn) {
        if (delay < Duration::zero()) throw std::invalid_argument("negative event delay");
        push(now_ + delay, std::move(fn));
    }

    void schedule_at(SimTime at, Action fn) {
        if (at < now_) throw std::invalid_argument("event scheduled in the past");
        push(at, std::move(fn));
    }

    // Folds a value into the trace hash; callers record whatever identifies
    // an observable step (message kind, endpoints, outcomes).
    void trace(std::uint64_t v) { hash_ = mix_seed(hash_ ^ v, static_cast<std::uint64_t>(to_ms(now_))); }

    bool step() {
        if (heap_.empty()) return false;
        std::pop_heap(heap_.begin(), heap_.end(), later);
        Event ev = std::move(heap_.back());
        heap_.pop_back();
        now_ = ev.at;
        ++executed_;
        ev.fn();
        return true;
    }

    // Runs every event with time <= end, then parks the clock at end.
    void run_until(SimTime end) {
        while (!heap_.empty() && heap_.front().at <= end) step();
        if (now_ < end) now_ = end;
    }

    void run_for(Duration d) { run_until(now_ + d); }

    // Runs until pred() holds (checked after each event) or end is reached.
    template <class Pred>
    bool run_until(SimTime end, Pred&& pred) {
        if (pred()) return true;
        while (!heap_.empty() && heap_.front().at <= end) {
            step();
            if (pred()) return true;
        }
        if (now_ < end) now_ = end;
        return pred();
    }

private:
    struct Event {
        SimTime at;
        std::uint64_t seq;
        Action fn;
    };
    static bool later(const Event& a, const Event& b) {
        return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
    void push(SimTime at, Action fn) {
        heap_.push_back(Event{at, next_seq_++, std::move(fn)});
        std::push_heap(heap_.begin(), heap_.end(), later);
    }

    SimTime now_{};
    std::uint64_t next_seq_ = 0;
    std::uint64_t executed_ = 0;
    std::uint64_t hash_ = 0;
    std::vector<Event> heap_;
};

}  // namespace eclipse

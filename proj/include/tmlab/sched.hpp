#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "tmlab/history.hpp"
#include "tmlab/instrument.hpp"

namespace tmlab {

// A replayable interleaving: either an explicit ordered list of thread
// picks or a seed for pseudo-random picking.
struct schedule {
  enum class mode : std::uint8_t { seeded, explicit_picks };
  mode m = mode::seeded;
  std::uint64_t seed = 0;
  std::vector<int> picks;

  static schedule from_seed(std::uint64_t s) {
    schedule sc;
    sc.m = mode::seeded;
    sc.seed = s;
    return sc;
  }

  static schedule from_picks(std::vector<int> p) {
    schedule sc;
    sc.m = mode::explicit_picks;
    sc.picks = std::move(p);
    return sc;
  }

  // One "thread-id step" pair per line.
  std::string serialize() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < picks.size(); ++i)
      os << picks[i] << ' ' << i << '\n';
    return os.str();
  }

  static schedule parse(const std::string& text) {
    schedule sc;
    sc.m = mode::explicit_picks;
    std::istringstream is(text);
    int tid = 0;
    std::size_t step = 0;
    while (is >> tid >> step) sc.picks.push_back(tid);
    return sc;
  }
};

// A multi-threaded test program. Fixtures (heap, engine, queue cells)
// live in the thread closures; init_values define the initial shared
// state for the opacity oracle.
struct program {
  std::vector<std::function<void(thread_ctx&)>> threads;
  std::vector<std::pair<cell_addr, word>> init_values;
};

struct thread_status {
  int tid = 0;
  bool runnable = false;
  bool done = false;
  bool waiting = false;  // parked on a wait_until predicate
  yield_info at{};
};

// Returns the tid to run next; called once per step with the current
// statuses (at least one runnable).
using picker_fn = std::function<int(const std::vector<thread_status>&)>;

struct sched_options {
  // Yield points where the thread parks and the scheduler picks; null =
  // park on every instrumented point.
  std::function<bool(const yield_info&)> filter;
  // Hard cap on picks per run; exceeding it raises bound_exceeded_error.
  std::size_t max_picks = 1'000'000;
};

class deadlock_error : public std::runtime_error {
 public:
  explicit deadlock_error(std::string blocked)
      : std::runtime_error("all runnable threads are blocked: " + blocked) {}
};

class bound_exceeded_error : public std::runtime_error {
 public:
  bound_exceeded_error() : std::runtime_error("schedule pick bound exceeded") {}
};

class schedule_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// One cooperative execution: exactly one logical thread runs at a time,
// handing control back to the coordinator at every retained yield point.
class sched_run {
 public:
  sched_run(program& prog, sched_options opt) : prog_(prog), opt_(std::move(opt)) {
    threads_.reserve(prog.threads.size());
    for (std::size_t i = 0; i < prog.threads.size(); ++i)
      threads_.push_back(std::make_unique<lthread>(static_cast<int>(i)));
    for (const auto& [addr, w] : prog.init_values) {
      event e;
      e.thread = -1;
      e.kind = event_kind::init_write;
      e.addr = addr;
      e.value = w;
      hist_.append(e);
    }
  }

  history run(const picker_fn& pick) {
    launch();
    for (;;) {
      if (all_done()) break;
      auto statuses = snapshot_statuses();
      bool any_runnable = false;
      for (const auto& s : statuses) any_runnable |= s.runnable;
      if (!any_runnable) {
        finish_threads(true);
        throw deadlock_error{describe_blocked(statuses)};
      }
      if (hist_.picks.size() >= opt_.max_picks) {
        finish_threads(true);
        throw bound_exceeded_error{};
      }
      int tid = -1;
      try {
        tid = pick(statuses);
      } catch (...) {
        finish_threads(true);
        throw;
      }
      if (tid < 0 || tid >= static_cast<int>(threads_.size()) || !statuses[tid].runnable) {
        finish_threads(true);
        throw schedule_error{"pick of non-runnable thread " + std::to_string(tid)};
      }
      ++step_;
      hist_.picks.push_back(tid);
      resume(*threads_[tid]);
    }
    finish_threads(false);
    return std::move(hist_);
  }

 private:
  enum class tstate : std::uint8_t { created, running, parked, waiting, done };

  struct lthread;

  struct shim final : instrument {
    sched_run* r;
    lthread* t;

    void point(const yield_info& y) override {
      if (r->opt_.filter && !r->opt_.filter(y)) return;
      r->park(*t, tstate::parked, y, nullptr);
    }

    void wait_until(const std::function<bool()>& pred) override {
      if (pred()) return;  // not blocked: no scheduling point
      r->park(*t, tstate::waiting, yield_info{}, &pred);
    }

    void record(event e) override {
      e.step = r->step_;
      r->hist_.append(e);
    }
  };

  struct lthread {
    explicit lthread(int id) : tid(id) {}
    int tid;
    std::thread th;
    tstate st = tstate::created;
    yield_info at{};
    std::function<bool()> pred;
    bool cancelled = false;
    std::exception_ptr error;
    shim instr{};
    thread_ctx ctx{};
  };

  struct cancelled_run {};

  // Threads spawn parked at their start: nothing runs until picked, so a
  // controller sees every instruction of every thread.
  void launch() {
    for (auto& tp : threads_) {
      lthread& t = *tp;
      t.instr.r = this;
      t.instr.t = &t;
      t.ctx.tid = t.tid;
      t.ctx.instr = &t.instr;
      t.th = std::thread([this, &t] { thread_main(t); });
    }
  }

  void thread_main(lthread& t) {
    bool cancelled_at_start;
    {
      std::unique_lock<std::mutex> lk(mu_);
      cv_.wait(lk, [&] { return current_ == t.tid; });
      cancelled_at_start = t.cancelled;
    }
    if (!cancelled_at_start) {
      try {
        prog_.threads[t.tid](t.ctx);
      } catch (const cancelled_run&) {
      } catch (...) {
        t.error = std::current_exception();
      }
    }
    std::unique_lock<std::mutex> lk(mu_);
    t.st = tstate::done;
    current_ = kCoordinator;
    cv_.notify_all();
  }

  // Called from the logical thread; blocks it until picked again.
  void park(lthread& t, tstate st, const yield_info& y, const std::function<bool()>* pred) {
    std::unique_lock<std::mutex> lk(mu_);
    t.st = st;
    t.at = y;
    if (pred) t.pred = *pred;
    current_ = kCoordinator;
    cv_.notify_all();
    cv_.wait(lk, [&] { return current_ == t.tid; });
    if (t.cancelled) throw cancelled_run{};
    t.st = tstate::running;
    t.pred = nullptr;
  }

  void resume(lthread& t) {
    std::unique_lock<std::mutex> lk(mu_);
    current_ = t.tid;
    cv_.notify_all();
    cv_.wait(lk, [&] { return current_ == kCoordinator; });
  }

  bool all_done() const {
    for (const auto& t : threads_)
      if (t->st != tstate::done) return false;
    return true;
  }

  std::vector<thread_status> snapshot_statuses() {
    std::vector<thread_status> out;
    out.reserve(threads_.size());
    for (const auto& tp : threads_) {
      const lthread& t = *tp;
      thread_status s;
      s.tid = t.tid;
      s.done = t.st == tstate::done;
      s.waiting = t.st == tstate::waiting;
      s.at = t.at;
      if (t.st == tstate::parked || t.st == tstate::created)
        s.runnable = true;
      else if (t.st == tstate::waiting)
        s.runnable = t.pred && t.pred();
      out.push_back(s);
    }
    return out;
  }

  static std::string describe_blocked(const std::vector<thread_status>& sts) {
    std::ostringstream os;
    for (const auto& s : sts)
      if (!s.done)
        os << "thread " << s.tid << (s.waiting ? " waiting" : " parked at ")
           << (s.waiting ? "" : to_string(s.at.kind)) << "; ";
    return os.str();
  }

  // Unblock every live thread so its std::thread can be joined. With
  // cancel=true parked threads unwind via cancelled_run.
  void finish_threads(bool cancel) {
    for (auto& tp : threads_) {
      lthread& t = *tp;
      if (!t.th.joinable()) continue;
      for (;;) {
        {
          std::unique_lock<std::mutex> lk(mu_);
          if (t.st == tstate::done) break;
          if (cancel) t.cancelled = true;
          current_ = t.tid;
          cv_.notify_all();
          cv_.wait(lk, [&] { return current_ == kCoordinator; });
        }
      }
      t.th.join();
    }
    if (!cancel) {
      for (auto& tp : threads_)
        if (tp->error) std::rethrow_exception(tp->error);
    }
  }

  static constexpr int kCoordinator = -1;

  program& prog_;
  sched_options opt_;
  std::vector<std::unique_ptr<lthread>> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  int current_ = kCoordinator;
  std::uint64_t step_ = 0;
  history hist_;
};

}  // namespace detail

// Deterministic replay: the same (program, schedule) pair produces a
// byte-identical serialized history.
inline history run_schedule(program& prog, const schedule& sc, sched_options opt = {}) {
  detail::sched_run r(prog, std::move(opt));
  if (sc.m == schedule::mode::explicit_picks) {
    std::size_t next = 0;
    return r.run([&](const std::vector<thread_status>&) -> int {
      if (next >= sc.picks.size()) throw schedule_error{"explicit schedule exhausted"};
      return sc.picks[next++];
    });
  }
  std::mt19937_64 rng(sc.seed);
  return r.run([&](const std::vector<thread_status>& sts) -> int {
    std::vector<int> runnable;
    for (const auto& s : sts)
      if (s.runnable) runnable.push_back(s.tid);
    return runnable[static_cast<std::size_t>(rng() % runnable.size())];
  });
}

// Scripted interleavings for regression tests; records the pick sequence
// so the run can be saved and replayed as an explicit schedule.
inline history run_controlled(program& prog, const picker_fn& pick, sched_options opt = {}) {
  detail::sched_run r(prog, std::move(opt));
  return r.run(pick);
}

// Exhaustive interleaving enumeration by prefix-directed replay: each run
// replays a forced pick prefix, then follows the lowest runnable tid,
// recording every decision's alternatives for later branches. Visits one
// history per interleaving; returns the count.
inline std::uint64_t enumerate_schedules(
    const std::function<program()>& factory, sched_options opt,
    const std::function<void(const history&)>& visit) {
  std::uint64_t count = 0;
  std::vector<std::vector<int>> frontier;
  frontier.push_back({});
  while (!frontier.empty()) {
    std::vector<int> prefix = std::move(frontier.back());
    frontier.pop_back();

    program prog = factory();
    detail::sched_run r(prog, opt);
    std::size_t depth = 0;
    std::vector<int> chosen;
    std::vector<std::vector<int>> alternatives;  // per decision beyond the prefix
    history h = r.run([&](const std::vector<thread_status>& sts) -> int {
      int tid;
      if (depth < prefix.size()) {
        tid = prefix[depth];
      } else {
        std::vector<int> runnable;
        for (const auto& s : sts)
          if (s.runnable) runnable.push_back(s.tid);
        tid = runnable.front();
        alternatives.push_back(std::move(runnable));
      }
      ++depth;
      chosen.push_back(tid);
      return tid;
    });
    visit(h);
    ++count;

    for (std::size_t d = 0; d < alternatives.size(); ++d) {
      const std::size_t at = prefix.size() + d;
      for (std::size_t i = 1; i < alternatives[d].size(); ++i) {
        std::vector<int> next(chosen.begin(), chosen.begin() + static_cast<long>(at));
        next.push_back(alternatives[d][i]);
        frontier.push_back(std::move(next));
      }
    }
  }
  return count;
}

}  // namespace tmlab

#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "tmlab/engine.hpp"
#include "tmlab/heap.hpp"
#include "tmlab/reclaim.hpp"

namespace tmlab {

struct epoch_options {
  // Minimum age (in global epochs) before a deferred free executes.
  // 2 is the quiescence rule; 1 exists only for the mutation regression.
  std::uint64_t min_age = 2;
};

// Epoch-based deferred reclamation with a global limbo.
//
// Thread epochs advance at every transaction start, restart and end; the
// global epoch advances each time all registered threads have advanced
// since its last change. Frees requested in transactions are tagged with
// the global epoch at deferral time and executed by committing
// transactions once they are older than two global epochs.
//
// nontx_free frees directly, bypassing limbo: reclamations outside of
// transactions do not consider the quiescence mechanism, which is exactly
// the uncovered case this strategy is known for.
class epoch_reclaim final : public reclaim_strategy {
 public:
  explicit epoch_reclaim(heap& h, epoch_options opt = {}) : heap_(h), opt_(opt) {}

  const char* name() const override { return "epoch"; }

  void register_thread(int tid) override {
    std::lock_guard<std::mutex> lk(mu_);
    if (!threads_.emplace(tid, tstate{}).second) throw duplicate_registration_error{tid};
  }

  void deregister_thread(int tid) override {
    std::lock_guard<std::mutex> lk(mu_);
    if (threads_.erase(tid) == 0)
      throw std::logic_error("deregister of unknown thread " + std::to_string(tid));
    // A departed thread counts as perpetually advanced.
    maybe_advance_locked();
  }

  void begin_hook(thread_ctx& ctx) override { boundary_hook(ctx); }

  void boundary_hook(thread_ctx& ctx) override {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = threads_.find(ctx.tid);
    if (it == threads_.end())
      throw std::logic_error("boundary hook from unregistered thread " +
                             std::to_string(ctx.tid));
    ++it->second.local_epoch;
    it->second.advanced = true;
    maybe_advance_locked();
  }

  void commit_hook(thread_ctx& ctx, const std::vector<block_id>& free_log) override {
    std::vector<entry> to_free;
    std::uint64_t exec_epoch = 0;
    {
      std::lock_guard<std::mutex> lk(mu_);
      for (block_id b : free_log) {
        const std::uint64_t bytes = std::uint64_t{heap_.size_of(b)} * kWordBytes;
        limbo_.push_back(entry{b, global_epoch_, bytes});
        deferred_bytes_.fetch_add(bytes, std::memory_order_relaxed);
        ++defer_count_;
        irecord(ctx, event_kind::free_deferred, cell_addr{b, 0},
                word::scalar(global_epoch_));
        notify_locked();
      }
      // Tags are non-decreasing, so eligible entries form a prefix.
      exec_epoch = global_epoch_;
      while (!limbo_.empty() && exec_epoch >= limbo_.front().tag + opt_.min_age) {
        to_free.push_back(limbo_.front());
        limbo_.pop_front();
      }
    }
    for (const entry& e : to_free) execute_entry(ctx, e, exec_epoch);
  }

  trap_decision trap_hook(thread_ctx&, const trap_query& q) override {
    // Unreachable for reclaimed blocks under the two-epoch rule; anything
    // that lands here is a genuine wild access.
    std::lock_guard<std::mutex> lk(mu_);
    ++stats_.traps_total;
    ++stats_.traps_escalated;
    (void)q;
    return trap_decision::escalate;
  }

  void nontx_free(thread_ctx& ctx, block_id b) override {
    if (ctx.in_tx) throw std::logic_error("nontx_free inside a transaction");
    heap_.free(b);  // no quiescence: the uncovered case
    irecord(ctx, event_kind::free_executed, cell_addr{b, 0});
  }

  std::uint64_t deferred_bytes() const override {
    return deferred_bytes_.load(std::memory_order_relaxed);
  }

  void drain_all() override {
    std::vector<entry> to_free;
    {
      std::lock_guard<std::mutex> lk(mu_);
      if (!threads_.empty())
        throw std::logic_error("drain_all with registered threads");
      to_free.assign(limbo_.begin(), limbo_.end());
      limbo_.clear();
    }
    thread_ctx shutdown_ctx;
    for (const entry& e : to_free) {
      heap_.free(e.b);
      deferred_bytes_.fetch_sub(e.bytes, std::memory_order_relaxed);
      ++drain_count_;
      irecord(shutdown_ctx, event_kind::free_executed, cell_addr{e.b, 0});
      std::lock_guard<std::mutex> lk(mu_);
      notify_locked();
    }
  }

  trap_stats traps() const override {
    std::lock_guard<std::mutex> lk(mu_);
    return stats_;
  }

  std::uint64_t global_epoch() const {
    std::lock_guard<std::mutex> lk(mu_);
    return global_epoch_;
  }

  std::uint64_t thread_epoch(int tid) const {
    std::lock_guard<std::mutex> lk(mu_);
    return threads_.at(tid).local_epoch;
  }

  std::uint64_t defer_count() const {
    std::lock_guard<std::mutex> lk(mu_);
    return defer_count_;
  }

  std::uint64_t drain_count() const {
    std::lock_guard<std::mutex> lk(mu_);
    return drain_count_;
  }

  std::size_t limbo_size() const {
    std::lock_guard<std::mutex> lk(mu_);
    return limbo_.size();
  }

  // Executions that violated the two-epoch quiescence rule. Stays 0
  // unless min_age is mutated below 2.
  std::uint64_t rule_violations() const {
    return rule_violations_.load(std::memory_order_relaxed);
  }

  // Called with the current deferred byte total after every defer/drain.
  void set_observer(std::function<void(std::uint64_t)> fn) {
    std::lock_guard<std::mutex> lk(mu_);
    observer_ = std::move(fn);
  }

 private:
  struct entry {
    block_id b;
    std::uint64_t tag;  // global epoch at deferral time
    std::uint64_t bytes;
  };

  struct tstate {
    std::uint64_t local_epoch = 0;
    bool advanced = false;  // since the last global-epoch change
  };

  void maybe_advance_locked() {
    if (threads_.empty()) return;
    for (const auto& [tid, st] : threads_)
      if (!st.advanced) return;
    ++global_epoch_;
    for (auto& [tid, st] : threads_) st.advanced = false;
  }

  void execute_entry(thread_ctx& ctx, const entry& e, std::uint64_t exec_epoch) {
    if (exec_epoch < e.tag + 2) rule_violations_.fetch_add(1, std::memory_order_relaxed);
    heap_.free(e.b);  // double free here signals an application bug
    deferred_bytes_.fetch_sub(e.bytes, std::memory_order_relaxed);
    irecord(ctx, event_kind::free_executed, cell_addr{e.b, 0});
    std::lock_guard<std::mutex> lk(mu_);
    ++drain_count_;
    notify_locked();
  }

  void notify_locked() {
    if (observer_) observer_(deferred_bytes_.load(std::memory_order_relaxed));
  }

  heap& heap_;
  epoch_options opt_;
  mutable std::mutex mu_;
  std::uint64_t global_epoch_ = 0;
  std::map<int, tstate> threads_;
  std::deque<entry> limbo_;
  std::atomic<std::uint64_t> deferred_bytes_{0};
  std::atomic<std::uint64_t> rule_violations_{0};
  std::uint64_t defer_count_ = 0;
  std::uint64_t drain_count_ = 0;
  trap_stats stats_;
  std::function<void(std::uint64_t)> observer_;
};

// Transaction-aware barrier: an empty committed transaction. Fires the
// begin and end boundary hooks; once the global epoch has advanced twice
// past a prior privatization, freeing it manually is safe.
inline void quiescence_barrier(engine& e, thread_ctx& ctx) {
  e.run(ctx, [](txn&) {});
}

}  // namespace tmlab

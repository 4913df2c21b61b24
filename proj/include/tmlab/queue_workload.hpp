#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "tmlab/bundle.hpp"
#include "tmlab/engine.hpp"
#include "tmlab/metrics.hpp"

namespace tmlab {

// Shared singly linked FIFO in the managed heap, operated through the
// transactional interface. Node layout: cell 0 = next, cell 1 = tag,
// remaining payload cells stay NIL.
struct tx_queue {
  cell_addr head{};
  cell_addr tail{};
  cell_addr len{};
  std::uint32_t payload_cells = 1;
  std::uint32_t capacity = 0;  // 0 = unbounded (no length bookkeeping)

  static tx_queue create(heap& h, std::uint32_t payload_cells, std::uint32_t capacity = 0) {
    tx_queue q;
    const block_id b = h.alloc(3);
    q.head = cell_addr{b, 0};
    q.tail = cell_addr{b, 1};
    q.len = cell_addr{b, 2};
    q.payload_cells = payload_cells;
    q.capacity = capacity;
    return q;
  }

  // False when the queue is at capacity; the attempt stays read-only so
  // the caller can retry after consumers catch up.
  bool push(txn& t, std::uint64_t tag) const {
    std::uint64_t l = 0;
    if (capacity != 0) {
      l = t.read(len).as_scalar();
      if (l >= capacity) return false;
    }
    const cell_addr node = t.alloc(1 + payload_cells);  // next + payload, all NIL
    t.write(cell_addr{node.block, 1}, word::scalar(tag));
    const word tl = t.read(tail);
    if (tl.is_nil()) {
      t.write(head, word::ref(node));
    } else {
      t.write(cell_addr{tl.as_ref().block, 0}, word::ref(node));
    }
    t.write(tail, word::ref(node));
    if (capacity != 0) t.write(len, word::scalar(l + 1));
    return true;
  }

  // Unlink (privatize) the first node, then request its reclamation.
  std::optional<std::uint64_t> pop(txn& t) const {
    const word h = t.read(head);
    if (h.is_nil()) return std::nullopt;
    const cell_addr node = h.as_ref();
    const word next = t.read(cell_addr{node.block, 0});
    const word tag = t.read(cell_addr{node.block, 1});
    t.write(head, next);
    if (next.is_nil()) t.write(tail, word::nil());
    if (capacity != 0) {
      const std::uint64_t l = t.read(len).as_scalar();
      t.write(len, word::scalar(l - 1));
    }
    t.free_block(node.block);
    return tag.as_scalar();
  }
};

struct queue_workload_config {
  int producers = 1;
  int consumers = 1;
  std::uint64_t messages_per_producer = 100;
  std::uint32_t payload_cells = 8;
  std::uint32_t queue_capacity = 64;  // producer backpressure; 0 = unbounded
  bool stall_one_thread = false;      // register an idle epoch participant
  std::uint64_t seed = 0;
  retry_policy policy{};
  std::chrono::nanoseconds sample_floor = std::chrono::milliseconds(1);
};

struct run_summary {
  std::string engine_id;
  int threads = 0;
  double exec_ms = 0;
  std::uint64_t m_max = 0;
  double m_bar = 0;
  std::uint64_t commits = 0;
  std::uint64_t aborts = 0;
  std::uint64_t validations = 0;
  std::uint64_t traps = 0;
  std::uint64_t escalations = 0;
  std::uint64_t produced = 0;
  std::uint64_t consumed = 0;
  metrics_trace trace;
};

class workload_leak_error : public std::runtime_error {
 public:
  explicit workload_leak_error(std::uint64_t live, std::uint64_t baseline)
      : std::runtime_error("post-drain live_bytes " + std::to_string(live) +
                           " != baseline " + std::to_string(baseline)) {}
};

class queue_integrity_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Producers allocate message nodes and link them in transactionally;
// consumers privatize (unlink) and free via the transactional free path.
// The run drains fully, then the strategy quiesces and the heap must be
// back at its baseline.
inline run_summary run_queue_workload(const engine_config& ecfg,
                                      const queue_workload_config& cfg) {
  if (cfg.producers < 1 || cfg.consumers < 1)
    throw config_error("producers and consumers must be >= 1");
  if (cfg.payload_cells < 1) throw config_error("payload_cells must be >= 1");

  engine_bundle bundle{ecfg};
  heap& h = bundle.get_heap();
  engine& eng = bundle.get_engine();
  reclaim_strategy* strat = bundle.strategy();

  const tx_queue q = tx_queue::create(h, cfg.payload_cells, cfg.queue_capacity);
  const std::uint64_t baseline = h.live_bytes();

  memory_sampler sampler{cfg.sample_floor};
  h.set_observer([&sampler](std::uint64_t live) { sampler.on_live_bytes(live); });
  if (auto* ep = bundle.epoch())
    ep->set_observer([&sampler](std::uint64_t d) { sampler.on_deferred_bytes(d); });

  const int n_workers = cfg.producers + cfg.consumers;
  const int stall_tid = n_workers;
  if (strat) {
    for (int tid = 0; tid < n_workers; ++tid) strat->register_thread(tid);
    if (cfg.stall_one_thread) strat->register_thread(stall_tid);
  }

  const std::uint64_t total = cfg.messages_per_producer * static_cast<std::uint64_t>(cfg.producers);
  std::atomic<std::uint64_t> consumed_total{0};
  std::atomic<bool> failed{false};
  std::vector<std::vector<std::uint64_t>> consumed_tags(static_cast<std::size_t>(cfg.consumers));

  sampler.start(baseline);
  const auto t_begin = std::chrono::steady_clock::now();

  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(n_workers));
  for (int p = 0; p < cfg.producers; ++p) {
    workers.emplace_back([&, p] {
      thread_ctx ctx;
      ctx.tid = p;
      for (std::uint64_t m = 0; m < cfg.messages_per_producer && !failed.load(); ++m) {
        const std::uint64_t tag = (static_cast<std::uint64_t>(p) << 32) | m;
        for (;;) {
          bool pushed = false;
          const tx_outcome out =
              eng.run(ctx, [&](txn& t) { pushed = q.push(t, tag); }, cfg.policy);
          if (!out.committed()) {
            failed.store(true);
            break;
          }
          if (pushed) break;
          std::this_thread::sleep_for(std::chrono::microseconds(20));
        }
      }
      if (strat) strat->deregister_thread(ctx.tid);
    });
  }
  for (int c = 0; c < cfg.consumers; ++c) {
    workers.emplace_back([&, c] {
      thread_ctx ctx;
      ctx.tid = cfg.producers + c;
      auto& tags = consumed_tags[static_cast<std::size_t>(c)];
      while (consumed_total.load() < total && !failed.load()) {
        std::optional<std::uint64_t> got;
        const tx_outcome out = eng.run(ctx, [&](txn& t) { got = q.pop(t); }, cfg.policy);
        if (!out.committed()) {
          failed.store(true);
          break;
        }
        if (got) {
          tags.push_back(*got);
          consumed_total.fetch_add(1);
        } else {
          std::this_thread::sleep_for(std::chrono::microseconds(20));
        }
      }
      if (strat) strat->deregister_thread(ctx.tid);
    });
  }
  for (auto& w : workers) w.join();
  const auto t_done = std::chrono::steady_clock::now();

  if (failed.load()) throw std::runtime_error("workload transaction failed unexpectedly");

  // Final quiescence: every participant is gone, drain whatever is parked.
  if (strat) {
    if (cfg.stall_one_thread) strat->deregister_thread(stall_tid);
    strat->drain_all();
  }
  if (auto* ep = bundle.epoch(); ep && ep->rule_violations() != 0)
    throw std::runtime_error("two-epoch quiescence rule violated " +
                             std::to_string(ep->rule_violations()) + " times");

  run_summary s;
  s.trace = sampler.stop();
  h.set_observer(nullptr);
  if (auto* ep = bundle.epoch()) ep->set_observer(nullptr);

  if (h.live_bytes() != baseline) throw workload_leak_error{h.live_bytes(), baseline};

  std::vector<std::uint64_t> expected;
  expected.reserve(total);
  for (int p = 0; p < cfg.producers; ++p)
    for (std::uint64_t m = 0; m < cfg.messages_per_producer; ++m)
      expected.push_back((static_cast<std::uint64_t>(p) << 32) | m);
  std::vector<std::uint64_t> got;
  got.reserve(total);
  for (const auto& v : consumed_tags) got.insert(got.end(), v.begin(), v.end());
  std::sort(expected.begin(), expected.end());
  std::sort(got.begin(), got.end());
  if (expected != got)
    throw queue_integrity_error{"consumed multiset differs from produced multiset (" +
                                std::to_string(got.size()) + " vs " +
                                std::to_string(expected.size()) + " messages)"};

  s.engine_id = bundle.id();
  s.threads = n_workers;
  s.exec_ms = std::chrono::duration<double, std::milli>(t_done - t_begin).count();
  s.m_max = s.trace.m_max();
  s.m_bar = compute_mbar(s.trace);
  const engine_counters ec = eng.counters();
  s.commits = ec.commits;
  s.aborts = ec.aborts;
  s.validations = ec.validations;
  if (strat) {
    const trap_stats ts = strat->traps();
    s.traps = ts.traps_total;
    s.escalations = ts.traps_escalated;
  }
  s.produced = total;
  s.consumed = consumed_total.load();
  return s;
}

}  // namespace tmlab

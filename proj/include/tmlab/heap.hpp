#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include "tmlab/types.hpp"

namespace tmlab {

class heap_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class zero_size_error : public heap_error {
 public:
  zero_size_error() : heap_error("alloc of zero cells") {}
};

class exhaustion_limit_error : public heap_error {
 public:
  explicit exhaustion_limit_error(std::uint64_t requested, std::uint64_t cap)
      : heap_error("live_bytes cap " + std::to_string(cap) +
                   " exceeded by request of " + std::to_string(requested) +
                   " bytes") {}
};

class double_free_error : public heap_error {
 public:
  explicit double_free_error(block_id b)
      : heap_error("double free of block " + std::to_string(b.id)), block(b) {}
  block_id block;
};

class unknown_block_error : public heap_error {
 public:
  explicit unknown_block_error(block_id b)
      : heap_error("unknown block " + std::to_string(b.id)), block(b) {}
  block_id block;
};

// Recoverable access-violation condition: the managed-heap analogue of a
// segmentation fault. Raised on any cell access to a freed or unknown
// block; never terminates the process.
class access_violation : public std::runtime_error {
 public:
  explicit access_violation(cell_addr a)
      : std::runtime_error("access violation at block " +
                           std::to_string(a.block.id) + " offset " +
                           std::to_string(a.offset)),
        addr(a) {}
  cell_addr addr;
};

struct heap_stats {
  std::uint64_t live_bytes = 0;
  std::uint64_t alloc_count = 0;
  std::uint64_t free_count = 0;
};

struct heap_config {
  // 0 = unlimited. A nonzero cap makes alloc fail with
  // exhaustion_limit_error instead of exhausting the host.
  std::uint64_t live_bytes_cap = 0;
};

// A managed transactional heap of word-sized cells.
//
// Blocks are identified by monotonically increasing ids that are never
// reissued, and transition Live -> Freed exactly once. Cell reads and
// writes are atomic at word granularity and lock-free; alloc/free/stats
// are internally synchronized. Accessing a freed or unknown block raises
// access_violation, always detected: freed blocks keep their slot (and
// id) forever, so reuse can never mask a fault.
class heap {
 public:
  enum class block_state : std::uint8_t { live = 0, freed = 1 };

  // Called after every alloc/free with the post-event live_bytes.
  using observer_fn = std::function<void(std::uint64_t live_bytes)>;

  explicit heap(heap_config cfg = {}) : cfg_(cfg) {
    directory_ = std::make_unique<std::atomic<slab*>[]>(kDirSize);
    for (std::size_t i = 0; i < kDirSize; ++i) directory_[i].store(nullptr, std::memory_order_relaxed);
  }

  ~heap() {
    for (std::size_t i = 0; i < kDirSize; ++i) delete directory_[i].load(std::memory_order_relaxed);
  }

  heap(const heap&) = delete;
  heap& operator=(const heap&) = delete;

  block_id alloc(std::uint32_t size_cells) {
    if (size_cells == 0) throw zero_size_error{};
    const std::uint64_t bytes = std::uint64_t{size_cells} * kWordBytes;
    std::lock_guard<std::mutex> lk(mu_);
    if (cfg_.live_bytes_cap != 0 && live_bytes_ + bytes > cfg_.live_bytes_cap)
      throw exhaustion_limit_error{bytes, cfg_.live_bytes_cap};
    const std::uint64_t id = next_id_.load(std::memory_order_relaxed);
    slot& s = slot_for(id, /*create=*/true);
    s.size_cells = size_cells;
    s.cells = std::make_unique<std::atomic<std::uint64_t>[]>(size_cells);
    for (std::uint32_t i = 0; i < size_cells; ++i)
      s.cells[i].store(word::nil().raw(), std::memory_order_relaxed);
    s.state.store(static_cast<std::uint8_t>(block_state::live), std::memory_order_relaxed);
    // Publish: the slot is fully initialized before the id becomes known.
    next_id_.store(id + 1, std::memory_order_release);
    live_bytes_ += bytes;
    ++alloc_count_;
    notify();
    return block_id{id};
  }

  void free(block_id b) {
    std::lock_guard<std::mutex> lk(mu_);
    slot* s = find_slot(b.id);
    if (s == nullptr) throw unknown_block_error{b};
    if (s->state.load(std::memory_order_relaxed) == static_cast<std::uint8_t>(block_state::freed))
      throw double_free_error{b};
    s->state.store(static_cast<std::uint8_t>(block_state::freed), std::memory_order_release);
    live_bytes_ -= std::uint64_t{s->size_cells} * kWordBytes;
    ++free_count_;
    notify();
  }

  // Lock-free cell read; nullopt when the block is freed or unknown.
  // The state is rechecked after the cell load, so a value is returned
  // only if the block was still live at the recheck.
  std::optional<word> try_read_cell(cell_addr a) const noexcept {
    const slot* s = find_slot(a.block.id);
    if (s == nullptr || a.offset >= s->size_cells) return std::nullopt;
    if (s->state.load(std::memory_order_acquire) != static_cast<std::uint8_t>(block_state::live))
      return std::nullopt;
    const std::uint64_t raw = s->cells[a.offset].load(std::memory_order_acquire);
    if (s->state.load(std::memory_order_acquire) != static_cast<std::uint8_t>(block_state::live))
      return std::nullopt;
    return word::from_raw(raw);
  }

  bool try_write_cell(cell_addr a, word w) noexcept {
    slot* s = find_slot(a.block.id);
    if (s == nullptr || a.offset >= s->size_cells) return false;
    if (s->state.load(std::memory_order_acquire) != static_cast<std::uint8_t>(block_state::live))
      return false;
    s->cells[a.offset].store(w.raw(), std::memory_order_release);
    return true;
  }

  word read_cell(cell_addr a) const {
    if (auto w = try_read_cell(a)) return *w;
    throw access_violation{a};
  }

  void write_cell(cell_addr a, word w) {
    if (!try_write_cell(a, w)) throw access_violation{a};
  }

  heap_stats stats() const {
    std::lock_guard<std::mutex> lk(mu_);
    return heap_stats{live_bytes_, alloc_count_, free_count_};
  }

  std::uint64_t live_bytes() const {
    std::lock_guard<std::mutex> lk(mu_);
    return live_bytes_;
  }

  block_state state_of(block_id b) const {
    const slot* s = find_slot(b.id);
    if (s == nullptr) throw unknown_block_error{b};
    return static_cast<block_state>(s->state.load(std::memory_order_acquire));
  }

  std::uint32_t size_of(block_id b) const {
    const slot* s = find_slot(b.id);
    if (s == nullptr) throw unknown_block_error{b};
    return s->size_cells;
  }

  void set_observer(observer_fn fn) {
    std::lock_guard<std::mutex> lk(mu_);
    observer_ = std::move(fn);
  }

 private:
  struct slot {
    std::atomic<std::uint8_t> state{static_cast<std::uint8_t>(block_state::freed)};
    std::uint32_t size_cells = 0;
    std::unique_ptr<std::atomic<std::uint64_t>[]> cells;
  };

  static constexpr std::size_t kSlabBits = 12;           // 4096 slots per slab
  static constexpr std::size_t kSlabSize = 1ull << kSlabBits;
  static constexpr std::size_t kDirSize = 1ull << 12;    // up to ~16M blocks per heap

  struct slab {
    slot slots[kSlabSize];
  };

  slot& slot_for(std::uint64_t id, bool create) {
    const std::size_t dir = id >> kSlabBits;
    if (dir >= kDirSize) throw heap_error{"heap block table exhausted"};
    slab* sl = directory_[dir].load(std::memory_order_acquire);
    if (sl == nullptr && create) {
      sl = new slab{};
      directory_[dir].store(sl, std::memory_order_release);
    }
    return sl->slots[id & (kSlabSize - 1)];
  }

  const slot* find_slot(std::uint64_t id) const noexcept {
    if (id == 0 || id >= next_id_.load(std::memory_order_acquire)) return nullptr;
    const slab* sl = directory_[id >> kSlabBits].load(std::memory_order_acquire);
    if (sl == nullptr) return nullptr;
    return &sl->slots[id & (kSlabSize - 1)];
  }

  slot* find_slot(std::uint64_t id) noexcept {
    return const_cast<slot*>(static_cast<const heap*>(this)->find_slot(id));
  }

  void notify() {
    if (observer_) observer_(live_bytes_);
  }

  heap_config cfg_;
  mutable std::mutex mu_;
  std::unique_ptr<std::atomic<slab*>[]> directory_;
  std::atomic<std::uint64_t> next_id_{1};
  std::uint64_t live_bytes_ = 0;
  std::uint64_t alloc_count_ = 0;
  std::uint64_t free_count_ = 0;
  observer_fn observer_;
};

}  // namespace tmlab

#pragma once

#include <cstdint>
#include <functional>

namespace tmlab {

// One heap cell is one 64-bit word.
inline constexpr std::uint64_t kWordBytes = 8;

// Identifier of a heap block. Monotonically increasing per heap, never
// reused within a run; id 0 is reserved as "no block".
struct block_id {
  std::uint64_t id = 0;

  friend bool operator==(block_id a, block_id b) noexcept { return a.id == b.id; }
  friend bool operator!=(block_id a, block_id b) noexcept { return a.id != b.id; }
  friend bool operator<(block_id a, block_id b) noexcept { return a.id < b.id; }
  explicit operator bool() const noexcept { return id != 0; }
};

// Address of a single word cell: (block, cell offset).
struct cell_addr {
  block_id block{};
  std::uint32_t offset = 0;

  friend bool operator==(cell_addr a, cell_addr b) noexcept {
    return a.block == b.block && a.offset == b.offset;
  }
  friend bool operator!=(cell_addr a, cell_addr b) noexcept { return !(a == b); }

  std::uint64_t packed() const noexcept {
    return (block.id << 24) | (offset & 0xFFFFFFu);
  }
};

// A 64-bit uninterpreted payload. The top bit tags an encoded cell_addr
// (a stored reference); everything else is scalar. The all-zero word is
// NIL and is distinct from every valid reference (block ids start at 1).
class word {
 public:
  constexpr word() noexcept : raw_(0) {}

  static constexpr word nil() noexcept { return word{}; }

  static word scalar(std::uint64_t v) noexcept {
    word w;
    w.raw_ = v & ~kRefTag;
    return w;
  }

  static word ref(cell_addr a) noexcept {
    word w;
    w.raw_ = kRefTag | (a.block.id << 24) | (a.offset & 0xFFFFFFu);
    return w;
  }

  static word from_raw(std::uint64_t r) noexcept {
    word w;
    w.raw_ = r;
    return w;
  }

  bool is_nil() const noexcept { return raw_ == 0; }
  bool is_ref() const noexcept { return (raw_ & kRefTag) != 0; }

  cell_addr as_ref() const noexcept {
    return cell_addr{block_id{(raw_ & ~kRefTag) >> 24},
                     static_cast<std::uint32_t>(raw_ & 0xFFFFFFu)};
  }

  std::uint64_t as_scalar() const noexcept { return raw_; }
  std::uint64_t raw() const noexcept { return raw_; }

  friend bool operator==(word a, word b) noexcept { return a.raw_ == b.raw_; }
  friend bool operator!=(word a, word b) noexcept { return a.raw_ != b.raw_; }

 private:
  static constexpr std::uint64_t kRefTag = 1ull << 63;
  std::uint64_t raw_;
};

}  // namespace tmlab

template <>
struct std::hash<tmlab::cell_addr> {
  std::size_t operator()(const tmlab::cell_addr& a) const noexcept {
    std::uint64_t x = a.packed();
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    return static_cast<std::size_t>(x);
  }
};

template <>
struct std::hash<tmlab::block_id> {
  std::size_t operator()(const tmlab::block_id& b) const noexcept {
    return std::hash<std::uint64_t>{}(b.id);
  }
};

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tmlab/history.hpp"
#include "tmlab/types.hpp"

namespace tmlab {

struct opacity_verdict {
  bool ok = false;
  std::uint64_t orders_tried = 0;
  std::string witness;  // on failure: why no serial order exists
};

struct opacity_limits {
  std::size_t max_committed = 8;
};

class search_explosion_error : public std::runtime_error {
 public:
  explicit search_explosion_error(std::size_t n)
      : std::runtime_error("opacity search over " + std::to_string(n) +
                           " committed transactions exceeds the bound") {}
};

namespace detail {

struct oracle_tx {
  int thread = -1;
  std::uint64_t attempt = 0;
  bool committed = false;
  std::uint64_t begin_seq = 0;
  std::uint64_t end_seq = 0;
  // Program-ordered reads and writes; reads carry the value returned.
  struct op {
    bool is_read;
    cell_addr addr;
    word value;
  };
  std::vector<op> ops;

  std::string label() const {
    return "tx(t" + std::to_string(thread) + ",a" + std::to_string(attempt) + ")";
  }
};

using cell_state = std::unordered_map<cell_addr, word>;

inline word state_value(const cell_state& s, cell_addr a) {
  auto it = s.find(a);
  return it == s.end() ? word::nil() : it->second;  // cells start NIL
}

// Checks every read of tx against the given prefix state with the
// transaction's own buffered writes overlaid in program order.
inline bool consistent_with(const oracle_tx& tx, const cell_state& prefix) {
  cell_state own;
  for (const auto& o : tx.ops) {
    if (o.is_read) {
      auto it = own.find(o.addr);
      const word expect = it != own.end() ? it->second : state_value(prefix, o.addr);
      if (expect != o.value) return false;
    } else {
      own[o.addr] = o.value;
    }
  }
  return true;
}

inline void apply_writes(cell_state& s, const oracle_tx& tx) {
  for (const auto& o : tx.ops)
    if (!o.is_read) s[o.addr] = o.value;
}

}  // namespace detail

// Brute-force opacity check: searches for a serial order of the committed
// transactions (respecting real time: a transaction that committed before
// another began must precede it) such that every committed transaction
// reads exactly the state left by its predecessors, and every aborted or
// doomed transaction reads a state produced by some prefix of that order.
inline opacity_verdict check_opacity(const history& h, opacity_limits lim = {}) {
  using detail::oracle_tx;

  detail::cell_state init;
  std::map<std::pair<int, std::uint64_t>, oracle_tx> txs;
  for (const auto& e : h.events) {
    if (e.kind == event_kind::init_write) {
      init[e.addr] = e.value;
      continue;
    }
    if (e.thread < 0) continue;
    const auto key = std::make_pair(e.thread, e.attempt);
    switch (e.kind) {
      case event_kind::tx_begin: {
        auto& tx = txs[key];
        tx.thread = e.thread;
        tx.attempt = e.attempt;
        tx.begin_seq = e.seq;
        break;
      }
      case event_kind::tx_read:
        txs[key].ops.push_back({true, e.addr, e.value});
        break;
      case event_kind::tx_write:
        txs[key].ops.push_back({false, e.addr, e.value});
        break;
      case event_kind::tx_commit: {
        auto& tx = txs[key];
        tx.committed = true;
        tx.end_seq = e.seq;
        break;
      }
      case event_kind::tx_abort:
        txs[key].end_seq = e.seq;
        break;
      default:
        break;
    }
  }

  std::vector<const oracle_tx*> committed;
  std::vector<const oracle_tx*> aborted;
  for (const auto& [key, tx] : txs)
    (tx.committed ? committed : aborted).push_back(&tx);
  if (committed.size() > lim.max_committed)
    throw search_explosion_error{committed.size()};

  const std::size_t n = committed.size();
  // precedes[i][j]: i committed before j began (real-time edge).
  std::vector<std::vector<bool>> precedes(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && committed[i]->end_seq < committed[j]->begin_seq)
        precedes[i][j] = true;

  opacity_verdict v;
  std::vector<std::size_t> order;
  std::vector<bool> used(n, false);
  std::vector<detail::cell_state> states;
  states.push_back(init);

  std::function<bool()> search = [&]() -> bool {
    if (order.size() == n) {
      ++v.orders_tried;
      for (const oracle_tx* tx : aborted) {
        bool found = false;
        for (const auto& st : states)
          if (detail::consistent_with(*tx, st)) {
            found = true;
            break;
          }
        if (!found) return false;
      }
      return true;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      bool ready = true;
      for (std::size_t j = 0; j < n; ++j)
        if (!used[j] && j != i && precedes[j][i]) ready = false;
      if (!ready) continue;
      if (!detail::consistent_with(*committed[i], states.back())) continue;
      used[i] = true;
      order.push_back(i);
      states.push_back(states.back());
      detail::apply_writes(states.back(), *committed[i]);
      if (search()) return true;
      states.pop_back();
      order.pop_back();
      used[i] = false;
    }
    if (order.size() + 1 >= n) ++v.orders_tried;  // dead end counted as a tried order
    return false;
  };

  v.ok = search();
  if (!v.ok) {
    std::ostringstream os;
    os << "no serial order of " << n << " committed transactions explains the history"
       << " (aborted transactions: " << aborted.size() << ")";
    v.witness = os.str();
  }
  return v;
}

}  // namespace tmlab

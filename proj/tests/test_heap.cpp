#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>
#include <unordered_map>

#include "tmlab/heap.hpp"

using namespace tmlab;

TEST_CASE("alloc returns fresh live blocks initialized to NIL") {
  heap h;
  const block_id b = h.alloc(1);
  CHECK(b.id == 1);
  CHECK(h.stats().live_bytes == 8);
  CHECK(h.read_cell({b, 0}) == word::nil());

  const block_id b2 = h.alloc(4);
  const block_id b3 = h.alloc(4);
  CHECK(b2 != b3);
  CHECK(h.stats().live_bytes == 8 + 32 + 32);
}

TEST_CASE("alloc of zero cells fails") {
  heap h;
  CHECK_THROWS_AS(h.alloc(0), zero_size_error);
}

TEST_CASE("live_bytes cap signals exhaustion") {
  heap h{heap_config{64}};
  h.alloc(8);  // 64 bytes
  CHECK_THROWS_AS(h.alloc(16), exhaustion_limit_error);
  // 8*8 + 16*8 > 64 even for the smaller follow-up
  CHECK_THROWS_AS(h.alloc(1), exhaustion_limit_error);
}

TEST_CASE("free round trip and terminal freed state") {
  heap h;
  const auto before = h.stats().live_bytes;
  const block_id b = h.alloc(2);
  h.free(b);
  CHECK(h.stats().live_bytes == before);
  CHECK_THROWS_AS(h.free(b), double_free_error);
}

TEST_CASE("free of a never-allocated block") {
  heap h;
  CHECK_THROWS_AS(h.free(block_id{999}), unknown_block_error);
}

TEST_CASE("store and load cells") {
  heap h;
  const block_id b = h.alloc(3);
  h.write_cell({b, 1}, word::scalar(42));
  CHECK(h.read_cell({b, 1}).as_scalar() == 42);
  h.write_cell({b, 1}, word::scalar(43));
  CHECK(h.read_cell({b, 1}).as_scalar() == 43);  // last write wins
}

TEST_CASE("access to a freed block raises a recoverable violation") {
  heap h;
  const block_id b = h.alloc(2);
  const cell_addr a{b, 0};
  h.write_cell(a, word::scalar(7));
  h.free(b);
  CHECK_THROWS_AS(h.read_cell(a), access_violation);
  CHECK_THROWS_AS(h.write_cell(a, word::scalar(1)), access_violation);
  try {
    h.read_cell(a);
    FAIL("expected access_violation");
  } catch (const access_violation& v) {
    CHECK(v.addr == a);
  }
  // try_* variants report the same condition without throwing.
  CHECK_FALSE(h.try_read_cell(a).has_value());
}

TEST_CASE("out-of-range offsets trap") {
  heap h;
  const block_id b = h.alloc(2);
  CHECK_THROWS_AS(h.read_cell({b, 2}), access_violation);
}

TEST_CASE("stats snapshot") {
  heap h;
  CHECK(h.stats().live_bytes == 0);
  const block_id b = h.alloc(2);
  CHECK(h.stats().live_bytes == 16);
  h.free(b);
  const auto st = h.stats();
  CHECK(st.live_bytes == 0);
  CHECK(st.alloc_count == 1);
  CHECK(st.free_count == 1);
}

TEST_CASE("word encoding distinguishes NIL, scalars and refs") {
  CHECK(word::nil().is_nil());
  CHECK_FALSE(word::nil().is_ref());
  const cell_addr a{block_id{12345}, 17};
  const word r = word::ref(a);
  CHECK(r.is_ref());
  CHECK_FALSE(r.is_nil());
  CHECK(r.as_ref() == a);
  const word s = word::scalar(0xDEADBEEF);
  CHECK_FALSE(s.is_ref());
  CHECK(s.as_scalar() == 0xDEADBEEF);
}

TEST_CASE("randomized alloc/free agrees with a reference counter") {
  std::mt19937_64 rng(42);
  heap h;
  std::unordered_map<std::uint64_t, std::uint32_t> live;  // id -> cells
  std::set<std::uint64_t> ever_issued;
  std::uint64_t ref_bytes = 0;
  for (int i = 0; i < 5000; ++i) {
    const bool do_alloc = live.empty() || (rng() % 2 == 0);
    if (do_alloc) {
      const std::uint32_t n = 1 + static_cast<std::uint32_t>(rng() % 16);
      const block_id b = h.alloc(n);
      CHECK(ever_issued.insert(b.id).second);  // ids never repeat
      live.emplace(b.id, n);
      ref_bytes += n * 8ull;
    } else {
      auto it = live.begin();
      std::advance(it, static_cast<long>(rng() % live.size()));
      h.free(block_id{it->first});
      ref_bytes -= it->second * 8ull;
      live.erase(it);
    }
    REQUIRE(h.stats().live_bytes == ref_bytes);
  }
}

TEST_CASE("live cells never raise") {
  heap h;
  const block_id b = h.alloc(64);
  for (std::uint32_t i = 0; i < 64; ++i) {
    CHECK_NOTHROW(h.write_cell({b, i}, word::scalar(i)));
    CHECK_NOTHROW(h.read_cell({b, i}));
  }
}

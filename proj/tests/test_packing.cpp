#include <random>

#include "doctest.h"
#include "sden/packing.hpp"

using namespace sden;

namespace {

// Exhaustive oracle: every split of every job over its allowed cells.
struct Brute {
  CapacityGrid cap;
  const std::vector<PackJob>& jobs;

  bool job(std::size_t j) {
    if (j == jobs.size()) return true;
    std::vector<std::pair<SlotIndex, int>> cells;
    for (SlotIndex t = jobs[j].lo; t <= jobs[j].hi; ++t) {
      for (int p : jobs[j].pools) cells.emplace_back(t, p);
      for (int p : jobs[j].fallback_pools) cells.emplace_back(t, p);
    }
    std::vector<Packets> in_slot(cap.size(), 0);
    return cell(j, cells, 0, jobs[j].demand, in_slot);
  }

  bool cell(std::size_t j, const std::vector<std::pair<SlotIndex, int>>& cells, std::size_t i, Packets left,
            std::vector<Packets>& in_slot) {
    if (left == 0) return job(j + 1);
    if (i == cells.size()) return false;
    const auto [t, p] = cells[i];
    Packets& c = cap[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    const Packets most = std::min({left, c, jobs[j].per_slot - in_slot[static_cast<std::size_t>(t)]});
    for (Packets x = most; x >= 0; --x) {
      c -= x;
      in_slot[static_cast<std::size_t>(t)] += x;
      const bool ok = cell(j, cells, i + 1, left - x, in_slot);
      c += x;
      in_slot[static_cast<std::size_t>(t)] -= x;
      if (ok) return true;
    }
    return false;
  }
};

bool respects(const CapacityGrid& cap, const std::vector<PackJob>& jobs, const PackResult& r) {
  CapacityGrid left = cap;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    Packets total = 0;
    std::map<SlotIndex, Packets> per_slot;
    for (const PackCell& c : r[j]) {
      if (c.slot < jobs[j].lo || c.slot > jobs[j].hi) return false;
      const bool allowed = std::count(jobs[j].pools.begin(), jobs[j].pools.end(), c.pool) +
                               std::count(jobs[j].fallback_pools.begin(), jobs[j].fallback_pools.end(), c.pool) >
                           0;
      if (!allowed) return false;
      left[static_cast<std::size_t>(c.slot)][static_cast<std::size_t>(c.pool)] -= c.count;
      per_slot[c.slot] += c.count;
      total += c.count;
    }
    if (total != jobs[j].demand) return false;
    for (auto [t, n] : per_slot) {
      if (n > jobs[j].per_slot) return false;
    }
  }
  for (const auto& row : left) {
    for (Packets v : row) {
      if (v < 0) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("max flow on a textbook graph") {
  MaxFlow g(4);
  g.add_edge(0, 1, 3);
  g.add_edge(0, 2, 2);
  const auto e = g.add_edge(1, 2, 5);
  g.add_edge(1, 3, 2);
  g.add_edge(2, 3, 3);
  CHECK(g.run(0, 3) == 5);
  CHECK(g.flow_on(e) == 1);
}

TEST_CASE("edf fits one packet per slot") {
  CapacityGrid cap(5, std::vector<Packets>{2});
  std::vector<PackJob> jobs{{5, 0, 4, 5, {0}, {}}};
  auto r = edf_pack(cap, jobs);
  REQUIRE(r);
  Packets total = 0;
  for (auto& c : (*r)[0]) total += c.count;
  CHECK(total == 5);
  CHECK(max_insertable(CapacityGrid(5, std::vector<Packets>{2}), {11, 0, 4, 11, {0}, {}}) == 10);
}

TEST_CASE("flow finds packings edf misses") {
  // Job A (wide window) is first in order and grabs slot 0 which B needs.
  CapacityGrid cap{{1}, {1}};
  std::vector<PackJob> jobs{{1, 0, 1, 1, {0}, {}}, {1, 0, 0, 1, {0}, {}}};
  CapacityGrid copy = cap;
  CHECK_FALSE(edf_pack(copy, jobs).has_value());
  auto r = flow_pack(cap, jobs);
  REQUIRE(r);
  CHECK(respects(cap, jobs, *r));
}

TEST_CASE("flow_pack agrees with exhaustive search") {
  std::mt19937_64 rng(7);
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1)); };
  int feasible = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int slots = pick(1, 4);
    const int pools = pick(1, 3);
    CapacityGrid cap(static_cast<std::size_t>(slots), std::vector<Packets>(static_cast<std::size_t>(pools)));
    for (auto& row : cap) {
      for (auto& v : row) v = pick(0, 2);
    }
    std::vector<PackJob> jobs;
    const int n = pick(1, 3);
    for (int j = 0; j < n; ++j) {
      PackJob job;
      job.demand = pick(1, 3);
      job.lo = pick(0, slots - 1);
      job.hi = pick(static_cast<int>(job.lo), slots - 1);
      job.per_slot = pick(1, 3);
      job.pools = {pick(0, pools - 1)};
      if (pools > 1 && pick(0, 1)) {
        const int other = (job.pools[0] + 1) % pools;
        job.fallback_pools = {other};
      }
      jobs.push_back(job);
    }
    Brute brute{cap, jobs};
    const bool expect = brute.job(0);
    const auto got = flow_pack(cap, jobs);
    CHECK(got.has_value() == expect);
    if (got) CHECK(respects(cap, jobs, *got));
    CapacityGrid copy = cap;
    if (auto e = edf_pack(copy, jobs)) {
      CHECK(expect);  // EDF is sound
      CHECK(respects(cap, jobs, *e));
    }
    feasible += expect;
  }
  CHECK(feasible > 50);
  CHECK(feasible < 380);
}

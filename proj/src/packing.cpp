#include "sden/packing.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <tuple>

namespace sden {

namespace {

void add_cell(std::vector<PackCell>& cells, SlotIndex slot, int pool, Packets n) {
  if (n <= 0) return;
  if (!cells.empty() && cells.back().slot == slot && cells.back().pool == pool) {
    cells.back().count += n;
    return;
  }
  cells.push_back({slot, pool, n});
}

// Fills `job` into `cap` from `pools`, respecting per-slot limits given what the
// job already has in each slot. Returns packets still missing.
Packets fill(CapacityGrid& cap, const PackJob& job, const std::vector<int>& pools, Packets need,
             std::vector<Packets>& in_slot, std::vector<PackCell>& cells) {
  const SlotIndex last = std::min<SlotIndex>(job.hi, static_cast<SlotIndex>(cap.size()) - 1);
  for (SlotIndex t = std::max<SlotIndex>(job.lo, 0); t <= last && need > 0; ++t) {
    auto& row = cap[static_cast<std::size_t>(t)];
    Packets& used = in_slot[static_cast<std::size_t>(t - job.lo)];
    for (int p : pools) {
      const Packets room = std::min({need, job.per_slot - used, row[static_cast<std::size_t>(p)]});
      if (room <= 0) continue;
      row[static_cast<std::size_t>(p)] -= room;
      used += room;
      need -= room;
      add_cell(cells, t, p, room);
      if (need == 0 || used == job.per_slot) break;
    }
  }
  return need;
}

}  // namespace

std::optional<PackResult> edf_pack(CapacityGrid& cap, const std::vector<PackJob>& jobs) {
  PackResult out(jobs.size());
  std::vector<Packets> missing(jobs.size(), 0);
  std::vector<std::vector<Packets>> in_slot(jobs.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    in_slot[j].assign(static_cast<std::size_t>(std::max<SlotIndex>(0, jobs[j].hi - jobs[j].lo + 1)), 0);
    missing[j] = fill(cap, jobs[j], jobs[j].pools, jobs[j].demand, in_slot[j], out[j]);
  }
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (missing[j] > 0 && !jobs[j].fallback_pools.empty()) {
      missing[j] = fill(cap, jobs[j], jobs[j].fallback_pools, missing[j], in_slot[j], out[j]);
    }
    if (missing[j] > 0) return std::nullopt;
  }
  for (auto& cells : out) {
    std::sort(cells.begin(), cells.end(),
              [](const PackCell& a, const PackCell& b) { return std::tie(a.slot, a.pool) < std::tie(b.slot, b.pool); });
  }
  return out;
}

Packets max_insertable(const CapacityGrid& cap, const PackJob& job) {
  Packets total = 0;
  const SlotIndex last = std::min<SlotIndex>(job.hi, static_cast<SlotIndex>(cap.size()) - 1);
  for (SlotIndex t = std::max<SlotIndex>(job.lo, 0); t <= last; ++t) {
    Packets room = 0;
    for (int p : job.pools) room += cap[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    for (int p : job.fallback_pools) room += cap[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    total += std::min(room, job.per_slot);
    if (total >= job.demand) return job.demand;
  }
  return total;
}

// --- Dinic -----------------------------------------------------------------

MaxFlow::MaxFlow(std::size_t nodes) : adj_(nodes), level_(nodes), it_(nodes) {}

std::size_t MaxFlow::add_edge(std::size_t from, std::size_t to, Packets capacity) {
  const std::size_t id = edges_.size();
  edges_.push_back({to, capacity, capacity});
  adj_[from].push_back(id);
  edges_.push_back({from, 0, 0});
  adj_[to].push_back(id + 1);
  return id;
}

bool MaxFlow::bfs(std::size_t s, std::size_t t) {
  std::fill(level_.begin(), level_.end(), -1);
  std::queue<std::size_t> q;
  level_[s] = 0;
  q.push(s);
  while (!q.empty()) {
    const std::size_t v = q.front();
    q.pop();
    for (std::size_t id : adj_[v]) {
      const Edge& e = edges_[id];
      if (e.cap > 0 && level_[e.to] < 0) {
        level_[e.to] = level_[v] + 1;
        q.push(e.to);
      }
    }
  }
  return level_[t] >= 0;
}

Packets MaxFlow::dfs(std::size_t v, std::size_t t, Packets pushed) {
  if (v == t) return pushed;
  for (; it_[v] < adj_[v].size(); ++it_[v]) {
    const std::size_t id = adj_[v][it_[v]];
    Edge& e = edges_[id];
    if (e.cap <= 0 || level_[e.to] != level_[v] + 1) continue;
    const Packets got = dfs(e.to, t, std::min(pushed, e.cap));
    if (got > 0) {
      e.cap -= got;
      edges_[id ^ 1].cap += got;
      return got;
    }
  }
  return 0;
}

Packets MaxFlow::run(std::size_t source, std::size_t sink) {
  Packets total = 0;
  while (bfs(source, sink)) {
    std::fill(it_.begin(), it_.end(), 0);
    while (Packets f = dfs(source, sink, std::numeric_limits<Packets>::max())) total += f;
  }
  return total;
}

Packets MaxFlow::flow_on(std::size_t edge) const { return edges_[edge].original - edges_[edge].cap; }

std::optional<PackResult> flow_pack(const CapacityGrid& cap, const std::vector<PackJob>& jobs) {
  const std::size_t slots = cap.size();
  const std::size_t pools = slots ? cap[0].size() : 0;
  // Nodes: source, sink, jobs, (job, slot) gates, (slot, pool) cells.
  std::size_t n = 2 + jobs.size();
  std::vector<std::size_t> gate_base(jobs.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    gate_base[j] = n;
    n += static_cast<std::size_t>(std::max<SlotIndex>(0, jobs[j].hi - jobs[j].lo + 1));
  }
  const std::size_t cell_base = n;
  n += slots * pools;
  MaxFlow g(n);
  const std::size_t S = 0, T = 1;
  Packets demand = 0;
  for (std::size_t t = 0; t < slots; ++t) {
    for (std::size_t p = 0; p < pools; ++p) {
      if (cap[t][p] > 0) g.add_edge(cell_base + t * pools + p, T, cap[t][p]);
    }
  }
  struct Link {
    std::size_t job;
    SlotIndex slot;
    int pool;
    std::size_t edge;
  };
  std::vector<Link> links;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const PackJob& job = jobs[j];
    demand += job.demand;
    g.add_edge(S, 2 + j, job.demand);
    for (SlotIndex t = std::max<SlotIndex>(job.lo, 0); t <= job.hi && t < static_cast<SlotIndex>(slots); ++t) {
      const std::size_t gate = gate_base[j] + static_cast<std::size_t>(t - job.lo);
      g.add_edge(2 + j, gate, job.per_slot);
      auto link = [&](int p) {
        if (cap[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] <= 0) return;
        links.push_back({j, t, p, g.add_edge(gate, cell_base + static_cast<std::size_t>(t) * pools + static_cast<std::size_t>(p), job.demand)});
      };
      for (int p : job.pools) link(p);
      for (int p : job.fallback_pools) link(p);
    }
  }
  if (g.run(S, T) < demand) return std::nullopt;
  PackResult out(jobs.size());
  for (const Link& l : links) {
    if (Packets f = g.flow_on(l.edge); f > 0) out[l.job].push_back({l.slot, l.pool, f});
  }
  for (auto& cells : out) {
    std::sort(cells.begin(), cells.end(),
              [](const PackCell& a, const PackCell& b) { return std::tie(a.slot, a.pool) < std::tie(b.slot, b.pool); });
  }
  return out;
}

}  // namespace sden

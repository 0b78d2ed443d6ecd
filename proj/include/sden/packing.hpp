#pragma once

// Packing of flexible jobs into per-slot, per-pool capacities. Slots are
// window-relative (0 = first slot of the capacity grid).

#include <cstdint>
#include <optional>
#include <vector>

#include "sden/core.hpp"

namespace sden {

/// cap[slot][pool]
using CapacityGrid = std::vector<std::vector<Packets>>;

struct PackJob {
  Packets demand = 0;
  SlotIndex lo = 0;  // inclusive
  SlotIndex hi = 0;  // inclusive
  Packets per_slot = 0;            // most packets per slot
  std::vector<int> pools;          // allowed pools in preference order
  std::vector<int> fallback_pools; // used only in the second EDF pass (storage)
};

struct PackCell {
  SlotIndex slot = 0;
  int pool = 0;
  Packets count = 0;
};

using PackResult = std::vector<std::vector<PackCell>>;  // per job

/// Two-pass EDF, as soon as possible: jobs (already in priority order) take
/// their preferred pools slot by slot; whatever is left then goes to the
/// fallback pools. Consumes `cap`. nullopt if any job is left short.
std::optional<PackResult> edf_pack(CapacityGrid& cap, const std::vector<PackJob>& jobs);

/// Largest packet count (≤ demand) the job could take from `cap` alone.
Packets max_insertable(const CapacityGrid& cap, const PackJob& job);

/// Exact feasibility by max-flow (Dinic). nullopt iff no packing exists.
std::optional<PackResult> flow_pack(const CapacityGrid& cap, const std::vector<PackJob>& jobs);

/// Dinic max-flow on an explicit graph; exposed for tests.
class MaxFlow {
public:
  explicit MaxFlow(std::size_t nodes);
  /// Returns the edge index (usable with flow_on).
  std::size_t add_edge(std::size_t from, std::size_t to, Packets capacity);
  Packets run(std::size_t source, std::size_t sink);
  Packets flow_on(std::size_t edge) const;

private:
  struct Edge {
    std::size_t to;
    Packets cap;
    Packets original;
  };
  bool bfs(std::size_t s, std::size_t t);
  Packets dfs(std::size_t v, std::size_t t, Packets pushed);

  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<int> level_;
  std::vector<std::size_t> it_;
};

}  // namespace sden

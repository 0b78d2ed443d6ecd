#pragma once

// Slot-synchronous orchestration of clients, routers, the energy server,
// storage and the source. Per slot: loads -> routers -> transport -> server
// pipeline -> physical dispatch -> notices/acks -> record.

#include <optional>
#include <string>
#include <vector>

#include "sden/config.hpp"
#include "sden/core.hpp"
#include "sden/protocol.hpp"

namespace sden {

/// Realized physical flows of one slot (central pool plus household-local pools).
struct DispatchRecord {
  SlotIndex slot = 0;
  Packets gen_forecast = 0;
  Packets gen_actual = 0;
  Packets baseload = 0;
  Packets baseload_served = 0;
  Packets baseload_unserved = 0;
  std::vector<Packets> class_alloc;  // delivered per class, pinned blocks included
  Packets locked = 0;                // delivered by running Contiguous blocks
  Packets delivered = 0;             // all central flexible deliveries
  Packets extras = 0;                // pull-forward part of `delivered`
  Packets cut = 0;                   // planned but not deliverable
  Packets charge = 0;                // drawn from the source into storage
  Packets stored = 0;                // entered the store after efficiency
  Packets discharge = 0;
  Packets soc = 0;                   // total after the slot
  Packets spill = 0;
  Packets local_gen = 0;
  Packets local_served = 0;
  Packets local_spill = 0;
};

/// Slice accounting of one slot (the data behind a stacked slice chart).
struct SliceRecord {
  SlotIndex slot = 0;
  Packets capacity = 0;         // max(0, forecast gen − baseload)
  Packets capacity_actual = 0;  // max(0, actual gen − baseload)
  Packets capacity_total = 0;   // sliced part (capacity − pinned blocks)
  Packets locked = 0;
  Packets locked_capacity = 0;
  Packets locked_from_storage = 0;
  Packets storage_extension = 0;
  std::vector<Packets> slice;
  std::vector<Packets> own;
  std::vector<Packets> borrowed_slices;
  std::vector<Packets> borrowed_storage;
  std::vector<Packets> allocated;  // delivered, pinned blocks excluded
  Packets delivered = 0;
  Packets discharge = 0;
};

struct SimEvent {
  SlotIndex slot = 0;
  std::string kind;
  RequestId request_id;
  AgentId agent;
  std::string detail;
};

struct KpiSet {
  std::size_t requests = 0;
  std::size_t accepts = 0;
  std::size_t rejects = 0;
  double acceptance_rate = 1.0;
  double rejection_rate = 0.0;
  bool no_demand = false;
  std::size_t emergency_count = 0;
  std::size_t deadline_miss_count = 0;
  Packets delivered_packets = 0;
  Packets late_packets = 0;
  Packets unserved_packets = 0;
  Packets baseload_unserved = 0;
  Packets spill_packets = 0;
  double storage_cycles = 0.0;
  double mean_request_latency_slots = 0.0;
  std::vector<double> class_utilization;

  bool operator==(const KpiSet&) const = default;
};

struct SimResult {
  std::string scenario;
  int num_classes = 2;
  std::vector<Packets> storage_capacity;  // 0 for disabled units
  Packets initial_soc = 0;
  std::vector<TraceRecord> trace;
  Schedule schedule;
  std::vector<DispatchRecord> dispatch;
  std::vector<SliceRecord> slices;
  std::vector<SimEvent> events;
  KpiSet kpis;
};

/// Aborts with this when an internal invariant breaks (CLI exit code 1).
class InvariantError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

SimResult run(const ScenarioConfig& config);

/// Pure recomputation from the trace, schedule and per-slot records.
KpiSet compute_kpis(const SimResult& result);

struct ReplayReport {
  bool identical = true;
  std::optional<SlotIndex> first_divergence;
  std::string detail;
};

/// Re-runs `config` and compares the trace line by line.
ReplayReport replay_check(const SimResult& result, const ScenarioConfig& config);

/// Every requested packet of the run, keyed by request id, as carried in the trace.
std::map<RequestId, ServiceRequest> requests_in_trace(const std::vector<TraceRecord>& trace);

/// Checks conservation, SoC, slice soundness, windows and shapes over a finished run.
/// Returns human-readable violations (empty = all hold).
std::vector<std::string> check_invariants(const SimResult& result);

}  // namespace sden

#pragma once

// The energy server: a rolling-horizon inventory manager that admits,
// classifies, slices and allocates energy packets against forecast generation
// and storage.
//
// Capacity model for one slot t of the planning window:
//
//   gen_cap[t]        = max(0, forecast_gen[t] - baseload[t])
//   locked[t]         = packets of pinned Contiguous blocks occupying t
//   capacity_total[t] = max(0, gen_cap[t] - locked[t])            (sliced)
//   extension[t]      = storage discharge available after baseload deficits,
//                       minus any locked packets gen_cap could not cover
//
// Slices split capacity_total per priority class; storage extension is a
// separate pool. Flexible (Arbitrary / PerSlotCap) commitments are
// counts-by-deadline backed by a feasible witness plan that is re-packed every
// slot; Contiguous blocks are pinned when admitted.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sden/core.hpp"
#include "sden/packing.hpp"
#include "sden/protocol.hpp"
#include "sden/resources.hpp"

namespace sden {

// ---------------------------------------------------------------------------
// Classification

struct ClassificationPolicy {
  int num_classes = 2;
  /// Ascending; class = 1 + number of thresholds strictly below the slack.
  std::vector<SlotIndex> slack_thresholds{6};

  void validate() const;
};

/// slack = (deadline − now) − minimum slots the shape needs.
SlotIndex request_slack(const ServiceRequest& req, SlotIndex now);

/// Emergency → 1; otherwise the slack bucket, demoted (never promoted) by priority_hint.
PriorityClass classify(const ServiceRequest& req, SlotIndex now, const ClassificationPolicy& policy);

// ---------------------------------------------------------------------------
// Availability and slicing

/// Snapshot of the server's inventory over a window starting at first_slot.
struct InventoryForecast {
  SlotIndex first_slot = 0;
  std::vector<Packets> generation;         // forecast, packets per slot
  std::vector<Packets> baseload;
  std::vector<Packets> committed;          // packets of accepted flexible requests planned per slot
  std::vector<Packets> locked_contiguous;  // pinned Contiguous packets per slot
  std::vector<StorageState> storage;

  SlotRange window() const { return {first_slot, first_slot + static_cast<SlotIndex>(generation.size())}; }
};

/// capacity_total[t] = max(0, gen[t] − baseload[t] − locked_contiguous[t]) over `window`.
std::vector<Packets> compute_availability(const InventoryForecast& forecast, SlotRange window);

/// Throws ConfigError unless the shares are non-negative and sum to exactly 1.
void validate_shares(std::span<const Fraction> shares);

/// floor(share_c · capacity) per class with the flooring leftover given to class 1.
std::vector<Packets> split_capacity(Packets capacity, std::span<const Fraction> shares);

/// Discharge the storage units can add in each of `slots` consecutive slots.
/// Discharge for `deficits` (baseload not covered by generation) is reserved
/// first; the rest is front-loaded so every stored packet extends exactly one slot.
std::vector<Packets> storage_extension(std::span<const StorageState> units, std::span<const Packets> deficits,
                                       std::size_t slots);

struct StorageProjection {
  std::vector<Packets> extension;
  /// Per slot, packets of `must_cover` the storage could not reserve.
  std::vector<Packets> must_cover_short;
};

/// storage_extension with a second deficit stream (`must_cover`, e.g. locked
/// blocks generation cannot carry) reserved right after the baseload deficit.
StorageProjection project_storage(std::span<const StorageState> units, std::span<const Packets> deficits,
                                  std::span<const Packets> must_cover, std::size_t slots);

struct SlicePlan {
  SlotIndex first_slot = 0;
  std::vector<Packets> capacity_total;
  std::vector<std::vector<Packets>> per_class;  // [slot][class − 1]
  std::vector<Packets> storage_extension;

  std::size_t slots() const { return capacity_total.size(); }
};

SlicePlan plan_slices(std::span<const Packets> capacity_total, std::span<const Fraction> shares,
                      std::span<const StorageState> storage, std::span<const Packets> deficits = {},
                      SlotIndex first_slot = 0);

// ---------------------------------------------------------------------------
// Storage dispatch

/// Greedy per-slot storage policy: charge surplus (capacity − allocated) up to
/// rate and headroom, discharge deficits up to rate and SoC. Units are used in
/// order. Returns actions[slot][unit].
std::vector<std::vector<Packets>> plan_storage(std::span<const Packets> capacity_total,
                                               std::span<const Packets> allocated,
                                               std::vector<StorageState> storage);

// ---------------------------------------------------------------------------
// Single-slot allocation

enum class OrderingRule { EarliestDeadline, FirstCome };

std::optional<OrderingRule> parse_ordering_rule(std::string_view text);

/// Capacity of one slot as seen by the allocator.
struct SlotSlices {
  SlotIndex slot = 0;
  Packets locked_capacity = 0;      // reserved for running Contiguous blocks
  std::vector<Packets> per_class;   // class slices
  Packets storage_extension = 0;
};

struct PendingDemand {
  RequestId request_id;
  PriorityClass cls = 1;
  bool emergency = false;
  bool locked = false;  // running Contiguous block
  SlotIndex deadline = 0;
  SlotIndex submission = 0;
  Packets want = 0;     // most packets this request can take in the slot
};

struct ClassUsage {
  Packets own = 0;               // from the class's own slice
  Packets borrowed_slices = 0;   // from other classes' unused slices
  Packets borrowed_storage = 0;  // from storage extension
  Packets total() const { return own + borrowed_slices + borrowed_storage; }
};

struct SlotAllocation {
  SlotIndex slot = 0;
  std::vector<Assignment> assignments;  // in fill order
  std::vector<ClassUsage> per_class;
  Packets locked = 0;
  Packets locked_from_storage = 0;
  Packets unplaced = 0;  // demand that found no capacity
  std::vector<Packets> slice_left;  // unused slice capacity per class after the fill
  Packets storage_left = 0;

  Packets delivered() const;
  Packets storage_used() const;
};

/// Fills one slot: running Contiguous blocks first, then every class its own
/// slice in rule order (emergencies first within a class), then overflow
/// borrows other classes' unused slices (class 1 first) and finally storage.
SlotAllocation allocate(const SlotSlices& slices, std::span<const PendingDemand> pending,
                        OrderingRule rule = OrderingRule::EarliestDeadline);

// ---------------------------------------------------------------------------
// Inventory and admission

struct ServerPolicy {
  ClassificationPolicy classes;
  std::vector<Fraction> shares{Fraction{1, 2}, Fraction{1, 2}};
  OrderingRule rule = OrderingRule::EarliestDeadline;
  SlotIndex lookahead = 144;
  int emergency_budget_per_day = 1;
  SlotIndex slots_per_day = 144;
  std::size_t flow_job_limit = 256;

  void validate() const;
};

enum class Verdict { Accept, Reject };

struct AdmissionDecision {
  Verdict verdict = Verdict::Reject;
  PriorityClass assigned_class = 1;
  RejectHint hint;
  std::string reason;
  bool demoted_emergency = false;

  bool accepted() const { return verdict == Verdict::Accept; }
};

/// Where one flexible job's packets sit in the witness plan.
struct Placement {
  SlotIndex slot = 0;
  int pool = 0;  // 0..num_classes−1 = class slices, num_classes = storage
  Packets count = 0;
};

struct Job {
  ServiceRequest request;
  PriorityClass cls = 1;
  bool emergency = false;
  Packets remaining = 0;
  /// Contiguous only: slot of the next due packet.
  std::optional<SlotIndex> next_slot;
  bool started = false;
  bool late = false;
  std::uint64_t seq = 0;

  bool contiguous() const { return request.shape.kind == ShapeKind::Contiguous; }
  /// Contiguous only: does the pinned block occupy slot t?
  bool occupies(SlotIndex t) const {
    return next_slot && t >= *next_slot && t < *next_slot + remaining;
  }
};

enum class EventKind { DeadlineBreach, ContiguityBreak, EmergencyDemoted, PlanFallback };

std::string_view to_string(EventKind kind);

struct ServerEvent {
  SlotIndex slot = 0;
  EventKind kind = EventKind::DeadlineBreach;
  RequestId request_id;
  AgentId client_id;
  std::string detail;
};

/// Per-slot output of the allocation stage.
struct SlotPlanOutcome {
  SlotIndex slot = 0;
  SlotSlices slices;
  Packets capacity_total = 0;
  Packets gen_capacity = 0;
  SlotAllocation allocation;         // mandatory + pull-forward, attributed
  std::map<RequestId, Packets> planned;  // total per request (mandatory + extra)
  std::map<RequestId, Packets> extras;   // pull-forward part of `planned`
};

/// The server's rolling inventory: forecast, storage view, accepted jobs and
/// the witness plan. All slot arguments are absolute.
class Inventory {
public:
  Inventory(ServerPolicy policy, std::vector<Packets> forecast_generation, std::vector<Packets> baseload);

  const ServerPolicy& policy() const { return policy_; }
  SlotIndex now() const { return now_; }
  SlotIndex run_end() const { return static_cast<SlotIndex>(generation_.size()); }
  /// Planning window [now, min(now + lookahead, run_end)).
  SlotRange window() const { return {now_, window_end_}; }
  int num_classes() const { return policy_.classes.num_classes; }
  int storage_pool() const { return num_classes(); }

  /// Moves the window to `now` with a fresh storage view; re-derives capacities
  /// and re-packs the witness plan (keeping the old one if the re-pack fails).
  /// Returns PlanFallback events when neither fits.
  std::vector<ServerEvent> begin_slot(SlotIndex now, std::span<const StorageState> storage);

  /// Feasibility test + commit. `force_class` overrides classification.
  AdmissionDecision admit(const ServiceRequest& req, std::optional<PriorityClass> force_class = std::nullopt,
                          bool emergency_pools = false);
  /// Feasibility test without commit.
  bool fits(const ServiceRequest& req, PriorityClass cls, bool emergency_pools) const;

  /// Computes the current slot's deliveries (mandatory plan packets plus pull-forward).
  SlotPlanOutcome plan_current_slot();

  /// Applies realized deliveries for the current slot; returns breach events.
  /// Completed jobs are dropped.
  std::vector<ServerEvent> record_delivery(const std::map<RequestId, Packets>& delivered);

  const std::map<RequestId, Job>& jobs() const { return jobs_; }
  const Job* job(const RequestId& id) const;
  InventoryForecast forecast_view() const;
  /// Witness plan for one flexible job.
  std::vector<Placement> plan_of(const RequestId& id) const;
  bool plan_valid() const { return plan_valid_; }

  /// Test/diagnostic accessors over the current window (index 0 = now).
  const CapacityGrid& pool_capacity() const { return caps_; }
  const CapacityGrid& pool_usage() const { return usage_; }
  const std::vector<Packets>& gen_capacity() const { return gen_cap_; }
  const std::vector<Packets>& locked_profile_now() const { return locked_; }
  /// False when pinned blocks could not all be covered at the last begin_slot.
  bool pins_ok() const { return pins_ok_; }

private:
  struct Pools {
    std::vector<Packets> gen_cap, locked, locked_from_storage;
    CapacityGrid cap;  // [slot − now][pool]
    bool ok = true;
  };
  struct Book {
    std::map<RequestId, std::vector<Placement>> plan;
    CapacityGrid usage;
  };
  struct Commit {
    Book book;
    Pools pools;
    std::optional<SlotIndex> pin;
  };

  std::vector<Packets> locked_profile(const Job* extra = nullptr) const;
  Pools pools_for(const std::vector<Packets>& locked) const;
  PackJob pack_job(const Job& job) const;
  std::vector<const Job*> flexible_jobs() const;
  std::optional<Book> repack(const Pools& pools, std::vector<const Job*> affected, bool allow_flow) const;
  std::optional<Commit> evaluate(const Job& candidate) const;
  RejectHint hint_for(const Job& candidate) const;
  CapacityGrid usage_of(const std::map<RequestId, std::vector<Placement>>& plan) const;
  static bool within(const CapacityGrid& usage, const CapacityGrid& cap);
  void set_pools(Pools pools);
  Job make_job(const ServiceRequest& req, PriorityClass cls, bool emergency) const;

  ServerPolicy policy_;
  std::vector<Packets> generation_;
  std::vector<Packets> baseload_;
  std::vector<StorageState> storage_;
  SlotIndex now_ = 0;
  SlotIndex window_end_ = 0;
  std::uint64_t next_seq_ = 0;
  std::map<RequestId, Job> jobs_;
  std::map<RequestId, std::vector<Placement>> plan_;
  CapacityGrid caps_;
  CapacityGrid usage_;
  std::vector<Packets> gen_cap_;
  std::vector<Packets> locked_;
  std::vector<Packets> locked_from_storage_;
  bool pins_ok_ = true;
  bool plan_valid_ = true;
};

/// Admission of an ordinary request: class-aware feasibility check, commit on Accept.
AdmissionDecision admit(const ServiceRequest& req, Inventory& inventory, SlotIndex now);

/// Per-client emergency budget per day.
class EmergencyLedger {
public:
  explicit EmergencyLedger(int budget_per_day = 1, SlotIndex slots_per_day = 144)
      : budget_(budget_per_day), slots_per_day_(slots_per_day) {}
  bool within_budget(const AgentId& client, SlotIndex now) const;
  void record(const AgentId& client, SlotIndex now);
  int used(const AgentId& client, SlotIndex now) const;

private:
  int budget_;
  SlotIndex slots_per_day_;
  std::map<std::pair<AgentId, SlotIndex>, int> used_;
};

/// Emergency admission: forced to class 1 and checked against every slice plus
/// storage. Over-budget emergencies are processed as ordinary requests and the
/// decision is flagged `demoted_emergency`.
AdmissionDecision handle_emergency(const ServiceRequest& req, Inventory& inventory, EmergencyLedger& ledger,
                                   SlotIndex now);

}  // namespace sden

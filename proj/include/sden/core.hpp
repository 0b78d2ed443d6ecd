#pragma once

// Energy-packet primitives shared by every agent: the packet quantum, slot
// arithmetic, service requests and the committed delivery schedule.
//
// All quantities that describe energy are counted in whole packets. Rounding
// happens exactly once, when a continuous energy amount is packetized.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sden {

using SlotIndex = std::int64_t;
using Packets = std::int64_t;
using AgentId = std::string;
using RequestId = std::string;

/// Invalid scenario or policy configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Priority class, 1 = highest.
using PriorityClass = int;

/// Half-open slot range [begin, end).
struct SlotRange {
  SlotIndex begin = 0;
  SlotIndex end = 0;

  SlotIndex size() const { return end > begin ? end - begin : 0; }
  bool empty() const { return end <= begin; }
  bool contains(SlotIndex t) const { return t >= begin && t < end; }
};

struct PacketSpec {
  double size_wh = 10.0;
  std::int64_t slot_minutes = 10;

  /// Throws std::invalid_argument unless both fields are positive.
  void validate() const;
  double slot_hours() const { return static_cast<double>(slot_minutes) / 60.0; }
  /// Number of slots in one day (1440 / slot_minutes, rounded down, at least 1).
  SlotIndex slots_per_day() const;
};

/// ceil(amount_wh / size_wh); 0 iff amount_wh == 0.
Packets packetize_energy(double amount_wh, const PacketSpec& spec);

/// 60·hours / slot_minutes; throws std::invalid_argument if not integral.
SlotIndex slots_in_horizon(double hours, const PacketSpec& spec);

enum class ShapeKind { Contiguous, Arbitrary, PerSlotCap };

struct ShapeConstraint {
  ShapeKind kind = ShapeKind::Arbitrary;
  Packets per_slot_cap = 0;  // only meaningful for PerSlotCap

  static ShapeConstraint contiguous() { return {ShapeKind::Contiguous, 1}; }
  static ShapeConstraint arbitrary() { return {ShapeKind::Arbitrary, 0}; }
  static ShapeConstraint capped(Packets m) { return {ShapeKind::PerSlotCap, m}; }

  /// Most packets deliverable in one slot given `remaining` undelivered.
  Packets slot_limit(Packets remaining) const;
  /// Fewest slots in which `packets` can be delivered.
  SlotIndex min_slots(Packets packets) const;

  bool operator==(const ShapeConstraint&) const = default;
};

std::string_view to_string(ShapeKind kind);
std::optional<ShapeKind> parse_shape_kind(std::string_view text);

struct ServiceRequest {
  RequestId request_id;
  AgentId client_id;
  Packets packets = 0;
  SlotIndex earliest_slot = 0;
  SlotIndex deadline_slot = 0;  // inclusive
  ShapeConstraint shape;
  std::optional<PriorityClass> priority_hint;
  bool is_emergency = false;
  SlotIndex submission_slot = 0;

  SlotIndex window_length() const { return deadline_slot - earliest_slot + 1; }
  bool operator==(const ServiceRequest&) const = default;
};

enum class RequestRejection {
  ZeroPackets,
  InvalidShape,
  WindowInverted,
  ContiguousWindowTooShort,
  CapacityWindowTooShort,
  WindowInPast,
};

std::string_view to_string(RequestRejection reason);

/// Returns the first violated request rule, or nullopt when the request is valid at `now`.
std::optional<RequestRejection> validate_request(const ServiceRequest& req, SlotIndex now);

struct Assignment {
  RequestId request_id;
  Packets packets = 0;

  bool operator==(const Assignment&) const = default;
};

/// Committed deliveries and storage flows over a slot range.
/// storage_actions[i][u] is the signed packet flow of unit u in slot range.begin + i
/// (positive = charge).
class Schedule {
public:
  Schedule() = default;
  Schedule(SlotRange horizon, std::size_t storage_units);

  const SlotRange& horizon() const { return horizon_; }
  std::size_t storage_units() const { return storage_units_; }

  void assign(SlotIndex slot, const RequestId& id, Packets packets);
  void set_storage_action(SlotIndex slot, std::size_t unit, Packets flow);

  std::span<const Assignment> assignments(SlotIndex slot) const;
  std::span<const Packets> storage_actions(SlotIndex slot) const;
  Packets assigned_total(SlotIndex slot) const;
  Packets delivered_to(const RequestId& id) const;

  bool operator==(const Schedule&) const = default;

private:
  std::size_t offset(SlotIndex slot) const;

  SlotRange horizon_;
  std::size_t storage_units_ = 0;
  std::vector<std::vector<Assignment>> assignments_;
  std::vector<std::vector<Packets>> storage_;
};

struct ScheduleViolation {
  enum class Kind { OverAvailability, OutsideWindow, UnknownRequest } kind;
  SlotIndex slot = 0;
  RequestId request_id;  // empty for OverAvailability
};

/// Pure check of the schedule invariants against per-slot availability
/// (indexed from horizon().begin) and the requests it serves.
std::vector<ScheduleViolation> check_schedule(const Schedule& schedule,
                                              std::span<const Packets> availability,
                                              const std::map<RequestId, ServiceRequest>& requests);

}  // namespace sden

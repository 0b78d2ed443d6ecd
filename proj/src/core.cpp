#include "sden/core.hpp"

#include <algorithm>
#include <cmath>

namespace sden {

void PacketSpec::validate() const {
  if (!(size_wh > 0.0) || !std::isfinite(size_wh)) {
    throw std::invalid_argument("packet size_wh must be positive");
  }
  if (slot_minutes <= 0) {
    throw std::invalid_argument("packet slot_minutes must be positive");
  }
}

SlotIndex PacketSpec::slots_per_day() const {
  return std::max<SlotIndex>(1, 1440 / slot_minutes);
}

Packets packetize_energy(double amount_wh, const PacketSpec& spec) {
  spec.validate();
  if (amount_wh < 0.0 || !std::isfinite(amount_wh)) {
    throw std::invalid_argument("energy amount must be non-negative");
  }
  if (amount_wh == 0.0) return 0;
  const double quotient = amount_wh / spec.size_wh;
  // Absorb binary representation noise so exact multiples do not round up.
  const double nearest = std::round(quotient);
  if (std::abs(quotient - nearest) <= 1e-9 * std::max(1.0, quotient)) {
    return std::max<Packets>(1, static_cast<Packets>(nearest));
  }
  return static_cast<Packets>(std::ceil(quotient));
}

SlotIndex slots_in_horizon(double hours, const PacketSpec& spec) {
  spec.validate();
  if (!(hours > 0.0)) throw std::invalid_argument("horizon must be positive");
  const double minutes = hours * 60.0;
  const double whole = std::round(minutes);
  if (std::abs(minutes - whole) > 1e-9) {
    throw std::invalid_argument("horizon is not a whole number of minutes");
  }
  const auto total = static_cast<std::int64_t>(whole);
  if (total % spec.slot_minutes != 0) {
    throw std::invalid_argument("horizon is not divisible by the slot length");
  }
  return total / spec.slot_minutes;
}

Packets ShapeConstraint::slot_limit(Packets remaining) const {
  switch (kind) {
    case ShapeKind::Contiguous: return std::min<Packets>(1, remaining);
    case ShapeKind::PerSlotCap: return std::min(per_slot_cap, remaining);
    case ShapeKind::Arbitrary: break;
  }
  return remaining;
}

SlotIndex ShapeConstraint::min_slots(Packets packets) const {
  if (packets <= 0) return 0;
  switch (kind) {
    case ShapeKind::Contiguous: return packets;
    case ShapeKind::PerSlotCap:
      return per_slot_cap > 0 ? (packets + per_slot_cap - 1) / per_slot_cap : packets;
    case ShapeKind::Arbitrary: break;
  }
  return 1;
}

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Contiguous: return "Contiguous";
    case ShapeKind::Arbitrary: return "Arbitrary";
    case ShapeKind::PerSlotCap: return "PerSlotCap";
  }
  return "?";
}

std::optional<ShapeKind> parse_shape_kind(std::string_view text) {
  if (text == "Contiguous") return ShapeKind::Contiguous;
  if (text == "Arbitrary") return ShapeKind::Arbitrary;
  if (text == "PerSlotCap") return ShapeKind::PerSlotCap;
  return std::nullopt;
}

std::string_view to_string(RequestRejection reason) {
  switch (reason) {
    case RequestRejection::ZeroPackets: return "ZeroPackets";
    case RequestRejection::InvalidShape: return "InvalidShape";
    case RequestRejection::WindowInverted: return "WindowInverted";
    case RequestRejection::ContiguousWindowTooShort: return "ContiguousWindowTooShort";
    case RequestRejection::CapacityWindowTooShort: return "CapacityWindowTooShort";
    case RequestRejection::WindowInPast: return "WindowInPast";
  }
  return "?";
}

std::optional<RequestRejection> validate_request(const ServiceRequest& req, SlotIndex now) {
  if (req.packets < 1) return RequestRejection::ZeroPackets;
  if (req.shape.kind == ShapeKind::PerSlotCap && req.shape.per_slot_cap < 1) {
    return RequestRejection::InvalidShape;
  }
  if (req.earliest_slot > req.deadline_slot) return RequestRejection::WindowInverted;
  if (req.shape.kind == ShapeKind::Contiguous && req.window_length() < req.packets) {
    return RequestRejection::ContiguousWindowTooShort;
  }
  if (req.shape.kind == ShapeKind::PerSlotCap && req.shape.per_slot_cap * req.window_length() < req.packets) {
    return RequestRejection::CapacityWindowTooShort;
  }
  if (req.earliest_slot < now) return RequestRejection::WindowInPast;
  return std::nullopt;
}

Schedule::Schedule(SlotRange horizon, std::size_t storage_units)
    : horizon_(horizon),
      storage_units_(storage_units),
      assignments_(static_cast<std::size_t>(horizon.size())),
      storage_(static_cast<std::size_t>(horizon.size()), std::vector<Packets>(storage_units, 0)) {}

std::size_t Schedule::offset(SlotIndex slot) const {
  if (!horizon_.contains(slot)) throw std::out_of_range("slot outside schedule horizon");
  return static_cast<std::size_t>(slot - horizon_.begin);
}

void Schedule::assign(SlotIndex slot, const RequestId& id, Packets packets) {
  if (packets <= 0) return;
  auto& row = assignments_[offset(slot)];
  for (auto& a : row) {
    if (a.request_id == id) {
      a.packets += packets;
      return;
    }
  }
  row.push_back({id, packets});
}

void Schedule::set_storage_action(SlotIndex slot, std::size_t unit, Packets flow) {
  storage_[offset(slot)].at(unit) = flow;
}

std::span<const Assignment> Schedule::assignments(SlotIndex slot) const {
  return assignments_[offset(slot)];
}

std::span<const Packets> Schedule::storage_actions(SlotIndex slot) const {
  return storage_[offset(slot)];
}

Packets Schedule::assigned_total(SlotIndex slot) const {
  Packets total = 0;
  for (const auto& a : assignments(slot)) total += a.packets;
  return total;
}

Packets Schedule::delivered_to(const RequestId& id) const {
  Packets total = 0;
  for (const auto& row : assignments_) {
    for (const auto& a : row) {
      if (a.request_id == id) total += a.packets;
    }
  }
  return total;
}

std::vector<ScheduleViolation> check_schedule(const Schedule& schedule,
                                              std::span<const Packets> availability,
                                              const std::map<RequestId, ServiceRequest>& requests) {
  std::vector<ScheduleViolation> out;
  const auto& h = schedule.horizon();
  for (SlotIndex t = h.begin; t < h.end; ++t) {
    const auto i = static_cast<std::size_t>(t - h.begin);
    const Packets cap = i < availability.size() ? availability[i] : 0;
    if (schedule.assigned_total(t) > cap) {
      out.push_back({ScheduleViolation::Kind::OverAvailability, t, {}});
    }
    for (const auto& a : schedule.assignments(t)) {
      auto it = requests.find(a.request_id);
      if (it == requests.end()) {
        out.push_back({ScheduleViolation::Kind::UnknownRequest, t, a.request_id});
      } else if (t < it->second.earliest_slot || t > it->second.deadline_slot) {
        out.push_back({ScheduleViolation::Kind::OutsideWindow, t, a.request_id});
      }
    }
  }
  return out;
}

}  // namespace sden

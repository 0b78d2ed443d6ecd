#include "sden/loads.hpp"

#include <cmath>

namespace sden {

ServiceRequest washing_machine_request(const WashingMachineProgram& prog, const PacketSpec& spec) {
  spec.validate();
  ServiceRequest req;
  req.packets = prog.packets;
  req.earliest_slot = prog.earliest_start;
  req.deadline_slot = prog.ready_by_slot;
  req.shape = ShapeConstraint::contiguous();
  req.submission_slot = prog.earliest_start;
  if (auto bad = validate_request(req, req.earliest_slot)) {
    throw RequestRejected(*bad, "washing machine program: " + std::string(to_string(*bad)));
  }
  return req;
}

void ThermalState::validate() const {
  if (!(t_min_c < t_max_c)) throw std::invalid_argument("thermal band requires t_min < t_max");
  if (!(r_thermal > 0.0) || !(c_thermal > 0.0) || !(heater_w > 0.0)) {
    throw std::invalid_argument("thermal r, c and heater power must be positive");
  }
  if (unoccupied_relax_c < 0.0) throw std::invalid_argument("relaxation must be non-negative");
}

Packets ThermalState::max_packets_per_slot(const PacketSpec& spec) const {
  // Small epsilon so a rating that is an exact multiple of the packet is not lost to rounding.
  return static_cast<Packets>(std::floor(heater_w * spec.slot_hours() / spec.size_wh + 1e-9));
}

ThermalState thermal_step(const ThermalState& state, double outdoor_temp_c, Packets delivered_packets,
                          const PacketSpec& spec) {
  spec.validate();
  if (delivered_packets < 0) throw std::invalid_argument("delivered packets must be non-negative");
  if (delivered_packets > state.max_packets_per_slot(spec)) {
    throw std::invalid_argument("delivered energy exceeds heater rating");
  }
  const double dt_h = spec.slot_hours();
  ThermalState next = state;
  next.indoor_temp_c += dt_h / (state.r_thermal * state.c_thermal) * (outdoor_temp_c - state.indoor_temp_c) +
                        static_cast<double>(delivered_packets) * spec.size_wh / state.c_thermal;
  return next;
}

std::vector<ServiceRequest> heating_requests(const ThermalState& state,
                                             std::span<const double> forecast_outdoor,
                                             SlotIndex lookahead, const PacketSpec& spec, SlotIndex now,
                                             const std::map<SlotIndex, Packets>& planned) {
  state.validate();
  if (lookahead < 1) throw std::invalid_argument("lookahead must be >= 1");
  const Packets per_slot_max = state.max_packets_per_slot(spec);
  std::vector<ServiceRequest> out;
  ThermalState projected = state;
  double outdoor = forecast_outdoor.empty() ? state.indoor_temp_c : forecast_outdoor.front();
  for (SlotIndex i = 0; i < lookahead; ++i) {
    if (static_cast<std::size_t>(i) < forecast_outdoor.size()) outdoor = forecast_outdoor[static_cast<std::size_t>(i)];
    const SlotIndex slot = now + i;
    Packets assumed = 0;
    if (auto it = planned.find(slot); it != planned.end()) assumed = it->second;
    ThermalState next = thermal_step(projected, outdoor, std::min(assumed, per_slot_max), spec);
    if (next.indoor_temp_c < state.band_min() && assumed < per_slot_max) {
      ServiceRequest req;
      req.packets = 1;
      req.earliest_slot = now;
      req.deadline_slot = slot;
      req.shape = ShapeConstraint::arbitrary();
      req.submission_slot = now;
      out.push_back(req);
      next = thermal_step(projected, outdoor, assumed + 1, spec);
    }
    projected = next;
  }
  return out;
}

std::optional<ServiceRequest> ev_request(const EvSession& session, const PacketSpec& spec) {
  if (session.arrival_slot >= session.departure_slot) {
    throw RequestRejected(RequestRejection::WindowInverted, "EV departs before it arrives");
  }
  const Packets packets = packetize_energy(session.energy_needed_wh, spec);
  if (packets == 0) return std::nullopt;
  ServiceRequest req;
  req.packets = packets;
  req.earliest_slot = session.arrival_slot;
  req.deadline_slot = session.departure_slot - 1;
  req.shape = ShapeConstraint::capped(session.max_packets_per_slot);
  req.submission_slot = session.arrival_slot;
  if (auto bad = validate_request(req, req.earliest_slot)) {
    throw RequestRejected(*bad, "EV session: " + std::string(to_string(*bad)));
  }
  return req;
}

}  // namespace sden

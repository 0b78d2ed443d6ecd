#pragma once

// Flexible-load archetypes and how each turns its service need into packetized
// requests: a washing machine (non-interruptible block), space heating
// (comfort band with thermal inertia), and an EV (any distribution up to the
// charger rate). Uncontrollable baseload is a plain per-slot trace.

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "sden/core.hpp"

namespace sden {

/// Thrown when a load cannot express its need as a valid request.
class RequestRejected : public std::invalid_argument {
public:
  RequestRejected(RequestRejection reason, const std::string& what)
      : std::invalid_argument(what), reason_(reason) {}
  RequestRejection reason() const { return reason_; }

private:
  RequestRejection reason_;
};

struct WashingMachineProgram {
  Packets packets = 1;
  SlotIndex earliest_start = 0;
  SlotIndex ready_by_slot = 0;  // last slot of the window
};

/// Contiguous request covering [earliest_start, ready_by_slot].
ServiceRequest washing_machine_request(const WashingMachineProgram& prog, const PacketSpec& spec);

struct ThermalState {
  double indoor_temp_c = 20.0;
  double t_min_c = 19.0;
  double t_max_c = 23.0;
  double r_thermal = 1.0;  // °C per W
  double c_thermal = 10.0; // Wh per °C
  double heater_w = 60.0;
  bool occupied = true;
  /// Band widening applied on both sides while nobody is home.
  double unoccupied_relax_c = 3.0;

  void validate() const;
  double band_min() const { return occupied ? t_min_c : t_min_c - unoccupied_relax_c; }
  double band_max() const { return occupied ? t_max_c : t_max_c + unoccupied_relax_c; }
  /// Packets the heater can absorb in one slot.
  Packets max_packets_per_slot(const PacketSpec& spec) const;
};

/// One first-order RC step over a slot:
/// T += (Δt_h / (r·c)) · (T_out − T) + delivered·size_wh / c.
/// Throws std::invalid_argument if delivery exceeds the heater rating.
ThermalState thermal_step(const ThermalState& state, double outdoor_temp_c, Packets delivered_packets,
                          const PacketSpec& spec);

/// Projects the temperature over `lookahead` slots starting at `now`, assuming
/// each emitted request (and each entry of `planned`, keyed by absolute slot) is
/// delivered as late as possible. Each band violation yields one 1-packet
/// Arbitrary request whose deadline is the violating slot.
/// `forecast_outdoor[i]` is the outdoor temperature in slot now + i; the last
/// value is held if the forecast is shorter than the lookahead.
std::vector<ServiceRequest> heating_requests(const ThermalState& state,
                                             std::span<const double> forecast_outdoor,
                                             SlotIndex lookahead, const PacketSpec& spec, SlotIndex now,
                                             const std::map<SlotIndex, Packets>& planned = {});

struct EvSession {
  SlotIndex arrival_slot = 0;
  SlotIndex departure_slot = 1;  // exclusive
  double energy_needed_wh = 0.0;
  Packets max_packets_per_slot = 1;
};

/// PerSlotCap request over [arrival, departure − 1]; nullopt when no energy is
/// needed. Throws RequestRejected when the charger cannot deliver in time.
std::optional<ServiceRequest> ev_request(const EvSession& session, const PacketSpec& spec);

}  // namespace sden

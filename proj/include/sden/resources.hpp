#pragma once

// Physical-side models: the aggregated generation source (virtual power plant)
// and storage units.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sden/core.hpp"

namespace sden {

/// Exact non-negative fraction num/den, den > 0.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  /// Nearest fraction with denominator 10^9, reduced. Exact for decimal literals up to 9 places.
  static Fraction from_double(double value);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  /// floor(this · n)
  std::int64_t floor_times(std::int64_t n) const;
};

Fraction operator+(Fraction a, Fraction b);
bool operator==(Fraction a, Fraction b);

/// splitmix64 finalizer; used to derive independent streams from (seed, key).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key);

/// Portable uniform in [0,1) and standard normal deviates for a (seed, key) pair.
double seeded_uniform(std::uint64_t seed, std::uint64_t key);
double seeded_normal(std::uint64_t seed, std::uint64_t key);

enum class GenerationShape { Constant, SolarDiurnal, Trace };

struct ForecastErrorModel {
  bool enabled = false;
  double sigma = 0.0;
};

struct GenerationProfile {
  GenerationShape shape = GenerationShape::Constant;
  Packets peak_packets = 0;
  /// Daylight slots within a day, [sunrise_slot, sunset_slot).
  SlotIndex sunrise_slot = 36;
  SlotIndex sunset_slot = 120;
  SlotIndex slots_per_day = 144;
  std::vector<Packets> trace;  // Trace shape; slots past the end produce 0
  /// Constant grid import folded into the source; 0 keeps the microgrid in pure-sharing mode.
  Packets import_packets = 0;
  ForecastErrorModel error;
};

/// Deterministic per-slot forecast over `window`. The seed is accepted for
/// interface symmetry; all bundled shapes are seed-independent.
std::vector<Packets> forecast_generation(const GenerationProfile& profile, SlotRange window,
                                         std::uint64_t seed);

/// Realized generation: identity without an error model, otherwise
/// max(0, round-half-up(forecast · (1 + e))) with e ~ N(0, σ) fixed per (seed, slot).
/// `first_slot` is the absolute slot of forecast[0].
std::vector<Packets> realize_generation(std::span<const Packets> forecast,
                                        const ForecastErrorModel& error, std::uint64_t seed,
                                        SlotIndex first_slot = 0);

/// Reads "slot packets" rows (whitespace or comma separated, '#' comments,
/// optional header). Missing slots are 0.
std::vector<Packets> load_trace_file(const std::filesystem::path& path);

enum class StorageTier { Buffer, Cache };

struct StorageState {
  std::string id = "buffer";
  StorageTier tier = StorageTier::Buffer;
  Packets soc_packets = 0;
  Packets capacity_packets = 0;
  Packets charge_rate = 1;
  Packets discharge_rate = 1;
  Fraction eta{1, 1};
  /// Pending fractional stored energy, in units of 1/eta.den packets.
  std::int64_t remainder = 0;
  bool enabled = true;

  void validate() const;
  /// Packets that enter the store if `charged` packets are drawn from the grid now.
  Packets stored_for(Packets charged) const;
  /// Largest charge (≤ charge_rate) whose stored result fits the headroom.
  Packets max_charge() const;
  Packets max_discharge() const;
};

/// Applies a signed action (positive = charge). Throws std::invalid_argument on
/// rate, SoC, or headroom violations.
StorageState apply_storage_action(const StorageState& state, Packets action);

}  // namespace sden

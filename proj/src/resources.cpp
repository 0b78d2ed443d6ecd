#include "sden/resources.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace sden {

Fraction Fraction::from_double(double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument("fraction must be finite and non-negative");
  }
  constexpr std::int64_t kDen = 1'000'000'000;
  std::int64_t num = std::llround(value * static_cast<double>(kDen));
  const std::int64_t g = std::gcd(num, kDen);
  return {num / (g == 0 ? 1 : g), kDen / (g == 0 ? 1 : g)};
}

std::int64_t Fraction::floor_times(std::int64_t n) const {
  const __int128 prod = static_cast<__int128>(num) * n;
  __int128 q = prod / den;
  if (prod % den != 0 && prod < 0) --q;
  return static_cast<std::int64_t>(q);
}

Fraction operator+(Fraction a, Fraction b) {
  const std::int64_t den = std::lcm(a.den, b.den);
  Fraction r{a.num * (den / a.den) + b.num * (den / b.den), den};
  const std::int64_t g = std::gcd(r.num, r.den);
  if (g > 1) {
    r.num /= g;
    r.den /= g;
  }
  return r;
}

bool operator==(Fraction a, Fraction b) {
  return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (key + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double seeded_uniform(std::uint64_t seed, std::uint64_t key) {
  std::mt19937_64 rng(mix_seed(seed, key));
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double seeded_normal(std::uint64_t seed, std::uint64_t key) {
  // Box-Muller on the engine's raw output; std::normal_distribution is not
  // reproducible across standard libraries.
  std::mt19937_64 rng(mix_seed(seed, key));
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

Packets round_half_up(double x) { return static_cast<Packets>(std::floor(x + 0.5)); }

Packets solar_at(const GenerationProfile& p, SlotIndex slot) {
  const SlotIndex per_day = std::max<SlotIndex>(1, p.slots_per_day);
  const SlotIndex k = ((slot % per_day) + per_day) % per_day;
  if (k < p.sunrise_slot || k >= p.sunset_slot || p.sunset_slot <= p.sunrise_slot) return 0;
  const double x = static_cast<double>(k - p.sunrise_slot) /
                   static_cast<double>(p.sunset_slot - p.sunrise_slot);
  const double value = static_cast<double>(p.peak_packets) * std::sin(std::numbers::pi * x);
  return std::max<Packets>(0, round_half_up(value));
}

}  // namespace

std::vector<Packets> forecast_generation(const GenerationProfile& profile, SlotRange window,
                                         std::uint64_t /*seed*/) {
  std::vector<Packets> out;
  out.reserve(static_cast<std::size_t>(window.size()));
  for (SlotIndex t = window.begin; t < window.end; ++t) {
    Packets v = 0;
    switch (profile.shape) {
      case GenerationShape::Constant: v = profile.peak_packets; break;
      case GenerationShape::SolarDiurnal: v = solar_at(profile, t); break;
      case GenerationShape::Trace:
        v = (t >= 0 && t < static_cast<SlotIndex>(profile.trace.size()))
                ? profile.trace[static_cast<std::size_t>(t)]
                : 0;
        break;
    }
    out.push_back(std::max<Packets>(0, v) + std::max<Packets>(0, profile.import_packets));
  }
  return out;
}

std::vector<Packets> realize_generation(std::span<const Packets> forecast,
                                        const ForecastErrorModel& error, std::uint64_t seed,
                                        SlotIndex first_slot) {
  std::vector<Packets> out(forecast.begin(), forecast.end());
  if (!error.enabled || error.sigma == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto slot = static_cast<std::uint64_t>(first_slot + static_cast<SlotIndex>(i));
    const double e = error.sigma * seeded_normal(seed, slot);
    out[i] = std::max<Packets>(0, round_half_up(static_cast<double>(forecast[i]) * (1.0 + e)));
  }
  return out;
}

std::vector<Packets> load_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file " + path.string());
  std::vector<Packets> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    long long slot = 0;
    long long packets = 0;
    if (!(row >> slot)) continue;  // blank or header line
    if (!(row >> packets)) throw std::runtime_error("trace row without packet count: " + line);
    if (slot < 0 || packets < 0) throw std::runtime_error("negative entry in trace: " + line);
    if (static_cast<std::size_t>(slot) >= out.size()) out.resize(static_cast<std::size_t>(slot) + 1, 0);
    out[static_cast<std::size_t>(slot)] = packets;
  }
  return out;
}

void StorageState::validate() const {
  if (capacity_packets < 0) throw std::invalid_argument(id + ": capacity must be >= 0");
  if (soc_packets < 0 || soc_packets > capacity_packets) {
    throw std::invalid_argument(id + ": soc must lie in [0, capacity]");
  }
  if (charge_rate < 1 || discharge_rate < 1) throw std::invalid_argument(id + ": rates must be >= 1");
  if (eta.den <= 0 || eta.num <= 0 || eta.num > eta.den) {
    throw std::invalid_argument(id + ": eta must lie in (0, 1]");
  }
}

Packets StorageState::stored_for(Packets charged) const {
  const __int128 total = static_cast<__int128>(eta.num) * charged + remainder;
  return static_cast<Packets>(total / eta.den);
}

Packets StorageState::max_charge() const {
  if (!enabled) return 0;
  Packets lo = 0;
  Packets hi = charge_rate;
  const Packets headroom = capacity_packets - soc_packets;
  while (lo < hi) {
    const Packets mid = lo + (hi - lo + 1) / 2;
    if (stored_for(mid) <= headroom) lo = mid; else hi = mid - 1;
  }
  return lo;
}

Packets StorageState::max_discharge() const {
  return enabled ? std::min(discharge_rate, soc_packets) : 0;
}

StorageState apply_storage_action(const StorageState& state, Packets action) {
  StorageState next = state;
  if (action == 0) return next;
  if (!state.enabled) throw std::invalid_argument(state.id + ": storage unit is disabled");
  if (action > 0) {
    if (action > state.charge_rate) throw std::invalid_argument(state.id + ": charge exceeds rate");
    const __int128 total = static_cast<__int128>(state.eta.num) * action + state.remainder;
    const auto stored = static_cast<Packets>(total / state.eta.den);
    if (stored > state.capacity_packets - state.soc_packets) {
      throw std::invalid_argument(state.id + ": charge exceeds headroom");
    }
    next.soc_packets += stored;
    next.remainder = static_cast<std::int64_t>(total % state.eta.den);
  } else {
    const Packets out = -action;
    if (out > state.discharge_rate) throw std::invalid_argument(state.id + ": discharge exceeds rate");
    if (out > state.soc_packets) throw std::invalid_argument(state.id + ": discharge exceeds soc");
    next.soc_packets -= out;
  }
  return next;
}

}  // namespace sden

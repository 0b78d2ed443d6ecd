#include <algorithm>
#include <tuple>

#include "sden/server.hpp"

namespace sden {

void ClassificationPolicy::validate() const {
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (static_cast<int>(slack_thresholds.size()) != num_classes - 1) {
    throw ConfigError("slack_thresholds must have num_classes - 1 entries");
  }
  if (!std::is_sorted(slack_thresholds.begin(), slack_thresholds.end())) {
    throw ConfigError("slack_thresholds must be ascending");
  }
}

SlotIndex request_slack(const ServiceRequest& req, SlotIndex now) {
  return (req.deadline_slot - now) - req.shape.min_slots(req.packets);
}

PriorityClass classify(const ServiceRequest& req, SlotIndex now, const ClassificationPolicy& policy) {
  if (req.is_emergency) return 1;
  const SlotIndex slack = request_slack(req, now);
  PriorityClass cls = 1;
  for (SlotIndex th : policy.slack_thresholds) {
    if (slack > th) ++cls;
  }
  if (req.priority_hint) cls = std::max(cls, std::min(*req.priority_hint, policy.num_classes));
  return cls;
}

std::vector<Packets> compute_availability(const InventoryForecast& f, SlotRange window) {
  const SlotRange have = f.window();
  if (window.begin < have.begin || window.end > have.end) {
    throw std::invalid_argument("availability window outside the forecast");
  }
  std::vector<Packets> out;
  out.reserve(static_cast<std::size_t>(window.size()));
  for (SlotIndex t = window.begin; t < window.end; ++t) {
    const auto i = static_cast<std::size_t>(t - f.first_slot);
    const Packets locked = i < f.locked_contiguous.size() ? f.locked_contiguous[i] : 0;
    const Packets base = i < f.baseload.size() ? f.baseload[i] : 0;
    out.push_back(std::max<Packets>(0, f.generation[i] - base - locked));
  }
  return out;
}

void validate_shares(std::span<const Fraction> shares) {
  if (shares.empty()) throw ConfigError("at least one class share is required");
  Fraction sum{0, 1};
  for (const Fraction& s : shares) {
    if (s.num < 0 || s.den <= 0) throw ConfigError("shares must be non-negative");
    sum = sum + s;
  }
  if (!(sum == Fraction{1, 1})) throw ConfigError("shares must sum to 1");
}

std::vector<Packets> split_capacity(Packets capacity, std::span<const Fraction> shares) {
  std::vector<Packets> out(shares.size(), 0);
  Packets used = 0;
  for (std::size_t c = 0; c < shares.size(); ++c) {
    out[c] = shares[c].floor_times(capacity);
    used += out[c];
  }
  if (!out.empty()) out[0] += capacity - used;
  return out;
}

StorageProjection project_storage(std::span<const StorageState> units, std::span<const Packets> deficits,
                                  std::span<const Packets> must_cover, std::size_t slots) {
  StorageProjection out;
  out.extension.assign(slots, 0);
  out.must_cover_short.assign(slots, 0);
  std::vector<Packets> soc;
  std::vector<std::vector<Packets>> rate_left;
  for (const StorageState& u : units) {
    soc.push_back(u.enabled ? u.soc_packets : 0);
    rate_left.emplace_back(slots, u.enabled ? u.discharge_rate : 0);
  }
  auto reserve = [&](std::size_t t, Packets need) {
    for (std::size_t u = 0; u < units.size() && need > 0; ++u) {
      const Packets take = std::min({need, soc[u], rate_left[u][t]});
      soc[u] -= take;
      rate_left[u][t] -= take;
      need -= take;
    }
    return need;
  };
  for (std::size_t t = 0; t < slots; ++t) {
    const Packets base = t < deficits.size() ? deficits[t] : 0;
    const Packets must = t < must_cover.size() ? must_cover[t] : 0;
    const Packets base_short = reserve(t, base);
    // Baseload is served first, so a baseload shortfall leaves nothing for the locked part.
    out.must_cover_short[t] = base_short > 0 ? must : reserve(t, must);
  }
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (std::size_t t = 0; t < slots && soc[u] > 0; ++t) {
      const Packets e = std::min(rate_left[u][t], soc[u]);
      out.extension[t] += e;
      soc[u] -= e;
    }
  }
  return out;
}

std::vector<Packets> storage_extension(std::span<const StorageState> units, std::span<const Packets> deficits,
                                       std::size_t slots) {
  return project_storage(units, deficits, {}, slots).extension;
}

SlicePlan plan_slices(std::span<const Packets> capacity_total, std::span<const Fraction> shares,
                      std::span<const StorageState> storage, std::span<const Packets> deficits,
                      SlotIndex first_slot) {
  validate_shares(shares);
  SlicePlan plan;
  plan.first_slot = first_slot;
  plan.capacity_total.assign(capacity_total.begin(), capacity_total.end());
  for (Packets c : capacity_total) plan.per_class.push_back(split_capacity(c, shares));
  plan.storage_extension = storage_extension(storage, deficits, capacity_total.size());
  return plan;
}

std::vector<std::vector<Packets>> plan_storage(std::span<const Packets> capacity_total,
                                               std::span<const Packets> allocated,
                                               std::vector<StorageState> storage) {
  std::vector<std::vector<Packets>> actions(capacity_total.size(), std::vector<Packets>(storage.size(), 0));
  for (std::size_t t = 0; t < capacity_total.size(); ++t) {
    Packets balance = capacity_total[t] - (t < allocated.size() ? allocated[t] : 0);
    for (std::size_t u = 0; u < storage.size(); ++u) {
      StorageState& s = storage[u];
      if (!s.enabled || balance == 0) continue;
      Packets a = 0;
      if (balance > 0) {
        a = std::min(balance, s.max_charge());
        balance -= a;
      } else {
        a = -std::min(-balance, s.max_discharge());
        balance -= a;
      }
      if (a != 0) s = apply_storage_action(s, a);
      actions[t][u] = a;
    }
  }
  return actions;
}

std::optional<OrderingRule> parse_ordering_rule(std::string_view text) {
  if (text == "edf" || text == "earliest_deadline") return OrderingRule::EarliestDeadline;
  if (text == "fcfs" || text == "first_come") return OrderingRule::FirstCome;
  return std::nullopt;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::DeadlineBreach: return "DeadlineBreach";
    case EventKind::ContiguityBreak: return "ContiguityBreak";
    case EventKind::EmergencyDemoted: return "EmergencyDemoted";
    case EventKind::PlanFallback: return "PlanFallback";
  }
  return "?";
}

Packets SlotAllocation::delivered() const {
  Packets n = locked;
  for (const ClassUsage& u : per_class) n += u.total();
  return n;
}

Packets SlotAllocation::storage_used() const {
  Packets n = locked_from_storage;
  for (const ClassUsage& u : per_class) n += u.borrowed_storage;
  return n;
}

SlotAllocation allocate(const SlotSlices& slices, std::span<const PendingDemand> pending, OrderingRule rule) {
  const std::size_t k = slices.per_class.size();
  SlotAllocation out;
  out.slot = slices.slot;
  out.per_class.assign(k, {});
  std::vector<Packets> left = slices.per_class;
  Packets locked_left = slices.locked_capacity;
  Packets storage_left = slices.storage_extension;

  std::vector<const PendingDemand*> order;
  for (const PendingDemand& d : pending) {
    if (d.want > 0) order.push_back(&d);
  }
  auto key = [&](const PendingDemand* d) {
    const SlotIndex first = rule == OrderingRule::EarliestDeadline ? d->deadline : d->submission;
    const SlotIndex second = rule == OrderingRule::EarliestDeadline ? d->submission : d->deadline;
    return std::tuple<bool, int, bool, SlotIndex, SlotIndex, const std::string&>(!d->locked, d->cls, !d->emergency,
                                                                                 first, second, d->request_id);
  };
  std::stable_sort(order.begin(), order.end(), [&](auto* a, auto* b) { return key(a) < key(b); });

  std::map<RequestId, Packets> got;
  std::vector<RequestId> fill_order;
  auto give = [&](const PendingDemand& d, Packets n) {
    if (n <= 0) return;
    if (!got.count(d.request_id)) fill_order.push_back(d.request_id);
    got[d.request_id] += n;
  };
  auto slice_of = [&](const PendingDemand& d) {
    return static_cast<std::size_t>(std::clamp<PriorityClass>(d.cls, 1, static_cast<int>(k)) - 1);
  };

  std::vector<Packets> need(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const PendingDemand& d = *order[i];
    need[i] = d.want;
    if (d.locked) {
      const Packets a = std::min(need[i], locked_left);
      locked_left -= a;
      const Packets b = std::min(need[i] - a, storage_left);
      storage_left -= b;
      out.locked += a + b;
      out.locked_from_storage += b;
      give(d, a + b);
      need[i] -= a + b;
    } else if (k > 0) {
      const std::size_t c = slice_of(d);
      const Packets a = std::min(need[i], left[c]);
      left[c] -= a;
      out.per_class[c].own += a;
      give(d, a);
      need[i] -= a;
    }
  }
  // Overflow: other classes' unused slices (class 1 first), then storage.
  for (std::size_t i = 0; i < order.size(); ++i) {
    const PendingDemand& d = *order[i];
    if (d.locked || need[i] == 0 || k == 0) continue;
    const std::size_t c = slice_of(d);
    for (std::size_t o = 0; o < k && need[i] > 0; ++o) {
      if (o == c) continue;
      const Packets a = std::min(need[i], left[o]);
      left[o] -= a;
      out.per_class[c].borrowed_slices += a;
      give(d, a);
      need[i] -= a;
    }
    const Packets b = std::min(need[i], storage_left);
    storage_left -= b;
    out.per_class[c].borrowed_storage += b;
    give(d, b);
    need[i] -= b;
  }
  for (Packets n : need) out.unplaced += n;
  for (const RequestId& id : fill_order) out.assignments.push_back({id, got[id]});
  out.slice_left = left;
  out.storage_left = storage_left;
  return out;
}

}  // namespace sden

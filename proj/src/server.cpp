#include <algorithm>
#include <numeric>
#include <tuple>

#include "sden/server.hpp"

namespace sden {

void ServerPolicy::validate() const {
  classes.validate();
  if (static_cast<int>(shares.size()) != classes.num_classes) {
    throw ConfigError("one share per priority class is required");
  }
  validate_shares(shares);
  if (lookahead < 1) throw ConfigError("lookahead must be >= 1");
  if (emergency_budget_per_day < 0) throw ConfigError("emergency budget must be >= 0");
  if (slots_per_day < 1) throw ConfigError("slots_per_day must be >= 1");
}

Inventory::Inventory(ServerPolicy policy, std::vector<Packets> forecast_generation, std::vector<Packets> baseload)
    : policy_(std::move(policy)), generation_(std::move(forecast_generation)), baseload_(std::move(baseload)) {
  policy_.validate();
  baseload_.resize(generation_.size(), 0);
  begin_slot(0, {});
}

namespace {

bool edf_before(const Job* a, const Job* b) {
  return std::tie(a->request.deadline_slot, a->request.submission_slot, a->request.request_id) <
         std::tie(b->request.deadline_slot, b->request.submission_slot, b->request.request_id);
}

}  // namespace

std::vector<Packets> Inventory::locked_profile(const Job* extra) const {
  std::vector<Packets> out(static_cast<std::size_t>(window_end_ - now_), 0);
  auto add = [&](const Job& j) {
    if (!j.contiguous() || !j.next_slot) return;
    for (SlotIndex t = std::max(*j.next_slot, now_); t < *j.next_slot + j.remaining && t < window_end_; ++t) {
      ++out[static_cast<std::size_t>(t - now_)];
    }
  };
  for (const auto& [id, j] : jobs_) add(j);
  if (extra) add(*extra);
  return out;
}

Inventory::Pools Inventory::pools_for(const std::vector<Packets>& locked) const {
  const auto w = static_cast<std::size_t>(window_end_ - now_);
  const int k = num_classes();
  Pools p;
  p.gen_cap.resize(w);
  p.locked = locked;
  p.locked_from_storage.assign(w, 0);
  std::vector<Packets> deficit(w), uncovered(w), total(w);
  for (std::size_t i = 0; i < w; ++i) {
    const std::size_t t = static_cast<std::size_t>(now_) + i;
    const Packets net = generation_[t] - baseload_[t];
    p.gen_cap[i] = std::max<Packets>(0, net);
    deficit[i] = std::max<Packets>(0, -net);
    total[i] = std::max<Packets>(0, p.gen_cap[i] - locked[i]);
    uncovered[i] = std::max<Packets>(0, locked[i] - p.gen_cap[i]);
  }
  const StorageProjection proj = project_storage(storage_, deficit, uncovered, w);
  p.cap.assign(w, std::vector<Packets>(static_cast<std::size_t>(k) + 1, 0));
  for (std::size_t i = 0; i < w; ++i) {
    if (proj.must_cover_short[i] > 0) p.ok = false;
    p.locked_from_storage[i] = uncovered[i] - proj.must_cover_short[i];
    const std::vector<Packets> slices = split_capacity(total[i], policy_.shares);
    std::copy(slices.begin(), slices.end(), p.cap[i].begin());
    p.cap[i][static_cast<std::size_t>(k)] = proj.extension[i];
  }
  return p;
}

void Inventory::set_pools(Pools pools) {
  gen_cap_ = std::move(pools.gen_cap);
  locked_ = std::move(pools.locked);
  locked_from_storage_ = std::move(pools.locked_from_storage);
  caps_ = std::move(pools.cap);
  pins_ok_ = pools.ok;
}

Job Inventory::make_job(const ServiceRequest& req, PriorityClass cls, bool emergency) const {
  Job j;
  j.request = req;
  j.cls = cls;
  j.emergency = emergency;
  j.remaining = req.packets;
  j.seq = next_seq_;
  return j;
}

PackJob Inventory::pack_job(const Job& job) const {
  PackJob pj;
  pj.demand = job.remaining;
  pj.lo = std::max(job.request.earliest_slot, now_) - now_;
  pj.hi = std::min(job.request.deadline_slot, window_end_ - 1) - now_;
  pj.per_slot = job.request.shape.slot_limit(job.remaining);
  const int k = num_classes();
  const int own = std::clamp(job.cls, 1, k) - 1;
  pj.pools.push_back(own);
  if (job.emergency) {
    for (int c = 0; c < k; ++c) {
      if (c != own) pj.pools.push_back(c);
    }
  }
  pj.fallback_pools.push_back(k);
  return pj;
}

std::vector<const Job*> Inventory::flexible_jobs() const {
  std::vector<const Job*> out;
  for (const auto& [id, j] : jobs_) {
    if (!j.contiguous() && !j.late && j.remaining > 0) out.push_back(&j);
  }
  return out;
}

CapacityGrid Inventory::usage_of(const std::map<RequestId, std::vector<Placement>>& plan) const {
  const auto w = static_cast<std::size_t>(window_end_ - now_);
  CapacityGrid usage(w, std::vector<Packets>(static_cast<std::size_t>(num_classes()) + 1, 0));
  for (const auto& [id, cells] : plan) {
    for (const Placement& c : cells) {
      if (c.slot < now_ || c.slot >= window_end_) continue;
      usage[static_cast<std::size_t>(c.slot - now_)][static_cast<std::size_t>(c.pool)] += c.count;
    }
  }
  return usage;
}

bool Inventory::within(const CapacityGrid& usage, const CapacityGrid& cap) {
  for (std::size_t i = 0; i < usage.size(); ++i) {
    for (std::size_t p = 0; p < usage[i].size(); ++p) {
      if (usage[i][p] > cap[i][p]) return false;
    }
  }
  return true;
}

// Re-packs `affected` (flexible jobs) around the fixed placements of every other
// flexible job. EDF first; max-flow when allowed and small enough.
std::optional<Inventory::Book> Inventory::repack(const Pools& pools, std::vector<const Job*> affected,
                                                 bool allow_flow) const {
  std::sort(affected.begin(), affected.end(), edf_before);
  std::map<RequestId, std::vector<Placement>> fixed = plan_;
  for (const Job* j : affected) fixed.erase(j->request.request_id);
  CapacityGrid cap = pools.cap;
  const CapacityGrid fixed_use = usage_of(fixed);
  for (std::size_t i = 0; i < cap.size(); ++i) {
    for (std::size_t p = 0; p < cap[i].size(); ++p) {
      cap[i][p] -= fixed_use[i][p];
      if (cap[i][p] < 0) return std::nullopt;
    }
  }
  std::vector<PackJob> pjs;
  pjs.reserve(affected.size());
  for (const Job* j : affected) {
    pjs.push_back(pack_job(*j));
    if (pjs.back().hi < pjs.back().lo) return std::nullopt;
  }
  CapacityGrid scratch = cap;
  std::optional<PackResult> packed = edf_pack(scratch, pjs);
  if (!packed && allow_flow && affected.size() <= policy_.flow_job_limit) packed = flow_pack(cap, pjs);
  if (!packed) return std::nullopt;
  Book book;
  book.plan = std::move(fixed);
  for (std::size_t n = 0; n < affected.size(); ++n) {
    auto& cells = book.plan[affected[n]->request.request_id];
    for (const PackCell& c : (*packed)[n]) cells.push_back({c.slot + now_, c.pool, c.count});
  }
  book.usage = usage_of(book.plan);
  return book;
}

std::vector<ServerEvent> Inventory::begin_slot(SlotIndex now, std::span<const StorageState> storage) {
  now_ = now;
  window_end_ = std::min(now + policy_.lookahead, run_end());
  if (window_end_ < now_) window_end_ = now_;
  storage_.assign(storage.begin(), storage.end());
  for (auto& [id, cells] : plan_) {
    std::erase_if(cells, [&](const Placement& c) { return c.slot < now_; });
  }
  Pools pools = pools_for(locked_profile());
  std::vector<ServerEvent> events;
  if (auto book = repack(pools, flexible_jobs(), false)) {
    plan_ = std::move(book->plan);
    usage_ = std::move(book->usage);
    plan_valid_ = true;
  } else {
    usage_ = usage_of(plan_);
    if (within(usage_, pools.cap)) {
      plan_valid_ = true;
    } else if (auto flowed = repack(pools, flexible_jobs(), true)) {
      plan_ = std::move(flowed->plan);
      usage_ = std::move(flowed->usage);
      plan_valid_ = true;
    } else {
      plan_valid_ = false;
      events.push_back({now_, EventKind::PlanFallback, "", "", "witness plan exceeds current capacity"});
    }
  }
  if (!pools.ok) {
    events.push_back({now_, EventKind::PlanFallback, "", "", "pinned blocks exceed generation plus storage"});
  }
  set_pools(std::move(pools));
  return events;
}

std::optional<Inventory::Commit> Inventory::evaluate(const Job& candidate) const {
  const auto w = static_cast<std::size_t>(window_end_ - now_);
  if (candidate.contiguous()) {
    const SlotIndex first = std::max(candidate.request.earliest_slot, now_);
    const SlotIndex last = std::min(candidate.request.deadline_slot, window_end_ - 1) - candidate.remaining + 1;
    for (SlotIndex s = first; s <= last; ++s) {
      Job pinned = candidate;
      pinned.next_slot = s;
      Pools pools = pools_for(locked_profile(&pinned));
      if (!pools.ok) continue;
      if (within(usage_, pools.cap)) return Commit{Book{plan_, usage_}, std::move(pools), s};
      if (auto book = repack(pools, flexible_jobs(), true)) return Commit{std::move(*book), std::move(pools), s};
    }
    return std::nullopt;
  }

  PackJob pj = pack_job(candidate);
  if (pj.hi < pj.lo || w == 0) return std::nullopt;
  Pools current{gen_cap_, locked_, locked_from_storage_, caps_, pins_ok_};
  // 1. Insertion into what the current plan leaves free.
  CapacityGrid residual = caps_;
  for (std::size_t i = 0; i < w; ++i) {
    for (std::size_t p = 0; p < residual[i].size(); ++p) residual[i][p] = std::max<Packets>(0, residual[i][p] - usage_[i][p]);
  }
  if (auto packed = edf_pack(residual, {pj})) {
    Book book{plan_, usage_};
    auto& cells = book.plan[candidate.request.request_id];
    for (const PackCell& c : packed->front()) {
      cells.push_back({c.slot + now_, c.pool, c.count});
      book.usage[static_cast<std::size_t>(c.slot)][static_cast<std::size_t>(c.pool)] += c.count;
    }
    return Commit{std::move(book), std::move(current), std::nullopt};
  }
  // 2. Re-pack every job whose window is connected to the candidate's in time.
  std::vector<const Job*> all = flexible_jobs();
  std::vector<const Job*> affected{&candidate};
  std::vector<bool> taken(all.size(), false);
  SlotIndex lo = pj.lo, hi = pj.hi;
  for (bool grew = true; grew;) {
    grew = false;
    for (std::size_t n = 0; n < all.size(); ++n) {
      if (taken[n]) continue;
      const PackJob other = pack_job(*all[n]);
      if (other.hi < lo || other.lo > hi) continue;
      taken[n] = true;
      affected.push_back(all[n]);
      lo = std::min(lo, other.lo);
      hi = std::max(hi, other.hi);
      grew = true;
    }
  }
  if (auto book = repack(current, affected, true)) return Commit{std::move(*book), std::move(current), std::nullopt};
  return std::nullopt;
}

RejectHint Inventory::hint_for(const Job& candidate) const {
  RejectHint hint{window_end_, 0};
  const auto w = static_cast<std::size_t>(window_end_ - now_);
  CapacityGrid residual = caps_;
  for (std::size_t i = 0; i < w; ++i) {
    for (std::size_t p = 0; p < residual[i].size(); ++p) residual[i][p] = std::max<Packets>(0, residual[i][p] - usage_[i][p]);
  }
  const SlotIndex len = candidate.request.window_length();
  const SlotIndex start = std::max(candidate.request.earliest_slot, now_);
  if (candidate.contiguous()) {
    auto free_at = [&](SlotIndex t) {
      const auto& row = residual[static_cast<std::size_t>(t - now_)];
      return std::accumulate(row.begin(), row.end(), Packets{0}) > 0;
    };
    auto longest = [&](SlotIndex a, SlotIndex b) {
      Packets best = 0, run = 0;
      for (SlotIndex t = a; t <= b && t < window_end_; ++t) {
        run = free_at(t) ? run + 1 : 0;
        best = std::max(best, run);
      }
      return best;
    };
    hint.max_packets_feasible_now = std::min(candidate.remaining, longest(start, candidate.request.deadline_slot));
    for (SlotIndex e = start + 1; e + candidate.remaining <= window_end_; ++e) {
      if (longest(e, e + len - 1) >= candidate.remaining) {
        hint.earliest_feasible_slot = e;
        break;
      }
    }
    return hint;
  }
  PackJob pj = pack_job(candidate);
  hint.max_packets_feasible_now = pj.hi >= pj.lo ? max_insertable(residual, pj) : 0;
  for (SlotIndex e = start + 1; e < window_end_; ++e) {
    pj.lo = e - now_;
    pj.hi = std::min(e + len - 1, window_end_ - 1) - now_;
    if (max_insertable(residual, pj) >= candidate.remaining) {
      hint.earliest_feasible_slot = e;
      break;
    }
  }
  return hint;
}

bool Inventory::fits(const ServiceRequest& req, PriorityClass cls, bool emergency_pools) const {
  if (validate_request(req, now_)) return false;
  if (req.earliest_slot >= window_end_) return false;
  return evaluate(make_job(req, cls, emergency_pools)).has_value();
}

AdmissionDecision Inventory::admit(const ServiceRequest& req, std::optional<PriorityClass> force_class,
                                   bool emergency_pools) {
  AdmissionDecision d;
  if (jobs_.count(req.request_id)) throw std::logic_error("duplicate request id " + req.request_id);
  if (auto bad = validate_request(req, now_)) {
    d.reason = std::string(to_string(*bad));
    d.hint = {window_end_, 0};
    return d;
  }
  d.assigned_class = force_class ? *force_class : classify(req, now_, policy_.classes);
  if (req.earliest_slot >= window_end_) {
    d.reason = "BeyondHorizon";
    d.hint = {window_end_, 0};
    return d;
  }
  Job candidate = make_job(req, d.assigned_class, emergency_pools);
  std::optional<Commit> commit = evaluate(candidate);
  if (!commit) {
    d.reason = "InsufficientCapacity";
    d.hint = hint_for(candidate);
    return d;
  }
  candidate.next_slot = commit->pin;
  ++next_seq_;
  jobs_.emplace(req.request_id, std::move(candidate));
  plan_ = std::move(commit->book.plan);
  usage_ = std::move(commit->book.usage);
  set_pools(std::move(commit->pools));
  d.verdict = Verdict::Accept;
  return d;
}

SlotPlanOutcome Inventory::plan_current_slot() {
  SlotPlanOutcome out;
  out.slot = now_;
  const int k = num_classes();
  if (window_end_ <= now_) return out;
  out.gen_capacity = gen_cap_[0];
  out.slices.slot = now_;
  out.slices.locked_capacity = std::min(locked_[0], gen_cap_[0]);
  out.slices.per_class.assign(caps_[0].begin(), caps_[0].begin() + k);
  out.slices.storage_extension = caps_[0][static_cast<std::size_t>(k)] + locked_from_storage_[0];
  out.capacity_total = std::accumulate(out.slices.per_class.begin(), out.slices.per_class.end(), Packets{0});

  std::vector<PendingDemand> pending;
  for (const auto& [id, j] : jobs_) {
    PendingDemand d{id, j.cls, j.emergency, false, j.request.deadline_slot, j.request.submission_slot, 0};
    if (j.contiguous()) {
      if (!j.occupies(now_)) continue;
      d.locked = true;
      d.want = 1;
    } else if (auto it = plan_.find(id); it != plan_.end()) {
      for (const Placement& c : it->second) {
        if (c.slot == now_) d.want += c.count;
      }
    }
    if (d.want > 0) pending.push_back(d);
  }
  out.allocation = allocate(out.slices, pending, policy_.rule);
  for (const Assignment& a : out.allocation.assignments) out.planned[a.request_id] += a.packets;

  // Pull-forward into unused slice capacity (never storage); late work first.
  std::vector<Job*> extra;
  for (auto& [id, j] : jobs_) {
    if (j.contiguous() || j.remaining <= 0 || j.request.earliest_slot > now_) continue;
    extra.push_back(&j);
  }
  const bool edf = policy_.rule == OrderingRule::EarliestDeadline;
  auto extra_key = [&](const Job* j) {
    const SlotIndex first = edf ? j->request.deadline_slot : j->request.submission_slot;
    return std::tuple<bool, int, SlotIndex, SlotIndex, const std::string&>(!j->late, j->cls, first,
                                                                           j->request.submission_slot,
                                                                           j->request.request_id);
  };
  std::sort(extra.begin(), extra.end(), [&](const Job* a, const Job* b) { return extra_key(a) < extra_key(b); });
  std::vector<Packets>& left = out.allocation.slice_left;
  for (Job* j : extra) {
    const RequestId& id = j->request.request_id;
    const Packets have = out.planned.count(id) ? out.planned[id] : 0;
    Packets room = std::min(j->request.shape.slot_limit(j->remaining) - have, j->remaining - have);
    if (room <= 0) continue;
    const int own = std::clamp(j->cls, 1, k) - 1;
    Packets took = 0;
    for (int step = 0; step < k && room > 0; ++step) {
      const int c = step == 0 ? own : (step <= own ? step - 1 : step);
      const Packets a = std::min(room, left[static_cast<std::size_t>(c)]);
      if (a <= 0) continue;
      left[static_cast<std::size_t>(c)] -= a;
      if (c == own) {
        out.allocation.per_class[static_cast<std::size_t>(own)].own += a;
      } else {
        out.allocation.per_class[static_cast<std::size_t>(own)].borrowed_slices += a;
      }
      room -= a;
      took += a;
    }
    if (took == 0) continue;
    out.planned[id] += took;
    out.extras[id] += took;
    auto it = std::find_if(out.allocation.assignments.begin(), out.allocation.assignments.end(),
                           [&](const Assignment& a) { return a.request_id == id; });
    if (it == out.allocation.assignments.end()) {
      out.allocation.assignments.push_back({id, took});
    } else {
      it->packets += took;
    }
    // The plan no longer needs these packets later: trim from the back.
    if (auto pit = plan_.find(id); pit != plan_.end()) {
      Packets trim = took;
      auto& cells = pit->second;
      for (auto c = cells.rbegin(); c != cells.rend() && trim > 0; ++c) {
        if (c->slot == now_) continue;
        const Packets cut = std::min(trim, c->count);
        c->count -= cut;
        trim -= cut;
        usage_[static_cast<std::size_t>(c->slot - now_)][static_cast<std::size_t>(c->pool)] -= cut;
      }
      std::erase_if(cells, [](const Placement& c) { return c.count == 0; });
    }
  }
  return out;
}

std::vector<ServerEvent> Inventory::record_delivery(const std::map<RequestId, Packets>& delivered) {
  std::vector<ServerEvent> events;
  std::vector<RequestId> done;
  for (auto& [id, j] : jobs_) {
    const auto it = delivered.find(id);
    const Packets d = it == delivered.end() ? 0 : it->second;
    if (d < 0 || d > j.remaining) throw std::logic_error("delivery exceeds remaining packets for " + id);
    if (j.contiguous()) {
      const bool due = j.occupies(now_);
      if (!due && d > 0) throw std::logic_error("contiguous delivery outside its block for " + id);
      if (due) {
        if (d == 1) {
          j.started = true;
          j.remaining -= 1;
        } else if (j.started) {
          events.push_back({now_, EventKind::ContiguityBreak, id, j.request.client_id, "block interrupted"});
        }
        j.next_slot = now_ + 1;
      }
    } else {
      j.remaining -= d;
    }
    if (j.remaining == 0) {
      done.push_back(id);
    } else if (!j.late && j.request.deadline_slot <= now_) {
      j.late = true;
      events.push_back({now_, EventKind::DeadlineBreach, id, j.request.client_id,
                        std::to_string(j.remaining) + " packets outstanding"});
    }
  }
  for (const RequestId& id : done) {
    jobs_.erase(id);
    plan_.erase(id);
  }
  for (auto& [id, cells] : plan_) {
    std::erase_if(cells, [&](const Placement& c) { return c.slot <= now_; });
  }
  std::erase_if(plan_, [&](const auto& kv) { return !jobs_.count(kv.first) || jobs_.at(kv.first).late; });
  return events;
}

const Job* Inventory::job(const RequestId& id) const {
  auto it = jobs_.find(id);
  return it == jobs_.end() ? nullptr : &it->second;
}

std::vector<Placement> Inventory::plan_of(const RequestId& id) const {
  auto it = plan_.find(id);
  return it == plan_.end() ? std::vector<Placement>{} : it->second;
}

InventoryForecast Inventory::forecast_view() const {
  InventoryForecast f;
  f.first_slot = now_;
  f.generation.assign(generation_.begin() + now_, generation_.begin() + window_end_);
  f.baseload.assign(baseload_.begin() + now_, baseload_.begin() + window_end_);
  f.locked_contiguous = locked_;
  for (const auto& row : usage_) f.committed.push_back(std::accumulate(row.begin(), row.end(), Packets{0}));
  f.storage = storage_;
  return f;
}

AdmissionDecision admit(const ServiceRequest& req, Inventory& inventory, SlotIndex now) {
  if (now != inventory.now()) throw std::logic_error("inventory is not positioned at the admission slot");
  return inventory.admit(req);
}

bool EmergencyLedger::within_budget(const AgentId& client, SlotIndex now) const {
  return used(client, now) < budget_;
}

void EmergencyLedger::record(const AgentId& client, SlotIndex now) { ++used_[{client, now / slots_per_day_}]; }

int EmergencyLedger::used(const AgentId& client, SlotIndex now) const {
  auto it = used_.find({client, now / slots_per_day_});
  return it == used_.end() ? 0 : it->second;
}

AdmissionDecision handle_emergency(const ServiceRequest& req, Inventory& inventory, EmergencyLedger& ledger,
                                   SlotIndex now) {
  if (!req.is_emergency) throw std::invalid_argument("handle_emergency needs an emergency request");
  if (now != inventory.now()) throw std::logic_error("inventory is not positioned at the admission slot");
  if (!ledger.within_budget(req.client_id, now)) {
    ServiceRequest ordinary = req;
    ordinary.is_emergency = false;
    AdmissionDecision d = inventory.admit(req, classify(ordinary, now, inventory.policy().classes), false);
    d.demoted_emergency = true;
    return d;
  }
  AdmissionDecision d = inventory.admit(req, 1, true);
  if (d.accepted()) ledger.record(req.client_id, now);
  return d;
}

}  // namespace sden

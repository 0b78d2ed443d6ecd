#include "sden/engine.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include "sden/server.hpp"

namespace sden {

namespace {

struct Client {
  LoadConfig cfg;
  AgentId household;
  ClientProtocolState proto;
  std::vector<Message> pending;  // follow-ups sent at their sent_slot
  ThermalState thermal;
};

struct Router {
  AgentId id;
  RouterPolicy policy;
  std::vector<Packets> local;  // actual local generation per slot
};

class Sim {
public:
  explicit Sim(const ScenarioConfig& c) : cfg_(c), channel_(c.channel) {}

  SimResult go();

private:
  void send(Message m);
  void pull();
  std::vector<Message> take(const AgentId& id, bool acks_only = false);
  void note(SlotIndex slot, std::string kind, RequestId id, AgentId agent, std::string detail = {}) {
    res_.events.push_back({slot, std::move(kind), std::move(id), std::move(agent), std::move(detail)});
  }

  void phase_loads(SlotIndex now);
  void phase_routers(SlotIndex now);
  void phase_server(SlotIndex now);
  void phase_dispatch(SlotIndex now, const SlotPlanOutcome& plan);
  void phase_notices(SlotIndex now);
  void phase_record(SlotIndex now);

  void issue(Client& c, ServiceRequest req, const std::string& need, SlotIndex now);
  void client_receive(Client& c, const Message& m, SlotIndex now);

  const ScenarioConfig& cfg_;
  Channel channel_;
  SimResult res_;
  std::optional<Inventory> inv_;
  std::optional<EmergencyLedger> ledger_;
  std::vector<StorageState> storage_;
  std::vector<Packets> gen_forecast_, gen_actual_;
  std::map<AgentId, Client> clients_;
  std::map<AgentId, Router> routers_;
  std::map<AgentId, std::vector<Message>> inbox_;
  std::map<AgentId, Packets> delivered_now_;  // per client, this slot
  std::map<RequestId, Packets> central_now_;  // per request, this slot
  std::map<RequestId, AgentId> owner_;        // request -> client
  std::vector<Packets> local_used_;           // per router index, this slot
  SlotIndex now_ = 0;
};

void Sim::send(Message m) {
  const std::optional<SlotIndex> arrival = channel_.send(m, m.sent_slot);
  res_.trace.push_back({std::move(m), arrival});
}

void Sim::pull() {
  for (Message& m : channel_.deliver_due(now_)) {
    inbox_[m.receiver].push_back(std::move(m));
  }
}

std::vector<Message> Sim::take(const AgentId& id, bool acks_only) {
  auto it = inbox_.find(id);
  if (it == inbox_.end()) return {};
  std::vector<Message> out;
  if (!acks_only) {
    out = std::move(it->second);
    it->second.clear();
    return out;
  }
  std::vector<Message> keep;
  for (Message& m : it->second) (m.kind == MessageKind::Ack ? out : keep).push_back(std::move(m));
  it->second = std::move(keep);
  return out;
}

void Sim::issue(Client& c, ServiceRequest req, const std::string& need, SlotIndex now) {
  Message m = c.proto.issue(std::move(req), need, c.cfg.retry, now);
  owner_[m.correlation_id] = c.cfg.id;
  send(std::move(m));
}

void Sim::phase_loads(SlotIndex now) {
  const PacketSpec& spec = cfg_.packet;
  for (auto& [id, c] : clients_) {
    std::vector<Message> later;
    for (Message& m : c.pending) {
      if (m.sent_slot <= now) {
        m.sent_slot = now;
        owner_[m.correlation_id] = id;
        send(std::move(m));
      } else {
        later.push_back(std::move(m));
      }
    }
    c.pending = std::move(later);

    switch (c.cfg.kind) {
      case LoadKind::WashingMachine:
        for (std::size_t i = 0; i < c.cfg.washing.size(); ++i) {
          if (c.cfg.washing[i].submit_slot != now) continue;
          ServiceRequest req = washing_machine_request(c.cfg.washing[i].program, spec);
          issue(c, req, "wm#" + std::to_string(i), now);
        }
        break;
      case LoadKind::Ev:
        for (std::size_t i = 0; i < c.cfg.sessions.size(); ++i) {
          if (c.cfg.sessions[i].arrival_slot != now) continue;
          if (auto req = ev_request(c.cfg.sessions[i], spec)) issue(c, *req, "ev#" + std::to_string(i), now);
        }
        break;
      case LoadKind::Scripted:
        for (std::size_t i = 0; i < c.cfg.scripted.size(); ++i) {
          if (c.cfg.scripted[i].submit_slot != now) continue;
          issue(c, c.cfg.scripted[i].request, "req#" + std::to_string(i), now);
        }
        break;
      case LoadKind::Heater: {
        // Outstanding packets count as arriving at their deadlines.
        std::map<SlotIndex, Packets> planned;
        SlotIndex last = now - 1;
        for (const auto& [rid, t] : c.proto.requests) {
          const auto s = t.state;
          const bool open = s == ClientRequestState::Requested || s == ClientRequestState::EmergencyPending ||
                            s == ClientRequestState::Accepted || s == ClientRequestState::PartiallyDelivered;
          if (!open || t.request.deadline_slot < now) continue;
          planned[t.request.deadline_slot] += t.request.packets - t.delivered;
          last = std::max(last, t.request.deadline_slot);
        }
        const auto begin = static_cast<std::size_t>(now);
        std::span<const double> outdoor(cfg_.outdoor_temp_c.data() + begin, cfg_.outdoor_temp_c.size() - begin);
        for (ServiceRequest req : heating_requests(c.thermal, outdoor, c.cfg.heating_lookahead, spec, now, planned)) {
          // Needs past the end of the run are out of scope.
          if (req.deadline_slot >= cfg_.horizon_slots) break;
          req.earliest_slot = std::max(now, last + 1);
          if (req.earliest_slot > req.deadline_slot) continue;
          last = req.deadline_slot;
          issue(c, req, "heat@" + std::to_string(req.deadline_slot), now);
        }
        break;
      }
    }
  }
}

void Sim::phase_routers(SlotIndex now) {
  pull();
  std::size_t index = 0;
  for (auto& [rid, r] : routers_) {
    Packets& used = local_used_[index++];
    std::vector<ServiceRequest> batch;
    std::map<RequestId, Message> by_id;
    for (Message& m : take(rid)) {
      if (m.kind == MessageKind::Ack) continue;
      if (m.kind != MessageKind::Request && m.kind != MessageKind::Emergency) {
        note(now, "ProtocolViolation", m.correlation_id, rid, "router got " + std::string(to_string(m.kind)));
        continue;
      }
      batch.push_back(std::get<RequestBody>(m.payload).request);
      by_id.emplace(m.correlation_id, std::move(m));
    }
    if (batch.empty()) continue;
    const Packets local = r.local.empty() ? 0 : r.local[static_cast<std::size_t>(now)];
    RouterOutput out = router_process(r.policy, batch, LocalView{now, local - used});
    for (const Assignment& a : out.local) {
      const AgentId client = owner_.at(a.request_id);
      send({MessageKind::Accept, a.request_id, rid, client, AcceptBody{1}, now});
      send({MessageKind::DeliveryNotice, a.request_id, rid, client, DeliveryBody{now, a.packets}, now});
      res_.schedule.assign(now, a.request_id, a.packets);
      used += a.packets;
      delivered_now_[client] += a.packets;
    }
    for (const ServiceRequest& req : out.forwarded) {
      Message m = by_id.at(req.request_id);
      m.sender = rid;
      m.receiver = "server";
      m.sent_slot = now;
      send(std::move(m));
    }
  }
}

void Sim::phase_server(SlotIndex now) {
  for (const ServerEvent& e : inv_->begin_slot(now, storage_)) note(now, std::string(to_string(e.kind)), "", "server", e.detail);
  pull();
  for (const Message& m : take("server")) {
    if (m.kind == MessageKind::Ack) continue;
    if (m.kind != MessageKind::Request && m.kind != MessageKind::Emergency) {
      note(now, "ProtocolViolation", m.correlation_id, "server", "server got " + std::string(to_string(m.kind)));
      continue;
    }
    const ServiceRequest& req = std::get<RequestBody>(m.payload).request;
    AdmissionDecision d;
    if (req.is_emergency) {
      d = handle_emergency(req, *inv_, *ledger_, now);
      if (d.demoted_emergency) {
        note(now, "EmergencyDemoted", req.request_id, req.client_id, "over daily budget");
      } else {
        note(now, d.accepted() ? "EmergencyAdmitted" : "EmergencyRejected", req.request_id, req.client_id);
      }
    } else {
      d = inv_->admit(req);
    }
    if (d.accepted()) {
      send({MessageKind::Accept, req.request_id, "server", req.client_id, AcceptBody{d.assigned_class}, now});
    } else {
      note(now, "Reject", req.request_id, req.client_id, d.reason);
      send({MessageKind::Reject, req.request_id, "server", req.client_id, RejectBody{d.hint, d.reason}, now});
    }
  }
  phase_dispatch(now, inv_->plan_current_slot());
}

void Sim::phase_dispatch(SlotIndex now, const SlotPlanOutcome& plan) {
  const auto t = static_cast<std::size_t>(now);
  const int k = cfg_.server.classes.num_classes;
  DispatchRecord d;
  d.slot = now;
  d.gen_forecast = gen_forecast_[t];
  d.gen_actual = gen_actual_[t];
  d.baseload = cfg_.baseload[t];
  d.class_alloc.assign(static_cast<std::size_t>(k), 0);

  const Packets base_gen = std::min(d.gen_actual, d.baseload);
  const Packets gen_left = d.gen_actual - base_gen;
  const Packets base_def = d.baseload - base_gen;
  Packets discharge_cap = 0;
  for (const StorageState& s : storage_) discharge_cap += s.enabled ? s.max_discharge() : 0;
  const Packets base_storage = std::min(base_def, discharge_cap);
  d.baseload_served = base_gen + base_storage;
  d.baseload_unserved = base_def - base_storage;
  if (d.baseload_unserved > 0) note(now, "BaseloadUnserved", "", "server", std::to_string(d.baseload_unserved));

  // Deliveries, cut when the realized supply falls short: pull-forward first,
  // then lower classes, pinned blocks last; latest deadline first within a tier.
  std::map<RequestId, Packets> deliver = plan.planned;
  Packets want = 0;
  for (const auto& [id, n] : deliver) want += n;
  const Packets supply = gen_left + discharge_cap - base_storage;
  if (want > supply) {
    struct Chunk {
      int tier;
      SlotIndex deadline;
      RequestId id;
      Packets n;
    };
    std::vector<Chunk> chunks;
    for (const auto& [id, n] : deliver) {
      const Job* j = inv_->job(id);
      const auto e = plan.extras.count(id) ? plan.extras.at(id) : 0;
      if (e > 0) chunks.push_back({0, j->request.deadline_slot, id, e});
      const int tier = j->contiguous() ? k + 1 : 1 + (k - std::clamp(j->cls, 1, k));
      if (n - e > 0) chunks.push_back({tier, j->request.deadline_slot, id, n - e});
    }
    std::sort(chunks.begin(), chunks.end(), [](const Chunk& a, const Chunk& b) {
      return std::tie(a.tier, b.deadline, b.id) < std::tie(b.tier, a.deadline, a.id);
    });
    Packets over = want - supply;
    for (const Chunk& c : chunks) {
      if (over == 0) break;
      const Packets cut = std::min(over, c.n);
      deliver[c.id] -= cut;
      over -= cut;
      d.cut += cut;
    }
  }
  for (const auto& [id, n] : deliver) {
    if (n <= 0) continue;
    const Job* j = inv_->job(id);
    const auto c = static_cast<std::size_t>(std::clamp(j->cls, 1, k) - 1);
    d.delivered += n;
    d.class_alloc[c] += n;
    if (j->contiguous()) d.locked += n;
    d.extras += std::min(n, plan.extras.count(id) ? plan.extras.at(id) : 0);
  }
  const Packets from_gen = std::min(d.delivered, gen_left);
  const Packets from_storage = d.delivered - from_gen;
  d.discharge = base_storage + from_storage;
  Packets surplus = gen_left - from_gen;

  // Discharge in unit order; only a slot without discharge can have surplus to store.
  std::vector<Packets> flows(storage_.size(), 0);
  Packets to_discharge = d.discharge;
  for (std::size_t u = 0; u < storage_.size() && to_discharge > 0; ++u) {
    StorageState& s = storage_[u];
    if (!s.enabled) continue;
    const Packets a = std::min(to_discharge, s.max_discharge());
    if (a > 0) s = apply_storage_action(s, -a);
    flows[u] -= a;
    to_discharge -= a;
  }
  if (to_discharge != 0) throw InvariantError("storage could not supply the planned discharge");
  for (std::size_t u = 0; u < storage_.size() && surplus > 0; ++u) {
    StorageState& s = storage_[u];
    if (!s.enabled) continue;
    const Packets a = std::min(surplus, s.max_charge());
    if (a == 0) continue;
    const Packets before = s.soc_packets;
    s = apply_storage_action(s, a);
    d.charge += a;
    d.stored += s.soc_packets - before;
    surplus -= a;
    flows[u] += a;
  }
  d.spill = surplus;
  if (d.spill > 0) note(now, "Spill", "", "server", std::to_string(d.spill));
  for (const StorageState& s : storage_) d.soc += s.enabled ? s.soc_packets : 0;

  // Slice accounting.
  SliceRecord sr;
  sr.slot = now;
  sr.capacity = plan.gen_capacity;
  sr.capacity_actual = gen_left;
  sr.capacity_total = plan.capacity_total;
  sr.locked_capacity = plan.slices.locked_capacity;
  sr.locked_from_storage = plan.allocation.locked_from_storage;
  sr.storage_extension = plan.slices.storage_extension;
  sr.slice = plan.slices.per_class;
  sr.slice.resize(static_cast<std::size_t>(k), 0);
  sr.own.assign(static_cast<std::size_t>(k), 0);
  sr.borrowed_slices.assign(static_cast<std::size_t>(k), 0);
  sr.borrowed_storage.assign(static_cast<std::size_t>(k), 0);
  sr.allocated.assign(static_cast<std::size_t>(k), 0);
  for (std::size_t c = 0; c < plan.allocation.per_class.size(); ++c) {
    sr.own[c] = plan.allocation.per_class[c].own;
    sr.borrowed_slices[c] = plan.allocation.per_class[c].borrowed_slices;
    sr.borrowed_storage[c] = plan.allocation.per_class[c].borrowed_storage;
  }
  for (const auto& [id, n] : deliver) {
    if (n <= 0) continue;
    const Job* j = inv_->job(id);
    if (j->contiguous()) continue;
    sr.allocated[static_cast<std::size_t>(std::clamp(j->cls, 1, k) - 1)] += n;
  }
  sr.locked = d.locked;
  sr.delivered = d.delivered;
  sr.discharge = d.discharge;

  central_now_.clear();
  for (const auto& [id, n] : deliver) {
    if (n <= 0) continue;
    central_now_[id] = n;
    res_.schedule.assign(now, id, n);
    delivered_now_[inv_->job(id)->request.client_id] += n;
  }
  for (std::size_t u = 0; u < storage_.size(); ++u) res_.schedule.set_storage_action(now, u, flows[u]);
  for (const ServerEvent& e : inv_->record_delivery(central_now_)) {
    note(now, std::string(to_string(e.kind)), e.request_id, e.client_id, e.detail);
  }
  res_.dispatch.push_back(std::move(d));
  res_.slices.push_back(std::move(sr));
}

void Sim::client_receive(Client& c, const Message& m, SlotIndex now) {
  try {
    std::optional<Message> out = c.proto.on_message(m, now);
    if (!out) return;
    if (out->sent_slot > now) {
      c.pending.push_back(std::move(*out));
    } else {
      send(std::move(*out));
    }
  } catch (const ProtocolViolation& e) {
    if (cfg_.channel.loss <= 0.0) throw InvariantError(std::string("protocol violation: ") + e.what());
    note(now, "ProtocolViolation", m.correlation_id, c.cfg.id, e.what());
  }
}

void Sim::phase_notices(SlotIndex now) {
  for (const auto& [id, n] : central_now_) {
    send({MessageKind::DeliveryNotice, id, "server", owner_.at(id), DeliveryBody{now, n}, now});
  }
  const auto& flows = res_.schedule.storage_actions(now);
  for (std::size_t u = 0; u < storage_.size(); ++u) {
    const Packets flow = u < flows.size() ? flows[u] : 0;
    if (flow != 0) send({MessageKind::StorageNotice, "", "server", storage_[u].id, StorageBody{now, flow}, now});
  }
  pull();
  for (auto& [id, c] : clients_) {
    for (const Message& m : take(id)) client_receive(c, m, now);
  }
  pull();
  take("server", true);
  for (const auto& [rid, r] : routers_) take(rid, true);
  for (const StorageState& s : storage_) take(s.id);
}

void Sim::phase_record(SlotIndex now) {
  for (auto& [id, c] : clients_) {
    if (c.cfg.kind != LoadKind::Heater) continue;
    Packets n = delivered_now_.count(id) ? delivered_now_.at(id) : 0;
    // A late packet can land on top of the next one; the heater absorbs its rating only.
    const Packets rating = c.thermal.max_packets_per_slot(cfg_.packet);
    if (n > rating) {
      note(now, "HeaterOverRating", "", id, std::to_string(n - rating));
      n = rating;
    }
    c.thermal = thermal_step(c.thermal, cfg_.outdoor_temp_c[static_cast<std::size_t>(now)], n, cfg_.packet);
  }
  delivered_now_.clear();
}

SimResult Sim::go() {
  cfg_.validate();
  const SlotIndex h = cfg_.horizon_slots;
  res_.scenario = cfg_.name;
  res_.num_classes = cfg_.server.classes.num_classes;
  storage_ = cfg_.storage;
  for (const StorageState& s : storage_) {
    res_.storage_capacity.push_back(s.enabled ? s.capacity_packets : 0);
    if (s.enabled) res_.initial_soc += s.soc_packets;
  }
  res_.schedule = Schedule({0, h}, storage_.size());
  gen_forecast_ = forecast_generation(cfg_.source, {0, h}, cfg_.seed);
  gen_actual_ = realize_generation(gen_forecast_, cfg_.source.error, cfg_.seed, 0);
  inv_.emplace(cfg_.server, gen_forecast_, cfg_.baseload);
  ledger_.emplace(cfg_.server.emergency_budget_per_day, cfg_.server.slots_per_day);

  std::uint64_t index = 0;
  for (const HouseholdConfig& hh : cfg_.households) {
    Router r;
    r.id = hh.id;
    r.policy = hh.router;
    ++index;
    if (hh.local_source) {
      const auto fc = forecast_generation(*hh.local_source, {0, h}, cfg_.seed);
      r.local = realize_generation(fc, hh.local_source->error, mix_seed(cfg_.seed, index), 0);
    }
    routers_.emplace(hh.id, std::move(r));
    for (const LoadConfig& load : hh.loads) {
      Client c;
      c.cfg = load;
      c.household = hh.id;
      c.proto.client_id = load.id;
      c.proto.upstream_id = hh.id;
      c.proto.escalation_threshold = cfg_.escalation_threshold;
      c.proto.max_attempts = cfg_.max_attempts;
      c.proto.acks_enabled = cfg_.acks;
      c.thermal = load.thermal;
      clients_.emplace(load.id, std::move(c));
    }
  }
  local_used_.assign(routers_.size(), 0);

  for (SlotIndex now = 0; now < h; ++now) {
    now_ = now;
    std::fill(local_used_.begin(), local_used_.end(), 0);
    phase_loads(now);
    phase_routers(now);
    phase_server(now);
    // Local pools: whatever the routers did not hand out is spilled.
    DispatchRecord& d = res_.dispatch.back();
    std::size_t i = 0;
    for (const auto& [rid, r] : routers_) {
      const Packets gen = r.local.empty() ? 0 : r.local[static_cast<std::size_t>(now)];
      d.local_gen += gen;
      d.local_served += local_used_[i++];
    }
    d.local_spill = d.local_gen - d.local_served;
    phase_notices(now);
    phase_record(now);
  }
  res_.kpis = compute_kpis(res_);
  return std::move(res_);
}

}  // namespace

SimResult run(const ScenarioConfig& config) {
  Sim sim(config);
  return sim.go();
}

std::map<RequestId, ServiceRequest> requests_in_trace(const std::vector<TraceRecord>& trace) {
  std::map<RequestId, ServiceRequest> out;
  for (const TraceRecord& r : trace) {
    if (r.msg.kind != MessageKind::Request && r.msg.kind != MessageKind::Emergency) continue;
    out.emplace(r.msg.correlation_id, std::get<RequestBody>(r.msg.payload).request);
  }
  return out;
}

namespace {

struct Verdicts {
  std::map<RequestId, bool> accepted;  // first verdict per request
  std::set<RequestId> emergencies;
};

Verdicts verdicts_in_trace(const std::vector<TraceRecord>& trace) {
  Verdicts v;
  for (const TraceRecord& r : trace) {
    const Message& m = r.msg;
    if (m.kind == MessageKind::Emergency) v.emergencies.insert(m.correlation_id);
    if (m.kind == MessageKind::Accept) v.accepted.emplace(m.correlation_id, true);
    if (m.kind == MessageKind::Reject) v.accepted.emplace(m.correlation_id, false);
  }
  return v;
}

std::map<RequestId, std::vector<std::pair<SlotIndex, Packets>>> deliveries_of(const Schedule& s) {
  std::map<RequestId, std::vector<std::pair<SlotIndex, Packets>>> out;
  for (SlotIndex t = s.horizon().begin; t < s.horizon().end; ++t) {
    for (const Assignment& a : s.assignments(t)) out[a.request_id].emplace_back(t, a.packets);
  }
  return out;
}

}  // namespace

KpiSet compute_kpis(const SimResult& result) {
  KpiSet k;
  const auto requests = requests_in_trace(result.trace);
  const Verdicts v = verdicts_in_trace(result.trace);
  const auto deliveries = deliveries_of(result.schedule);
  k.requests = requests.size();
  k.emergency_count = v.emergencies.size();
  double latency_sum = 0.0;
  std::size_t completed = 0;
  for (const auto& [id, accepted] : v.accepted) {
    accepted ? ++k.accepts : ++k.rejects;
    if (!accepted) continue;
    const ServiceRequest& req = requests.at(id);
    Packets on_time = 0, total = 0;
    SlotIndex last = -1;
    if (auto it = deliveries.find(id); it != deliveries.end()) {
      for (const auto& [slot, n] : it->second) {
        total += n;
        if (slot <= req.deadline_slot) on_time += n;
        last = std::max(last, slot);
      }
    }
    k.delivered_packets += total;
    k.late_packets += total - on_time;
    k.unserved_packets += std::max<Packets>(0, req.packets - total);
    if (on_time < req.packets) ++k.deadline_miss_count;
    if (total == req.packets) {
      latency_sum += static_cast<double>(last - req.submission_slot);
      ++completed;
    }
  }
  const std::size_t decided = k.accepts + k.rejects;
  if (decided == 0) {
    k.no_demand = true;
    k.acceptance_rate = 1.0;
    k.rejection_rate = 0.0;
  } else {
    k.acceptance_rate = static_cast<double>(k.accepts) / static_cast<double>(decided);
    k.rejection_rate = static_cast<double>(k.rejects) / static_cast<double>(decided);
  }
  k.mean_request_latency_slots = completed ? latency_sum / static_cast<double>(completed) : 0.0;
  Packets discharged = 0;
  for (const DispatchRecord& d : result.dispatch) {
    k.spill_packets += d.spill + d.local_spill;
    k.baseload_unserved += d.baseload_unserved;
    discharged += d.discharge;
  }
  const Packets cap = std::accumulate(result.storage_capacity.begin(), result.storage_capacity.end(), Packets{0});
  k.storage_cycles = cap > 0 ? static_cast<double>(discharged) / static_cast<double>(cap) : 0.0;
  const auto n = static_cast<std::size_t>(result.num_classes);
  std::vector<Packets> used(n, 0), slice(n, 0);
  for (const SliceRecord& s : result.slices) {
    for (std::size_t c = 0; c < n && c < s.slice.size(); ++c) {
      used[c] += s.own[c];
      slice[c] += s.slice[c];
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    k.class_utilization.push_back(slice[c] > 0 ? static_cast<double>(used[c]) / static_cast<double>(slice[c]) : 0.0);
  }
  return k;
}

ReplayReport replay_check(const SimResult& result, const ScenarioConfig& config) {
  const SimResult again = run(config);
  ReplayReport rep;
  const std::size_t n = std::min(result.trace.size(), again.trace.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string a = to_json_line(result.trace[i]);
    const std::string b = to_json_line(again.trace[i]);
    if (a != b) {
      rep.identical = false;
      rep.first_divergence = std::min(result.trace[i].msg.sent_slot, again.trace[i].msg.sent_slot);
      rep.detail = "record " + std::to_string(i) + " differs:\n- " + a + "\n+ " + b;
      return rep;
    }
  }
  if (result.trace.size() != again.trace.size()) {
    rep.identical = false;
    const auto& longer = result.trace.size() > n ? result.trace : again.trace;
    rep.first_divergence = longer[n].msg.sent_slot;
    rep.detail = "trace lengths differ: " + std::to_string(result.trace.size()) + " vs " +
                 std::to_string(again.trace.size());
  }
  return rep;
}

std::vector<std::string> check_invariants(const SimResult& r) {
  std::vector<std::string> bad;
  auto fail = [&](SlotIndex slot, const std::string& what) {
    if (bad.size() < 50) bad.push_back("slot " + std::to_string(slot) + ": " + what);
  };
  const Packets cap = std::accumulate(r.storage_capacity.begin(), r.storage_capacity.end(), Packets{0});
  Packets soc = r.initial_soc;
  Packets gen = 0, served = 0, delivered = 0, lost = 0, spill = 0;
  for (const DispatchRecord& d : r.dispatch) {
    if (d.gen_actual + d.discharge != d.baseload_served + d.delivered + d.charge + d.spill) {
      fail(d.slot, "central energy balance broken");
    }
    if (d.local_gen != d.local_served + d.local_spill) fail(d.slot, "local energy balance broken");
    if (d.stored > d.charge || d.spill < 0 || d.charge < 0 || d.discharge < 0) fail(d.slot, "negative or created flow");
    soc += d.stored - d.discharge;
    if (soc != d.soc) fail(d.slot, "SoC trajectory mismatch");
    if (soc < 0 || soc > cap) fail(d.slot, "SoC out of bounds");
    gen += d.gen_actual + d.local_gen;
    served += d.baseload_served;
    delivered += d.delivered + d.local_served;
    lost += d.charge - d.stored;
    spill += d.spill + d.local_spill;
  }
  if (gen != served + delivered + (soc - r.initial_soc) + lost + spill) fail(-1, "cumulative energy balance broken");

  for (const SliceRecord& s : r.slices) {
    Packets sliced_use = 0;
    for (std::size_t c = 0; c < s.slice.size(); ++c) {
      if (s.own[c] > s.slice[c]) fail(s.slot, "class " + std::to_string(c + 1) + " own use exceeds its slice");
      if (s.allocated[c] > s.slice[c] + s.borrowed_slices[c] + s.borrowed_storage[c]) {
        fail(s.slot, "class " + std::to_string(c + 1) + " allocation exceeds slice + logged borrow");
      }
      sliced_use += s.own[c] + s.borrowed_slices[c];
    }
    if (sliced_use > s.capacity_total) fail(s.slot, "slices over-used");
    if (s.delivered > s.capacity_actual + s.discharge) fail(s.slot, "delivered exceeds capacity + discharge");
  }

  std::set<RequestId> breached, broken;
  for (const SimEvent& e : r.events) {
    if (e.kind == "DeadlineBreach") breached.insert(e.request_id);
    if (e.kind == "ContiguityBreak") broken.insert(e.request_id);
  }
  const auto requests = requests_in_trace(r.trace);
  for (const auto& [id, cells] : deliveries_of(r.schedule)) {
    auto it = requests.find(id);
    if (it == requests.end()) {
      fail(cells.front().first, "delivery to unknown request " + id);
      continue;
    }
    const ServiceRequest& req = it->second;
    Packets total = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto [slot, n] = cells[i];
      total += n;
      if (slot < req.earliest_slot) fail(slot, id + " served before its window");
      if (slot > req.deadline_slot && !breached.count(id)) fail(slot, id + " served after its deadline without a breach event");
      if (n > req.shape.slot_limit(req.packets)) fail(slot, id + " exceeds its per-slot shape limit");
      if (req.shape.kind == ShapeKind::Contiguous && i > 0 && cells[i - 1].first + 1 != slot && !broken.count(id)) {
        fail(slot, id + " contiguous block interrupted");
      }
    }
    if (total > req.packets) fail(cells.back().first, id + " over-delivered");
  }
  return bad;
}

}  // namespace sden

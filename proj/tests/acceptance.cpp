// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Checks here are recomputed from raw run output (trace, schedule, per-slot
// records) rather than through the library's own checkers.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "sden/config.hpp"
#include "sden/engine.hpp"
#include "sden/oracle.hpp"

using namespace sden;
using Clock = std::chrono::steady_clock;

namespace {

const std::vector<std::string> kScenarios = {
    "fig5_30slots", "day_144slots_10households", "oversubscribed", "forecast_error",
    "emergency_escalation", "perf_1000clients",
};

std::filesystem::path config_path(const std::string& name) {
  return std::filesystem::path(SDEN_SOURCE_DIR) / "configs" / (name + ".json");
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

// Per-request deliveries in slot order, read straight off the schedule.
std::map<RequestId, std::vector<std::pair<SlotIndex, Packets>>> deliveries(const Schedule& s) {
  std::map<RequestId, std::vector<std::pair<SlotIndex, Packets>>> out;
  for (SlotIndex t = s.horizon().begin; t < s.horizon().end; ++t) {
    for (const Assignment& a : s.assignments(t)) {
      if (a.packets > 0) out[a.request_id].emplace_back(t, a.packets);
    }
  }
  return out;
}

std::map<RequestId, ServiceRequest> requests_of(const std::vector<TraceRecord>& trace) {
  std::map<RequestId, ServiceRequest> out;
  for (const TraceRecord& rec : trace) {
    if (const auto* b = std::get_if<RequestBody>(&rec.msg.payload)) out.emplace(rec.msg.correlation_id, b->request);
  }
  return out;
}

std::set<RequestId> accepted_of(const std::vector<TraceRecord>& trace) {
  std::set<RequestId> out;
  for (const TraceRecord& rec : trace) {
    if (rec.msg.kind == MessageKind::Accept) out.insert(rec.msg.correlation_id);
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome slice_soundness() {
  Outcome v;
  const auto t0 = Clock::now();
  const auto cfg = load_scenario(config_path("fig5_30slots"));
  const auto r = run(cfg);
  const double secs = seconds_since(t0);
  if (r.slices.size() != 30) v.fail("expected 30 slice rows, got " + std::to_string(r.slices.size()));
  if (r.num_classes != 2) v.fail("expected 2 classes");
  for (const SliceRecord& s : r.slices) {
    for (std::size_t c = 0; c < s.slice.size(); ++c) {
      if (s.allocated[c] > s.slice[c] + s.borrowed_slices[c] + s.borrowed_storage[c]) {
        v.fail("slot " + std::to_string(s.slot) + " class " + std::to_string(c + 1) + " allocated beyond slice + borrow");
      }
    }
    if (s.delivered > s.capacity_actual + s.discharge) {
      v.fail("slot " + std::to_string(s.slot) + " delivered beyond capacity + discharge");
    }
  }
  if (secs >= 1.0) v.fail("runtime " + std::to_string(secs) + " s");
  if (v.pass) v.detail = "30 slots, runtime " + std::to_string(secs) + " s";
  return v;
}

Outcome handshake() {
  Outcome v;
  std::size_t total = 0;
  for (const auto& name : kScenarios) {
    const auto cfg = load_scenario(config_path(name));
    if (cfg.channel.loss != 0.0) {
      v.fail(name + " is not lossless");
      continue;
    }
    const auto r = run(cfg);
    struct Seen {
      int replies = 0;
      std::size_t accept_at = SIZE_MAX;
      std::size_t first_notice = SIZE_MAX;
      Packets noticed = 0;
      Packets acked = 0;
    };
    std::map<RequestId, Seen> seen;
    std::set<RequestId> asked;
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
      const Message& m = r.trace[i].msg;
      if (!r.trace[i].arrival) v.fail(name + ": message dropped on a lossless channel");
      Seen& s = seen[m.correlation_id];
      switch (m.kind) {
        case MessageKind::Request:
        case MessageKind::Emergency: asked.insert(m.correlation_id); break;
        case MessageKind::Accept:
          ++s.replies;
          s.accept_at = std::min(s.accept_at, i);
          break;
        case MessageKind::Reject: ++s.replies; break;
        case MessageKind::DeliveryNotice:
          s.first_notice = std::min(s.first_notice, i);
          s.noticed += std::get<DeliveryBody>(m.payload).packets;
          break;
        case MessageKind::Ack: s.acked += std::get<AckBody>(m.payload).packets; break;
        case MessageKind::StorageNotice: break;
      }
    }
    total += asked.size();
    for (const auto& id : asked) {
      const Seen& s = seen[id];
      if (s.replies != 1) v.fail(name + ": " + id + " has " + std::to_string(s.replies) + " replies");
      if (s.first_notice != SIZE_MAX && s.accept_at > s.first_notice) v.fail(name + ": " + id + " notice before accept");
      if (cfg.acks && s.acked != s.noticed) v.fail(name + ": " + id + " acked != delivered");
    }
  }
  if (v.pass) v.detail = std::to_string(total) + " requests over " + std::to_string(kScenarios.size()) + " scenarios";
  return v;
}

Outcome service_guarantee() {
  Outcome v;
  const auto cfg = load_scenario(config_path("day_144slots_10households"));
  if (cfg.source.error.enabled && cfg.source.error.sigma != 0.0) v.fail("scenario has forecast error");
  if (cfg.horizon_slots != 144) v.fail("horizon is not 144 slots");
  const auto r = run(cfg);
  const auto reqs = requests_of(r.trace);
  const auto got = deliveries(r.schedule);
  std::size_t late = 0;
  Packets unserved = 0;
  for (const auto& id : accepted_of(r.trace)) {
    const ServiceRequest& q = reqs.at(id);
    Packets on_time = 0;
    bool missed = false;
    if (auto it = got.find(id); it != got.end()) {
      for (const auto& [slot, n] : it->second) {
        if (slot <= q.deadline_slot) on_time += n;
        else missed = true;
      }
    }
    if (on_time < q.packets) missed = true;
    late += missed ? 1 : 0;
    unserved += q.packets - std::min(on_time, q.packets);
  }
  if (late != 0) v.fail(std::to_string(late) + " deadline misses");
  if (unserved != 0) v.fail(std::to_string(unserved) + " unserved packets");
  if (r.kpis.deadline_miss_count != 0 || r.kpis.unserved_packets != 0) v.fail("reported KPIs disagree");
  if (v.pass) v.detail = std::to_string(accepted_of(r.trace).size()) + " accepted requests all complete on time";
  return v;
}

Outcome conservation() {
  Outcome v;
  std::size_t slots = 0;
  for (const auto& name : kScenarios) {
    const auto cfg = load_scenario(config_path(name));
    const auto r = run(cfg);
    Packets soc = 0;
    for (const StorageState& s : cfg.storage) soc += s.soc_packets;
    const Packets soc0 = soc;
    Packets gen = 0, used = 0, spill = 0, charge = 0, stored = 0, discharge = 0;
    std::vector<Packets> drawn(cfg.storage.size(), 0);
    for (const DispatchRecord& d : r.dispatch) {
      ++slots;
      const std::string at = name + " slot " + std::to_string(d.slot);
      if (d.gen_actual + d.discharge != d.baseload_served + d.delivered + d.charge + d.spill) v.fail(at + ": central balance");
      if (d.local_gen != d.local_served + d.local_spill) v.fail(at + ": local balance");
      Packets net = 0;
      const auto flows = r.schedule.storage_actions(d.slot);
      for (std::size_t u = 0; u < flows.size(); ++u) {
        net += flows[u];
        if (flows[u] > 0) drawn[u] += flows[u];
      }
      if (net != d.charge - d.discharge) v.fail(at + ": storage flows disagree with slot totals");
      soc += d.stored - d.discharge;
      if (soc != d.soc) v.fail(at + ": SoC trajectory");
      gen += d.gen_actual + d.local_gen;
      used += d.baseload_served + d.delivered + d.local_served;
      spill += d.spill + d.local_spill;
      charge += d.charge;
      stored += d.stored;
      discharge += d.discharge;
    }
    // generation = served + net stored + conversion loss + spill
    if (gen != used + (soc - soc0) + (charge - stored) + spill) v.fail(name + ": cumulative balance");
    if (soc - soc0 != stored - discharge) v.fail(name + ": net stored");
    // Stored energy matches eta-scaled charge, up to one pending fraction per unit.
    double ideal = 0.0;
    for (std::size_t u = 0; u < cfg.storage.size(); ++u) {
      ideal += static_cast<double>(drawn[u]) * cfg.storage[u].eta.num / cfg.storage[u].eta.den;
    }
    const double s = static_cast<double>(stored);
    if (s > ideal + 1e-9 || s + static_cast<double>(cfg.storage.size()) <= ideal - 1e-9) {
      v.fail(name + ": stored energy does not match eta");
    }
  }
  if (v.pass) v.detail = std::to_string(slots) + " slots over " + std::to_string(kScenarios.size()) + " scenarios";
  return v;
}

Outcome oracle() {
  Outcome v;
  const auto t0 = Clock::now();
  const auto suite = bundled_oracle_suite();
  const auto rep = run_oracle_suite(suite);
  const double secs = seconds_since(t0);
  std::size_t unsound = 0, conservative = 0, conservative_contig = 0, feasible = 0;
  for (const auto& inst : rep.instances) {
    for (const auto& d : inst.decisions) {
      feasible += d.feasible ? 1 : 0;
      if (d.admitted && !d.feasible) ++unsound;
      if (!d.admitted && d.feasible) {
        ++conservative;
        conservative_contig += d.involves_contiguous ? 1 : 0;
      }
    }
  }
  const double ratio = feasible ? static_cast<double>(conservative) / static_cast<double>(feasible) : 0.0;
  if (suite.size() != 50) v.fail("suite has " + std::to_string(suite.size()) + " instances");
  if (unsound) v.fail(std::to_string(unsound) + " unsound accepts");
  if (ratio > 0.10) v.fail("conservative ratio " + std::to_string(ratio));
  if (conservative_contig != conservative) v.fail("conservative reject without a contiguous request");
  if (secs >= 30.0) v.fail("runtime " + std::to_string(secs) + " s");
  char buf[200];
  std::snprintf(buf, sizeof buf, "unsound=%zu conservative=%zu/%zu feasible (%.3f), %.2f s", unsound, conservative,
                feasible, ratio, secs);
  if (v.pass) v.detail = buf;
  else v.detail += std::string("; ") + buf;
  return v;
}

Outcome determinism() {
  Outcome v;
  for (const auto& name : kScenarios) {
    const auto cfg = load_scenario(config_path(name));
    const auto a = run(cfg);
    const auto b = run(cfg);
    if (a.trace.size() != b.trace.size()) v.fail(name + ": trace lengths differ");
    for (std::size_t i = 0; i < std::min(a.trace.size(), b.trace.size()); ++i) {
      if (to_json_line(a.trace[i]) != to_json_line(b.trace[i])) {
        v.fail(name + ": first divergence at line " + std::to_string(i));
        break;
      }
    }
    if (!replay_check(a, cfg).identical) v.fail(name + ": replay_check reports a divergence");
  }
  if (v.pass) v.detail = std::to_string(kScenarios.size()) + " scenarios replay byte-identical";
  return v;
}

nlohmann::json random_scenario(std::mt19937_64& rng, int index) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int h = pick(8, 24);
  nlohmann::json c;
  c["name"] = "random_" + std::to_string(index);
  c["horizon_slots"] = h;
  c["seed"] = index;
  c["source"] = {{"shape", "constant"}, {"peak_packets", pick(1, 6)}};
  c["baseload"] = pick(0, 1);
  if (pick(0, 1)) {
    c["storage"] = nlohmann::json::array(
        {{{"id", "b"}, {"soc", pick(0, 4)}, {"capacity", 6}, {"charge_rate", pick(1, 2)}, {"discharge_rate", pick(1, 2)}}});
  }
  const int k = pick(1, 3);
  c["server"] = {{"num_classes", k}};
  if (k == 1) c["server"]["shares"] = {1};
  if (k == 2) c["server"]["shares"] = {0.5, 0.5};
  if (k == 3) c["server"]["shares"] = {"1/3", "1/3", "1/3"};
  if (k == 2) c["server"]["slack_thresholds"] = {pick(1, 8)};
  if (k == 3) c["server"]["slack_thresholds"] = {2, 6};
  nlohmann::json households = nlohmann::json::array();
  const int n = pick(1, 3);
  for (int i = 0; i < n; ++i) {
    nlohmann::json reqs = nlohmann::json::array();
    const int m = pick(1, 4);
    for (int j = 0; j < m; ++j) {
      const int packets = pick(1, 5);
      nlohmann::json q = {{"packets", packets}};
      int need = 1;
      switch (pick(0, 2)) {
        case 0: q["shape"] = "arbitrary"; break;
        case 1:
          q["shape"] = "contiguous";
          need = packets;
          break;
        default: {
          const int cap = pick(1, 3);
          q["shape"] = "per_slot_cap";
          q["cap"] = cap;
          need = (packets + cap - 1) / cap;
        }
      }
      const int submit = pick(0, h - need);
      const int earliest = pick(submit, h - need);
      q["submit_slot"] = submit;
      q["earliest"] = earliest;
      q["deadline"] = pick(earliest + need - 1, h - 1);
      reqs.push_back(q);
    }
    households.push_back({{"id", "h" + std::to_string(i)},
                          {"loads", {{{"id", "l" + std::to_string(i)}, {"type", "scripted"}, {"requests", reqs}}}}});
  }
  c["households"] = households;
  return c;
}

Outcome shape_compliance() {
  Outcome v;
  std::mt19937_64 rng(777);
  constexpr int kRuns = 1000;
  std::size_t completed = 0;
  for (int i = 0; i < kRuns; ++i) {
    const auto doc = random_scenario(rng, i);
    const auto r = run(parse_scenario(doc.dump()));
    const auto reqs = requests_of(r.trace);
    const auto got = deliveries(r.schedule);
    const std::string at = "scenario " + std::to_string(i) + " ";
    for (const auto& [id, cells] : got) {
      const ServiceRequest& q = reqs.at(id);
      Packets total = 0;
      for (const auto& [slot, n] : cells) {
        total += n;
        if (q.shape.kind == ShapeKind::PerSlotCap && n > q.shape.per_slot_cap) v.fail(at + id + " over its cap");
      }
      if (total != q.packets) continue;
      ++completed;
      if (q.shape.kind == ShapeKind::Contiguous) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
          if (cells[c].second != 1 || (c > 0 && cells[c - 1].first + 1 != cells[c].first)) {
            v.fail(at + id + " contiguous run broken");
          }
        }
      }
      if (cells.front().first < q.earliest_slot || cells.back().first > q.deadline_slot) {
        v.fail(at + id + " delivered outside its window");
      }
    }
    for (const auto& id : accepted_of(r.trace)) {
      auto it = got.find(id);
      Packets total = 0;
      if (it != got.end()) {
        for (const auto& cell : it->second) total += cell.second;
      }
      if (total != reqs.at(id).packets) v.fail(at + id + " accepted but not completed");
    }
  }
  if (v.pass) v.detail = std::to_string(kRuns) + " scenarios, " + std::to_string(completed) + " completed requests";
  return v;
}

Outcome emergency() {
  Outcome v;
  const auto cfg = load_scenario(config_path("emergency_escalation"));
  const auto r = run(cfg);
  const int threshold = cfg.escalation_threshold;
  const int budget = cfg.server.emergency_budget_per_day;
  const SlotIndex per_day = cfg.server.slots_per_day;

  // Rejections per client since its last admitted emergency, from the event log.
  std::map<AgentId, int> streak;
  std::map<std::pair<AgentId, SlotIndex>, int> admitted;
  std::size_t escalations = 0;
  for (const SimEvent& e : r.events) {
    if (e.kind == "Reject") ++streak[e.agent];
    if (e.kind == "EmergencyAdmitted") {
      ++escalations;
      if (streak[e.agent] < threshold) {
        v.fail(e.agent + " escalated after " + std::to_string(streak[e.agent]) + " rejects");
      }
      streak[e.agent] = 0;
      if (++admitted[{e.agent, e.slot / per_day}] > budget) v.fail(e.agent + " exceeded its emergency budget");
      const auto reqs = requests_of(r.trace);
      auto it = reqs.find(e.request_id);
      if (it == reqs.end() || !it->second.is_emergency) {
        v.fail(e.request_id + " admitted but not sent as an emergency");
      } else if (r.schedule.delivered_to(e.request_id) != it->second.packets) {
        v.fail(e.request_id + " admitted emergency not fully delivered");
      }
    }
  }
  // Exact expected log for client x: three rejects, then the emergency is admitted.
  std::vector<std::string> x;
  for (const SimEvent& e : r.events) {
    if (e.agent == "x" && x.size() < 4) x.push_back(e.kind + "@" + std::to_string(e.slot));
  }
  const std::vector<std::string> want = {"Reject@1", "Reject@2", "Reject@3", "EmergencyAdmitted@4"};
  if (x != want) v.fail("unexpected event log prefix for client x");
  if (escalations == 0) v.fail("no emergency admitted");
  std::size_t demoted = 0;
  for (const SimEvent& e : r.events) demoted += e.kind == "EmergencyDemoted" ? 1 : 0;
  if (v.pass) {
    v.detail = std::to_string(escalations) + " admitted, " + std::to_string(demoted) + " demoted over budget";
  }
  return v;
}

Outcome performance() {
  Outcome v;
  const auto cfg = load_scenario(config_path("perf_1000clients"));
  const auto t0 = Clock::now();
  const auto r = run(cfg);
  const double secs = seconds_since(t0);
  if (cfg.client_count() < 1000) v.fail("only " + std::to_string(cfg.client_count()) + " clients");
  if (r.dispatch.size() != 144) v.fail("horizon is not 144 slots");
  if (secs >= 10.0) v.fail("runtime " + std::to_string(secs) + " s");
  if (v.pass) v.detail = std::to_string(cfg.client_count()) + " clients x 144 slots in " + std::to_string(secs) + " s";
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 slice soundness (fig5_30slots)", slice_soundness},
      {"2 handshake conformance", handshake},
      {"3 perfect-forecast service guarantee", service_guarantee},
      {"4 energy conservation", conservation},
      {"5 admission oracle", oracle},
      {"6 deterministic replay", determinism},
      {"7 shape compliance (1000 random scenarios)", shape_compliance},
      {"8 emergency escalation", emergency},
      {"9 desk-scale performance", performance},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    std::printf("%s criterion %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    failed += v.pass ? 0 : 1;
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}

#include "sden/config.hpp"

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace sden {

using nlohmann::json;

std::string_view to_string(LoadKind kind) {
  switch (kind) {
    case LoadKind::WashingMachine: return "washing_machine";
    case LoadKind::Heater: return "heater";
    case LoadKind::Ev: return "ev";
    case LoadKind::Scripted: return "scripted";
  }
  return "?";
}

std::size_t ScenarioConfig::client_count() const {
  std::size_t n = 0;
  for (const auto& h : households) n += h.loads.size();
  return n;
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where.empty() ? what : where + ": " + what);
}

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known |= it.key() == k;
    if (!known) fail(where, "unknown key '" + it.key() + "'");
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where + "." + key, "wrong type");
  }
}

template <typename T>
T need(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail(where, std::string("missing key '") + key + "'");
  return get<T>(obj, key, where, T{});
}

std::int64_t get_int(const json& obj, const char* key, const std::string& where, std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) fail(where + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

std::int64_t need_int(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail(where, std::string("missing key '") + key + "'");
  return get_int(obj, key, where, 0);
}

Fraction parse_share(const json& v, const std::string& where) {
  if (v.is_number()) {
    const double d = v.get<double>();
    if (d < 0) fail(where, "shares must be non-negative");
    return Fraction::from_double(d);
  }
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) return Fraction{std::stoll(s), 1};
      return Fraction{std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1))};
    } catch (const std::exception&) {
      fail(where, "malformed share '" + s + "'");
    }
  }
  fail(where, "share must be a number or \"num/den\"");
}

// Per-slot series: a scalar, an explicit list, {"hourly": [...]} (one value per
// hour of the day, repeated), or {"trace_file": path}.
template <typename T>
std::vector<T> parse_series(const json& v, SlotIndex horizon, const PacketSpec& spec, const std::string& where,
                            const std::filesystem::path& base_dir) {
  std::vector<T> out;
  try {
    if (v.is_number()) {
      out.assign(static_cast<std::size_t>(horizon), v.get<T>());
    } else if (v.is_array()) {
      out = v.get<std::vector<T>>();
      if (out.empty()) fail(where, "series must not be empty");
      out.resize(static_cast<std::size_t>(horizon), out.back());
    } else if (v.is_object()) {
      only_keys(v, where, {"hourly", "trace_file"});
      if (v.contains("hourly")) {
        const auto hourly = v.at("hourly").get<std::vector<T>>();
        if (hourly.empty()) fail(where, "hourly series must not be empty");
        const double slots_per_hour = 60.0 / static_cast<double>(spec.slot_minutes);
        for (SlotIndex t = 0; t < horizon; ++t) {
          const auto hour = static_cast<std::size_t>(static_cast<double>(t) / slots_per_hour);
          out.push_back(hourly[hour % hourly.size()]);
        }
      } else if (v.contains("trace_file")) {
        std::vector<Packets> rows;
        try {
          rows = load_trace_file(base_dir / v.at("trace_file").get<std::string>());
        } catch (const std::runtime_error& e) {
          fail(where + ".trace_file", e.what());
        }
        for (Packets p : rows) out.push_back(static_cast<T>(p));
        out.resize(static_cast<std::size_t>(horizon), T{});
      } else {
        fail(where, "expected 'hourly' or 'trace_file'");
      }
    } else {
      fail(where, "expected a number, list or object");
    }
  } catch (const json::exception&) {
    fail(where, "wrong element type");
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
  return out;
}

GenerationProfile parse_source(const json& v, const PacketSpec& spec, const std::string& where,
                               const std::filesystem::path& base_dir) {
  only_keys(v, where,
            {"shape", "peak_packets", "sunrise_slot", "sunset_slot", "trace", "trace_file", "import_packets",
             "forecast_error_sigma"});
  GenerationProfile g;
  g.slots_per_day = spec.slots_per_day();
  g.sunrise_slot = g.slots_per_day / 4;
  g.sunset_slot = g.slots_per_day * 5 / 6;
  const std::string shape = get<std::string>(v, "shape", where, "constant");
  if (shape == "constant") {
    g.shape = GenerationShape::Constant;
  } else if (shape == "solar") {
    g.shape = GenerationShape::SolarDiurnal;
  } else if (shape == "trace") {
    g.shape = GenerationShape::Trace;
  } else {
    fail(where + ".shape", "unknown shape '" + shape + "'");
  }
  g.peak_packets = get_int(v, "peak_packets", where, 0);
  g.sunrise_slot = get_int(v, "sunrise_slot", where, g.sunrise_slot);
  g.sunset_slot = get_int(v, "sunset_slot", where, g.sunset_slot);
  g.import_packets = get_int(v, "import_packets", where, 0);
  if (v.contains("trace")) g.trace = get<std::vector<Packets>>(v, "trace", where, {});
  if (v.contains("trace_file")) {
    try {
      g.trace = load_trace_file(base_dir / v.at("trace_file").get<std::string>());
    } catch (const std::exception& e) {
      fail(where + ".trace_file", e.what());
    }
  }
  const double sigma = get<double>(v, "forecast_error_sigma", where, 0.0);
  g.error = {sigma > 0.0, sigma};
  if (g.peak_packets < 0 || g.import_packets < 0) fail(where, "packet counts must be non-negative");
  if (sigma < 0.0) fail(where, "forecast_error_sigma must be non-negative");
  if (g.shape == GenerationShape::SolarDiurnal && !(0 <= g.sunrise_slot && g.sunrise_slot < g.sunset_slot)) {
    fail(where, "solar source needs 0 <= sunrise_slot < sunset_slot");
  }
  if (g.shape == GenerationShape::Trace && g.trace.empty()) fail(where, "trace source needs 'trace' or 'trace_file'");
  for (Packets p : g.trace) {
    if (p < 0) fail(where + ".trace", "entries must be non-negative");
  }
  return g;
}

StorageState parse_storage(const json& v, const std::string& where) {
  only_keys(v, where, {"id", "tier", "soc", "capacity", "charge_rate", "discharge_rate", "eta", "enabled"});
  StorageState s;
  s.id = need<std::string>(v, "id", where);
  const std::string tier = get<std::string>(v, "tier", where, "buffer");
  if (tier == "buffer") {
    s.tier = StorageTier::Buffer;
  } else if (tier == "cache") {
    s.tier = StorageTier::Cache;
  } else {
    fail(where + ".tier", "expected buffer or cache");
  }
  s.soc_packets = get_int(v, "soc", where, 0);
  s.capacity_packets = need_int(v, "capacity", where);
  s.charge_rate = get_int(v, "charge_rate", where, 1);
  s.discharge_rate = get_int(v, "discharge_rate", where, 1);
  const double eta = get<double>(v, "eta", where, 1.0);
  if (!(eta > 0.0 && eta <= 1.0)) fail(where + ".eta", "must lie in (0, 1]");
  s.eta = Fraction::from_double(eta);
  s.enabled = get<bool>(v, "enabled", where, s.tier == StorageTier::Buffer);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
  return s;
}

ShapeConstraint parse_shape(const json& v, const std::string& where) {
  const std::string kind = get<std::string>(v, "shape", where, "arbitrary");
  if (kind == "arbitrary") return ShapeConstraint::arbitrary();
  if (kind == "contiguous") return ShapeConstraint::contiguous();
  if (kind == "per_slot_cap") return ShapeConstraint::capped(need_int(v, "cap", where));
  fail(where + ".shape", "unknown shape '" + kind + "'");
}

RetryPolicy parse_retry(const json& v, const std::string& where, RetryPolicy fallback) {
  if (!v.contains("retry")) return fallback;
  const std::string text = get<std::string>(v, "retry", where, "");
  auto p = parse_retry_policy(text);
  if (!p) fail(where + ".retry", "expected shift, reduce, retry or give_up");
  return *p;
}

LoadConfig parse_load(const json& v, const std::string& where) {
  LoadConfig load;
  const std::string type = need<std::string>(v, "type", where);
  load.id = need<std::string>(v, "id", where);
  if (type == "washing_machine") {
    only_keys(v, where, {"id", "type", "retry", "runs"});
    load.kind = LoadKind::WashingMachine;
    load.retry = parse_retry(v, where, RetryPolicy::ShiftWindow);
    const json runs = v.value("runs", json::array());
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const std::string w = where + ".runs[" + std::to_string(i) + "]";
      only_keys(runs[i], w, {"submit_slot", "packets", "earliest_start", "ready_by"});
      WashingMachineRun run;
      run.program.packets = need_int(runs[i], "packets", w);
      run.program.earliest_start = need_int(runs[i], "earliest_start", w);
      run.program.ready_by_slot = need_int(runs[i], "ready_by", w);
      run.submit_slot = get_int(runs[i], "submit_slot", w, run.program.earliest_start);
      load.washing.push_back(run);
    }
  } else if (type == "heater") {
    only_keys(v, where,
              {"id", "type", "retry", "lookahead", "indoor_temp_c", "t_min_c", "t_max_c", "r_thermal", "c_thermal",
               "heater_w", "occupied", "relax_c"});
    load.kind = LoadKind::Heater;
    load.retry = parse_retry(v, where, RetryPolicy::RetrySame);
    ThermalState& th = load.thermal;
    th.indoor_temp_c = get<double>(v, "indoor_temp_c", where, th.indoor_temp_c);
    th.t_min_c = get<double>(v, "t_min_c", where, th.t_min_c);
    th.t_max_c = get<double>(v, "t_max_c", where, th.t_max_c);
    th.r_thermal = get<double>(v, "r_thermal", where, th.r_thermal);
    th.c_thermal = get<double>(v, "c_thermal", where, th.c_thermal);
    th.heater_w = get<double>(v, "heater_w", where, th.heater_w);
    th.occupied = get<bool>(v, "occupied", where, th.occupied);
    th.unoccupied_relax_c = get<double>(v, "relax_c", where, th.unoccupied_relax_c);
    load.heating_lookahead = get_int(v, "lookahead", where, load.heating_lookahead);
  } else if (type == "ev") {
    only_keys(v, where, {"id", "type", "retry", "sessions"});
    load.kind = LoadKind::Ev;
    load.retry = parse_retry(v, where, RetryPolicy::ReducePackets);
    const json sessions = v.value("sessions", json::array());
    for (std::size_t i = 0; i < sessions.size(); ++i) {
      const std::string w = where + ".sessions[" + std::to_string(i) + "]";
      only_keys(sessions[i], w, {"arrival", "departure", "energy_wh", "max_packets_per_slot"});
      EvSession s;
      s.arrival_slot = need_int(sessions[i], "arrival", w);
      s.departure_slot = need_int(sessions[i], "departure", w);
      s.energy_needed_wh = need<double>(sessions[i], "energy_wh", w);
      s.max_packets_per_slot = need_int(sessions[i], "max_packets_per_slot", w);
      load.sessions.push_back(s);
    }
  } else if (type == "scripted") {
    only_keys(v, where, {"id", "type", "retry", "requests"});
    load.kind = LoadKind::Scripted;
    load.retry = parse_retry(v, where, RetryPolicy::GiveUp);
    const json reqs = v.value("requests", json::array());
    for (std::size_t i = 0; i < reqs.size(); ++i) {
      const std::string w = where + ".requests[" + std::to_string(i) + "]";
      only_keys(reqs[i], w, {"submit_slot", "packets", "earliest", "deadline", "shape", "cap", "priority_hint"});
      ScriptedRequest s;
      s.request.packets = need_int(reqs[i], "packets", w);
      s.request.earliest_slot = need_int(reqs[i], "earliest", w);
      s.request.deadline_slot = need_int(reqs[i], "deadline", w);
      s.request.shape = parse_shape(reqs[i], w);
      if (reqs[i].contains("priority_hint")) s.request.priority_hint = static_cast<int>(need_int(reqs[i], "priority_hint", w));
      s.submit_slot = get_int(reqs[i], "submit_slot", w, s.request.earliest_slot);
      load.scripted.push_back(s);
    }
  } else {
    fail(where + ".type", "unknown load type '" + type + "'");
  }
  return load;
}

RouterPolicy parse_router(const json& v, const std::string& where) {
  only_keys(v, where, {"mode", "local_resources"});
  RouterPolicy r;
  const std::string mode = get<std::string>(v, "mode", where, "forward_only");
  if (mode == "forward_only") {
    r.mode = RouterMode::ForwardOnly;
  } else if (mode == "local_first") {
    r.mode = RouterMode::LocalFirst;
  } else {
    fail(where + ".mode", "expected forward_only or local_first");
  }
  r.local_resources = get<std::vector<std::string>>(v, "local_resources", where, {});
  return r;
}

// Seeded fleet: every household gets each load type with the given probability.
std::vector<HouseholdConfig> generate_fleet(const json& v, SlotIndex horizon, const PacketSpec& spec) {
  const std::string where = "fleet";
  only_keys(v, where, {"households", "seed", "washing_machine", "heater", "ev", "id_prefix"});
  const std::int64_t n = need_int(v, "households", where);
  if (n < 0) fail(where + ".households", "must be non-negative");
  const auto seed = get<std::uint64_t>(v, "seed", where, 1);
  const double p_wm = get<double>(v, "washing_machine", where, 1.0);
  const double p_heat = get<double>(v, "heater", where, 1.0);
  const double p_ev = get<double>(v, "ev", where, 1.0);
  const std::string prefix = get<std::string>(v, "id_prefix", where, "h");
  const SlotIndex per_hour = std::max<SlotIndex>(1, 60 / spec.slot_minutes);
  std::vector<HouseholdConfig> out;
  for (std::int64_t h = 0; h < n; ++h) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(h)));
    auto pick = [&](std::int64_t lo, std::int64_t hi) {
      if (hi <= lo) return lo;
      return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
    };
    auto chance = [&](double p) { return static_cast<double>(rng() % 1000000) < p * 1e6; };
    HouseholdConfig hh;
    hh.id = prefix + std::to_string(h);
    if (chance(p_wm)) {
      LoadConfig wm;
      wm.id = hh.id + "-wm";
      wm.kind = LoadKind::WashingMachine;
      wm.retry = RetryPolicy::ShiftWindow;
      WashingMachineRun run;
      run.program.packets = pick(3, 8);
      run.program.earliest_start = pick(0, std::max<SlotIndex>(0, horizon - 3 * per_hour));
      run.program.ready_by_slot =
          std::min(horizon - 1, run.program.earliest_start + run.program.packets + pick(per_hour, 6 * per_hour));
      run.submit_slot = std::max<SlotIndex>(0, run.program.earliest_start - pick(0, per_hour));
      if (run.program.ready_by_slot - run.program.earliest_start + 1 >= run.program.packets) wm.washing.push_back(run);
      hh.loads.push_back(wm);
    }
    if (chance(p_heat)) {
      LoadConfig heat;
      heat.id = hh.id + "-heat";
      heat.kind = LoadKind::Heater;
      heat.retry = RetryPolicy::RetrySame;
      heat.thermal.t_min_c = 19.0 + static_cast<double>(pick(0, 10)) / 10.0;
      heat.thermal.t_max_c = heat.thermal.t_min_c + 4.0;
      heat.thermal.indoor_temp_c = heat.thermal.t_min_c + static_cast<double>(pick(5, 20)) / 10.0;
      heat.thermal.r_thermal = 1.0;
      heat.thermal.c_thermal = static_cast<double>(pick(18, 30));
      heat.thermal.heater_w = 60.0;
      heat.heating_lookahead = per_hour * 2;
      hh.loads.push_back(heat);
    }
    if (chance(p_ev)) {
      LoadConfig ev;
      ev.id = hh.id + "-ev";
      ev.kind = LoadKind::Ev;
      ev.retry = RetryPolicy::ReducePackets;
      EvSession s;
      s.arrival_slot = pick(0, std::max<SlotIndex>(0, horizon - 4 * per_hour));
      s.departure_slot = std::min(horizon, s.arrival_slot + pick(4 * per_hour, 12 * per_hour));
      s.max_packets_per_slot = pick(2, 4);
      const SlotIndex len = s.departure_slot - s.arrival_slot;
      const Packets most = std::min<Packets>(len * s.max_packets_per_slot, 120);
      s.energy_needed_wh = static_cast<double>(pick(most / 4, most / 2)) * spec.size_wh;
      ev.sessions.push_back(s);
      hh.loads.push_back(ev);
    }
    out.push_back(std::move(hh));
  }
  return out;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  only_keys(doc, "",
            {"name", "packet", "horizon_slots", "horizon_hours", "seed", "source", "baseload", "outdoor_temp_c",
             "storage", "server", "channel", "households", "fleet"});
  ScenarioConfig c;
  c.name = get<std::string>(doc, "name", "", c.name);
  if (doc.contains("packet")) {
    const json& p = doc.at("packet");
    only_keys(p, "packet", {"size_wh", "slot_minutes"});
    c.packet.size_wh = get<double>(p, "size_wh", "packet", c.packet.size_wh);
    c.packet.slot_minutes = get_int(p, "slot_minutes", "packet", c.packet.slot_minutes);
  }
  try {
    c.packet.validate();
  } catch (const std::invalid_argument& e) {
    fail("packet", e.what());
  }
  if (doc.contains("horizon_hours")) {
    try {
      c.horizon_slots = slots_in_horizon(get<double>(doc, "horizon_hours", "", 24.0), c.packet);
    } catch (const std::invalid_argument& e) {
      fail("horizon_hours", e.what());
    }
  }
  c.horizon_slots = get_int(doc, "horizon_slots", "", c.horizon_slots);
  if (c.horizon_slots < 1) fail("horizon_slots", "must be >= 1");
  c.seed = get<std::uint64_t>(doc, "seed", "", c.seed);
  c.source = parse_source(doc.value("source", json::object()), c.packet, "source", base_dir);
  c.baseload = parse_series<Packets>(doc.value("baseload", json(0)), c.horizon_slots, c.packet, "baseload", base_dir);
  c.outdoor_temp_c =
      parse_series<double>(doc.value("outdoor_temp_c", json(10.0)), c.horizon_slots, c.packet, "outdoor_temp_c", base_dir);
  if (doc.contains("storage")) {
    const json& st = doc.at("storage");
    if (!st.is_array()) fail("storage", "expected a list");
    for (std::size_t i = 0; i < st.size(); ++i) c.storage.push_back(parse_storage(st[i], "storage[" + std::to_string(i) + "]"));
  }

  const json server = doc.value("server", json::object());
  only_keys(server, "server",
            {"num_classes", "shares", "slack_thresholds", "ordering", "lookahead", "emergency_budget_per_day",
             "escalation_threshold", "max_attempts", "acks", "flow_job_limit"});
  ServerPolicy& sp = c.server;
  sp.classes.num_classes = static_cast<int>(get_int(server, "num_classes", "server", 2));
  if (server.contains("slack_thresholds")) {
    sp.classes.slack_thresholds = get<std::vector<SlotIndex>>(server, "slack_thresholds", "server", {});
  } else {
    sp.classes.slack_thresholds.clear();
    for (int k = 1; k < sp.classes.num_classes; ++k) sp.classes.slack_thresholds.push_back(6 * k);
  }
  if (server.contains("shares")) {
    const json& sh = server.at("shares");
    if (!sh.is_array()) fail("server.shares", "expected a list");
    sp.shares.clear();
    for (std::size_t i = 0; i < sh.size(); ++i) sp.shares.push_back(parse_share(sh[i], "server.shares"));
  } else {
    sp.shares.clear();
    const int k = std::max(1, sp.classes.num_classes);
    for (int i = 0; i < k; ++i) sp.shares.push_back(Fraction{1, k});
  }
  const std::string ordering = get<std::string>(server, "ordering", "server", "edf");
  auto rule = parse_ordering_rule(ordering);
  if (!rule) fail("server.ordering", "expected edf or fcfs");
  sp.rule = *rule;
  sp.lookahead = get_int(server, "lookahead", "server", std::min<SlotIndex>(144, c.horizon_slots));
  sp.emergency_budget_per_day = static_cast<int>(get_int(server, "emergency_budget_per_day", "server", 1));
  sp.slots_per_day = c.packet.slots_per_day();
  sp.flow_job_limit = static_cast<std::size_t>(get_int(server, "flow_job_limit", "server", 256));
  c.escalation_threshold = static_cast<int>(get_int(server, "escalation_threshold", "server", 3));
  c.max_attempts = static_cast<int>(get_int(server, "max_attempts", "server", 8));
  c.acks = get<bool>(server, "acks", "server", true);

  if (doc.contains("channel")) {
    const json& ch = doc.at("channel");
    only_keys(ch, "channel", {"delay_slots", "loss", "seed"});
    c.channel.delay_slots = get_int(ch, "delay_slots", "channel", 0);
    c.channel.loss = get<double>(ch, "loss", "channel", 0.0);
    c.channel.seed = get<std::uint64_t>(ch, "seed", "channel", c.seed);
  } else {
    c.channel.seed = c.seed;
  }

  if (doc.contains("households")) {
    const json& hs = doc.at("households");
    if (!hs.is_array()) fail("households", "expected a list");
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const std::string w = "households[" + std::to_string(i) + "]";
      only_keys(hs[i], w, {"id", "router", "local_source", "loads"});
      HouseholdConfig h;
      h.id = need<std::string>(hs[i], "id", w);
      if (hs[i].contains("router")) h.router = parse_router(hs[i].at("router"), w + ".router");
      if (hs[i].contains("local_source")) {
        h.local_source = parse_source(hs[i].at("local_source"), c.packet, w + ".local_source", base_dir);
      }
      const json loads = hs[i].value("loads", json::array());
      if (!loads.is_array()) fail(w + ".loads", "expected a list");
      for (std::size_t k = 0; k < loads.size(); ++k) {
        h.loads.push_back(parse_load(loads[k], w + ".loads[" + std::to_string(k) + "]"));
      }
      c.households.push_back(std::move(h));
    }
  }
  if (doc.contains("fleet")) {
    for (auto& h : generate_fleet(doc.at("fleet"), c.horizon_slots, c.packet)) c.households.push_back(std::move(h));
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ScenarioConfig c = parse_scenario(ss.str(), path.parent_path());
  if (c.name == "scenario") c.name = path.stem().string();
  return c;
}

void ScenarioConfig::validate() const {
  try {
    packet.validate();
    channel.validate();
    for (const auto& s : storage) s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (horizon_slots < 1) throw ConfigError("horizon_slots must be >= 1");
  server.validate();
  if (escalation_threshold < 1) throw ConfigError("escalation_threshold must be >= 1");
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  if (static_cast<SlotIndex>(baseload.size()) != horizon_slots) throw ConfigError("baseload must cover the horizon");
  for (Packets b : baseload) {
    if (b < 0) throw ConfigError("baseload entries must be non-negative");
  }
  if (static_cast<SlotIndex>(outdoor_temp_c.size()) != horizon_slots) {
    throw ConfigError("outdoor_temp_c must cover the horizon");
  }
  std::set<std::string> ids{"server"};
  auto claim = [&](const std::string& id, const std::string& what) {
    if (id.empty()) throw ConfigError(what + " id must not be empty");
    if (id.find('/') != std::string::npos) throw ConfigError(what + " id '" + id + "' must not contain '/'");
    if (!ids.insert(id).second) throw ConfigError("duplicate agent id '" + id + "'");
  };
  for (const auto& s : storage) claim(s.id, "storage");
  for (const auto& h : households) {
    claim(h.id, "household");
    try {
      h.router.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("household " + h.id + ": " + e.what());
    }
    if (h.router.mode == RouterMode::LocalFirst && !h.local_source) {
      throw ConfigError("household " + h.id + ": local_first needs a local_source");
    }
    for (const auto& load : h.loads) {
      claim(load.id, "load");
      const std::string w = "load " + load.id + ": ";
      switch (load.kind) {
        case LoadKind::WashingMachine:
          for (const auto& run : load.washing) {
            try {
              washing_machine_request(run.program, packet);
            } catch (const std::invalid_argument& e) {
              throw ConfigError(w + e.what());
            }
            if (run.submit_slot < 0 || run.submit_slot > run.program.earliest_start) {
              throw ConfigError(w + "submit_slot must lie in [0, earliest_start]");
            }
          }
          break;
        case LoadKind::Heater:
          try {
            load.thermal.validate();
          } catch (const std::invalid_argument& e) {
            throw ConfigError(w + e.what());
          }
          if (load.thermal.max_packets_per_slot(packet) < 1) throw ConfigError(w + "heater cannot absorb one packet per slot");
          if (load.heating_lookahead < 1) throw ConfigError(w + "lookahead must be >= 1");
          if (load.retry != RetryPolicy::RetrySame && load.retry != RetryPolicy::GiveUp) {
            throw ConfigError(w + "heaters support retry or give_up only");
          }
          break;
        case LoadKind::Ev:
          for (const auto& s : load.sessions) {
            if (s.arrival_slot < 0) throw ConfigError(w + "arrival must be >= 0");
            if (s.energy_needed_wh < 0) throw ConfigError(w + "energy must be non-negative");
            try {
              ev_request(s, packet);
            } catch (const std::invalid_argument& e) {
              throw ConfigError(w + e.what());
            }
          }
          break;
        case LoadKind::Scripted:
          for (const auto& s : load.scripted) {
            if (s.submit_slot < 0) throw ConfigError(w + "submit_slot must be >= 0");
            if (auto bad = validate_request(s.request, s.submit_slot)) {
              throw ConfigError(w + "invalid request (" + std::string(to_string(*bad)) + ")");
            }
          }
          break;
      }
    }
  }
}

}  // namespace sden

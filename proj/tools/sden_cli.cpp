// sden: validate, run and inspect packetized-energy microgrid scenarios.
//
// Exit codes: 0 ok, 1 runtime or invariant failure, 2 configuration error.
// Every nonzero exit writes one JSON diagnostic line to stderr.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sden/config.hpp"
#include "sden/engine.hpp"
#include "sden/oracle.hpp"
#include "sden/report.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kConfig = 2;

struct Failure {
  int code;
  std::string kind;
  std::string message;
  ordered_json extra = ordered_json::object();
};

int report_failure(const std::string& command, const Failure& f) {
  ordered_json j;
  j["status"] = "error";
  j["command"] = command;
  j["exit_code"] = f.code;
  j["error"] = f.kind;
  j["message"] = f.message;
  for (auto it = f.extra.begin(); it != f.extra.end(); ++it) j[it.key()] = it.value();
  std::cerr << j.dump() << std::endl;
  return f.code;
}

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
};

sden::ScenarioConfig load(const Options& o) {
  sden::ScenarioConfig cfg = sden::load_scenario(o.config);
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

sden::TableFormat format_of(const Options& o) {
  auto f = sden::parse_table_format(o.format);
  if (!f) throw sden::ConfigError("unknown format '" + o.format + "' (table, csv, json-lines)");
  return *f;
}

fs::path out_dir(const Options& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("SDEN_OUT_DIR"); env && *env) return env;
  return "out";
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

template <class Fn>
std::string render(Fn fn) {
  std::ostringstream s;
  fn(s);
  return s.str();
}

// Runs the scenario and aborts (exit 1) if any invariant breaks.
sden::SimResult run_checked(const sden::ScenarioConfig& cfg) {
  sden::SimResult r = sden::run(cfg);
  const auto bad = sden::check_invariants(r);
  if (!bad.empty()) {
    Failure f{kRuntime, "invariant", bad.front()};
    f.extra["violations"] = bad;
    throw f;
  }
  return r;
}

int cmd_validate(const Options& o) {
  const sden::ScenarioConfig cfg = load(o);
  ordered_json j;
  j["status"] = "ok";
  j["scenario"] = cfg.name;
  j["horizon_slots"] = cfg.horizon_slots;
  j["households"] = cfg.households.size();
  j["clients"] = cfg.client_count();
  j["storage_units"] = cfg.storage.size();
  j["num_classes"] = cfg.server.classes.num_classes;
  std::cout << j.dump() << std::endl;
  return kOk;
}

int cmd_run(const Options& o) {
  const sden::ScenarioConfig cfg = load(o);
  const sden::TableFormat fmt = format_of(o);
  const auto t0 = std::chrono::steady_clock::now();
  const sden::SimResult r = run_checked(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  const fs::path dispatch = dir / ("dispatch." + std::string(sden::extension(fmt)));
  const fs::path trace = dir / "trace.jsonl";
  const fs::path kpi = dir / "kpi.json";
  write_file(dispatch, render([&](std::ostream& s) { sden::write_dispatch_table(s, r, fmt); }));
  write_file(trace, render([&](std::ostream& s) { sden::write_trace(s, r); }));
  write_file(kpi, sden::kpi_json(r));
  ordered_json j;
  j["status"] = "ok";
  j["scenario"] = r.scenario;
  j["slots"] = r.dispatch.size();
  j["messages"] = r.trace.size();
  j["acceptance_rate"] = r.kpis.acceptance_rate;
  j["deadline_miss_count"] = r.kpis.deadline_miss_count;
  j["unserved_packets"] = r.kpis.unserved_packets;
  j["seconds"] = secs;
  j["artifacts"] = {dispatch.string(), trace.string(), kpi.string()};
  std::cout << j.dump() << std::endl;
  return kOk;
}

int cmd_kpi(const Options& o) {
  const sden::SimResult r = run_checked(load(o));
  std::cout << sden::kpi_json(r.kpis) << std::endl;
  return kOk;
}

int cmd_export_slices(const Options& o) {
  const sden::ScenarioConfig cfg = load(o);
  const sden::TableFormat fmt = format_of(o);
  const sden::SimResult r = run_checked(cfg);
  const std::string text = render([&](std::ostream& s) { sden::write_slice_table(s, r, fmt); });
  if (o.out.empty() && !std::getenv("SDEN_OUT_DIR")) {
    std::cout << text;
    return kOk;
  }
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  write_file(dir / ("slices." + std::string(sden::extension(fmt))), text);
  return kOk;
}

int cmd_replay(const Options& o) {
  const sden::ScenarioConfig cfg = load(o);
  const sden::SimResult r = sden::run(cfg);
  const sden::ReplayReport rep = sden::replay_check(r, cfg);
  if (!rep.identical) {
    Failure f{kRuntime, "replay_mismatch", rep.detail};
    f.extra["first_divergence_slot"] = rep.first_divergence ? ordered_json(*rep.first_divergence) : ordered_json();
    throw f;
  }
  std::cout << ordered_json{{"status", "ok"}, {"identical", true}, {"messages", r.trace.size()}}.dump() << std::endl;
  return kOk;
}

// Instance file: {"instances": [{"name", "capacity": [..], "requests": [{packets, earliest, deadline, shape, cap}]}]}
std::vector<sden::OracleInstance> load_oracle_instances(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw sden::ConfigError("cannot read " + path.string());
  std::vector<sden::OracleInstance> out;
  try {
    const auto doc = nlohmann::json::parse(in);
    for (const auto& i : doc.at("instances")) {
      sden::OracleInstance inst;
      inst.name = i.value("name", "instance_" + std::to_string(out.size()));
      inst.capacity = i.at("capacity").get<std::vector<sden::Packets>>();
      for (const auto& q : i.at("requests")) {
        sden::ServiceRequest r;
        r.packets = q.at("packets").get<sden::Packets>();
        r.earliest_slot = q.at("earliest").get<sden::SlotIndex>();
        r.deadline_slot = q.at("deadline").get<sden::SlotIndex>();
        const std::string shape = q.value("shape", "arbitrary");
        if (shape == "arbitrary") {
          r.shape = sden::ShapeConstraint::arbitrary();
        } else if (shape == "contiguous") {
          r.shape = sden::ShapeConstraint::contiguous();
        } else if (shape == "per_slot_cap") {
          r.shape = sden::ShapeConstraint::capped(q.at("cap").get<sden::Packets>());
        } else {
          throw sden::ConfigError("unknown shape '" + shape + "'");
        }
        inst.requests.push_back(r);
      }
      out.push_back(std::move(inst));
    }
  } catch (const nlohmann::json::exception& e) {
    throw sden::ConfigError(std::string("oracle instance file: ") + e.what());
  }
  for (const auto& inst : out) {
    try {
      sden::check_oracle_bounds(inst);
    } catch (const std::invalid_argument& e) {
      throw sden::ConfigError(inst.name + ": " + e.what());
    }
  }
  return out;
}

int cmd_oracle_check(const Options& o) {
  const auto suite = o.config.empty() ? sden::bundled_oracle_suite(o.seed.value_or(20240601))
                                      : load_oracle_instances(o.config);
  const sden::OracleReport rep = sden::run_oracle_suite(suite);
  std::cout << sden::oracle_report_json(rep);
  if (rep.accept_infeasible > 0) {
    throw Failure{kRuntime, "unsound_accept", std::to_string(rep.accept_infeasible) + " infeasible requests admitted"};
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Packetized-energy virtual microgrid simulator"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", o.config, "Scenario config (JSON)");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory (default: $SDEN_OUT_DIR or ./out)");
    sub->add_option("--seed", o.seed, "Seed override");
    sub->add_option("--format", o.format, "table | csv | json-lines")
        ->check(CLI::IsMember({"table", "csv", "json-lines"}));
  };
  struct Cmd {
    const char* name;
    const char* help;
    bool needs_config;
    int (*fn)(const Options&);
  };
  const Cmd cmds[] = {
      {"validate", "Parse and validate a scenario", true, cmd_validate},
      {"run", "Run a scenario and write dispatch, trace and KPI artifacts", true, cmd_run},
      {"kpi", "Run a scenario and print its KPI summary", true, cmd_kpi},
      {"oracle-check", "Compare admission with an exhaustive feasibility oracle", false, cmd_oracle_check},
      {"replay", "Run a scenario twice and compare traces byte for byte", true, cmd_replay},
      {"export-slices", "Run a scenario and export the per-slot slice table", true, cmd_export_slices},
  };
  std::vector<std::pair<CLI::App*, const Cmd*>> subs;
  for (const Cmd& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    common(sub, c.needs_config);
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_failure(argc > 1 ? argv[1] : "", {kConfig, "usage", e.what()});
  }

  for (const auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    try {
      return cmd->fn(o);
    } catch (const Failure& f) {
      return report_failure(cmd->name, f);
    } catch (const sden::ConfigError& e) {
      return report_failure(cmd->name, {kConfig, "config", e.what()});
    } catch (const sden::InvariantError& e) {
      return report_failure(cmd->name, {kRuntime, "invariant", e.what()});
    } catch (const std::exception& e) {
      return report_failure(cmd->name, {kRuntime, "runtime", e.what()});
    }
  }
  return kOk;
}

#pragma once

// Scenario configuration: a JSON document describing the packet quantum, the
// source, storage, server policy, channel and the household fleet.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sden/core.hpp"
#include "sden/loads.hpp"
#include "sden/protocol.hpp"
#include "sden/resources.hpp"
#include "sden/server.hpp"

namespace sden {

enum class LoadKind { WashingMachine, Heater, Ev, Scripted };

std::string_view to_string(LoadKind kind);

struct ScriptedRequest {
  SlotIndex submit_slot = 0;
  ServiceRequest request;  // ids and submission slot are assigned when issued
};

struct WashingMachineRun {
  SlotIndex submit_slot = 0;
  WashingMachineProgram program;
};

struct LoadConfig {
  AgentId id;
  LoadKind kind = LoadKind::Scripted;
  RetryPolicy retry = RetryPolicy::GiveUp;
  std::vector<WashingMachineRun> washing;  // WashingMachine
  ThermalState thermal;                    // Heater
  SlotIndex heating_lookahead = 12;        // Heater
  std::vector<EvSession> sessions;         // Ev
  std::vector<ScriptedRequest> scripted;   // Scripted
};

struct HouseholdConfig {
  AgentId id;
  RouterPolicy router;
  /// Household-level source the router may match locally (LocalFirst).
  std::optional<GenerationProfile> local_source;
  std::vector<LoadConfig> loads;
};

struct ScenarioConfig {
  std::string name = "scenario";
  PacketSpec packet;
  SlotIndex horizon_slots = 144;
  std::uint64_t seed = 1;
  GenerationProfile source;
  std::vector<Packets> baseload;     // per slot, length horizon_slots
  std::vector<double> outdoor_temp_c;  // per slot, length horizon_slots
  std::vector<StorageState> storage;
  ServerPolicy server;
  int escalation_threshold = 3;
  int max_attempts = 8;
  bool acks = true;
  ChannelConfig channel;
  std::vector<HouseholdConfig> households;

  /// Throws ConfigError on any schema or referential-integrity problem.
  void validate() const;
  std::size_t client_count() const;
};

/// Parses a scenario document. Relative trace paths resolve against `base_dir`.
/// Throws ConfigError on schema violations.
ScenarioConfig parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

}  // namespace sden

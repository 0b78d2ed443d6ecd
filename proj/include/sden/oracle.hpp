#pragma once

// Exhaustive admission oracle for small instances: one priority class, no
// storage, all requests submitted at slot 0 and admitted in order.

#include <cstdint>
#include <string>
#include <vector>

#include "sden/core.hpp"

namespace sden {

struct OracleBounds {
  SlotIndex max_horizon = 8;
  std::size_t max_requests = 6;
  Packets max_packets = 4;
};

struct OracleInstance {
  std::string name;
  std::vector<Packets> capacity;          // per slot
  std::vector<ServiceRequest> requests;   // admission order
};

/// Throws std::invalid_argument when the instance exceeds `bounds` or is malformed.
void check_oracle_bounds(const OracleInstance& inst, const OracleBounds& bounds = {});

/// True iff some assignment of packets to slots serves every request inside its
/// window, respecting shapes and per-slot capacity (exhaustive search).
bool oracle_feasible(const std::vector<Packets>& capacity, const std::vector<ServiceRequest>& requests);

struct OracleDecision {
  RequestId request_id;
  bool admitted = false;
  bool feasible = false;         // oracle verdict for accepted-so-far + this request
  bool involves_contiguous = false;
};

struct OracleInstanceReport {
  std::string name;
  std::vector<OracleDecision> decisions;
};

struct OracleReport {
  std::vector<OracleInstanceReport> instances;
  // Agreement matrix over decisions: [admitted][feasible].
  std::size_t accept_feasible = 0;
  std::size_t accept_infeasible = 0;  // unsound
  std::size_t reject_feasible = 0;    // conservative
  std::size_t reject_infeasible = 0;
  std::size_t conservative_with_contiguous = 0;

  std::size_t decisions() const { return accept_feasible + accept_infeasible + reject_feasible + reject_infeasible; }
  std::size_t feasible() const { return accept_feasible + reject_feasible; }
  double conservative_ratio() const {
    return feasible() == 0 ? 0.0 : static_cast<double>(reject_feasible) / static_cast<double>(feasible());
  }
};

/// Runs the server's admission on each instance and compares every decision with the oracle.
OracleInstanceReport check_instance(const OracleInstance& inst);
OracleReport run_oracle_suite(const std::vector<OracleInstance>& suite);

/// The bundled 50-instance suite: two hand-built cases plus seeded random ones.
std::vector<OracleInstance> bundled_oracle_suite(std::uint64_t seed = 20240601);

}  // namespace sden

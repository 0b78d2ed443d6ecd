#include "sden/oracle.hpp"

#include <random>
#include <stdexcept>
#include <unordered_set>

#include "sden/resources.hpp"
#include "sden/server.hpp"

namespace sden {

void check_oracle_bounds(const OracleInstance& inst, const OracleBounds& b) {
  const auto h = static_cast<SlotIndex>(inst.capacity.size());
  if (h < 1 || h > b.max_horizon) {
    throw std::invalid_argument("oracle horizon must be 1.." + std::to_string(b.max_horizon) + " slots");
  }
  if (inst.requests.empty() || inst.requests.size() > b.max_requests) {
    throw std::invalid_argument("oracle instances need 1.." + std::to_string(b.max_requests) + " requests");
  }
  for (Packets c : inst.capacity) {
    if (c < 0) throw std::invalid_argument("oracle capacity must be non-negative");
  }
  for (const ServiceRequest& r : inst.requests) {
    if (r.packets < 1 || r.packets > b.max_packets) {
      throw std::invalid_argument("oracle requests need 1.." + std::to_string(b.max_packets) + " packets");
    }
    if (auto bad = validate_request(r, 0)) {
      throw std::invalid_argument("oracle request " + r.request_id + ": " + std::string(to_string(*bad)));
    }
  }
}

namespace {

class Search {
public:
  Search(const std::vector<Packets>& cap, const std::vector<ServiceRequest>& reqs) : cap_(cap), reqs_(reqs) {
    rem_.reserve(reqs.size());
    for (const auto& r : reqs) rem_.push_back(r.packets);
  }

  bool solve() { return slot(0); }

private:
  std::uint64_t key(SlotIndex t) const {
    std::uint64_t k = static_cast<std::uint64_t>(t);
    for (Packets r : rem_) k = k * 64 + static_cast<std::uint64_t>(r);
    return k;
  }

  bool slot(SlotIndex t) {
    if (t == static_cast<SlotIndex>(cap_.size())) {
      for (Packets r : rem_) {
        if (r > 0) return false;
      }
      return true;
    }
    const std::uint64_t k = key(t);
    if (dead_.count(k)) return false;
    if (choose(t, 0, cap_[static_cast<std::size_t>(t)])) return true;
    dead_.insert(k);
    return false;
  }

  // Picks job j's delivery in slot t, then recurses to the next job / slot.
  bool choose(SlotIndex t, std::size_t j, Packets left) {
    if (j == reqs_.size()) {
      for (std::size_t i = 0; i < reqs_.size(); ++i) {
        if (rem_[i] > 0 && reqs_[i].deadline_slot <= t) return false;
      }
      return slot(t + 1);
    }
    const ServiceRequest& r = reqs_[j];
    const Packets rem = rem_[j];
    const bool open = rem > 0 && r.earliest_slot <= t && t <= r.deadline_slot;
    Packets lo = 0, hi = 0;
    if (open) {
      if (r.shape.kind == ShapeKind::Contiguous) {
        const bool started = rem < r.packets;
        lo = started ? 1 : 0;
        hi = (started || t + r.packets - 1 <= r.deadline_slot) ? 1 : 0;
      } else {
        hi = r.shape.slot_limit(rem);
      }
    } else if (r.shape.kind == ShapeKind::Contiguous && rem > 0 && rem < r.packets) {
      return false;  // started block ran past its window
    }
    hi = std::min(hi, left);
    for (Packets x = hi; x >= lo; --x) {
      rem_[j] -= x;
      const bool ok = choose(t, j + 1, left - x);
      rem_[j] += x;
      if (ok) return true;
    }
    return false;
  }

  const std::vector<Packets>& cap_;
  const std::vector<ServiceRequest>& reqs_;
  std::vector<Packets> rem_;
  std::unordered_set<std::uint64_t> dead_;
};

}  // namespace

bool oracle_feasible(const std::vector<Packets>& capacity, const std::vector<ServiceRequest>& requests) {
  for (const auto& r : requests) {
    if (validate_request(r, 0)) return false;
  }
  return Search(capacity, requests).solve();
}

OracleInstanceReport check_instance(const OracleInstance& inst) {
  check_oracle_bounds(inst);
  ServerPolicy policy;
  policy.classes.num_classes = 1;
  policy.classes.slack_thresholds.clear();
  policy.shares = {Fraction{1, 1}};
  policy.lookahead = static_cast<SlotIndex>(inst.capacity.size());
  Inventory inv(policy, inst.capacity, std::vector<Packets>(inst.capacity.size(), 0));

  OracleInstanceReport report;
  report.name = inst.name;
  std::vector<ServiceRequest> accepted;
  for (std::size_t i = 0; i < inst.requests.size(); ++i) {
    ServiceRequest req = inst.requests[i];
    if (req.request_id.empty()) req.request_id = "r" + std::to_string(i);
    if (req.client_id.empty()) req.client_id = "oracle";
    req.submission_slot = 0;
    std::vector<ServiceRequest> with = accepted;
    with.push_back(req);
    OracleDecision d;
    d.request_id = req.request_id;
    d.feasible = oracle_feasible(inst.capacity, with);
    d.admitted = inv.admit(req).accepted();
    for (const auto& r : with) d.involves_contiguous |= r.shape.kind == ShapeKind::Contiguous;
    if (d.admitted) accepted.push_back(req);
    report.decisions.push_back(d);
  }
  return report;
}

OracleReport run_oracle_suite(const std::vector<OracleInstance>& suite) {
  OracleReport out;
  for (const auto& inst : suite) {
    out.instances.push_back(check_instance(inst));
    for (const auto& d : out.instances.back().decisions) {
      if (d.admitted && d.feasible) ++out.accept_feasible;
      if (d.admitted && !d.feasible) ++out.accept_infeasible;
      if (!d.admitted && d.feasible) {
        ++out.reject_feasible;
        if (d.involves_contiguous) ++out.conservative_with_contiguous;
      }
      if (!d.admitted && !d.feasible) ++out.reject_infeasible;
    }
  }
  return out;
}

namespace {

ServiceRequest make(Packets packets, SlotIndex earliest, SlotIndex deadline, ShapeConstraint shape) {
  ServiceRequest r;
  r.packets = packets;
  r.earliest_slot = earliest;
  r.deadline_slot = deadline;
  r.shape = shape;
  return r;
}

}  // namespace

std::vector<OracleInstance> bundled_oracle_suite(std::uint64_t seed) {
  std::vector<OracleInstance> suite;
  suite.push_back({"single_request", {2, 2, 2}, {make(3, 0, 2, ShapeConstraint::arbitrary())}});
  suite.push_back({"oversubscribed",
                   {1, 1, 1},
                   {make(4, 0, 2, ShapeConstraint::arbitrary()), make(4, 0, 2, ShapeConstraint::capped(2))}});
  for (std::uint64_t i = 0; suite.size() < 50; ++i) {
    std::mt19937_64 rng(mix_seed(seed, i));
    auto pick = [&](std::int64_t lo, std::int64_t hi) {
      return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
    };
    OracleInstance inst;
    inst.name = "random_" + std::to_string(i);
    const SlotIndex h = pick(3, 8);
    for (SlotIndex t = 0; t < h; ++t) inst.capacity.push_back(pick(0, 3));
    const auto n = static_cast<std::size_t>(pick(2, 6));
    for (std::size_t k = 0; k < n; ++k) {
      const Packets p = pick(1, 4);
      ShapeConstraint shape;
      switch (pick(0, 2)) {
        case 0: shape = ShapeConstraint::arbitrary(); break;
        case 1: shape = ShapeConstraint::contiguous(); break;
        default: shape = ShapeConstraint::capped(pick(1, 2)); break;
      }
      SlotIndex need = shape.min_slots(p);
      if (need > h) {
        shape = ShapeConstraint::arbitrary();
        need = 1;
      }
      const SlotIndex earliest = pick(0, h - need);
      const SlotIndex deadline = pick(earliest + need - 1, h - 1);
      inst.requests.push_back(make(p, earliest, deadline, shape));
    }
    suite.push_back(std::move(inst));
  }
  return suite;
}

}  // namespace sden

#include <random>

#include "doctest.h"
#include "sden/server.hpp"

using namespace sden;

namespace {

ServiceRequest req(const char* id, Packets p, SlotIndex e, SlotIndex d,
                   ShapeConstraint s = ShapeConstraint::arbitrary()) {
  ServiceRequest r;
  r.request_id = id;
  r.client_id = std::string("c-") + id;
  r.packets = p;
  r.earliest_slot = e;
  r.deadline_slot = d;
  r.shape = s;
  return r;
}

ServerPolicy single_class(SlotIndex lookahead) {
  ServerPolicy p;
  p.classes.num_classes = 1;
  p.classes.slack_thresholds.clear();
  p.shares = {Fraction{1, 1}};
  p.lookahead = lookahead;
  return p;
}

}  // namespace

TEST_CASE("classify by slack") {
  ClassificationPolicy pol;
  auto r = req("a", 1, 0, 0);
  CHECK(classify(r, 0, pol) == 1);  // slack -1... deadline critical
  r.deadline_slot = 1;
  CHECK(request_slack(r, 0) == 0);
  CHECK(classify(r, 0, pol) == 1);
  r.deadline_slot = 101;
  CHECK(request_slack(r, 0) == 100);
  CHECK(classify(r, 0, pol) == 2);
  r.is_emergency = true;
  CHECK(classify(r, 0, pol) == 1);
  r.is_emergency = false;
  r.deadline_slot = 1;
  r.priority_hint = 2;
  CHECK(classify(r, 0, pol) == 2);  // hint demotes
  r.deadline_slot = 101;
  r.priority_hint = 1;
  CHECK(classify(r, 0, pol) == 2);  // but never promotes
}

TEST_CASE("compute_availability") {
  InventoryForecast f;
  f.generation = {10, 2, 10};
  f.baseload = {3, 5, 0};
  f.locked_contiguous = {2, 0, 0};
  CHECK(compute_availability(f, {0, 3}) == std::vector<Packets>{5, 0, 10});
  CHECK_THROWS_AS(compute_availability(f, {0, 4}), std::invalid_argument);
}

TEST_CASE("slicing") {
  const std::vector<Fraction> sixty{Fraction{3, 5}, Fraction{2, 5}};
  const std::vector<Fraction> half{Fraction{1, 2}, Fraction{1, 2}};
  CHECK(split_capacity(5, sixty) == std::vector<Packets>{3, 2});
  CHECK(split_capacity(5, half) == std::vector<Packets>{3, 2});
  CHECK(split_capacity(0, half) == std::vector<Packets>{0, 0});
  const std::vector<Fraction> short_{Fraction{1, 2}, Fraction{2, 5}};
  CHECK_THROWS_WITH_AS(validate_shares(short_), "shares must sum to 1", ConfigError);

  StorageState s;
  s.capacity_packets = 10;
  s.soc_packets = 3;
  s.discharge_rate = 2;
  const std::vector<StorageState> units{s};
  const std::vector<Packets> caps{5, 0, 4};
  const auto plan = plan_slices(caps, half, units, std::vector<Packets>{1, 0, 0});
  CHECK(plan.per_class[0] == std::vector<Packets>{3, 2});
  CHECK(plan.per_class[1] == std::vector<Packets>{0, 0});
  // soc 3: 1 reserved for baseload in slot 0, the other 2 front-loaded at 1 + 1 (rate 2, 1 used).
  CHECK(plan.storage_extension == std::vector<Packets>{1, 1, 0});

  const auto proj = project_storage(units, std::vector<Packets>{0, 0, 0}, std::vector<Packets>{0, 3, 0}, 3);
  CHECK(proj.must_cover_short == std::vector<Packets>{0, 1, 0});
  CHECK(proj.extension == std::vector<Packets>{1, 0, 0});
}

TEST_CASE("plan_storage greedy rule") {
  StorageState s;
  s.capacity_packets = 10;
  s.charge_rate = 2;
  s.discharge_rate = 5;
  auto a = plan_storage(std::vector<Packets>{4}, std::vector<Packets>{0}, {s});
  CHECK(a[0][0] == 2);

  s.soc_packets = 1;
  a = plan_storage(std::vector<Packets>{0}, std::vector<Packets>{3}, {s});
  CHECK(a[0][0] == -1);

  StorageState eta;
  eta.capacity_packets = 20;
  eta.charge_rate = 10;
  eta.eta = Fraction{9, 10};
  a = plan_storage(std::vector<Packets>{10}, std::vector<Packets>{0}, {eta});
  CHECK(a[0][0] == 10);
  CHECK(apply_storage_action(eta, a[0][0]).soc_packets == 9);
}

TEST_CASE("allocate one slot") {
  SlotSlices sl;
  sl.per_class = {2, 0};
  std::vector<PendingDemand> pending{{"B", 1, false, false, 5, 0, 1}, {"A", 1, false, false, 3, 0, 1}};
  auto out = allocate(sl, pending);
  REQUIRE(out.assignments.size() == 2);
  CHECK(out.assignments[0].request_id == "A");
  CHECK(out.assignments[1].request_id == "B");

  sl.per_class = {1, 0};
  out = allocate(sl, pending);
  REQUIRE(out.assignments.size() == 1);
  CHECK(out.assignments[0].request_id == "A");
  CHECK(out.unplaced == 1);

  out = allocate(sl, {});
  CHECK(out.assignments.empty());
  CHECK(out.slice_left == std::vector<Packets>{1, 0});

  // Overflow borrows the other slice, then storage, and logs it.
  sl.per_class = {1, 1};
  sl.storage_extension = 2;
  std::vector<PendingDemand> heavy{{"X", 1, false, false, 3, 0, 4}};
  out = allocate(sl, heavy);
  CHECK(out.delivered() == 4);
  CHECK(out.per_class[0].own == 1);
  CHECK(out.per_class[0].borrowed_slices == 1);
  CHECK(out.per_class[0].borrowed_storage == 2);

  // FCFS orders by submission.
  std::vector<PendingDemand> two{{"late", 1, false, false, 2, 5, 1}, {"early", 1, false, false, 9, 1, 1}};
  sl = {};
  sl.per_class = {1};
  CHECK(allocate(sl, two, OrderingRule::FirstCome).assignments[0].request_id == "early");
  CHECK(allocate(sl, two, OrderingRule::EarliestDeadline).assignments[0].request_id == "late");
}

TEST_CASE("admission against residual capacity") {
  Inventory inv(single_class(5), std::vector<Packets>(5, 2), std::vector<Packets>(5, 0));
  CHECK(inv.admit(req("a", 5, 0, 4)).accepted());

  Inventory inv2(single_class(5), std::vector<Packets>(5, 2), std::vector<Packets>(5, 0));
  const auto d = inv2.admit(req("b", 11, 0, 4));
  CHECK_FALSE(d.accepted());
  CHECK(d.reason == "InsufficientCapacity");
  CHECK(d.hint.max_packets_feasible_now == 10);

  Inventory none(single_class(5), std::vector<Packets>(5, 0), std::vector<Packets>(5, 0));
  CHECK_FALSE(none.admit(req("c", 1, 0, 4)).accepted());

  Inventory past(single_class(5), std::vector<Packets>(5, 2), std::vector<Packets>(5, 0));
  past.begin_slot(2, {});
  CHECK(past.admit(req("d", 1, 0, 4)).reason == "WindowInPast");
  CHECK(past.admit(req("e", 1, 5, 9)).reason == "BeyondHorizon");
  CHECK_THROWS(admit(req("f", 1, 3, 4), past, 1));
  CHECK(admit(req("f", 1, 3, 4), past, 2).accepted());
}

TEST_CASE("contiguous blocks pin capacity") {
  Inventory inv(single_class(4), std::vector<Packets>{1, 1, 1, 1}, std::vector<Packets>(4, 0));
  CHECK(inv.admit(req("w", 2, 0, 3, ShapeConstraint::contiguous())).accepted());
  CHECK(inv.admit(req("a", 2, 0, 3)).accepted());
  CHECK_FALSE(inv.admit(req("b", 1, 0, 3)).accepted());
  REQUIRE(inv.job("w"));
  CHECK(inv.job("w")->next_slot.has_value());
}

TEST_CASE("emergency handling") {
  // 2 classes, 2 packets per slot -> slices 1 + 1 over 3 slots.
  ServerPolicy pol;
  pol.classes.slack_thresholds = {0};
  pol.lookahead = 3;
  Inventory inv(pol, std::vector<Packets>(3, 2), std::vector<Packets>(3, 0));
  auto filler = req("fill", 3, 0, 2);
  filler.priority_hint = 2;
  REQUIRE(inv.admit(filler).assigned_class == 2);

  const auto r = req("r", 2, 0, 2);
  CHECK(classify(r, 0, pol.classes) == 2);
  CHECK_FALSE(inv.fits(r, 2, false));
  EmergencyLedger ledger(1, 144);
  auto e = r;
  e.is_emergency = true;
  const auto d = handle_emergency(e, inv, ledger, 0);
  CHECK(d.accepted());
  CHECK(d.assigned_class == 1);
  CHECK(ledger.used("c-r", 0) == 1);

  // Budget spent: the next emergency of the day is treated as ordinary.
  auto e2 = req("r2", 1, 1, 2);
  e2.client_id = "c-r";
  e2.is_emergency = true;
  const auto d2 = handle_emergency(e2, inv, ledger, 0);
  CHECK(d2.demoted_emergency);
  CHECK(ledger.used("c-r", 0) == 1);
  CHECK(ledger.within_budget("c-r", 144));  // next day

  // No energy anywhere.
  Inventory dark(pol, std::vector<Packets>(3, 0), std::vector<Packets>(3, 0));
  EmergencyLedger l2;
  CHECK_FALSE(handle_emergency(e, dark, l2, 0).accepted());
  CHECK(l2.used("c-r", 0) == 0);
}

TEST_CASE("emergency reaches storage") {
  ServerPolicy pol = single_class(3);
  Inventory inv(pol, std::vector<Packets>(3, 0), std::vector<Packets>(3, 0));
  StorageState s;
  s.capacity_packets = 5;
  s.soc_packets = 2;
  s.discharge_rate = 1;
  const std::vector<StorageState> units{s};
  inv.begin_slot(0, units);
  auto e = req("e", 2, 0, 2);
  e.is_emergency = true;
  EmergencyLedger ledger;
  CHECK(handle_emergency(e, inv, ledger, 0).accepted());
}

// Under a perfect forecast every accepted request is fully delivered by its deadline.
TEST_CASE("accepted work completes on time") {
  std::mt19937_64 rng(11);
  auto pick = [&](std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  for (int trial = 0; trial < 300; ++trial) {
    const SlotIndex h = pick(4, 12);
    std::vector<Packets> gen(static_cast<std::size_t>(h));
    for (auto& g : gen) g = pick(0, 5);
    ServerPolicy pol;
    pol.classes.slack_thresholds = {static_cast<SlotIndex>(pick(0, 4))};
    pol.lookahead = h;
    Inventory inv(pol, gen, std::vector<Packets>(static_cast<std::size_t>(h), 0));
    std::map<RequestId, ServiceRequest> accepted;
    std::map<RequestId, Packets> got;
    int id = 0;
    for (SlotIndex now = 0; now < h; ++now) {
      inv.begin_slot(now, {});
      for (int k = pick(0, 2); k > 0; --k) {
        ShapeConstraint shape;
        switch (pick(0, 2)) {
          case 0: shape = ShapeConstraint::arbitrary(); break;
          case 1: shape = ShapeConstraint::contiguous(); break;
          default: shape = ShapeConstraint::capped(pick(1, 3)); break;
        }
        const Packets p = pick(1, 6);
        const SlotIndex e = pick(now, h - 1);
        const SlotIndex d = pick(e, h - 1);
        auto r = req(("r" + std::to_string(id++)).c_str(), p, e, d, shape);
        r.submission_slot = now;
        if (validate_request(r, now)) continue;
        if (inv.admit(r).accepted()) accepted[r.request_id] = r;
      }
      const auto plan = inv.plan_current_slot();
      Packets total = 0;
      for (const auto& [rid, n] : plan.planned) {
        const auto& r = accepted.at(rid);
        CHECK(now >= r.earliest_slot);
        CHECK(now <= r.deadline_slot);
        CHECK(n <= r.shape.slot_limit(r.packets));
        got[rid] += n;
        total += n;
      }
      CHECK(total <= gen[static_cast<std::size_t>(now)]);
      const auto events = inv.record_delivery(plan.planned);
      CHECK(events.empty());
    }
    for (const auto& [rid, r] : accepted) CHECK(got[rid] == r.packets);
  }
}

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sden/resources.hpp"

using namespace sden;

TEST_CASE("fractions") {
  CHECK(Fraction::from_double(0.6) == Fraction{3, 5});
  CHECK(Fraction{1, 3} + Fraction{2, 3} == Fraction{1, 1});
  CHECK(Fraction{9, 10}.floor_times(10) == 9);
  CHECK(Fraction{1, 2}.floor_times(5) == 2);
}

TEST_CASE("forecast_generation shapes") {
  GenerationProfile c;
  c.peak_packets = 5;
  CHECK(forecast_generation(c, {0, 3}, 1) == std::vector<Packets>{5, 5, 5});

  GenerationProfile sun;
  sun.shape = GenerationShape::SolarDiurnal;
  sun.peak_packets = 10;
  CHECK(forecast_generation(sun, {0, 1}, 1)[0] == 0);          // midnight
  CHECK(forecast_generation(sun, {78, 79}, 1)[0] == 10);       // (36 + 120) / 2
  CHECK(forecast_generation(sun, {144 + 78, 144 + 79}, 1)[0] == 10);  // next day

  GenerationProfile tr;
  tr.shape = GenerationShape::Trace;
  tr.trace = {1, 2};
  tr.import_packets = 1;
  CHECK(forecast_generation(tr, {0, 4}, 1) == std::vector<Packets>{2, 3, 1, 1});
}

TEST_CASE("realize_generation") {
  const std::vector<Packets> f{10, 10, 0, 7};
  CHECK(realize_generation(f, {}, 3) == f);
  CHECK(realize_generation(f, {true, 0.0}, 3) == f);
  const auto a = realize_generation(f, {true, 0.2}, 42);
  const auto b = realize_generation(f, {true, 0.2}, 42);
  CHECK(a == b);
  CHECK(a[2] == 0);
  for (Packets p : a) CHECK(p >= 0);
  // Slot-keyed noise: realizing a suffix alone gives the same values.
  const auto tail = realize_generation(std::vector<Packets>{0, 7}, {true, 0.2}, 42, 2);
  CHECK(tail[1] == a[3]);
  // Different seeds differ somewhere over a long run.
  const std::vector<Packets> many(64, 20);
  CHECK(realize_generation(many, {true, 0.2}, 1) != realize_generation(many, {true, 0.2}, 2));
}

TEST_CASE("storage actions") {
  StorageState s;
  s.capacity_packets = 10;
  s.soc_packets = 5;
  s.charge_rate = 2;
  s.discharge_rate = 6;
  CHECK(apply_storage_action(s, 2).soc_packets == 7);
  s.discharge_rate = 10;
  CHECK_THROWS_AS(apply_storage_action(s, -6), std::invalid_argument);
  CHECK_THROWS_AS(apply_storage_action(s, 3), std::invalid_argument);  // over rate

  StorageState h;
  h.capacity_packets = 4;
  h.eta = Fraction{1, 2};
  h.charge_rate = 2;
  auto one = apply_storage_action(h, 1);
  CHECK(one.soc_packets == 0);
  CHECK(apply_storage_action(one, 1).soc_packets == 1);

  StorageState n;
  n.capacity_packets = 20;
  n.charge_rate = 10;
  n.eta = Fraction{9, 10};
  CHECK(apply_storage_action(n, 10).soc_packets == 9);
  CHECK(n.stored_for(10) == 9);

  StorageState full;
  full.capacity_packets = 3;
  full.soc_packets = 3;
  full.charge_rate = 2;
  CHECK(full.max_charge() == 0);
  CHECK(full.max_discharge() == 1);
}

TEST_CASE("trace files") {
  const auto path = std::filesystem::temp_directory_path() / "sden_trace_test.csv";
  {
    std::ofstream f(path);
    f << "slot,packets\n0,3\n2,5 # comment\n";
  }
  CHECK(load_trace_file(path) == std::vector<Packets>{3, 0, 5});
  std::filesystem::remove(path);
  CHECK_THROWS(load_trace_file(path));
}

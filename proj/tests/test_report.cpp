#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "sden/config.hpp"
#include "sden/report.hpp"

using namespace sden;

namespace {

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("formats") {
  CHECK(parse_table_format("csv") == TableFormat::Csv);
  CHECK(parse_table_format("json-lines") == TableFormat::JsonLines);
  CHECK(parse_table_format("table") == TableFormat::Table);
  CHECK_FALSE(parse_table_format("xml"));
  CHECK(extension(TableFormat::JsonLines) == "jsonl");
}

TEST_CASE("dispatch table") {
  const auto r = run(load_scenario("configs/fig5_30slots.json"));
  std::ostringstream csv;
  write_dispatch_table(csv, r, TableFormat::Csv);
  const auto rows = lines(csv.str());
  REQUIRE(rows.size() == 31);
  CHECK(rows[0].rfind("slot,gen_forecast,gen_actual,baseload,class1_alloc,class2_alloc,charge,discharge,soc,spill", 0) == 0);
  CHECK(rows[1].rfind("0,", 0) == 0);

  std::ostringstream jl;
  write_dispatch_table(jl, r, TableFormat::JsonLines);
  const auto objs = lines(jl.str());
  REQUIRE(objs.size() == 30);
  const auto j = nlohmann::json::parse(objs[5]);
  CHECK(j.at("slot") == 5);
  CHECK(j.at("soc") == r.dispatch[5].soc);

  std::ostringstream table;
  write_dispatch_table(table, r, TableFormat::Table);
  CHECK(lines(table.str()).size() == 31);
}

TEST_CASE("slice table and trace") {
  const auto r = run(load_scenario("configs/fig5_30slots.json"));
  std::ostringstream csv;
  write_slice_table(csv, r, TableFormat::Csv);
  const auto rows = lines(csv.str());
  REQUIRE(rows.size() == 31);
  CHECK(rows[0].find("class2_borrowed_storage") != std::string::npos);

  std::ostringstream trace;
  write_trace(trace, r);
  const auto t = lines(trace.str());
  REQUIRE(t.size() == r.trace.size());
  CHECK(trace_record_from_json_line(t.front()).msg == r.trace.front().msg);
}

TEST_CASE("kpi document") {
  const auto r = run(load_scenario("configs/emergency_escalation.json"));
  const auto j = nlohmann::json::parse(kpi_json(r));
  CHECK(j.at("scenario") == "emergency_escalation");
  CHECK(j.at("kpis").at("emergency_count") == r.kpis.emergency_count);
  CHECK(j.at("event_counts").at("EmergencyAdmitted") == 1);
  CHECK(j.at("events").size() == r.events.size());
  CHECK(nlohmann::json::parse(kpi_json(r.kpis)).at("accepts") == r.kpis.accepts);
}

#include "sden/report.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"

namespace sden {

using nlohmann::ordered_json;

std::optional<TableFormat> parse_table_format(std::string_view text) {
  if (text == "table") return TableFormat::Table;
  if (text == "csv") return TableFormat::Csv;
  if (text == "json-lines" || text == "jsonl") return TableFormat::JsonLines;
  return std::nullopt;
}

std::string_view extension(TableFormat format) {
  switch (format) {
    case TableFormat::Table: return "txt";
    case TableFormat::Csv: return "csv";
    case TableFormat::JsonLines: return "jsonl";
  }
  return "txt";
}

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Packets>> rows;
};

void render(std::ostream& out, const Table& t, TableFormat format) {
  switch (format) {
    case TableFormat::Csv:
      for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
      out << '\n';
      for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
      }
      break;
    case TableFormat::JsonLines:
      for (const auto& row : t.rows) {
        ordered_json j = ordered_json::object();
        for (std::size_t i = 0; i < row.size(); ++i) j[t.header[i]] = row[i];
        out << j.dump() << '\n';
      }
      break;
    case TableFormat::Table: {
      std::vector<std::size_t> width(t.header.size());
      for (std::size_t i = 0; i < t.header.size(); ++i) width[i] = t.header[i].size();
      for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], std::to_string(row[i]).size());
      }
      for (std::size_t i = 0; i < t.header.size(); ++i) {
        out << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << t.header[i];
      }
      out << '\n';
      for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
          out << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << row[i];
        }
        out << '\n';
      }
      break;
    }
  }
}

std::string cls(std::size_t c, const char* suffix) { return "class" + std::to_string(c + 1) + suffix; }

}  // namespace

void write_dispatch_table(std::ostream& out, const SimResult& result, TableFormat format) {
  const auto k = static_cast<std::size_t>(std::max(result.num_classes, 2));
  Table t;
  t.header = {"slot", "gen_forecast", "gen_actual", "baseload"};
  for (std::size_t c = 0; c < k; ++c) t.header.push_back(cls(c, "_alloc"));
  for (const char* h : {"charge", "discharge", "soc", "spill", "baseload_unserved", "locked", "extras", "cut",
                        "stored", "local_gen", "local_served", "local_spill"}) {
    t.header.push_back(h);
  }
  for (const DispatchRecord& d : result.dispatch) {
    std::vector<Packets> row{d.slot, d.gen_forecast, d.gen_actual, d.baseload};
    for (std::size_t c = 0; c < k; ++c) row.push_back(c < d.class_alloc.size() ? d.class_alloc[c] : 0);
    for (Packets v : {d.charge, d.discharge, d.soc, d.spill, d.baseload_unserved, d.locked, d.extras, d.cut, d.stored,
                      d.local_gen, d.local_served, d.local_spill}) {
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  render(out, t, format);
}

void write_slice_table(std::ostream& out, const SimResult& result, TableFormat format) {
  const auto k = static_cast<std::size_t>(result.num_classes);
  Table t;
  t.header = {"slot", "capacity", "capacity_actual", "capacity_total", "locked_capacity", "locked",
              "locked_from_storage", "storage_extension"};
  for (std::size_t c = 0; c < k; ++c) {
    for (const char* s : {"_slice", "_own", "_borrowed_slices", "_borrowed_storage", "_allocated"}) {
      t.header.push_back(cls(c, s));
    }
  }
  t.header.push_back("delivered");
  t.header.push_back("discharge");
  for (const SliceRecord& s : result.slices) {
    std::vector<Packets> row{s.slot,   s.capacity,           s.capacity_actual,  s.capacity_total, s.locked_capacity,
                             s.locked, s.locked_from_storage, s.storage_extension};
    for (std::size_t c = 0; c < k; ++c) {
      row.push_back(s.slice[c]);
      row.push_back(s.own[c]);
      row.push_back(s.borrowed_slices[c]);
      row.push_back(s.borrowed_storage[c]);
      row.push_back(s.allocated[c]);
    }
    row.push_back(s.delivered);
    row.push_back(s.discharge);
    t.rows.push_back(std::move(row));
  }
  render(out, t, format);
}

void write_trace(std::ostream& out, const SimResult& result) {
  for (const TraceRecord& r : result.trace) out << to_json_line(r) << '\n';
}

namespace {

ordered_json kpis_to_json(const KpiSet& k) {
  ordered_json j;
  j["requests"] = k.requests;
  j["accepts"] = k.accepts;
  j["rejects"] = k.rejects;
  j["acceptance_rate"] = k.acceptance_rate;
  j["rejection_rate"] = k.rejection_rate;
  j["no_demand"] = k.no_demand;
  j["emergency_count"] = k.emergency_count;
  j["deadline_miss_count"] = k.deadline_miss_count;
  j["delivered_packets"] = k.delivered_packets;
  j["late_packets"] = k.late_packets;
  j["unserved_packets"] = k.unserved_packets;
  j["baseload_unserved"] = k.baseload_unserved;
  j["spill_packets"] = k.spill_packets;
  j["storage_cycles"] = k.storage_cycles;
  j["mean_request_latency_slots"] = k.mean_request_latency_slots;
  j["class_utilization"] = k.class_utilization;
  return j;
}

}  // namespace

std::string kpi_json(const KpiSet& kpis) { return kpis_to_json(kpis).dump(2); }

std::string kpi_json(const SimResult& result, const std::vector<std::string>& invariant_violations) {
  ordered_json j;
  j["scenario"] = result.scenario;
  j["slots"] = result.dispatch.size();
  j["kpis"] = kpis_to_json(result.kpis);
  std::map<std::string, std::size_t> counts;
  for (const SimEvent& e : result.events) ++counts[e.kind];
  j["event_counts"] = counts;
  ordered_json events = ordered_json::array();
  for (const SimEvent& e : result.events) {
    ordered_json ev;
    ev["slot"] = e.slot;
    ev["kind"] = e.kind;
    if (!e.request_id.empty()) ev["request_id"] = e.request_id;
    if (!e.agent.empty()) ev["agent"] = e.agent;
    if (!e.detail.empty()) ev["detail"] = e.detail;
    events.push_back(std::move(ev));
  }
  j["events"] = std::move(events);
  j["invariant_violations"] = invariant_violations;
  return j.dump(2) + "\n";
}

std::string oracle_report_json(const OracleReport& report) {
  ordered_json j;
  j["instances"] = report.instances.size();
  j["decisions"] = report.decisions();
  j["matrix"] = {{"accept_feasible", report.accept_feasible},
                 {"accept_infeasible", report.accept_infeasible},
                 {"reject_feasible", report.reject_feasible},
                 {"reject_infeasible", report.reject_infeasible}};
  j["unsound_accepts"] = report.accept_infeasible;
  j["conservative_rejects"] = report.reject_feasible;
  j["conservative_with_contiguous"] = report.conservative_with_contiguous;
  j["conservative_ratio"] = report.conservative_ratio();
  ordered_json conservative = ordered_json::array();
  ordered_json unsound = ordered_json::array();
  for (const auto& inst : report.instances) {
    for (const auto& d : inst.decisions) {
      ordered_json e{{"instance", inst.name}, {"request_id", d.request_id}, {"contiguous", d.involves_contiguous}};
      if (!d.admitted && d.feasible) conservative.push_back(e);
      if (d.admitted && !d.feasible) unsound.push_back(e);
    }
  }
  j["conservative"] = std::move(conservative);
  j["unsound"] = std::move(unsound);
  return j.dump(2) + "\n";
}

}  // namespace sden

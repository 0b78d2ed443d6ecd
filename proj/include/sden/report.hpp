#pragma once

// Text renderings of a finished run: dispatch and slice tables, the message
// trace and the KPI summary.

#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "sden/engine.hpp"
#include "sden/oracle.hpp"

namespace sden {

enum class TableFormat { Table, Csv, JsonLines };

std::optional<TableFormat> parse_table_format(std::string_view text);
/// File extension for artifacts written in `format` ("txt", "csv", "jsonl").
std::string_view extension(TableFormat format);

void write_dispatch_table(std::ostream& out, const SimResult& result, TableFormat format);
void write_slice_table(std::ostream& out, const SimResult& result, TableFormat format);
void write_trace(std::ostream& out, const SimResult& result);

/// KPI summary document (JSON), including per-kind event counts and the event log.
std::string kpi_json(const SimResult& result, const std::vector<std::string>& invariant_violations = {});
std::string kpi_json(const KpiSet& kpis);

std::string oracle_report_json(const OracleReport& report);

}  // namespace sden

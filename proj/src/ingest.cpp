#include "distress/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <unordered_map>

#include "distress/error.hpp"
#include "distress/io.hpp"

namespace distress {

namespace {

bool is_missing_token(std::string_view text) {
  text = io::trim(text);
  if (text.empty()) return true;
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower == "na" || lower == "n/a" || lower == "nan" || lower == "null" || lower == "-";
}

std::optional<bool> parse_bool(std::string_view text) {
  text = io::trim(text);
  if (text == "1" || text == "true" || text == "TRUE" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "FALSE" || text == "no") return false;
  return std::nullopt;
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<DistressEventKind> parse_event_kind(std::string_view text) {
  const auto k = lowercase(io::trim(text));
  if (k == "pre-distress" || k == "predistress" || k == "pre_distress" || k == "pre distress") {
    return DistressEventKind::PreDistress;
  }
  if (k == "bankruptcy" || k == "distress") return DistressEventKind::Bankruptcy;
  return std::nullopt;
}

/// Maps header names to field positions; throws SchemaError on a gap.
std::vector<std::size_t> locate_columns(const std::vector<std::string>& header,
                                        const std::vector<std::string>& wanted,
                                        const std::function<std::string(const std::string&)>& rename) {
  std::vector<std::size_t> positions;
  positions.reserve(wanted.size());
  for (const auto& canonical : wanted) {
    const auto name = rename(canonical);
    const auto it = std::find_if(header.begin(), header.end(), [&](const std::string& h) {
      return io::trim(h) == name;
    });
    if (it == header.end()) throw SchemaError(name);
    positions.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  return positions;
}

double median_of(std::vector<double> values) {
  const auto n = values.size();
  std::sort(values.begin(), values.end());
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

std::string PanelSchema::header_for(const std::string& canonical) const {
  const auto it = renames.find(canonical);
  return it == renames.end() ? canonical : it->second;
}

const std::vector<std::string>& panel_columns() {
  static const std::vector<std::string> columns = [] {
    std::vector<std::string> c = {"municipality_id", "year", "population", "geo_area"};
    for (const auto indicator : kIndicators) c.emplace_back(to_string(indicator));
    c.emplace_back("off_balance_sheet_debts");
    return c;
  }();
  return columns;
}

std::string_view to_string(DiagnosticKind kind) noexcept {
  switch (kind) {
    case DiagnosticKind::MissingValue: return "missing-value";
    case DiagnosticKind::MalformedRow: return "malformed-row";
    case DiagnosticKind::UnknownMunicipality: return "unknown-municipality";
    case DiagnosticKind::OutOfRange: return "out-of-range";
  }
  return "unknown";
}

PanelParseResult parse_financial_panel(std::istream& source, const PanelSchema& schema) {
  if (!source) throw IoError("panel stream is not readable");
  std::string line;
  if (!io::read_line(source, line)) throw IoError("panel stream is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = io::split_delimited(line, schema.delimiter);
  const auto& columns = panel_columns();
  const auto pos = locate_columns(header, columns,
                                  [&](const std::string& c) { return schema.header_for(c); });
  enum : std::size_t { kId, kYear, kPopulation, kGeo, kFirstIndicator };
  const std::size_t off_balance_slot = kFirstIndicator + kIndicatorCount;

  PanelParseResult result;
  std::size_t line_no = 1;
  while (io::read_line(source, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    const auto fields = io::split_delimited(line, schema.delimiter);
    auto malformed = [&](const std::string& column, const std::string& why) {
      result.diagnostics.push_back({DiagnosticKind::MalformedRow, line_no, column, why});
    };
    if (fields.size() != header.size()) {
      malformed("", "expected " + std::to_string(header.size()) + " fields, found " +
                        std::to_string(fields.size()));
      continue;
    }
    auto cell = [&](std::size_t slot) -> std::string_view { return fields[pos[slot]]; };

    CandidateRow row;
    row.line = line_no;
    row.municipality_id = std::string(io::trim(cell(kId)));
    if (row.municipality_id.empty()) {
      malformed(columns[kId], "empty municipality_id");
      continue;
    }
    const auto year = io::parse_integer(cell(kYear));
    if (!year) {
      malformed(columns[kYear], "unparsable year '" + std::string(cell(kYear)) + "'");
      continue;
    }
    row.year = static_cast<int>(*year);
    const auto geo = parse_geo_area(lowercase(io::trim(cell(kGeo))));
    if (!geo) {
      malformed(columns[kGeo], "unknown geo_area '" + std::string(cell(kGeo)) + "'");
      continue;
    }
    row.geo_area = *geo;

    bool bad = false;
    std::vector<Diagnostic> missing;
    auto note_missing = [&](std::size_t slot) {
      missing.push_back({DiagnosticKind::MissingValue, line_no, columns[slot],
                         "missing value '" + std::string(cell(slot)) + "'"});
    };
    if (is_missing_token(cell(kPopulation))) {
      note_missing(kPopulation);
    } else if (const auto p = io::parse_integer(cell(kPopulation))) {
      row.population = *p;
    } else {
      malformed(columns[kPopulation], "unparsable population '" + std::string(cell(kPopulation)) + "'");
      bad = true;
    }
    for (std::size_t k = 0; k < kIndicatorCount && !bad; ++k) {
      const auto slot = kFirstIndicator + k;
      if (is_missing_token(cell(slot))) {
        note_missing(slot);
      } else if (const auto v = io::parse_double(cell(slot)); v && std::isfinite(*v)) {
        row.indicators[k] = *v;
      } else {
        malformed(columns[slot], "unparsable number '" + std::string(cell(slot)) + "'");
        bad = true;
      }
    }
    if (!bad) {
      if (is_missing_token(cell(off_balance_slot))) {
        note_missing(off_balance_slot);
      } else if (const auto b = parse_bool(cell(off_balance_slot))) {
        row.off_balance_sheet_debts = *b;
      } else {
        malformed(columns[off_balance_slot],
                  "unparsable boolean '" + std::string(cell(off_balance_slot)) + "'");
        bad = true;
      }
    }
    if (bad) continue;
    result.diagnostics.insert(result.diagnostics.end(), missing.begin(), missing.end());
    result.rows.push_back(std::move(row));
  }
  if (source.bad()) throw IoError("error while reading panel stream");
  return result;
}

DistressArchive DistressArchive::from_events(std::vector<DistressEvent> events) {
  DistressArchive archive;
  std::sort(events.begin(), events.end());
  const auto last = std::unique(events.begin(), events.end());
  archive.duplicates_removed = static_cast<std::size_t>(events.end() - last);
  events.erase(last, events.end());
  archive.events = std::move(events);
  return archive;
}

DistressArchive parse_distress_archive(std::istream& source, char delimiter) {
  if (!source) throw IoError("archive stream is not readable");
  std::string line;
  if (!io::read_line(source, line)) throw IoError("archive stream is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = io::split_delimited(line, delimiter);
  const std::vector<std::string> wanted = {"municipality_id", "year", "event_kind"};
  const auto pos = locate_columns(header, wanted, [](const std::string& c) { return c; });

  std::vector<DistressEvent> events;
  std::size_t line_no = 1;
  while (io::read_line(source, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    const auto fields = io::split_delimited(line, delimiter);
    const auto where = " at line " + std::to_string(line_no);
    if (fields.size() != header.size()) throw ParseError("wrong field count" + where);
    DistressEvent event;
    event.municipality_id = std::string(io::trim(fields[pos[0]]));
    if (event.municipality_id.empty()) throw ParseError("empty municipality_id" + where);
    const auto year = io::parse_integer(fields[pos[1]]);
    if (!year) throw ParseError("unparsable year '" + fields[pos[1]] + "'" + where);
    event.year = static_cast<int>(*year);
    const auto kind = parse_event_kind(fields[pos[2]]);
    if (!kind) throw ParseError("unknown event kind '" + fields[pos[2]] + "'" + where);
    event.kind = *kind;
    events.push_back(std::move(event));
  }
  if (source.bad()) throw IoError("error while reading archive stream");
  return DistressArchive::from_events(std::move(events));
}

MergeResult merge_panel(const std::vector<CandidateRow>& rows, const DistressArchive& archive,
                        YearRange year_range) {
  // Events grouped per municipality, chronological; pre-distress precedes
  // bankruptcy within one year (kind enum order).
  std::unordered_map<std::string, std::vector<const DistressEvent*>> history;
  for (const auto& e : archive.events) history[e.municipality_id].push_back(&e);

  MergeResult result;
  result.panel.year_range = year_range;
  std::set<std::string> seen_ids;
  for (const auto& row : rows) {
    seen_ids.insert(row.municipality_id);
    if (!year_range.contains(row.year)) {
      ++result.dropped_out_of_range;
      continue;
    }
    MunicipalityYearRecord rec;
    rec.municipality_id = row.municipality_id;
    rec.year = row.year;
    auto& ind = rec.indicators;
    for (std::size_t k = 0; k < kIndicatorCount; ++k) {
      ind.values[k] = row.indicators[k].value_or(std::numeric_limits<double>::quiet_NaN());
    }
    ind.off_balance_sheet_debts = row.off_balance_sheet_debts;
    ind.geo_area = row.geo_area;
    ind.population = row.population.value_or(0);
    if (ind.population >= 1) ind.demographic_category = demographic_category_of(ind.population);

    std::vector<DistressEventKind> before;
    int label = 0;
    if (const auto it = history.find(row.municipality_id); it != history.end()) {
      for (const auto* e : it->second) {
        if (e->year < row.year) before.push_back(e->kind);
        if (e->year == row.year && e->kind == DistressEventKind::Bankruptcy) label = 1;
      }
    }
    ind.bankruptcy_risk = bankruptcy_risk_of(before);
    rec.label = label;
    result.panel.records.push_back(std::move(rec));
  }
  if (result.dropped_out_of_range > 0) {
    result.warnings.push_back({DiagnosticKind::OutOfRange, 0, "year",
                               std::to_string(result.dropped_out_of_range) +
                                   " rows outside the panel year range dropped"});
  }
  for (const auto& [id, events] : history) {
    if (!seen_ids.contains(id)) {
      result.warnings.push_back({DiagnosticKind::UnknownMunicipality, 0, "municipality_id",
                                 "archive references municipality '" + id +
                                     "' absent from the panel"});
    }
  }
  std::sort(result.warnings.begin(), result.warnings.end(),
            [](const Diagnostic& a, const Diagnostic& b) { return a.message < b.message; });
  return result;
}

std::size_t CleaningReport::total_dropped() const noexcept {
  std::size_t total = 0;
  for (const auto& [reason, count] : rows_dropped) total += count;
  return total;
}

CleanResult clean(const Panel& panel, const CleaningPolicy& policy) {
  CleanResult out;
  auto& report = out.report;
  report.rows_read = panel.records.size();
  out.panel.year_range = panel.year_range;

  auto drop = [&](const MunicipalityYearRecord& r, const std::string& reason) {
    ++report.rows_dropped[reason];
    report.actions.push_back(
        {CleaningAction::Kind::Dropped, r.municipality_id, r.year, "", 0.0, reason});
  };
  auto has_gap = [](const MunicipalityYearRecord& r) {
    return !r.indicators.off_balance_sheet_debts ||
           std::any_of(r.indicators.values.begin(), r.indicators.values.end(),
                       [](double v) { return !std::isfinite(v); });
  };

  std::set<std::pair<std::string, int>> keys;
  for (const auto& r : panel.records) {
    if (!keys.emplace(r.municipality_id, r.year).second) {
      ++report.duplicates_removed;
      drop(r, "duplicate");
      continue;
    }
    if (!r.label || (*r.label != 0 && *r.label != 1)) {
      drop(r, "missing label");
      continue;
    }
    if (r.indicators.population < 1) {
      drop(r, "missing population");
      continue;
    }
    if (!policy.impute_missing && has_gap(r)) {
      drop(r, "missing indicator");
      continue;
    }
    out.panel.records.push_back(r);
  }
  if (out.panel.records.empty()) throw EmptyDataset("no rows left after cleaning");

  auto& records = out.panel.records;
  for (const auto indicator : kIndicators) {
    std::vector<double> observed;
    for (const auto& r : records) {
      if (std::isfinite(r.indicators[indicator])) observed.push_back(r.indicators[indicator]);
    }
    if (observed.size() == records.size()) continue;
    const std::string column(to_string(indicator));
    if (observed.empty()) throw EmptyDataset("column '" + column + "' has no observed values");
    const double median = median_of(std::move(observed));
    for (auto& r : records) {
      if (!std::isfinite(r.indicators[indicator])) {
        r.indicators[indicator] = median;
        ++report.values_imputed[column];
        report.actions.push_back({CleaningAction::Kind::Imputed, r.municipality_id, r.year,
                                  column, median, "median"});
      }
    }
  }
  // Boolean column: the median of 0/1 values is the majority value (ties to 0).
  std::size_t ones = 0, observed = 0;
  for (const auto& r : records) {
    if (r.indicators.off_balance_sheet_debts) {
      ++observed;
      ones += *r.indicators.off_balance_sheet_debts ? 1 : 0;
    }
  }
  if (observed < records.size()) {
    if (observed == 0) throw EmptyDataset("column 'off_balance_sheet_debts' has no observed values");
    const bool majority = 2 * ones > observed;
    for (auto& r : records) {
      if (!r.indicators.off_balance_sheet_debts) {
        r.indicators.off_balance_sheet_debts = majority;
        ++report.values_imputed["off_balance_sheet_debts"];
        report.actions.push_back({CleaningAction::Kind::Imputed, r.municipality_id, r.year,
                                  "off_balance_sheet_debts", majority ? 1.0 : 0.0, "median"});
      }
    }
  }
  report.rows_kept = records.size();
  return out;
}

nlohmann::json to_json(const CleaningReport& report) {
  nlohmann::json j;
  j["rows_read"] = report.rows_read;
  j["rows_kept"] = report.rows_kept;
  j["rows_dropped"] = report.rows_dropped;
  j["rows_dropped_total"] = report.total_dropped();
  j["values_imputed"] = report.values_imputed;
  j["duplicates_removed"] = report.duplicates_removed;
  auto actions = nlohmann::json::array();
  for (const auto& a : report.actions) {
    nlohmann::json aj;
    aj["action"] = a.kind == CleaningAction::Kind::Dropped ? "dropped" : "imputed";
    aj["municipality_id"] = a.municipality_id;
    aj["year"] = a.year;
    aj["reason"] = a.reason;
    if (a.kind == CleaningAction::Kind::Imputed) {
      aj["column"] = a.column;
      aj["value"] = a.value;
    }
    actions.push_back(std::move(aj));
  }
  j["actions"] = std::move(actions);
  return j;
}

void write_panel_csv(std::ostream& out, const Panel& panel, bool with_outcomes, char delimiter) {
  const auto& columns = panel_columns();
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out << delimiter;
    out << columns[i];
  }
  if (with_outcomes) out << delimiter << "label" << delimiter << "bankruptcy_risk";
  out << '\n';
  for (const auto& r : panel.records) {
    const auto& ind = r.indicators;
    out << io::quote_field(r.municipality_id, delimiter) << delimiter << r.year << delimiter;
    if (ind.population >= 1) out << ind.population;
    out << delimiter << to_string(ind.geo_area);
    for (const double v : ind.values) {
      out << delimiter;
      if (std::isfinite(v)) out << io::format_double(v);
    }
    out << delimiter;
    if (ind.off_balance_sheet_debts) out << (*ind.off_balance_sheet_debts ? 1 : 0);
    if (with_outcomes) {
      out << delimiter;
      if (r.label) out << *r.label;
      out << delimiter << ind.bankruptcy_risk.level();
    }
    out << '\n';
  }
}

void write_archive_csv(std::ostream& out, const DistressArchive& archive, char delimiter) {
  out << "municipality_id" << delimiter << "year" << delimiter << "event_kind\n";
  for (const auto& e : archive.events) {
    out << io::quote_field(e.municipality_id, delimiter) << delimiter << e.year << delimiter
        << to_string(e.kind) << '\n';
  }
}

}  // namespace distress

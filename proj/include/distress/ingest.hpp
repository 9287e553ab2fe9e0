#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "distress/domain.hpp"

namespace distress {

/// Column layout of the financial panel file. `renames` maps a canonical
/// column name to the header used in a particular file.
struct PanelSchema {
  char delimiter = ',';
  std::map<std::string, std::string> renames;

  std::string header_for(const std::string& canonical) const;
};

/// Canonical panel header, in file order.
const std::vector<std::string>& panel_columns();

/// One parsed panel line before merging. Empty optionals are missing cells.
struct CandidateRow {
  std::string municipality_id;
  int year = 0;
  std::optional<std::int64_t> population;
  GeoArea geo_area = GeoArea::NorthWest;
  std::array<std::optional<double>, kIndicatorCount> indicators{};
  std::optional<bool> off_balance_sheet_debts;
  std::size_t line = 0;
};

enum class DiagnosticKind : std::uint8_t {
  MissingValue,
  MalformedRow,
  UnknownMunicipality,
  OutOfRange,
};

std::string_view to_string(DiagnosticKind kind) noexcept;

struct Diagnostic {
  DiagnosticKind kind;
  std::size_t line = 0;  // 0 when not tied to an input line
  std::string column;
  std::string message;
};

struct PanelParseResult {
  std::vector<CandidateRow> rows;
  std::vector<Diagnostic> diagnostics;
};

/// Parses the panel file. Throws SchemaError for a missing mandatory column
/// and IoError for an unreadable stream. Malformed lines are reported in
/// `diagnostics` and excluded; lines with missing cells are kept.
PanelParseResult parse_financial_panel(std::istream& source, const PanelSchema& schema = {});

struct DistressEvent {
  std::string municipality_id;
  int year = 0;
  DistressEventKind kind = DistressEventKind::PreDistress;

  friend auto operator<=>(const DistressEvent&, const DistressEvent&) = default;
};

struct DistressArchive {
  /// Sorted by (municipality_id, year, kind), no duplicates.
  std::vector<DistressEvent> events;
  std::size_t duplicates_removed = 0;

  /// Builds a normalized archive from arbitrary events.
  static DistressArchive from_events(std::vector<DistressEvent> events);
};

/// Throws ParseError naming the offending value for an unknown event kind.
DistressArchive parse_distress_archive(std::istream& source, char delimiter = ',');

struct MergeResult {
  Panel panel;
  std::vector<Diagnostic> warnings;
  std::size_t dropped_out_of_range = 0;
};

/// Joins rows with the archive: label(t) = bankruptcy event at t; risk(t)
/// from events strictly before t. Rows outside `year_range` are dropped.
MergeResult merge_panel(const std::vector<CandidateRow>& rows, const DistressArchive& archive,
                        YearRange year_range);

struct CleaningPolicy {
  /// Median-impute missing indicators; when false such rows are dropped.
  bool impute_missing = true;
};

struct CleaningAction {
  enum class Kind : std::uint8_t { Dropped, Imputed } kind;
  std::string municipality_id;
  int year = 0;
  std::string column;  // empty for dropped rows
  double value = 0.0;  // imputed value
  std::string reason;
};

struct CleaningReport {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::map<std::string, std::size_t> rows_dropped;
  std::map<std::string, std::size_t> values_imputed;
  std::size_t duplicates_removed = 0;
  std::vector<CleaningAction> actions;

  std::size_t total_dropped() const noexcept;
};

struct CleanResult {
  Panel panel;
  CleaningReport report;
};

/// Deduplicates on (id, year) keeping the first row, drops rows without a
/// label or population, and imputes remaining gaps with the column median.
/// Throws EmptyDataset when nothing survives.
CleanResult clean(const Panel& panel, const CleaningPolicy& policy = {});

nlohmann::json to_json(const CleaningReport& report);

/// Writes the panel in the ingest schema; `with_outcomes` appends the
/// merged `label` and `bankruptcy_risk` columns.
void write_panel_csv(std::ostream& out, const Panel& panel, bool with_outcomes = false,
                     char delimiter = ',');
void write_archive_csv(std::ostream& out, const DistressArchive& archive, char delimiter = ',');

}  // namespace distress

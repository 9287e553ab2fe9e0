#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace distress {

/// Closed interval of calendar years [first, last].
struct YearRange {
  int first = 2016;
  int last = 2020;

  bool contains(int year) const noexcept { return year >= first && year <= last; }
  int size() const noexcept { return last - first + 1; }
  friend bool operator==(const YearRange&, const YearRange&) = default;
};

enum class GeoArea : std::uint8_t { NorthWest, NorthEast, Center, South, Islands };

inline constexpr std::array<GeoArea, 5> kGeoAreas = {GeoArea::NorthWest, GeoArea::NorthEast,
                                                     GeoArea::Center, GeoArea::South,
                                                     GeoArea::Islands};

std::string_view to_string(GeoArea area) noexcept;
std::optional<GeoArea> parse_geo_area(std::string_view text) noexcept;

/// Legal size class of a municipality, levels I..XII by resident count.
class DemographicCategory {
 public:
  static constexpr int kLevels = 12;

  constexpr DemographicCategory() = default;
  /// Throws InvalidInput outside 1..12.
  explicit DemographicCategory(int level);

  constexpr int level() const noexcept { return level_; }
  std::string_view roman() const noexcept;
  friend constexpr auto operator<=>(DemographicCategory, DemographicCategory) = default;

 private:
  int level_ = 1;
};

/// Lower resident bound of each category; category i covers
/// [kDemographicLowerBounds[i], kDemographicLowerBounds[i + 1]).
inline constexpr std::array<std::int64_t, DemographicCategory::kLevels> kDemographicLowerBounds = {
    1, 500, 1000, 2000, 3000, 5000, 10000, 20000, 60000, 100000, 250000, 500000};

/// Throws InvalidInput when population < 1.
DemographicCategory demographic_category_of(std::int64_t population);

/// Severity 1 (low) .. 5 (high), derived from distress history.
class BankruptcyRisk {
 public:
  static constexpr int kLevels = 5;

  constexpr BankruptcyRisk() = default;
  explicit BankruptcyRisk(int level);

  constexpr int level() const noexcept { return level_; }
  friend constexpr auto operator<=>(BankruptcyRisk, BankruptcyRisk) = default;

 private:
  int level_ = 1;
};

enum class DistressEventKind : std::uint8_t { PreDistress, Bankruptcy };

std::string_view to_string(DistressEventKind kind) noexcept;

/// Risk level for a chronologically ordered event history. When several
/// rules match, the most severe one wins.
BankruptcyRisk bankruptcy_risk_of(std::span<const DistressEventKind> history) noexcept;

/// The eight continuous indicators, in canonical column order.
enum class Indicator : std::uint8_t {
  IncidenceOfInvestment,
  FinancialAutonomyDegree,
  IndebtednessPerCapita,
  TotalInvestmentFinancedByDebt,
  RigidExpenditure,
  ExpenseManagementSpeed,
  CollectingCapacity,
  ExtraBudgetaryDebts,
};

inline constexpr std::size_t kIndicatorCount = 8;

inline constexpr std::array<Indicator, kIndicatorCount> kIndicators = {
    Indicator::IncidenceOfInvestment,      Indicator::FinancialAutonomyDegree,
    Indicator::IndebtednessPerCapita,      Indicator::TotalInvestmentFinancedByDebt,
    Indicator::RigidExpenditure,           Indicator::ExpenseManagementSpeed,
    Indicator::CollectingCapacity,         Indicator::ExtraBudgetaryDebts,
};

/// Indicators that receive a year-over-year delta column.
inline constexpr std::array<Indicator, 6> kLaggedIndicators = {
    Indicator::ExpenseManagementSpeed,        Indicator::RigidExpenditure,
    Indicator::TotalInvestmentFinancedByDebt, Indicator::FinancialAutonomyDegree,
    Indicator::CollectingCapacity,            Indicator::IndebtednessPerCapita,
};

std::string_view to_string(Indicator indicator) noexcept;
std::optional<Indicator> parse_indicator(std::string_view name) noexcept;
bool is_nonnegative(Indicator indicator) noexcept;

struct RawIndicators {
  std::array<double, kIndicatorCount> values{};
  std::optional<bool> off_balance_sheet_debts = false;
  BankruptcyRisk bankruptcy_risk;
  DemographicCategory demographic_category;
  GeoArea geo_area = GeoArea::NorthWest;
  std::int64_t population = 1;

  double& operator[](Indicator i) noexcept { return values[static_cast<std::size_t>(i)]; }
  double operator[](Indicator i) const noexcept { return values[static_cast<std::size_t>(i)]; }
  friend bool operator==(const RawIndicators&, const RawIndicators&) = default;
};

/// One municipality in one year. Missing inputs stay representable so that
/// cleaning can observe them: indicator values are NaN, population is 0,
/// off_balance_sheet_debts and label are empty.
struct MunicipalityYearRecord {
  std::string municipality_id;
  int year = 0;
  RawIndicators indicators;
  std::optional<int> label;

  friend bool operator==(const MunicipalityYearRecord&, const MunicipalityYearRecord&) = default;
};

struct Panel {
  std::vector<MunicipalityYearRecord> records;
  YearRange year_range;

  friend bool operator==(const Panel&, const Panel&) = default;
};

enum class ViolationKind : std::uint8_t {
  NonFinite,
  PopulationTooSmall,
  CategoryMismatch,
  NegativeValue,
  MissingLabel,
  InvalidLabel,
};

struct Violation {
  ViolationKind kind;
  std::string field;
  std::string message;
};

/// Every invariant violation of `record`; empty when the record is valid.
std::vector<Violation> validate_record(const MunicipalityYearRecord& record);

}  // namespace distress

#include "distress/domain.hpp"

#include <algorithm>
#include <cmath>

#include "distress/error.hpp"

namespace distress {

namespace {

constexpr std::array<std::string_view, 5> kGeoAreaNames = {"north-west", "north-east", "center",
                                                           "south", "islands"};

constexpr std::array<std::string_view, 12> kRoman = {"I",   "II",  "III", "IV", "V",  "VI",
                                                     "VII", "VIII", "IX", "X",  "XI", "XII"};

constexpr std::array<std::string_view, kIndicatorCount> kIndicatorNames = {
    "incidence_of_investment", "financial_autonomy_degree", "indebtedness_per_capita",
    "total_investment_financed_by_debt", "rigid_expenditure", "expense_management_speed",
    "collecting_capacity", "extra_budgetary_debts"};

}  // namespace

std::string_view to_string(GeoArea area) noexcept {
  return kGeoAreaNames[static_cast<std::size_t>(area)];
}

std::optional<GeoArea> parse_geo_area(std::string_view text) noexcept {
  for (std::size_t i = 0; i < kGeoAreaNames.size(); ++i) {
    if (kGeoAreaNames[i] == text) return kGeoAreas[i];
  }
  return std::nullopt;
}

DemographicCategory::DemographicCategory(int level) : level_(level) {
  if (level < 1 || level > kLevels) {
    throw InvalidInput("demographic category level " + std::to_string(level) +
                       " outside I..XII");
  }
}

std::string_view DemographicCategory::roman() const noexcept {
  return kRoman[static_cast<std::size_t>(level_ - 1)];
}

DemographicCategory demographic_category_of(std::int64_t population) {
  if (population < 1) {
    throw InvalidInput("population must be at least 1, got " + std::to_string(population));
  }
  const auto it = std::upper_bound(kDemographicLowerBounds.begin(), kDemographicLowerBounds.end(),
                                   population);
  return DemographicCategory(static_cast<int>(it - kDemographicLowerBounds.begin()));
}

BankruptcyRisk::BankruptcyRisk(int level) : level_(level) {
  if (level < 1 || level > kLevels) {
    throw InvalidInput("bankruptcy risk level " + std::to_string(level) + " outside 1..5");
  }
}

std::string_view to_string(DistressEventKind kind) noexcept {
  return kind == DistressEventKind::Bankruptcy ? "bankruptcy" : "pre-distress";
}

BankruptcyRisk bankruptcy_risk_of(std::span<const DistressEventKind> history) noexcept {
  int bankruptcies = 0;
  int pre_distress = 0;
  bool pre_then_bankruptcy = false;
  for (const auto kind : history) {
    if (kind == DistressEventKind::Bankruptcy) {
      ++bankruptcies;
      if (pre_distress > 0) pre_then_bankruptcy = true;
    } else {
      ++pre_distress;
    }
  }
  if (bankruptcies >= 2) return BankruptcyRisk(5);
  if (pre_then_bankruptcy) return BankruptcyRisk(4);
  if (bankruptcies == 1) return BankruptcyRisk(3);
  if (pre_distress >= 2) return BankruptcyRisk(2);
  return BankruptcyRisk(1);
}

std::string_view to_string(Indicator indicator) noexcept {
  return kIndicatorNames[static_cast<std::size_t>(indicator)];
}

std::optional<Indicator> parse_indicator(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kIndicatorNames.size(); ++i) {
    if (kIndicatorNames[i] == name) return kIndicators[i];
  }
  return std::nullopt;
}

bool is_nonnegative(Indicator indicator) noexcept {
  return indicator == Indicator::IndebtednessPerCapita ||
         indicator == Indicator::ExtraBudgetaryDebts;
}

std::vector<Violation> validate_record(const MunicipalityYearRecord& record) {
  std::vector<Violation> out;
  const auto& ind = record.indicators;
  for (const auto indicator : kIndicators) {
    const double v = ind[indicator];
    const std::string field(to_string(indicator));
    if (!std::isfinite(v)) {
      out.push_back({ViolationKind::NonFinite, field, field + " is not finite"});
    } else if (is_nonnegative(indicator) && v < 0.0) {
      out.push_back({ViolationKind::NegativeValue, field, field + " is negative"});
    }
  }
  if (!ind.off_balance_sheet_debts) {
    out.push_back({ViolationKind::NonFinite, "off_balance_sheet_debts",
                   "off_balance_sheet_debts is missing"});
  }
  if (ind.population < 1) {
    out.push_back({ViolationKind::PopulationTooSmall, "population",
                   "population " + std::to_string(ind.population) + " is below 1"});
  } else if (demographic_category_of(ind.population) != ind.demographic_category) {
    out.push_back({ViolationKind::CategoryMismatch, "demographic_category",
                   "category " + std::string(ind.demographic_category.roman()) +
                       " inconsistent with population " + std::to_string(ind.population)});
  }
  if (!record.label) {
    out.push_back({ViolationKind::MissingLabel, "label", "label is missing"});
  } else if (*record.label != 0 && *record.label != 1) {
    out.push_back({ViolationKind::InvalidLabel, "label",
                   "label " + std::to_string(*record.label) + " is not binary"});
  }
  return out;
}

}  // namespace distress

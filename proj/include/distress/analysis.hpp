#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "distress/domain.hpp"
#include "distress/eval.hpp"
#include "distress/features.hpp"
#include "distress/models.hpp"

namespace distress {

struct FpDetail {
  std::string municipality_id;
  double score = 0.0;
  std::optional<int> first_later_distress_year;
  int later_years_observed = 0;  // panel records inside the horizon
};

struct ForwardFpReport {
  int anchor_year = 0;
  int horizon = 4;
  double threshold = 0.5;
  std::size_t n_evaluated = 0;
  std::size_t n_true_positive = 0;
  std::size_t n_false_positive = 0;
  std::size_t n_false_negative = 0;
  std::size_t n_true_negative = 0;
  std::size_t n_fp_later_distressed = 0;
  /// False positives with fewer than `horizon` later records in the panel.
  std::size_t n_fp_partially_observed = 0;
  double fraction_later_distressed = 0.0;
  bool degenerate = false;  // no false positives, fraction set to 0
  std::vector<FpDetail> false_positives;

  nlohmann::json to_json() const;
};

/// Scores-level core: `rows`, `labels`, `scores` describe the anchor-year
/// slice; later labels are looked up in `panel` for years in
/// (anchor_year, anchor_year + horizon]. Rows from other years are ignored.
ForwardFpReport forward_fp_analysis(std::span<const RowKey> rows, std::span<const int> labels,
                                    std::span<const double> scores, const Panel& panel,
                                    int anchor_year, int horizon, double threshold);

/// Scores the anchor-year rows of `test` (raw, unstandardized features)
/// with `pipeline`. Throws InvalidInput when the anchor year is absent.
ForwardFpReport forward_fp_analysis(const FittedPipeline& pipeline, const FeatureMatrix& test,
                                    const Panel& panel, int anchor_year, int horizon,
                                    double threshold);

/// `municipality_id,score,first_later_distress_year,later_years_observed`
void write_fp_csv(std::ostream& out, const ForwardFpReport& report);

struct CoefficientEntry {
  std::string name;
  std::string parent;  // categorical parent for one-hot columns, else the name
  std::string level;   // one-hot level, empty otherwise
  double value = 0.0;
};

struct CoefficientReport {
  std::vector<CoefficientEntry> entries;  // signed value descending, stable
  double intercept = 0.0;

  /// Entry indices per parent, parents in first-appearance order.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups() const;
  nlohmann::json to_json() const;
};

/// Throws UnsupportedModel for anything but a logistic model.
CoefficientReport coefficient_report(const TrainedModel& model);

/// `name,parent,level,value`
void write_coefficient_csv(std::ostream& out, const CoefficientReport& report);

}  // namespace distress

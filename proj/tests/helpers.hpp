#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "distress/domain.hpp"
#include "distress/features.hpp"
#include "distress/random.hpp"

namespace distress::testing {

/// A valid record with mid-range indicators.
inline MunicipalityYearRecord make_record(const std::string& id, int year, int label = 0,
                                          std::int64_t population = 1500) {
  MunicipalityYearRecord r;
  r.municipality_id = id;
  r.year = year;
  r.indicators.values = {30.0, 60.0, 800.0, 20.0, 35.0, 70.0, 75.0, 1000.0};
  r.indicators.population = population;
  r.indicators.demographic_category = demographic_category_of(population);
  r.indicators.off_balance_sheet_debts = false;
  r.label = label;
  return r;
}

/// Random labels with at least `min_per_class` of each class.
inline std::vector<int> random_labels(Rng& rng, std::size_t n, std::size_t min_per_class) {
  std::vector<int> y(n, 0);
  for (auto& v : y) v = rng.uniform() < 0.3 ? 1 : 0;
  for (std::size_t i = 0; i < min_per_class && 2 * i + 1 < n; ++i) {
    y[2 * i] = 1;
    y[2 * i + 1] = 0;
  }
  rng.shuffle(std::span<int>(y));
  return y;
}

/// Dense numeric matrix with named columns c0..c{d-1}.
inline FeatureMatrix numeric_matrix(const Eigen::MatrixXd& values, std::vector<int> labels) {
  FeatureMatrix m;
  m.values = values;
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    m.column_names.push_back("c" + std::to_string(j));
    m.column_kinds.push_back(ColumnKind::Numeric);
  }
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    m.row_keys.push_back({"R" + std::to_string(i), 2016});
  }
  m.labels = std::move(labels);
  return m;
}

}  // namespace distress::testing

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "distress/domain.hpp"

namespace distress {

enum class ColumnKind : std::uint8_t { Numeric, Binary, OneHot };

struct RowKey {
  std::string municipality_id;
  int year = 0;

  friend auto operator<=>(const RowKey&, const RowKey&) = default;
};

/// Encoded design matrix with named columns and one label per row.
struct FeatureMatrix {
  Eigen::MatrixXd values;  // rows x columns
  std::vector<std::string> column_names;
  std::vector<ColumnKind> column_kinds;
  std::vector<RowKey> row_keys;
  std::vector<int> labels;

  std::size_t rows() const noexcept { return row_keys.size(); }
  std::size_t cols() const noexcept { return column_names.size(); }

  /// Copy of the selected rows, in the given order.
  FeatureMatrix subset(std::span<const std::size_t> rows) const;

  /// Index of a named column; throws InvalidInput when absent.
  std::size_t column_index(const std::string& name) const;

  std::vector<std::string> columns_of_kind(ColumnKind kind) const;

  /// Throws InvalidInput on shape mismatch, duplicate names, or non-finite entries.
  void check_invariants() const;
};

struct LaggedDeltas {
  std::vector<std::string> column_names;  // "delta_<indicator>"
  Eigen::MatrixXd values;                 // one row per panel record
  std::size_t imputed = 0;                // first-year (no t-1 record) cells set to 0
};

/// Year-over-year differences value(t) - value(t-1) per municipality.
/// Throws InvalidInput for an indicator outside the six lagged ones.
LaggedDeltas lagged_deltas(const Panel& panel, std::span<const std::string> feature_names);

inline const std::vector<std::string>& default_lag_features() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto i : kLaggedIndicators) n.emplace_back(to_string(i));
    return n;
  }();
  return names;
}

/// Column names of the full one-hot block: 12 demographic, 5 geo, 5 risk.
const std::vector<std::string>& one_hot_columns();

/// Full-vocabulary one-hot encoding of the three categorical fields.
Eigen::MatrixXd one_hot(std::span<const MunicipalityYearRecord> records);

/// Assembles indicators, the binary off-balance flag, delta columns, and
/// the one-hot block. Records must be clean (see validate_record).
FeatureMatrix build_feature_matrix(const Panel& panel,
                                   std::span<const std::string> lag_features = default_lag_features(),
                                   std::size_t* imputed_deltas = nullptr);

class Standardizer {
 public:
  Standardizer() = default;

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<double>& means() const noexcept { return means_; }
  const std::vector<double>& stds() const noexcept { return stds_; }
  const std::vector<bool>& zero_variance() const noexcept { return zero_variance_; }

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);

  friend Standardizer fit_standardizer(const FeatureMatrix& train,
                                       std::span<const std::string> columns);
  friend bool operator==(const Standardizer&, const Standardizer&) = default;

 private:
  std::vector<std::string> columns_;
  std::vector<double> means_;
  std::vector<double> stds_;
  std::vector<bool> zero_variance_;
};

/// Population (1/n) mean and standard deviation per listed column.
/// Throws EmptyDataset for an empty matrix.
Standardizer fit_standardizer(const FeatureMatrix& train, std::span<const std::string> columns);

/// Fits on every Numeric column.
Standardizer fit_standardizer(const FeatureMatrix& train);

/// (x - mean) / std on fitted columns, zero-variance columns untouched.
/// Throws InvalidInput when a fitted column is absent from `m`.
FeatureMatrix apply_standardizer(const Standardizer& s, const FeatureMatrix& m);

struct PCAModel {
  std::vector<std::string> columns;
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;        // d x k, orthonormal columns
  Eigen::VectorXd eigenvalues;       // top-k sample-covariance eigenvalues
  Eigen::VectorXd explained_ratio;   // k ratios over the full spectrum

  nlohmann::json to_json() const;
};

/// Top-k principal directions of the sample covariance. Each direction's
/// largest-magnitude coordinate is made positive. Throws InvalidInput for k > d.
PCAModel fit_pca(const FeatureMatrix& m, std::size_t k);

/// n x k scores of the centered rows.
Eigen::MatrixXd project(const PCAModel& p, const FeatureMatrix& m);

/// Maps scores back to the original column space.
Eigen::MatrixXd reconstruct(const PCAModel& p, const Eigen::MatrixXd& scores);

/// Delimited export with header `municipality_id,year,<columns...>,label`.
void write_feature_csv(std::ostream& out, const FeatureMatrix& m, char delimiter = ',');

/// Reads a matrix written by write_feature_csv. Column kinds are inferred
/// from names (one-hot "parent=level", the off-balance flag binary).
FeatureMatrix read_feature_csv(std::istream& in, char delimiter = ',');

/// `municipality_id,year,pc1,pc2,...,label`
void write_pca_scores_csv(std::ostream& out, const FeatureMatrix& m, const Eigen::MatrixXd& scores,
                          char delimiter = ',');

}  // namespace distress

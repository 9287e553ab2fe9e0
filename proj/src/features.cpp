#include "distress/features.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "distress/error.hpp"
#include "distress/io.hpp"

namespace distress {

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.column_names = column_names;
  out.column_kinds = column_kinds;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  out.row_keys.reserve(rows.size());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    if (r >= row_keys.size()) throw InvalidInput("row index out of range");
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(r));
    out.row_keys.push_back(row_keys[r]);
    out.labels.push_back(labels[r]);
  }
  return out;
}

std::size_t FeatureMatrix::column_index(const std::string& name) const {
  const auto it = std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end()) throw InvalidInput("missing column '" + name + "'");
  return static_cast<std::size_t>(it - column_names.begin());
}

std::vector<std::string> FeatureMatrix::columns_of_kind(ColumnKind kind) const {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < column_names.size(); ++j) {
    if (column_kinds[j] == kind) out.push_back(column_names[j]);
  }
  return out;
}

void FeatureMatrix::check_invariants() const {
  const auto n = row_keys.size();
  if (labels.size() != n || static_cast<std::size_t>(values.rows()) != n) {
    throw InvalidInput("feature matrix row count mismatch");
  }
  if (column_kinds.size() != column_names.size() ||
      static_cast<std::size_t>(values.cols()) != column_names.size()) {
    throw InvalidInput("feature matrix column count mismatch");
  }
  std::set<std::string> unique(column_names.begin(), column_names.end());
  if (unique.size() != column_names.size()) throw InvalidInput("duplicate column names");
  if (!values.allFinite()) throw InvalidInput("feature matrix has non-finite entries");
}

LaggedDeltas lagged_deltas(const Panel& panel, std::span<const std::string> feature_names) {
  std::vector<Indicator> indicators;
  for (const auto& name : feature_names) {
    const auto indicator = parse_indicator(name);
    if (!indicator || std::find(kLaggedIndicators.begin(), kLaggedIndicators.end(), *indicator) ==
                          kLaggedIndicators.end()) {
      throw InvalidInput("'" + name + "' is not a lagged indicator");
    }
    indicators.push_back(*indicator);
  }

  std::map<RowKey, std::size_t> index;
  for (std::size_t i = 0; i < panel.records.size(); ++i) {
    index.emplace(RowKey{panel.records[i].municipality_id, panel.records[i].year}, i);
  }

  LaggedDeltas out;
  for (const auto i : indicators) out.column_names.push_back("delta_" + std::string(to_string(i)));
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(panel.records.size()),
                                     static_cast<Eigen::Index>(indicators.size()));
  for (std::size_t r = 0; r < panel.records.size(); ++r) {
    const auto& rec = panel.records[r];
    const auto prev = index.find(RowKey{rec.municipality_id, rec.year - 1});
    for (std::size_t k = 0; k < indicators.size(); ++k) {
      if (prev == index.end()) {
        ++out.imputed;
        continue;
      }
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          rec.indicators[indicators[k]] - panel.records[prev->second].indicators[indicators[k]];
    }
  }
  return out;
}

const std::vector<std::string>& one_hot_columns() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (int level = 1; level <= DemographicCategory::kLevels; ++level) {
      n.push_back("demographic_category=" + std::string(DemographicCategory(level).roman()));
    }
    for (const auto area : kGeoAreas) n.push_back("geo_area=" + std::string(to_string(area)));
    for (int level = 1; level <= BankruptcyRisk::kLevels; ++level) {
      n.push_back("bankruptcy_risk=" + std::to_string(level));
    }
    return n;
  }();
  return names;
}

Eigen::MatrixXd one_hot(std::span<const MunicipalityYearRecord> records) {
  constexpr int kGeoOffset = DemographicCategory::kLevels;
  constexpr int kRiskOffset = kGeoOffset + 5;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(records.size()),
                                              kRiskOffset + BankruptcyRisk::kLevels);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& ind = records[r].indicators;
    const auto row = static_cast<Eigen::Index>(r);
    out(row, ind.demographic_category.level() - 1) = 1.0;
    out(row, kGeoOffset + static_cast<int>(ind.geo_area)) = 1.0;
    out(row, kRiskOffset + ind.bankruptcy_risk.level() - 1) = 1.0;
  }
  return out;
}

FeatureMatrix build_feature_matrix(const Panel& panel, std::span<const std::string> lag_features,
                                   std::size_t* imputed_deltas) {
  for (const auto& rec : panel.records) {
    if (!rec.label) {
      throw InvalidInput("record " + rec.municipality_id + "/" + std::to_string(rec.year) +
                         " has no label; clean the panel first");
    }
  }
  const auto deltas = lagged_deltas(panel, lag_features);
  if (imputed_deltas) *imputed_deltas = deltas.imputed;
  const Eigen::MatrixXd dummies = one_hot(panel.records);

  FeatureMatrix m;
  for (const auto i : kIndicators) {
    m.column_names.emplace_back(to_string(i));
    m.column_kinds.push_back(ColumnKind::Numeric);
  }
  m.column_names.emplace_back("off_balance_sheet_debts");
  m.column_kinds.push_back(ColumnKind::Binary);
  for (const auto& name : deltas.column_names) {
    m.column_names.push_back(name);
    m.column_kinds.push_back(ColumnKind::Numeric);
  }
  for (const auto& name : one_hot_columns()) {
    m.column_names.push_back(name);
    m.column_kinds.push_back(ColumnKind::OneHot);
  }

  const auto n = static_cast<Eigen::Index>(panel.records.size());
  const auto n_lag = deltas.values.cols();
  m.values.resize(n, static_cast<Eigen::Index>(m.column_names.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& rec = panel.records[static_cast<std::size_t>(r)];
    for (std::size_t k = 0; k < kIndicatorCount; ++k) {
      m.values(r, static_cast<Eigen::Index>(k)) = rec.indicators.values[k];
    }
    m.values(r, kIndicatorCount) = rec.indicators.off_balance_sheet_debts.value_or(false) ? 1.0 : 0.0;
    m.row_keys.push_back({rec.municipality_id, rec.year});
    m.labels.push_back(*rec.label);
  }
  m.values.middleCols(kIndicatorCount + 1, n_lag) = deltas.values;
  m.values.rightCols(dummies.cols()) = dummies;
  m.check_invariants();
  return m;
}

nlohmann::json Standardizer::to_json() const {
  nlohmann::json j;
  j["columns"] = columns_;
  j["means"] = means_;
  j["stds"] = stds_;
  j["zero_variance"] = zero_variance_;
  return j;
}

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  Standardizer s;
  s.columns_ = j.at("columns").get<std::vector<std::string>>();
  s.means_ = j.at("means").get<std::vector<double>>();
  s.stds_ = j.at("stds").get<std::vector<double>>();
  s.zero_variance_ = j.at("zero_variance").get<std::vector<bool>>();
  const auto d = s.columns_.size();
  if (s.means_.size() != d || s.stds_.size() != d || s.zero_variance_.size() != d) {
    throw InvalidInput("standardizer arrays have inconsistent lengths");
  }
  return s;
}

Standardizer fit_standardizer(const FeatureMatrix& train, std::span<const std::string> columns) {
  if (train.rows() == 0) throw EmptyDataset("cannot fit a standardizer on an empty matrix");
  Standardizer s;
  const double n = static_cast<double>(train.rows());
  for (const auto& name : columns) {
    const auto j = static_cast<Eigen::Index>(train.column_index(name));
    const auto col = train.values.col(j);
    const double mean = col.sum() / n;
    const double var = (col.array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    s.columns_.push_back(name);
    s.means_.push_back(mean);
    s.stds_.push_back(sd);
    s.zero_variance_.push_back(!(sd > 0.0));
  }
  return s;
}

Standardizer fit_standardizer(const FeatureMatrix& train) {
  const auto numeric = train.columns_of_kind(ColumnKind::Numeric);
  return fit_standardizer(train, numeric);
}

FeatureMatrix apply_standardizer(const Standardizer& s, const FeatureMatrix& m) {
  FeatureMatrix out = m;
  for (std::size_t k = 0; k < s.columns().size(); ++k) {
    const auto j = static_cast<Eigen::Index>(m.column_index(s.columns()[k]));
    if (s.zero_variance()[k]) continue;
    out.values.col(j) = (m.values.col(j).array() - s.means()[k]) / s.stds()[k];
  }
  return out;
}

nlohmann::json PCAModel::to_json() const {
  nlohmann::json j;
  j["columns"] = columns;
  j["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
  j["eigenvalues"] = std::vector<double>(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
  j["explained_variance_ratio"] =
      std::vector<double>(explained_ratio.data(), explained_ratio.data() + explained_ratio.size());
  auto comps = nlohmann::json::array();
  for (Eigen::Index c = 0; c < components.cols(); ++c) {
    Eigen::VectorXd v = components.col(c);
    comps.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  }
  j["components"] = std::move(comps);
  return j;
}

PCAModel fit_pca(const FeatureMatrix& m, std::size_t k) {
  const auto d = m.cols();
  if (k > d) {
    throw InvalidInput("requested " + std::to_string(k) + " components but matrix has " +
                       std::to_string(d) + " columns");
  }
  if (m.rows() < 2) throw EmptyDataset("PCA needs at least two rows");

  PCAModel p;
  p.columns = m.column_names;
  p.mean = m.values.colwise().mean().transpose();
  const Eigen::MatrixXd centered = m.values.rowwise() - p.mean.transpose();
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(m.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("eigen-decomposition failed");
  // Ascending from the solver; reverse to descending and clamp round-off negatives.
  const Eigen::VectorXd all = solver.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  const double total = all.sum();

  const auto kk = static_cast<Eigen::Index>(k);
  p.eigenvalues = all.head(kk);
  p.explained_ratio = total > 0.0 ? Eigen::VectorXd(p.eigenvalues / total)
                                  : Eigen::VectorXd::Zero(kk);
  p.components = vectors.leftCols(kk);
  for (Eigen::Index c = 0; c < kk; ++c) {
    Eigen::Index arg = 0;
    p.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (p.components(arg, c) < 0.0) p.components.col(c) *= -1.0;
  }
  return p;
}

Eigen::MatrixXd project(const PCAModel& p, const FeatureMatrix& m) {
  if (m.column_names != p.columns) {
    throw InvalidInput("matrix columns do not match the fitted PCA columns");
  }
  return (m.values.rowwise() - p.mean.transpose()) * p.components;
}

Eigen::MatrixXd reconstruct(const PCAModel& p, const Eigen::MatrixXd& scores) {
  if (scores.cols() != p.components.cols()) throw InvalidInput("score width mismatch");
  return (scores * p.components.transpose()).rowwise() + p.mean.transpose();
}

void write_feature_csv(std::ostream& out, const FeatureMatrix& m, char delimiter) {
  out << "municipality_id" << delimiter << "year";
  for (const auto& name : m.column_names) out << delimiter << io::quote_field(name, delimiter);
  out << delimiter << "label\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << io::quote_field(m.row_keys[r].municipality_id, delimiter) << delimiter
        << m.row_keys[r].year;
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
      out << delimiter << io::format_double(m.values(static_cast<Eigen::Index>(r), c));
    }
    out << delimiter << m.labels[r] << '\n';
  }
}

FeatureMatrix read_feature_csv(std::istream& in, char delimiter) {
  std::string line;
  if (!io::read_line(in, line)) throw IoError("feature stream is empty");
  const auto header = io::split_delimited(line, delimiter);
  if (header.size() < 3 || header[0] != "municipality_id" || header[1] != "year" ||
      header.back() != "label") {
    throw ParseError("feature file header must be municipality_id,year,<columns>,label");
  }
  FeatureMatrix m;
  m.column_names.assign(header.begin() + 2, header.end() - 1);
  for (const auto& name : m.column_names) {
    if (name.find('=') != std::string::npos) {
      m.column_kinds.push_back(ColumnKind::OneHot);
    } else if (name == "off_balance_sheet_debts") {
      m.column_kinds.push_back(ColumnKind::Binary);
    } else {
      m.column_kinds.push_back(ColumnKind::Numeric);
    }
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (io::read_line(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    const auto fields = io::split_delimited(line, delimiter);
    const auto where = " at line " + std::to_string(line_no);
    if (fields.size() != header.size()) throw ParseError("wrong field count" + where);
    const auto year = io::parse_integer(fields[1]);
    const auto label = io::parse_integer(fields.back());
    if (!year || !label || (*label != 0 && *label != 1)) throw ParseError("bad key or label" + where);
    std::vector<double> row;
    for (std::size_t c = 2; c + 1 < fields.size(); ++c) {
      const auto v = io::parse_double(fields[c]);
      if (!v) throw ParseError("unparsable value '" + fields[c] + "'" + where);
      row.push_back(*v);
    }
    m.row_keys.push_back({fields[0], static_cast<int>(*year)});
    m.labels.push_back(static_cast<int>(*label));
    rows.push_back(std::move(row));
  }
  m.values.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(m.column_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  m.check_invariants();
  return m;
}

void write_pca_scores_csv(std::ostream& out, const FeatureMatrix& m, const Eigen::MatrixXd& scores,
                          char delimiter) {
  out << "municipality_id" << delimiter << "year";
  for (Eigen::Index c = 0; c < scores.cols(); ++c) out << delimiter << "pc" << (c + 1);
  out << delimiter << "label\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << io::quote_field(m.row_keys[r].municipality_id, delimiter) << delimiter
        << m.row_keys[r].year;
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      out << delimiter << io::format_double(scores(static_cast<Eigen::Index>(r), c));
    }
    out << delimiter << m.labels[r] << '\n';
  }
}

}  // namespace distress

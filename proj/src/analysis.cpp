#include "distress/analysis.hpp"

#include <algorithm>
#include <map>
#include <ostream>

#include "distress/error.hpp"
#include "distress/io.hpp"

namespace distress {

ForwardFpReport forward_fp_analysis(std::span<const RowKey> rows, std::span<const int> labels,
                                    std::span<const double> scores, const Panel& panel,
                                    int anchor_year, int horizon, double threshold) {
  if (rows.size() != labels.size() || rows.size() != scores.size()) {
    throw InvalidInput("rows, labels, and scores differ in length");
  }
  if (horizon < 1) throw InvalidInput("horizon must be at least one year");

  // Later outcomes per municipality; only years after the anchor are kept.
  struct Later {
    std::optional<int> first_distress;
    int observed = 0;
  };
  std::map<std::string, Later> later;
  for (const auto& rec : panel.records) {
    if (rec.year <= anchor_year || rec.year > anchor_year + horizon) continue;
    auto& l = later[rec.municipality_id];
    ++l.observed;
    if (rec.label == 1 && (!l.first_distress || rec.year < *l.first_distress)) {
      l.first_distress = rec.year;
    }
  }

  ForwardFpReport r;
  r.anchor_year = anchor_year;
  r.horizon = horizon;
  r.threshold = threshold;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].year != anchor_year) continue;
    ++r.n_evaluated;
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++r.n_true_positive;
    else if (actual) ++r.n_false_negative;
    else if (!predicted) ++r.n_true_negative;
    else {
      ++r.n_false_positive;
      FpDetail d;
      d.municipality_id = rows[i].municipality_id;
      d.score = scores[i];
      if (const auto it = later.find(d.municipality_id); it != later.end()) {
        d.first_later_distress_year = it->second.first_distress;
        d.later_years_observed = it->second.observed;
      }
      if (d.first_later_distress_year) ++r.n_fp_later_distressed;
      if (d.later_years_observed < horizon) ++r.n_fp_partially_observed;
      r.false_positives.push_back(std::move(d));
    }
  }
  if (r.n_evaluated == 0) {
    throw InvalidInput("anchor year " + std::to_string(anchor_year) + " has no rows to evaluate");
  }
  if (r.n_false_positive == 0) {
    r.degenerate = true;
  } else {
    r.fraction_later_distressed =
        static_cast<double>(r.n_fp_later_distressed) / static_cast<double>(r.n_false_positive);
  }
  std::sort(r.false_positives.begin(), r.false_positives.end(),
            [](const FpDetail& a, const FpDetail& b) { return a.municipality_id < b.municipality_id; });
  return r;
}

ForwardFpReport forward_fp_analysis(const FittedPipeline& pipeline, const FeatureMatrix& test,
                                    const Panel& panel, int anchor_year, int horizon,
                                    double threshold) {
  std::vector<std::size_t> slice;
  for (std::size_t i = 0; i < test.rows(); ++i) {
    if (test.row_keys[i].year == anchor_year) slice.push_back(i);
  }
  if (slice.empty()) {
    throw InvalidInput("anchor year " + std::to_string(anchor_year) + " is absent from the test rows");
  }
  const FeatureMatrix anchor = test.subset(slice);
  const Eigen::VectorXd scores = pipeline.scores(anchor);
  return forward_fp_analysis(anchor.row_keys, anchor.labels,
                             std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                             panel, anchor_year, horizon, threshold);
}

nlohmann::json ForwardFpReport::to_json() const {
  nlohmann::json details = nlohmann::json::array();
  for (const auto& d : false_positives) {
    details.push_back({{"municipality_id", d.municipality_id},
                       {"score", d.score},
                       {"first_later_distress_year",
                        d.first_later_distress_year ? nlohmann::json(*d.first_later_distress_year)
                                                    : nlohmann::json(nullptr)},
                       {"later_years_observed", d.later_years_observed}});
  }
  return {{"anchor_year", anchor_year},
          {"horizon", horizon},
          {"threshold", threshold},
          {"n_evaluated", n_evaluated},
          {"n_true_positive", n_true_positive},
          {"n_false_positive", n_false_positive},
          {"n_false_negative", n_false_negative},
          {"n_true_negative", n_true_negative},
          {"n_fp_later_distressed", n_fp_later_distressed},
          {"n_fp_partially_observed", n_fp_partially_observed},
          {"fraction_later_distressed", fraction_later_distressed},
          {"degenerate", degenerate},
          {"false_positives", details}};
}

void write_fp_csv(std::ostream& out, const ForwardFpReport& report) {
  out << "municipality_id,score,first_later_distress_year,later_years_observed\n";
  for (const auto& d : report.false_positives) {
    out << io::quote_field(d.municipality_id, ',') << ',' << io::format_double(d.score) << ',';
    if (d.first_later_distress_year) out << *d.first_later_distress_year;
    out << ',' << d.later_years_observed << '\n';
  }
}

CoefficientReport coefficient_report(const TrainedModel& model) {
  const auto* lr = std::get_if<LogisticModel>(&model);
  if (!lr) {
    throw UnsupportedModel("coefficient reports need a logistic model, got " +
                           std::string(to_string(family_of(model))));
  }
  CoefficientReport r;
  r.intercept = lr->intercept;
  for (std::size_t j = 0; j < lr->columns.size(); ++j) {
    CoefficientEntry e;
    e.name = lr->columns[j];
    if (const auto eq = e.name.find('='); eq != std::string::npos) {
      e.parent = e.name.substr(0, eq);
      e.level = e.name.substr(eq + 1);
    } else {
      e.parent = e.name;
    }
    e.value = lr->coefficients(static_cast<Eigen::Index>(j));
    r.entries.push_back(std::move(e));
  }
  std::stable_sort(r.entries.begin(), r.entries.end(),
                   [](const CoefficientEntry& a, const CoefficientEntry& b) { return a.value > b.value; });
  return r;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> CoefficientReport::groups() const {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const auto& g) { return g.first == entries[i].parent; });
    if (it == out.end()) {
      out.emplace_back(entries[i].parent, std::vector<std::size_t>{});
      it = std::prev(out.end());
    }
    it->second.push_back(i);
  }
  return out;
}

nlohmann::json CoefficientReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) {
    list.push_back({{"name", e.name}, {"parent", e.parent}, {"level", e.level}, {"value", e.value}});
  }
  nlohmann::json grouped = nlohmann::json::object();
  for (const auto& [parent, members] : groups()) {
    if (members.size() < 2 && entries[members.front()].level.empty()) continue;
    nlohmann::json levels = nlohmann::json::object();
    for (const auto i : members) levels[entries[i].level] = entries[i].value;
    grouped[parent] = levels;
  }
  return {{"coefficients", list}, {"intercept", intercept}, {"categorical_groups", grouped}};
}

void write_coefficient_csv(std::ostream& out, const CoefficientReport& report) {
  out << "name,parent,level,value\n";
  for (const auto& e : report.entries) {
    out << io::quote_field(e.name, ',') << ',' << io::quote_field(e.parent, ',') << ','
        << io::quote_field(e.level, ',') << ',' << io::format_double(e.value) << '\n';
  }
}

}  // namespace distress

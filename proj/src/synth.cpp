#include "distress/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "distress/error.hpp"
#include "distress/features.hpp"
#include "distress/models.hpp"
#include "distress/random.hpp"
#include "parallel.hpp"

namespace distress {

const std::array<IndicatorScale, kIndicatorCount>& indicator_scales() {
  // Canonical indicator order. Fragile municipalities invest less, depend
  // more on transfers, borrow more, and pay and collect more slowly.
  static const std::array<IndicatorScale, kIndicatorCount> scales = {{
      {30.0, 6.0, -1.0},       // incidence_of_investment (%)
      {65.0, 12.0, -1.0},      // financial_autonomy_degree (%)
      {800.0, 300.0, 1.0},     // indebtedness_per_capita
      {20.0, 10.0, 1.0},       // total_investment_financed_by_debt (%)
      {35.0, 8.0, 1.0},        // rigid_expenditure (%)
      {70.0, 10.0, -1.0},      // expense_management_speed (%)
      {75.0, 10.0, -1.0},      // collecting_capacity (%)
      {50000.0, 20000.0, 1.0}, // extra_budgetary_debts
  }};
  return scales;
}

std::map<std::string, double> default_planted_coefficients() {
  std::map<std::string, double> b = {
      {"incidence_of_investment", -0.5},
      {"financial_autonomy_degree", -1.2},
      {"indebtedness_per_capita", 1.2},
      {"total_investment_financed_by_debt", 0.6},
      {"rigid_expenditure", 1.2},
      {"expense_management_speed", -1.5},
      {"collecting_capacity", -1.5},
      {"extra_budgetary_debts", 1.0},
      {"off_balance_sheet_debts", 2.0},
      {"delta_expense_management_speed", -0.3},
      {"delta_rigid_expenditure", 0.3},
      {"delta_total_investment_financed_by_debt", 0.3},
      {"delta_financial_autonomy_degree", -0.3},
      {"delta_collecting_capacity", -0.3},
      {"delta_indebtedness_per_capita", 0.3},
      {"geo_area=north-west", -0.36},
      {"geo_area=north-east", -0.36},
      {"geo_area=center", -0.12},
      {"geo_area=south", 0.48},
      {"geo_area=islands", 0.36},
      {"bankruptcy_risk=1", -0.48},
      {"bankruptcy_risk=2", -0.24},
      {"bankruptcy_risk=3", 0.0},
      {"bankruptcy_risk=4", 0.24},
      {"bankruptcy_risk=5", 0.48},
  };
  for (int level = 1; level <= DemographicCategory::kLevels; ++level) {
    b["demographic_category=" + std::string(DemographicCategory(level).roman())] =
        -0.132 + 0.024 * (level - 1);
  }
  return b;
}

namespace {

constexpr double kRawResolution = 1e4;  // raw values carry four decimals
// The off-balance flag ignores stress; tied to it, the flag would mark the
// fragile set and penalized fits would overstate its coefficient.
constexpr double kOffBalanceCut = 1.3;

struct Coefficients {
  std::array<double, kIndicatorCount> level{};
  std::array<double, kIndicatorCount> delta{};
  double off_balance = 0.0;
  std::array<double, 5> geo{};
  std::array<double, DemographicCategory::kLevels> demographic{};
  std::array<double, BankruptcyRisk::kLevels> risk{};
};

Coefficients resolve(const std::map<std::string, double>& named) {
  Coefficients c;
  std::map<std::string, double*> slots;
  for (std::size_t k = 0; k < kIndicatorCount; ++k) {
    slots[std::string(to_string(kIndicators[k]))] = &c.level[k];
  }
  for (const auto ind : kLaggedIndicators) {
    slots["delta_" + std::string(to_string(ind))] = &c.delta[static_cast<std::size_t>(ind)];
  }
  slots["off_balance_sheet_debts"] = &c.off_balance;
  const auto& dummies = one_hot_columns();
  for (int l = 0; l < DemographicCategory::kLevels; ++l) {
    slots[dummies[static_cast<std::size_t>(l)]] = &c.demographic[static_cast<std::size_t>(l)];
  }
  for (std::size_t g = 0; g < 5; ++g) slots[dummies[DemographicCategory::kLevels + g]] = &c.geo[g];
  for (int l = 0; l < BankruptcyRisk::kLevels; ++l) {
    slots[dummies[DemographicCategory::kLevels + 5 + static_cast<std::size_t>(l)]] =
        &c.risk[static_cast<std::size_t>(l)];
  }
  for (const auto& [name, value] : named) {
    const auto it = slots.find(name);
    if (it == slots.end()) throw InvalidInput("unknown planted coefficient '" + name + "'");
    if (!std::isfinite(value)) throw InvalidInput("planted coefficient '" + name + "' is not finite");
    *it->second = value;
  }
  return c;
}

void validate(const SynthConfig& c) {
  if (c.n_municipalities == 0) throw InvalidInput("need at least one municipality");
  if (c.years.first > c.years.last) throw InvalidInput("year range is empty");
  if (c.history_start > c.years.first) throw InvalidInput("history must start before the panel");
  if (!(c.target_prevalence > 0.0 && c.target_prevalence < 1.0)) {
    throw InvalidInput("target prevalence must lie strictly between 0 and 1");
  }
  if (!(c.noise_scale > 0.0)) throw InvalidInput("noise scale must be positive");
  if (!(c.fragile_fraction >= 0.0 && c.fragile_fraction <= 1.0)) {
    throw InvalidInput("fragile fraction must lie in [0, 1]");
  }
  if (!(c.margin >= 0.0) || !std::isfinite(c.margin)) throw InvalidInput("margin must be >= 0");
  if (!(c.drift_scale >= 0.0) || !std::isfinite(c.drift_scale)) {
    throw InvalidInput("drift scale must be >= 0");
  }
  double total = 0.0;
  for (const double p : c.regional_mix) {
    if (!(p >= 0.0)) throw InvalidInput("regional mix entries must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("regional mix must sum to 1");
}

std::string municipality_id(std::size_t index, std::size_t count) {
  const int width = std::max(5, static_cast<int>(std::to_string(count).size()));
  char buf[32];
  std::snprintf(buf, sizeof buf, "M%0*zu", width, index + 1);
  return buf;
}

/// Everything about one municipality except its labels, which depend on
/// the intercept through the feedback of past distress on risk.
struct Draft {
  bool fragile = false;
  std::vector<MunicipalityYearRecord> records;
  std::vector<double> fixed_log_odds;   // all terms but intercept and risk
  std::vector<double> draws;            // label uniforms
  std::vector<DistressEvent> events;    // history not produced by labels
};

Draft draft_municipality(const SynthConfig& cfg, const Coefficients& beta, std::size_t m,
                         bool fragile) {
  Rng rng(derive_seed(cfg.seed, m));
  Draft d;
  const std::string id = municipality_id(m, cfg.n_municipalities);

  double pick = rng.uniform(), acc = 0.0;
  GeoArea geo = kGeoAreas.back();
  for (std::size_t g = 0; g < kGeoAreas.size(); ++g) {
    acc += cfg.regional_mix[g];
    if (pick < acc) {
      geo = kGeoAreas[g];
      break;
    }
  }
  const auto population =
      static_cast<std::int64_t>(std::llround(std::exp(rng.uniform(std::log(100.0), std::log(1e6)))));
  const DemographicCategory category = demographic_category_of(population);
  const double drift = cfg.drift_scale * rng.normal();
  d.fragile = fragile;

  // Pre-panel history drives the initial risk level.
  const int span = cfg.years.first - cfg.history_start;
  const double p_pre = d.fragile ? 0.4 : 0.03;
  const double p_bankrupt = d.fragile ? 0.25 : 0.01;
  if (span > 0) {
    if (rng.uniform() < p_pre) {
      d.events.push_back({id, cfg.history_start + static_cast<int>(rng.below(static_cast<std::uint64_t>(span))),
                          DistressEventKind::PreDistress});
    }
    if (rng.uniform() < p_bankrupt) {
      d.events.push_back({id, cfg.history_start + static_cast<int>(rng.below(static_cast<std::uint64_t>(span))),
                          DistressEventKind::Bankruptcy});
    }
  }

  const auto& scales = indicator_scales();
  std::array<double, kIndicatorCount> previous{};
  for (int year = cfg.years.first; year <= cfg.years.last; ++year) {
    const double stress = (fragile ? cfg.margin : 0.0) + drift * (year - cfg.years.first);
    MunicipalityYearRecord rec;
    rec.municipality_id = id;
    rec.year = year;
    auto& ind = rec.indicators;
    ind.geo_area = geo;
    ind.population = population;
    ind.demographic_category = category;
    double z = 0.0;
    std::array<double, kIndicatorCount> scaled{};
    for (std::size_t k = 0; k < kIndicatorCount; ++k) {
      const auto& s = scales[k];
      const double latent = s.load * stress + cfg.noise_scale * rng.normal();
      double raw = std::round((s.center + s.scale * latent) * kRawResolution) / kRawResolution;
      raw = is_nonnegative(kIndicators[k]) ? std::max(raw, 0.0) : std::clamp(raw, 0.0, 100.0);
      ind.values[k] = raw;
      scaled[k] = (raw - s.center) / s.scale;
      z += beta.level[k] * scaled[k];
      if (year > cfg.years.first) z += beta.delta[k] * (scaled[k] - previous[k]);
    }
    previous = scaled;
    const bool off = rng.normal() > kOffBalanceCut;
    ind.off_balance_sheet_debts = off;
    if (off) z += beta.off_balance;
    z += beta.geo[static_cast<std::size_t>(geo)];
    z += beta.demographic[static_cast<std::size_t>(category.level() - 1)];
    d.fixed_log_odds.push_back(z);
    d.draws.push_back(rng.uniform());
    if (rng.uniform() < (fragile ? 0.1 : 0.005)) {
      d.events.push_back({id, year, DistressEventKind::PreDistress});
    }
    d.records.push_back(std::move(rec));
  }
  std::sort(d.events.begin(), d.events.end());
  return d;
}

/// Runs the label recursion for intercept b. Returns the summed label
/// probabilities; when `out` is set also fills labels, risk, and events.
double simulate(const std::vector<Draft>& drafts, const Coefficients& beta, double b,
                SynthOutput* out) {
  double expected = 0.0;
  std::vector<DistressEvent> history;
  std::vector<DistressEventKind> before;
  for (const auto& d : drafts) {
    history = d.events;
    for (std::size_t t = 0; t < d.records.size(); ++t) {
      const int year = d.records[t].year;
      before.clear();
      for (const auto& e : history) {
        if (e.year < year) before.push_back(e.kind);
      }
      const BankruptcyRisk risk = bankruptcy_risk_of(before);
      const double z = b + d.fixed_log_odds[t] + beta.risk[static_cast<std::size_t>(risk.level() - 1)];
      const double p = sigmoid(z);
      expected += p;
      const int label = d.draws[t] < p ? 1 : 0;
      if (label == 1) {
        const DistressEvent e{d.records[t].municipality_id, year, DistressEventKind::Bankruptcy};
        history.insert(std::upper_bound(history.begin(), history.end(), e), e);
      }
      if (out) {
        MunicipalityYearRecord rec = d.records[t];
        rec.indicators.bankruptcy_risk = risk;
        rec.label = label;
        out->panel.records.push_back(std::move(rec));
        out->truth.log_odds.push_back(z);
        out->truth.labels.push_back(label);
        out->truth.fragile.push_back(d.fragile);
      }
    }
    if (out) {
      out->archive.events.insert(out->archive.events.end(), history.begin(), history.end());
    }
  }
  return expected;
}

}  // namespace

SynthOutput generate(const SynthConfig& config) {
  validate(config);
  const Coefficients beta = resolve(config.planted_coefficients);

  // Exactly round(fraction * n) fragile municipalities, drawn from a stream
  // disjoint from the per-municipality ones.
  std::vector<std::size_t> order(config.n_municipalities);
  for (std::size_t m = 0; m < order.size(); ++m) order[m] = m;
  Rng picker(derive_seed(config.seed, std::numeric_limits<std::uint64_t>::max()));
  picker.shuffle(std::span<std::size_t>(order));
  const auto n_fragile = static_cast<std::size_t>(
      std::llround(config.fragile_fraction * static_cast<double>(config.n_municipalities)));
  std::vector<bool> fragile(config.n_municipalities, false);
  for (std::size_t i = 0; i < n_fragile; ++i) fragile[order[i]] = true;

  std::vector<Draft> drafts(config.n_municipalities);
  detail::run_tasks(config.n_municipalities, config.jobs, [&](std::size_t m) {
    drafts[m] = draft_municipality(config, beta, m, fragile[m]);
  });
  const double n_records =
      static_cast<double>(config.n_municipalities) * static_cast<double>(config.years.size());
  auto prevalence = [&](double b) { return simulate(drafts, beta, b, nullptr) / n_records; };

  const double target = config.target_prevalence;
  const double tolerance = 0.02 * target;
  double lo = -50.0, hi = 50.0;
  if (prevalence(lo) > target + tolerance || prevalence(hi) < target - tolerance) {
    throw CalibrationFailure("target prevalence " + std::to_string(target) +
                             " is unreachable with intercepts in [-50, 50]");
  }
  double b = 0.0, achieved = 0.0;
  int iterations = 0;
  bool calibrated = false;
  while (iterations < 60) {
    ++iterations;
    b = 0.5 * (lo + hi);
    achieved = prevalence(b);
    if (std::abs(achieved - target) <= tolerance) {
      calibrated = true;
      break;
    }
    if (achieved < target) lo = b;
    else hi = b;
  }
  if (!calibrated) {
    throw CalibrationFailure("intercept bisection did not reach the target prevalence " +
                             std::to_string(target));
  }

  SynthOutput out;
  out.panel.year_range = config.years;
  simulate(drafts, beta, b, &out);
  out.archive = DistressArchive::from_events(std::move(out.archive.events));
  out.truth.coefficients = config.planted_coefficients;
  out.truth.intercept = b;
  out.truth.expected_prevalence = achieved;
  out.truth.calibration_iterations = iterations;
  return out;
}

nlohmann::json GroundTruth::to_json(const Panel& panel) const {
  nlohmann::json records = nlohmann::json::array();
  for (std::size_t r = 0; r < log_odds.size() && r < panel.records.size(); ++r) {
    records.push_back({{"municipality_id", panel.records[r].municipality_id},
                       {"year", panel.records[r].year},
                       {"log_odds", log_odds[r]},
                       {"label", labels[r]},
                       {"fragile", static_cast<bool>(fragile[r])}});
  }
  nlohmann::json scales = nlohmann::json::object();
  for (std::size_t k = 0; k < kIndicatorCount; ++k) {
    const auto& s = indicator_scales()[k];
    scales[std::string(to_string(kIndicators[k]))] = {{"center", s.center}, {"scale", s.scale}};
  }
  return {{"planted_coefficients", coefficients},
          {"intercept", intercept},
          {"expected_prevalence", expected_prevalence},
          {"calibration_iterations", calibration_iterations},
          {"indicator_scales", scales},
          {"records", records}};
}

}  // namespace distress

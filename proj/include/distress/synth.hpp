#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "distress/domain.hpp"
#include "distress/ingest.hpp"

namespace distress {

/// Location and spread of each indicator in raw units. The planted model
/// sees indicators as (raw - center) / scale.
struct IndicatorScale {
  double center;
  double scale;
  double load;  // response to latent fiscal stress, in scale units
};

const std::array<IndicatorScale, kIndicatorCount>& indicator_scales();

/// Planted log-odds coefficients keyed by encoded feature column name.
/// Indicator and delta coefficients act on scaled units; one-hot groups are
/// centered so that no level is favored on average.
std::map<std::string, double> default_planted_coefficients();

struct SynthConfig {
  std::size_t n_municipalities = 7904;
  YearRange years{2016, 2020};
  double target_prevalence = 416.0 / 39520.0;
  std::uint64_t seed = 0;
  std::map<std::string, double> planted_coefficients = default_planted_coefficients();
  /// Spread of indicator noise around the latent stress, in scale units.
  double noise_scale = 0.3;
  /// north-west, north-east, center, south, islands
  std::array<double, 5> regional_mix = {0.20, 0.15, 0.12, 0.33, 0.20};
  /// Share of municipalities under fiscal stress in every panel year,
  /// rounded to an exact count.
  double fragile_fraction = 0.017;
  /// Latent stress of a fragile municipality in indicator scale units;
  /// healthy ones sit at 0.
  double margin = 4.0;
  /// Spread of each municipality's yearly stress trend.
  double drift_scale = 0.01;
  int history_start = 1989;
  unsigned jobs = 1;
};

struct GroundTruth {
  std::map<std::string, double> coefficients;
  double intercept = 0.0;
  double expected_prevalence = 0.0;
  int calibration_iterations = 0;
  std::vector<double> log_odds;  // one per panel record, same order
  std::vector<int> labels;
  std::vector<bool> fragile;     // per panel record

  nlohmann::json to_json(const Panel& panel) const;
};

struct SynthOutput {
  Panel panel;
  DistressArchive archive;
  GroundTruth truth;
};

/// Deterministic in `config.seed` and independent of `config.jobs`.
/// Throws InvalidInput for an invalid config and CalibrationFailure when no
/// intercept in [-50, 50] reaches the target prevalence.
SynthOutput generate(const SynthConfig& config);

}  // namespace distress

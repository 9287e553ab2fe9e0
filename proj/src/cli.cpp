#include "distress/cli.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "distress/analysis.hpp"
#include "distress/error.hpp"
#include "distress/eval.hpp"
#include "distress/features.hpp"
#include "distress/ingest.hpp"
#include "distress/io.hpp"
#include "distress/models.hpp"
#include "distress/synth.hpp"

namespace distress {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string panel;
  std::string archive;
  std::string out = ".";
  std::string features;
  std::string model;
  std::string params;
  std::string grid;
  std::string family = "logistic";
  std::string years = "2016-2020";
  std::string lag_features;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::size_t folds = 5;
  std::optional<double> threshold;
  int horizon = 4;
  std::optional<int> anchor_year;
  unsigned jobs = 1;
  std::size_t k = 2;
  std::size_t municipalities = 7904;
};

enum Flag : unsigned {
  kPanel = 1u << 0,
  kArchive = 1u << 1,
  kFeatures = 1u << 2,
  kModel = 1u << 3,
  kParams = 1u << 4,
  kGrid = 1u << 5,
  kFamily = 1u << 6,
  kSeed = 1u << 7,
  kSplit = 1u << 8,
  kFolds = 1u << 9,
  kThreshold = 1u << 10,
  kHorizon = 1u << 11,
  kJobs = 1u << 12,
  kK = 1u << 13,
  kMunicipalities = 1u << 14,
  kLags = 1u << 15,
};

std::string env_name(const std::string& flag) {
  std::string name = "DISTRESS_";
  for (const char c : flag) name += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

void add_flags(CLI::App& app, Options& o, unsigned mask) {
  auto flag = [&](const std::string& name, auto& target, const std::string& help) {
    return app.add_option("--" + name, target, help)->envname(env_name(name));
  };
  flag("out", o.out, "Output directory")->capture_default_str();
  if (mask & kPanel) {
    flag("panel", o.panel, "Financial panel file");
    flag("years", o.years, "Panel year range FIRST-LAST")->capture_default_str();
  }
  if (mask & kArchive) flag("archive", o.archive, "Distress archive file");
  if (mask & kFeatures) flag("features", o.features, "Feature matrix file written by featurize");
  if (mask & kModel) flag("model", o.model, "Model file written by train or evaluate");
  if (mask & kParams) flag("params", o.params, "Fixed hyperparameters as a JSON object");
  if (mask & kGrid) flag("grid", o.grid, "Grid file; defaults to the published grid of the family");
  if (mask & kFamily) {
    flag("family", o.family, "logistic, svm, forest, or gbt")->capture_default_str();
  }
  if (mask & kSeed) flag("seed", o.seed, "Run seed")->capture_default_str();
  if (mask & kSplit) {
    flag("train-fraction", o.train_fraction, "Training share of the stratified split")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
  }
  if (mask & kFolds) flag("folds", o.folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
  if (mask & kThreshold) flag("threshold", o.threshold, "Decision threshold; family default when unset");
  if (mask & kHorizon) {
    flag("horizon", o.horizon, "Years after the anchor")->capture_default_str()->check(CLI::PositiveNumber);
    flag("anchor-year", o.anchor_year, "Anchor year; first panel year when unset");
  }
  if (mask & kJobs) flag("jobs", o.jobs, "Concurrent evaluations")->capture_default_str()->check(CLI::Range(1u, 1024u));
  if (mask & kK) flag("k", o.k, "Principal components")->capture_default_str()->check(CLI::PositiveNumber);
  if (mask & kMunicipalities) {
    flag("municipalities", o.municipalities, "Municipalities to generate")->capture_default_str();
  }
  if (mask & kLags) flag("lag-features", o.lag_features, "Comma-separated indicators to difference");
}

YearRange parse_years(const std::string& text) {
  const auto dash = text.find('-');
  const auto first = io::parse_integer(text.substr(0, dash));
  const auto last = dash == std::string::npos ? first : io::parse_integer(text.substr(dash + 1));
  if (!first || !last || *first > *last) throw InvalidInput("invalid year range '" + text + "'");
  return {static_cast<int>(*first), static_cast<int>(*last)};
}

std::vector<std::string> lag_list(const Options& o) {
  if (o.lag_features.empty()) return default_lag_features();
  std::vector<std::string> names;
  std::stringstream ss(o.lag_features);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!io::trim(item).empty()) names.emplace_back(io::trim(item));
  }
  return names;
}

std::ifstream open_input(const std::string& path, const char* what) {
  if (path.empty()) throw InvalidInput(std::string("--") + what + " is required");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput(std::string("cannot open ") + what + " file '" + path + "'");
  return in;
}

class Artifacts {
 public:
  explicit Artifacts(const std::string& dir) : dir_(dir) {}

  void write(const std::string& name, const std::string& contents) {
    fs::create_directories(dir_);
    io::write_file_atomic(dir_ / name, contents);
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
  void write_with(const std::string& name, const std::function<void(std::ostream&)>& fill) {
    std::ostringstream s;
    fill(s);
    write(name, s.str());
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

 private:
  fs::path dir_;
};

struct LoadedPanel {
  Panel panel;
  CleaningReport report;
  std::vector<Diagnostic> diagnostics;
};

LoadedPanel load_panel(const Options& o) {
  auto panel_in = open_input(o.panel, "panel");
  auto archive_in = open_input(o.archive, "archive");
  PanelParseResult parsed = parse_financial_panel(panel_in);
  const DistressArchive archive = parse_distress_archive(archive_in);
  MergeResult merged = merge_panel(parsed.rows, archive, parse_years(o.years));
  CleanResult cleaned = clean(merged.panel);
  LoadedPanel out{std::move(cleaned.panel), std::move(cleaned.report), std::move(parsed.diagnostics)};
  out.diagnostics.insert(out.diagnostics.end(), merged.warnings.begin(), merged.warnings.end());
  return out;
}

FeatureMatrix load_matrix(const Options& o, const std::vector<std::string>& lags, Panel* panel_out = nullptr) {
  if (!o.features.empty()) {
    if (panel_out) throw InvalidInput("this subcommand needs --panel and --archive, not --features");
    auto in = open_input(o.features, "features");
    return read_feature_csv(in);
  }
  LoadedPanel loaded = load_panel(o);
  FeatureMatrix m = build_feature_matrix(loaded.panel, lags);
  if (panel_out) *panel_out = std::move(loaded.panel);
  return m;
}

struct Split {
  FeatureMatrix train;
  FeatureMatrix test;
};

Split split_matrix(const FeatureMatrix& m, const Options& o) {
  const SplitIndices idx = stratified_split(m.labels, o.train_fraction, stage_seeds(o.seed).split);
  return {m.subset(idx.train), m.subset(idx.test)};
}

EvalOptions eval_options(const Options& o) {
  EvalOptions e;
  e.folds = o.folds;
  e.seed = o.seed;
  e.threshold = o.threshold;
  e.jobs = o.jobs;
  return e;
}

std::vector<ModelConfig> grid_candidates(const Options& o) {
  const Family family = parse_family(o.family);
  if (o.grid.empty()) return expand_grid(paper_grid(family));
  for (const auto& spec : parse_grid_file(io::read_file(o.grid))) {
    if (spec.family == family) return expand_grid(spec);
  }
  throw InvalidInput("grid file '" + o.grid + "' has no grid for " + std::string(to_string(family)));
}

ModelConfig fixed_config(const Options& o) {
  json params = json::object();
  if (!o.params.empty()) {
    try {
      params = json::parse(o.params);
    } catch (const json::exception& e) {
      throw InvalidInput(std::string("--params is not valid JSON: ") + e.what());
    }
  }
  return config_from_json(parse_family(o.family), params);
}

/// Fixed hyperparameters when --params is given, otherwise the grid winner.
ModelConfig choose_config(const FeatureMatrix& train, const Options& o, Artifacts& art,
                          std::optional<GridSearchResult>& searched) {
  if (!o.params.empty()) return fixed_config(o);
  searched = grid_search(train, grid_candidates(o), eval_options(o));
  art.write_json("grid_report.json", searched->to_json());
  art.write_with("grid.csv", [&](std::ostream& s) { write_grid_csv(s, *searched); });
  return searched->candidates[searched->best];
}

json model_file(const FittedPipeline& p, const Options& o) {
  json j = pipeline_to_json(p);
  j["run"] = {{"seed", o.seed}, {"train_fraction", o.train_fraction}};
  return j;
}

FittedPipeline read_model(const Options& o) {
  if (o.model.empty()) throw InvalidInput("--model is required");
  json j;
  try {
    j = json::parse(io::read_file(o.model));
  } catch (const json::exception& e) {
    throw ParseError("model file '" + o.model + "' is not valid JSON: " + e.what());
  }
  return pipeline_from_json(j);
}

std::string fmt(double v) { return io::format_double(v); }

// Subcommands. Each returns the one-line summary.

std::string cmd_synth(const Options& o) {
  SynthConfig cfg;
  cfg.seed = o.seed;
  cfg.n_municipalities = o.municipalities;
  cfg.jobs = o.jobs;
  const SynthOutput s = generate(cfg);
  Artifacts art(o.out);
  art.write_with("panel.csv", [&](std::ostream& out) { write_panel_csv(out, s.panel); });
  art.write_with("archive.csv", [&](std::ostream& out) { write_archive_csv(out, s.archive); });
  art.write_json("ground_truth.json", s.truth.to_json(s.panel));
  const auto positives = std::count(s.truth.labels.begin(), s.truth.labels.end(), 1);
  return "synth: " + std::to_string(s.panel.records.size()) + " records, " + std::to_string(positives) +
         " in distress, intercept " + fmt(s.truth.intercept) + " -> " + o.out;
}

std::string cmd_ingest(const Options& o) {
  const LoadedPanel loaded = load_panel(o);
  Artifacts art(o.out);
  art.write_with("clean_panel.csv", [&](std::ostream& out) { write_panel_csv(out, loaded.panel, true); });
  json diagnostics = json::array();
  for (const auto& d : loaded.diagnostics) {
    diagnostics.push_back({{"kind", to_string(d.kind)}, {"line", d.line}, {"column", d.column}, {"message", d.message}});
  }
  json report = to_json(loaded.report);
  report["diagnostics"] = diagnostics;
  art.write_json("cleaning_report.json", report);
  const auto positives = std::count_if(loaded.panel.records.begin(), loaded.panel.records.end(),
                                       [](const auto& r) { return r.label == 1; });
  return "ingest: " + std::to_string(loaded.report.rows_kept) + " of " + std::to_string(loaded.report.rows_read) +
         " rows kept, " + std::to_string(positives) + " in distress, " + std::to_string(loaded.diagnostics.size()) +
         " diagnostics";
}

std::string cmd_featurize(const Options& o) {
  const LoadedPanel loaded = load_panel(o);
  std::size_t imputed = 0;
  const FeatureMatrix m = build_feature_matrix(loaded.panel, lag_list(o), &imputed);
  Artifacts art(o.out);
  art.write_with("features.csv", [&](std::ostream& out) { write_feature_csv(out, m); });
  return "featurize: " + std::to_string(m.rows()) + " rows x " + std::to_string(m.cols()) + " columns, " +
         std::to_string(imputed) + " first-year deltas set to 0";
}

std::string cmd_cv(const Options& o) {
  const FeatureMatrix m = load_matrix(o, lag_list(o));
  const Split s = split_matrix(m, o);
  const CrossValidationResult cv = cross_validate(s.train, fixed_config(o), eval_options(o));
  Artifacts art(o.out);
  art.write_json("cv_report.json", cv.to_json());
  art.write_with("cv_roc.csv", [&](std::ostream& out) { write_curve_csv(out, cv.roc); });
  art.write_with("cv_pr.csv", [&](std::ostream& out) { write_curve_csv(out, cv.pr); });
  return "cv: " + describe(cv.config) + " mean macro F1 " + fmt(cv.mean_macro_f1) + " over " +
         std::to_string(cv.folds.size()) + " folds";
}

std::string cmd_grid(const Options& o) {
  const FeatureMatrix m = load_matrix(o, lag_list(o));
  const Split s = split_matrix(m, o);
  const GridSearchResult g = grid_search(s.train, grid_candidates(o), eval_options(o));
  Artifacts art(o.out);
  art.write_json("grid_report.json", g.to_json());
  art.write_with("grid.csv", [&](std::ostream& out) { write_grid_csv(out, g); });
  return "grid: " + std::to_string(g.candidates.size()) + " candidates, best " + describe(g.candidates[g.best]) +
         " mean macro F1 " + fmt(g.mean_macro_f1[g.best]);
}

std::string cmd_train(const Options& o) {
  const auto lags = lag_list(o);
  const FeatureMatrix m = load_matrix(o, lags);
  const Split s = split_matrix(m, o);
  Artifacts art(o.out);
  std::optional<GridSearchResult> searched;
  const ModelConfig config = choose_config(s.train, o, art, searched);
  const FittedPipeline p = fit_pipeline(s.train, config, stage_seeds(o.seed).model, lags);
  art.write_json("model.json", model_file(p, o));
  return "train: " + describe(config) + " on " + std::to_string(s.train.rows()) + " rows -> " +
         art.path("model.json");
}

std::string cmd_evaluate(const Options& o) {
  const auto lags = lag_list(o);
  const FeatureMatrix m = load_matrix(o, lags);
  const Split s = split_matrix(m, o);
  Artifacts art(o.out);
  std::optional<GridSearchResult> searched;
  const ModelConfig config = choose_config(s.train, o, art, searched);
  EvaluationReport r = final_fit_and_test(config, s.train, s.test, o.threshold, o.seed);
  r.pipeline.lag_features = lags;
  art.write_json("evaluation_report.json", r.to_json());
  art.write_with("roc.csv", [&](std::ostream& out) { write_curve_csv(out, r.roc); });
  art.write_with("pr.csv", [&](std::ostream& out) { write_curve_csv(out, r.pr); });
  art.write_with("test_scores.csv", [&](std::ostream& out) {
    out << "municipality_id,year,score,label\n";
    for (std::size_t i = 0; i < s.test.rows(); ++i) {
      out << io::quote_field(s.test.row_keys[i].municipality_id, ',') << ',' << s.test.row_keys[i].year << ','
          << fmt(r.test_scores[i]) << ',' << s.test.labels[i] << '\n';
    }
  });
  art.write_json("model.json", model_file(r.pipeline, o));
  const auto& cm = r.cm;
  return "evaluate: " + describe(config) + " TP " + std::to_string(cm.tp) + " FN " + std::to_string(cm.fn) +
         " FP " + std::to_string(cm.fp) + " TN " + std::to_string(cm.tn) + ", macro F1 " +
         fmt(r.metrics.macro_f1) + ", ROC AUC " + fmt(r.roc.auc) + ", AP " + fmt(r.pr.auc);
}

std::string cmd_predict(const Options& o) {
  const FittedPipeline p = read_model(o);
  const FeatureMatrix m = load_matrix(o, p.lag_features);
  const Eigen::VectorXd scores = p.scores(m);
  const double threshold = o.threshold.value_or(default_threshold(family_of(p.model)));
  const std::vector<int> labels =
      predict_labels(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), threshold);
  Artifacts art(o.out);
  art.write_with("predictions.csv", [&](std::ostream& out) {
    out << "municipality_id,year,score,predicted\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
      out << io::quote_field(m.row_keys[i].municipality_id, ',') << ',' << m.row_keys[i].year << ','
          << fmt(scores(static_cast<Eigen::Index>(i))) << ',' << labels[i] << '\n';
    }
  });
  const auto flagged = std::count(labels.begin(), labels.end(), 1);
  return "predict: " + std::to_string(m.rows()) + " rows scored, " + std::to_string(flagged) +
         " flagged at threshold " + fmt(threshold);
}

std::string cmd_explain(const Options& o) {
  const FittedPipeline p = read_model(o);
  const CoefficientReport r = coefficient_report(p.model);
  Artifacts art(o.out);
  art.write_json("coefficients.json", r.to_json());
  art.write_with("coefficients.csv", [&](std::ostream& out) { write_coefficient_csv(out, r); });
  return "explain: " + std::to_string(r.entries.size()) + " coefficients, largest " + r.entries.front().name +
         " " + fmt(r.entries.front().value) + ", smallest " + r.entries.back().name + " " +
         fmt(r.entries.back().value);
}

std::string cmd_fp_analysis(const Options& o) {
  const auto lags = lag_list(o);
  Panel panel;
  const FeatureMatrix m = load_matrix(o, lags, &panel);
  const Split s = split_matrix(m, o);
  Artifacts art(o.out);
  FittedPipeline p;
  if (!o.model.empty()) {
    p = read_model(o);
  } else {
    std::optional<GridSearchResult> searched;
    p = fit_pipeline(s.train, choose_config(s.train, o, art, searched), stage_seeds(o.seed).model, lags);
  }
  const double threshold = o.threshold.value_or(default_threshold(family_of(p.model)));
  const int anchor = o.anchor_year.value_or(panel.year_range.first);
  const ForwardFpReport r = forward_fp_analysis(p, s.test, panel, anchor, o.horizon, threshold);
  art.write_json("fp_report.json", r.to_json());
  art.write_with("fp_details.csv", [&](std::ostream& out) { write_fp_csv(out, r); });
  return "fp-analysis: anchor " + std::to_string(anchor) + ", " + std::to_string(r.n_false_positive) +
         " false positives, " + std::to_string(r.n_fp_later_distressed) + " later distressed (" +
         fmt(r.fraction_later_distressed) + ")";
}

std::string cmd_pca(const Options& o) {
  const FeatureMatrix m = load_matrix(o, lag_list(o));
  const Split s = split_matrix(m, o);
  const Standardizer st = fit_standardizer(s.train);
  const PCAModel pca = fit_pca(apply_standardizer(st, s.train), o.k);
  const FeatureMatrix all = apply_standardizer(st, m);
  const Eigen::MatrixXd scores = project(pca, all);
  Artifacts art(o.out);
  json j = pca.to_json();
  j["standardizer"] = st.to_json();
  art.write_json("pca.json", j);
  art.write_with("pca_scores.csv", [&](std::ostream& out) { write_pca_scores_csv(out, all, scores); });
  double shown = 0.0;
  for (Eigen::Index c = 0; c < pca.explained_ratio.size(); ++c) shown += pca.explained_ratio(c);
  return "pca: " + std::to_string(o.k) + " components explain " + fmt(shown) + " of the variance";
}

struct Subcommand {
  const char* name;
  const char* help;
  unsigned flags;
  std::string (*run)(const Options&);
};

constexpr unsigned kData = kPanel | kArchive | kFeatures | kLags;
constexpr unsigned kFit = kFamily | kParams | kGrid | kSeed | kSplit | kFolds | kThreshold | kJobs;

const Subcommand kSubcommands[] = {
    {"synth", "Generate a synthetic panel, archive, and ground truth", kSeed | kJobs | kMunicipalities, cmd_synth},
    {"ingest", "Parse, merge, and clean a panel", kPanel | kArchive, cmd_ingest},
    {"featurize", "Write the encoded feature matrix", kPanel | kArchive | kLags, cmd_featurize},
    {"cv", "Cross-validate fixed hyperparameters on the training split", kData | kFit, cmd_cv},
    {"grid", "Grid search on the training split", kData | kFit, cmd_grid},
    {"train", "Fit a model on the training split", kData | kFit, cmd_train},
    {"evaluate", "Select, refit, and score the held-out split", kData | kFit, cmd_evaluate},
    {"predict", "Score rows with a saved model", kPanel | kArchive | kFeatures | kModel | kThreshold, cmd_predict},
    {"explain", "Report logistic coefficients of a saved model", kModel, cmd_explain},
    {"fp-analysis", "Follow false positives of an anchor year forward",
     kPanel | kArchive | kLags | kModel | kFit | kHorizon, cmd_fp_analysis},
    {"pca", "Principal components of the standardized design matrix", kData | kSeed | kSplit | kK, cmd_pca},
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Early warning of municipal financial distress", "distress"};
  app.require_subcommand(1);
  Options opts;
  std::vector<std::pair<CLI::App*, const Subcommand*>> subs;
  for (const auto& s : kSubcommands) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_flags(*sub, opts, s.flags);
    subs.emplace_back(sub, &s);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto parsed = app.get_subcommands();
    out << (parsed.empty() ? app.help() : parsed.front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  for (const auto& [sub, spec] : subs) {
    if (!sub->parsed()) continue;
    try {
      out << spec->run(opts) << "\n";
      return 0;
    } catch (const InvalidInput& e) {
      err << "error: " << e.what() << "\n";
      return 1;
    } catch (const IoError& e) {
      err << "error: " << e.what() << "\n";
      return 1;
    } catch (const fs::filesystem_error& e) {
      err << "error: " << e.what() << "\n";
      return 1;
    } catch (const std::exception& e) {
      err << "internal error: " << e.what() << "\n";
      return 2;
    }
  }
  return 1;
}

}  // namespace distress

#include "commands.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "multitreat/errors.hpp"
#include "multitreat/oracle.hpp"
#include "multitreat/regress.hpp"

namespace multitreat::cli {

namespace {

CsvLoadOptions csv_options(const DataOptions& options) {
  CsvLoadOptions csv;
  csv.outcome_column = options.outcome;
  csv.treatment_column = options.treatment;
  csv.control_arm = options.control_arm;
  for (const std::string& spec : options.controls) {
    CsvColumnSpec col;
    const auto colon = spec.rfind(':');
    if (colon == std::string::npos) {
      col.name = spec;
    } else {
      col.name = spec.substr(0, colon);
      const std::string kind = spec.substr(colon + 1);
      if (kind == "categorical") {
        col.kind = ColumnKind::categorical;
      } else if (kind == "continuous") {
        col.kind = ColumnKind::continuous;
      } else {
        fail(ErrorCode::InvalidSpec, "unknown control kind ':" + kind + "' (use :categorical or :continuous)");
      }
    }
    csv.control_columns.push_back(col);
  }
  if (csv.control_columns.empty()) {
    fail(ErrorCode::InvalidSpec, "at least one --control column is required");
  }
  return csv;
}

DesignSpec design_for(const Dataset& data) {
  DesignSpec spec;
  spec.control_style =
      data.all_controls_categorical() ? ControlStyle::strata_dummies : ControlStyle::linear;
  return spec;
}

Json data_fingerprint(const DataOptions& options, const Dataset& data) {
  Json input;
  input["path"] = options.data_path;
  input["rows"] = data.rows();
  input["dropped_rows"] = data.dropped_rows;
  Json columns;
  columns["outcome"] = options.outcome;
  columns["treatment"] = options.treatment;
  columns["controls"] = options.controls;
  input["columns"] = columns;
  input["content_hash"] = file_hash(options.data_path);
  input["arms"] = data.arm_names;
  return input;
}

Json correlation_json(const WeightEffectCorrelation& corr) {
  Json out = Json::array();
  for (const auto& row : corr.corr) {
    Json jrow = Json::array();
    for (const auto& cell : row) {
      if (cell) {
        jrow.push_back(*cell);
      } else {
        jrow.push_back(nullptr);
      }
    }
    out.push_back(std::move(jrow));
  }
  return out;
}

}  // namespace

Json run_decompose(const DecomposeOptions& options) {
  Dataset data = load_csv(options.data.data_path, csv_options(options.data));
  DesignSpec spec = design_for(data);

  Json report = report_skeleton("decompose");
  report["seed"] = options.seed;
  report["invocation"] = {{"bootstrap", options.bootstrap},
                          {"seed", options.seed},
                          {"jobs", options.jobs},
                          {"control_style", spec.control_style == ControlStyle::strata_dummies
                                                ? "strata_dummies"
                                                : "linear"}};
  report["input"] = data_fingerprint(options.data, data);

  WeightDecomposition decomp = decompose_beta(data, spec);
  Json results;
  results["treatment_arms"] =
      std::vector<std::string>(data.arm_names.begin() + 1, data.arm_names.end());
  results["control_arm"] = data.arm_names.front();
  results["strata"] = decomp.strata.num_strata();
  results["excluded_strata"] = decomp.excluded_strata;
  results["beta"] = to_json(decomp.beta_hat);
  results["beta_se_robust"] = to_json(decomp.beta_se_robust);
  results["own"] = to_json(decomp.own_component);
  results["contamination"] = to_json(decomp.contamination_component);

  if (options.bootstrap > 0) {
    BootstrapOptions boot;
    boot.replicates = options.bootstrap;
    boot.seed = options.seed;
    boot.jobs = options.jobs;
    DecompositionSe se = decomposition_se(data, spec, boot);
    results["bootstrap"] = {{"method", "iid row bootstrap"},
                            {"replicates", options.bootstrap},
                            {"seed", options.seed},
                            {"redraws", se.redraws},
                            {"beta_se", to_json(se.beta_se)},
                            {"own_se", to_json(se.own_se)},
                            {"contamination_se", to_json(se.contamination_se)}};
  } else {
    results["bootstrap"] = nullptr;
  }

  WorstCaseBounds bounds = worst_case_bounds(decomp);
  results["worst_case"] = {
      {"lower", to_json(bounds.lower)},
      {"upper", to_json(bounds.upper)},
      {"convention",
       "stratum-level conditional effects reordered against aggregated cross-treatment "
       "weights; each contaminating arm permuted independently"}};

  if (decomp.strata.num_strata() - static_cast<long>(decomp.excluded_strata.size()) >= 2) {
    results["weight_effect_correlation"] = correlation_json(weight_effect_correlation(decomp));
  } else {
    results["weight_effect_correlation"] = nullptr;
  }

  HeterogeneitySd het = heterogeneity_sd(decomp);
  results["heterogeneity_sd"] = {{"sd", to_json(het.sd)},
                                 {"clamped", Json(het.clamped)}};

  Json scatter = Json::array();
  for (const ScatterRow& row : scatter_table(decomp)) {
    Json entry;
    entry["stratum"] = row.stratum;
    entry["count"] = row.count;
    entry["lambda"] = to_json(row.lambda);
    entry["tau"] = to_json(row.tau);
    entry["tau_se"] = to_json(row.tau_se);
    scatter.push_back(std::move(entry));
  }
  results["scatter"] = std::move(scatter);

  report["results"] = std::move(results);
  for (const std::string& w : decomp.warnings) report["warnings"].push_back(w);
  return report;
}

Json run_estimate(const EstimateOptions& options) {
  Dataset data = load_csv(options.data.data_path, csv_options(options.data));
  DesignSpec spec = design_for(data);

  Json report = report_skeleton("estimate");
  report["invocation"] = {{"which", options.which}};
  report["input"] = data_fingerprint(options.data, data);

  const bool all = options.which == "all";
  Json results;
  results["treatment_arms"] =
      std::vector<std::string>(data.arm_names.begin() + 1, data.arm_names.end());
  results["control_arm"] = data.arm_names.front();
  Json sets = Json::array();
  auto add = [&](const EstimateSet& set) {
    sets.push_back(estimate_set_to_json(set));
    for (const std::string& w : set.warnings) report["warnings"].push_back(w);
  };
  if (all) add(uninteracted(data, spec));
  if (all || options.which == "ate") add(ate_interacted(data, spec));
  if (all || options.which == "one_at_a_time") add(one_at_a_time(data, spec));
  if (all || options.which == "common") add(common_weights(data, spec));
  if (sets.empty()) {
    fail(ErrorCode::InvalidSpec, "--which must be one of ate, one_at_a_time, common, all");
  }
  results["estimates"] = std::move(sets);
  report["results"] = std::move(results);
  return report;
}

namespace {

long find_cell_scale(const PopulationSpec& spec) {
  for (long scale = 1; scale <= 1000000; ++scale) {
    bool ok = true;
    for (const auto& stratum : spec.strata) {
      for (Eigen::Index a = 0; a < stratum.p.size() && ok; ++a) {
        const double exact = stratum.mass * stratum.p[a] * static_cast<double>(scale);
        if (std::abs(exact - std::round(exact)) > 1e-6) ok = false;
      }
      if (!ok) break;
    }
    if (ok) return scale;
  }
  fail(ErrorCode::NonIntegralCells,
       "no cell scale up to 1e6 makes every stratum-by-arm cell integral; pass --n explicitly");
}

}  // namespace

Json run_oracle(const OracleOptions& options) {
  PopulationSpec spec = load_population_spec(options.spec_path);
  Json report = report_skeleton("oracle");
  report["invocation"] = {{"spec", options.spec_path},
                          {"check", options.check},
                          {"n", options.cell_scale}};
  report["input"] = {{"path", options.spec_path},
                     {"content_hash", file_hash(options.spec_path)},
                     {"strata", spec.num_strata()},
                     {"treatments", spec.num_treatments()}};

  OracleResult oracle = population_beta(spec);
  Json results;
  results["beta"] = to_json(oracle.beta);
  results["own"] = to_json(oracle.own);
  results["contamination"] = to_json(oracle.contamination);
  if (oracle.phi) results["phi"] = *oracle.phi;
  Json lambda = Json::array();
  for (long s = 0; s < spec.num_strata(); ++s) {
    lambda.push_back({{"stratum", s},
                      {"mass", spec.strata[static_cast<std::size_t>(s)].mass},
                      {"lambda", to_json(oracle.lambda[static_cast<std::size_t>(s)])},
                      {"tau", to_json(spec.tau(s))}});
  }
  results["lambda"] = std::move(lambda);

  // Optimal weights and the efficiency bounds they attain, per contrast.
  const int k = spec.num_treatments();
  Json weights;
  bool have_weights = true;
  try {
    std::vector<double> common = optimal_weights(spec, {WeightContrast::Kind::all_pairs, 0});
    weights["common"] = common;
    Json per_arm = Json::array();
    for (int arm = 1; arm <= k; ++arm) {
      std::vector<double> single = optimal_weights(spec, {WeightContrast::Kind::single, arm});
      Eigen::VectorXd c = Eigen::VectorXd::Zero(k + 1);
      c[0] = -1.0;
      c[arm] = 1.0;
      per_arm.push_back(
          {{"arm", arm},
           {"one_at_a_time", single},
           {"bound_one_at_a_time", efficiency_bound(spec, single, c)},
           {"bound_common", efficiency_bound(spec, common, c)},
           {"bound_unweighted",
            efficiency_bound(spec, std::vector<double>(spec.strata.size(), 1.0), c)}});
    }
    weights["contrasts"] = std::move(per_arm);
  } catch (const Error& e) {
    have_weights = false;
    report["warnings"].push_back(std::string("optimal weights unavailable: ") + e.what());
  }
  results["optimal_weights"] = have_weights ? weights : Json(nullptr);

  if (options.check) {
    const long scale = options.cell_scale > 0 ? options.cell_scale : find_cell_scale(spec);
    Dataset enumerated = enumerate_exact(spec, scale);
    DesignSpec design;
    design.control_style = ControlStyle::strata_dummies;
    WeightDecomposition decomp = decompose_beta(enumerated, design);
    double max_lambda_diff = 0.0;
    for (long s = 0; s < spec.num_strata(); ++s) {
      max_lambda_diff = std::max(
          max_lambda_diff, (decomp.lambda_per_stratum[static_cast<std::size_t>(s)] -
                            oracle.lambda[static_cast<std::size_t>(s)])
                               .cwiseAbs()
                               .maxCoeff());
    }
    const double beta_diff = (decomp.beta_hat - oracle.beta).cwiseAbs().maxCoeff();
    const double own_diff = (decomp.own_component - oracle.own).cwiseAbs().maxCoeff();
    const double contamination_diff =
        (decomp.contamination_component - oracle.contamination).cwiseAbs().maxCoeff();
    const double worst = std::max({max_lambda_diff, beta_diff, own_diff, contamination_diff});
    results["check"] = {{"cell_scale", scale},
                        {"rows", enumerated.rows()},
                        {"max_lambda_diff", max_lambda_diff},
                        {"max_beta_diff", beta_diff},
                        {"max_own_diff", own_diff},
                        {"max_contamination_diff", contamination_diff},
                        {"pass", worst <= 1e-9}};
  }

  report["results"] = std::move(results);
  return report;
}

Json run_simulate(const SimulateOptions& options) {
  PopulationSpec spec = load_population_spec(options.spec_path);
  Json report = report_skeleton("simulate");
  report["seed"] = options.seed;
  report["invocation"] = {{"spec", options.spec_path},
                          {"n", options.n},
                          {"reps", options.reps},
                          {"seed", options.seed},
                          {"jobs", options.jobs}};
  report["input"] = {{"path", options.spec_path},
                     {"content_hash", file_hash(options.spec_path)},
                     {"strata", spec.num_strata()},
                     {"treatments", spec.num_treatments()}};

  const int k = spec.num_treatments();
  OracleResult oracle = population_beta(spec);

  // Oracle estimands per estimator kind.
  Eigen::VectorXd ate_estimand = Eigen::VectorXd::Zero(k);
  for (long s = 0; s < spec.num_strata(); ++s) {
    ate_estimand += spec.strata[static_cast<std::size_t>(s)].mass * spec.tau(s);
  }
  auto weighted_estimand = [&](const std::vector<double>& weights) {
    Eigen::VectorXd numerator = Eigen::VectorXd::Zero(k);
    double denominator = 0.0;
    for (long s = 0; s < spec.num_strata(); ++s) {
      const double mass = spec.strata[static_cast<std::size_t>(s)].mass;
      numerator += mass * weights[static_cast<std::size_t>(s)] * spec.tau(s);
      denominator += mass * weights[static_cast<std::size_t>(s)];
    }
    return Eigen::VectorXd((numerator / denominator).eval());
  };
  Eigen::VectorXd one_at_a_time_estimand(k);
  for (int arm = 1; arm <= k; ++arm) {
    one_at_a_time_estimand[arm - 1] =
        weighted_estimand(optimal_weights(spec, {WeightContrast::Kind::single, arm}))[arm - 1];
  }
  Eigen::VectorXd common_estimand =
      weighted_estimand(optimal_weights(spec, {WeightContrast::Kind::all_pairs, 0}));

  struct Draw {
    bool ok = false;
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
  };
  const std::array<EstimatorKind, 4> kinds = {
      EstimatorKind::Uninteracted, EstimatorKind::ATEInteracted, EstimatorKind::OneAtATime,
      EstimatorKind::CommonWeights};
  std::vector<std::array<Draw, 4>> draws(static_cast<std::size_t>(options.reps));

  auto run_rep = [&](int rep) {
    Dataset data = simulate(spec, options.n, derive_seed(options.seed, static_cast<std::uint64_t>(rep)));
    DesignSpec design;
    design.control_style = ControlStyle::strata_dummies;
    for (std::size_t which = 0; which < kinds.size(); ++which) {
      try {
        EstimateSet set;
        switch (kinds[which]) {
          case EstimatorKind::Uninteracted: set = uninteracted(data, design); break;
          case EstimatorKind::ATEInteracted: set = ate_interacted(data, design); break;
          case EstimatorKind::OneAtATime: set = one_at_a_time(data, design); break;
          case EstimatorKind::CommonWeights: set = common_weights(data, design); break;
        }
        draws[static_cast<std::size_t>(rep)][which] = {true, set.beta, set.se_robust};
      } catch (const Error&) {
        // failed replicate for this estimator, counted below
      }
    }
  };

  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    for (int rep = 0; rep < options.reps; ++rep) run_rep(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    for (int j = 0; j < jobs; ++j) {
      workers.emplace_back([&]() {
        for (;;) {
          const int rep = next.fetch_add(1);
          if (rep >= options.reps) return;
          run_rep(rep);
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  const std::array<Eigen::VectorXd, 4> estimands = {oracle.beta, ate_estimand,
                                                    one_at_a_time_estimand, common_estimand};
  Json estimators = Json::array();
  for (std::size_t which = 0; which < kinds.size(); ++which) {
    std::vector<const Draw*> ok;
    for (const auto& rep : draws) {
      if (rep[which].ok) ok.push_back(&rep[which]);
    }
    Json block;
    block["kind"] = estimator_kind_name(kinds[which]);
    block["estimand"] = to_json(estimands[which]);
    block["replicates_used"] = ok.size();
    block["replicates_failed"] = static_cast<long>(draws.size() - ok.size());
    if (!ok.empty()) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
      Eigen::VectorXd mean_se = Eigen::VectorXd::Zero(k);
      for (const Draw* d : ok) {
        mean += d->beta;
        mean_se += d->se;
      }
      mean /= static_cast<double>(ok.size());
      mean_se /= static_cast<double>(ok.size());
      Eigen::VectorXd sd = Eigen::VectorXd::Zero(k);
      Eigen::VectorXd coverage = Eigen::VectorXd::Zero(k);
      for (const Draw* d : ok) {
        sd += (d->beta - mean).cwiseAbs2();
        for (int a = 0; a < k; ++a) {
          if (std::abs(d->beta[a] - estimands[which][a]) <= 1.959963984540054 * d->se[a]) {
            coverage[a] += 1.0;
          }
        }
      }
      sd = ok.size() > 1
               ? Eigen::VectorXd((sd / static_cast<double>(ok.size() - 1)).cwiseSqrt().eval())
               : Eigen::VectorXd::Zero(k);
      coverage /= static_cast<double>(ok.size());
      block["mean"] = to_json(mean);
      block["bias"] = to_json(Eigen::VectorXd(mean - estimands[which]));
      block["sd_empirical"] = to_json(sd);
      block["mean_se_robust"] = to_json(mean_se);
      block["coverage_robust_95"] = to_json(coverage);
    }
    estimators.push_back(std::move(block));
  }

  Json results;
  results["n"] = options.n;
  results["reps"] = options.reps;
  results["estimators"] = std::move(estimators);
  report["results"] = std::move(results);
  return report;
}

namespace {

void render_panel_a(std::ostringstream& out, const Json& results) {
  const auto arms = results["treatment_arms"].get<std::vector<std::string>>();
  const bool boot = !results["bootstrap"].is_null();
  out << "Contamination diagnostics (strata: " << results["strata"].get<long>() << ")\n";
  const int w = 15;
  out << pad_left("arm", 16) << pad_left("coefficient", w) << pad_left("own", w)
      << pad_left("bias", w) << pad_left("worst-", w) << pad_left("worst+", w) << "\n";
  for (std::size_t a = 0; a < arms.size(); ++a) {
    out << pad_left(arms[a], 16)
        << pad_left(fixed(results["beta"][a].get<double>()), w)
        << pad_left(fixed(results["own"][a].get<double>()), w)
        << pad_left(fixed(results["contamination"][a].get<double>()), w)
        << pad_left(fixed(results["worst_case"]["lower"][a].get<double>()), w)
        << pad_left(fixed(results["worst_case"]["upper"][a].get<double>()), w) << "\n";
    out << pad_left("", 16)
        << pad_left("(" + fixed(results["beta_se_robust"][a].get<double>()) + ")", w);
    if (boot) {
      out << pad_left("(" + fixed(results["bootstrap"]["own_se"][a].get<double>()) + ")", w)
          << pad_left("(" + fixed(results["bootstrap"]["contamination_se"][a].get<double>()) + ")",
                      w);
    }
    out << "\n";
  }
  out << "\nheterogeneity sd:";
  for (std::size_t a = 0; a < arms.size(); ++a) {
    out << " " << arms[a] << "=" << fixed(results["heterogeneity_sd"]["sd"][a].get<double>(), 3);
    if (results["heterogeneity_sd"]["clamped"][a].get<bool>()) out << " (clamped)";
  }
  out << "\n";
  if (!results["weight_effect_correlation"].is_null()) {
    out << "weight-effect correlations (weight row k, effect column l):\n";
    for (std::size_t a = 0; a < arms.size(); ++a) {
      out << pad_left(arms[a], 16);
      for (std::size_t l = 0; l < arms.size(); ++l) {
        const Json& cell = results["weight_effect_correlation"][a][l];
        out << pad_left(cell.is_null() ? "undef" : fixed(cell.get<double>()), 10);
      }
      out << "\n";
    }
  }
}

void render_panel_b(std::ostringstream& out, const Json& results) {
  const auto arms = results["treatment_arms"].get<std::vector<std::string>>();
  out << "Treatment effect estimates\n";
  const int w = 16;
  out << pad_left("arm", 16);
  for (const auto& set : results["estimates"]) {
    out << pad_left(set["kind"].get<std::string>(), w);
  }
  out << "\n";
  for (std::size_t a = 0; a < arms.size(); ++a) {
    out << pad_left(arms[a], 16);
    for (const auto& set : results["estimates"]) {
      out << pad_left(fixed(set["beta"][a].get<double>()), w);
    }
    out << "\n" << pad_left("", 16);
    for (const auto& set : results["estimates"]) {
      out << pad_left("(" + fixed(set["se_robust"][a].get<double>()) + ")", w);
    }
    out << "\n" << pad_left("", 16);
    for (const auto& set : results["estimates"]) {
      if (set["se_known_pscore"].is_null()) {
        out << pad_left("", w);
      } else {
        out << pad_left("[" + fixed(set["se_known_pscore"][a].get<double>()) + "]", w);
      }
    }
    out << "\n";
  }
}

void render_oracle(std::ostringstream& out, const Json& results) {
  out << "Population decomposition\n";
  const std::size_t k = results["beta"].size();
  const int w = 15;
  out << pad_left("arm", 8) << pad_left("beta", w) << pad_left("own", w) << pad_left("bias", w)
      << "\n";
  for (std::size_t a = 0; a < k; ++a) {
    out << pad_left(std::to_string(a + 1), 8) << pad_left(fixed(results["beta"][a].get<double>(), 6), w)
        << pad_left(fixed(results["own"][a].get<double>(), 6), w)
        << pad_left(fixed(results["contamination"][a].get<double>(), 6), w) << "\n";
  }
  if (results.contains("phi")) out << "phi = " << fixed(results["phi"].get<double>(), 6) << "\n";
  out << "weights (stratum rows, treatment columns):\n";
  for (const auto& stratum : results["lambda"]) {
    out << "  stratum " << stratum["stratum"].get<long>() << " mass "
        << fixed(stratum["mass"].get<double>()) << ":";
    for (const auto& row : stratum["lambda"]) {
      out << " [";
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (j > 0) out << ", ";
        out << fixed(row[j].get<double>(), 6);
      }
      out << "]";
    }
    out << "\n";
  }
  if (results.contains("check")) {
    const Json& check = results["check"];
    out << "enumeration check (scale " << check["cell_scale"].get<long>() << ", rows "
        << check["rows"].get<long>() << "): max diff "
        << fixed(std::max({check["max_lambda_diff"].get<double>(),
                           check["max_beta_diff"].get<double>(),
                           check["max_own_diff"].get<double>(),
                           check["max_contamination_diff"].get<double>()}),
                 12)
        << (check["pass"].get<bool>() ? " PASS" : " FAIL") << "\n";
  }
}

void render_simulate(std::ostringstream& out, const Json& results) {
  out << "Monte Carlo summary (n = " << results["n"].get<long>() << ", reps = "
      << results["reps"].get<long>() << ")\n";
  const int w = 14;
  for (const auto& block : results["estimators"]) {
    out << block["kind"].get<std::string>() << " (used "
        << block["replicates_used"].get<long>() << ", failed "
        << block["replicates_failed"].get<long>() << ")\n";
    if (!block.contains("mean")) continue;
    out << pad_left("arm", 8) << pad_left("estimand", w) << pad_left("mean", w)
        << pad_left("bias", w) << pad_left("sd", w) << pad_left("mean se", w)
        << pad_left("coverage", w) << "\n";
    for (std::size_t a = 0; a < block["mean"].size(); ++a) {
      out << pad_left(std::to_string(a + 1), 8)
          << pad_left(fixed(block["estimand"][a].get<double>(), 4), w)
          << pad_left(fixed(block["mean"][a].get<double>(), 4), w)
          << pad_left(fixed(block["bias"][a].get<double>(), 4), w)
          << pad_left(fixed(block["sd_empirical"][a].get<double>(), 4), w)
          << pad_left(fixed(block["mean_se_robust"][a].get<double>(), 4), w)
          << pad_left(fixed(block["coverage_robust_95"][a].get<double>(), 3), w) << "\n";
    }
  }
}

}  // namespace

std::string render_report(const Json& report) {
  std::ostringstream out;
  const std::string command = report["command"].get<std::string>();
  out << "multitreat " << command << "\n";
  if (command == "decompose") {
    render_panel_a(out, report["results"]);
  } else if (command == "estimate") {
    render_panel_b(out, report["results"]);
  } else if (command == "oracle") {
    render_oracle(out, report["results"]);
  } else if (command == "simulate") {
    render_simulate(out, report["results"]);
  }
  const auto& warnings = report["warnings"];
  if (!warnings.empty()) {
    out << "warnings:\n";
    for (const auto& w : warnings) out << "  - " << w.get<std::string>() << "\n";
  }
  return out.str();
}

std::string scatter_csv(const Json& report) {
  const Json& results = report["results"];
  const auto arms = results["treatment_arms"].get<std::vector<std::string>>();
  const std::size_t k = arms.size();
  std::ostringstream out;
  out << "stratum,count";
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t l = 0; l < k; ++l) out << ",lambda_" << (a + 1) << "_" << (l + 1);
  }
  for (std::size_t a = 0; a < k; ++a) out << ",tau_" << (a + 1);
  for (std::size_t a = 0; a < k; ++a) out << ",tau_se_" << (a + 1);
  out << "\n";
  for (const auto& row : results["scatter"]) {
    std::string stratum = row["stratum"].get<std::string>();
    const bool quote = stratum.find_first_of(",\"\n") != std::string::npos;
    if (quote) {
      std::string escaped = "\"";
      for (char c : stratum) {
        escaped += c;
        if (c == '"') escaped += '"';
      }
      escaped += '"';
      stratum = escaped;
    }
    out << stratum << "," << row["count"].get<long>();
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t l = 0; l < k; ++l) {
        out << "," << row["lambda"][a][l].get<double>();
      }
    }
    for (std::size_t a = 0; a < k; ++a) out << "," << row["tau"][a].get<double>();
    for (std::size_t a = 0; a < k; ++a) out << "," << row["tau_se"][a].get<double>();
    out << "\n";
  }
  return out.str();
}

}  // namespace multitreat::cli

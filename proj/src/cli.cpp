#include "shiftval/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>

#include "shiftval/calibration.hpp"
#include "shiftval/diagnostics.hpp"
#include "shiftval/error.hpp"
#include "shiftval/estimators.hpp"
#include "shiftval/io.hpp"
#include "shiftval/montecarlo.hpp"
#include "shiftval/simulation.hpp"

namespace shiftval::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string candidates;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> kind;
  std::optional<std::string> variant;
  std::optional<std::string> weights;
  std::optional<int> crossfit;
  std::optional<unsigned> threads;
  std::string log_level = "warn";
};

const char* kPropensityNote = "pi_A(d|x,s) is evaluated as pi_A(d(x)|x,s)";

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  return read_json_file(path);
}

void stamp(Json& report, const Json& config) {
  report["format_version"] = kFormatVersion;
  report["config_hash"] = config_hash(config);
}

// Writes `name` under --out when given; always echoes the JSON to `out`.
void emit(const Options& opt, const std::string& name, const std::string& text,
          std::ostream& out, bool echo = true) {
  if (!opt.out.empty()) {
    fs::create_directories(opt.out);
    write_text_file(fs::path(opt.out) / name, text);
  }
  if (echo) out << text;
}

Json take(Json& j, const char* key) {
  if (!j.contains(key)) return nullptr;
  Json value = j.at(key);
  j.erase(key);
  return value;
}

std::optional<DatasetKind> optional_kind(const Json& config) {
  if (!config.contains("kind")) return std::nullopt;
  return parse_dataset_kind(config.at("kind").get<std::string>());
}

void check_policy_dimension(const Policy& policy, std::size_t p) {
  const auto& rule = policy.linear_rule();
  if (rule && !rule->coeffs.empty() && rule->coeffs.size() != p) {
    throw Error(ErrorCode::DimensionMismatch,
                "policy has " + std::to_string(rule->coeffs.size()) +
                    " coefficients for p = " + std::to_string(p));
  }
}

int cmd_simulate(const Options& opt, std::ostream& out) {
  Json config = load_config(opt.config);
  if (opt.seed) config["seed"] = *opt.seed;
  if (opt.kind) config["kind"] = *opt.kind;
  const Json effective = config;
  const Json policy_json = take(config, "policy");
  const Json truth_draws_json = take(config, "truth_draws");
  const SimulationConfig sim = simulation_config_from_json(config);
  const auto [data, oracle] = simulate_gaussian_shift(sim);

  double mu_sq = 0.0;
  bool no_shift = true;
  for (double m : sim.mu) {
    mu_sq += m * m;
    no_shift = no_shift && m == 0.0;
  }
  Json truth{{"simulation", to_json(sim)},
             {"n", data.n()},
             {"n1", data.n1()},
             {"n0", data.n0()},
             {"rho_hat", data.rho_hat()},
             {"weight",
              {{"form", "exp(|mu|^2/2 - mu'x)"},
               {"mu", sim.mu},
               {"identically_one", no_shift}}},
             {"selection_log_odds",
              {{"intercept", std::log(sim.rho_s / (1.0 - sim.rho_s)) - 0.5 * mu_sq},
               {"slope", sim.mu}}},
             {"outcome_coeffs", sim.outcome_coeffs},
             {"propensity", sim.propensity},
             {"noise_variance", sim.noise_sd * sim.noise_sd}};
  if (!policy_json.is_null()) {
    const Policy policy = policy_from_json(policy_json);
    check_policy_dimension(policy, sim.p);
    const auto draws =
        truth_draws_json.is_null() ? std::size_t{1'000'000} : truth_draws_json.get<std::size_t>();
    const PopulationTruth population = gaussian_shift_truth(sim);
    truth["policy"] = to_json(policy);
    truth["theta"] =
        true_value(population, policy, Estimand::Value, draws, mix_seed(sim.seed, 1001));
    truth["theta1"] =
        true_value(population, policy, Estimand::Contrast, draws, mix_seed(sim.seed, 1001));
  }
  stamp(truth, effective);
  if (!opt.out.empty()) {
    fs::create_directories(opt.out);
    write_dataset_csv(data, fs::path(opt.out) / "dataset.csv");
  }
  emit(opt, "truth.json", truth.dump(2) + "\n", out);
  return 0;
}

struct LoadedNuisances {
  std::optional<NuisanceSet> oracle;
  FitRecipe recipe;
};

LoadedNuisances load_recipe(const Json& config, const PooledDataset& data) {
  LoadedNuisances out;
  out.recipe = recipe_from_json(config.value("recipe", Json::object()), data.p());
  if (config.contains("simulation")) {
    const SimulationConfig sim = simulation_config_from_json(config.at("simulation"));
    if (sim.p != data.p()) {
      throw Error(ErrorCode::DimensionMismatch, "simulation p does not match the dataset");
    }
    NuisanceSet oracle = gaussian_shift_truth(sim).nuisances;
    oracle.rho_hat = data.rho_hat();
    out.oracle = std::move(oracle);
  }
  out.recipe.oracle = out.oracle;
  return out;
}

int cmd_estimate(const Options& opt, std::ostream& out) {
  Json config = load_config(opt.config);
  if (opt.variant) config["estimand"] = *opt.variant;
  if (opt.kind) config["kind"] = *opt.kind;
  if (opt.weights) config["recipe"]["weights"] = *opt.weights;
  if (opt.crossfit) config["crossfit"] = *opt.crossfit;
  if (opt.seed) config["crossfit_seed"] = *opt.seed;
  for (const auto& item : config.items()) {
    static const std::vector<std::string> allowed{
        "estimand", "kind", "method", "recipe", "crossfit", "crossfit_seed",
        "level", "policy", "simulation", "positivity"};
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw Error(ErrorCode::InvalidConfig, "estimate: unknown key '" + item.key() + "'");
    }
  }

  const PooledDataset data = read_dataset_csv(opt.data);
  const Estimand estimand = parse_estimand(config.value("estimand", "theta"));
  const std::optional<DatasetKind> kind = optional_kind(config);
  const DatasetKind resolved = kind.value_or(data.kind());
  const Policy policy =
      config.contains("policy") ? policy_from_json(config.at("policy")) : Policy::constant(1);
  check_policy_dimension(policy, data.p());
  const double level = config.value("level", kDefaultLevel);
  const int k = config.value("crossfit", 0);
  const std::string method = config.value("method", "efficient");
  const LoadedNuisances loaded = load_recipe(config, data);
  spdlog::info("estimate: n = {}, kind = {}, method = {}", data.n(), to_string(resolved),
               method);

  EstimateReport report;
  std::optional<NuisanceSet> used;
  if (k != 0) {
    if (k < 2) throw Error(ErrorCode::InvalidConfig, "crossfit K must be 0 or >= 2");
    if (method != "efficient") {
      throw Error(ErrorCode::InvalidConfig, "cross-fitting applies to the efficient estimator");
    }
    const FoldAssignment folds =
        split_cross_fit_folds(data, k, config.value("crossfit_seed", std::uint64_t{0}));
    report = cross_fit_estimate(data, folds, loaded.recipe, policy, estimand, resolved, level);
  } else {
    used = loaded.recipe.fully_oracle() && loaded.oracle
               ? *loaded.oracle
               : fit_nuisances(resolved == DatasetKind::Type2 ? data.as_type2() : data,
                               loaded.recipe);
    if (method == "efficient") {
      report = estimate_efficient(data, *used, policy, estimand, resolved, level);
    } else {
      IdentificationForm form;
      if (method == "calibration_mean") {
        form = IdentificationForm::CalibrationMean;
      } else if (method == "weighted_pooled") {
        form = IdentificationForm::WeightedPooled;
      } else if (method == "weighted_training") {
        form = IdentificationForm::WeightedTraining;
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown method '" + method + "'");
      }
      report = estimate_plugin_identification(data, *used, policy, estimand, form, level);
    }
  }

  Json j = to_json(report);
  j["policy"] = to_json(policy);
  j["notes"] = Json::array({kPropensityNote});
  if (used && used->oracle == false) j["nuisance"]["weight_fit"] = to_json(used->weight.info());
  if (used && config.contains("positivity")) {
    const Json& pos = config.at("positivity");
    j["positivity"] = to_json(check_positivity(*used, data, pos.value("tau", 0.01),
                                               pos.value("delta", 0.01)));
  }
  stamp(j, config);
  emit(opt, "estimate.json", j.dump(2) + "\n", out);
  return 0;
}

int cmd_calibrate(const Options& opt, std::ostream& out) {
  Json config = load_config(opt.config);
  for (const auto& item : config.items()) {
    static const std::vector<std::string> allowed{"method", "recipe", "simulation",
                                                  "ipw_propensity_stratum"};
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw Error(ErrorCode::InvalidConfig, "calibrate: unknown key '" + item.key() + "'");
    }
  }
  const Json candidates_json = read_json_file(opt.candidates);
  const PooledDataset data = read_dataset_csv(opt.data);
  const CandidateSet candidates = candidates_from_json(candidates_json);
  for (const Candidate& cand : candidates.candidates()) {
    check_policy_dimension(cand.policy, data.p());
  }
  const CalibrationMethod method =
      parse_calibration_method(config.value("method", "covariates_only"));
  const int stratum = config.value("ipw_propensity_stratum", 1);
  if (stratum != 0 && stratum != 1) {
    throw Error(ErrorCode::InvalidConfig, "ipw_propensity_stratum must be 0 or 1");
  }

  LoadedNuisances loaded = load_recipe(config, data);
  const FitRecipe& recipe = loaded.recipe;
  auto need_oracle = [&]() -> const NuisanceSet& {
    if (!loaded.oracle) {
      throw Error(ErrorCode::InvalidConfig, "oracle nuisances need a 'simulation' block");
    }
    return *loaded.oracle;
  };
  std::optional<OutcomeModel> outcome;
  switch (recipe.outcome) {
    case OutcomeSource::Oracle: outcome = need_oracle().outcome; break;
    case OutcomeSource::Linear:
      outcome = fit_outcome_regression(data, OutcomeMethod::Linear);
      break;
    case OutcomeSource::KernelRidge:
      outcome = fit_outcome_regression(data, OutcomeMethod::KernelRidge, recipe.outcome_kernel);
      break;
  }
  PropensityModel propensity = PropensityModel::constant(0.5);
  if (method == CalibrationMethod::Ipw) {
    propensity = recipe.propensity == PropensitySource::Oracle
                     ? need_oracle().propensity
                     : fit_propensity_all(data, recipe.clip);
  }
  // Weights play no part in either calibration estimator.
  const NuisanceSet nuisances(WeightModel::oracle([](Covariates) { return 1.0; }),
                              std::move(propensity), std::move(*outcome), data.rho_hat());
  const Selection selection =
      select_policy(candidates, data.rows(), method, nuisances, stratum);

  Json j = to_json(selection, method);
  j["ipw_propensity_stratum"] = stratum;
  j["outcome"] = to_string(recipe.outcome);
  j["n0"] = data.n0();
  Json hashed{{"config", config}, {"candidates", candidates_json}};
  stamp(j, hashed);
  emit(opt, "selection.json", j.dump(2) + "\n", out);
  return 0;
}

int cmd_montecarlo(const Options& opt, std::ostream& out) {
  Json config = load_config(opt.config);
  if (opt.seed) config["seed"] = *opt.seed;
  if (config.contains("estimators") && config["estimators"].is_array()) {
    for (Json& e : config["estimators"]) {
      if (opt.variant) e["estimand"] = *opt.variant;
      if (opt.kind) e["kind"] = *opt.kind;
      if (opt.weights) e["recipe"]["weights"] = *opt.weights;
      if (opt.crossfit) e["crossfit"] = *opt.crossfit;
    }
  }
  // The thread count never changes results, so it stays out of the hash.
  Json hashed = config;
  hashed.erase("threads");
  McConfig mc = mc_config_from_json(config);
  if (opt.threads) mc.threads = *opt.threads;
  check_policy_dimension(mc.policy, mc.base.p);
  spdlog::info("montecarlo: {} replications, {} estimators", mc.replications, mc.menu.size());
  const McSummary summary = run_replications(mc);

  Json j = to_json(summary);
  j["policy"] = to_json(mc.policy);
  j["notes"] = Json::array({kPropensityNote});
  stamp(j, hashed);
  emit(opt, "summary.csv", mc_summary_csv(summary), out, false);
  emit(opt, "summary.json", j.dump(2) + "\n", out);
  return 0;
}

void report_error(std::ostream& err, std::string_view code, const std::string& message) {
  const Json j{{"error", {{"code", code}, {"message", message}}},
               {"format_version", kFormatVersion}};
  err << j.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Policy-value estimation under covariate shift"};
  app.name("shiftval");
  app.require_subcommand(1);
  Options opt;
  app.add_option("--log-level", opt.log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON configuration file");
    sub->add_option("--out", opt.out, "output directory");
  };
  auto add_estimator_flags = [&](CLI::App* sub) {
    sub->add_option("--kind", opt.kind, "type1 or type2")
        ->check(CLI::IsMember({"type1", "type2"}));
    sub->add_option("--variant", opt.variant, "theta or theta1")
        ->check(CLI::IsMember({"theta", "theta1"}));
    sub->add_option("--weights", opt.weights, "oracle, aipsw, kulsif or eb")
        ->check(CLI::IsMember({"oracle", "aipsw", "kulsif", "eb"}));
    sub->add_option("--crossfit", opt.crossfit, "number of cross-fitting bags (0: none)");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "simulate a Gaussian-shift dataset");
  add_common(simulate);
  simulate->get_option("--config")->required();
  simulate->add_option("--seed", opt.seed, "overrides the configured seed");
  simulate->add_option("--kind", opt.kind, "type1 or type2")
      ->check(CLI::IsMember({"type1", "type2"}));

  CLI::App* estimate = app.add_subcommand("estimate", "estimate a policy value");
  add_common(estimate);
  estimate->add_option("--data", opt.data, "dataset CSV")->required();
  estimate->add_option("--seed", opt.seed, "cross-fitting fold seed");
  add_estimator_flags(estimate);

  CLI::App* calibrate = app.add_subcommand("calibrate", "select among candidate rules");
  add_common(calibrate);
  calibrate->add_option("--data", opt.data, "dataset CSV")->required();
  calibrate->add_option("--candidates", opt.candidates, "candidate rules JSON")->required();

  CLI::App* montecarlo = app.add_subcommand("montecarlo", "run a replicated simulation study");
  add_common(montecarlo);
  montecarlo->get_option("--config")->required();
  montecarlo->add_option("--seed", opt.seed, "overrides the configured base seed");
  montecarlo->add_option("--threads", opt.threads, "worker threads (0: all cores)");
  add_estimator_flags(montecarlo);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << app.help();
    report_error(err, "UsageError", e.what());
    return 2;
  }

  spdlog::set_level(spdlog::level::from_str(opt.log_level));
  try {
    if (simulate->parsed()) return cmd_simulate(opt, out);
    if (estimate->parsed()) return cmd_estimate(opt, out);
    if (calibrate->parsed()) return cmd_calibrate(opt, out);
    return cmd_montecarlo(opt, out);
  } catch (const Error& e) {
    report_error(err, error_name(e.code()), e.what());
  } catch (const Json::exception& e) {
    report_error(err, error_name(ErrorCode::InvalidConfig), e.what());
  } catch (const fs::filesystem_error& e) {
    report_error(err, error_name(ErrorCode::IoError), e.what());
  }
  return 1;
}

}  // namespace shiftval::cli

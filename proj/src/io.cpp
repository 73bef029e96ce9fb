#include "shiftval/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "shiftval/error.hpp"

namespace shiftval {

std::string config_hash(const Json& config) {
  const std::string text = config.dump();
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(text.data(), text.size(), digest.data(), &length, EVP_sha256(), nullptr) !=
      1) {
    throw Error(ErrorCode::IoError, "SHA-256 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

namespace {

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, std::size_t line) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line) + ": bad number '" + text + "'");
  }
  return v;
}

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, what);
}

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  if (!j.is_object()) config_error(where + " must be a JSON object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!keys.count(item.key())) config_error(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    config_error(std::string("key '") + key + "': " + e.what());
  }
}

KernelSpec kernel_from_json(const Json& j) {
  reject_unknown(j, {"family", "bandwidth", "lambda"}, "kernel");
  KernelSpec spec;
  const std::string family = get_or<std::string>(j, "family", "rbf");
  if (family == "rbf") {
    spec.family = KernelFamily::Rbf;
  } else if (family == "linear") {
    spec.family = KernelFamily::Linear;
  } else {
    config_error("unknown kernel family '" + family + "'");
  }
  if (j.contains("bandwidth")) spec.bandwidth = get_or<double>(j, "bandwidth", 1.0);
  if (j.contains("lambda")) spec.lambda = get_or<double>(j, "lambda", 1.0);
  validate_kernel_spec(spec);
  return spec;
}

Json kernel_to_json(const KernelSpec& spec) {
  Json j;
  j["family"] = spec.family == KernelFamily::Rbf ? "rbf" : "linear";
  if (spec.bandwidth) j["bandwidth"] = *spec.bandwidth;
  if (spec.lambda) j["lambda"] = *spec.lambda;
  return j;
}

template <class Parse>
auto parse_with(Parse parse, const std::string& text) {
  try {
    return parse(text);
  } catch (const Error& e) {
    config_error(e.what());
  }
}

}  // namespace

std::string dataset_to_csv(const PooledDataset& data) {
  std::string out;
  for (std::size_t j = 0; j < data.p(); ++j) out += "x_" + std::to_string(j + 1) + ",";
  out += "a,y,s\n";
  for (const Observation& row : data.rows()) {
    for (double v : row.x) out += format_number(v) + ",";
    if (row.a) out += std::to_string(*row.a);
    out += ",";
    if (row.y) out += format_number(*row.y);
    out += "," + std::to_string(row.s) + "\n";
  }
  return out;
}

PooledDataset dataset_from_csv(const std::string& text, std::optional<DatasetKind> kind) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_fields(line);
  if (header.size() < 4) {
    throw Error(ErrorCode::ParseError, "header must be x_1..x_p,a,y,s");
  }
  const std::size_t p = header.size() - 3;
  for (std::size_t j = 0; j < p; ++j) {
    if (header[j] != "x_" + std::to_string(j + 1)) {
      throw Error(ErrorCode::ParseError, "header column " + std::to_string(j + 1) +
                                             " should be x_" + std::to_string(j + 1));
    }
  }
  if (header[p] != "a" || header[p + 1] != "y" || header[p + 2] != "s") {
    throw Error(ErrorCode::ParseError, "header must end with a,y,s");
  }

  std::vector<Observation> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != p + 3) {
      throw Error(ErrorCode::DimensionMismatch,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(p + 3) + " fields, got " +
                      std::to_string(fields.size()));
    }
    Observation obs;
    obs.x.resize(p);
    for (std::size_t j = 0; j < p; ++j) obs.x[j] = parse_number(fields[j], line_no);
    if (!fields[p].empty()) {
      const double a = parse_number(fields[p], line_no);
      if (a != 1.0 && a != -1.0) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line_no) + ": a must be +1 or -1");
      }
      obs.a = static_cast<int>(a);
    }
    if (!fields[p + 1].empty()) obs.y = parse_number(fields[p + 1], line_no);
    if (obs.a.has_value() != obs.y.has_value()) {
      throw Error(ErrorCode::MissingnessMismatch,
                  "line " + std::to_string(line_no) + ": a and y must be both present or both missing");
    }
    const double s = parse_number(fields[p + 2], line_no);
    if (s != 0.0 && s != 1.0) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": s must be 0 or 1");
    }
    obs.s = static_cast<int>(s);
    rows.push_back(std::move(obs));
  }
  const DatasetKind resolved = kind.value_or(infer_kind(rows));
  return validate_dataset(std::move(rows), resolved);
}

void write_dataset_csv(const PooledDataset& data, const std::filesystem::path& path) {
  write_text_file(path, dataset_to_csv(data));
}

PooledDataset read_dataset_csv(const std::filesystem::path& path,
                               std::optional<DatasetKind> kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return dataset_from_csv(text.str(), kind);
}

SimulationConfig simulation_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"p", "mu", "rho_s", "n", "outcome_coeffs", "noise_sd", "propensity", "seed",
                  "kind", "fixed_strata"},
                 "simulation");
  SimulationConfig c;
  c.p = get_or<std::size_t>(j, "p", j.contains("mu") ? j.at("mu").size() : c.p);
  c.mu = get_or<std::vector<double>>(j, "mu", std::vector<double>(c.p, 0.0));
  c.rho_s = get_or<double>(j, "rho_s", c.rho_s);
  c.n = get_or<std::size_t>(j, "n", c.n);
  c.outcome_coeffs = get_or<std::vector<double>>(j, "outcome_coeffs",
                                                 std::vector<double>(2 * c.p + 2, 0.0));
  c.noise_sd = get_or<double>(j, "noise_sd", c.noise_sd);
  c.propensity = get_or<double>(j, "propensity", c.propensity);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.kind = parse_with(parse_dataset_kind, get_or<std::string>(j, "kind", "type1"));
  c.fixed_strata = get_or<bool>(j, "fixed_strata", false);
  validate_config(c);
  return c;
}

Json to_json(const SimulationConfig& c) {
  return Json{{"p", c.p},
              {"mu", c.mu},
              {"rho_s", c.rho_s},
              {"n", c.n},
              {"outcome_coeffs", c.outcome_coeffs},
              {"noise_sd", c.noise_sd},
              {"propensity", c.propensity},
              {"seed", c.seed},
              {"kind", c.kind == DatasetKind::Type1 ? "type1" : "type2"},
              {"fixed_strata", c.fixed_strata}};
}

Policy policy_from_json(const Json& j) {
  if (!j.is_object()) config_error("policy must be a JSON object");
  const std::string type = get_or<std::string>(j, "type", "linear");
  if (type == "constant") {
    reject_unknown(j, {"type", "action", "label"}, "policy");
    const int action = get_or<int>(j, "action", 1);
    if (action != 1 && action != -1) config_error("constant policy action must be +1 or -1");
    return Policy::constant(action);
  }
  if (type != "linear") config_error("unknown policy type '" + type + "'");
  reject_unknown(j, {"type", "intercept", "coeffs", "label"}, "policy");
  LinearRule rule;
  rule.intercept = get_or<double>(j, "intercept", 0.0);
  rule.coeffs = get_or<std::vector<double>>(j, "coeffs", {});
  return Policy::linear(std::move(rule));
}

Json to_json(const Policy& policy) {
  Json j;
  j["label"] = policy.label();
  if (const auto& rule = policy.linear_rule()) {
    j["type"] = "linear";
    j["intercept"] = rule->intercept;
    j["coeffs"] = rule->coeffs;
  }
  return j;
}

CandidateSet candidates_from_json(const Json& j) {
  const Json& list = j.is_object() && j.contains("candidates") ? j.at("candidates") : j;
  if (!list.is_array()) config_error("candidates must be a JSON list");
  std::vector<Candidate> candidates;
  for (const Json& item : list) {
    reject_unknown(item, {"c", "rule"}, "candidate");
    if (!item.contains("c") || !item.contains("rule")) {
      config_error("each candidate needs 'c' and 'rule'");
    }
    candidates.push_back({get_or<double>(item, "c", 0.0), policy_from_json(item.at("rule"))});
  }
  return CandidateSet(std::move(candidates));
}

FitRecipe recipe_from_json(const Json& j, std::size_t p) {
  reject_unknown(j,
                 {"weights", "propensity", "outcome", "weight_kernel", "outcome_kernel",
                  "kulsif_sign", "clip", "instruments"},
                 "recipe");
  FitRecipe r;
  r.weights = parse_with(parse_weight_backend, get_or<std::string>(j, "weights", "oracle"));
  r.propensity =
      parse_with(parse_propensity_source, get_or<std::string>(j, "propensity", "oracle"));
  r.outcome = parse_with(parse_outcome_source, get_or<std::string>(j, "outcome", "oracle"));
  if (j.contains("weight_kernel")) r.weight_kernel = kernel_from_json(j.at("weight_kernel"));
  if (j.contains("outcome_kernel")) r.outcome_kernel = kernel_from_json(j.at("outcome_kernel"));
  const std::string sign = get_or<std::string>(j, "kulsif_sign", "primal_consistent");
  if (sign == "primal_consistent") {
    r.kulsif_sign = KulsifSign::PrimalConsistent;
  } else if (sign == "as_printed") {
    r.kulsif_sign = KulsifSign::AsPrinted;
  } else {
    config_error("kulsif_sign must be primal_consistent or as_printed");
  }
  r.clip = get_or<double>(j, "clip", kDefaultClip);
  if (!(r.clip > 0.0 && r.clip < 0.5)) config_error("clip must lie in (0, 0.5)");
  const std::string instruments = get_or<std::string>(j, "instruments", "");
  if (!instruments.empty() && instruments != "constant_and_coordinates" &&
      instruments != "coordinates") {
    config_error("instruments must be constant_and_coordinates or coordinates");
  }
  if (instruments == "coordinates") r.instruments = InstrumentSet::coordinates(p);
  return r;
}

Json to_json(const FitRecipe& r) {
  Json j{{"weights", to_string(r.weights)},
         {"propensity", to_string(r.propensity)},
         {"outcome", to_string(r.outcome)},
         {"clip", r.clip},
         {"kulsif_sign",
          r.kulsif_sign == KulsifSign::PrimalConsistent ? "primal_consistent" : "as_printed"}};
  j["weight_kernel"] = kernel_to_json(r.weight_kernel);
  j["outcome_kernel"] = kernel_to_json(r.outcome_kernel);
  return j;
}

McConfig mc_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"simulation", "replications", "estimators", "policy", "seed", "threads",
                  "truth_draws", "variance_draws", "level", "report_timing"},
                 "montecarlo");
  McConfig c;
  if (!j.contains("simulation")) config_error("montecarlo config needs 'simulation'");
  c.base = simulation_config_from_json(j.at("simulation"));
  c.replications = get_or<int>(j, "replications", c.replications);
  if (j.contains("policy")) c.policy = policy_from_json(j.at("policy"));
  c.seed = get_or<std::uint64_t>(j, "seed", c.base.seed);
  c.threads = get_or<unsigned>(j, "threads", 0u);
  c.truth_draws = get_or<std::size_t>(j, "truth_draws", c.truth_draws);
  c.variance_draws = get_or<std::size_t>(j, "variance_draws", c.variance_draws);
  c.level = get_or<double>(j, "level", c.level);
  if (!(c.level > 0.0 && c.level < 1.0)) {
    throw Error(ErrorCode::InvalidLevel, "level must lie in (0, 1)");
  }
  c.report_timing = get_or<bool>(j, "report_timing", false);
  if (!j.contains("estimators") || !j.at("estimators").is_array()) {
    config_error("montecarlo config needs an 'estimators' list");
  }
  for (const Json& e : j.at("estimators")) {
    reject_unknown(e, {"name", "estimand", "kind", "crossfit", "recipe"}, "estimator");
    McEstimator est;
    est.variant.estimand =
        parse_with(parse_estimand, get_or<std::string>(e, "estimand", "theta"));
    est.variant.kind = parse_with(parse_dataset_kind, get_or<std::string>(e, "kind", "type2"));
    est.crossfit_k = get_or<int>(e, "crossfit", 0);
    if (e.contains("recipe")) est.recipe = recipe_from_json(e.at("recipe"), c.base.p);
    est.name = get_or<std::string>(e, "name", label(est.variant));
    c.menu.push_back(std::move(est));
  }
  validate_mc_config(c);
  return c;
}

Json to_json(const NewtonInfo& info) {
  return Json{{"iterations", info.iterations},
              {"converged", info.converged},
              {"coefficients", info.coefficients}};
}

Json to_json(const WeightFitInfo& info) {
  Json j{{"iterations", info.iterations},
         {"converged", info.converged},
         {"truncated", info.truncated},
         {"hyperparameters", info.hyperparameters},
         {"coefficients", info.coefficients}};
  if (info.dual_residual) j["dual_residual"] = *info.dual_residual;
  if (info.condition_number) j["condition_number"] = *info.condition_number;
  return j;
}

Json to_json(const EstimateReport& report) {
  Json nuisance{{"oracle", report.nuisance.oracle},
                {"weights", report.nuisance.weights},
                {"propensity", report.nuisance.propensity},
                {"outcome", report.nuisance.outcome},
                {"crossfit_k", report.nuisance.crossfit_k}};
  Json bags = Json::array();
  for (const BagDiagnostics& bag : report.nuisance.bags) {
    Json b{{"bag", bag.bag},
           {"fit_rows", bag.fit_rows},
           {"weight", to_json(bag.weight)},
           {"outcome_coefficients", bag.outcome_coefficients}};
    b["propensity_training"] =
        bag.propensity_training ? to_json(*bag.propensity_training) : Json(nullptr);
    b["propensity_calibration"] =
        bag.propensity_calibration ? to_json(*bag.propensity_calibration) : Json(nullptr);
    bags.push_back(std::move(b));
  }
  nuisance["bags"] = std::move(bags);
  return Json{{"estimand", to_string(report.variant.estimand)},
              {"kind", report.variant.kind == DatasetKind::Type1 ? "type1" : "type2"},
              {"method", report.method},
              {"estimate", report.estimate},
              {"se", report.se},
              {"ci", {report.ci_lower, report.ci_upper}},
              {"level", report.level},
              {"n", report.n},
              {"n1", report.n1},
              {"n0", report.n0},
              {"nuisance", std::move(nuisance)}};
}

Json to_json(const Selection& selection, CalibrationMethod method) {
  Json table = Json::array();
  for (const CandidateValue& row : selection.table) {
    table.push_back(Json{{"c", row.c}, {"label", row.label}, {"value", row.value}});
  }
  return Json{{"method", to_string(method)},
              {"chosen_c", selection.chosen_c},
              {"chosen_policy", to_json(selection.chosen)},
              {"table", std::move(table)}};
}

Json to_json(const PositivityReport& report) {
  auto flags = [](const std::vector<PositivityFlag>& list) {
    Json out = Json::array();
    for (const auto& f : list) out.push_back(Json{{"row", f.row}, {"value", f.value}});
    return out;
  };
  return Json{{"checked_treatment", report.checked_treatment},
              {"flagged_treatment", report.flagged_treatment},
              {"flagged_selection", report.flagged_selection},
              {"worst_treatment", flags(report.worst_treatment)},
              {"worst_selection", flags(report.worst_selection)}};
}

namespace {

struct SummaryRow {
  const McEstimatorSummary& est;
  double target_root_n;
  double target_root_n0;
};

SummaryRow summary_row(const McSummary& summary, const McEstimatorSummary& est) {
  const StratumDesign design{summary.mean_n1, summary.mean_n0};
  return {est, bound_target(est.target, design, VarianceScaling::RootN),
          bound_target(est.target, design, VarianceScaling::RootN0)};
}

}  // namespace

Json to_json(const McSummary& summary) {
  Json estimators = Json::array();
  for (const auto& est : summary.estimators) {
    const SummaryRow row = summary_row(summary, est);
    Json e{{"name", est.name},
           {"estimand", to_string(est.variant.estimand)},
           {"kind", est.variant.kind == DatasetKind::Type1 ? "type1" : "type2"},
           {"weights", est.weights},
           {"propensity", est.propensity},
           {"outcome", est.outcome},
           {"crossfit_k", est.crossfit_k},
           {"truth", est.truth},
           {"mean_estimate", est.mean_estimate},
           {"bias", est.bias},
           {"bias_se", est.bias_se},
           {"var_sqrt_n", est.var_sqrt_n},
           {"var_sqrt_n0", est.var_sqrt_n0},
           {"coverage", est.coverage},
           {"mean_se", est.mean_se},
           {"target",
            {{"nu", est.target.nu},
             {"zeta", est.target.zeta},
             {"nu_se", est.target.nu_se},
             {"zeta_se", est.target.zeta_se},
             {"var_sqrt_n", row.target_root_n},
             {"var_sqrt_n0", row.target_root_n0}}},
           {"ratio_sqrt_n", est.var_sqrt_n / row.target_root_n},
           {"ratio_sqrt_n0", est.var_sqrt_n0 / row.target_root_n0}};
    if (summary.report_timing) e["mean_runtime_ms"] = est.mean_runtime_ms;
    estimators.push_back(std::move(e));
  }
  return Json{{"replications", summary.replications},
              {"seed", summary.seed},
              {"mean_n", summary.mean_n},
              {"mean_n1", summary.mean_n1},
              {"mean_n0", summary.mean_n0},
              {"estimators", std::move(estimators)}};
}

std::string mc_summary_csv(const McSummary& summary) {
  std::string out =
      "name,estimand,kind,weights,propensity,outcome,crossfit_k,truth,mean_estimate,bias,"
      "bias_se,var_sqrt_n,var_sqrt_n0,coverage,mean_se,nu,zeta,target_var_sqrt_n,"
      "target_var_sqrt_n0";
  if (summary.report_timing) out += ",mean_runtime_ms";
  out += "\n";
  for (const auto& est : summary.estimators) {
    const SummaryRow row = summary_row(summary, est);
    out += est.name + "," + std::string(to_string(est.variant.estimand)) + "," +
           (est.variant.kind == DatasetKind::Type1 ? "type1" : "type2") + "," + est.weights +
           "," + est.propensity + "," + est.outcome + "," + std::to_string(est.crossfit_k);
    for (double v : {est.truth, est.mean_estimate, est.bias, est.bias_se, est.var_sqrt_n,
                     est.var_sqrt_n0, est.coverage, est.mean_se, est.target.nu,
                     est.target.zeta, row.target_root_n, row.target_root_n0}) {
      out += "," + format_number(v);
    }
    if (summary.report_timing) out += "," + format_number(est.mean_runtime_ms);
    out += "\n";
  }
  return out;
}

}  // namespace shiftval

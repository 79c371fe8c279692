#include "fgsc/serialize.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>

#include "fgsc/error.hpp"

namespace fgsc {

namespace {

void reject_unknown(const Json& doc, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  if (!doc.is_object()) throw UsageError(where + " must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) throw UsageError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_key(const Json& doc, const char* key, T& into, const std::string& where) {
  const auto it = doc.find(key);
  if (it == doc.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw UsageError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw UsageError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw UsageError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->is_number_integer() && !it->is_number_unsigned()) throw UsageError("");
      }
    } else {
      if (!it->is_number()) throw UsageError("");
    }
    into = it->get<T>();
  } catch (const std::exception&) {
    throw UsageError("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(x);
  return out;
}

}  // namespace

std::string aggregation_name(Aggregation a) {
  return a == Aggregation::kMean ? "mean" : "median";
}

Aggregation parse_aggregation(const std::string& name) {
  if (name == "mean") return Aggregation::kMean;
  if (name == "median") return Aggregation::kMedian;
  throw UsageError("aggregation must be mean or median, got '" + name + "'");
}

std::string composition_mode_name(CompositionMode m) {
  return m == CompositionMode::kInvariantSplit ? "invariant_split" : "dirichlet_mask";
}

CompositionMode parse_composition_mode(const std::string& name) {
  if (name == "invariant_split") return CompositionMode::kInvariantSplit;
  if (name == "dirichlet_mask") return CompositionMode::kDirichletMask;
  throw UsageError("composition mode must be invariant_split or dirichlet_mask, got '" +
                   name + "'");
}

Regularizer parse_regularizer(const std::string& name, double lambda, double l1,
                              double l2) {
  if (name == "none") return NoRegularizer{};
  if (name == "ridge") return Ridge{lambda};
  if (name == "elastic_net") return ElasticNet{l1, l2};
  if (name == "simplex") return SimplexConstraint{};
  throw UsageError("regularizer must be none, ridge, elastic_net or simplex, got '" +
                   name + "'");
}

Json to_json(const FitConfig& cfg) {
  Json j;
  j["regularizer"] = regularizer_name(cfg.regularizer);
  double lambda = 0.0, l1 = 0.0, l2 = 0.0;
  if (const auto* r = std::get_if<Ridge>(&cfg.regularizer)) lambda = r->lambda;
  if (const auto* e = std::get_if<ElasticNet>(&cfg.regularizer)) {
    l1 = e->l1;
    l2 = e->l2;
  }
  j["lambda"] = lambda;
  j["l1"] = l1;
  j["l2"] = l2;
  j["max_iterations"] = cfg.max_iterations;
  j["tolerance"] = cfg.tolerance;
  j["include_covariates"] = cfg.include_covariates;
  j["covariate_scale"] = cfg.covariate_scale;
  return j;
}

FitConfig fit_config_from_json(const Json& doc, FitConfig base) {
  const std::string where = "fit config";
  reject_unknown(doc,
                 {"regularizer", "lambda", "l1", "l2", "max_iterations", "tolerance",
                  "include_covariates", "covariate_scale"},
                 where);
  const Json current = to_json(base);
  std::string name = current["regularizer"];
  double lambda = current["lambda"];
  double l1 = current["l1"];
  double l2 = current["l2"];
  read_key(doc, "regularizer", name, where);
  read_key(doc, "lambda", lambda, where);
  read_key(doc, "l1", l1, where);
  read_key(doc, "l2", l2, where);
  base.regularizer = parse_regularizer(name, lambda, l1, l2);
  read_key(doc, "max_iterations", base.max_iterations, where);
  read_key(doc, "tolerance", base.tolerance, where);
  read_key(doc, "include_covariates", base.include_covariates, where);
  read_key(doc, "covariate_scale", base.covariate_scale, where);
  return base;
}

Json to_json(const SimConfig& cfg) {
  Json j;
  j["K"] = cfg.K;
  j["num_donors"] = cfg.num_donors;
  j["S_cardinality"] = cfg.S_cardinality;
  j["T"] = cfg.T;
  j["T0"] = cfg.T0;
  j["N_per_group"] = cfg.N_per_group;
  j["aggregation"] = aggregation_name(cfg.aggregation);
  j["composition_mode"] = composition_mode_name(cfg.composition_mode);
  j["seed"] = cfg.seed;
  j["noise_sd"] = cfg.noise_sd;
  j["post_intervention_shift"] = cfg.post_intervention_shift;
  j["outcome_scale"] = cfg.outcome_scale;
  j["covariate_count"] = cfg.covariate_count;
  return j;
}

SimConfig sim_config_from_json(const Json& doc, SimConfig base) {
  const std::string where = "simulation config";
  reject_unknown(doc,
                 {"K", "num_donors", "S_cardinality", "T", "T0", "N_per_group",
                  "aggregation", "composition_mode", "seed", "noise_sd",
                  "post_intervention_shift", "outcome_scale", "covariate_count"},
                 where);
  read_key(doc, "K", base.K, where);
  read_key(doc, "num_donors", base.num_donors, where);
  read_key(doc, "S_cardinality", base.S_cardinality, where);
  read_key(doc, "T", base.T, where);
  read_key(doc, "T0", base.T0, where);
  read_key(doc, "N_per_group", base.N_per_group, where);
  std::string agg = aggregation_name(base.aggregation);
  read_key(doc, "aggregation", agg, where);
  base.aggregation = parse_aggregation(agg);
  std::string mode = composition_mode_name(base.composition_mode);
  read_key(doc, "composition_mode", mode, where);
  base.composition_mode = parse_composition_mode(mode);
  read_key(doc, "seed", base.seed, where);
  read_key(doc, "noise_sd", base.noise_sd, where);
  read_key(doc, "post_intervention_shift", base.post_intervention_shift, where);
  read_key(doc, "outcome_scale", base.outcome_scale, where);
  read_key(doc, "covariate_count", base.covariate_count, where);
  return base;
}

Json to_json(const WeightVector& weights, const PanelData& panel,
             const FitConfig& cfg) {
  Json j;
  j["target"] = panel.target_label();
  Json donors = Json::array();
  Json by_label = Json::object();
  for (std::size_t i = 0; i < weights.donor_indices.size(); ++i) {
    const auto& label = panel.group_labels()[weights.donor_indices[i]];
    donors.push_back(label);
    by_label[label] = weights.beta(static_cast<Eigen::Index>(i));
  }
  j["donors"] = donors;
  j["beta"] = vector_json(weights.beta);
  j["weights"] = by_label;
  j["weight_sum"] = weights.beta.sum();
  j["objective"] = weights.objective_value;
  j["converged"] = weights.converged;
  j["iterations"] = weights.iterations;
  j["pre_periods"] = panel.pre_periods();
  j["config"] = to_json(cfg);
  return j;
}

Json to_json(const InvariantSetReport& report) {
  Json j;
  j["S_indices"] = report.S_indices;
  j["S_cardinality"] = report.S_cardinality;
  j["donor_count"] = report.donor_count;
  j["a3_holds"] = report.a3_holds;
  j["a4_holds"] = report.a4_holds;
  j["per_category_max_gap"] = vector_json(report.per_category_max_gap);
  return j;
}

Json to_json(const OracleWeights& weights, std::span<const std::string> groups) {
  Json j;
  Json donors = Json::array();
  for (auto d : weights.donor_indices) donors.push_back(groups[d]);
  j["donors"] = donors;
  j["beta"] = vector_json(weights.beta);
  j["residual_norm"] = weights.residual_norm;
  j["tolerance"] = weights.tolerance;
  j["exists"] = weights.exists;
  return j;
}

Json truth_json(const SimulatedStudy& study) {
  Json j;
  j["config"] = to_json(study.config);
  j["groups"] = study.panel.group_labels();
  j["target"] = study.panel.target_label();
  j["T0"] = study.panel.pre_periods();
  Json comps = Json::array();
  for (const auto& c : study.compositions) comps.push_back(vector_json(c.probs()));
  j["compositions"] = comps;
  j["true_S"] = study.true_S;
  Json table = Json::array();
  const auto& lambda = study.functions.conditional_mean;
  for (Eigen::Index t = 0; t < lambda.rows(); ++t) {
    table.push_back(vector_json(lambda.row(t).transpose()));
  }
  j["conditional_mean"] = table;
  Json curves = Json::array();
  for (const auto& c : study.functions.curves) {
    curves.push_back({{"amplitude", c.amplitude},
                      {"frequency", c.frequency},
                      {"phase", c.phase},
                      {"log_slope", c.log_slope},
                      {"offset", c.offset}});
  }
  j["curves"] = curves;
  j["noise_sd"] = study.functions.noise_sd;
  j["post_intervention_shift"] = study.functions.post_intervention_shift;
  return j;
}

StudyTruth truth_from_json(const Json& doc) {
  StudyTruth truth;
  try {
    truth.config = sim_config_from_json(doc.at("config"));
    truth.groups = doc.at("groups").get<std::vector<std::string>>();
    const auto target = doc.at("target").get<std::string>();
    const auto it = std::find(truth.groups.begin(), truth.groups.end(), target);
    if (it == truth.groups.end()) throw DataError("target '" + target + "' is not a group");
    truth.target = static_cast<std::size_t>(it - truth.groups.begin());

    const auto comps = doc.at("compositions").get<std::vector<std::vector<double>>>();
    if (comps.size() != truth.groups.size()) {
      throw DataError("one composition per group expected");
    }
    for (const auto& c : comps) {
      truth.compositions.emplace_back(
          Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size())));
    }
    truth.true_S = doc.at("true_S").get<std::vector<std::size_t>>();

    const auto table = doc.at("conditional_mean").get<std::vector<std::vector<double>>>();
    if (table.empty()) throw DataError("conditional_mean table is empty");
    const auto K = table.front().size();
    truth.functions.conditional_mean.resize(static_cast<Eigen::Index>(table.size()),
                                            static_cast<Eigen::Index>(K));
    for (std::size_t t = 0; t < table.size(); ++t) {
      if (table[t].size() != K) throw DataError("conditional_mean rows differ in length");
      for (std::size_t k = 0; k < K; ++k) {
        truth.functions.conditional_mean(static_cast<Eigen::Index>(t),
                                         static_cast<Eigen::Index>(k)) = table[t][k];
      }
    }
    for (const auto& c : doc.at("curves")) {
      truth.functions.curves.push_back(CategoryCurve{
          c.at("amplitude").get<double>(), c.at("frequency").get<double>(),
          c.at("phase").get<double>(), c.at("log_slope").get<double>(),
          c.at("offset").get<double>()});
    }
    truth.functions.noise_sd = doc.at("noise_sd").get<double>();
    truth.functions.post_intervention_shift = doc.at("post_intervention_shift").get<double>();
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed truth document: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed truth document: ") + e.what());
  }
  return truth;
}

void write_study_bundle(const SimulatedStudy& study, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  to_csv(study.panel, dir / "panel.csv");
  write_json_file(truth_json(study), dir / "truth.json");
  const auto& groups = study.panel.group_labels();
  {
    std::ofstream out(dir / "covariates_suitable.csv", std::ios::binary);
    write_aux_csv(study.aux_suitable, groups, out);
  }
  {
    std::ofstream out(dir / "covariates_unsuitable.csv", std::ios::binary);
    write_aux_csv(study.aux_unsuitable, groups, out);
  }
}

void write_json_file(const Json& doc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace fgsc

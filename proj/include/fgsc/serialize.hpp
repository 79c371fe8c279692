#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "fgsc/estimators.hpp"
#include "fgsc/evaluation.hpp"
#include "fgsc/finegrained.hpp"
#include "fgsc/identification.hpp"

namespace fgsc {

using Json = nlohmann::json;  // std::map backed, so keys come out sorted

Json to_json(const FitConfig& cfg);
/// Overlays the keys present in `doc` on `base`. Unknown keys and wrong
/// types throw UsageError.
FitConfig fit_config_from_json(const Json& doc, FitConfig base = {});

Json to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const Json& doc, SimConfig base = {});

std::string aggregation_name(Aggregation a);
Aggregation parse_aggregation(const std::string& name);
std::string composition_mode_name(CompositionMode m);
CompositionMode parse_composition_mode(const std::string& name);
/// none | ridge | elastic_net | simplex; penalties come from the config keys.
Regularizer parse_regularizer(const std::string& name, double lambda, double l1,
                              double l2);

/// Donor labels, weights, objective and convergence for a fitted panel.
Json to_json(const WeightVector& weights, const PanelData& panel,
             const FitConfig& cfg);

Json to_json(const InvariantSetReport& report);
Json to_json(const OracleWeights& weights, std::span<const std::string> groups);

/// Ground truth of a simulated study: labels, compositions, true S, the
/// conditional mean table and curve parameters, noise, shift, T0, config.
Json truth_json(const SimulatedStudy& study);

struct StudyTruth {
  SimConfig config;
  std::vector<std::string> groups;
  std::size_t target = 0;
  std::vector<GroupComposition> compositions;
  OutcomeFunctionFamily functions;
  std::vector<std::size_t> true_S;
};
/// Throws DataError on a malformed document.
StudyTruth truth_from_json(const Json& doc);

/// panel.csv, truth.json, covariates_suitable.csv, covariates_unsuitable.csv
void write_study_bundle(const SimulatedStudy& study,
                        const std::filesystem::path& dir);

/// Pretty-printed with a trailing newline.
void write_json_file(const Json& doc, const std::filesystem::path& path);
/// Missing file is a UsageError, a parse failure a DataError.
Json read_json_file(const std::filesystem::path& path);

}  // namespace fgsc

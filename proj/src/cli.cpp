#include "fgsc/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <ostream>
#include <set>

#include "CLI11.hpp"

#include "fgsc/error.hpp"
#include "fgsc/estimators.hpp"
#include "fgsc/evaluation.hpp"
#include "fgsc/identification.hpp"
#include "fgsc/serialize.hpp"

namespace fgsc {

namespace fs = std::filesystem;

namespace {

using Override = std::pair<Json::json_pointer, Json>;

template <typename T>
CLI::Option* bind_option(CLI::App& app, const std::string& flag, const std::string& pointer,
                  std::vector<Override>& overrides, const std::string& help) {
  return app.add_option_function<T>(
      flag,
      [&overrides, pointer](const T& v) {
        overrides.emplace_back(Json::json_pointer(pointer), Json(v));
      },
      help);
}

void bind_flag(CLI::App& app, const std::string& flag, const std::string& pointer,
               std::vector<Override>& overrides, const std::string& help) {
  app.add_flag_callback(
      flag, [&overrides, pointer] { overrides.emplace_back(Json::json_pointer(pointer), true); },
      help);
}

void add_input_flags(CLI::App& sub, std::vector<Override>& o) {
  bind_option<std::string>(sub, "--panel", "/input/panel", o, "long-format panel CSV");
  bind_option<std::string>(sub, "--target", "/input/target", o, "target group label");
  bind_option<int>(sub, "--intervention", "/input/intervention", o,
            "time label of the last pre-intervention period");
}

void add_fit_flags(CLI::App& sub, std::vector<Override>& o) {
  bind_option<std::string>(sub, "--regularizer", "/fit/regularizer", o,
                    "none | ridge | elastic_net | simplex");
  bind_option<double>(sub, "--lambda", "/fit/lambda", o, "ridge penalty");
  bind_option<double>(sub, "--l1", "/fit/l1", o, "elastic net L1 penalty");
  bind_option<double>(sub, "--l2", "/fit/l2", o, "elastic net L2 penalty");
  bind_option<int>(sub, "--max-iterations", "/fit/max_iterations", o, "iterative solver bound");
  bind_option<double>(sub, "--tolerance", "/fit/tolerance", o, "iterative solver tolerance");
  bind_option<double>(sub, "--covariate-scale", "/fit/covariate_scale", o,
               "weight of stacked covariate rows");
}

void add_sim_flags(CLI::App& sub, std::vector<Override>& o) {
  bind_option<int>(sub, "--K", "/sim/K", o, "number of cause categories");
  bind_option<int>(sub, "--num-donors", "/sim/num_donors", o, "donor groups");
  bind_option<int>(sub, "--S", "/sim/S_cardinality", o, "size of the minimal invariant set");
  bind_option<int>(sub, "--T", "/sim/T", o, "periods");
  bind_option<int>(sub, "--T0", "/sim/T0", o, "pre-intervention periods");
  bind_option<int>(sub, "--N", "/sim/N_per_group", o, "individuals per group and period");
  bind_option<std::string>(sub, "--aggregation", "/sim/aggregation", o, "mean | median");
  bind_option<std::string>(sub, "--mode", "/sim/composition_mode", o,
                    "invariant_split | dirichlet_mask");
  bind_option<double>(sub, "--noise-sd", "/sim/noise_sd", o, "individual noise sd");
  bind_option<double>(sub, "--shift", "/sim/post_intervention_shift", o,
               "treated shift after T0");
  bind_option<double>(sub, "--outcome-scale", "/sim/outcome_scale", o, "curve magnitude");
  bind_option<int>(sub, "--covariate-count", "/sim/covariate_count", o,
            "covariates of each kind");
}

void add_sweep_flags(CLI::App& sub, std::vector<Override>& o) {
  bind_option<int>(sub, "--replications", "/sweep/replications", o, "replications per point");
  bind_option<double>(sub, "--split", "/sweep/split", o, "fraction of periods used to fit");
  bind_option<unsigned>(sub, "--threads", "/sweep/threads", o, "worker threads (0: all cores)");
}

Json default_doc(const std::string& command) {
  SimConfig sim;
  if (command == "covariates") {
    sim.T = 15;
    sim.T0 = 12;
  }
  Json doc;
  doc["seed"] = nullptr;
  doc["out"] = "out";
  doc["quiet"] = false;
  doc["timestamps"] = false;
  doc["input"] = {{"panel", ""},
                  {"target", ""},
                  {"intervention", nullptr},
                  {"aux", ""},
                  {"donors", Json::array()},
                  {"map", (data_dir() / "census_divisions.csv").string()},
                  {"exclude", ""},
                  {"truth", ""},
                  {"tol", 1e-9},
                  {"oracle_tol", 1e-8}};
  doc["fit"] = to_json(FitConfig{});
  doc["sim"] = to_json(sim);
  doc["sweep"] = {{"knob", "S"},   {"from", nullptr},    {"to", nullptr},
                  {"step", nullptr}, {"replications", 100}, {"split", 0.75},
                  {"threads", 0}};
  return doc;
}

void check_keys(const Json& doc, const Json& reference, const std::string& where) {
  if (!doc.is_object()) throw UsageError(where + " must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!reference.contains(key)) throw UsageError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const Json& doc, const std::string& pointer) {
  try {
    return doc.at(Json::json_pointer(pointer)).get<T>();
  } catch (const Json::exception&) {
    throw UsageError("config value " + pointer + " is missing or has the wrong type");
  }
}

std::string need_string(const Json& doc, const std::string& pointer, const char* flag) {
  auto v = get<std::string>(doc, pointer);
  if (v.empty()) throw UsageError(std::string("missing required option ") + flag);
  return v;
}

int need_int(const Json& doc, const std::string& pointer, const char* flag) {
  if (doc.at(Json::json_pointer(pointer)).is_null()) {
    throw UsageError(std::string("missing required option ") + flag);
  }
  return get<int>(doc, pointer);
}

Json resolve(const std::string& command, const std::string& config_path,
             const std::vector<Override>& overrides) {
  Json doc = default_doc(command);
  if (!config_path.empty()) {
    const Json file = read_json_file(config_path);
    check_keys(file, doc, "config");
    for (const auto& [key, value] : file.items()) {
      if (key == "fit") {
        doc["fit"] = to_json(fit_config_from_json(value, fit_config_from_json(doc["fit"])));
      } else if (key == "sim") {
        doc["sim"] = to_json(sim_config_from_json(value, sim_config_from_json(doc["sim"])));
      } else if (doc[key].is_object()) {
        check_keys(value, doc[key], "config section " + key);
        doc[key].update(value);
      } else {
        doc[key] = value;
      }
    }
  }
  for (const auto& [pointer, value] : overrides) doc[pointer] = value;

  doc["fit"] = to_json(fit_config_from_json(doc["fit"]));
  doc["sim"] = to_json(sim_config_from_json(doc["sim"]));
  if (doc["seed"].is_null()) {
    doc["seed"] = doc["sim"]["seed"];
  } else {
    doc["sim"]["seed"] = get<std::uint64_t>(doc, "/seed");
  }

  auto& sweep = doc["sweep"];
  const auto knob = get<std::string>(doc, "/sweep/knob");
  if (knob != "S" && knob != "T") throw UsageError("--knob must be S or T, got '" + knob + "'");
  if (sweep["from"].is_null()) sweep["from"] = knob == "S" ? 2 : 20;
  if (sweep["to"].is_null()) sweep["to"] = knob == "S" ? 11 : 90;
  if (sweep["step"].is_null()) sweep["step"] = knob == "S" ? 1 : 10;
  return doc;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunContext {
  const Json& doc;
  fs::path out_dir;
  std::ostream& out;
  std::ostream& err;
  bool quiet;
  std::vector<std::string> outputs;

  void note(const std::string& line) const {
    if (!quiet) out << line << '\n';
  }
  fs::path output(const std::string& name) {
    outputs.push_back(name);
    return out_dir / name;
  }
};

FitConfig fit_config(const Json& doc) { return fit_config_from_json(doc.at("fit")); }
SimConfig sim_config(const Json& doc) { return sim_config_from_json(doc.at("sim")); }

SweepOptions sweep_options(const Json& doc) {
  SweepOptions opts;
  const int reps = get<int>(doc, "/sweep/replications");
  if (reps < 1) throw UsageError("--replications must be at least 1");
  opts.replications = static_cast<std::size_t>(reps);
  opts.split = get<double>(doc, "/sweep/split");
  opts.threads = get<unsigned>(doc, "/sweep/threads");
  opts.fit = fit_config(doc);
  return opts;
}

void write_csv_file(const fs::path& path, const SweepResult& result) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path.string());
  write_sweep_csv(result, f);
}

int cmd_fit(RunContext& ctx) {
  const auto& doc = ctx.doc;
  const auto path = need_string(doc, "/input/panel", "--panel");
  const auto target = need_string(doc, "/input/target", "--target");
  const int intervention = need_int(doc, "/input/intervention", "--intervention");
  const PanelData panel = from_csv(path, target, intervention);

  std::vector<std::size_t> donors;
  for (const auto& label : get<std::vector<std::string>>(doc, "/input/donors")) {
    donors.push_back(panel.group_index(label));
  }
  if (donors.empty()) donors = all_donors(panel);

  FitConfig cfg = fit_config(doc);
  AuxMatrix aux;
  const auto aux_path = get<std::string>(doc, "/input/aux");
  if (!aux_path.empty()) {
    aux = read_aux_csv(aux_path, panel.group_labels());
    cfg.include_covariates = true;
  }
  const auto weights = fit(panel, donors, aux_path.empty() ? nullptr : &aux, cfg);
  const auto effect = estimate_effect(weights, panel);

  write_json_file(to_json(weights, panel, cfg), ctx.output("weights.json"));
  {
    const auto& times = panel.time_labels();
    const Vector synthetic =
        predict_counterfactual(weights, panel, times.front(), times.back());
    std::ofstream f(ctx.output("series.csv"), std::ios::binary);
    f << "time,observed,synthetic,gap\n";
    for (std::size_t t = 0; t < times.size(); ++t) {
      const double observed = panel.outcome(panel.target_index(), t);
      const double s = synthetic(static_cast<Eigen::Index>(t));
      f << times[t] << ',' << format_shortest(observed) << ',' << format_shortest(s) << ','
        << format_shortest(observed - s) << '\n';
    }
  }
  ctx.note("tau=" + format_shortest(effect.tau));
  if (!weights.converged) {
    ctx.err << "error: solver did not converge within " << cfg.max_iterations
            << " iterations\n";
    return static_cast<int>(ExitCode::kNonConvergence);
  }
  return 0;
}

int cmd_simulate(RunContext& ctx) {
  const auto study = simulate_panel(sim_config(ctx.doc));
  ctx.outputs.insert(ctx.outputs.end(), {"panel.csv", "truth.json", "covariates_suitable.csv",
                                         "covariates_unsuitable.csv"});
  write_study_bundle(study, ctx.out_dir);
  std::string S;
  for (auto k : study.true_S) S += (S.empty() ? "" : ",") + std::to_string(k);
  ctx.note("groups=" + std::to_string(study.panel.num_groups()) +
           " periods=" + std::to_string(study.panel.num_periods()) + " true_S=" + S);
  return 0;
}

int cmd_sweep(RunContext& ctx) {
  const auto& doc = ctx.doc;
  const auto knob = get<std::string>(doc, "/sweep/knob");
  const int from = get<int>(doc, "/sweep/from");
  const int to = get<int>(doc, "/sweep/to");
  const int step = get<int>(doc, "/sweep/step");
  if (step < 1) throw UsageError("--step must be positive");
  if (from > to) throw UsageError("--from must not exceed --to");
  std::vector<int> values;
  for (int v = from; v <= to; v += step) values.push_back(v);

  const auto base = sim_config(doc);
  const auto opts = sweep_options(doc);
  if (knob == "S") {
    const auto result = sweep_S(base, values, opts);
    write_csv_file(ctx.output("sweep.csv"), result);
  } else {
    const auto result = sweep_T_mean_median(base, values, opts);
    write_csv_file(ctx.output("sweep_mean.csv"), result.mean);
    write_csv_file(ctx.output("sweep_median.csv"), result.median);
  }
  ctx.note("points=" + std::to_string(values.size()) +
           " replications=" + std::to_string(opts.replications));
  return 0;
}

int cmd_covariates(RunContext& ctx) {
  const auto result = covariate_experiment(sim_config(ctx.doc), sweep_options(ctx.doc));
  write_csv_file(ctx.output("covariates.csv"), result);
  for (std::size_t i = 0; i < result.per_value.size(); ++i) {
    ctx.note(result.knob_values[i] +
             " observed=" + format_shortest(result.per_value[i].mean_observed_mse) +
             " counterfactual=" +
             format_shortest(result.per_value[i].mean_counterfactual_mse));
  }
  return 0;
}

int cmd_diagnose(RunContext& ctx) {
  const auto& doc = ctx.doc;
  const auto truth =
      truth_from_json(read_json_file(need_string(doc, "/input/truth", "--truth")));
  const double tol = get<double>(doc, "/input/tol");
  const double oracle_tol = get<double>(doc, "/input/oracle_tol");
  std::vector<std::size_t> donors;
  for (std::size_t j = 0; j < truth.groups.size(); ++j) {
    if (j != truth.target) donors.push_back(j);
  }
  const auto report = minimal_invariant_set(truth.compositions, truth.target, donors, tol);
  const auto oracle = solve_oracle_weights(truth.compositions, truth.target, donors,
                                           report.S_indices, oracle_tol);
  const double gap =
      max_identification_gap(truth.compositions, truth.functions, truth.target, oracle);

  Json result;
  result["invariant_set"] = to_json(report);
  result["oracle"] = to_json(oracle, truth.groups);
  result["max_identification_gap"] = gap;
  result["identified"] = oracle.exists && gap <= oracle_tol;
  write_json_file(result, ctx.output("diagnosis.json"));
  auto yes = [](bool b) { return b ? std::string("true") : std::string("false"); };
  ctx.note("S_cardinality=" + std::to_string(report.S_cardinality) +
           " donor_count=" + std::to_string(report.donor_count) +
           " a3_holds=" + yes(report.a3_holds) + " a4_holds=" + yes(report.a4_holds) +
           " exists=" + yes(oracle.exists));
  return 0;
}

int cmd_aggregate(RunContext& ctx) {
  const auto& doc = ctx.doc;
  const auto path = need_string(doc, "/input/panel", "--panel");
  const auto target = need_string(doc, "/input/target", "--target");
  const int intervention = need_int(doc, "/input/intervention", "--intervention");
  PanelData panel = from_csv(path, target, intervention);
  if (!panel.populations()) throw DataError(path + ": aggregation needs a population column");

  const auto exclude_path = get<std::string>(doc, "/input/exclude");
  if (!exclude_path.empty()) {
    const std::set<std::string> present(panel.group_labels().begin(),
                                        panel.group_labels().end());
    std::vector<std::string> drop;
    for (const auto& label : read_label_list(exclude_path)) {
      if (present.count(label)) drop.push_back(label);
    }
    panel = drop_groups(panel, drop);
  }

  const GroupMap full = read_group_map(need_string(doc, "/input/map", "--map"));
  GroupMap grouping;
  for (const auto& label : panel.group_labels()) {
    const auto it = full.find(label);
    if (it != full.end()) grouping[label] = it->second;
  }
  grouping[panel.target_label()] = panel.target_label();
  const auto aggregated = aggregate_groups(panel, grouping, population_table(panel));
  to_csv(aggregated, ctx.output("panel.csv"));
  ctx.note("groups=" + std::to_string(aggregated.num_groups()));
  return 0;
}

void write_manifest(RunContext& ctx, const std::string& command, const std::string& started) {
  Json manifest;
  manifest["tool"] = "fgsc";
  manifest["version"] = kToolVersion;
  manifest["command"] = command;
  manifest["config"] = ctx.doc;
  manifest["seed"] = ctx.doc["seed"];
  manifest["outputs"] = ctx.outputs;
  if (get<bool>(ctx.doc, "/timestamps")) {
    manifest["started_at"] = started;
    manifest["finished_at"] = utc_now();
  }
  write_json_file(manifest, ctx.out_dir / "manifest.json");
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

fs::path data_dir() { return FGSC_DATA_DIR; }

GroupMap read_group_map(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open group map " + path.string());
  GroupMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected group,super_group");
    }
    const auto group = trim(line.substr(0, comma));
    const auto super = trim(line.substr(comma + 1));
    if (!map.emplace(group, super).second) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": group " + group +
                      " listed twice");
    }
  }
  return map;
}

std::vector<std::string> read_label_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open label list " + path.string());
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    const auto label = trim(line);
    if (label.empty() || label.front() == '#') continue;
    labels.push_back(label);
  }
  return labels;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic control fitting, simulation and identification diagnostics",
               "fgsc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::vector<Override> overrides;
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration");
  bind_option<std::uint64_t>(app, "--seed", "/seed", overrides, "master seed");
  bind_option<std::string>(app, "--out", "/out", overrides, "output directory");
  bind_flag(app, "--quiet", "/quiet", overrides, "suppress informational output");
  bind_flag(app, "--timestamps", "/timestamps", overrides,
            "record wall-clock times in the manifest");

  auto* fit = app.add_subcommand("fit", "fit donor weights and report the effect");
  add_input_flags(*fit, overrides);
  add_fit_flags(*fit, overrides);
  bind_option<std::string>(*fit, "--aux", "/input/aux", overrides, "wide covariate CSV to stack");
  bind_option<std::vector<std::string>>(*fit, "--donors", "/input/donors", overrides,
                                 "comma-separated donor labels (default: all)")
      ->delimiter(',');

  auto* simulate = app.add_subcommand("simulate", "simulate a fine-grained study bundle");
  add_sim_flags(*simulate, overrides);

  auto* sweep = app.add_subcommand("sweep", "replication sweep over |S| or T");
  add_sim_flags(*sweep, overrides);
  add_fit_flags(*sweep, overrides);
  add_sweep_flags(*sweep, overrides);
  bind_option<std::string>(*sweep, "--knob", "/sweep/knob", overrides, "S | T");
  bind_option<int>(*sweep, "--from", "/sweep/from", overrides, "first knob value");
  bind_option<int>(*sweep, "--to", "/sweep/to", overrides, "last knob value");
  bind_option<int>(*sweep, "--step", "/sweep/step", overrides, "knob increment");

  auto* covariates =
      app.add_subcommand("covariates", "outcome-only vs suitable vs unsuitable covariates");
  add_sim_flags(*covariates, overrides);
  add_fit_flags(*covariates, overrides);
  add_sweep_flags(*covariates, overrides);

  auto* diagnose = app.add_subcommand("diagnose", "identification report for a study bundle");
  bind_option<std::string>(*diagnose, "--truth", "/input/truth", overrides, "truth.json of a bundle");
  bind_option<double>(*diagnose, "--tol", "/input/tol", overrides, "invariant set tolerance");
  bind_option<double>(*diagnose, "--oracle-tol", "/input/oracle_tol", overrides,
               "oracle residual and verification tolerance");

  auto* aggregate = app.add_subcommand("aggregate", "population-weighted super-group panel");
  add_input_flags(*aggregate, overrides);
  bind_option<std::string>(*aggregate, "--map", "/input/map", overrides,
                    "group,super_group CSV (default: census divisions)");
  bind_option<std::string>(*aggregate, "--exclude", "/input/exclude", overrides,
                    "groups to drop before aggregating");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const std::string started = utc_now();
  try {
    const Json doc = resolve(command, config_path, overrides);
    RunContext ctx{doc, fs::path(get<std::string>(doc, "/out")), out, err,
                   get<bool>(doc, "/quiet"), {}};
    fs::create_directories(ctx.out_dir);
    int code = 0;
    if (command == "fit") code = cmd_fit(ctx);
    else if (command == "simulate") code = cmd_simulate(ctx);
    else if (command == "sweep") code = cmd_sweep(ctx);
    else if (command == "covariates") code = cmd_covariates(ctx);
    else if (command == "diagnose") code = cmd_diagnose(ctx);
    else code = cmd_aggregate(ctx);
    write_manifest(ctx, command, started);
    return code;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kDataValidation);
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  }
}

}  // namespace fgsc

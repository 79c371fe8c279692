#include "fgsc/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "fgsc/error.hpp"
#include "fgsc/rng.hpp"

namespace fgsc {

namespace {

std::size_t fit_count(std::size_t T, double split) {
  if (!(split > 0.0 && split < 1.0)) {
    throw UsageError("split fraction must lie strictly between 0 and 1");
  }
  // Guard against 0.7 * 10 landing a hair above 7.
  const auto n = static_cast<std::size_t>(
      std::ceil(split * static_cast<double>(T) - 1e-9));
  if (n < 1 || n >= T) {
    throw UsageError("split " + format_shortest(split) + " of " + std::to_string(T) +
                     " periods leaves an empty segment");
  }
  return n;
}

SimConfig replication_config(const SimConfig& base, std::size_t point,
                             std::size_t replication, double split) {
  SimConfig cfg = base;
  cfg.seed = derive_seed(base.seed, {point, replication});
  cfg.T0 = static_cast<int>(fit_count(static_cast<std::size_t>(cfg.T), split));
  return cfg;
}

}  // namespace

SplitEvaluation time_split_evaluate(const PanelData& panel,
                                    std::span<const std::size_t> donors,
                                    const FitConfig& cfg, double split,
                                    const AuxMatrix* aux) {
  const std::size_t T = panel.num_periods();
  const std::size_t n_fit = fit_count(T, split);
  const auto weights = fit_periods(panel, donors, aux, cfg, n_fit);

  const auto& Y = panel.outcomes();
  const auto target = static_cast<Eigen::Index>(panel.target_index());
  double fit_sq = 0.0;
  double eval_sq = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const auto c = static_cast<Eigen::Index>(t);
    double synthetic = 0.0;
    for (std::size_t i = 0; i < donors.size(); ++i) {
      synthetic += weights.beta(static_cast<Eigen::Index>(i)) *
                   Y(static_cast<Eigen::Index>(donors[i]), c);
    }
    const double gap = Y(target, c) - synthetic;
    (t < n_fit ? fit_sq : eval_sq) += gap * gap;
  }

  SplitEvaluation out;
  out.split_fraction = split;
  out.fit_periods = n_fit;
  out.eval_periods = T - n_fit;
  out.observed_mse = fit_sq / static_cast<double>(n_fit);
  out.counterfactual_mse = eval_sq / static_cast<double>(T - n_fit);
  std::size_t rows = n_fit;
  if (cfg.include_covariates && aux != nullptr) {
    rows += static_cast<std::size_t>(aux->values.cols());
  }
  out.underdetermined = rows < donors.size() + 1;
  out.converged = weights.converged;
  return out;
}

SweepPoint summarize(std::span<const SplitEvaluation> runs) {
  SweepPoint p;
  p.replications = runs.size();
  if (runs.empty()) return p;
  const auto n = static_cast<double>(runs.size());
  for (const auto& r : runs) {
    p.mean_observed_mse += r.observed_mse;
    p.mean_counterfactual_mse += r.counterfactual_mse;
    if (r.underdetermined) ++p.underdetermined;
  }
  p.mean_observed_mse /= n;
  p.mean_counterfactual_mse /= n;
  if (runs.size() > 1) {
    double ss_obs = 0.0;
    double ss_cf = 0.0;
    for (const auto& r : runs) {
      ss_obs += (r.observed_mse - p.mean_observed_mse) * (r.observed_mse - p.mean_observed_mse);
      ss_cf += (r.counterfactual_mse - p.mean_counterfactual_mse) *
               (r.counterfactual_mse - p.mean_counterfactual_mse);
    }
    p.se_observed = std::sqrt(ss_obs / (n - 1.0)) / std::sqrt(n);
    p.se_counterfactual = std::sqrt(ss_cf / (n - 1.0)) / std::sqrt(n);
  }
  return p;
}

SweepResult sweep_S(const SimConfig& base, std::span<const int> S_values,
                    const SweepOptions& options) {
  const std::size_t R = options.replications;
  const std::size_t P = S_values.size();
  std::vector<SplitEvaluation> runs(P * R);
  parallel_for(P * R, options.threads, [&](std::size_t job) {
    const std::size_t i = job / R;
    const std::size_t r = job % R;
    SimConfig cfg = replication_config(base, i, r, options.split);
    cfg.S_cardinality = S_values[i];
    cfg.covariate_count = 0;
    const auto study = simulate_panel(cfg);
    const auto donors = all_donors(study.panel);
    runs[job] = time_split_evaluate(study.panel, donors, options.fit, options.split);
  });

  SweepResult out;
  out.knob = "S";
  for (std::size_t i = 0; i < P; ++i) {
    out.knob_values.push_back(std::to_string(S_values[i]));
    out.per_value.push_back(summarize(std::span(runs).subspan(i * R, R)));
  }
  return out;
}

MeanMedianSweep sweep_T_mean_median(const SimConfig& base,
                                    std::span<const int> T_values,
                                    const SweepOptions& options) {
  const std::size_t R = options.replications;
  const std::size_t P = T_values.size();
  std::vector<SplitEvaluation> mean_runs(P * R);
  std::vector<SplitEvaluation> median_runs(P * R);
  parallel_for(P * R, options.threads, [&](std::size_t job) {
    const std::size_t i = job / R;
    const std::size_t r = job % R;
    SimConfig with_T = base;
    with_T.T = T_values[i];
    SimConfig cfg = replication_config(with_T, i, r, options.split);
    cfg.covariate_count = 0;
    const auto studies = simulate_mean_and_median(cfg);
    const auto donors = all_donors(studies.mean.panel);
    mean_runs[job] = time_split_evaluate(studies.mean.panel, donors, options.fit, options.split);
    median_runs[job] =
        time_split_evaluate(studies.median.panel, donors, options.fit, options.split);
  });

  MeanMedianSweep out;
  out.mean.knob = "T";
  out.median.knob = "T";
  for (std::size_t i = 0; i < P; ++i) {
    const auto label = std::to_string(T_values[i]);
    out.mean.knob_values.push_back(label);
    out.median.knob_values.push_back(label);
    out.mean.per_value.push_back(summarize(std::span(mean_runs).subspan(i * R, R)));
    out.median.per_value.push_back(summarize(std::span(median_runs).subspan(i * R, R)));
  }
  return out;
}

SweepResult covariate_experiment(const SimConfig& base, const SweepOptions& options) {
  const std::size_t R = options.replications;
  std::vector<SplitEvaluation> plain(R), suitable(R), unsuitable(R);
  FitConfig with_aux = options.fit;
  with_aux.include_covariates = true;
  FitConfig without_aux = options.fit;
  without_aux.include_covariates = false;
  parallel_for(R, options.threads, [&](std::size_t r) {
    const SimConfig cfg = replication_config(base, 0, r, options.split);
    const auto study = simulate_panel(cfg);
    const auto donors = all_donors(study.panel);
    plain[r] = time_split_evaluate(study.panel, donors, without_aux, options.split);
    suitable[r] = time_split_evaluate(study.panel, donors, with_aux, options.split,
                                      &study.aux_suitable);
    unsuitable[r] = time_split_evaluate(study.panel, donors, with_aux, options.split,
                                        &study.aux_unsuitable);
  });

  SweepResult out;
  out.knob = "covariates";
  out.knob_values = {"outcome_only", "suitable", "unsuitable"};
  out.per_value = {summarize(plain), summarize(suitable), summarize(unsuitable)};
  return out;
}

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  out << "knob,observed_mse,counterfactual_mse,se_observed,se_counterfactual,replications\n";
  for (std::size_t i = 0; i < result.per_value.size(); ++i) {
    const auto& p = result.per_value[i];
    out << result.knob_values[i] << ',' << format_shortest(p.mean_observed_mse) << ','
        << format_shortest(p.mean_counterfactual_mse) << ','
        << format_shortest(p.se_observed) << ',' << format_shortest(p.se_counterfactual)
        << ',' << p.replications << '\n';
  }
}

void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(threads, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::size_t failed_index = n;
  std::exception_ptr failure;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace fgsc

#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fgsc/estimators.hpp"
#include "fgsc/finegrained.hpp"

namespace fgsc {

struct SplitEvaluation {
  double observed_mse = 0.0;        // fit periods
  double counterfactual_mse = 0.0;  // held-out later periods
  double split_fraction = 0.75;
  std::size_t fit_periods = 0;
  std::size_t eval_periods = 0;
  /// Fewer fit rows than donors + 1: no residual degrees of freedom, the
  /// observed MSE says nothing.
  bool underdetermined = false;
  bool converged = true;
};

/// Fits on the first ceil(split * T) periods, scores both segments. The
/// panel's own T0 is ignored: the protocol assumes untreated data throughout.
SplitEvaluation time_split_evaluate(const PanelData& panel,
                                    std::span<const std::size_t> donors,
                                    const FitConfig& cfg, double split = 0.75,
                                    const AuxMatrix* aux = nullptr);

struct SweepPoint {
  double mean_observed_mse = 0.0;
  double mean_counterfactual_mse = 0.0;
  double se_observed = 0.0;  // sample sd / sqrt(replications)
  double se_counterfactual = 0.0;
  std::size_t replications = 0;
  std::size_t underdetermined = 0;  // replications flagged
};

struct SweepResult {
  std::string knob;
  std::vector<std::string> knob_values;
  std::vector<SweepPoint> per_value;
};

struct SweepOptions {
  std::size_t replications = 100;
  FitConfig fit;  // unconstrained least squares by default
  double split = 0.75;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Mean and standard error over per-replication results, reduced in index
/// order.
SweepPoint summarize(std::span<const SplitEvaluation> runs);

/// One sweep point per |S|; replication r at point i uses seed
/// derive_seed(base.seed, {i, r}).
SweepResult sweep_S(const SimConfig& base, std::span<const int> S_values,
                    const SweepOptions& options);

struct MeanMedianSweep {
  SweepResult mean;
  SweepResult median;
};

/// Same studies (same seeds, same individuals) aggregated by mean and by
/// median, for each T.
MeanMedianSweep sweep_T_mean_median(const SimConfig& base,
                                    std::span<const int> T_values,
                                    const SweepOptions& options);

/// Rows outcome_only, suitable, unsuitable; each replication fits all three
/// on the same simulated study.
SweepResult covariate_experiment(const SimConfig& base,
                                 const SweepOptions& options);

/// knob,observed_mse,counterfactual_mse,se_observed,se_counterfactual,replications
void write_sweep_csv(const SweepResult& result, std::ostream& out);

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace fgsc

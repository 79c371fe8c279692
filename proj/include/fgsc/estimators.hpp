#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fgsc/panel.hpp"

namespace fgsc {

struct NoRegularizer {};
struct Ridge {
  double lambda = 0.0;
};
struct ElasticNet {
  double l1 = 0.0;
  double l2 = 0.0;
};
/// beta >= 0, sum beta = 1.
struct SimplexConstraint {};

using Regularizer = std::variant<NoRegularizer, Ridge, ElasticNet, SimplexConstraint>;

std::string regularizer_name(const Regularizer& r);

struct FitConfig {
  Regularizer regularizer = NoRegularizer{};
  int max_iterations = 10000;
  double tolerance = 1e-10;
  bool include_covariates = false;
  double covariate_scale = 1.0;

  /// Throws UsageError on a non-positive tolerance / iteration bound or a
  /// negative penalty.
  void validate() const;
};

struct WeightVector {
  std::vector<std::size_t> donor_indices;
  Vector beta;
  double objective_value = 0.0;
  bool converged = true;
  int iterations = 0;
  std::vector<double> objective_trace;
};

/// Every group except the target, in panel order.
std::vector<std::size_t> all_donors(const PanelData& panel);

/// Fits donor weights on the pre-intervention periods.
///
/// Objective: sum over fit periods of (target - sum_j beta_j donor_j)^2, plus
/// covariate_scale times the same squared gap on covariates standardized
/// across {target} u donors, plus the configured penalty. Closed form for
/// none/ridge (minimum norm when rank deficient), coordinate descent for
/// elastic net, projected gradient for the simplex.
WeightVector fit(const PanelData& panel, std::span<const std::size_t> donors,
                 const AuxMatrix* aux, const FitConfig& cfg);

/// As `fit`, but on the first `fit_periods` periods regardless of T0.
WeightVector fit_periods(const PanelData& panel,
                         std::span<const std::size_t> donors,
                         const AuxMatrix* aux, const FitConfig& cfg,
                         std::size_t fit_periods);

/// sum_j beta_j * donor_j at every time label in [first_time, last_time].
Vector predict_counterfactual(const WeightVector& weights,
                              const PanelData& panel, int first_time,
                              int last_time);

/// Observed minus synthetic over the post periods; tau is the last one.
EffectEstimate estimate_effect(const WeightVector& weights,
                               const PanelData& panel);

}  // namespace fgsc

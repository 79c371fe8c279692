#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fgsc/panel.hpp"
#include "fgsc/rng.hpp"

namespace fgsc {

/// Probability vector over K cause categories for one group.
class GroupComposition {
 public:
  /// Throws DataError unless entries are >= 0 and sum to 1 within 1e-12.
  explicit GroupComposition(Vector probs);

  const Vector& probs() const { return probs_; }
  double operator[](std::size_t k) const {
    return probs_(static_cast<Eigen::Index>(k));
  }
  std::size_t categories() const { return static_cast<std::size_t>(probs_.size()); }

 private:
  Vector probs_;
};

/// lambda_t[k] = a sin(omega t + phase) + b log(1 + t) + c
struct CategoryCurve {
  double amplitude = 0.0;
  double frequency = 0.0;
  double phase = 0.0;
  double log_slope = 0.0;
  double offset = 0.0;

  double operator()(int t) const;
};

/// Conditional mean table E_t[Y(0) | X = k] plus the individual noise and the
/// treated shift.
struct OutcomeFunctionFamily {
  Matrix conditional_mean;  // row t-1 holds lambda_t (t = 1..T), K columns
  double noise_sd = 1.0;
  double post_intervention_shift = 0.0;
  std::vector<CategoryCurve> curves;  // empty if the table was given directly

  std::size_t periods() const { return static_cast<std::size_t>(conditional_mean.rows()); }
  std::size_t categories() const { return static_cast<std::size_t>(conditional_mean.cols()); }
  /// t is 1-based.
  double mean(std::size_t category, int t) const;

  static OutcomeFunctionFamily from_curves(std::vector<CategoryCurve> curves,
                                           int periods);
};

enum class Aggregation { kMean, kMedian };
enum class CompositionMode { kInvariantSplit, kDirichletMask };

struct SimConfig {
  int K = 12;
  int num_donors = 5;
  int S_cardinality = 5;
  int T = 20;
  int T0 = 15;
  int N_per_group = 2000;
  Aggregation aggregation = Aggregation::kMean;
  CompositionMode composition_mode = CompositionMode::kInvariantSplit;
  std::uint64_t seed = 0;
  double noise_sd = 1.0;
  double post_intervention_shift = 0.0;
  /// Multiplies every curve parameter range except frequency and phase.
  double outcome_scale = 5.0;
  int covariate_count = 10;

  /// Throws UsageError.
  void validate() const;
};

struct SimulatedStudy {
  SimConfig config;
  PanelData panel;                           // target is group 0
  std::vector<GroupComposition> compositions;  // target first, panel order
  OutcomeFunctionFamily functions;
  std::vector<std::size_t> true_S;             // sorted category indices
  AuxMatrix aux_suitable;
  AuxMatrix aux_unsuitable;
};

struct CompositionDraw {
  std::vector<GroupComposition> compositions;
  std::vector<std::size_t> true_S;
};

/// Group compositions for 1 + num_donors groups.
///
/// invariant_split: |S| categories are drawn as true_S; every group gets the
/// same sub-distribution on the remaining categories (mass 0.5) and its own
/// Dirichlet(1,...,1) draw on true_S (mass 0.5). |S| = 0 or K puts all mass
/// in one block. Note |S| = 1 cannot differentiate anything: the lone
/// category's mass is pinned by the shared block, so all groups coincide.
///
/// dirichlet_mask: alpha_k ~ Bernoulli(1 - |S|/K) shared by all groups
/// (redrawn while all zero), P_j ~ Dirichlet(alpha) with zero-alpha
/// categories empty. true_S is the set of categories that actually differ.
CompositionDraw sample_compositions(const SimConfig& cfg, Rng& rng);

/// Per-category curves with a in [0.5,2], omega in [0.1,0.5],
/// phase in [0,2pi], b in [-1,1], c in [-2,2]; a, b and c ranges are
/// multiplied by `scale`.
OutcomeFunctionFamily conditional_mean_default(int K, int T, Rng& rng,
                                               double scale = 1.0);

struct Individuals {
  std::vector<int> categories;
  std::vector<double> outcomes;
};

/// N individuals of one group at period t (1-based). `treated` adds the
/// family's post-intervention shift.
Individuals sample_individuals(const GroupComposition& composition,
                               const OutcomeFunctionFamily& functions, int t,
                               int N, bool treated, Rng& rng);

/// Mean, or median (midpoint of the two middle values for even counts).
double aggregate_outcomes(std::span<const double> outcomes, Aggregation how);

/// Builds the full study from cfg.seed. Each (group, period) cell draws from
/// its own child stream, so cells are independent of evaluation order.
SimulatedStudy simulate_panel(const SimConfig& cfg);

/// One simulation aggregated both ways: identical compositions, functions,
/// individuals and covariates; only the cell summary differs.
struct PairedStudies {
  SimulatedStudy mean;
  SimulatedStudy median;
};
PairedStudies simulate_mean_and_median(const SimConfig& cfg);

/// sum_k lambda_t[k] P(k); t is 1-based.
double expected_outcome(const GroupComposition& composition,
                        const OutcomeFunctionFamily& functions, int t);

/// The study's panel with every cell replaced by its expected control
/// outcome (no sampling noise, no intervention shift).
PanelData expected_control_panel(const SimulatedStudy& study);

enum class CovariateKind { kSuitable, kUnsuitable };

/// suitable:   mean of sin(m * Y) over fresh individuals at a pre-period t*_m
/// unsuitable: mean of code_m(X) for a random relabelling code_m of 1..K
/// m = 1..count, one fresh draw of N_per_group individuals per group.
AuxMatrix generate_covariates(const SimulatedStudy& study, int count,
                              CovariateKind kind, Rng& rng);

}  // namespace fgsc

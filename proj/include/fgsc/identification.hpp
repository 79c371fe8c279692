#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fgsc/finegrained.hpp"

namespace fgsc {

/// Result of extracting the minimal invariant set for a target and a chosen
/// donor set. Category indices are 0-based.
struct InvariantSetReport {
  std::vector<std::size_t> S_indices;
  std::size_t S_cardinality = 0;
  std::size_t donor_count = 0;
  bool a3_holds = false;  // donor_count >= S_cardinality
  bool a4_holds = false;  // every target-supported category has donor mass
  Vector per_category_max_gap;
};

struct OracleWeights {
  std::vector<std::size_t> donor_indices;
  Vector beta;
  double residual_norm = 0.0;
  double tolerance = 0.0;
  bool exists = false;  // residual_norm <= tolerance
};

/// k is in S iff max over {target} u donors of |P_j(k) - P_target(k)| > tol.
InvariantSetReport minimal_invariant_set(
    std::span<const GroupComposition> compositions, std::size_t target,
    std::span<const std::size_t> donors, double tol = 1e-9);

/// Minimum-norm least squares for P_target(s) = sum_j beta_j P_j(s), s in S.
/// Unconstrained in sign. An empty S puts all weight on the first donor.
OracleWeights solve_oracle_weights(std::span<const GroupComposition> compositions,
                                   std::size_t target,
                                   std::span<const std::size_t> donors,
                                   std::span<const std::size_t> S, double tol);

/// True iff the weights reproduce the target's expected control outcome at
/// every period of the family within tol.
bool verify_identification(std::span<const GroupComposition> compositions,
                           const OutcomeFunctionFamily& functions,
                           std::size_t target, const OracleWeights& weights,
                           double tol);

bool verify_identification(const SimulatedStudy& study,
                           const OracleWeights& weights, double tol);

/// Largest |target - weighted donors| over all periods (noiseless).
double max_identification_gap(std::span<const GroupComposition> compositions,
                              const OutcomeFunctionFamily& functions,
                              std::size_t target, const OracleWeights& weights);

}  // namespace fgsc

#include "fgsc/identification.hpp"

#include <algorithm>
#include <cmath>

#include "fgsc/error.hpp"
#include "fgsc/solvers.hpp"

namespace fgsc {

namespace {

void check_indices(std::span<const GroupComposition> compositions,
                   std::size_t target, std::span<const std::size_t> donors) {
  if (target >= compositions.size()) throw UsageError("target index out of range");
  for (auto d : donors) {
    if (d >= compositions.size()) throw UsageError("donor index out of range");
  }
  const auto K = compositions[target].categories();
  for (const auto& c : compositions) {
    if (c.categories() != K) throw UsageError("compositions disagree on K");
  }
}

}  // namespace

InvariantSetReport minimal_invariant_set(
    std::span<const GroupComposition> compositions, std::size_t target,
    std::span<const std::size_t> donors, double tol) {
  if (!(tol > 0.0)) throw UsageError("tolerance must be positive");
  check_indices(compositions, target, donors);
  const auto& p_target = compositions[target].probs();
  const auto K = p_target.size();

  InvariantSetReport report;
  report.donor_count = donors.size();
  report.per_category_max_gap = Vector::Zero(K);
  for (auto d : donors) {
    report.per_category_max_gap = report.per_category_max_gap.cwiseMax(
        (compositions[d].probs() - p_target).cwiseAbs());
  }
  report.a4_holds = true;
  for (Eigen::Index k = 0; k < K; ++k) {
    if (report.per_category_max_gap(k) > tol) {
      report.S_indices.push_back(static_cast<std::size_t>(k));
    }
    if (p_target(k) > tol) {
      const bool covered = std::any_of(donors.begin(), donors.end(), [&](auto d) {
        return compositions[d].probs()(k) > tol;
      });
      report.a4_holds = report.a4_holds && covered;
    }
  }
  report.S_cardinality = report.S_indices.size();
  report.a3_holds = report.donor_count >= report.S_cardinality;
  return report;
}

OracleWeights solve_oracle_weights(std::span<const GroupComposition> compositions,
                                   std::size_t target,
                                   std::span<const std::size_t> donors,
                                   std::span<const std::size_t> S, double tol) {
  check_indices(compositions, target, donors);
  if (donors.empty()) throw UsageError("donor set is empty");
  OracleWeights out;
  out.donor_indices.assign(donors.begin(), donors.end());
  out.tolerance = tol;
  const auto n = static_cast<Eigen::Index>(donors.size());
  if (S.empty()) {
    out.beta = Vector::Zero(n);
    out.beta(0) = 1.0;
    out.residual_norm = 0.0;
    out.exists = true;
    return out;
  }
  LeastSquaresProblem problem;
  const auto rows = static_cast<Eigen::Index>(S.size());
  problem.A.resize(rows, n);
  problem.b.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto s = S[static_cast<std::size_t>(r)];
    problem.b(r) = compositions[target][s];
    for (Eigen::Index i = 0; i < n; ++i) {
      problem.A(r, i) = compositions[donors[static_cast<std::size_t>(i)]][s];
    }
  }
  const auto solved = solve_min_norm(problem);
  out.beta = solved.x;
  out.residual_norm = (problem.A * out.beta - problem.b).norm();
  out.exists = out.residual_norm <= tol;
  return out;
}

double max_identification_gap(std::span<const GroupComposition> compositions,
                              const OutcomeFunctionFamily& functions,
                              std::size_t target, const OracleWeights& weights) {
  double worst = 0.0;
  for (int t = 1; t <= static_cast<int>(functions.periods()); ++t) {
    double synthetic = 0.0;
    for (std::size_t i = 0; i < weights.donor_indices.size(); ++i) {
      synthetic += weights.beta(static_cast<Eigen::Index>(i)) *
                   expected_outcome(compositions[weights.donor_indices[i]], functions, t);
    }
    const double gap =
        std::abs(expected_outcome(compositions[target], functions, t) - synthetic);
    worst = std::max(worst, gap);
  }
  return worst;
}

bool verify_identification(std::span<const GroupComposition> compositions,
                           const OutcomeFunctionFamily& functions,
                           std::size_t target, const OracleWeights& weights,
                           double tol) {
  return max_identification_gap(compositions, functions, target, weights) <= tol;
}

bool verify_identification(const SimulatedStudy& study,
                           const OracleWeights& weights, double tol) {
  return verify_identification(study.compositions, study.functions,
                               study.panel.target_index(), weights, tol);
}

}  // namespace fgsc

#include "fgsc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fgsc/error.hpp"
#include "fgsc/solvers.hpp"

namespace fgsc {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_donors(const PanelData& panel, std::span<const std::size_t> donors) {
  if (donors.empty()) throw UsageError("donor set is empty");
  std::set<std::size_t> seen;
  for (auto d : donors) {
    if (d >= panel.num_groups()) throw UsageError("donor index out of range");
    if (d == panel.target_index()) {
      throw UsageError("target " + panel.target_label() +
                       " cannot be its own donor");
    }
    if (!seen.insert(d).second) {
      throw UsageError("donor " + panel.group_labels()[d] + " listed twice");
    }
  }
}

LeastSquaresProblem build_problem(const PanelData& panel,
                                  std::span<const std::size_t> donors,
                                  const AuxMatrix* aux, const FitConfig& cfg,
                                  std::size_t periods) {
  const auto n = static_cast<Eigen::Index>(donors.size());
  const auto t_fit = static_cast<Eigen::Index>(periods);
  Eigen::Index cov_rows = 0;
  Matrix standardized;
  if (cfg.include_covariates) {
    if (aux == nullptr) {
      throw UsageError("include_covariates is set but no covariates given");
    }
    aux->validate(panel.num_groups());
    // Covariates as rows, {target} u donors as columns (target first).
    Matrix selected(aux->values.cols(), n + 1);
    selected.col(0) =
        aux->values.row(static_cast<Eigen::Index>(panel.target_index()))
            .transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      selected.col(i + 1) =
          aux->values.row(static_cast<Eigen::Index>(donors[i])).transpose();
    }
    standardized = standardize_rows(selected).values;
    cov_rows = standardized.rows();
  }

  LeastSquaresProblem p;
  p.A.resize(t_fit + cov_rows, n);
  p.b.resize(t_fit + cov_rows);
  const auto& y = panel.outcomes();
  const auto target = static_cast<Eigen::Index>(panel.target_index());
  p.b.head(t_fit) = y.row(target).head(t_fit).transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    p.A.col(i).head(t_fit) =
        y.row(static_cast<Eigen::Index>(donors[i])).head(t_fit).transpose();
  }
  if (cov_rows > 0) {
    const double w = std::sqrt(cfg.covariate_scale);
    p.b.tail(cov_rows) = w * standardized.col(0);
    p.A.bottomRows(cov_rows) = w * standardized.rightCols(n);
  }
  return p;
}

}  // namespace

std::string regularizer_name(const Regularizer& r) {
  return std::visit(overloaded{
                        [](const NoRegularizer&) { return std::string("none"); },
                        [](const Ridge&) { return std::string("ridge"); },
                        [](const ElasticNet&) { return std::string("elastic_net"); },
                        [](const SimplexConstraint&) { return std::string("simplex"); },
                    },
                    r);
}

void FitConfig::validate() const {
  if (!(tolerance > 0.0)) throw UsageError("tolerance must be positive");
  if (max_iterations < 1) throw UsageError("max_iterations must be positive");
  if (!(covariate_scale >= 0.0)) {
    throw UsageError("covariate_scale must be nonnegative");
  }
  std::visit(overloaded{
                 [](const NoRegularizer&) {},
                 [](const Ridge& r) {
                   if (!(r.lambda >= 0.0)) throw UsageError("ridge lambda must be >= 0");
                 },
                 [](const ElasticNet& e) {
                   if (!(e.l1 >= 0.0) || !(e.l2 >= 0.0)) {
                     throw UsageError("elastic-net penalties must be >= 0");
                   }
                 },
                 [](const SimplexConstraint&) {},
             },
             regularizer);
}

std::vector<std::size_t> all_donors(const PanelData& panel) {
  std::vector<std::size_t> donors;
  for (std::size_t j = 0; j < panel.num_groups(); ++j) {
    if (j != panel.target_index()) donors.push_back(j);
  }
  return donors;
}

WeightVector fit_periods(const PanelData& panel,
                         std::span<const std::size_t> donors,
                         const AuxMatrix* aux, const FitConfig& cfg,
                         std::size_t periods) {
  cfg.validate();
  check_donors(panel, donors);
  if (periods < 1 || periods > panel.num_periods()) {
    throw UsageError("fit needs between 1 and T periods");
  }
  const auto problem = build_problem(panel, donors, aux, cfg, periods);
  const IterationControl control{cfg.max_iterations, cfg.tolerance};

  SolverResult solved = std::visit(
      overloaded{
          [&](const NoRegularizer&) { return solve_min_norm(problem); },
          [&](const Ridge& r) { return solve_ridge(problem, r.lambda); },
          [&](const ElasticNet& e) {
            return solve_elastic_net(problem, e.l1, e.l2, control);
          },
          [&](const SimplexConstraint&) {
            return solve_simplex(problem, control);
          },
      },
      cfg.regularizer);

  WeightVector out;
  out.donor_indices.assign(donors.begin(), donors.end());
  out.beta = std::move(solved.x);
  out.objective_value = solved.objective;
  out.converged = solved.converged;
  out.iterations = solved.iterations;
  out.objective_trace = std::move(solved.objective_trace);
  return out;
}

WeightVector fit(const PanelData& panel, std::span<const std::size_t> donors,
                 const AuxMatrix* aux, const FitConfig& cfg) {
  return fit_periods(panel, donors, aux, cfg, panel.pre_periods());
}

Vector predict_counterfactual(const WeightVector& weights,
                              const PanelData& panel, int first_time,
                              int last_time) {
  if (first_time > last_time) throw UsageError("empty period range");
  const auto first = panel.period_index(first_time);
  const auto last = panel.period_index(last_time);
  if (static_cast<std::size_t>(weights.beta.size()) !=
      weights.donor_indices.size()) {
    throw UsageError("weight vector length does not match its donor set");
  }
  Vector series = Vector::Zero(static_cast<Eigen::Index>(last - first + 1));
  for (std::size_t i = 0; i < weights.donor_indices.size(); ++i) {
    const auto d = weights.donor_indices[i];
    if (d >= panel.num_groups()) {
      throw UsageError("weights refer to a donor outside this panel");
    }
    series += weights.beta(static_cast<Eigen::Index>(i)) *
              panel.outcomes()
                  .row(static_cast<Eigen::Index>(d))
                  .segment(static_cast<Eigen::Index>(first), series.size())
                  .transpose();
  }
  return series;
}

EffectEstimate estimate_effect(const WeightVector& weights,
                               const PanelData& panel) {
  const auto& times = panel.time_labels();
  const auto t0 = panel.pre_periods();
  const Vector synthetic =
      predict_counterfactual(weights, panel, times[t0], times.back());
  EffectEstimate out;
  for (std::size_t t = t0; t < times.size(); ++t) {
    const double observed = panel.outcome(panel.target_index(), t);
    const double synth = synthetic(static_cast<Eigen::Index>(t - t0));
    out.per_period.push_back({times[t], observed, synth, observed - synth});
  }
  out.tau = out.per_period.back().gap;
  return out;
}

}  // namespace fgsc

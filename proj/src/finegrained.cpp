#include "fgsc/finegrained.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "fgsc/error.hpp"

namespace fgsc {

namespace {

enum StreamTag : std::uint64_t {
  kCompositionStream = 1,
  kFunctionStream = 2,
  kCellStream = 3,
  kSuitableStream = 4,
  kUnsuitableStream = 5,
};

Vector dirichlet_ones(std::size_t n, Rng& rng) {
  std::exponential_distribution<double> gamma1(1.0);
  Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = gamma1(rng);
  return v / v.sum();
}

}  // namespace

GroupComposition::GroupComposition(Vector probs) : probs_(std::move(probs)) {
  if (probs_.size() == 0) throw DataError("composition has no categories");
  if (!probs_.allFinite() || (probs_.array() < 0.0).any()) {
    throw DataError("composition has negative or non-finite entries");
  }
  if (std::abs(probs_.sum() - 1.0) > 1e-12) {
    throw DataError("composition does not sum to one");
  }
}

double CategoryCurve::operator()(int t) const {
  return amplitude * std::sin(frequency * t + phase) +
         log_slope * std::log1p(static_cast<double>(t)) + offset;
}

double OutcomeFunctionFamily::mean(std::size_t category, int t) const {
  return conditional_mean(t - 1, static_cast<Eigen::Index>(category));
}

OutcomeFunctionFamily OutcomeFunctionFamily::from_curves(
    std::vector<CategoryCurve> curves, int periods) {
  OutcomeFunctionFamily f;
  f.conditional_mean.resize(periods, static_cast<Eigen::Index>(curves.size()));
  for (int t = 1; t <= periods; ++t) {
    for (std::size_t k = 0; k < curves.size(); ++k) {
      f.conditional_mean(t - 1, static_cast<Eigen::Index>(k)) = curves[k](t);
    }
  }
  f.curves = std::move(curves);
  return f;
}

void SimConfig::validate() const {
  if (K < 1) throw UsageError("K must be at least 1");
  if (S_cardinality < 0 || S_cardinality > K) {
    throw UsageError("S_cardinality must lie in 0..K (got " +
                     std::to_string(S_cardinality) + ", K=" +
                     std::to_string(K) + ")");
  }
  if (num_donors < 1) throw UsageError("num_donors must be at least 1");
  if (N_per_group < 1) throw UsageError("N_per_group must be at least 1");
  if (T < 2) throw UsageError("T must be at least 2");
  if (T0 < 1 || T0 >= T) throw UsageError("T0 must satisfy 1 <= T0 < T");
  if (!(noise_sd >= 0.0)) throw UsageError("noise_sd must be nonnegative");
  if (!(outcome_scale >= 0.0)) throw UsageError("outcome_scale must be nonnegative");
  if (covariate_count < 0) throw UsageError("covariate_count must be nonnegative");
  if (composition_mode == CompositionMode::kDirichletMask && S_cardinality == K) {
    throw UsageError("dirichlet_mask with |S| = K gives an all-zero alpha");
  }
}

CompositionDraw sample_compositions(const SimConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto K = static_cast<std::size_t>(cfg.K);
  const auto groups = static_cast<std::size_t>(cfg.num_donors) + 1;
  CompositionDraw draw;

  if (cfg.composition_mode == CompositionMode::kInvariantSplit) {
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto s = static_cast<std::size_t>(cfg.S_cardinality);
    std::vector<std::size_t> S(order.begin(), order.begin() + s);
    std::vector<std::size_t> invariant(order.begin() + s, order.end());
    std::sort(S.begin(), S.end());
    std::sort(invariant.begin(), invariant.end());
    const double invariant_mass = S.empty() ? 1.0 : invariant.empty() ? 0.0 : 0.5;

    Vector shared = Vector::Zero(static_cast<Eigen::Index>(K));
    if (!invariant.empty()) {
      const Vector q = dirichlet_ones(invariant.size(), rng);
      for (std::size_t i = 0; i < invariant.size(); ++i) {
        shared(static_cast<Eigen::Index>(invariant[i])) =
            invariant_mass * q(static_cast<Eigen::Index>(i));
      }
    }
    for (std::size_t j = 0; j < groups; ++j) {
      Vector p = shared;
      if (!S.empty()) {
        const Vector d = dirichlet_ones(S.size(), rng);
        for (std::size_t i = 0; i < S.size(); ++i) {
          p(static_cast<Eigen::Index>(S[i])) =
              (1.0 - invariant_mass) * d(static_cast<Eigen::Index>(i));
        }
      }
      draw.compositions.emplace_back(std::move(p));
    }
    draw.true_S = std::move(S);
    return draw;
  }

  // Literal recipe with a shared Bernoulli mask.
  std::bernoulli_distribution keep(1.0 - static_cast<double>(cfg.S_cardinality) /
                                             static_cast<double>(cfg.K));
  std::vector<std::size_t> support;
  while (support.empty()) {
    for (std::size_t k = 0; k < K; ++k) {
      if (keep(rng)) support.push_back(k);
    }
  }
  for (std::size_t j = 0; j < groups; ++j) {
    const Vector d = dirichlet_ones(support.size(), rng);
    Vector p = Vector::Zero(static_cast<Eigen::Index>(K));
    for (std::size_t i = 0; i < support.size(); ++i) {
      p(static_cast<Eigen::Index>(support[i])) = d(static_cast<Eigen::Index>(i));
    }
    draw.compositions.emplace_back(std::move(p));
  }
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 1; j < groups; ++j) {
      if (draw.compositions[j][k] != draw.compositions[0][k]) {
        draw.true_S.push_back(k);
        break;
      }
    }
  }
  return draw;
}

OutcomeFunctionFamily conditional_mean_default(int K, int T, Rng& rng,
                                               double scale) {
  if (K < 1 || T < 1) throw UsageError("K and T must be at least 1");
  std::uniform_real_distribution<double> amplitude(0.5, 2.0);
  std::uniform_real_distribution<double> frequency(0.1, 0.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> slope(-1.0, 1.0);
  std::uniform_real_distribution<double> offset(-2.0, 2.0);
  std::vector<CategoryCurve> curves(static_cast<std::size_t>(K));
  for (auto& c : curves) {
    c.amplitude = scale * amplitude(rng);
    c.frequency = frequency(rng);
    c.phase = phase(rng);
    c.log_slope = scale * slope(rng);
    c.offset = scale * offset(rng);
  }
  return OutcomeFunctionFamily::from_curves(std::move(curves), T);
}

Individuals sample_individuals(const GroupComposition& composition,
                               const OutcomeFunctionFamily& functions, int t,
                               int N, bool treated, Rng& rng) {
  const auto& p = composition.probs();
  std::discrete_distribution<int> category(p.data(), p.data() + p.size());
  std::normal_distribution<double> noise(0.0, 1.0);
  const double shift = treated ? functions.post_intervention_shift : 0.0;
  Individuals out;
  out.categories.resize(static_cast<std::size_t>(N));
  out.outcomes.resize(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    const int x = category(rng);
    double y = functions.mean(static_cast<std::size_t>(x), t) + shift;
    if (functions.noise_sd > 0.0) y += functions.noise_sd * noise(rng);
    out.categories[static_cast<std::size_t>(i)] = x;
    out.outcomes[static_cast<std::size_t>(i)] = y;
  }
  return out;
}

double aggregate_outcomes(std::span<const double> outcomes, Aggregation how) {
  if (outcomes.empty()) throw UsageError("cannot aggregate zero outcomes");
  if (how == Aggregation::kMean) {
    return std::accumulate(outcomes.begin(), outcomes.end(), 0.0) /
           static_cast<double>(outcomes.size());
  }
  std::vector<double> buf(outcomes.begin(), outcomes.end());
  const auto mid = buf.size() / 2;
  std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid), buf.end());
  const double upper = buf[mid];
  if (buf.size() % 2 == 1) return upper;
  const double lower = *std::max_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

namespace {

SimulatedStudy finish_study(const SimConfig& cfg, Matrix outcomes,
                            CompositionDraw draw, OutcomeFunctionFamily functions) {
  std::vector<std::string> labels{"target"};
  for (int d = 1; d <= cfg.num_donors; ++d) labels.push_back("donor_" + std::to_string(d));
  std::vector<int> times(static_cast<std::size_t>(cfg.T));
  std::iota(times.begin(), times.end(), 1);

  SimulatedStudy study{
      cfg,
      PanelData(std::move(outcomes), std::move(labels), std::move(times), 0,
                static_cast<std::size_t>(cfg.T0)),
      std::move(draw.compositions),
      std::move(functions),
      std::move(draw.true_S),
      {},
      {},
  };
  Rng suitable_rng = make_rng(cfg.seed, {kSuitableStream});
  study.aux_suitable =
      generate_covariates(study, cfg.covariate_count, CovariateKind::kSuitable, suitable_rng);
  Rng unsuitable_rng = make_rng(cfg.seed, {kUnsuitableStream});
  study.aux_unsuitable = generate_covariates(study, cfg.covariate_count,
                                             CovariateKind::kUnsuitable, unsuitable_rng);
  return study;
}

// Cell summaries for each requested aggregation from one set of draws.
std::vector<Matrix> simulate_cells(const SimConfig& cfg, const CompositionDraw& draw,
                                   const OutcomeFunctionFamily& functions,
                                   std::span<const Aggregation> aggregations) {
  const auto J = draw.compositions.size();
  std::vector<Matrix> cells(aggregations.size(),
                            Matrix(static_cast<Eigen::Index>(J), cfg.T));
  for (std::size_t j = 0; j < J; ++j) {
    for (int t = 1; t <= cfg.T; ++t) {
      Rng cell = make_rng(cfg.seed, {kCellStream, j, static_cast<std::uint64_t>(t)});
      const bool treated = j == 0 && t > cfg.T0;
      const auto people = sample_individuals(draw.compositions[j], functions, t,
                                             cfg.N_per_group, treated, cell);
      for (std::size_t a = 0; a < aggregations.size(); ++a) {
        cells[a](static_cast<Eigen::Index>(j), t - 1) =
            aggregate_outcomes(people.outcomes, aggregations[a]);
      }
    }
  }
  return cells;
}

std::pair<CompositionDraw, OutcomeFunctionFamily> draw_structure(const SimConfig& cfg) {
  cfg.validate();
  Rng comp_rng = make_rng(cfg.seed, {kCompositionStream});
  auto draw = sample_compositions(cfg, comp_rng);
  Rng fun_rng = make_rng(cfg.seed, {kFunctionStream});
  auto functions = conditional_mean_default(cfg.K, cfg.T, fun_rng, cfg.outcome_scale);
  functions.noise_sd = cfg.noise_sd;
  functions.post_intervention_shift = cfg.post_intervention_shift;
  return {std::move(draw), std::move(functions)};
}

}  // namespace

SimulatedStudy simulate_panel(const SimConfig& cfg) {
  auto [draw, functions] = draw_structure(cfg);
  const Aggregation how[] = {cfg.aggregation};
  auto cells = simulate_cells(cfg, draw, functions, how);
  return finish_study(cfg, std::move(cells[0]), std::move(draw), std::move(functions));
}

PairedStudies simulate_mean_and_median(const SimConfig& cfg) {
  auto [draw, functions] = draw_structure(cfg);
  const Aggregation how[] = {Aggregation::kMean, Aggregation::kMedian};
  auto cells = simulate_cells(cfg, draw, functions, how);
  SimConfig mean_cfg = cfg;
  mean_cfg.aggregation = Aggregation::kMean;
  SimConfig median_cfg = cfg;
  median_cfg.aggregation = Aggregation::kMedian;
  auto mean = finish_study(mean_cfg, std::move(cells[0]), draw, functions);
  auto median = finish_study(median_cfg, std::move(cells[1]), std::move(draw),
                             std::move(functions));
  return {std::move(mean), std::move(median)};
}

double expected_outcome(const GroupComposition& composition,
                        const OutcomeFunctionFamily& functions, int t) {
  if (composition.categories() != functions.categories()) {
    throw UsageError("composition and outcome family disagree on K");
  }
  if (t < 1 || static_cast<std::size_t>(t) > functions.periods()) {
    throw UsageError("period " + std::to_string(t) + " outside the outcome family");
  }
  return functions.conditional_mean.row(t - 1).dot(composition.probs());
}

PanelData expected_control_panel(const SimulatedStudy& study) {
  const auto& panel = study.panel;
  Matrix outcomes(static_cast<Eigen::Index>(panel.num_groups()),
                  static_cast<Eigen::Index>(panel.num_periods()));
  for (std::size_t j = 0; j < panel.num_groups(); ++j) {
    for (std::size_t t = 0; t < panel.num_periods(); ++t) {
      outcomes(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) =
          expected_outcome(study.compositions[j], study.functions,
                           panel.time_labels()[t]);
    }
  }
  return PanelData(std::move(outcomes), panel.group_labels(), panel.time_labels(),
                   panel.target_index(), panel.pre_periods(), panel.populations());
}

AuxMatrix generate_covariates(const SimulatedStudy& study, int count,
                              CovariateKind kind, Rng& rng) {
  const auto J = study.compositions.size();
  const int N = study.config.N_per_group;
  const auto K = static_cast<int>(study.functions.categories());
  std::uniform_int_distribution<int> pre_period(1, static_cast<int>(study.panel.pre_periods()));
  AuxMatrix aux;
  aux.values.resize(static_cast<Eigen::Index>(J), count);
  for (int m = 1; m <= count; ++m) {
    const int t_star = pre_period(rng);
    std::vector<int> code(static_cast<std::size_t>(K));
    std::iota(code.begin(), code.end(), 1);
    if (kind == CovariateKind::kUnsuitable) std::shuffle(code.begin(), code.end(), rng);
    aux.covariate_labels.push_back(
        (kind == CovariateKind::kSuitable ? "suitable_" : "unsuitable_") + std::to_string(m));
    for (std::size_t j = 0; j < J; ++j) {
      const auto people =
          sample_individuals(study.compositions[j], study.functions, t_star, N, false, rng);
      double total = 0.0;
      for (int i = 0; i < N; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        total += kind == CovariateKind::kSuitable
                     ? std::sin(m * people.outcomes[idx])
                     : static_cast<double>(code[static_cast<std::size_t>(people.categories[idx])]);
      }
      aux.values(static_cast<Eigen::Index>(j), m - 1) = total / N;
    }
  }
  return aux;
}

}  // namespace fgsc

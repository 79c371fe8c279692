#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fgsc/error.hpp"
#include "fgsc/evaluation.hpp"
#include "helpers.hpp"

using namespace fgsc;

namespace {

SimConfig small_config(std::uint64_t seed = 1) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.N_per_group = 200;
  return cfg;
}

SweepOptions options(std::size_t reps, unsigned threads = 1) {
  SweepOptions o;
  o.replications = reps;
  o.threads = threads;
  return o;
}

bool same(const SweepResult& a, const SweepResult& b) {
  if (a.knob_values != b.knob_values || a.per_value.size() != b.per_value.size()) return false;
  for (std::size_t i = 0; i < a.per_value.size(); ++i) {
    const auto& x = a.per_value[i];
    const auto& y = b.per_value[i];
    if (x.mean_observed_mse != y.mean_observed_mse ||
        x.mean_counterfactual_mse != y.mean_counterfactual_mse ||
        x.se_observed != y.se_observed || x.se_counterfactual != y.se_counterfactual) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("time split: 20 periods at 0.75 fit on 15, score 5") {
  Rng rng(1);
  const auto p = testing::random_panel(6, 20, 19, rng);
  const auto r = time_split_evaluate(p, all_donors(p), {}, 0.75);
  CHECK(r.fit_periods == 15);
  CHECK(r.eval_periods == 5);
  CHECK(r.observed_mse >= 0.0);
  CHECK(r.counterfactual_mse >= 0.0);
  CHECK_FALSE(r.underdetermined);

  // MSEs from an independent refit on the first 15 periods.
  const auto trimmed = p.with_metadata(0, 15);
  const auto w = fit(trimmed, all_donors(p), nullptr, {});
  const Vector synth = predict_counterfactual(w, p, 1, 20);
  double obs = 0.0, cf = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double g = p.outcome(0, static_cast<std::size_t>(t)) - synth(t);
    (t < 15 ? obs : cf) += g * g;
  }
  CHECK(r.observed_mse == doctest::Approx(obs / 15));
  CHECK(r.counterfactual_mse == doctest::Approx(cf / 5));
}

TEST_CASE("time split rounds the fit count up") {
  Rng rng(2);
  const auto p = testing::random_panel(3, 10, 5, rng);
  CHECK(time_split_evaluate(p, all_donors(p), {}, 0.7).fit_periods == 7);
  CHECK(time_split_evaluate(p, all_donors(p), {}, 0.71).fit_periods == 8);
  CHECK(time_split_evaluate(p, all_donors(p), {}, 0.01).fit_periods == 1);
}

TEST_CASE("degenerate splits are usage errors") {
  Rng rng(3);
  const auto p = testing::random_panel(3, 20, 5, rng);
  const auto donors = all_donors(p);
  CHECK_THROWS_AS(time_split_evaluate(p, donors, {}, 0.0), UsageError);
  CHECK_THROWS_AS(time_split_evaluate(p, donors, {}, 1.0), UsageError);
  CHECK_THROWS_AS(time_split_evaluate(p, donors, {}, 0.99), UsageError);
  CHECK_THROWS_AS(time_split_evaluate(p, donors, {}, -0.5), UsageError);
}

TEST_CASE("perfect synthetic gives zero error on both segments") {
  const auto p = testing::panel_from_rows(
      {{1, 4, 2, 8, 5, 7, 1, 3}, {1, 4, 2, 8, 5, 7, 1, 3}, {2, 0, 3, 1, 6, 2, 2, 9}}, 4);
  const auto r = time_split_evaluate(p, all_donors(p), {}, 0.75);
  CHECK(r.observed_mse <= 1e-24);
  CHECK(r.counterfactual_mse <= 1e-24);
}

TEST_CASE("too few fit periods are flagged as underdetermined") {
  Rng rng(4);
  const auto p = testing::random_panel(6, 6, 5, rng);
  const auto r = time_split_evaluate(p, all_donors(p), {}, 0.75);
  CHECK(r.fit_periods == 5);
  CHECK(r.underdetermined);
}

TEST_CASE("noiseless identified studies have zero counterfactual error") {
  for (int s = 0; s <= 5; ++s) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto cfg = small_config(seed);
      cfg.S_cardinality = s;
      cfg.covariate_count = 0;
      const auto study = simulate_panel(cfg);
      const auto exact = expected_control_panel(study);
      const auto r = time_split_evaluate(exact, all_donors(exact), {}, 0.75);
      CHECK(r.counterfactual_mse <= 1e-10);
      CHECK(r.observed_mse <= 1e-10);
    }
  }
}

TEST_CASE("summarize: means and standard errors") {
  std::vector<SplitEvaluation> runs(4);
  const double obs[] = {1, 2, 3, 6};
  const double cf[] = {2, 2, 2, 2};
  for (int i = 0; i < 4; ++i) {
    runs[static_cast<std::size_t>(i)].observed_mse = obs[i];
    runs[static_cast<std::size_t>(i)].counterfactual_mse = cf[i];
  }
  runs[2].underdetermined = true;
  const auto p = summarize(runs);
  CHECK(p.mean_observed_mse == 3.0);
  CHECK(p.mean_counterfactual_mse == 2.0);
  // sample sd of (1,2,3,6) is sqrt(14/3)
  CHECK(p.se_observed == doctest::Approx(std::sqrt(14.0 / 3.0) / 2.0));
  CHECK(p.se_counterfactual == 0.0);
  CHECK(p.replications == 4);
  CHECK(p.underdetermined == 1);
  CHECK(summarize(std::span(runs).first(1)).se_observed == 0.0);
}

TEST_CASE("sweeps are reproducible and independent of thread count") {
  const std::vector<int> S{2, 6};
  const auto a = sweep_S(small_config(), S, options(6, 1));
  const auto b = sweep_S(small_config(), S, options(6, 1));
  const auto c = sweep_S(small_config(), S, options(6, 3));
  CHECK(same(a, b));
  CHECK(same(a, c));
  CHECK(a.knob == "S");
  CHECK(a.knob_values == std::vector<std::string>{"2", "6"});
  CHECK(a.per_value[0].replications == 6);
  CHECK_FALSE(same(a, sweep_S(small_config(2), S, options(6, 1))));
}

TEST_CASE("standard errors shrink as one over root replications") {
  Rng rng(11);
  std::normal_distribution<double> g(1.0, 0.3);
  std::vector<double> ratios;
  for (int rep = 0; rep < 201; ++rep) {
    std::vector<SplitEvaluation> runs(100);
    for (auto& r : runs) r.observed_mse = g(rng);
    ratios.push_back(summarize(std::span(runs).first(25)).se_observed /
                     summarize(runs).se_observed);
  }
  std::nth_element(ratios.begin(), ratios.begin() + 100, ratios.end());
  CHECK(ratios[100] >= 2.0 * 0.9);
  CHECK(ratios[100] <= 2.0 * 1.1);

  // Sweep MSEs are heavy tailed (large-norm weights), so only the direction
  // is checked there.
  const std::vector<int> S{3};
  int shrank = 0;
  for (std::uint64_t seed = 11; seed < 20; ++seed) {
    const auto few = sweep_S(small_config(seed), S, options(25));
    const auto many = sweep_S(small_config(seed), S, options(100));
    if (many.per_value[0].se_observed < few.per_value[0].se_observed) ++shrank;
  }
  CHECK(shrank >= 7);
}

TEST_CASE("T sweep pairs mean and median on the same studies") {
  const std::vector<int> T{6, 20};
  const auto r = sweep_T_mean_median(small_config(), T, options(4, 2));
  CHECK(r.mean.knob == "T");
  CHECK(r.median.knob_values == std::vector<std::string>{"6", "20"});
  CHECK(r.mean.per_value[0].underdetermined == 4);
  CHECK(r.mean.per_value[1].underdetermined == 0);
  CHECK(r.mean.per_value[1].mean_counterfactual_mse != r.median.per_value[1].mean_counterfactual_mse);
  const auto again = sweep_T_mean_median(small_config(), T, options(4, 1));
  CHECK(same(r.mean, again.mean));
  CHECK(same(r.median, again.median));
}

TEST_CASE("covariate experiment rows") {
  auto cfg = small_config();
  cfg.T = 15;
  cfg.T0 = 12;
  const auto r = covariate_experiment(cfg, options(5));
  CHECK(r.knob == "covariates");
  CHECK(r.knob_values == std::vector<std::string>{"outcome_only", "suitable", "unsuitable"});
  for (const auto& p : r.per_value) CHECK(p.replications == 5);
  CHECK(r.per_value[0].mean_observed_mse != r.per_value[1].mean_observed_mse);
}

TEST_CASE("sweep CSV layout") {
  SweepResult r;
  r.knob = "S";
  r.knob_values = {"2", "3"};
  SweepPoint p;
  p.mean_observed_mse = 0.5;
  p.mean_counterfactual_mse = 0.25;
  p.se_observed = 0.1;
  p.se_counterfactual = 0.2;
  p.replications = 100;
  r.per_value = {p, p};
  std::ostringstream out;
  write_sweep_csv(r, out);
  CHECK(out.str() ==
        "knob,observed_mse,counterfactual_mse,se_observed,se_counterfactual,replications\n"
        "2,0.5,0.25,0.1,0.2,100\n3,0.5,0.25,0.1,0.2,100\n");
}

TEST_CASE("parallel_for visits every index once and propagates errors") {
  for (unsigned threads : {0u, 1u, 4u}) {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw DataError("boom");
                               }),
                  DataError);
}

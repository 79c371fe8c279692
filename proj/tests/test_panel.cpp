#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "doctest.h"
#include "fgsc/error.hpp"
#include "fgsc/panel.hpp"
#include "helpers.hpp"

using namespace fgsc;

namespace {

PanelData read(const std::string& text, const std::string& target, int intervention) {
  std::istringstream in(text);
  return read_panel_csv(in, target, intervention);
}

std::string what_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal grid parses into a 2x3 panel") {
  const auto p = read(
      "group,time,outcome\nCA,1,1.5\nCA,2,2\nCA,3,3\nNV,1,4\nNV,2,5\nNV,3,6\n", "CA", 2);
  CHECK(p.num_groups() == 2);
  CHECK(p.num_periods() == 3);
  CHECK(p.pre_periods() == 2);
  CHECK(p.target_label() == "CA");
  CHECK(p.outcome(1, 2) == 6.0);
  CHECK_FALSE(p.populations().has_value());
}

TEST_CASE("rows may come in any order; times sorted, groups in first-seen order") {
  const auto p = read("group,time,outcome\nB,3,6\nA,2,2\nB,1,4\nA,3,3\nA,1,1\nB,2,5\n", "A", 1);
  CHECK(p.time_labels() == std::vector<int>{1, 2, 3});
  CHECK(p.group_labels() == std::vector<std::string>{"B", "A"});
  CHECK(p.target_index() == 1);
  CHECK(p.outcome(1, 0) == 1.0);
  CHECK(p.outcome(0, 1) == 5.0);
}

TEST_CASE("missing cell names the group and time") {
  const auto msg = what_of([] {
    read("group,time,outcome\nCA,1,1\nCA,2,2\nCA,3,3\nNV,1,4\nNV,3,6\n", "CA", 2);
  });
  CHECK(msg.find("(NV,2)") != std::string::npos);
  CHECK_THROWS_AS(read("group,time,outcome\nCA,1,1\nCA,2,2\nNV,1,4\n", "CA", 1), DataError);
}

TEST_CASE("duplicate cell is a data error") {
  CHECK_THROWS_AS(read("group,time,outcome\nA,1,1\nA,1,2\nA,2,3\nB,1,1\nB,2,2\n", "A", 1),
                  DataError);
}

TEST_CASE("non-numeric outcome reports the line") {
  const auto msg = what_of([] { read("group,time,outcome\nA,1,1\nA,2,abc\n", "A", 1); });
  CHECK(msg.find(":3") != std::string::npos);
  CHECK_THROWS_AS(read("group,time,outcome\nA,1,1\nA,2,abc\n", "A", 1), DataError);
  CHECK_THROWS_AS(read("group,time,outcome\nA,1,1\nA,2,nan\nB,1,1\nB,2,1\n", "A", 1),
                  DataError);
}

TEST_CASE("unknown target is a usage error") {
  CHECK_THROWS_AS(read("group,time,outcome\nA,1,1\nA,2,2\n", "Z", 1), UsageError);
}

TEST_CASE("missing file is a usage error naming the path") {
  const auto msg = what_of([] { from_csv("/nonexistent/panel.csv", "A", 1); });
  CHECK(msg.find("/nonexistent/panel.csv") != std::string::npos);
  CHECK_THROWS_AS(from_csv("/nonexistent/panel.csv", "A", 1), UsageError);
}

TEST_CASE("population column must be positive and constant per group") {
  const auto p = read(
      "group,time,outcome,population\nA,1,1,10\nA,2,2,10\nB,1,3,5\nB,2,4,5\n", "A", 1);
  REQUIRE(p.populations().has_value());
  CHECK((*p.populations())[1] == 5.0);
  CHECK_THROWS_AS(
      read("group,time,outcome,population\nA,1,1,10\nA,2,2,11\nB,1,3,5\nB,2,4,5\n", "A", 1),
      DataError);
  CHECK_THROWS_AS(
      read("group,time,outcome,population\nA,1,1,0\nA,2,2,0\nB,1,3,5\nB,2,4,5\n", "A", 1),
      DataError);
}

TEST_CASE("PanelData enforces its invariants") {
  Matrix m = Matrix::Ones(2, 3);
  CHECK_THROWS_AS(PanelData(m, {"a", "b"}, {1, 2, 3}, 0, 3), UsageError);
  CHECK_THROWS_AS(PanelData(m, {"a", "b"}, {1, 2, 3}, 0, 0), UsageError);
  CHECK_THROWS_AS(PanelData(m, {"a", "a"}, {1, 2, 3}, 0, 1), DataError);
  CHECK_THROWS_AS(PanelData(m, {"a", "b"}, {1, 3, 2}, 0, 1), DataError);
  CHECK_THROWS_AS(PanelData(m, {"a", "b"}, {1, 2, 3}, 2, 1), UsageError);
  Matrix bad = m;
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(PanelData(bad, {"a", "b"}, {1, 2, 3}, 0, 1), DataError);
}

TEST_CASE("split_pre_post covers both segments and shares storage") {
  Rng rng(3);
  const auto p = testing::random_panel(4, 31, 19, rng);
  const auto [pre, post] = split_pre_post(p);
  CHECK(pre.num_periods() == 19);
  CHECK(post.num_periods() == 12);
  CHECK(pre.storage() == post.storage());
  CHECK(pre.storage() == &p.outcomes());
  CHECK(post.outcomes()(2, 0) == p.outcome(2, 19));
  CHECK(post.time_labels().front() == 20);

  const auto tiny = testing::panel_from_rows({{1, 2}, {3, 4}}, 1);
  const auto [a, b] = split_pre_post(tiny);
  CHECK(a.num_periods() == 1);
  CHECK(b.num_periods() == 1);
}

TEST_CASE("Prop-99 shaped file: 40 states over 1970-2000, intervention 1988") {
  std::ostringstream csv;
  csv << "group,time,outcome\n";
  Rng rng(11);
  std::uniform_real_distribution<double> u(40.0, 150.0);
  for (int s = 0; s < 40; ++s) {
    const std::string name = s == 0 ? "California" : "State " + std::to_string(s);
    for (int year = 1970; year <= 2000; ++year) csv << name << ',' << year << ',' << u(rng) << '\n';
  }
  const auto p = read(csv.str(), "California", 1988);
  CHECK(p.num_groups() == 40);
  CHECK(p.num_periods() == 31);
  CHECK(p.pre_periods() == 19);
  CHECK(p.post_periods() == 12);
}

TEST_CASE("CSV round trip is exact") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    auto base = testing::random_panel(5, 7, 4, rng);
    std::vector<double> pops{1.5e6, 2.0, 3.25, 1e-3, 7.0};
    PanelData p(base.outcomes() * 1e3 - Matrix::Constant(5, 7, 123.456), base.group_labels(),
                base.time_labels(), 2, 4, rep % 2 ? std::optional(pops) : std::nullopt);
    std::ostringstream out;
    write_panel_csv(p, out);
    const auto back = read(out.str(), p.target_label(), p.time_labels()[3]);
    CHECK(back.outcomes() == p.outcomes());
    CHECK(back.group_labels() == p.group_labels());
    CHECK(back.time_labels() == p.time_labels());
    CHECK(back.populations() == p.populations());
    std::ostringstream again;
    write_panel_csv(back, again);
    CHECK(again.str() == out.str());
  }
}

TEST_CASE("format_shortest round-trips") {
  Rng rng(8);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, (i % 40) - 20);
    CHECK(std::stod(format_shortest(x)) == x);
  }
  CHECK(format_shortest(0.1) == "0.1");
  CHECK(format_shortest(2.0) == "2");
}

TEST_CASE("two states into one division: population-weighted mean") {
  const auto p = read(
      "group,time,outcome,population\nT,1,50,1\nT,2,50,1\nbig,1,100,10000000\nbig,2,100,"
      "10000000\nsmall,1,120,800000\nsmall,2,120,800000\n",
      "T", 1);
  const GroupMap map{{"T", "T"}, {"big", "div"}, {"small", "div"}};
  const auto agg = aggregate_groups(p, map, population_table(p));
  REQUIRE(agg.num_groups() == 2);
  CHECK(agg.group_labels()[1] == "div");
  const double expected = (10e6 * 100 + 0.8e6 * 120) / 10.8e6;
  CHECK(agg.outcome(1, 0) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(agg.outcome(1, 0) == doctest::Approx(101.481481).epsilon(1e-8));
  CHECK((*agg.populations())[1] == 10.8e6);
}

TEST_CASE("identity grouping leaves outcomes unchanged") {
  Rng rng(21);
  auto base = testing::random_panel(6, 9, 5, rng);
  std::map<std::string, double> pops;
  GroupMap map;
  for (const auto& g : base.group_labels()) {
    map[g] = g;
    pops[g] = 1.0 + static_cast<double>(pops.size());
  }
  const auto agg = aggregate_groups(base, map, pops);
  CHECK((agg.outcomes() - base.outcomes()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(agg.group_labels() == base.group_labels());
}

TEST_CASE("aggregation commutes with averaging over time") {
  Rng rng(22);
  for (int rep = 0; rep < 10; ++rep) {
    auto base = testing::random_panel(7, 12, 6, rng);
    GroupMap map{{"g0", "g0"}};
    std::map<std::string, double> pops{{"g0", 1.0}};
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (std::size_t j = 1; j < 7; ++j) {
      map["g" + std::to_string(j)] = j % 2 ? "odd" : "even";
      pops["g" + std::to_string(j)] = u(rng);
    }
    const auto agg = aggregate_groups(base, map, pops);
    const Vector after = agg.outcomes().rowwise().mean();
    const auto averaged = testing::panel_from_rows(
        [&] {
          std::vector<std::vector<double>> rows;
          const Vector m = base.outcomes().rowwise().mean();
          for (Eigen::Index j = 0; j < m.size(); ++j) rows.push_back({m(j), m(j)});
          return rows;
        }(),
        1);
    const auto before = aggregate_groups(averaged, map, pops);
    for (Eigen::Index j = 0; j < after.size(); ++j) {
      CHECK(after(j) == doctest::Approx(before.outcome(static_cast<std::size_t>(j), 0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("aggregation errors") {
  const auto p = read(
      "group,time,outcome,population\nT,1,1,1\nT,2,1,1\nA,1,2,3\nA,2,2,3\nB,1,3,4\nB,2,3,4\n",
      "T", 1);
  const auto pops = population_table(p);
  CHECK_THROWS_AS(aggregate_groups(p, {{"T", "T"}, {"A", "x"}}, pops), DataError);
  CHECK_THROWS_AS(aggregate_groups(p, {{"T", "T"}, {"A", ""}, {"B", "x"}}, pops), DataError);
  CHECK_THROWS_AS(aggregate_groups(p, {{"T", "x"}, {"A", "x"}, {"B", "x"}}, pops), UsageError);
  auto zero = pops;
  zero["A"] = 0.0;
  CHECK_THROWS_AS(aggregate_groups(p, {{"T", "T"}, {"A", "x"}, {"B", "x"}}, zero), DataError);
  const std::vector<std::string> drop_target{"T"};
  CHECK_THROWS_AS(drop_groups(p, drop_target), UsageError);
  const std::vector<std::string> drop_a{"A"};
  CHECK(drop_groups(p, drop_a).group_labels() == std::vector<std::string>{"T", "B"});
}

TEST_CASE("standardize_rows") {
  Matrix m(3, 3);
  m << 1, 2, 3, 5, 5, 5, -4, 10, 0.5;
  const auto s = standardize_rows(m);
  CHECK(s.values(0, 0) == doctest::Approx(-1.0));
  CHECK(s.values(0, 1) == doctest::Approx(0.0));
  CHECK(s.values(0, 2) == doctest::Approx(1.0));
  CHECK(s.mean(0) == doctest::Approx(2.0));
  CHECK(s.scale(0) == doctest::Approx(1.0));
  CHECK(s.values.row(1).isZero());
  CHECK(s.scale(1) == 1.0);
  CHECK(s.values.row(2).mean() == doctest::Approx(0.0).epsilon(1e-12));
  const double var = s.values.row(2).squaredNorm() / 2.0;
  CHECK(var == doctest::Approx(1.0));

  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix x = testing::random_matrix(4, 6, rng, -50, 50);
    CHECK((destandardize_rows(standardize_rows(x)) - x).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("covariate CSV round trip") {
  AuxMatrix aux;
  aux.values.resize(2, 2);
  aux.values << 0.25, -1.5, 3.0, 1e-9;
  aux.covariate_labels = {"x", "y"};
  const std::vector<std::string> groups{"a", "b"};
  const auto dir = testing::temp_dir("aux");
  {
    std::ofstream out(dir / "aux.csv");
    write_aux_csv(aux, groups, out);
  }
  const auto back = read_aux_csv(dir / "aux.csv", groups);
  CHECK(back.values == aux.values);
  CHECK(back.covariate_labels == aux.covariate_labels);
  const std::vector<std::string> other{"a", "c"};
  CHECK_THROWS_AS(read_aux_csv(dir / "aux.csv", other), DataError);
}

#include "fgsc/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "fgsc/error.hpp"

namespace fgsc {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(first, last - first + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      current.push_back(c);
    } else if (c == ',' && !quoted) {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(trim(current));
  return fields;
}

std::optional<double> parse_double(const std::string& text) {
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::optional<int> parse_int(const std::string& text) {
  int value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (text.empty() || ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open file: " + path.string());
  return in;
}

}  // namespace

std::string format_shortest(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

// -- PanelData ---------------------------------------------------------------

PanelData::PanelData(Matrix outcomes, std::vector<std::string> group_labels,
                     std::vector<int> time_labels, std::size_t target_index,
                     std::size_t pre_periods,
                     std::optional<std::vector<double>> populations)
    : groups_(std::move(group_labels)),
      times_(std::move(time_labels)),
      target_(target_index),
      pre_periods_(pre_periods),
      populations_(std::move(populations)) {
  if (static_cast<std::size_t>(outcomes.rows()) != groups_.size() ||
      static_cast<std::size_t>(outcomes.cols()) != times_.size()) {
    throw DataError("outcome matrix shape does not match labels");
  }
  if (groups_.empty()) throw DataError("panel has no groups");
  if (target_ >= groups_.size()) throw UsageError("target index out of range");
  if (pre_periods_ < 1 || pre_periods_ >= times_.size()) {
    throw UsageError("pre-period count must satisfy 1 <= T0 < T (T0=" +
                     std::to_string(pre_periods_) +
                     ", T=" + std::to_string(times_.size()) + ")");
  }
  std::set<std::string> seen;
  for (const auto& g : groups_) {
    if (!seen.insert(g).second) throw DataError("duplicate group label: " + g);
  }
  for (std::size_t t = 1; t < times_.size(); ++t) {
    if (times_[t] <= times_[t - 1]) {
      throw DataError("time labels must be strictly increasing");
    }
  }
  for (Eigen::Index j = 0; j < outcomes.rows(); ++j) {
    for (Eigen::Index t = 0; t < outcomes.cols(); ++t) {
      if (!std::isfinite(outcomes(j, t))) {
        throw DataError("non-finite outcome for (" + groups_[j] + "," +
                        std::to_string(times_[t]) + ")");
      }
    }
  }
  if (populations_ && populations_->size() != groups_.size()) {
    throw DataError("population table size does not match group count");
  }
  outcomes_ = std::make_shared<const Matrix>(std::move(outcomes));
}

std::size_t PanelData::group_index(const std::string& label) const {
  auto it = std::find(groups_.begin(), groups_.end(), label);
  if (it == groups_.end()) throw UsageError("unknown group label: " + label);
  return static_cast<std::size_t>(it - groups_.begin());
}

std::size_t PanelData::period_index(int time_label) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), time_label);
  if (it == times_.end() || *it != time_label) {
    throw UsageError("time " + std::to_string(time_label) +
                     " is outside the panel");
  }
  return static_cast<std::size_t>(it - times_.begin());
}

PanelData PanelData::with_metadata(std::size_t target_index,
                                   std::size_t pre_periods) const {
  return PanelData(*outcomes_, groups_, times_, target_index, pre_periods,
                   populations_);
}

PanelView::PanelView(std::shared_ptr<const Matrix> outcomes,
                     std::span<const int> times, std::size_t first_period,
                     std::size_t count)
    : outcomes_(std::move(outcomes)),
      times_(times.subspan(first_period, count)),
      first_(first_period),
      count_(count) {}

std::pair<PanelView, PanelView> split_pre_post(const PanelData& panel) {
  const auto t0 = panel.pre_periods();
  std::span<const int> times(panel.time_labels());
  return {PanelView(panel.shared_outcomes(), times, 0, t0),
          PanelView(panel.shared_outcomes(), times, t0, panel.post_periods())};
}

void AuxMatrix::validate(std::size_t num_groups) const {
  if (static_cast<std::size_t>(values.rows()) != num_groups) {
    throw DataError("covariate matrix has " + std::to_string(values.rows()) +
                    " rows, panel has " + std::to_string(num_groups) +
                    " groups");
  }
  if (static_cast<std::size_t>(values.cols()) != covariate_labels.size()) {
    throw DataError("covariate labels do not match covariate columns");
  }
  if (!values.allFinite()) throw DataError("non-finite covariate value");
}

// -- CSV ---------------------------------------------------------------------

PanelData read_panel_csv(std::istream& in, const std::string& target,
                         int intervention_time, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file");
  const auto header = split_csv_line(line);
  const bool has_population = header.size() == 4;
  if (header.size() < 3 || header.size() > 4 || header[0] != "group" ||
      header[1] != "time" || header[2] != "outcome" ||
      (has_population && header[3] != "population")) {
    throw DataError(source +
                    ": header must be group,time,outcome[,population]");
  }

  std::vector<std::string> groups;
  std::unordered_map<std::string, std::size_t> group_ids;
  std::set<int> time_set;
  struct Cell {
    std::size_t group;
    int time;
    double outcome;
    std::size_t line;
  };
  std::vector<Cell> cells;
  std::vector<std::optional<double>> populations;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError(source + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields");
    }
    if (fields[0].empty()) {
      throw DataError(source + ":" + std::to_string(line_no) +
                      ": empty group label");
    }
    const auto time = parse_int(fields[1]);
    if (!time) {
      throw DataError(source + ":" + std::to_string(line_no) +
                      ": time is not an integer: '" + fields[1] + "'");
    }
    const auto outcome = parse_double(fields[2]);
    if (!outcome || !std::isfinite(*outcome)) {
      throw DataError(source + ":" + std::to_string(line_no) +
                      ": outcome is not numeric: '" + fields[2] + "'");
    }
    auto [it, inserted] = group_ids.try_emplace(fields[0], groups.size());
    if (inserted) {
      groups.push_back(fields[0]);
      populations.emplace_back();
    }
    if (has_population) {
      const auto pop = parse_double(fields[3]);
      if (!pop || !(*pop > 0.0) || !std::isfinite(*pop)) {
        throw DataError(source + ":" + std::to_string(line_no) +
                        ": population must be a positive number");
      }
      auto& slot = populations[it->second];
      if (slot && *slot != *pop) {
        throw DataError(source + ":" + std::to_string(line_no) +
                        ": population of " + fields[0] +
                        " differs between rows");
      }
      slot = *pop;
    }
    time_set.insert(*time);
    cells.push_back({it->second, *time, *outcome, line_no});
  }
  if (groups.empty()) throw DataError(source + ": no data rows");

  const std::vector<int> times(time_set.begin(), time_set.end());
  std::unordered_map<int, std::size_t> time_ids;
  for (std::size_t t = 0; t < times.size(); ++t) time_ids[times[t]] = t;

  const auto J = static_cast<Eigen::Index>(groups.size());
  const auto T = static_cast<Eigen::Index>(times.size());
  Matrix outcomes = Matrix::Constant(J, T, std::nan(""));
  for (const auto& c : cells) {
    auto& slot = outcomes(static_cast<Eigen::Index>(c.group),
                          static_cast<Eigen::Index>(time_ids[c.time]));
    if (!std::isnan(slot)) {
      throw DataError(source + ":" + std::to_string(c.line) +
                      ": duplicate cell (" + groups[c.group] + "," +
                      std::to_string(c.time) + ")");
    }
    slot = c.outcome;
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    for (Eigen::Index t = 0; t < T; ++t) {
      if (std::isnan(outcomes(j, t))) {
        throw DataError(source + ": missing cell (" + groups[j] + "," +
                        std::to_string(times[t]) + ")");
      }
    }
  }

  auto target_it = group_ids.find(target);
  if (target_it == group_ids.end()) {
    throw UsageError("unknown target group: " + target);
  }
  const auto pre = static_cast<std::size_t>(
      std::upper_bound(times.begin(), times.end(), intervention_time) -
      times.begin());

  std::optional<std::vector<double>> pop_table;
  if (has_population) {
    pop_table.emplace();
    for (const auto& p : populations) pop_table->push_back(*p);
  }
  return PanelData(std::move(outcomes), std::move(groups), times,
                   target_it->second, pre, std::move(pop_table));
}

PanelData from_csv(const std::filesystem::path& path, const std::string& target,
                   int intervention_time) {
  auto in = open_input(path);
  return read_panel_csv(in, target, intervention_time, path.string());
}

void write_panel_csv(const PanelData& panel, std::ostream& out) {
  const bool with_pop = panel.populations().has_value();
  out << "group,time,outcome" << (with_pop ? ",population" : "") << '\n';
  for (std::size_t t = 0; t < panel.num_periods(); ++t) {
    for (std::size_t j = 0; j < panel.num_groups(); ++j) {
      out << panel.group_labels()[j] << ',' << panel.time_labels()[t] << ','
          << format_shortest(panel.outcome(j, t));
      if (with_pop) out << ',' << format_shortest((*panel.populations())[j]);
      out << '\n';
    }
  }
}

void to_csv(const PanelData& panel, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write file: " + path.string());
  write_panel_csv(panel, out);
}

void write_aux_csv(const AuxMatrix& aux, std::span<const std::string> groups,
                   std::ostream& out) {
  out << "group";
  for (const auto& label : aux.covariate_labels) out << ',' << label;
  out << '\n';
  for (Eigen::Index j = 0; j < aux.values.rows(); ++j) {
    out << groups[static_cast<std::size_t>(j)];
    for (Eigen::Index k = 0; k < aux.values.cols(); ++k) {
      out << ',' << format_shortest(aux.values(j, k));
    }
    out << '\n';
  }
}

AuxMatrix read_aux_csv(const std::filesystem::path& path,
                       std::span<const std::string> groups) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "group") {
    throw DataError(path.string() + ": header must be group,<covariates...>");
  }
  AuxMatrix aux;
  aux.covariate_labels.assign(header.begin() + 1, header.end());
  const auto K = static_cast<Eigen::Index>(aux.covariate_labels.size());
  aux.values = Matrix::Constant(static_cast<Eigen::Index>(groups.size()), K,
                                std::nan(""));
  std::vector<bool> filled(groups.size(), false);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": wrong field count");
    }
    auto it = std::find(groups.begin(), groups.end(), fields[0]);
    if (it == groups.end()) continue;  // covariates for groups not in panel
    const auto j = static_cast<std::size_t>(it - groups.begin());
    if (filled[j]) {
      throw DataError(path.string() + ": duplicate covariate row for " +
                      fields[0]);
    }
    filled[j] = true;
    for (Eigen::Index k = 0; k < K; ++k) {
      auto v = parse_double(fields[static_cast<std::size_t>(k) + 1]);
      if (!v || !std::isfinite(*v)) {
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": covariate is not numeric");
      }
      aux.values(static_cast<Eigen::Index>(j), k) = *v;
    }
  }
  for (std::size_t j = 0; j < groups.size(); ++j) {
    if (!filled[j]) {
      throw DataError(path.string() + ": missing covariates for " + groups[j]);
    }
  }
  aux.validate(groups.size());
  return aux;
}

// -- Aggregation -------------------------------------------------------------

std::map<std::string, double> population_table(const PanelData& panel) {
  if (!panel.populations()) {
    throw DataError("panel has no population column");
  }
  std::map<std::string, double> table;
  for (std::size_t j = 0; j < panel.num_groups(); ++j) {
    table[panel.group_labels()[j]] = (*panel.populations())[j];
  }
  return table;
}

PanelData aggregate_groups(const PanelData& panel, const GroupMap& grouping,
                           const std::map<std::string, double>& populations) {
  const auto& labels = panel.group_labels();
  std::vector<std::string> supers;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    auto it = grouping.find(labels[j]);
    if (it == grouping.end()) {
      throw DataError("group " + labels[j] + " is missing from the grouping");
    }
    if (it->second.empty()) {
      throw DataError("group " + labels[j] + " maps to an empty super-group");
    }
    auto pos = std::find(supers.begin(), supers.end(), it->second);
    if (pos == supers.end()) {
      supers.push_back(it->second);
      members.emplace_back();
      pos = supers.end() - 1;
    }
    members[static_cast<std::size_t>(pos - supers.begin())].push_back(j);
  }
  // Super-groups named in the grouping without any member in this panel.
  for (const auto& [group, super] : grouping) {
    if (std::find(supers.begin(), supers.end(), super) == supers.end()) {
      throw DataError("super-group " + super + " has no members in the panel");
    }
  }

  const auto T = static_cast<Eigen::Index>(panel.num_periods());
  Matrix out(static_cast<Eigen::Index>(supers.size()), T);
  std::vector<double> totals;
  std::size_t target_super = 0;
  for (std::size_t s = 0; s < supers.size(); ++s) {
    double total = 0.0;
    Eigen::RowVectorXd weighted = Eigen::RowVectorXd::Zero(T);
    for (auto j : members[s]) {
      auto pop_it = populations.find(labels[j]);
      if (pop_it == populations.end()) {
        throw DataError("no population for group " + labels[j]);
      }
      if (!(pop_it->second > 0.0) || !std::isfinite(pop_it->second)) {
        throw DataError("population of " + labels[j] + " must be positive");
      }
      total += pop_it->second;
      weighted += pop_it->second *
                  panel.outcomes().row(static_cast<Eigen::Index>(j));
      if (j == panel.target_index()) target_super = s;
    }
    if (!(total > 0.0)) {
      throw DataError("super-group " + supers[s] + " has zero population");
    }
    out.row(static_cast<Eigen::Index>(s)) = weighted / total;
    totals.push_back(total);
  }
  if (members[target_super].size() != 1) {
    throw UsageError("target " + panel.target_label() +
                     " must be mapped to a super-group of its own");
  }
  supers[target_super] = panel.target_label();
  if (std::count(supers.begin(), supers.end(), panel.target_label()) > 1) {
    throw DataError("super-group label collides with target label");
  }
  return PanelData(std::move(out), std::move(supers), panel.time_labels(),
                   target_super, panel.pre_periods(), std::move(totals));
}

PanelData drop_groups(const PanelData& panel,
                      std::span<const std::string> labels) {
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < panel.num_groups(); ++j) {
    const auto& g = panel.group_labels()[j];
    if (std::find(labels.begin(), labels.end(), g) == labels.end()) {
      keep.push_back(j);
    } else if (j == panel.target_index()) {
      throw UsageError("cannot drop the target group " + g);
    }
  }
  Matrix out(static_cast<Eigen::Index>(keep.size()),
             static_cast<Eigen::Index>(panel.num_periods()));
  std::vector<std::string> groups;
  std::optional<std::vector<double>> pops;
  if (panel.populations()) pops.emplace();
  std::size_t target = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        panel.outcomes().row(static_cast<Eigen::Index>(keep[i]));
    groups.push_back(panel.group_labels()[keep[i]]);
    if (pops) pops->push_back((*panel.populations())[keep[i]]);
    if (keep[i] == panel.target_index()) target = i;
  }
  return PanelData(std::move(out), std::move(groups), panel.time_labels(),
                   target, panel.pre_periods(), std::move(pops));
}

// -- Standardization ---------------------------------------------------------

StandardizedRows standardize_rows(const Matrix& matrix) {
  StandardizedRows out;
  out.values = Matrix::Zero(matrix.rows(), matrix.cols());
  out.mean = Vector::Zero(matrix.rows());
  out.scale = Vector::Ones(matrix.rows());
  const auto n = matrix.cols();
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    const double mean = n > 0 ? matrix.row(r).mean() : 0.0;
    out.mean(r) = mean;
    if (n < 2) continue;
    const double ss = (matrix.row(r).array() - mean).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const bool constant = (matrix.row(r).array() == matrix(r, 0)).all();
    if (constant || !(sd > 0.0)) continue;
    out.scale(r) = sd;
    out.values.row(r) = (matrix.row(r).array() - mean) / sd;
  }
  return out;
}

Matrix destandardize_rows(const StandardizedRows& s) {
  Matrix out = s.values;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    out.row(r) = out.row(r).array() * s.scale(r) + s.mean(r);
  }
  return out;
}

}  // namespace fgsc

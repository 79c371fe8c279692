#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace fgsc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Group-level panel of observed outcomes: one row per group, one column per
/// period. Immutable after construction; copies share the outcome storage.
///
/// `pre_periods` is T0, the number of leading periods before the
/// intervention. The panel always has at least one post period.
class PanelData {
 public:
  PanelData(Matrix outcomes, std::vector<std::string> group_labels,
            std::vector<int> time_labels, std::size_t target_index,
            std::size_t pre_periods,
            std::optional<std::vector<double>> populations = std::nullopt);

  const Matrix& outcomes() const { return *outcomes_; }
  double outcome(std::size_t group, std::size_t period) const {
    return (*outcomes_)(static_cast<Eigen::Index>(group),
                        static_cast<Eigen::Index>(period));
  }
  const std::vector<std::string>& group_labels() const { return groups_; }
  const std::vector<int>& time_labels() const { return times_; }
  std::size_t target_index() const { return target_; }
  const std::string& target_label() const { return groups_[target_]; }
  std::size_t pre_periods() const { return pre_periods_; }
  std::size_t post_periods() const { return num_periods() - pre_periods_; }
  std::size_t num_groups() const { return groups_.size(); }
  std::size_t num_periods() const { return times_.size(); }
  const std::optional<std::vector<double>>& populations() const {
    return populations_;
  }

  /// Throws UsageError if the label is not a group of this panel.
  std::size_t group_index(const std::string& label) const;
  /// Throws UsageError if the time label is not in the panel.
  std::size_t period_index(int time_label) const;

  /// Same data, different target / intervention metadata.
  PanelData with_metadata(std::size_t target_index,
                          std::size_t pre_periods) const;

  std::shared_ptr<const Matrix> shared_outcomes() const { return outcomes_; }

 private:
  std::shared_ptr<const Matrix> outcomes_;
  std::vector<std::string> groups_;
  std::vector<int> times_;
  std::size_t target_;
  std::size_t pre_periods_;
  std::optional<std::vector<double>> populations_;
};

/// Contiguous range of periods over a panel's outcome storage. Holds a
/// shared reference, so it stays valid if the panel goes away.
class PanelView {
 public:
  PanelView(std::shared_ptr<const Matrix> outcomes, std::span<const int> times,
            std::size_t first_period, std::size_t count);

  auto outcomes() const {
    return outcomes_->middleCols(static_cast<Eigen::Index>(first_),
                                 static_cast<Eigen::Index>(count_));
  }
  std::size_t first_period() const { return first_; }
  std::size_t num_periods() const { return count_; }
  std::span<const int> time_labels() const { return times_; }
  const Matrix* storage() const { return outcomes_.get(); }

 private:
  std::shared_ptr<const Matrix> outcomes_;
  std::span<const int> times_;
  std::size_t first_;
  std::size_t count_;
};

/// (t <= T0, t > T0).
std::pair<PanelView, PanelView> split_pre_post(const PanelData& panel);

/// Group-by-covariate matrix of auxiliary covariates.
struct AuxMatrix {
  Matrix values;  // rows: groups (panel order), cols: covariates
  std::vector<std::string> covariate_labels;

  /// Checks row count and finiteness; throws DataError.
  void validate(std::size_t num_groups) const;
};

struct PeriodEffect {
  int time;
  double observed;
  double synthetic;
  double gap;
};

struct EffectEstimate {
  double tau = 0.0;  // gap at the final period
  std::vector<PeriodEffect> per_period;
};

// -- CSV ---------------------------------------------------------------------

/// Reads a long-format panel `group,time,outcome[,population]`.
/// `intervention_time` is the time label of the last pre-intervention period;
/// T0 becomes the number of time labels <= it.
PanelData from_csv(const std::filesystem::path& path, const std::string& target,
                   int intervention_time);
PanelData read_panel_csv(std::istream& in, const std::string& target,
                         int intervention_time,
                         const std::string& source_name = "<stream>");

/// Writes long format sorted by time, then by panel group order.
void write_panel_csv(const PanelData& panel, std::ostream& out);
void to_csv(const PanelData& panel, const std::filesystem::path& path);

/// Shortest representation that parses back to the same double.
std::string format_shortest(double value);

/// Wide covariate CSV: `group,<label1>,<label2>,...`, one row per group in
/// panel order.
void write_aux_csv(const AuxMatrix& aux, std::span<const std::string> groups,
                   std::ostream& out);
AuxMatrix read_aux_csv(const std::filesystem::path& path,
                       std::span<const std::string> groups);

// -- Aggregation -------------------------------------------------------------

/// group label -> super-group label.
using GroupMap = std::map<std::string, std::string>;

/// Population-weighted means of groups into super-groups. Super-groups keep
/// the order in which their first member appears in the panel. The target
/// must be mapped to a super-group of its own; it keeps its label.
PanelData aggregate_groups(const PanelData& panel, const GroupMap& grouping,
                           const std::map<std::string, double>& populations);

/// Removes the listed groups. The target cannot be dropped.
PanelData drop_groups(const PanelData& panel,
                      std::span<const std::string> labels);

/// Mapping from the panel's population side table.
std::map<std::string, double> population_table(const PanelData& panel);

// -- Standardization ---------------------------------------------------------

struct StandardizedRows {
  Matrix values;
  Vector mean;
  Vector scale;  // sample sd; 1 for constant rows
};

StandardizedRows standardize_rows(const Matrix& matrix);
Matrix destandardize_rows(const StandardizedRows& standardized);

}  // namespace fgsc

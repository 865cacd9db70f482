#pragma once

// Longitudinal school-level data: units x calendar years, outcomes and
// covariates with explicit missing cells.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace synthctl {

using Year = int;
using AttributeValue = std::variant<std::string, double, bool>;

inline const std::string kIncomeCovariate = "postcode-mean-income";

struct UnitRecord {
  std::string id;
  std::string name;
  std::map<std::string, AttributeValue> attributes;

  const AttributeValue* attribute(const std::string& key) const;
  std::optional<double> number(const std::string& key) const;
};

/// Dense unit x period matrix whose cells may be explicitly missing.
class CellMatrix {
 public:
  CellMatrix() = default;
  CellMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, 0.0), present_(rows * cols, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::optional<double> at(std::size_t r, std::size_t c) const {
    std::size_t k = r * cols_ + c;
    if (!present_[k]) return std::nullopt;
    return values_[k];
  }
  bool has(std::size_t r, std::size_t c) const { return present_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, double v) {
    values_[r * cols_ + c] = v;
    present_[r * cols_ + c] = 1;
  }
  void clear(std::size_t r, std::size_t c) { present_[r * cols_ + c] = 0; }

  CellMatrix without_column(std::size_t col) const;

  friend bool operator==(const CellMatrix&, const CellMatrix&);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::vector<unsigned char> present_;
};

enum class CovariateKind { Fixed, TimeVarying };

struct CovariateSeries {
  CovariateKind kind = CovariateKind::Fixed;
  std::vector<std::optional<double>> fixed;  // one per unit
  CellMatrix varying;                        // unit x period

  static CovariateSeries make_fixed(std::vector<std::optional<double>> values);
  static CovariateSeries make_varying(CellMatrix values);
};

/// Inclusive calendar-year range.
struct YearRange {
  Year first = 0;
  Year last = 0;
};

/// Immutable validated panel. Periods are strictly increasing calendar
/// years; gaps (a dropped year) are allowed.
class PanelDataset {
 public:
  PanelDataset() = default;
  PanelDataset(std::vector<UnitRecord> units, std::vector<Year> periods,
               std::map<std::string, CellMatrix> outcomes,
               std::map<std::string, CovariateSeries> covariates);

  const std::vector<UnitRecord>& units() const noexcept { return units_; }
  const std::vector<Year>& periods() const noexcept { return periods_; }
  const std::map<std::string, CellMatrix>& outcomes() const noexcept { return outcomes_; }
  const std::map<std::string, CovariateSeries>& covariates() const noexcept { return covariates_; }

  std::size_t unit_count() const noexcept { return units_.size(); }
  std::size_t period_count() const noexcept { return periods_.size(); }

  std::optional<std::size_t> find_unit(const std::string& id) const;
  std::size_t unit_index(const std::string& id) const;  // throws UnknownUnit
  std::optional<std::size_t> period_index(Year year) const;

  const CellMatrix& outcome(const std::string& key) const;          // throws UnknownOutcome
  const CovariateSeries& covariate(const std::string& key) const;   // throws UnknownCovariate
  bool has_outcome(const std::string& key) const { return outcomes_.count(key) != 0; }
  bool has_covariate(const std::string& key) const { return covariates_.count(key) != 0; }

  /// Copy with one extra covariate. Replaces an existing key.
  PanelDataset with_covariate(const std::string& key, CovariateSeries series) const;

 private:
  std::vector<UnitRecord> units_;
  std::vector<Year> periods_;
  std::map<std::string, CellMatrix> outcomes_;
  std::map<std::string, CovariateSeries> covariates_;
  std::unordered_map<std::string, std::size_t> unit_lookup_;
};

struct IngestConfig {
  std::optional<std::filesystem::path> attributes_file;
  std::vector<std::string> outcome_keys{"reading_y3", "reading_y5", "numeracy_y3", "numeracy_y5"};
  std::set<Year> exclude_years;
  // Attribute columns kept as text even when every value parses as a number.
  std::set<std::string> text_attributes{"postcode"};
};

struct IncomeRow {
  std::string postcode;
  Year year = 0;
  double mean_taxable_income = 0.0;
};

class IncomeTable {
 public:
  IncomeTable() = default;
  explicit IncomeTable(std::vector<IncomeRow> rows);  // throws DuplicateObservation

  const std::vector<IncomeRow>& rows() const noexcept { return rows_; }
  std::optional<double> lookup(const std::string& postcode, Year year) const;

 private:
  std::vector<IncomeRow> rows_;
  std::map<std::pair<std::string, Year>, double> index_;
};

PanelDataset load_panel(const std::filesystem::path& schools_file, const IngestConfig& config = {});
IncomeTable load_income(const std::filesystem::path& income_file);

void write_panel(const PanelDataset& panel, const std::filesystem::path& schools_file,
                 const std::optional<std::filesystem::path>& attributes_file = std::nullopt);
void write_income(const IncomeTable& income, const std::filesystem::path& income_file);

/// Adds the time-varying covariate "postcode-mean-income". Units whose
/// (postcode, year) is absent from the table get a missing cell.
PanelDataset join_income(const PanelDataset& panel, const IncomeTable& income);

/// Removes a calendar year from the index. Absent year: returns the panel
/// unchanged. Removing the only period throws EmptyPanel.
PanelDataset drop_period(const PanelDataset& panel, Year year);

/// Per-unit value of a covariate over a window: Fixed values as-is,
/// time-varying values averaged over the non-missing cells in the window.
std::vector<double> collapse_covariate(const PanelDataset& panel, const std::string& key,
                                       YearRange window);
/// Same, restricted to the given unit rows (in that order).
std::vector<double> collapse_covariate(const PanelDataset& panel, const std::string& key,
                                       YearRange window, std::span<const std::size_t> rows);

/// Mean of an outcome per unit over the index years inside the window.
std::vector<double> collapse_outcome(const PanelDataset& panel, const std::string& key,
                                     YearRange window);
std::vector<double> collapse_outcome(const PanelDataset& panel, const std::string& key,
                                     YearRange window, std::span<const std::size_t> rows);

}  // namespace synthctl

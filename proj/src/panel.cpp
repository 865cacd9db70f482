#include "synthctl/panel.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <span>

#include "synthctl/csv.hpp"
#include "synthctl/error.hpp"

namespace synthctl {

namespace {

std::vector<std::size_t> window_columns(const PanelDataset& panel, YearRange window) {
  if (window.first > window.last) {
    throw Error(ErrorCode::InvalidWindow, "window " + std::to_string(window.first) + "-" +
                                              std::to_string(window.last) + " is empty");
  }
  std::vector<std::size_t> cols;
  const auto& periods = panel.periods();
  for (std::size_t c = 0; c < periods.size(); ++c) {
    if (periods[c] >= window.first && periods[c] <= window.last) cols.push_back(c);
  }
  if (cols.empty()) {
    throw Error(ErrorCode::InvalidWindow, "window " + std::to_string(window.first) + "-" +
                                              std::to_string(window.last) +
                                              " contains no index period");
  }
  return cols;
}

std::vector<std::size_t> all_rows(const PanelDataset& panel) {
  std::vector<std::size_t> rows(panel.unit_count());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

void throw_all_missing(const PanelDataset& panel, const std::string& key,
                       const std::vector<std::size_t>& empty_rows) {
  std::string msg = "'" + key + "' has no non-missing value in the window for unit(s):";
  for (auto r : empty_rows) msg += " " + panel.units()[r].id;
  throw Error(ErrorCode::AllMissing, msg);
}

std::vector<double> mean_over(const PanelDataset& panel, const CellMatrix& m,
                              const std::vector<std::size_t>& cols, const std::string& key,
                              std::span<const std::size_t> rows) {
  std::vector<double> out(rows.size());
  std::vector<std::size_t> empty_rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double sum = 0.0;
    std::size_t n = 0;
    for (auto c : cols) {
      if (auto v = m.at(rows[i], c)) {
        sum += *v;
        ++n;
      }
    }
    if (n == 0) {
      empty_rows.push_back(rows[i]);
      continue;
    }
    out[i] = sum / static_cast<double>(n);
  }
  if (!empty_rows.empty()) throw_all_missing(panel, key, empty_rows);
  return out;
}

bool parse_year(std::string_view s, Year& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::string where(const std::filesystem::path& file, std::size_t line) {
  return file.filename().string() + ":" + std::to_string(line);
}

void require_header(const std::vector<csv::Record>& records, const std::filesystem::path& file,
                    const std::vector<std::string>& leading) {
  if (records.empty()) throw Error(ErrorCode::SchemaMismatch, file.string() + ": missing header");
  const auto& h = records.front().fields;
  for (std::size_t i = 0; i < leading.size(); ++i) {
    if (i >= h.size() || h[i] != leading[i]) {
      throw Error(ErrorCode::SchemaMismatch,
                  file.string() + ": header column " + std::to_string(i + 1) + " must be '" +
                      leading[i] + "'");
    }
  }
  std::set<std::string> seen;
  for (const auto& col : h) {
    if (!seen.insert(col).second) {
      throw Error(ErrorCode::SchemaMismatch, file.string() + ": duplicate column '" + col + "'");
    }
  }
}

void check_width(const csv::Record& rec, std::size_t width, const std::filesystem::path& file) {
  if (rec.fields.size() != width) {
    throw Error(ErrorCode::MalformedRow, where(file, rec.line) + ": expected " +
                                             std::to_string(width) + " fields, found " +
                                             std::to_string(rec.fields.size()));
  }
}

struct AttributeColumn {
  std::string key;
  enum class Type { Text, Number, Boolean } type = Type::Text;
};

std::string attribute_text(const AttributeValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return csv::format_number(std::get<double>(v));
}

}  // namespace

const AttributeValue* UnitRecord::attribute(const std::string& key) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? nullptr : &it->second;
}

std::optional<double> UnitRecord::number(const std::string& key) const {
  const auto* v = attribute(key);
  if (!v) return std::nullopt;
  if (const auto* d = std::get_if<double>(v)) return *d;
  return std::nullopt;
}

CellMatrix CellMatrix::without_column(std::size_t col) const {
  CellMatrix out(rows_, cols_ - 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    std::size_t k = 0;
    for (std::size_t c = 0; c < cols_; ++c) {
      if (c == col) continue;
      if (auto v = at(r, c)) out.set(r, k, *v);
      ++k;
    }
  }
  return out;
}

bool operator==(const CellMatrix& a, const CellMatrix& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_) return false;
  for (std::size_t k = 0; k < a.present_.size(); ++k) {
    if (a.present_[k] != b.present_[k]) return false;
    if (a.present_[k] && a.values_[k] != b.values_[k]) return false;
  }
  return true;
}

CovariateSeries CovariateSeries::make_fixed(std::vector<std::optional<double>> values) {
  CovariateSeries s;
  s.kind = CovariateKind::Fixed;
  s.fixed = std::move(values);
  return s;
}

CovariateSeries CovariateSeries::make_varying(CellMatrix values) {
  CovariateSeries s;
  s.kind = CovariateKind::TimeVarying;
  s.varying = std::move(values);
  return s;
}

PanelDataset::PanelDataset(std::vector<UnitRecord> units, std::vector<Year> periods,
                           std::map<std::string, CellMatrix> outcomes,
                           std::map<std::string, CovariateSeries> covariates)
    : units_(std::move(units)),
      periods_(std::move(periods)),
      outcomes_(std::move(outcomes)),
      covariates_(std::move(covariates)) {
  for (std::size_t i = 1; i < periods_.size(); ++i) {
    if (periods_[i] <= periods_[i - 1]) {
      throw Error(ErrorCode::InvalidArgument, "periods must be strictly increasing");
    }
  }
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const auto& u = units_[i];
    if (!unit_lookup_.emplace(u.id, i).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate unit id '" + u.id + "'");
    }
    auto lat = u.number("latitude");
    auto lon = u.number("longitude");
    if ((lat && (*lat < -90.0 || *lat > 90.0)) || (lon && (*lon < -180.0 || *lon > 180.0))) {
      throw Error(ErrorCode::InvalidValue, "unit '" + u.id + "' has coordinates out of range");
    }
  }
  for (const auto& [key, m] : outcomes_) {
    if (m.rows() != units_.size() || m.cols() != periods_.size()) {
      throw Error(ErrorCode::InvalidArgument, "outcome '" + key + "' has the wrong shape");
    }
  }
  for (const auto& [key, s] : covariates_) {
    bool ok = s.kind == CovariateKind::Fixed
                  ? s.fixed.size() == units_.size()
                  : s.varying.rows() == units_.size() && s.varying.cols() == periods_.size();
    if (!ok) throw Error(ErrorCode::InvalidArgument, "covariate '" + key + "' has the wrong shape");
  }
}

std::optional<std::size_t> PanelDataset::find_unit(const std::string& id) const {
  auto it = unit_lookup_.find(id);
  if (it == unit_lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t PanelDataset::unit_index(const std::string& id) const {
  auto idx = find_unit(id);
  if (!idx) throw Error(ErrorCode::UnknownUnit, "unknown unit '" + id + "'");
  return *idx;
}

std::optional<std::size_t> PanelDataset::period_index(Year year) const {
  auto it = std::lower_bound(periods_.begin(), periods_.end(), year);
  if (it == periods_.end() || *it != year) return std::nullopt;
  return static_cast<std::size_t>(it - periods_.begin());
}

const CellMatrix& PanelDataset::outcome(const std::string& key) const {
  auto it = outcomes_.find(key);
  if (it == outcomes_.end()) throw Error(ErrorCode::UnknownOutcome, "unknown outcome '" + key + "'");
  return it->second;
}

const CovariateSeries& PanelDataset::covariate(const std::string& key) const {
  auto it = covariates_.find(key);
  if (it == covariates_.end()) {
    throw Error(ErrorCode::UnknownCovariate, "unknown covariate '" + key + "'");
  }
  return it->second;
}

PanelDataset PanelDataset::with_covariate(const std::string& key, CovariateSeries series) const {
  auto covs = covariates_;
  covs.insert_or_assign(key, std::move(series));
  return PanelDataset(units_, periods_, outcomes_, std::move(covs));
}

IncomeTable::IncomeTable(std::vector<IncomeRow> rows) : rows_(std::move(rows)) {
  for (const auto& r : rows_) {
    if (!index_.emplace(std::make_pair(r.postcode, r.year), r.mean_taxable_income).second) {
      throw Error(ErrorCode::DuplicateObservation,
                  "duplicate income row for postcode " + r.postcode + " year " +
                      std::to_string(r.year));
    }
  }
}

std::optional<double> IncomeTable::lookup(const std::string& postcode, Year year) const {
  auto it = index_.find({postcode, year});
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

PanelDataset load_panel(const std::filesystem::path& schools_file, const IngestConfig& config) {
  const auto records = csv::read_file(schools_file);
  require_header(records, schools_file, {"unit_id", "unit_name", "year"});
  const auto& header = records.front().fields;
  const std::size_t width = header.size();

  std::map<std::string, std::size_t> column_of;
  for (std::size_t c = 3; c < width; ++c) column_of[header[c]] = c;
  for (const auto& key : config.outcome_keys) {
    if (!column_of.count(key)) {
      throw Error(ErrorCode::SchemaMismatch,
                  schools_file.string() + ": missing outcome column '" + key + "'");
    }
  }
  std::set<std::string> outcome_set(config.outcome_keys.begin(), config.outcome_keys.end());

  struct Row {
    std::size_t unit;
    Year year;
    const csv::Record* rec;
  };
  std::vector<UnitRecord> units;
  std::map<std::string, std::size_t> unit_of;
  std::set<Year> years;
  std::set<std::pair<std::size_t, Year>> seen;
  std::vector<Row> rows;

  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    check_width(rec, width, schools_file);
    const auto& id = rec.fields[0];
    if (id.empty()) throw Error(ErrorCode::MalformedRow, where(schools_file, rec.line) + ": empty unit_id");
    Year year = 0;
    if (!parse_year(rec.fields[2], year)) {
      throw Error(ErrorCode::MalformedRow,
                  where(schools_file, rec.line) + ": bad year '" + rec.fields[2] + "'");
    }
    auto [it, inserted] = unit_of.emplace(id, units.size());
    if (inserted) units.push_back(UnitRecord{id, rec.fields[1], {}});
    if (!seen.emplace(it->second, year).second) {
      throw Error(ErrorCode::DuplicateObservation, where(schools_file, rec.line) +
                                                       ": duplicate observation for unit " + id +
                                                       " year " + std::to_string(year));
    }
    if (config.exclude_years.count(year)) continue;
    years.insert(year);
    rows.push_back({it->second, year, &rec});
  }

  std::vector<Year> periods(years.begin(), years.end());
  std::map<Year, std::size_t> col_of_year;
  for (std::size_t c = 0; c < periods.size(); ++c) col_of_year[periods[c]] = c;

  std::map<std::string, CellMatrix> outcomes;
  std::map<std::string, CellMatrix> varying;
  for (std::size_t c = 3; c < width; ++c) {
    auto& target = outcome_set.count(header[c]) ? outcomes : varying;
    target.emplace(header[c], CellMatrix(units.size(), periods.size()));
  }
  for (const auto& row : rows) {
    std::size_t col = col_of_year.at(row.year);
    for (std::size_t c = 3; c < width; ++c) {
      const auto& cell = row.rec->fields[c];
      if (cell.empty()) continue;
      double v = 0.0;
      if (!csv::parse_number(cell, v)) {
        throw Error(ErrorCode::InvalidValue, where(schools_file, row.rec->line) + ": column '" +
                                                 header[c] + "' is not numeric: '" + cell + "'");
      }
      auto it = outcomes.find(header[c]);
      CellMatrix& m = it != outcomes.end() ? it->second : varying.at(header[c]);
      m.set(row.unit, col, v);
    }
  }

  std::map<std::string, CovariateSeries> covariates;
  for (auto& [key, m] : varying) covariates.emplace(key, CovariateSeries::make_varying(std::move(m)));

  if (config.attributes_file) {
    const auto& path = *config.attributes_file;
    const auto attr_records = csv::read_file(path);
    require_header(attr_records, path, {"unit_id"});
    const auto& ah = attr_records.front().fields;
    std::vector<AttributeColumn> cols(ah.size());
    for (std::size_t c = 1; c < ah.size(); ++c) {
      cols[c].key = ah[c];
      if (ah[c] == "unit_name") continue;
      bool all_bool = true, all_num = true, any = false;
      for (std::size_t i = 1; i < attr_records.size(); ++i) {
        check_width(attr_records[i], ah.size(), path);
        const auto& f = attr_records[i].fields[c];
        if (f.empty()) continue;
        any = true;
        double d;
        if (f != "true" && f != "false") all_bool = false;
        if (!csv::parse_number(f, d)) all_num = false;
      }
      if (!any) continue;
      if (all_bool) {
        cols[c].type = AttributeColumn::Type::Boolean;
      } else if (all_num && !config.text_attributes.count(ah[c])) {
        cols[c].type = AttributeColumn::Type::Number;
      }
    }
    std::set<std::string> seen_units;
    for (std::size_t i = 1; i < attr_records.size(); ++i) {
      const auto& rec = attr_records[i];
      check_width(rec, ah.size(), path);
      if (!seen_units.insert(rec.fields[0]).second) {
        throw Error(ErrorCode::DuplicateObservation,
                    where(path, rec.line) + ": duplicate attributes for unit " + rec.fields[0]);
      }
      auto it = unit_of.find(rec.fields[0]);
      if (it == unit_of.end()) continue;
      auto& unit = units[it->second];
      for (std::size_t c = 1; c < ah.size(); ++c) {
        const auto& f = rec.fields[c];
        if (f.empty() || cols[c].key == "unit_name") continue;
        switch (cols[c].type) {
          case AttributeColumn::Type::Boolean:
            unit.attributes[cols[c].key] = (f == "true");
            break;
          case AttributeColumn::Type::Number: {
            double d = 0.0;
            csv::parse_number(f, d);
            unit.attributes[cols[c].key] = d;
            break;
          }
          case AttributeColumn::Type::Text:
            unit.attributes[cols[c].key] = f;
            break;
        }
      }
    }
    // Numeric static attributes double as fixed covariates.
    for (std::size_t c = 1; c < ah.size(); ++c) {
      if (cols[c].type != AttributeColumn::Type::Number) continue;
      if (covariates.count(cols[c].key)) {
        throw Error(ErrorCode::SchemaMismatch,
                    "attribute '" + cols[c].key + "' clashes with a time-varying covariate");
      }
      std::vector<std::optional<double>> values(units.size());
      for (std::size_t u = 0; u < units.size(); ++u) values[u] = units[u].number(cols[c].key);
      covariates.emplace(cols[c].key, CovariateSeries::make_fixed(std::move(values)));
    }
  }

  return PanelDataset(std::move(units), std::move(periods), std::move(outcomes),
                      std::move(covariates));
}

IncomeTable load_income(const std::filesystem::path& income_file) {
  const auto records = csv::read_file(income_file);
  require_header(records, income_file, {"postcode", "year", "mean_taxable_income"});
  std::vector<IncomeRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    check_width(rec, records.front().fields.size(), income_file);
    IncomeRow row;
    row.postcode = rec.fields[0];
    double v = 0.0;
    if (!parse_year(rec.fields[1], row.year) || !csv::parse_number(rec.fields[2], v)) {
      throw Error(ErrorCode::MalformedRow, where(income_file, rec.line) + ": bad income row");
    }
    row.mean_taxable_income = v;
    rows.push_back(std::move(row));
  }
  return IncomeTable(std::move(rows));
}

void write_panel(const PanelDataset& panel, const std::filesystem::path& schools_file,
                 const std::optional<std::filesystem::path>& attributes_file) {
  std::ofstream out(schools_file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + schools_file.string());
  std::vector<std::string> header{"unit_id", "unit_name", "year"};
  std::vector<const CellMatrix*> columns;
  for (const auto& [key, m] : panel.outcomes()) {
    header.push_back(key);
    columns.push_back(&m);
  }
  for (const auto& [key, s] : panel.covariates()) {
    if (s.kind != CovariateKind::TimeVarying) continue;
    header.push_back(key);
    columns.push_back(&s.varying);
  }
  csv::write_row(out, header);
  for (std::size_t u = 0; u < panel.unit_count(); ++u) {
    for (std::size_t t = 0; t < panel.period_count(); ++t) {
      std::vector<std::string> row{panel.units()[u].id, panel.units()[u].name,
                                   std::to_string(panel.periods()[t])};
      for (const auto* m : columns) {
        auto v = m->at(u, t);
        row.push_back(v ? csv::format_number(*v) : std::string());
      }
      csv::write_row(out, row);
    }
  }

  if (!attributes_file) return;
  std::ofstream attr(*attributes_file, std::ios::binary);
  if (!attr) throw Error(ErrorCode::IoError, "cannot write " + attributes_file->string());
  std::set<std::string> keys;
  for (const auto& u : panel.units()) {
    for (const auto& [k, v] : u.attributes) keys.insert(k);
  }
  std::vector<std::string> ah{"unit_id"};
  ah.insert(ah.end(), keys.begin(), keys.end());
  csv::write_row(attr, ah);
  for (const auto& u : panel.units()) {
    std::vector<std::string> row{u.id};
    for (const auto& k : keys) {
      const auto* v = u.attribute(k);
      row.push_back(v ? attribute_text(*v) : std::string());
    }
    csv::write_row(attr, row);
  }
}

void write_income(const IncomeTable& income, const std::filesystem::path& income_file) {
  std::ofstream out(income_file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + income_file.string());
  csv::write_row(out, {"postcode", "year", "mean_taxable_income"});
  for (const auto& r : income.rows()) {
    csv::write_row(out, {r.postcode, std::to_string(r.year), csv::format_number(r.mean_taxable_income)});
  }
}

PanelDataset join_income(const PanelDataset& panel, const IncomeTable& income) {
  CellMatrix m(panel.unit_count(), panel.period_count());
  for (std::size_t u = 0; u < panel.unit_count(); ++u) {
    const auto& unit = panel.units()[u];
    const auto* pc = unit.attribute("postcode");
    if (!pc) {
      throw Error(ErrorCode::MissingAttribute, "unit '" + unit.id + "' has no postcode attribute");
    }
    const std::string postcode = attribute_text(*pc);
    for (std::size_t t = 0; t < panel.period_count(); ++t) {
      if (auto v = income.lookup(postcode, panel.periods()[t])) m.set(u, t, *v);
    }
  }
  return panel.with_covariate(kIncomeCovariate, CovariateSeries::make_varying(std::move(m)));
}

PanelDataset drop_period(const PanelDataset& panel, Year year) {
  auto col = panel.period_index(year);
  if (!col) return panel;
  if (panel.period_count() == 1) {
    throw Error(ErrorCode::EmptyPanel, "dropping " + std::to_string(year) + " leaves no periods");
  }
  auto periods = panel.periods();
  periods.erase(periods.begin() + static_cast<std::ptrdiff_t>(*col));
  std::map<std::string, CellMatrix> outcomes;
  for (const auto& [k, m] : panel.outcomes()) outcomes.emplace(k, m.without_column(*col));
  std::map<std::string, CovariateSeries> covs;
  for (const auto& [k, s] : panel.covariates()) {
    covs.emplace(k, s.kind == CovariateKind::Fixed
                        ? s
                        : CovariateSeries::make_varying(s.varying.without_column(*col)));
  }
  return PanelDataset(panel.units(), std::move(periods), std::move(outcomes), std::move(covs));
}

std::vector<double> collapse_covariate(const PanelDataset& panel, const std::string& key,
                                       YearRange window) {
  return collapse_covariate(panel, key, window, all_rows(panel));
}

std::vector<double> collapse_covariate(const PanelDataset& panel, const std::string& key,
                                       YearRange window, std::span<const std::size_t> rows) {
  const auto& series = panel.covariate(key);
  const auto cols = window_columns(panel, window);
  if (series.kind == CovariateKind::TimeVarying) {
    return mean_over(panel, series.varying, cols, key, rows);
  }
  std::vector<double> out(rows.size());
  std::vector<std::size_t> empty_rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (const auto& v = series.fixed[rows[i]]) {
      out[i] = *v;
    } else {
      empty_rows.push_back(rows[i]);
    }
  }
  if (!empty_rows.empty()) throw_all_missing(panel, key, empty_rows);
  return out;
}

std::vector<double> collapse_outcome(const PanelDataset& panel, const std::string& key,
                                     YearRange window) {
  return collapse_outcome(panel, key, window, all_rows(panel));
}

std::vector<double> collapse_outcome(const PanelDataset& panel, const std::string& key,
                                     YearRange window, std::span<const std::size_t> rows) {
  return mean_over(panel, panel.outcome(key), window_columns(panel, window), key, rows);
}

}  // namespace synthctl

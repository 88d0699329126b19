#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sentlabel/random.hpp"

namespace sentlabel {

using ColumnIndex = std::uint32_t;
using SparseRow = std::vector<ColumnIndex>;

/// Default ceiling on dense allocations (bytes).
inline constexpr std::size_t kDefaultDenseBudget = std::size_t{4} << 30;

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void check_dense_budget(std::size_t rows, std::size_t cols, std::size_t budget_bytes) {
  const long double bytes = static_cast<long double>(rows) * cols * sizeof(double);
  if (bytes > static_cast<long double>(budget_bytes)) {
    std::ostringstream msg;
    msg << "dense " << rows << "x" << cols << " matrix needs " << static_cast<double>(bytes)
        << " bytes, budget is " << budget_bytes;
    throw BudgetExceeded(msg.str());
  }
}

/**
 * @brief Sparse binary sentence x label matrix.
 *
 * Row-major: each row stores the sorted, duplicate-free column indices of its
 * one entries. Immutable once constructed.
 */
class LabelMatrix {
 public:
  LabelMatrix() = default;

  /// All-zero matrix.
  LabelMatrix(std::size_t n_rows, std::size_t n_cols) : n_cols_(n_cols), rows_(n_rows) {}

  LabelMatrix(std::size_t n_cols, std::vector<SparseRow> rows) : n_cols_(n_cols), rows_(std::move(rows)) {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const auto& r = rows_[i];
      for (std::size_t k = 0; k < r.size(); ++k) {
        if (r[k] >= n_cols_) {
          throw std::invalid_argument("row " + std::to_string(i) + ": column index " + std::to_string(r[k]) +
                                      " out of range");
        }
        if (k > 0 && r[k] <= r[k - 1]) {
          throw std::invalid_argument("row " + std::to_string(i) + ": column indices not strictly ascending");
        }
      }
    }
  }

  std::size_t rows() const { return rows_.size(); }
  std::size_t cols() const { return n_cols_; }

  std::span<const ColumnIndex> row(std::size_t i) const { return rows_.at(i); }

  bool contains(std::size_t i, std::size_t j) const {
    const auto& r = rows_.at(i);
    return std::binary_search(r.begin(), r.end(), static_cast<ColumnIndex>(j));
  }

  std::size_t nnz() const {
    return std::accumulate(rows_.begin(), rows_.end(), std::size_t{0},
                           [](std::size_t acc, const SparseRow& r) { return acc + r.size(); });
  }

  /// Number of ones in each column.
  std::vector<std::size_t> column_counts() const {
    std::vector<std::size_t> counts(n_cols_, 0);
    for (const auto& r : rows_)
      for (ColumnIndex j : r) ++counts[j];
    return counts;
  }

  const std::vector<SparseRow>& row_sets() const { return rows_; }

  friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;

 private:
  std::size_t n_cols_ = 0;
  std::vector<SparseRow> rows_;
};

// ---------------------------------------------------------------------------
// Density profiles

enum class GroupAssignment { Contiguous, SeededShuffle };

struct DensityGroup {
  double density = 0.0;   ///< probability that a cell in the row is 1
  double coverage = 0.0;  ///< fraction of rows in this group
};

class DensityProfile {
 public:
  DensityProfile() = default;

  DensityProfile(std::vector<DensityGroup> groups, GroupAssignment assignment = GroupAssignment::SeededShuffle)
      : groups_(std::move(groups)), assignment_(assignment) {
    if (groups_.empty()) throw std::invalid_argument("density profile needs at least one group");
    double total = 0.0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const auto& grp = groups_[g];
      if (!(grp.density > 0.0 && grp.density < 1.0))
        throw std::invalid_argument("group density must lie in (0, 1)");
      if (!(grp.coverage > 0.0 && grp.coverage <= 1.0))
        throw std::invalid_argument("group coverage must lie in (0, 1]");
      if (g > 0 && !(grp.density > groups_[g - 1].density))
        throw std::invalid_argument("group densities must be strictly increasing");
      total += grp.coverage;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("group coverages must sum to 1");
  }

  const std::vector<DensityGroup>& groups() const { return groups_; }
  GroupAssignment assignment() const { return assignment_; }
  std::size_t size() const { return groups_.size(); }

  /// Rows per group: floor(coverage * n), leftovers by largest remainder (ties to lower index).
  std::vector<std::size_t> group_sizes(std::size_t n_rows) const {
    std::vector<std::size_t> sizes(groups_.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const double exact = groups_[g].coverage * static_cast<double>(n_rows);
      // Snap values within rounding noise of an integer.
      const double nearest = std::round(exact);
      const double value = std::abs(exact - nearest) < 1e-7 ? nearest : exact;
      sizes[g] = static_cast<std::size_t>(std::floor(value));
      assigned += sizes[g];
      remainders.emplace_back(value - std::floor(value), g);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < n_rows; ++k, ++assigned) ++sizes[remainders[k % remainders.size()].second];
    return sizes;
  }

  friend bool operator==(const DensityProfile& a, const DensityProfile& b) {
    if (a.assignment_ != b.assignment_ || a.groups_.size() != b.groups_.size()) return false;
    for (std::size_t g = 0; g < a.groups_.size(); ++g) {
      if (a.groups_[g].density != b.groups_[g].density || a.groups_[g].coverage != b.groups_[g].coverage)
        return false;
    }
    return true;
  }

 private:
  std::vector<DensityGroup> groups_;
  GroupAssignment assignment_ = GroupAssignment::SeededShuffle;
};

namespace profiles {

/// 0.1% / 1% / 10% rows at 90 / 9.9 / 0.1 % coverage.
inline DensityProfile table1_skew_sparse() { return DensityProfile({{0.001, 0.90}, {0.01, 0.099}, {0.1, 0.001}}); }
inline DensityProfile table1_even() {
  return DensityProfile({{0.001, 1.0 / 3.0}, {0.01, 1.0 / 3.0}, {0.1, 1.0 / 3.0}});
}
inline DensityProfile table1_skew_dense() { return DensityProfile({{0.001, 0.001}, {0.01, 0.099}, {0.1, 0.90}}); }
inline DensityProfile uniform(double density) { return DensityProfile({{density, 1.0}}); }

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"table1-skew-sparse", "table1-even", "table1-skew-dense"};
  return names;
}

/**
 * Resolve a profile by built-in name or parse an inline list of
 * `density:coverage` pairs separated by commas, e.g. "0.001:0.9,0.01:0.1".
 */
inline DensityProfile parse(const std::string& text, GroupAssignment assignment = GroupAssignment::SeededShuffle) {
  if (text == "table1-skew-sparse") return DensityProfile(table1_skew_sparse().groups(), assignment);
  if (text == "table1-even") return DensityProfile(table1_even().groups(), assignment);
  if (text == "table1-skew-dense") return DensityProfile(table1_skew_dense().groups(), assignment);
  std::vector<DensityGroup> groups;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("bad profile entry '" + item + "', want density:coverage");
    try {
      groups.push_back({std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
    } catch (const std::logic_error&) {
      throw std::invalid_argument("bad profile entry '" + item + "'");
    }
  }
  return DensityProfile(std::move(groups), assignment);
}

}  // namespace profiles

// ---------------------------------------------------------------------------
// Generation

struct GeneratedMatrix {
  LabelMatrix matrix;
  std::vector<std::size_t> group_of_row;
  std::vector<std::string> warnings;
};

inline constexpr int kRowRetryLimit = 100;

namespace detail {

inline std::uint64_t hash_row(std::span<const ColumnIndex> row) {
  std::uint64_t h = 0x84222325CBF29CE4ULL ^ row.size();
  for (ColumnIndex j : row) h = splitmix64(h ^ j);
  return h;
}

}  // namespace detail

/**
 * @brief Draw a random binary matrix under a density profile.
 *
 * Rows are split into groups by coverage (contiguous blocks or a seeded
 * shuffle). Every cell of a row in group g is 1 independently with
 * probability density(g). A row that comes out empty, or identical to an
 * earlier row, is redrawn; after kRowRetryLimit redraws GenerationError is
 * thrown. Columns may still end up empty.
 *
 * The output depends only on (n_rows, n_cols, profile, seed).
 */
inline GeneratedMatrix generate(std::size_t n_rows, std::size_t n_cols, const DensityProfile& profile, RngSeed seed) {
  if (n_rows == 0 || n_cols == 0) throw std::invalid_argument("generate: matrix dimensions must be positive");
  if (n_cols > std::size_t{UINT32_MAX}) throw std::invalid_argument("generate: too many columns");

  GeneratedMatrix out;
  for (const auto& g : profile.groups()) {
    if (g.density * static_cast<double>(n_cols) < 1.0) {
      std::ostringstream msg;
      msg << "density " << g.density << " over " << n_cols << " columns expects fewer than one entry per row";
      out.warnings.push_back(msg.str());
    }
  }

  Rng rng(seed);
  const auto sizes = profile.group_sizes(n_rows);
  out.group_of_row.reserve(n_rows);
  for (std::size_t g = 0; g < sizes.size(); ++g) out.group_of_row.insert(out.group_of_row.end(), sizes[g], g);
  if (profile.assignment() == GroupAssignment::SeededShuffle) rng.shuffle(std::span(out.group_of_row));

  // Integer threshold so the Bernoulli draw is exact on any platform.
  std::vector<std::uint64_t> thresholds;
  for (const auto& g : profile.groups())
    thresholds.push_back(static_cast<std::uint64_t>(std::ldexp(g.density, 53)));

  std::vector<SparseRow> rows(n_rows);
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;
  seen.reserve(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    const std::uint64_t threshold = thresholds[out.group_of_row[i]];
    SparseRow& row = rows[i];
    for (int attempt = 0;; ++attempt) {
      if (attempt > kRowRetryLimit) {
        throw GenerationError("generate: row " + std::to_string(i) + " still empty or duplicated after " +
                              std::to_string(kRowRetryLimit) + " redraws; profile cannot yield distinct rows");
      }
      row.clear();
      for (std::size_t j = 0; j < n_cols; ++j)
        if ((rng.next() >> 11) < threshold) row.push_back(static_cast<ColumnIndex>(j));
      if (row.empty()) continue;
      auto& bucket = seen[detail::hash_row(row)];
      const bool duplicate =
          std::any_of(bucket.begin(), bucket.end(), [&](std::size_t other) { return rows[other] == row; });
      if (duplicate) continue;
      bucket.push_back(i);
      break;
    }
  }
  out.matrix = LabelMatrix(n_cols, std::move(rows));
  return out;
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  std::vector<std::size_t> empty_rows;
  std::vector<std::size_t> empty_cols;
  /// (earlier, later) index pairs; empty rows/columns are not paired up.
  std::vector<std::pair<std::size_t, std::size_t>> duplicate_rows;
  std::vector<std::pair<std::size_t, std::size_t>> duplicate_cols;

  bool valid() const {
    return empty_rows.empty() && empty_cols.empty() && duplicate_rows.empty() && duplicate_cols.empty();
  }
};

namespace detail {

inline std::vector<std::pair<std::size_t, std::size_t>> find_duplicates(const std::vector<SparseRow>& sets) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (sets[i].empty()) continue;
    auto& bucket = seen[hash_row(sets[i])];
    auto it = std::find_if(bucket.begin(), bucket.end(), [&](std::size_t other) { return sets[other] == sets[i]; });
    if (it != bucket.end()) {
      pairs.emplace_back(*it, i);
    } else {
      bucket.push_back(i);
    }
  }
  return pairs;
}

inline std::vector<SparseRow> transpose_sets(const LabelMatrix& m) {
  std::vector<SparseRow> cols(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (ColumnIndex j : m.row(i)) cols[j].push_back(static_cast<ColumnIndex>(i));
  return cols;
}

}  // namespace detail

inline ValidationReport validate(const LabelMatrix& m) {
  ValidationReport report;
  for (std::size_t i = 0; i < m.rows(); ++i)
    if (m.row(i).empty()) report.empty_rows.push_back(i);
  const auto cols = detail::transpose_sets(m);
  for (std::size_t j = 0; j < cols.size(); ++j)
    if (cols[j].empty()) report.empty_cols.push_back(j);
  report.duplicate_rows = detail::find_duplicates(m.row_sets());
  report.duplicate_cols = detail::find_duplicates(cols);
  return report;
}

// ---------------------------------------------------------------------------
// Embedded classification datasets

struct DatasetSpec {
  std::string name;
  std::size_t row_start = 0;
  std::size_t n_examples = 0;
  std::size_t n_classes = 0;
  std::vector<ColumnIndex> class_columns;  ///< one column per class
  std::vector<std::size_t> labels;         ///< per example, in [0, n_classes)
};

/// Spec with labels drawn uniformly over the classes.
inline DatasetSpec make_dataset_spec(std::string name, std::size_t row_start, std::size_t n_examples,
                                     std::vector<ColumnIndex> class_columns, RngSeed seed) {
  DatasetSpec spec;
  spec.name = std::move(name);
  spec.row_start = row_start;
  spec.n_examples = n_examples;
  spec.n_classes = class_columns.size();
  spec.class_columns = std::move(class_columns);
  Rng rng(seed);
  spec.labels.resize(n_examples);
  for (auto& y : spec.labels) y = static_cast<std::size_t>(rng.below(spec.n_classes));
  return spec;
}

inline void check_dataset_specs(const LabelMatrix& m, const std::vector<DatasetSpec>& specs) {
  std::vector<char> row_used(m.rows(), 0);
  std::vector<char> col_used(m.cols(), 0);
  for (const auto& s : specs) {
    const std::string who = "dataset '" + s.name + "': ";
    if (s.n_classes < 2) throw std::invalid_argument(who + "needs at least two classes");
    if (s.class_columns.size() != s.n_classes) throw std::invalid_argument(who + "needs one class column per class");
    if (s.labels.size() != s.n_examples) throw std::invalid_argument(who + "needs one label per example");
    if (s.row_start + s.n_examples > m.rows()) throw std::invalid_argument(who + "rows exceed the matrix");
    for (auto y : s.labels)
      if (y >= s.n_classes) throw std::invalid_argument(who + "label out of range");
    for (std::size_t i = s.row_start; i < s.row_start + s.n_examples; ++i) {
      if (row_used[i]) throw std::invalid_argument(who + "row range overlaps another dataset");
      row_used[i] = 1;
    }
    for (auto c : s.class_columns) {
      if (c >= m.cols()) throw std::invalid_argument(who + "class column exceeds the matrix");
      if (col_used[c]) throw std::invalid_argument(who + "class columns overlap another dataset");
      col_used[c] = 1;
    }
  }
}

/**
 * @brief Write datasets into the label matrix.
 *
 * Every dataset's class columns are cleared in every row, then each example
 * row gets a one in the column of its label. Cells outside the class columns
 * are untouched. Applying the same specs twice gives the same matrix.
 */
inline LabelMatrix embed_datasets(const LabelMatrix& m, const std::vector<DatasetSpec>& specs) {
  check_dataset_specs(m, specs);
  if (specs.empty()) return m;

  std::vector<char> is_class_col(m.cols(), 0);
  for (const auto& s : specs)
    for (auto c : s.class_columns) is_class_col[c] = 1;

  std::vector<SparseRow> rows(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto src = m.row(i);
    rows[i].reserve(src.size() + 1);
    for (ColumnIndex j : src)
      if (!is_class_col[j]) rows[i].push_back(j);
  }
  for (const auto& s : specs) {
    for (std::size_t e = 0; e < s.n_examples; ++e) {
      auto& row = rows[s.row_start + e];
      const ColumnIndex c = s.class_columns[s.labels[e]];
      row.insert(std::lower_bound(row.begin(), row.end(), c), c);
    }
  }
  return LabelMatrix(m.cols(), std::move(rows));
}

// ---------------------------------------------------------------------------
// Dense conversion

inline Eigen::MatrixXd densify(const LabelMatrix& m, std::size_t budget_bytes = kDefaultDenseBudget) {
  check_dense_budget(m.rows(), m.cols(), budget_bytes);
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (ColumnIndex j : m.row(i)) dense(static_cast<Eigen::Index>(i), j) = 1.0;
  return dense;
}

/// Inverse of densify: entries equal to 1.0 become ones, exact zeros stay zero.
inline LabelMatrix sparsify(const Eigen::MatrixXd& dense) {
  std::vector<SparseRow> rows(static_cast<std::size_t>(dense.rows()));
  for (Eigen::Index i = 0; i < dense.rows(); ++i) {
    for (Eigen::Index j = 0; j < dense.cols(); ++j) {
      const double v = dense(i, j);
      if (v == 1.0) {
        rows[static_cast<std::size_t>(i)].push_back(static_cast<ColumnIndex>(j));
      } else if (v != 0.0) {
        throw std::invalid_argument("sparsify: matrix is not binary");
      }
    }
  }
  return LabelMatrix(static_cast<std::size_t>(dense.cols()), std::move(rows));
}

// ---------------------------------------------------------------------------
// Text format
//
//   labelmatrix v1 <n_rows> <n_cols>
//   <ascending column indices of row 0, space separated>
//   ...
//
// An empty line is an empty row. LF line endings.

inline void write_matrix(std::ostream& out, const LabelMatrix& m) {
  out << "labelmatrix v1 " << m.rows() << ' ' << m.cols() << '\n';
  std::string line;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    line.clear();
    for (ColumnIndex j : m.row(i)) {
      if (!line.empty()) line.push_back(' ');
      line += std::to_string(j);
    }
    line.push_back('\n');
    out << line;
  }
}

inline LabelMatrix read_matrix(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("labelmatrix: missing header");
  std::istringstream header(line);
  std::string magic, version;
  std::size_t n_rows = 0, n_cols = 0;
  std::string extra;
  if (!(header >> magic >> version >> n_rows >> n_cols) || magic != "labelmatrix" || version != "v1" ||
      (header >> extra)) {
    throw std::runtime_error("labelmatrix: bad header '" + line + "'");
  }
  std::vector<SparseRow> rows(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error("labelmatrix: expected " + std::to_string(n_rows) + " rows, got " + std::to_string(i));
    if (!line.empty() && line.back() == '\r') throw std::runtime_error("labelmatrix: CRLF line endings not supported");
    std::istringstream fields(line);
    long long j = 0;
    while (fields >> j) {
      if (j < 0 || static_cast<std::size_t>(j) >= n_cols || (!rows[i].empty() && j <= rows[i].back())) {
        throw std::runtime_error("labelmatrix: line " + std::to_string(i + 2) + ": bad column index " +
                                 std::to_string(j));
      }
      rows[i].push_back(static_cast<ColumnIndex>(j));
    }
    if (!fields.eof()) throw std::runtime_error("labelmatrix: line " + std::to_string(i + 2) + ": not an index list");
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("labelmatrix: trailing content after " + std::to_string(n_rows) + " rows");
  return LabelMatrix(n_cols, std::move(rows));
}

}  // namespace sentlabel

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sentlabel/label_matrix.hpp"

namespace sentlabel {

struct RowLossReport {
  std::vector<double> per_row_l1;
  std::vector<std::size_t> group_of_row;
};

/// Population statistics of the row losses in one density group.
struct GroupStats {
  double density = 0.0;
  double coverage = 0.0;
  double mean_loss = 0.0;
  double std_loss = 0.0;
  std::size_t n_rows = 0;
};

/**
 * @brief Per-row L1 distance between a binary matrix and a real approximation.
 *
 * loss_i = sum_j |m_ij - approx_ij|, using the raw approximation (no
 * rounding or clamping). group_of_row is copied through unchanged and may be
 * empty.
 */
inline RowLossReport row_l1_loss(const LabelMatrix& m, const Eigen::MatrixXd& approx,
                                 std::vector<std::size_t> group_of_row = {}) {
  if (static_cast<std::size_t>(approx.rows()) != m.rows() || static_cast<std::size_t>(approx.cols()) != m.cols()) {
    throw std::invalid_argument("row_l1_loss: approximation is " + std::to_string(approx.rows()) + "x" +
                                std::to_string(approx.cols()) + ", matrix is " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()));
  }
  if (!group_of_row.empty() && group_of_row.size() != m.rows())
    throw std::invalid_argument("row_l1_loss: group assignment length differs from row count");

  RowLossReport report;
  report.per_row_l1.resize(m.rows());
  report.group_of_row = std::move(group_of_row);
  // Row-major copy keeps the per-row scan contiguous.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rowwise = approx;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = rowwise.row(static_cast<Eigen::Index>(i));
    double loss = r.cwiseAbs().sum();
    for (ColumnIndex j : m.row(i)) {
      const double a = r(j);
      loss += std::abs(1.0 - a) - std::abs(a);
    }
    report.per_row_l1[i] = loss;
  }
  return report;
}

/// Mean and population standard deviation of row losses per density group.
inline std::vector<GroupStats> group_stats(const RowLossReport& report, const DensityProfile& profile) {
  if (report.group_of_row.size() != report.per_row_l1.size())
    throw std::invalid_argument("group_stats: report has no group assignment for every row");
  const auto& groups = profile.groups();
  std::vector<GroupStats> stats(groups.size());
  std::vector<double> sum(groups.size(), 0.0);
  for (std::size_t i = 0; i < report.per_row_l1.size(); ++i) {
    const auto g = report.group_of_row[i];
    if (g >= groups.size()) throw std::invalid_argument("group_stats: group id out of range for profile");
    sum[g] += report.per_row_l1[i];
    ++stats[g].n_rows;
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (stats[g].n_rows == 0) throw std::invalid_argument("group_stats: group " + std::to_string(g) + " has no rows");
    stats[g].density = groups[g].density;
    stats[g].coverage = groups[g].coverage;
    stats[g].mean_loss = sum[g] / static_cast<double>(stats[g].n_rows);
  }
  std::vector<double> sq(groups.size(), 0.0);
  for (std::size_t i = 0; i < report.per_row_l1.size(); ++i) {
    const auto g = report.group_of_row[i];
    const double d = report.per_row_l1[i] - stats[g].mean_loss;
    sq[g] += d * d;
  }
  for (std::size_t g = 0; g < groups.size(); ++g)
    stats[g].std_loss = std::sqrt(sq[g] / static_cast<double>(stats[g].n_rows));
  return stats;
}

}  // namespace sentlabel

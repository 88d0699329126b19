#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "sentlabel/label_matrix.hpp"
#include "sentlabel/random.hpp"

namespace sentlabel {

enum class SvdMethod { Exact, Randomized };

inline const char* to_string(SvdMethod method) { return method == SvdMethod::Exact ? "exact" : "randomized"; }

inline SvdMethod parse_svd_method(const std::string& text) {
  if (text == "exact") return SvdMethod::Exact;
  if (text == "randomized") return SvdMethod::Randomized;
  throw std::invalid_argument("unknown svd method '" + text + "' (want exact or randomized)");
}

/// Orthonormality tolerances for the factors.
inline constexpr double kExactOrthoTol = 1e-8;
inline constexpr double kRandomizedOrthoTol = 1e-6;
inline constexpr double kDefaultRankTol = 1e-10;

/**
 * @brief Leading singular triplets of a matrix, A ~ U diag(sigma) V^T.
 *
 * sigma is non-increasing. Each singular pair is sign-normalized so the
 * largest-magnitude entry of its u column is positive.
 */
struct Factorization {
  Eigen::MatrixXd u;      ///< n_rows x r
  Eigen::VectorXd sigma;  ///< r
  Eigen::MatrixXd v;      ///< n_cols x r
  SvdMethod method = SvdMethod::Exact;
  std::size_t source_rows = 0;
  std::size_t source_cols = 0;

  Eigen::Index rank() const { return sigma.size(); }
  bool full_spectrum() const {
    return static_cast<std::size_t>(sigma.size()) == std::min(source_rows, source_cols);
  }
};

struct RandomizedSvdOptions {
  Eigen::Index oversampling = 10;
  int power_iterations = 2;
  RngSeed seed{0};
};

struct SvdOptions {
  RandomizedSvdOptions randomized;
  std::size_t dense_budget = kDefaultDenseBudget;
};

namespace detail {

inline void normalize_signs(Eigen::MatrixXd& u, Eigen::MatrixXd& v) {
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    Eigen::Index pivot = 0;
    u.col(k).cwiseAbs().maxCoeff(&pivot);
    if (u(pivot, k) < 0.0) {
      u.col(k) *= -1.0;
      v.col(k) *= -1.0;
    }
  }
}

inline Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

inline void check_rank(Eigen::Index r, std::size_t rows, std::size_t cols) {
  const auto limit = static_cast<Eigen::Index>(std::min(rows, cols));
  if (r < 1 || r > limit) {
    throw std::invalid_argument("rank " + std::to_string(r) + " outside [1, " + std::to_string(limit) + "]");
  }
}

inline Factorization finish(Eigen::MatrixXd u, Eigen::VectorXd sigma, Eigen::MatrixXd v, Eigen::Index r,
                            SvdMethod method, std::size_t rows, std::size_t cols) {
  Factorization f;
  f.u = u.leftCols(r);
  f.sigma = sigma.head(r);
  f.v = v.leftCols(r);
  normalize_signs(f.u, f.v);
  f.method = method;
  f.source_rows = rows;
  f.source_cols = cols;
  return f;
}

}  // namespace detail

/// Exact SVD of a dense matrix, keeping the leading r triplets.
inline Factorization exact_svd(const Eigen::MatrixXd& a, Eigen::Index r) {
  detail::check_rank(r, static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()));
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return detail::finish(svd.matrixU(), svd.singularValues(), svd.matrixV(), r, SvdMethod::Exact,
                        static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()));
}

/**
 * @brief Randomized truncated SVD (range finder with power iterations).
 *
 * Works for any Eigen expression type supporting products with dense
 * matrices (dense or sparse). With l = r + oversampling columns:
 *   Y = A G, G Gaussian n x l;  Q = orth(Y)
 *   repeat power_iterations times: Q = orth(A orth(A^T Q))
 *   B = Q^T A;  B = Ub S V^T (via a QR of B^T);  U = Q Ub
 * Output depends only on the inputs and the seed.
 */
template <class Mat>
Factorization randomized_svd(const Mat& a, Eigen::Index r, const RandomizedSvdOptions& options = {}) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  detail::check_rank(r, static_cast<std::size_t>(m), static_cast<std::size_t>(n));
  const Eigen::Index width = std::min(r + std::max<Eigen::Index>(options.oversampling, 0), std::min(m, n));

  Rng rng(options.seed);
  Eigen::MatrixXd gaussian(n, width);
  for (Eigen::Index j = 0; j < width; ++j)
    for (Eigen::Index i = 0; i < n; ++i) gaussian(i, j) = rng.normal();

  Eigen::MatrixXd q = detail::orthonormal_basis(a * gaussian);
  gaussian.resize(0, 0);
  for (int it = 0; it < options.power_iterations; ++it) {
    Eigen::MatrixXd z = detail::orthonormal_basis(a.transpose() * q);
    q = detail::orthonormal_basis(a * z);
  }
  // B^T = Q2 R, so B = R^T Q2^T and the SVD only has to run on the square R^T.
  // BDCSVD on the wide B directly is about twice as slow at l in the thousands.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a.transpose() * q);
  const Eigen::MatrixXd rt = qr.matrixQR().topRows(width).triangularView<Eigen::Upper>().transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(rt, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, width);
  v.topRows(width) = svd.matrixV();
  v.applyOnTheLeft(qr.householderQ());
  Eigen::MatrixXd u = q * svd.matrixU();
  return detail::finish(std::move(u), svd.singularValues(), std::move(v), r, SvdMethod::Randomized,
                        static_cast<std::size_t>(m), static_cast<std::size_t>(n));
}

inline Eigen::SparseMatrix<double, Eigen::RowMajor> to_sparse(const LabelMatrix& m) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> s(static_cast<Eigen::Index>(m.rows()),
                                                 static_cast<Eigen::Index>(m.cols()));
  Eigen::VectorXi per_row(static_cast<Eigen::Index>(m.rows()));
  for (std::size_t i = 0; i < m.rows(); ++i) per_row(static_cast<Eigen::Index>(i)) = static_cast<int>(m.row(i).size());
  s.reserve(per_row);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (ColumnIndex j : m.row(i)) s.insert(static_cast<Eigen::Index>(i), j) = 1.0;
  s.makeCompressed();
  return s;
}

/**
 * Leading-r factorization of a label matrix.
 *
 * Exact: dense divide-and-conquer SVD of the densified matrix (subject to the
 * dense budget). Randomized: dense products when the matrix is at least 5%
 * full and fits the budget, sparse products otherwise.
 */
inline Factorization svd_truncated(const LabelMatrix& m, Eigen::Index r, SvdMethod method,
                                   const SvdOptions& options = {}) {
  detail::check_rank(r, m.rows(), m.cols());
  if (method == SvdMethod::Exact) return exact_svd(densify(m, options.dense_budget), r);

  const double fill = static_cast<double>(m.nnz()) / (static_cast<double>(m.rows()) * static_cast<double>(m.cols()));
  const long double bytes = static_cast<long double>(m.rows()) * m.cols() * sizeof(double);
  if (fill >= 0.05 && bytes <= static_cast<long double>(options.dense_budget))
    return randomized_svd(densify(m, options.dense_budget), r, options.randomized);
  return randomized_svd(to_sparse(m), r, options.randomized);
}

/// Full thin SVD: every singular value, as eym_bound and numerical_rank expect.
inline Factorization svd_full(const LabelMatrix& m, const SvdOptions& options = {}) {
  return svd_truncated(m, static_cast<Eigen::Index>(std::min(m.rows(), m.cols())), SvdMethod::Exact, options);
}

/// Keep the leading r triplets.
inline Factorization truncate(const Factorization& f, Eigen::Index r) {
  if (r < 1 || r > f.rank())
    throw std::invalid_argument("truncate: rank " + std::to_string(r) + " outside [1, " + std::to_string(f.rank()) + "]");
  Factorization t;
  t.u = f.u.leftCols(r);
  t.sigma = f.sigma.head(r);
  t.v = f.v.leftCols(r);
  t.method = f.method;
  t.source_rows = f.source_rows;
  t.source_cols = f.source_cols;
  return t;
}

/// U_r diag(sigma) V_r^T.
inline Eigen::MatrixXd reconstruct(const Factorization& f, std::size_t budget_bytes = kDefaultDenseBudget) {
  if (f.rank() < 1) throw std::invalid_argument("reconstruct: empty factorization");
  check_dense_budget(static_cast<std::size_t>(f.u.rows()), static_cast<std::size_t>(f.v.rows()), budget_bytes);
  return f.u * f.sigma.asDiagonal() * f.v.transpose();
}

/// Row scores U_r diag(sigma), the low-dimensional representation of each row.
inline Eigen::MatrixXd scores(const Factorization& f) { return f.u * f.sigma.asDiagonal(); }

/// Frobenius error of the best rank-r approximation: sqrt(sum_{i>r} sigma_i^2).
inline double eym_bound(const Factorization& full, Eigen::Index r) {
  if (!full.full_spectrum()) throw std::invalid_argument("eym_bound: factorization lacks the full spectrum");
  if (r < 0 || r > full.rank())
    throw std::invalid_argument("eym_bound: rank " + std::to_string(r) + " exceeds spectrum length");
  double tail = 0.0;
  for (Eigen::Index i = full.rank() - 1; i >= r; --i) tail += full.sigma(i) * full.sigma(i);
  return std::sqrt(tail);
}

/// Count of sigma_i > tol * sigma_1.
inline std::size_t numerical_rank(const Factorization& f, double tol = kDefaultRankTol) {
  if (f.rank() == 0 || f.sigma(0) <= 0.0) return 0;
  const double cutoff = tol * f.sigma(0);
  return static_cast<std::size_t>((f.sigma.array() > cutoff).count());
}

struct SpectrumReport {
  std::vector<double> singular_values;
  /// Running sum of sigma_i^2 over the total sum of squares of the full spectrum.
  std::vector<double> cumulative_energy;
  /// Same running share computed on sigma_i rather than sigma_i^2.
  std::vector<double> cumulative_sigma;
};

inline SpectrumReport spectrum_from_values(const Eigen::VectorXd& full_values, std::size_t k) {
  if (k < 1 || k > static_cast<std::size_t>(full_values.size()))
    throw std::invalid_argument("spectrum: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(full_values.size()) + "]");
  const double total = full_values.squaredNorm();
  const double total_sigma = full_values.sum();
  SpectrumReport report;
  report.singular_values.reserve(k);
  report.cumulative_energy.reserve(k);
  report.cumulative_sigma.reserve(k);
  double running = 0.0;
  double running_sigma = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double s = full_values(static_cast<Eigen::Index>(i));
    running += s * s;
    running_sigma += s;
    report.singular_values.push_back(s);
    report.cumulative_energy.push_back(total > 0.0 ? std::min(1.0, running / total) : 0.0);
    report.cumulative_sigma.push_back(total_sigma > 0.0 ? std::min(1.0, running_sigma / total_sigma) : 0.0);
  }
  // Rounding in the running sums can leave the last entry a hair off 1.
  if (k == static_cast<std::size_t>(full_values.size()) && total > 0.0) {
    report.cumulative_energy.back() = 1.0;
    report.cumulative_sigma.back() = 1.0;
  }
  return report;
}

inline SpectrumReport spectrum(const Factorization& full, std::size_t k) {
  if (!full.full_spectrum()) throw std::invalid_argument("spectrum: factorization lacks the full spectrum");
  return spectrum_from_values(full.sigma, k);
}

/// Leading-k singular values of m (values only, no vectors).
inline SpectrumReport spectrum(const LabelMatrix& m, std::size_t k, std::size_t budget_bytes = kDefaultDenseBudget) {
  const std::size_t limit = std::min(m.rows(), m.cols());
  if (k < 1 || k > limit)
    throw std::invalid_argument("spectrum: k=" + std::to_string(k) + " outside [1, " + std::to_string(limit) + "]");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(densify(m, budget_bytes));
  return spectrum_from_values(svd.singularValues(), k);
}

}  // namespace sentlabel

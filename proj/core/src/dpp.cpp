#include "groundal/dpp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "groundal/error.hpp"

namespace groundal {
namespace {

constexpr double kClampRelative = 1e-10;
constexpr double kJitter = 1e-9;
constexpr double kPsdTolerance = 1e-8;

double log_det_pd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
  return 2.0 * diag.array().log().sum();
}

// Orthonormalizes the columns in place (modified Gram-Schmidt). Columns that
// collapse numerically are dropped.
void orthonormalize(Eigen::MatrixXd& V) {
  Eigen::Index kept = 0;
  for (Eigen::Index c = 0; c < V.cols(); ++c) {
    Eigen::VectorXd v = V.col(c);
    for (Eigen::Index p = 0; p < kept; ++p) v -= V.col(p).dot(v) * V.col(p);
    const double norm = v.norm();
    if (norm < 1e-12) continue;
    V.col(kept++) = v / norm;
  }
  V.conservativeResize(Eigen::NoChange, kept);
}

}  // namespace

DppKernel::DppKernel(Eigen::MatrixXd matrix, KernelKind kind, double bandwidth)
    : matrix_(std::move(matrix)), kind_(kind), bandwidth_(bandwidth) {
  if (matrix_.rows() != matrix_.cols()) throw ValidationError("DPP kernel must be square");
  if (!matrix_.allFinite()) throw ValidationError("DPP kernel has non-finite entries");
  const double asym = (matrix_ - matrix_.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, matrix_.cwiseAbs().maxCoeff());
  if (matrix_.size() > 0 && asym > 1e-10 * scale) {
    throw ValidationError("DPP kernel is not symmetric");
  }
  matrix_ = 0.5 * (matrix_ + matrix_.transpose());
  if (matrix_.size() == 0) return;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix_);
  if (solver.info() != Eigen::Success) {
    const Eigen::MatrixXd jittered =
        matrix_ + kJitter * Eigen::MatrixXd::Identity(matrix_.rows(), matrix_.cols());
    solver.compute(jittered);
    if (solver.info() != Eigen::Success) throw NumericalError("DPP kernel eigendecomposition failed");
  }
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();
  const double lambda_max = eigenvalues_.maxCoeff();
  if (eigenvalues_.minCoeff() < -kPsdTolerance * scale) {
    throw ValidationError("DPP kernel is not positive semi-definite");
  }
  rank_ = 0;
  for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
    if (eigenvalues_[i] <= kClampRelative * std::max(lambda_max, 0.0)) {
      eigenvalues_[i] = 0.0;
    } else {
      ++rank_;
    }
  }
}

DppKernel rbf_kernel(const Eigen::MatrixXd& X, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("RBF bandwidth must be positive");
  if (!X.allFinite()) throw ValidationError("RBF kernel: non-finite features");
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::exp(-h * (X.row(i) - X.row(j)).squaredNorm());
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return DppKernel(std::move(K), KernelKind::Rbf, h);
}

DppKernel gmm_modulated_kernel(const DppKernel& base, const Eigen::VectorXd& log_marginals) {
  if (static_cast<std::size_t>(log_marginals.size()) != base.size()) {
    throw ValidationError("quality vector length does not match the kernel");
  }
  if (!log_marginals.allFinite()) throw ValidationError("log-marginals must be finite");
  if (base.size() == 0) return DppKernel(Eigen::MatrixXd(0, 0), KernelKind::GmmModulated, base.bandwidth());
  const Eigen::VectorXd q = (log_marginals.array() - log_marginals.maxCoeff()).exp();
  Eigen::MatrixXd K1 = q.asDiagonal() * base.matrix() * q.asDiagonal();
  return DppKernel(std::move(K1), KernelKind::GmmModulated, base.bandwidth());
}

double subset_log_probability(const DppKernel& kernel, std::span<const std::size_t> subset) {
  const std::size_t n = kernel.size();
  if (n > kMaxExactSubsetItems) {
    throw ValidationError("exact subset probabilities are limited to N <= 20");
  }
  std::vector<Eigen::Index> rows;
  for (std::size_t i : subset) {
    if (i >= n) throw ValidationError("subset index out of range");
    rows.push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<Eigen::Index> sorted = rows;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("subset has repeated indices");
  }
  const auto ni = static_cast<Eigen::Index>(n);
  const double log_norm = log_det_pd(kernel.matrix() + Eigen::MatrixXd::Identity(ni, ni));
  if (rows.empty()) return -log_norm;
  const Eigen::MatrixXd sub = kernel.matrix()(rows, rows);
  return log_det_pd(sub) - log_norm;
}

std::vector<double> elementary_symmetric(std::span<const double> values, std::size_t k) {
  if (k > values.size()) throw ValidationError("elementary_symmetric: k exceeds the number of values");
  std::vector<double> e(k + 1, 0.0);
  e[0] = 1.0;
  for (std::size_t n = 0; n < values.size(); ++n) {
    const std::size_t top = std::min(k, n + 1);
    for (std::size_t j = top; j >= 1; --j) e[j] += values[n] * e[j - 1];
  }
  return e;
}

std::vector<std::size_t> sample_k_dpp(const DppKernel& kernel, std::size_t k, Rng& rng) {
  if (k == 0) return {};
  if (k > kernel.rank()) {
    throw NumericalError("k-DPP: k=" + std::to_string(k) + " exceeds kernel rank " +
                         std::to_string(kernel.rank()));
  }
  const std::size_t n = kernel.size();
  // k-DPP probabilities are invariant to a common eigenvalue scale; normalizing
  // by lambda_max keeps the polynomial table in range.
  const double lambda_max = kernel.eigenvalues().maxCoeff();
  const Eigen::VectorXd lambda = kernel.eigenvalues() / lambda_max;

  // E(l, m) = e_l of the first m eigenvalues.
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k + 1),
                                            static_cast<Eigen::Index>(n + 1));
  E.row(0).setOnes();
  for (Eigen::Index m = 1; m <= static_cast<Eigen::Index>(n); ++m) {
    for (Eigen::Index l = 1; l <= static_cast<Eigen::Index>(k); ++l) {
      E(l, m) = E(l, m - 1) + lambda[m - 1] * E(l - 1, m - 1);
    }
  }

  // Phase 1: pick k eigenvectors.
  std::vector<Eigen::Index> picked;
  picked.reserve(k);
  auto remaining = static_cast<Eigen::Index>(k);
  for (Eigen::Index m = static_cast<Eigen::Index>(n); m >= 1 && remaining > 0; --m) {
    const double denom = E(remaining, m);
    if (!(denom > 0.0)) continue;
    const double marginal = m == remaining ? 1.0 : lambda[m - 1] * E(remaining - 1, m - 1) / denom;
    if (uniform01(rng) < marginal) {
      picked.push_back(m - 1);
      --remaining;
    }
  }
  if (remaining != 0) throw NumericalError("k-DPP: eigenvector selection underflowed");

  // Phase 2: draw items from the elementary DPP spanned by the picked vectors.
  Eigen::MatrixXd V(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t c = 0; c < k; ++c) V.col(static_cast<Eigen::Index>(c)) = kernel.eigenvectors().col(picked[c]);

  std::vector<std::size_t> items;
  items.reserve(k);
  Eigen::VectorXd mass(static_cast<Eigen::Index>(n));
  while (V.cols() > 0) {
    mass = V.rowwise().squaredNorm();
    for (std::size_t chosen : items) mass[static_cast<Eigen::Index>(chosen)] = 0.0;
    const double total = mass.sum();
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    Eigen::Index item = -1;
    for (Eigen::Index i = 0; i < mass.size(); ++i) {
      if (mass[i] <= 0.0) continue;
      acc += mass[i];
      item = i;
      if (acc > target) break;
    }
    if (item < 0) throw NumericalError("k-DPP: projected mass vanished");
    items.push_back(static_cast<std::size_t>(item));
    if (V.cols() == 1) break;

    Eigen::Index pivot = 0;
    V.row(item).cwiseAbs().maxCoeff(&pivot);
    const Eigen::VectorXd pivot_col = V.col(pivot);
    const Eigen::RowVectorXd coeffs = V.row(item) / V(item, pivot);
    V -= pivot_col * coeffs;
    // Drop the (now zero) pivot column.
    if (pivot != V.cols() - 1) V.col(pivot) = V.col(V.cols() - 1);
    V.conservativeResize(Eigen::NoChange, V.cols() - 1);
    orthonormalize(V);
  }
  if (items.size() != k) throw NumericalError("k-DPP: basis collapsed before k items were drawn");
  std::sort(items.begin(), items.end());
  return items;
}

KDppSample sample_k_dpp(const DppKernel& kernel, std::size_t k, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  KDppSample sample;
  sample.indices = sample_k_dpp(kernel, k, rng);
  sample.seed = seed;
  return sample;
}

}  // namespace groundal

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "groundal/random.hpp"

namespace groundal {

enum class KernelKind { Rbf, GmmModulated, Custom };

inline constexpr std::array<double, 3> kDefaultBandwidthGrid{100.0, 25.0, 4.0};
inline constexpr double kDefaultBandwidth = 4.0;
// Exact subset probabilities are a test-harness facility.
inline constexpr std::size_t kMaxExactSubsetItems = 20;

// Symmetric PSD similarity matrix with its eigendecomposition. Eigenvalues
// below 1e-10 * lambda_max are clamped to zero; if the symmetric solver fails
// the matrix is retried with 1e-9 * I jitter.
class DppKernel {
 public:
  DppKernel(Eigen::MatrixXd matrix, KernelKind kind, double bandwidth = 0.0);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  KernelKind kind() const { return kind_; }
  double bandwidth() const { return bandwidth_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }   // ascending, clamped
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; } // columns
  std::size_t size() const { return static_cast<std::size_t>(matrix_.rows()); }
  std::size_t rank() const { return rank_; }

 private:
  Eigen::MatrixXd matrix_;
  KernelKind kind_;
  double bandwidth_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  std::size_t rank_ = 0;
};

// K[i][j] = exp(-h * |x_i - x_j|^2); rows of X are items.
DppKernel rbf_kernel(const Eigen::MatrixXd& X, double h);

// K1[i][j] = q_i K0[i][j] q_j with q_i = exp(logp_i - max_l logp_l).
DppKernel gmm_modulated_kernel(const DppKernel& base, const Eigen::VectorXd& log_marginals);

// ln det(K_S) - ln det(K + I); -inf when K_S is singular. N <= 20 only.
double subset_log_probability(const DppKernel& kernel, std::span<const std::size_t> subset);

// e_0..e_k of the values, by e_j^(n) = e_j^(n-1) + lambda_n e_{j-1}^(n-1).
std::vector<double> elementary_symmetric(std::span<const double> values, std::size_t k);

struct KDppSample {
  std::vector<std::size_t> indices;  // ascending, k distinct
  std::uint64_t seed = 0;
};

// Exact k-DPP draw: eigenvectors chosen through elementary symmetric
// polynomials, then items drawn by projected mass with the basis
// re-orthogonalized after each pick. Throws NumericalError if k > rank.
KDppSample sample_k_dpp(const DppKernel& kernel, std::size_t k, std::uint64_t seed);
std::vector<std::size_t> sample_k_dpp(const DppKernel& kernel, std::size_t k, Rng& rng);

}  // namespace groundal

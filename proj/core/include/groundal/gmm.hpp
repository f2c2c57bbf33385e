#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace groundal {

enum class CovarianceType { Diagonal, Full };

inline constexpr double kDefaultRegEps = 1e-6;
inline constexpr std::size_t kDefaultComponents = 15;
inline constexpr std::array<std::size_t, 7> kDefaultComponentGrid{5, 10, 15, 20, 25, 30, 35};
// Full covariances are only offered up to this dimension.
inline constexpr std::size_t kMaxFullCovarianceDim = 16;

// A fitted C-component Gaussian mixture over D-dimensional points.
// Immutable once built; the factories validate weights and floor every
// covariance (diagonal) entry at reg_eps.
class GmmModel {
 public:
  static GmmModel diagonal(Eigen::VectorXd weights, Eigen::MatrixXd means,
                           Eigen::MatrixXd variances, double reg_eps = kDefaultRegEps);
  static GmmModel full(Eigen::VectorXd weights, Eigen::MatrixXd means,
                       std::vector<Eigen::MatrixXd> covariances, double reg_eps = kDefaultRegEps);

  std::size_t components() const { return static_cast<std::size_t>(weights_.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(means_.cols()); }
  CovarianceType covariance_type() const { return type_; }
  double reg_eps() const { return reg_eps_; }

  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::MatrixXd& means() const { return means_; }              // C x D
  const Eigen::MatrixXd& variances() const { return variances_; }      // C x D diagonals
  const std::vector<Eigen::MatrixXd>& covariances() const { return full_; }  // Full only

  // ln N(x; mu_c, Sigma_c), mixing weight excluded.
  double component_log_pdf(std::size_t c, const Eigen::VectorXd& x) const;

 private:
  GmmModel() = default;
  void finalize();

  CovarianceType type_ = CovarianceType::Diagonal;
  double reg_eps_ = kDefaultRegEps;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd means_;
  Eigen::MatrixXd variances_;
  std::vector<Eigen::MatrixXd> full_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> cholesky_;
  Eigen::VectorXd log_norm_;  // -0.5 (D ln 2pi + ln det Sigma_c)
};

struct FitReport {
  std::size_t iterations = 0;
  std::vector<double> log_likelihood;  // entry 0 = initial model
  bool converged = false;
};

struct GmmOptions {
  CovarianceType covariance = CovarianceType::Diagonal;
  double reg_eps = kDefaultRegEps;
  std::size_t kmeans_max_iters = 100;
  double kmeans_tol = 1e-6;
  std::size_t em_max_iters = 200;
  double em_tol = 1e-6;  // relative log-likelihood gain
};

// k-means++ seeding then Lloyd iterations; weights are cluster fractions and
// covariances the within-cluster spreads. An empty cluster is re-seeded at the
// point farthest from its assigned center.
GmmModel kmeans_init(const Eigen::MatrixXd& X, std::size_t components, std::uint64_t seed,
                     const GmmOptions& options = {});

std::pair<GmmModel, FitReport> em_fit(const Eigen::MatrixXd& X, const GmmModel& init,
                                      std::size_t max_iters, double tol);
std::pair<GmmModel, FitReport> em_fit(const Eigen::MatrixXd& X, const GmmModel& init,
                                      const GmmOptions& options = {});

// kmeans_init followed by em_fit.
std::pair<GmmModel, FitReport> fit_gmm(const Eigen::MatrixXd& X, std::size_t components,
                                       std::uint64_t seed, const GmmOptions& options = {});

// Entry c = ln w_c + ln N(x; mu_c, Sigma_c).
Eigen::VectorXd component_log_densities(const GmmModel& model, const Eigen::VectorXd& x);
// Row i = component_log_densities(model, X.row(i)).
Eigen::MatrixXd component_log_densities(const GmmModel& model, const Eigen::MatrixXd& X);

double marginal_log_probability(const GmmModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd marginal_log_probabilities(const GmmModel& model, const Eigen::MatrixXd& X);

// Posterior component probabilities, N x C; rows sum to 1.
Eigen::MatrixXd responsibilities(const GmmModel& model, const Eigen::MatrixXd& X);

double total_log_likelihood(const GmmModel& model, const Eigen::MatrixXd& X);

// Held-out mean log-likelihood over `folds` folds for each grid entry;
// returns the argmax, ties to the smaller count.
std::size_t select_components_cv(const Eigen::MatrixXd& X, std::span<const std::size_t> grid,
                                 std::size_t folds, std::uint64_t seed,
                                 const GmmOptions& options = {});

std::string gmm_to_json(const GmmModel& model);

}  // namespace groundal

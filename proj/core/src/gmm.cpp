#include "groundal/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "groundal/error.hpp"
#include "groundal/random.hpp"
#include "groundal/stats.hpp"

namespace groundal {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_weights(const Eigen::VectorXd& w) {
  if (w.size() == 0) throw ValidationError("GMM needs at least one component");
  if ((w.array() < 0.0).any() || !w.allFinite()) {
    throw ValidationError("GMM weights must be finite and non-negative");
  }
  if (std::abs(w.sum() - 1.0) > 1e-9) throw ValidationError("GMM weights must sum to 1");
}

void check_dim(const GmmModel& m, Eigen::Index d) {
  if (static_cast<std::size_t>(d) != m.dim()) {
    throw ValidationError("point dimension " + std::to_string(d) + " does not match GMM dimension " +
                          std::to_string(m.dim()));
  }
}

double squared_distance(const Eigen::MatrixXd& X, Eigen::Index i, const Eigen::RowVectorXd& c) {
  return (X.row(i) - c).squaredNorm();
}

struct EStep {
  Eigen::MatrixXd resp;
  double log_likelihood = 0.0;
};

EStep e_step(const GmmModel& model, const Eigen::MatrixXd& X) {
  EStep out;
  out.resp = component_log_densities(model, X);
  out.log_likelihood = 0.0;
  for (Eigen::Index i = 0; i < out.resp.rows(); ++i) {
    const double lse = log_sum_exp(out.resp.row(i).transpose());
    out.log_likelihood += lse;
    out.resp.row(i) = (out.resp.row(i).array() - lse).exp();
  }
  return out;
}

// Nearest matrix with every eigenvalue >= eps; the constrained maximizer of
// the Gaussian likelihood given a sample covariance.
Eigen::MatrixXd floor_eigenvalues(const Eigen::MatrixXd& cov, double eps) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
  const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(eps);
  return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

GmmModel m_step(const GmmModel& prev, const Eigen::MatrixXd& X, const Eigen::MatrixXd& resp) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const Eigen::Index c_count = resp.cols();
  Eigen::VectorXd mass = resp.colwise().sum().transpose();
  Eigen::VectorXd weights = mass / static_cast<double>(n);
  weights /= weights.sum();
  Eigen::MatrixXd means = prev.means();
  Eigen::MatrixXd vars = prev.variances();
  std::vector<Eigen::MatrixXd> covs = prev.covariances();
  for (Eigen::Index c = 0; c < c_count; ++c) {
    // A component that lost all mass keeps its parameters; its weight is ~0.
    if (!(mass[c] > 1e-300)) continue;
    const Eigen::VectorXd r = resp.col(c);
    const Eigen::RowVectorXd mu = (r.transpose() * X) / mass[c];
    means.row(c) = mu;
    const Eigen::MatrixXd centered = X.rowwise() - mu;
    if (prev.covariance_type() == CovarianceType::Diagonal) {
      vars.row(c) = (r.transpose() * centered.array().square().matrix()) / mass[c];
    } else {
      Eigen::MatrixXd cov = (centered.transpose() * r.asDiagonal() * centered) / mass[c];
      covs[static_cast<std::size_t>(c)] = floor_eigenvalues(cov, prev.reg_eps());
    }
  }
  (void)d;
  if (prev.covariance_type() == CovarianceType::Diagonal) {
    return GmmModel::diagonal(weights, means, vars, prev.reg_eps());
  }
  return GmmModel::full(weights, means, covs, prev.reg_eps());
}

}  // namespace

GmmModel GmmModel::diagonal(Eigen::VectorXd weights, Eigen::MatrixXd means,
                            Eigen::MatrixXd variances, double reg_eps) {
  if (!(reg_eps > 0.0)) throw ValidationError("reg_eps must be positive");
  check_weights(weights);
  if (means.rows() != weights.size() || variances.rows() != weights.size() ||
      variances.cols() != means.cols() || means.cols() == 0) {
    throw ValidationError("GMM parameter shapes are inconsistent");
  }
  if (!means.allFinite() || !variances.allFinite()) {
    throw ValidationError("GMM parameters must be finite");
  }
  GmmModel m;
  m.type_ = CovarianceType::Diagonal;
  m.reg_eps_ = reg_eps;
  m.weights_ = std::move(weights);
  m.means_ = std::move(means);
  m.variances_ = variances.cwiseMax(reg_eps);
  m.finalize();
  return m;
}

GmmModel GmmModel::full(Eigen::VectorXd weights, Eigen::MatrixXd means,
                        std::vector<Eigen::MatrixXd> covariances, double reg_eps) {
  if (!(reg_eps > 0.0)) throw ValidationError("reg_eps must be positive");
  check_weights(weights);
  const Eigen::Index d = means.cols();
  if (means.rows() != weights.size() || covariances.size() != static_cast<std::size_t>(weights.size()) ||
      d == 0) {
    throw ValidationError("GMM parameter shapes are inconsistent");
  }
  if (static_cast<std::size_t>(d) > kMaxFullCovarianceDim) {
    throw ValidationError("full covariance mode supports D <= " +
                          std::to_string(kMaxFullCovarianceDim));
  }
  GmmModel m;
  m.type_ = CovarianceType::Full;
  m.reg_eps_ = reg_eps;
  m.weights_ = std::move(weights);
  m.means_ = std::move(means);
  m.variances_.resize(m.weights_.size(), d);
  for (std::size_t c = 0; c < covariances.size(); ++c) {
    Eigen::MatrixXd& cov = covariances[c];
    if (cov.rows() != d || cov.cols() != d || !cov.allFinite()) {
      throw ValidationError("full covariance has the wrong shape or non-finite entries");
    }
    cov = 0.5 * (cov + cov.transpose());
    for (Eigen::Index j = 0; j < d; ++j) cov(j, j) = std::max(cov(j, j), reg_eps);
    m.variances_.row(static_cast<Eigen::Index>(c)) = cov.diagonal().transpose();
  }
  m.full_ = std::move(covariances);
  m.finalize();
  return m;
}

void GmmModel::finalize() {
  const auto c_count = static_cast<Eigen::Index>(components());
  const double d = static_cast<double>(dim());
  log_norm_.resize(c_count);
  cholesky_.clear();
  for (Eigen::Index c = 0; c < c_count; ++c) {
    double log_det = 0.0;
    if (type_ == CovarianceType::Diagonal) {
      log_det = variances_.row(c).array().log().sum();
    } else {
      Eigen::LLT<Eigen::MatrixXd> llt(full_[static_cast<std::size_t>(c)]);
      if (llt.info() != Eigen::Success) {
        Eigen::MatrixXd jittered = full_[static_cast<std::size_t>(c)];
        jittered.diagonal().array() += reg_eps_;
        llt.compute(jittered);
        if (llt.info() != Eigen::Success) {
          throw NumericalError("full covariance is not positive definite");
        }
        full_[static_cast<std::size_t>(c)] = jittered;
      }
      log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      cholesky_.push_back(std::move(llt));
    }
    log_norm_[c] = -0.5 * (d * kLog2Pi + log_det);
  }
}

double GmmModel::component_log_pdf(std::size_t c, const Eigen::VectorXd& x) const {
  const auto ci = static_cast<Eigen::Index>(c);
  const Eigen::VectorXd diff = x - means_.row(ci).transpose();
  double maha = 0.0;
  if (type_ == CovarianceType::Diagonal) {
    maha = (diff.array().square() / variances_.row(ci).transpose().array()).sum();
  } else {
    maha = cholesky_[c].matrixL().solve(diff).squaredNorm();
  }
  return log_norm_[ci] - 0.5 * maha;
}

Eigen::VectorXd component_log_densities(const GmmModel& model, const Eigen::VectorXd& x) {
  check_dim(model, x.size());
  Eigen::VectorXd out(static_cast<Eigen::Index>(model.components()));
  for (std::size_t c = 0; c < model.components(); ++c) {
    const double w = model.weights()[static_cast<Eigen::Index>(c)];
    out[static_cast<Eigen::Index>(c)] = (w > 0.0 ? std::log(w) : kNegInf) + model.component_log_pdf(c, x);
  }
  return out;
}

Eigen::MatrixXd component_log_densities(const GmmModel& model, const Eigen::MatrixXd& X) {
  check_dim(model, X.cols());
  const auto c_count = static_cast<Eigen::Index>(model.components());
  Eigen::MatrixXd out(X.rows(), c_count);
  if (model.covariance_type() == CovarianceType::Diagonal) {
    // Vectorized diagonal path: one pass per component over all rows.
    for (Eigen::Index c = 0; c < c_count; ++c) {
      const double w = model.weights()[c];
      const double log_w = w > 0.0 ? std::log(w) : kNegInf;
      const Eigen::ArrayXd inv_var = model.variances().row(c).transpose().array().inverse();
      const double log_norm =
          -0.5 * (static_cast<double>(model.dim()) * kLog2Pi + model.variances().row(c).array().log().sum());
      const Eigen::ArrayXd maha =
          ((X.rowwise() - model.means().row(c)).array().square().rowwise() * inv_var.transpose())
              .rowwise()
              .sum();
      out.col(c) = (log_w + log_norm - 0.5 * maha).matrix();
    }
    return out;
  }
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out.row(i) = component_log_densities(model, Eigen::VectorXd(X.row(i).transpose())).transpose();
  }
  return out;
}

double marginal_log_probability(const GmmModel& model, const Eigen::VectorXd& x) {
  return log_sum_exp(component_log_densities(model, x));
}

Eigen::VectorXd marginal_log_probabilities(const GmmModel& model, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd logs = component_log_densities(model, X);
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = log_sum_exp(logs.row(i).transpose());
  return out;
}

Eigen::MatrixXd responsibilities(const GmmModel& model, const Eigen::MatrixXd& X) {
  return e_step(model, X).resp;
}

double total_log_likelihood(const GmmModel& model, const Eigen::MatrixXd& X) {
  return marginal_log_probabilities(model, X).sum();
}

GmmModel kmeans_init(const Eigen::MatrixXd& X, std::size_t components, std::uint64_t seed,
                     const GmmOptions& options) {
  const auto n = static_cast<std::size_t>(X.rows());
  const Eigen::Index d = X.cols();
  if (components < 1) throw ValidationError("kmeans_init: need at least one component");
  if (n < components) {
    throw ValidationError("kmeans_init: " + std::to_string(n) + " points cannot support " +
                          std::to_string(components) + " components");
  }
  if (d == 0 || !X.allFinite()) throw ValidationError("kmeans_init: data must be finite and non-empty");
  const auto k = static_cast<Eigen::Index>(components);

  // k-means++ seeding.
  Rng rng = make_rng(derive_seed(seed, 0x6b6d));
  Eigen::MatrixXd centers(k, d);
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = uniform_index(rng, n);
  centers.row(0) = X.row(static_cast<Eigen::Index>(first));
  chosen[first] = true;
  for (Eigen::Index c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(X, static_cast<Eigen::Index>(i), centers.row(c - 1)));
      total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Every point coincides with a center: take the lowest unused index.
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    chosen[pick] = true;
    centers.row(c) = X.row(static_cast<Eigen::Index>(pick));
  }

  // Lloyd iterations.
  std::vector<Eigen::Index> assign(n, 0);
  std::vector<double> dist(n, 0.0);
  auto assign_points = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      Eigen::Index arg = 0;
      for (Eigen::Index c = 0; c < k; ++c) {
        const double dd = squared_distance(X, static_cast<Eigen::Index>(i), centers.row(c));
        if (dd < best) {
          best = dd;
          arg = c;
        }
      }
      assign[i] = arg;
      dist[i] = best;
    }
  };
  auto reseed_empty = [&](std::vector<std::size_t>& counts) {
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] != 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (dist[i] > dist[far]) far = i;
      }
      --counts[static_cast<std::size_t>(assign[far])];
      assign[far] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      dist[far] = 0.0;
      centers.row(c) = X.row(static_cast<Eigen::Index>(far));
    }
  };
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t iter = 0; iter < options.kmeans_max_iters; ++iter) {
    assign_points();
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(assign[i])];
    const bool any_empty = std::find(counts.begin(), counts.end(), 0) != counts.end();
    if (any_empty) reseed_empty(counts);
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, d);
    for (std::size_t i = 0; i < n; ++i) next.row(assign[i]) += X.row(static_cast<Eigen::Index>(i));
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto cnt = counts[static_cast<std::size_t>(c)];
      next.row(c) = cnt > 0 ? Eigen::RowVectorXd(next.row(c) / static_cast<double>(cnt))
                            : Eigen::RowVectorXd(centers.row(c));
    }
    const double shift = (next - centers).rowwise().norm().maxCoeff();
    centers = next;
    if (shift < options.kmeans_tol && !any_empty) break;
  }
  assign_points();
  std::fill(counts.begin(), counts.end(), 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(assign[i])];
  if (std::find(counts.begin(), counts.end(), 0) != counts.end()) reseed_empty(counts);

  Eigen::VectorXd weights(k);
  Eigen::MatrixXd vars = Eigen::MatrixXd::Zero(k, d);
  std::vector<Eigen::MatrixXd> covs;
  if (options.covariance == CovarianceType::Full) covs.assign(static_cast<std::size_t>(k), Eigen::MatrixXd::Zero(d, d));
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::RowVectorXd diff = X.row(static_cast<Eigen::Index>(i)) - centers.row(assign[i]);
    vars.row(assign[i]) += diff.array().square().matrix();
    if (options.covariance == CovarianceType::Full) {
      covs[static_cast<std::size_t>(assign[i])] += diff.transpose() * diff;
    }
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto cnt = static_cast<double>(counts[static_cast<std::size_t>(c)]);
    weights[c] = cnt / static_cast<double>(n);
    if (cnt > 0) {
      vars.row(c) /= cnt;
      if (options.covariance == CovarianceType::Full) covs[static_cast<std::size_t>(c)] /= cnt;
    }
  }
  weights /= weights.sum();
  if (options.covariance == CovarianceType::Full) {
    for (auto& cov : covs) cov = floor_eigenvalues(cov, options.reg_eps);
    return GmmModel::full(weights, centers, std::move(covs), options.reg_eps);
  }
  return GmmModel::diagonal(weights, centers, vars, options.reg_eps);
}

std::pair<GmmModel, FitReport> em_fit(const Eigen::MatrixXd& X, const GmmModel& init,
                                      std::size_t max_iters, double tol) {
  if (max_iters < 1) throw ValidationError("em_fit: max_iters must be at least 1");
  check_dim(init, X.cols());
  if (X.rows() == 0) throw ValidationError("em_fit: no data");
  FitReport report;
  GmmModel model = init;
  EStep e = e_step(model, X);
  if (!std::isfinite(e.log_likelihood)) {
    throw NumericalError("em_fit: non-finite log-likelihood at iteration 0");
  }
  report.log_likelihood.push_back(e.log_likelihood);
  for (std::size_t it = 1; it <= max_iters; ++it) {
    GmmModel next = m_step(model, X, e.resp);
    EStep next_e = e_step(next, X);
    if (!std::isfinite(next_e.log_likelihood)) {
      throw NumericalError("em_fit: non-finite log-likelihood at iteration " + std::to_string(it));
    }
    report.log_likelihood.push_back(next_e.log_likelihood);
    report.iterations = it;
    const double gain = next_e.log_likelihood - e.log_likelihood;
    model = std::move(next);
    e = std::move(next_e);
    if (gain < tol * std::max(1.0, std::abs(report.log_likelihood[it - 1]))) {
      report.converged = true;
      break;
    }
  }
  return {std::move(model), std::move(report)};
}

std::pair<GmmModel, FitReport> em_fit(const Eigen::MatrixXd& X, const GmmModel& init,
                                      const GmmOptions& options) {
  return em_fit(X, init, options.em_max_iters, options.em_tol);
}

std::pair<GmmModel, FitReport> fit_gmm(const Eigen::MatrixXd& X, std::size_t components,
                                       std::uint64_t seed, const GmmOptions& options) {
  return em_fit(X, kmeans_init(X, components, seed, options), options);
}

std::size_t select_components_cv(const Eigen::MatrixXd& X, std::span<const std::size_t> grid,
                                 std::size_t folds, std::uint64_t seed, const GmmOptions& options) {
  if (grid.empty()) throw ValidationError("select_components_cv: empty grid");
  if (folds < 2) throw ValidationError("select_components_cv: need at least 2 folds");
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < folds) throw ValidationError("select_components_cv: fewer points than folds");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(derive_seed(seed, 0xcf));
  shuffle_in_place(order, rng);

  std::vector<std::size_t> sorted_grid(grid.begin(), grid.end());
  std::sort(sorted_grid.begin(), sorted_grid.end());
  sorted_grid.erase(std::unique(sorted_grid.begin(), sorted_grid.end()), sorted_grid.end());

  std::size_t best_c = sorted_grid.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c : sorted_grid) {
    double score = 0.0;
    for (std::size_t f = 0; f < folds && std::isfinite(score); ++f) {
      std::vector<Eigen::Index> train_rows;
      std::vector<Eigen::Index> test_rows;
      for (std::size_t r = 0; r < n; ++r) {
        (r % folds == f ? test_rows : train_rows).push_back(static_cast<Eigen::Index>(order[r]));
      }
      if (train_rows.size() < c) {
        score = -std::numeric_limits<double>::infinity();
        break;
      }
      const Eigen::MatrixXd train = X(train_rows, Eigen::all);
      const Eigen::MatrixXd test = X(test_rows, Eigen::all);
      try {
        const auto [model, report] = fit_gmm(train, c, derive_seed(seed, f), options);
        score += marginal_log_probabilities(model, test).mean() / static_cast<double>(folds);
      } catch (const NumericalError&) {
        score = -std::numeric_limits<double>::infinity();
      }
    }
    if (score > best_score) {
      best_score = score;
      best_c = c;
    }
  }
  return best_c;
}

std::string gmm_to_json(const GmmModel& model) {
  nlohmann::json j;
  j["components"] = model.components();
  j["dim"] = model.dim();
  j["covariance"] = model.covariance_type() == CovarianceType::Diagonal ? "diagonal" : "full";
  j["reg_eps"] = model.reg_eps();
  j["weights"] = std::vector<double>(model.weights().data(), model.weights().data() + model.weights().size());
  auto rows = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      out.emplace_back(m.cols());
      for (Eigen::Index c = 0; c < m.cols(); ++c) out.back()[static_cast<std::size_t>(c)] = m(r, c);
    }
    return out;
  };
  j["means"] = rows(model.means());
  j["variances"] = rows(model.variances());
  return j.dump();
}

}  // namespace groundal

#include "groundal/stats.hpp"

#include <cmath>
#include <limits>

namespace groundal {

Standardizer Standardizer::fit(const Eigen::MatrixXd& rows) {
  Standardizer s;
  const Eigen::Index d = rows.cols();
  s.mean = Eigen::RowVectorXd::Zero(d);
  s.scale = Eigen::RowVectorXd::Ones(d);
  if (rows.rows() == 0) return s;
  s.mean = rows.colwise().mean();
  for (Eigen::Index j = 0; j < d; ++j) {
    const double var = (rows.col(j).array() - s.mean[j]).square().mean();
    const double sd = std::sqrt(var);
    // Relative cutoff: only spreads that are pure rounding noise count as zero.
    const double ref = std::max(1.0, std::abs(s.mean[j]));
    s.scale[j] = sd > 1e-12 * ref ? sd : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(Eigen::Index dim) {
  Standardizer s;
  s.mean = Eigen::RowVectorXd::Zero(dim);
  s.scale = Eigen::RowVectorXd::Ones(dim);
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& rows) const {
  return (rows.rowwise() - mean).array().rowwise() / scale.array();
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& x) const {
  return ((x.transpose() - mean).array() / scale.array()).transpose();
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

double log_sum_exp(const Eigen::VectorXd& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace groundal

#pragma once

#include <Eigen/Core>

namespace groundal {

// Per-column z-scoring. Columns with (near) zero spread keep scale 1 so they
// map to a constant 0 instead of dividing by zero.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& rows);
  static Standardizer identity(Eigen::Index dim);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::Index dim() const { return mean.size(); }
};

inline Eigen::MatrixXd standardize(const Eigen::MatrixXd& rows) {
  return Standardizer::fit(rows).apply(rows);
}

// Cosine of the angle between a and b; 0 when either is the zero vector.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// ln(sum(exp(v))) with max-shift; -inf for an all -inf input.
double log_sum_exp(const Eigen::VectorXd& v);

}  // namespace groundal

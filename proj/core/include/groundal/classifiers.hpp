#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "groundal/stats.hpp"

namespace groundal {

// Feature rows of one (trait, concept): label 1 and label 0 examples.
struct TrainSet {
  Eigen::MatrixXd positives;
  Eigen::MatrixXd negatives;

  Eigen::Index dim() const { return positives.rows() ? positives.cols() : negatives.cols(); }
  void validate() const;
  // Stacked rows (positives first) and the matching 0/1 labels.
  Eigen::MatrixXd design() const;
  Eigen::VectorXd labels() const;
};

double sigmoid(double z);

struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double l2 = 1.0;
  Standardizer standardizer;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;

  double decision(const Eigen::VectorXd& x) const;  // on raw features
};

struct LogisticOptions {
  std::size_t max_iters = 500;
  double gradient_tol = 1e-5;
  bool standardize = true;
};

// Sum of per-example log-losses plus l2/2 |w|^2 (bias unpenalized), on
// already-standardized rows. Fills the gradient when the pointers are set.
double logistic_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                     double b, double l2, Eigen::VectorXd* grad_w = nullptr,
                     double* grad_b = nullptr);

// Zero-initialized gradient descent with Barzilai-Borwein steps and Armijo
// backtracking. Deterministic, so no seed is taken.
LogisticModel train_logistic(const TrainSet& train, double l2 = 1.0,
                             const LogisticOptions& options = {});

struct LinearSvmModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double c = 1.0;
  double calibration_a = 1.0;  // p = sigmoid(a * margin + b), a > 0
  double calibration_b = 0.0;
  Standardizer standardizer;
  std::size_t epochs = 0;

  double margin(const Eigen::VectorXd& x) const;  // raw hinge score
};

struct SvmOptions {
  std::size_t max_epochs = 1000;
  std::size_t stall_epochs = 50;
  double stall_tol = 1e-12;
};

// |w|^2/2 + c * mean hinge, on standardized rows, labels in {0,1}.
double svm_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                     double b, double c);
double mean_hinge_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                       double b);

LinearSvmModel train_svm(const TrainSet& train, double c = 1.0, const SvmOptions& options = {});

struct MlpParameters {
  Eigen::MatrixXd hidden_weights;  // H x D
  Eigen::VectorXd hidden_bias;     // H
  Eigen::VectorXd output_weights;  // H
  double output_bias = 0.0;

  std::size_t count() const;
  Eigen::VectorXd flatten() const;
  static MlpParameters unflatten(const Eigen::VectorXd& flat, Eigen::Index hidden, Eigen::Index dim);
};

struct MlpModel {
  MlpParameters params;
  Standardizer standardizer;
  std::vector<double> loss_trace;  // one entry per accepted epoch, plus the initial loss
  double final_lr = 0.0;

  double forward(const Eigen::VectorXd& x) const;  // on raw features
};

// Mean binary cross-entropy of a tanh-hidden, sigmoid-output network on
// already-standardized rows; fills `grad` by backpropagation when set.
double mlp_loss(const MlpParameters& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                MlpParameters* grad = nullptr);

// Full-batch gradient descent; a step that raises the loss is rejected and
// the learning rate halved, so loss_trace is non-increasing.
MlpModel train_mlp(const TrainSet& train, std::size_t hidden = 32, std::size_t epochs = 2000,
                   double lr = 0.05, std::uint64_t seed = 0);

enum class ClassifierKind { Logistic, LinearSvm, Mlp };

std::string_view classifier_key(ClassifierKind kind);  // "lr", "svm", "mlp"
std::optional<ClassifierKind> parse_classifier(std::string_view key);

struct ClassifierParams {
  double l2 = 1.0;
  double svm_c = 1.0;
  std::size_t mlp_hidden = 32;
  std::size_t mlp_epochs = 2000;
  double mlp_lr = 0.05;
};

using ConceptClassifier = std::variant<LogisticModel, LinearSvmModel, MlpModel>;

ConceptClassifier train_classifier(ClassifierKind kind, const TrainSet& train,
                                   const ClassifierParams& params, std::uint64_t seed);

double predict_proba(const LogisticModel& model, const Eigen::VectorXd& x);
double predict_proba(const LinearSvmModel& model, const Eigen::VectorXd& x);
double predict_proba(const MlpModel& model, const Eigen::VectorXd& x);
double predict_proba(const ConceptClassifier& model, const Eigen::VectorXd& x);

// Harmonic mean of precision and recall with p >= threshold counted as
// positive; 0 whenever there are no true positives.
double f1_score(std::span<const double> probabilities, std::span<const int> labels,
                double threshold = 0.5);

}  // namespace groundal

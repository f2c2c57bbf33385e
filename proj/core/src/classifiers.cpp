#include "groundal/classifiers.hpp"

#include <algorithm>
#include <cmath>

#include "groundal/error.hpp"
#include "groundal/random.hpp"

namespace groundal {
namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_dim(Eigen::Index expected, Eigen::Index got) {
  if (expected != got) {
    throw ValidationError("feature dimension " + std::to_string(got) + " does not match model dimension " +
                          std::to_string(expected));
  }
}

// Shared optimizer for the logistic objective on prepared rows.
void fit_logistic_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double l2,
                       const LogisticOptions& options, Eigen::VectorXd& w, double& b,
                       std::size_t& iterations, double& grad_norm) {
  const Eigen::Index d = X.cols();
  w = Eigen::VectorXd::Zero(d);
  b = 0.0;
  Eigen::VectorXd gw(d);
  double gb = 0.0;
  double f = logistic_loss(X, y, w, b, l2, &gw, &gb);
  // Lipschitz bound of the gradient for the first step.
  const double lipschitz = 0.25 * (X.squaredNorm() + static_cast<double>(X.rows())) + l2;
  double step = 1.0 / std::max(lipschitz, 1e-12);
  iterations = 0;
  grad_norm = std::sqrt(gw.squaredNorm() + gb * gb);
  Eigen::VectorXd w_new(d);
  Eigen::VectorXd gw_new(d);
  while (iterations < options.max_iters && grad_norm > options.gradient_tol) {
    const double g2 = grad_norm * grad_norm;
    double f_new = 0.0;
    double b_new = 0.0;
    double gb_new = 0.0;
    double trial = step;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      w_new = w - trial * gw;
      b_new = b - trial * gb;
      f_new = logistic_loss(X, y, w_new, b_new, l2, &gw_new, &gb_new);
      if (f_new <= f - 1e-4 * trial * g2) {
        accepted = true;
        break;
      }
      trial *= 0.5;
    }
    ++iterations;
    if (!accepted) break;
    // Barzilai-Borwein step for the next iteration.
    const double sw = (w_new - w).squaredNorm() + (b_new - b) * (b_new - b);
    const double sy = (w_new - w).dot(gw_new - gw) + (b_new - b) * (gb_new - gb);
    step = sy > 0.0 ? sw / sy : trial;
    w = w_new;
    b = b_new;
    gw = gw_new;
    gb = gb_new;
    f = f_new;
    grad_norm = std::sqrt(gw.squaredNorm() + gb * gb);
  }
}

}  // namespace

void TrainSet::validate() const {
  if (positives.rows() == 0 || negatives.rows() == 0) {
    throw ValidationError("training needs at least one positive and one negative example");
  }
  if (positives.cols() != negatives.cols() || positives.cols() == 0) {
    throw ValidationError("positive and negative feature dimensions differ");
  }
  if (!positives.allFinite() || !negatives.allFinite()) {
    throw ValidationError("training features must be finite");
  }
}

Eigen::MatrixXd TrainSet::design() const {
  Eigen::MatrixXd X(positives.rows() + negatives.rows(), dim());
  X << positives, negatives;
  return X;
}

Eigen::VectorXd TrainSet::labels() const {
  Eigen::VectorXd y(positives.rows() + negatives.rows());
  y.head(positives.rows()).setOnes();
  y.tail(negatives.rows()).setZero();
  return y;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logistic_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                     double b, double l2, Eigen::VectorXd* grad_w, double* grad_b) {
  const Eigen::VectorXd z = (X * w).array() + b;
  double loss = 0.5 * l2 * w.squaredNorm();
  Eigen::VectorXd residual(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    loss += softplus(z[i]) - y[i] * z[i];
    residual[i] = sigmoid(z[i]) - y[i];
  }
  if (grad_w) *grad_w = X.transpose() * residual + l2 * w;
  if (grad_b) *grad_b = residual.sum();
  return loss;
}

double LogisticModel::decision(const Eigen::VectorXd& x) const {
  check_dim(weights.size(), x.size());
  return weights.dot(standardizer.apply(x)) + bias;
}

LogisticModel train_logistic(const TrainSet& train, double l2, const LogisticOptions& options) {
  train.validate();
  if (!(l2 >= 0.0)) throw ValidationError("l2 must be non-negative");
  const Eigen::MatrixXd raw = train.design();
  LogisticModel model;
  model.l2 = l2;
  model.standardizer = options.standardize ? Standardizer::fit(raw) : Standardizer::identity(raw.cols());
  fit_logistic_rows(model.standardizer.apply(raw), train.labels(), l2, options, model.weights,
                    model.bias, model.iterations, model.gradient_norm);
  return model;
}

double predict_proba(const LogisticModel& model, const Eigen::VectorXd& x) {
  return sigmoid(model.decision(x));
}

double mean_hinge_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                       double b) {
  const Eigen::VectorXd z = (X * w).array() + b;
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double sign = y[i] > 0.5 ? 1.0 : -1.0;
    total += std::max(0.0, 1.0 - sign * z[i]);
  }
  return total / static_cast<double>(z.size());
}

double svm_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                     double b, double c) {
  return 0.5 * w.squaredNorm() + c * mean_hinge_loss(X, y, w, b);
}

double LinearSvmModel::margin(const Eigen::VectorXd& x) const {
  check_dim(weights.size(), x.size());
  return weights.dot(standardizer.apply(x)) + bias;
}

LinearSvmModel train_svm(const TrainSet& train, double c, const SvmOptions& options) {
  train.validate();
  if (!(c >= 0.0)) throw ValidationError("SVM c must be non-negative");
  const Eigen::MatrixXd raw = train.design();
  const Eigen::VectorXd y = train.labels();
  LinearSvmModel model;
  model.c = c;
  model.standardizer = Standardizer::fit(raw);
  const Eigen::MatrixXd X = model.standardizer.apply(raw);
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const Eigen::VectorXd sign = (2.0 * y.array() - 1.0).matrix();

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  Eigen::VectorXd w_avg = w;
  double b_avg = 0.0;
  double best_obj = svm_objective(X, y, w_avg, b_avg, c);
  std::size_t stall = 0;
  std::size_t epoch = 0;
  for (epoch = 1; epoch <= options.max_epochs; ++epoch) {
    // Full-batch subgradient of |w|^2/2 + c mean hinge; step 1/t matches
    // the unit strong convexity in w.
    const Eigen::VectorXd z = (X * w).array() + b;
    Eigen::VectorXd sw = Eigen::VectorXd::Zero(d);
    double sb = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (sign[i] * z[i] < 1.0) {
        sw += sign[i] * X.row(i).transpose();
        sb += sign[i];
      }
    }
    const double scale = c / static_cast<double>(n);
    const double eta = 1.0 / static_cast<double>(epoch);
    w -= eta * (w - scale * sw);
    b += eta * scale * sb;
    // Running average of the iterates.
    const double t = static_cast<double>(epoch);
    w_avg += (w - w_avg) / t;
    b_avg += (b - b_avg) / t;
    const double obj = svm_objective(X, y, w_avg, b_avg, c);
    if (best_obj - obj > options.stall_tol * std::max(1.0, std::abs(best_obj))) {
      best_obj = obj;
      stall = 0;
    } else if (++stall >= options.stall_epochs) {
      break;
    }
  }
  model.epochs = std::min(epoch, options.max_epochs);
  // Keep whichever of the averaged and last iterate scores better.
  if (svm_objective(X, y, w, b, c) < svm_objective(X, y, w_avg, b_avg, c)) {
    model.weights = w;
    model.bias = b;
  } else {
    model.weights = w_avg;
    model.bias = b_avg;
  }

  // Platt scaling on the training margins, fitted by the logistic trainer.
  const Eigen::VectorXd scores = (X * model.weights).array() + model.bias;
  TrainSet calib;
  calib.positives = scores.head(train.positives.rows());
  calib.negatives = scores.tail(train.negatives.rows());
  const LogisticModel platt = train_logistic(calib, 1e-2);
  const double mu = platt.standardizer.mean[0];
  const double sd = platt.standardizer.scale[0];
  model.calibration_a = std::max(platt.weights[0] / sd, 1e-6);
  model.calibration_b = platt.bias - platt.weights[0] * mu / sd;
  return model;
}

double predict_proba(const LinearSvmModel& model, const Eigen::VectorXd& x) {
  return sigmoid(model.calibration_a * model.margin(x) + model.calibration_b);
}

std::size_t MlpParameters::count() const {
  return static_cast<std::size_t>(hidden_weights.size() + hidden_bias.size() + output_weights.size() + 1);
}

Eigen::VectorXd MlpParameters::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(count()));
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < hidden_weights.cols(); ++c) {
    for (Eigen::Index r = 0; r < hidden_weights.rows(); ++r) flat[k++] = hidden_weights(r, c);
  }
  for (Eigen::Index i = 0; i < hidden_bias.size(); ++i) flat[k++] = hidden_bias[i];
  for (Eigen::Index i = 0; i < output_weights.size(); ++i) flat[k++] = output_weights[i];
  flat[k] = output_bias;
  return flat;
}

MlpParameters MlpParameters::unflatten(const Eigen::VectorXd& flat, Eigen::Index hidden, Eigen::Index dim) {
  MlpParameters p;
  p.hidden_weights.resize(hidden, dim);
  p.hidden_bias.resize(hidden);
  p.output_weights.resize(hidden);
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (Eigen::Index r = 0; r < hidden; ++r) p.hidden_weights(r, c) = flat[k++];
  }
  for (Eigen::Index i = 0; i < hidden; ++i) p.hidden_bias[i] = flat[k++];
  for (Eigen::Index i = 0; i < hidden; ++i) p.output_weights[i] = flat[k++];
  p.output_bias = flat[k];
  return p;
}

double mlp_loss(const MlpParameters& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                MlpParameters* grad) {
  const Eigen::Index n = X.rows();
  // Hidden activations, N x H.
  const Eigen::MatrixXd pre = (X * params.hidden_weights.transpose()).rowwise() +
                              params.hidden_bias.transpose();
  const Eigen::MatrixXd act = pre.array().tanh().matrix();
  const Eigen::VectorXd z = (act * params.output_weights).array() + params.output_bias;
  double loss = 0.0;
  Eigen::VectorXd dz(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += softplus(z[i]) - y[i] * z[i];
    dz[i] = (sigmoid(z[i]) - y[i]) / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (grad) {
    grad->output_weights = act.transpose() * dz;
    grad->output_bias = dz.sum();
    const Eigen::MatrixXd dact = dz * params.output_weights.transpose();
    const Eigen::MatrixXd dpre = dact.array() * (1.0 - act.array().square());
    grad->hidden_weights = dpre.transpose() * X;
    grad->hidden_bias = dpre.colwise().sum().transpose();
  }
  return loss;
}

double MlpModel::forward(const Eigen::VectorXd& x) const {
  check_dim(params.hidden_weights.cols(), x.size());
  const Eigen::VectorXd h =
      (params.hidden_weights * standardizer.apply(x) + params.hidden_bias).array().tanh().matrix();
  return sigmoid(params.output_weights.dot(h) + params.output_bias);
}

MlpModel train_mlp(const TrainSet& train, std::size_t hidden, std::size_t epochs, double lr,
                   std::uint64_t seed) {
  train.validate();
  if (hidden < 1) throw ValidationError("MLP needs at least one hidden unit");
  if (!(lr > 0.0)) throw ValidationError("MLP learning rate must be positive");
  const Eigen::MatrixXd raw = train.design();
  const Eigen::VectorXd y = train.labels();
  MlpModel model;
  model.standardizer = Standardizer::fit(raw);
  const Eigen::MatrixXd X = model.standardizer.apply(raw);
  const auto h = static_cast<Eigen::Index>(hidden);
  const Eigen::Index d = X.cols();

  Rng rng = make_rng(derive_seed(seed, 0x31f));
  MlpParameters& p = model.params;
  p.hidden_weights.resize(h, d);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = 0; r < h; ++r) p.hidden_weights(r, c) = s1 * standard_normal(rng);
  }
  p.hidden_bias = Eigen::VectorXd::Zero(h);
  p.output_weights.resize(h);
  const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
  for (Eigen::Index r = 0; r < h; ++r) p.output_weights[r] = s2 * standard_normal(rng);
  p.output_bias = 0.0;

  MlpParameters grad;
  double loss = mlp_loss(p, X, y, &grad);
  model.loss_trace.push_back(loss);
  double rate = lr;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    MlpParameters next = p;
    next.hidden_weights -= rate * grad.hidden_weights;
    next.hidden_bias -= rate * grad.hidden_bias;
    next.output_weights -= rate * grad.output_weights;
    next.output_bias -= rate * grad.output_bias;
    MlpParameters next_grad;
    const double next_loss = mlp_loss(next, X, y, &next_grad);
    if (!(next_loss <= loss)) {
      rate *= 0.5;
      if (rate < 1e-12) break;
      continue;
    }
    p = std::move(next);
    grad = std::move(next_grad);
    loss = next_loss;
    model.loss_trace.push_back(loss);
  }
  model.final_lr = rate;
  return model;
}

double predict_proba(const MlpModel& model, const Eigen::VectorXd& x) { return model.forward(x); }

std::string_view classifier_key(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::Logistic: return "lr";
    case ClassifierKind::LinearSvm: return "svm";
    case ClassifierKind::Mlp: return "mlp";
  }
  return "unknown";
}

std::optional<ClassifierKind> parse_classifier(std::string_view key) {
  for (ClassifierKind k : {ClassifierKind::Logistic, ClassifierKind::LinearSvm, ClassifierKind::Mlp}) {
    if (classifier_key(k) == key) return k;
  }
  return std::nullopt;
}

ConceptClassifier train_classifier(ClassifierKind kind, const TrainSet& train,
                                   const ClassifierParams& params, std::uint64_t seed) {
  switch (kind) {
    case ClassifierKind::Logistic: return train_logistic(train, params.l2);
    case ClassifierKind::LinearSvm: return train_svm(train, params.svm_c);
    case ClassifierKind::Mlp:
      return train_mlp(train, params.mlp_hidden, params.mlp_epochs, params.mlp_lr, seed);
  }
  throw ValidationError("unknown classifier kind");
}

double predict_proba(const ConceptClassifier& model, const Eigen::VectorXd& x) {
  return std::visit([&](const auto& m) { return predict_proba(m, x); }, model);
}

double f1_score(std::span<const double> probabilities, std::span<const int> labels, double threshold) {
  if (probabilities.size() != labels.size()) throw ValidationError("f1_score: length mismatch");
  if (probabilities.empty()) throw ValidationError("f1_score: empty input");
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("f1_score: labels must be 0 or 1");
    const bool predicted = probabilities[i] >= threshold;
    if (predicted && labels[i] == 1) ++tp;
    if (predicted && labels[i] == 0) ++fp;
    if (!predicted && labels[i] == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

}  // namespace groundal

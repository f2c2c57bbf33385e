#include <doctest.h>

#include <cmath>

#include "groundal/classifiers.hpp"
#include "groundal/error.hpp"
#include "groundal/random.hpp"
#include "oracles.hpp"

using namespace groundal;

namespace {

TrainSet blobs(std::size_t n, std::size_t d, double gap, Rng& rng) {
  TrainSet t;
  t.positives.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  t.negatives.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < t.positives.size(); ++i) {
    t.positives(i) = gap + standard_normal(rng);
    t.negatives(i) = -gap + standard_normal(rng);
  }
  return t;
}

TrainSet one_dimensional(std::initializer_list<double> pos, std::initializer_list<double> neg) {
  TrainSet t;
  t.positives.resize(static_cast<Eigen::Index>(pos.size()), 1);
  t.negatives.resize(static_cast<Eigen::Index>(neg.size()), 1);
  Eigen::Index i = 0;
  for (double v : pos) t.positives(i++, 0) = v;
  i = 0;
  for (double v : neg) t.negatives(i++, 0) = v;
  return t;
}

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

}  // namespace

TEST_CASE("logistic regression separates 1-D data") {
  const LogisticModel m = train_logistic(one_dimensional({1.0}, {-1.0}), 0.1);
  CHECK(predict_proba(m, vec1(-1.0)) < 0.5);
  CHECK(predict_proba(m, vec1(1.0)) > 0.5);
  CHECK(m.gradient_norm <= 1e-5);
}

TEST_CASE("mirror-image classes give a zero bias") {
  const LogisticModel m = train_logistic(one_dimensional({1.0, 2.0, 0.5}, {-1.0, -2.0, -0.5}), 1.0);
  CHECK(std::abs(m.bias) < 1e-6);
}

TEST_CASE("logistic gradient matches central differences") {
  Rng rng = make_rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 20, d = 1 + static_cast<Eigen::Index>(uniform_index(rng, 5));
    Eigen::MatrixXd X(n, d);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) X(i, j) = standard_normal(rng);
      y[i] = bernoulli(rng, 0.5) ? 1.0 : 0.0;
    }
    Eigen::VectorXd theta(d + 1);
    for (Eigen::Index j = 0; j <= d; ++j) theta[j] = standard_normal(rng);
    const double l2 = uniform01(rng);
    auto f = [&](const Eigen::VectorXd& t) { return logistic_loss(X, y, t.head(d), t[d], l2); };
    Eigen::VectorXd gw;
    double gb = 0.0;
    logistic_loss(X, y, theta.head(d), theta[d], l2, &gw, &gb);
    Eigen::VectorXd analytic(d + 1);
    analytic << gw, gb;
    CHECK(oracle::relative_error(analytic, oracle::central_gradient(f, theta)) < 1e-4);
  }
}

TEST_CASE("predict_proba on hand-built models") {
  LogisticModel zero;
  zero.weights = Eigen::VectorXd::Zero(1);
  zero.standardizer = Standardizer::identity(1);
  CHECK(predict_proba(zero, vec1(3.0)) == 0.5);
  LogisticModel unit = zero;
  unit.weights[0] = 1.0;
  CHECK(predict_proba(unit, vec1(std::log(3.0))) == doctest::Approx(0.75).epsilon(1e-14));
  for (double z : {-40.0, -3.0, 0.0, 2.5, 40.0}) CHECK(sigmoid(z) + sigmoid(-z) == doctest::Approx(1.0));
  CHECK_THROWS_AS(predict_proba(unit, Eigen::VectorXd::Zero(2)), ValidationError);
}

TEST_CASE("single-class training is rejected") {
  TrainSet t;
  t.positives = Eigen::MatrixXd::Ones(3, 2);
  t.negatives.resize(0, 2);
  CHECK_THROWS_AS(train_logistic(t), ValidationError);
  CHECK_THROWS_AS(train_svm(t), ValidationError);
  CHECK_THROWS_AS(train_mlp(t), ValidationError);
}

TEST_CASE("logistic predictions ignore positive feature scaling") {
  Rng rng = make_rng(2);
  TrainSet t = blobs(15, 3, 0.5, rng);
  const LogisticModel a = train_logistic(t);
  TrainSet scaled{t.positives * 40.0, t.negatives * 40.0};
  const LogisticModel b = train_logistic(scaled);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x(3);
    for (Eigen::Index j = 0; j < 3; ++j) x[j] = 2.0 * standard_normal(rng);
    CHECK((predict_proba(a, x) >= 0.5) == (predict_proba(b, Eigen::VectorXd(40.0 * x)) >= 0.5));
  }
}

TEST_CASE("training is deterministic") {
  Rng rng = make_rng(3);
  const TrainSet t = blobs(12, 4, 0.4, rng);
  const LogisticModel a = train_logistic(t), b = train_logistic(t);
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
  const LinearSvmModel s1 = train_svm(t), s2 = train_svm(t);
  CHECK(s1.weights == s2.weights);
  CHECK(s1.bias == s2.bias);
  const MlpModel m1 = train_mlp(t, 8, 300, 0.05, 9), m2 = train_mlp(t, 8, 300, 0.05, 9);
  CHECK((m1.params.flatten() - m2.params.flatten()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("linear SVM on separable data") {
  Rng rng = make_rng(4);
  TrainSet t = blobs(20, 2, 4.0, rng);
  const LinearSvmModel m = train_svm(t, 100.0);
  const Eigen::MatrixXd X = m.standardizer.apply(t.design());
  CHECK(mean_hinge_loss(X, t.labels(), m.weights, m.bias) == doctest::Approx(0.0).epsilon(1e-3));
  for (Eigen::Index i = 0; i < t.positives.rows(); ++i) {
    CHECK(m.margin(t.positives.row(i).transpose()) > 0.0);
    CHECK(m.margin(t.negatives.row(i).transpose()) < 0.0);
  }
}

TEST_CASE("duplicating the training set keeps the SVM boundary") {
  Rng rng = make_rng(5);
  const TrainSet t = blobs(10, 3, 0.8, rng);
  TrainSet twice;
  twice.positives.resize(20, 3);
  twice.negatives.resize(20, 3);
  twice.positives << t.positives, t.positives;
  twice.negatives << t.negatives, t.negatives;
  const LinearSvmModel a = train_svm(t), b = train_svm(twice);
  Eigen::VectorXd wa(4), wb(4);
  wa << a.weights, a.bias;
  wb << b.weights, b.bias;
  CHECK((wa / wa.norm() - wb / wb.norm()).norm() < 1e-6);
}

TEST_CASE("SVM with c = 0 predicts one half on balanced labels") {
  const LinearSvmModel m = train_svm(one_dimensional({1.0, 2.0}, {-1.0, -2.0}), 0.0);
  CHECK(m.weights.norm() == 0.0);
  for (double x : {-3.0, 0.0, 5.0}) CHECK(predict_proba(m, vec1(x)) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_THROWS_AS(train_svm(one_dimensional({1.0}, {0.0}), -1.0), ValidationError);
}

TEST_CASE("SVM calibration is increasing in the margin") {
  Rng rng = make_rng(6);
  const LinearSvmModel m = train_svm(blobs(15, 2, 0.3, rng));
  CHECK(m.calibration_a > 0.0);
  double previous = -1.0;
  for (double s = -5.0; s <= 5.0; s += 0.25) {
    const double p = sigmoid(m.calibration_a * s + m.calibration_b);
    CHECK(p > previous);
    previous = p;
  }
}

TEST_CASE("MLP backprop matches central differences") {
  Rng rng = make_rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 12, d = 1 + static_cast<Eigen::Index>(uniform_index(rng, 4));
    const Eigen::Index h = 1 + static_cast<Eigen::Index>(uniform_index(rng, 6));
    Eigen::MatrixXd X(n, d);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) X(i, j) = standard_normal(rng);
      y[i] = bernoulli(rng, 0.5) ? 1.0 : 0.0;
    }
    MlpParameters p;
    p.hidden_weights.resize(h, d);
    p.hidden_bias.resize(h);
    p.output_weights.resize(h);
    for (Eigen::Index i = 0; i < p.hidden_weights.size(); ++i) p.hidden_weights(i) = standard_normal(rng);
    for (Eigen::Index i = 0; i < h; ++i) {
      p.hidden_bias[i] = standard_normal(rng);
      p.output_weights[i] = standard_normal(rng);
    }
    p.output_bias = standard_normal(rng);
    MlpParameters g;
    mlp_loss(p, X, y, &g);
    auto f = [&](const Eigen::VectorXd& flat) { return mlp_loss(MlpParameters::unflatten(flat, h, d), X, y); };
    CHECK(oracle::relative_error(g.flatten(), oracle::central_gradient(f, p.flatten())) < 1e-3);
  }
}

TEST_CASE("MLP learns XOR") {
  TrainSet t;
  t.positives.resize(2, 2);
  t.negatives.resize(2, 2);
  t.positives << 0, 1, 1, 0;
  t.negatives << 0, 0, 1, 1;
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MlpModel m = train_mlp(t, 8, 5000, 0.5, seed);
    bool ok = true;
    for (Eigen::Index i = 0; i < 2; ++i) {
      ok = ok && m.forward(t.positives.row(i).transpose()) >= 0.5;
      ok = ok && m.forward(t.negatives.row(i).transpose()) < 0.5;
    }
    if (ok) ++solved;
  }
  CHECK(solved >= 8);
}

TEST_CASE("MLP loss never increases during training") {
  Rng rng = make_rng(8);
  const MlpModel m = train_mlp(blobs(20, 3, 0.5, rng));
  REQUIRE(m.loss_trace.size() >= 2);
  for (std::size_t i = 1; i < m.loss_trace.size(); ++i) CHECK(m.loss_trace[i] <= m.loss_trace[i - 1]);
  CHECK(m.params.flatten().allFinite());
}

TEST_CASE("MLP with one hidden unit separates like logistic regression") {
  Rng rng = make_rng(9);
  const TrainSet t = blobs(20, 2, 3.0, rng);
  const MlpModel m = train_mlp(t, 1, 2000, 0.05, 1);
  const LogisticModel lr = train_logistic(t);
  for (Eigen::Index i = 0; i < t.positives.rows(); ++i) {
    for (const Eigen::MatrixXd* rows : {&t.positives, &t.negatives}) {
      const Eigen::VectorXd x = rows->row(i).transpose();
      CHECK((m.forward(x) >= 0.5) == (predict_proba(lr, x) >= 0.5));
    }
  }
}

TEST_CASE("F1 score examples") {
  const std::vector<int> labels{1, 1, 1, 0, 0};
  CHECK(f1_score(std::vector<double>{0.9, 0.8, 0.7, 0.1, 0.2}, labels) == 1.0);
  CHECK(f1_score(std::vector<double>{0.1, 0.1, 0.1, 0.1, 0.1}, labels) == 0.0);
  CHECK(f1_score(std::vector<double>{0.9, 0.9, 0.1, 0.9, 0.1}, labels) == doctest::Approx(2.0 / 3.0));
  CHECK(f1_score(std::vector<double>{0.6, 0.4}, std::vector<int>{1, 0}, 0.7) == 0.0);
  CHECK_THROWS_AS(f1_score(std::vector<double>{}, std::vector<int>{}), ValidationError);
  CHECK_THROWS_AS(f1_score(std::vector<double>{0.5}, std::vector<int>{1, 0}), ValidationError);
}

TEST_CASE("classifier dispatch") {
  Rng rng = make_rng(10);
  const TrainSet t = blobs(10, 2, 2.0, rng);
  for (ClassifierKind k : {ClassifierKind::Logistic, ClassifierKind::LinearSvm, ClassifierKind::Mlp}) {
    CHECK(parse_classifier(classifier_key(k)) == k);
    ClassifierParams p;
    p.mlp_epochs = 200;
    const ConceptClassifier c = train_classifier(k, t, p, 3);
    const double hi = predict_proba(c, Eigen::Vector2d(2.0, 2.0));
    const double lo = predict_proba(c, Eigen::Vector2d(-2.0, -2.0));
    CHECK(hi > 0.5);
    CHECK(lo < 0.5);
    CHECK(hi < 1.0);
    CHECK(lo > 0.0);
  }
  CHECK_FALSE(parse_classifier("knn").has_value());
}

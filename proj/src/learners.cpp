#include "rework/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rework/errors.hpp"
#include "rework/parallel.hpp"
#include "rework/rng.hpp"

namespace rework {

namespace {

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

Eigen::VectorXd select(const Eigen::VectorXd& v, const std::vector<std::size_t>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out[static_cast<Eigen::Index>(r)] = v[static_cast<Eigen::Index>(rows[r])];
  }
  return out;
}

LinearModel fit_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2) {
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  LinearModel model;
  if (l2 > 0.0) {
    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += l2;
    model.coef = gram.ldlt().solve(xc.transpose() * yc);
  } else {
    model.coef = xc.colPivHouseholderQr().solve(yc);
  }
  model.intercept = y_mean - x_mean.dot(model.coef);
  return model;
}

// Penalized logistic regression by Newton steps on standardized features.
LinearModel fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::RowVectorXd mu = x.colwise().mean();
  Eigen::RowVectorXd sd = ((x.rowwise() - mu).array().square().colwise().sum() /
                           static_cast<double>(n)).sqrt();
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(sd[j] > 0.0)) sd[j] = 1.0;
  Eigen::MatrixXd z(n, d + 1);
  z.col(0).setOnes();
  z.rightCols(d) = ((x.rowwise() - mu).array().rowwise() / sd.array()).matrix();

  // A small floor on the penalty keeps separable data from diverging.
  const double lambda = std::max(l2, 1e-4);
  auto objective = [&](const Eigen::VectorXd& w) {
    const Eigen::VectorXd eta = z * w;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // log(1 + exp(eta)) - y * eta, computed stably
      const double e = eta[i];
      loss += (e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e))) - y[i] * e;
    }
    return loss + 0.5 * lambda * w.tail(d).squaredNorm();
  };

  const double p0 = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  w[0] = std::log(p0 / (1.0 - p0));
  double current = objective(w);
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd eta = z * w;
    Eigen::VectorXd p(n), weight(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = sigmoid(eta[i]);
      weight[i] = std::max(p[i] * (1.0 - p[i]), 1e-12);
    }
    Eigen::VectorXd grad = z.transpose() * (p - y);
    grad.tail(d) += lambda * w.tail(d);
    Eigen::MatrixXd hess = z.transpose() * weight.asDiagonal() * z;
    hess.diagonal().tail(d).array() += lambda;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    double t = 1.0;
    Eigen::VectorXd candidate = w - step;
    double next = objective(candidate);
    while (next > current && t > 1e-8) {
      t *= 0.5;
      candidate = w - t * step;
      next = objective(candidate);
    }
    const double improvement = current - next;
    w = candidate;
    current = next;
    if (improvement >= 0.0 && improvement < 1e-12 * (1.0 + std::abs(current))) break;
  }
  LinearModel model;
  model.coef = (w.tail(d).array() / sd.transpose().array()).matrix();
  model.intercept = w[0] - mu.dot(model.coef);
  return model;
}

TreeEnsemble fit_forest(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        std::uint64_t seed, int threads) {
  const auto& hp = spec.hyperparameters;
  TreeEnsemble ensemble;
  ensemble.average = true;
  ensemble.trees.resize(static_cast<std::size_t>(hp.n_trees));
  const auto n = static_cast<std::size_t>(x.rows());
  parallel_for(ensemble.trees.size(), threads, [&](std::size_t t) {
    const std::uint64_t tree_seed = derive_seed(seed, t);
    CounterRng rng(tree_seed, 0);
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = rng.below(n);
    std::sort(sample.begin(), sample.end());
    TreeGrowOptions options{hp.max_depth, hp.min_leaf, hp.max_features, tree_seed};
    ensemble.trees[t] = grow_tree(x, y, sample, options);
  });
  return ensemble;
}

TreeEnsemble fit_boosting(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          bool is_classifier, std::uint64_t seed) {
  const auto& hp = spec.hyperparameters;
  const Eigen::Index n = x.rows();
  TreeEnsemble ensemble;
  ensemble.learning_rate = hp.learning_rate;
  ensemble.logit_link = is_classifier;
  std::vector<std::size_t> rows(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;

  Eigen::VectorXd score(n);
  if (is_classifier) {
    const double p0 = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
    ensemble.base = std::log(p0 / (1.0 - p0));
  } else {
    ensemble.base = y.mean();
  }
  score.setConstant(ensemble.base);
  Eigen::VectorXd residual(n), hessian(n);
  for (int t = 0; t < hp.n_trees; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (is_classifier) {
        const double p = sigmoid(score[i]);
        residual[i] = y[i] - p;
        hessian[i] = p * (1.0 - p);
      } else {
        residual[i] = y[i] - score[i];
      }
    }
    TreeGrowOptions options{hp.max_depth, hp.min_leaf, hp.max_features,
                            derive_seed(seed, static_cast<std::uint64_t>(t))};
    RegressionTree tree = grow_tree(x, residual, rows, options, is_classifier ? &hessian : nullptr);
    for (Eigen::Index i = 0; i < n; ++i) score[i] += hp.learning_rate * tree.predict_row(x.row(i));
    ensemble.trees.push_back(std::move(tree));
  }
  return ensemble;
}

}  // namespace

std::string to_string(LearnerFamily f) {
  switch (f) {
    case LearnerFamily::linear: return "linear";
    case LearnerFamily::logistic: return "logistic";
    case LearnerFamily::random_forest: return "random_forest";
    case LearnerFamily::gradient_boosting: return "gradient_boosting";
  }
  return "";
}

LearnerFamily parse_learner_family(const std::string& s) {
  if (s == "linear") return LearnerFamily::linear;
  if (s == "logistic") return LearnerFamily::logistic;
  if (s == "random_forest") return LearnerFamily::random_forest;
  if (s == "gradient_boosting") return LearnerFamily::gradient_boosting;
  throw ConfigError("unknown learner family '" + s + "'");
}

namespace {
void validate_hyperparameters(const Hyperparameters& hp) {
  if (hp.n_trees < 1) throw ConfigError("learner: n_trees must be >= 1");
  if (hp.max_depth < 1) throw ConfigError("learner: max_depth must be >= 1");
  if (!(hp.learning_rate > 0.0 && hp.learning_rate <= 1.0)) {
    throw ConfigError("learner: learning_rate must be in (0, 1]");
  }
  if (hp.min_leaf < 1) throw ConfigError("learner: min_leaf must be >= 1");
  if (!(hp.l2 >= 0.0) || !std::isfinite(hp.l2)) throw ConfigError("learner: l2 must be >= 0");
  if (hp.max_features < 0) throw ConfigError("learner: max_features must be >= 0");
}
}  // namespace

void LearnerSpec::validate() const {
  validate_hyperparameters(hyperparameters);
  for (const auto& hp : tuning_grid) validate_hyperparameters(hp);
}

FittedLearner::FittedLearner(LearnerSpec spec, bool is_classifier, std::size_t n_features,
                             State state, bool logistic_link)
    : spec_(std::move(spec)), is_classifier_(is_classifier), n_features_(n_features),
      state_(std::move(state)), logistic_link_(logistic_link) {}

Eigen::VectorXd FittedLearner::predict_raw(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != n_features_ && x.rows() > 0) {
    throw ShapeError("predict: model expects " + std::to_string(n_features_) + " features, got " +
                     std::to_string(x.cols()));
  }
  Eigen::VectorXd out(x.rows());
  if (x.rows() == 0) return out;
  if (const auto* lin = std::get_if<LinearModel>(&state_)) {
    out = (x * lin->coef).array() + lin->intercept;
    if (logistic_link_) out = out.unaryExpr([](double z) { return sigmoid(z); });
    return out;
  }
  const auto& ens = std::get<TreeEnsemble>(state_);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double acc = 0.0;
    for (const auto& tree : ens.trees) acc += tree.predict_row(x.row(i));
    double v = ens.average ? acc / static_cast<double>(ens.trees.size())
                           : ens.base + ens.learning_rate * acc;
    if (ens.logit_link) v = sigmoid(v);
    out[i] = v;
  }
  return out;
}

FittedLearner fit(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& target,
                  bool is_classifier, std::uint64_t seed, int threads) {
  spec.validate();
  if (x.rows() != target.size()) throw ShapeError("fit: x and target row counts differ");
  if (x.rows() < 1) throw FitError("fit: no training rows");
  if (!x.allFinite() || !target.allFinite()) throw FitError("fit: non-finite training data");
  if (is_classifier) {
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      if (target[i] == 0.0) has0 = true;
      else if (target[i] == 1.0) has1 = true;
      else throw FitError("fit: classifier targets must be 0 or 1");
    }
    if (!has0 || !has1) throw FitError("fit: classifier target has a single class");
  }
  const auto d = static_cast<std::size_t>(x.cols());
  const auto& hp = spec.hyperparameters;
  FittedLearner::State state;
  bool logistic_link = false;
  switch (spec.family) {
    case LearnerFamily::linear:
      state = fit_least_squares(x, target, hp.l2);
      break;
    case LearnerFamily::logistic:
      if (!is_classifier) throw ConfigError("fit: the logistic family is classification-only");
      state = fit_logistic(x, target, hp.l2);
      logistic_link = true;
      break;
    case LearnerFamily::random_forest:
      state = fit_forest(spec, x, target, seed, threads);
      break;
    case LearnerFamily::gradient_boosting:
      state = fit_boosting(spec, x, target, is_classifier, seed);
      break;
  }
  FittedLearner model(spec, is_classifier, d, std::move(state), logistic_link);
  if (is_classifier) {
    const Eigen::VectorXd raw = model.predict_raw(x);
    model.set_clamped_count(static_cast<std::size_t>((raw.array() < 0.0 || raw.array() > 1.0).count()));
  }
  return model;
}

Eigen::VectorXd predict(const FittedLearner& model, const Eigen::MatrixXd& x) {
  Eigen::VectorXd out = model.predict_raw(x);
  if (model.is_classifier()) out = out.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

double rmse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& truth) {
  if (prediction.size() != truth.size()) throw ShapeError("rmse: length mismatch");
  if (prediction.size() == 0) return 0.0;
  return std::sqrt((prediction - truth).squaredNorm() / static_cast<double>(prediction.size()));
}

double log_loss(const Eigen::VectorXd& probability, const Eigen::VectorXd& label) {
  if (probability.size() != label.size()) throw ShapeError("log_loss: length mismatch");
  if (probability.size() == 0) return 0.0;
  constexpr double kEps = 1e-15;
  double total = 0.0;
  for (Eigen::Index i = 0; i < label.size(); ++i) {
    const double p = std::clamp(probability[i], kEps, 1.0 - kEps);
    total -= label[i] * std::log(p) + (1.0 - label[i]) * std::log(1.0 - p);
  }
  return total / static_cast<double>(label.size());
}

double cross_validated_loss(const LearnerSpec& spec, const Eigen::MatrixXd& x,
                            const Eigen::VectorXd& target, const FoldAssignment& folds,
                            bool is_classifier, std::uint64_t seed, int threads) {
  if (folds.fold_of.size() != static_cast<std::size_t>(x.rows())) {
    throw ShapeError("tune: fold assignment does not match the data");
  }
  Eigen::VectorXd oof(x.rows());
  for (int f = 0; f < folds.k; ++f) {
    const auto train = folds.rows_outside(f);
    const auto test = folds.rows_in(f);
    const FittedLearner model = fit(spec, select_rows(x, train), select(target, train),
                                    is_classifier, derive_seed(seed, static_cast<std::uint64_t>(f)),
                                    threads);
    const Eigen::VectorXd pred = predict(model, select_rows(x, test));
    for (std::size_t r = 0; r < test.size(); ++r) {
      oof[static_cast<Eigen::Index>(test[r])] = pred[static_cast<Eigen::Index>(r)];
    }
  }
  return is_classifier ? log_loss(oof, target) : rmse(oof, target);
}

LearnerSpec tune(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& target,
                 const FoldAssignment& folds, bool is_classifier, std::uint64_t seed, int threads) {
  if (spec.tuning_grid.empty()) throw ConfigError("tune: tuning grid is empty");
  spec.validate();
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  for (std::size_t g = 0; g < spec.tuning_grid.size(); ++g) {
    LearnerSpec candidate = spec;
    candidate.hyperparameters = spec.tuning_grid[g];
    candidate.tuning_grid.clear();
    const double loss = cross_validated_loss(candidate, x, target, folds, is_classifier, seed, threads);
    if (loss < best_loss) {
      best_loss = loss;
      best = g;
    }
  }
  LearnerSpec tuned = spec;
  tuned.hyperparameters = spec.tuning_grid[best];
  return tuned;
}

}  // namespace rework

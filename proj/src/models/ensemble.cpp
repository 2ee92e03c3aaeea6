#include <algorithm>
#include <cmath>
#include <iostream>

#include "grow.hpp"
#include "stormcast/error.hpp"
#include "stormcast/rng.hpp"
#include "stormcast/util.hpp"

namespace stormcast {

namespace {

/// AB stage weight when a stage classifies every training row correctly.
const double kMaxStageWeight = std::log(1e10);

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Mean binomial deviance of raw scores F.
double deviance(std::span<const double> f, std::span<const std::uint8_t> labels) {
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    // log(1 + e^F) - y F, computed without overflow
    sum += std::max(f[i], 0.0) + std::log1p(std::exp(-std::abs(f[i]))) - labels[i] * f[i];
  }
  return 2.0 * sum / static_cast<double>(f.size());
}

/// Mean exp(-y' F / 2) with y' in {-1, +1}.
double exponential_loss(std::span<const double> f, std::span<const std::uint8_t> labels) {
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    sum += std::exp(-(labels[i] ? 1.0 : -1.0) * f[i] / 2.0);
  }
  return sum / static_cast<double>(f.size());
}

int hard_vote(double p) { return p > 0.5 ? 1 : 0; }

detail::GrowParams grow_params(const TrainConfig &config, std::size_t rows, std::size_t cols,
                               detail::Criterion criterion, std::uint64_t seed) {
  detail::GrowParams p;
  p.criterion = criterion;
  p.max_depth = config.max_depth;
  p.min_leaf = config.min_leaf.resolve(rows);
  p.max_features = detail::resolve_max_features(config, cols);
  p.seed = seed;
  return p;
}

} // namespace

EnsembleModel train_random_forest(MatrixView x, std::span<const std::uint8_t> labels,
                                  const TrainConfig &config) {
  config.validate();
  detail::check_training(x, labels);
  const std::size_t n = x.rows;
  const std::size_t trees = static_cast<std::size_t>(config.n_estimators);
  EnsembleModel model;
  model.kind = ModelKind::RandomForest;
  model.trees.resize(trees);
  model.weights.assign(trees, 1.0);
  model.tree_seeds.resize(trees);
  for (std::size_t t = 0; t < trees; ++t) {
    model.tree_seeds[t] = mix_seed(config.seed, t);
  }
  const std::vector<double> y(labels.begin(), labels.end());
  parallel_for(trees, config.parallel_jobs, [&](std::size_t t) {
    Rng rng(model.tree_seeds[t]);
    std::vector<double> w(n, config.bootstrap ? 0.0 : 1.0);
    if (config.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) {
        w[static_cast<std::size_t>(rng.below(n))] += 1.0;
      }
    }
    const auto p = grow_params(config, n, x.cols, detail::Criterion::Gini, rng.next_u64());
    model.trees[t] = detail::grow_tree(x, y, w, p);
  });
  return model;
}

EnsembleModel train_adaboost(MatrixView x, std::span<const std::uint8_t> labels,
                             const TrainConfig &config) {
  config.validate();
  detail::check_training(x, labels);
  const std::size_t n = x.rows;
  EnsembleModel model;
  model.kind = ModelKind::AdaBoost;
  const std::vector<double> y(labels.begin(), labels.end());
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  std::vector<double> f(n, 0.0);
  std::vector<int> h(n);
  model.stage_loss.push_back(exponential_loss(f, labels));

  for (int stage = 0; stage < config.n_estimators; ++stage) {
    const auto p = grow_params(config, n, x.cols, detail::Criterion::Gini,
                               mix_seed(config.seed, static_cast<std::uint64_t>(stage)));
    Tree tree = detail::grow_tree(x, y, w, p);
    double err = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = hard_vote(tree.predict(x.row(i)));
      total += w[i];
      if (h[i] != labels[i]) err += w[i];
    }
    err /= total;
    if (err >= 0.5) {
      if (model.trees.empty()) {
        std::cerr << "warning: first AdaBoost stage is no better than chance; model is empty\n";
      }
      break;
    }
    const bool perfect = err <= 0.0;
    const double alpha = perfect ? kMaxStageWeight : config.learning_rate * std::log((1.0 - err) / err);
    model.trees.push_back(std::move(tree));
    model.weights.push_back(alpha);
    model.stage_error.push_back(err);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] += alpha * (h[i] ? 1.0 : -1.0);
    }
    model.stage_loss.push_back(exponential_loss(f, labels));
    if (perfect) {
      break;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (h[i] != labels[i]) w[i] *= std::exp(alpha);
      sum += w[i];
    }
    for (auto &v : w) v /= sum;
  }
  return model;
}

EnsembleModel train_gradient_boosting(MatrixView x, std::span<const std::uint8_t> labels,
                                      const TrainConfig &config) {
  TrainConfig checked = config;
  checked.n_estimators = std::max(1, config.n_estimators);
  checked.validate();
  detail::check_training(x, labels);
  const std::size_t n = x.rows;
  EnsembleModel model;
  model.kind = ModelKind::GradientBoosting;
  model.shrinkage = config.learning_rate;

  double positives = 0.0;
  for (auto l : labels) positives += l;
  // clamp so a one-class training set still has a finite prior
  const double rate = std::clamp(positives / static_cast<double>(n), 1e-12, 1.0 - 1e-12);
  model.initial_log_odds = std::log(rate / (1.0 - rate));

  std::vector<double> f(n, model.initial_log_odds);
  std::vector<double> residual(n);
  std::vector<double> prob(n);
  const std::vector<double> ones(n, 1.0);
  model.stage_loss.push_back(deviance(f, labels));

  for (int stage = 0; stage < config.n_estimators; ++stage) {
    for (std::size_t i = 0; i < n; ++i) {
      prob[i] = sigmoid(f[i]);
      residual[i] = labels[i] - prob[i];
    }
    const auto p = grow_params(config, n, x.cols, detail::Criterion::FriedmanMse,
                               mix_seed(config.seed, static_cast<std::uint64_t>(stage)));
    Tree tree = detail::grow_tree(x, residual, ones, p);

    // one Newton step per leaf: sum r / sum p (1 - p)
    std::vector<double> num(tree.nodes.size(), 0.0);
    std::vector<double> den(tree.nodes.size(), 0.0);
    std::vector<std::size_t> leaf(n);
    for (std::size_t i = 0; i < n; ++i) {
      leaf[i] = tree.leaf_of(x.row(i));
      num[leaf[i]] += residual[i];
      den[leaf[i]] += prob[i] * (1.0 - prob[i]);
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      if (tree.nodes[k].is_leaf()) {
        tree.nodes[k].value = std::abs(den[k]) < 1e-150 ? 0.0 : num[k] / den[k];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      f[i] += model.shrinkage * tree.nodes[leaf[i]].value;
    }
    model.trees.push_back(std::move(tree));
    model.weights.push_back(1.0);
    model.stage_loss.push_back(deviance(f, labels));
  }
  return model;
}

std::vector<double> predict_proba(const EnsembleModel &model, MatrixView x, unsigned jobs) {
  std::vector<double> out(x.rows, 0.0);
  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = (x.rows + kChunk - 1) / kChunk;
  parallel_for(chunks, jobs, [&](std::size_t c) {
    const std::size_t end = std::min(x.rows, (c + 1) * kChunk);
    for (std::size_t r = c * kChunk; r < end; ++r) {
      const auto row = x.row(r);
      double p = 0.0;
      switch (model.kind) {
      case ModelKind::DecisionTree:
      case ModelKind::RandomForest:
        for (const auto &t : model.trees) p += t.predict(row);
        p = model.trees.empty() ? 0.5 : p / static_cast<double>(model.trees.size());
        break;
      case ModelKind::AdaBoost: {
        double vote = 0.0;
        double total = 0.0;
        for (std::size_t t = 0; t < model.trees.size(); ++t) {
          vote += model.weights[t] * (2.0 * hard_vote(model.trees[t].predict(row)) - 1.0);
          total += model.weights[t];
        }
        p = total > 0.0 ? (vote / total + 1.0) / 2.0 : 0.5;
        break;
      }
      case ModelKind::GradientBoosting: {
        double f = model.initial_log_odds;
        for (const auto &t : model.trees) f += model.shrinkage * t.predict(row);
        p = sigmoid(f);
        break;
      }
      case ModelKind::Mlp:
        throw Error(ErrorCode::NotTreeModel, "ensemble payload with MLP kind");
      }
      out[r] = std::clamp(p, 0.0, 1.0);
    }
  });
  return out;
}

std::vector<double> gini_importance(const EnsembleModel &model, std::size_t n_features) {
  std::vector<double> fi(n_features, 0.0);
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const auto &nodes = model.trees[t].nodes;
    if (nodes.empty()) continue;
    const double total = nodes[0].weight;
    for (const auto &k : nodes) {
      if (k.is_leaf()) continue;
      const auto &l = nodes[static_cast<std::size_t>(k.left)];
      const auto &r = nodes[static_cast<std::size_t>(k.right)];
      const double decrease =
          k.impurity - l.weight / k.weight * l.impurity - r.weight / k.weight * r.impurity;
      fi[static_cast<std::size_t>(k.feature)] += model.weights[t] * (k.weight / total) * decrease;
    }
  }
  double sum = 0.0;
  for (auto &v : fi) {
    v = std::max(0.0, v);
    sum += v;
  }
  if (sum > 0.0) {
    for (auto &v : fi) v /= sum;
  }
  return fi;
}

} // namespace stormcast

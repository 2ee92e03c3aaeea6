#include <numeric>

#include "grow.hpp"
#include "stormcast/error.hpp"

namespace stormcast {

namespace {

double accuracy_on(const EnsembleModel &model, MatrixView x, std::span<const std::size_t> rows,
                   std::span<const std::uint8_t> labels, unsigned jobs) {
  std::vector<float> buf;
  buf.reserve(rows.size() * x.cols);
  for (auto r : rows) {
    const auto row = x.row(r);
    buf.insert(buf.end(), row.begin(), row.end());
  }
  const auto p = predict_proba(model, MatrixView(buf.data(), rows.size(), x.cols), jobs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    correct += static_cast<std::uint8_t>(p[i] >= 0.5 ? 1 : 0) == labels[rows[i]] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

EnsembleModel fit(MatrixView x, std::span<const std::uint8_t> y, const TrainConfig &c) {
  switch (c.kind) {
  case ModelKind::RandomForest: return train_random_forest(x, y, c);
  case ModelKind::AdaBoost: return train_adaboost(x, y, c);
  case ModelKind::GradientBoosting: return train_gradient_boosting(x, y, c);
  case ModelKind::DecisionTree: {
    EnsembleModel e;
    e.trees.push_back(train_tree(x, y, c));
    e.weights.push_back(1.0);
    return e;
  }
  case ModelKind::Mlp: break;
  }
  throw Error(ErrorCode::NotTreeModel, "grid search covers tree models only");
}

} // namespace

GridSearchResult grid_search(MatrixView x, std::span<const std::uint8_t> labels,
                             const TrainConfig &base, const ParamGrid &grid, std::size_t folds) {
  if (grid.size() == 0) {
    throw Error(ErrorCode::InvalidArgument, "parameter grid is empty");
  }
  if (folds < 2 || x.rows < folds) {
    throw Error(ErrorCode::InsufficientData,
                std::to_string(x.rows) + " rows cannot be split into " + std::to_string(folds) + " folds");
  }
  detail::check_training(x, labels);

  // contiguous folds, the first (n % k) one row larger
  std::vector<std::size_t> bounds(folds + 1, 0);
  for (std::size_t f = 0; f < folds; ++f) {
    bounds[f + 1] = bounds[f] + x.rows / folds + (f < x.rows % folds ? 1 : 0);
  }
  std::vector<std::vector<float>> train_x(folds);
  std::vector<std::vector<std::uint8_t>> train_y(folds);
  std::vector<std::vector<std::size_t>> test_rows(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    for (std::size_t r = 0; r < x.rows; ++r) {
      if (r >= bounds[f] && r < bounds[f + 1]) {
        test_rows[f].push_back(r);
      } else {
        const auto row = x.row(r);
        train_x[f].insert(train_x[f].end(), row.begin(), row.end());
        train_y[f].push_back(labels[r]);
      }
    }
  }

  GridSearchResult result;
  for (int est : grid.n_estimators) {
    for (int depth : grid.max_depth) {
      for (std::size_t leaf : grid.min_leaf) {
        GridResult entry;
        entry.config = base;
        entry.config.n_estimators = est;
        entry.config.max_depth = depth;
        entry.config.min_leaf = MinLeaf::count(leaf);
        entry.config.validate();
        for (std::size_t f = 0; f < folds; ++f) {
          const MatrixView tx(train_x[f].data(), train_y[f].size(), x.cols);
          const auto model = fit(tx, train_y[f], entry.config);
          entry.fold_scores.push_back(accuracy_on(model, x, test_rows[f], labels, base.parallel_jobs));
        }
        entry.mean_score = std::accumulate(entry.fold_scores.begin(), entry.fold_scores.end(), 0.0) /
                           static_cast<double>(folds);
        if (result.table.empty() || entry.mean_score > result.table[result.best_index].mean_score) {
          result.best_index = result.table.size();
        }
        result.table.push_back(std::move(entry));
      }
    }
  }
  result.best = result.table[result.best_index].config;
  return result;
}

} // namespace stormcast

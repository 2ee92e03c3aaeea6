#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "grow.hpp"
#include "stormcast/error.hpp"
#include "stormcast/rng.hpp"

namespace stormcast {

namespace detail {

namespace {

constexpr double kPureEpsilon = std::numeric_limits<double>::epsilon();

struct Stats {
  double sw = 0.0;
  double swy = 0.0;
  double swyy = 0.0;
  std::size_t n = 0;

  void add(double y, double w) {
    sw += w;
    swy += w * y;
    swyy += w * y * y;
    ++n;
  }
};

double impurity(const Stats &s, Criterion c) {
  if (s.sw <= 0.0) {
    return 0.0;
  }
  const double mean = s.swy / s.sw;
  if (c == Criterion::Gini) {
    return 2.0 * mean * (1.0 - mean);
  }
  return std::max(0.0, s.swyy / s.sw - mean * mean);
}

struct Candidate {
  std::size_t feature = 0;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();
  bool found = false;

  bool beaten_by(std::size_t f, double thr, double s) const {
    if (!found || s > score) return true;
    if (s < score) return false;
    return f < feature || (f == feature && thr < threshold);
  }
};

/// Scans one feature over sorted (value, row) pairs. Returns false when the
/// feature is constant on the node.
bool scan_feature(std::span<const std::pair<float, std::uint32_t>> sorted, std::size_t feature,
                  std::span<const double> y, std::span<const double> w, const Stats &parent,
                  Criterion criterion, std::size_t min_leaf, Candidate &best) {
  const std::size_t n = sorted.size();
  if (sorted.front().first == sorted.back().first) {
    return false;
  }
  const double parent_imp = impurity(parent, criterion);
  Stats left;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto row = sorted[i].second;
    left.add(y[row], w[row]);
    if (sorted[i].first == sorted[i + 1].first) {
      continue;
    }
    const std::size_t nl = i + 1;
    if (nl < min_leaf || n - nl < min_leaf) {
      continue;
    }
    Stats right{parent.sw - left.sw, parent.swy - left.swy, parent.swyy - left.swyy, n - nl};
    if (left.sw <= 0.0 || right.sw <= 0.0) {
      continue;
    }
    double score;
    if (criterion == Criterion::Gini) {
      score = parent_imp - left.sw / parent.sw * impurity(left, criterion) -
              right.sw / parent.sw * impurity(right, criterion);
    } else {
      const double diff = left.swy / left.sw - right.swy / right.sw;
      score = left.sw * right.sw / parent.sw * diff * diff;
    }
    const double threshold =
        (static_cast<double>(sorted[i].first) + static_cast<double>(sorted[i + 1].first)) / 2.0;
    if (best.beaten_by(feature, threshold, score)) {
      best = {feature, threshold, score, true};
    }
  }
  return true;
}

class Grower {
public:
  Grower(MatrixView x, std::span<const double> y, std::span<const double> w, const GrowParams &p)
      : x_(x), y_(y), w_(w), p_(p), rng_(p.seed) {
    for (std::size_t r = 0; r < x.rows; ++r) {
      if (w[r] > 0.0) idx_.push_back(static_cast<std::uint32_t>(r));
    }
    features_.resize(x.cols);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  Tree run() {
    if (idx_.empty()) {
      throw Error(ErrorCode::EmptyTraining, "no rows with positive weight");
    }
    grow(0, idx_.size(), 0);
    return std::move(tree_);
  }

private:
  std::int32_t grow(std::size_t begin, std::size_t end, int depth) {
    Stats s;
    for (std::size_t i = begin; i < end; ++i) {
      s.add(y_[idx_[i]], w_[idx_[i]]);
    }
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    TreeNode node;
    node.samples = static_cast<std::uint32_t>(s.n);
    node.weight = s.sw;
    node.value = s.swy / s.sw;
    node.impurity = impurity(s, p_.criterion);
    tree_.nodes.push_back(node);

    if (depth >= p_.max_depth || s.n < 2 || s.n < 2 * p_.min_leaf || node.impurity <= kPureEpsilon) {
      return id;
    }
    const Candidate best = search(begin, end, s);
    if (!best.found) {
      return id;
    }
    const auto mid = std::partition(idx_.begin() + static_cast<std::ptrdiff_t>(begin),
                                    idx_.begin() + static_cast<std::ptrdiff_t>(end),
                                    [&](std::uint32_t r) {
                                      return static_cast<double>(x_.at(r, best.feature)) <= best.threshold;
                                    });
    const auto split = static_cast<std::size_t>(mid - idx_.begin());
    const auto left = grow(begin, split, depth + 1);
    const auto right = grow(split, end, depth + 1);
    auto &n = tree_.nodes[static_cast<std::size_t>(id)];
    n.feature = static_cast<std::int32_t>(best.feature);
    n.threshold = best.threshold;
    n.left = left;
    n.right = right;
    return id;
  }

  Candidate search(std::size_t begin, std::size_t end, const Stats &s) {
    Candidate best;
    const std::size_t nf = features_.size();
    const bool subsample = p_.max_features > 0 && p_.max_features < nf;
    std::size_t informative = 0;
    // draw features without replacement until enough non-constant ones were seen
    for (std::size_t k = 0; k < nf; ++k) {
      std::size_t f = k;
      if (subsample) {
        const std::size_t j = k + static_cast<std::size_t>(rng_.below(nf - k));
        std::swap(features_[k], features_[j]);
        f = features_[k];
      }
      sorted_.clear();
      for (std::size_t i = begin; i < end; ++i) {
        sorted_.emplace_back(x_.at(idx_[i], f), idx_[i]);
      }
      std::sort(sorted_.begin(), sorted_.end());
      if (scan_feature(sorted_, f, y_, w_, s, p_.criterion, p_.min_leaf, best)) {
        ++informative;
      }
      if (subsample && informative >= p_.max_features) {
        break;
      }
    }
    return best;
  }

  MatrixView x_;
  std::span<const double> y_;
  std::span<const double> w_;
  GrowParams p_;
  Rng rng_;
  std::vector<std::uint32_t> idx_;
  std::vector<std::size_t> features_;
  std::vector<std::pair<float, std::uint32_t>> sorted_;
  Tree tree_;
};

} // namespace

Tree grow_tree(MatrixView x, std::span<const double> y, std::span<const double> w,
               const GrowParams &params) {
  return Grower(x, y, w, params).run();
}

std::size_t resolve_max_features(const TrainConfig &config, std::size_t n_features) {
  if (config.max_features) {
    return std::min<std::size_t>(static_cast<std::size_t>(*config.max_features), n_features);
  }
  if (config.kind == ModelKind::RandomForest) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features))));
  }
  return 0;
}

void check_training(MatrixView x, std::span<const std::uint8_t> labels) {
  if (x.rows == 0 || x.cols == 0) {
    throw Error(ErrorCode::EmptyTraining, "training matrix is empty");
  }
  if (labels.size() != x.rows) {
    throw Error(ErrorCode::SchemaMismatch, "label count does not match the rows");
  }
  for (auto l : labels) {
    if (l > 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
  }
}

} // namespace detail

double gini(std::span<const double> p) {
  if (p.empty()) {
    throw Error(ErrorCode::BadDistribution, "empty distribution");
  }
  double sum = 0.0;
  double sq = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::BadDistribution, "class frequencies must be finite and >= 0");
    }
    sum += v;
    sq += v * v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::BadDistribution, "class frequencies sum to " + std::to_string(sum));
  }
  return std::max(0.0, 1.0 - sq);
}

std::size_t Tree::leaf_of(std::span<const float> row) const noexcept {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto &n = nodes[i];
    i = static_cast<std::size_t>(static_cast<double>(row[static_cast<std::size_t>(n.feature)]) <= n.threshold
                                     ? n.left
                                     : n.right);
  }
  return i;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
  int best = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes[i].is_leaf()) {
      stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
    }
  }
  return best;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode &n) { return n.is_leaf(); }));
}

Split best_split(MatrixView x, std::span<const std::uint8_t> labels,
                 std::span<const std::size_t> rows, std::span<const std::size_t> features) {
  if (rows.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "best_split needs at least 2 rows");
  }
  if (labels.size() != x.rows) {
    throw Error(ErrorCode::SchemaMismatch, "label count does not match the rows");
  }
  std::vector<double> y(x.rows, 0.0);
  std::vector<double> w(x.rows, 1.0);
  detail::Stats parent;
  for (auto r : rows) {
    if (r >= x.rows) throw Error(ErrorCode::OutOfBounds, "row index outside the matrix");
    y[r] = labels[r];
    parent.add(y[r], 1.0);
  }
  if (parent.swy == 0.0 || parent.swy == parent.sw) {
    throw Error(ErrorCode::InvalidArgument, "best_split needs both classes");
  }
  detail::Candidate best;
  std::vector<std::pair<float, std::uint32_t>> sorted;
  for (auto f : features) {
    if (f >= x.cols) throw Error(ErrorCode::OutOfBounds, "feature index outside the matrix");
    sorted.clear();
    for (auto r : rows) sorted.emplace_back(x.at(r, f), static_cast<std::uint32_t>(r));
    std::sort(sorted.begin(), sorted.end());
    detail::scan_feature(sorted, f, y, w, parent, detail::Criterion::Gini, 1, best);
  }
  if (!best.found) {
    throw Error(ErrorCode::NoValidSplit, "all candidate features are constant on these rows");
  }
  return {best.feature, best.threshold, best.score};
}

Tree train_tree(MatrixView x, std::span<const std::uint8_t> labels, const TrainConfig &config) {
  config.validate();
  detail::check_training(x, labels);
  std::vector<double> y(labels.begin(), labels.end());
  std::vector<double> w(x.rows, 1.0);
  detail::GrowParams p;
  p.criterion = detail::Criterion::Gini;
  p.max_depth = config.max_depth;
  p.min_leaf = config.min_leaf.resolve(x.rows);
  p.max_features = detail::resolve_max_features(config, x.cols);
  p.seed = config.seed;
  return detail::grow_tree(x, y, w, p);
}

} // namespace stormcast

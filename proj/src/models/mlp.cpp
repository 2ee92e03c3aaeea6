#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "grow.hpp"
#include "stormcast/error.hpp"
#include "stormcast/rng.hpp"

namespace stormcast {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMatrix>;
using ConstBias = Eigen::Map<const Eigen::RowVectorXd>;

constexpr double kInputSlack = 0.01;

RowMatrix gather(MatrixView x, std::span<const std::size_t> rows) {
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(x.cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = x.row(rows[i]);
    for (std::size_t c = 0; c < x.cols; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = r[c];
    }
  }
  return m;
}

RowMatrix gather_all(MatrixView x) {
  std::vector<std::size_t> rows(x.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return gather(x, rows);
}

Eigen::VectorXd gather_labels(std::span<const std::uint8_t> labels, std::span<const std::size_t> rows) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = labels[rows[i]];
  }
  return y;
}

ConstWeights weights_of(const DenseLayer &l) { return {l.weights.data(), l.outputs, l.inputs}; }
ConstBias bias_of(const DenseLayer &l) { return {l.bias.data(), l.outputs}; }

/// Forward pass keeping pre-activations; returns the output logits.
Eigen::VectorXd forward(const MlpModel &model, const RowMatrix &x, std::vector<RowMatrix> *pre,
                        std::vector<RowMatrix> *act) {
  RowMatrix a = x;
  const double slope = model.leaky_slope;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto &layer = model.layers[l];
    RowMatrix z = a * weights_of(layer).transpose();
    z.rowwise() += bias_of(layer);
    if (act) act->push_back(a);
    if (l + 1 == model.layers.size()) {
      return z.col(0);
    }
    if (pre) pre->push_back(z);
    a = z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  }
  return {};
}

double logit_loss(const Eigen::VectorXd &z, const Eigen::VectorXd &y) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    // softplus(z) - y z
    sum += std::max(z(i), 0.0) + std::log1p(std::exp(-std::abs(z(i)))) - y(i) * z(i);
  }
  return sum / static_cast<double>(z.size());
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Keeps probabilities strictly inside (0, 1).
double open_unit(double p) {
  constexpr double lo = 1e-15;
  return std::clamp(p, lo, 1.0 - lo);
}

double accuracy(const Eigen::VectorXd &z, const Eigen::VectorXd &y) {
  if (z.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    correct += ((z(i) >= 0.0 ? 1.0 : 0.0) == y(i)) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(z.size());
}

MlpGradient backprop(const MlpModel &model, const RowMatrix &x, const Eigen::VectorXd &y) {
  std::vector<RowMatrix> pre;
  std::vector<RowMatrix> act;
  const Eigen::VectorXd z = forward(model, x, &pre, &act);
  const double n = static_cast<double>(x.rows());
  MlpGradient g;
  g.loss = logit_loss(z, y);
  g.accuracy = accuracy(z, y);
  g.weights.resize(model.layers.size());
  g.bias.resize(model.layers.size());

  RowMatrix delta(z.size(), 1);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    delta(i, 0) = (sigmoid(z(i)) - y(i)) / n;
  }
  const double slope = model.leaky_slope;
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const auto &layer = model.layers[l];
    const RowMatrix dw = delta.transpose() * act[l];
    const Eigen::RowVectorXd db = delta.colwise().sum();
    g.weights[l].assign(dw.data(), dw.data() + dw.size());
    g.bias[l].assign(db.data(), db.data() + db.size());
    if (l == 0) break;
    RowMatrix back = delta * weights_of(layer);
    const RowMatrix &zprev = pre[l - 1];
    for (Eigen::Index i = 0; i < back.rows(); ++i) {
      for (Eigen::Index j = 0; j < back.cols(); ++j) {
        if (zprev(i, j) <= 0.0) back(i, j) *= slope;
      }
    }
    delta = std::move(back);
  }
  return g;
}

void check_normalized(MatrixView x) {
  for (std::size_t i = 0; i < x.rows * x.cols; ++i) {
    const float v = x.data[i];
    if (!(v >= -kInputSlack && v <= 1.0 + kInputSlack)) {
      throw Error(ErrorCode::NonNormalizedInput,
                  "MLP input " + std::to_string(v) + " at row " + std::to_string(i / x.cols) +
                      " is outside [0, 1]");
    }
  }
}

} // namespace

MlpModel init_mlp(std::size_t inputs, const MlpConfig &config, std::uint64_t seed) {
  MlpModel model;
  model.leaky_slope = config.leaky_slope;
  Rng rng(seed);
  int fan_in = static_cast<int>(inputs);
  auto sizes = config.hidden;
  sizes.push_back(1);
  for (int out : sizes) {
    DenseLayer l;
    l.inputs = fan_in;
    l.outputs = out;
    const double limit = std::sqrt(6.0 / (fan_in + out));
    l.weights.resize(static_cast<std::size_t>(fan_in) * out);
    for (auto &w : l.weights) w = static_cast<float>(rng.uniform(-limit, limit));
    l.bias.assign(static_cast<std::size_t>(out), 0.0);
    model.layers.push_back(std::move(l));
    fan_in = out;
  }
  return model;
}

std::vector<double> mlp_forward(const MlpModel &model, MatrixView x) {
  if (model.layers.empty() || static_cast<std::size_t>(model.layers.front().inputs) != x.cols) {
    throw Error(ErrorCode::SchemaMismatch, "MLP input width does not match the matrix");
  }
  std::vector<double> out(x.rows);
  constexpr std::size_t kChunk = 4096;
  std::vector<std::size_t> rows;
  for (std::size_t begin = 0; begin < x.rows; begin += kChunk) {
    rows.resize(std::min(kChunk, x.rows - begin));
    std::iota(rows.begin(), rows.end(), begin);
    const Eigen::VectorXd z = forward(model, gather(x, rows), nullptr, nullptr);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out[begin + i] = open_unit(sigmoid(z(static_cast<Eigen::Index>(i))));
    }
  }
  return out;
}

double mlp_loss(const MlpModel &model, MatrixView x, std::span<const std::uint8_t> labels) {
  std::vector<std::size_t> rows(x.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return logit_loss(forward(model, gather(x, rows), nullptr, nullptr), gather_labels(labels, rows));
}

MlpGradient mlp_gradient(const MlpModel &model, MatrixView x, std::span<const std::uint8_t> labels) {
  std::vector<std::size_t> rows(x.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return backprop(model, gather(x, rows), gather_labels(labels, rows));
}

MlpModel train_mlp(MatrixView x, std::span<const std::uint8_t> labels, const TrainConfig &config,
                   std::optional<MonitorSet> monitor) {
  config.validate();
  detail::check_training(x, labels);
  check_normalized(x);
  const MlpConfig &mc = config.mlp;

  std::vector<std::size_t> train_rows(x.rows);
  std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
  RowMatrix monitor_x;
  Eigen::VectorXd monitor_y;
  if (monitor) {
    if (monitor->x.cols != x.cols || monitor->labels.size() != monitor->x.rows) {
      throw Error(ErrorCode::SchemaMismatch, "monitor set does not match the training matrix");
    }
    check_normalized(monitor->x);
    monitor_x = gather_all(monitor->x);
    std::vector<std::size_t> all(monitor->x.rows);
    std::iota(all.begin(), all.end(), std::size_t{0});
    monitor_y = gather_labels(monitor->labels, all);
  } else {
    Rng split_rng(mix_seed(config.seed, 0x686f6c64));
    for (std::size_t i = train_rows.size(); i > 1; --i) {
      std::swap(train_rows[i - 1], train_rows[static_cast<std::size_t>(split_rng.below(i))]);
    }
    const auto held = static_cast<std::size_t>(std::floor(mc.holdout * static_cast<double>(x.rows)));
    std::vector<std::size_t> monitor_rows;
    if (held > 0 && held < x.rows) {
      monitor_rows.assign(train_rows.end() - static_cast<std::ptrdiff_t>(held), train_rows.end());
      train_rows.resize(x.rows - held);
      std::sort(monitor_rows.begin(), monitor_rows.end());
      std::sort(train_rows.begin(), train_rows.end());
    } else {
      monitor_rows = train_rows;
    }
    monitor_x = gather(x, monitor_rows);
    monitor_y = gather_labels(labels, monitor_rows);
  }

  MlpModel model = init_mlp(x.cols, mc, mix_seed(config.seed, 1));
  std::vector<std::vector<double>> mw, vw, mb, vb;
  for (const auto &l : model.layers) {
    mw.emplace_back(l.weights.size(), 0.0);
    vw.emplace_back(l.weights.size(), 0.0);
    mb.emplace_back(l.bias.size(), 0.0);
    vb.emplace_back(l.bias.size(), 0.0);
  }
  auto adam = [&](std::vector<double> &p, const std::vector<double> &g, std::vector<double> &m,
                  std::vector<double> &v, double step) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = mc.beta1 * m[i] + (1.0 - mc.beta1) * g[i];
      v[i] = mc.beta2 * v[i] + (1.0 - mc.beta2) * g[i] * g[i];
      p[i] -= step * m[i] / (std::sqrt(v[i]) + mc.epsilon);
    }
  };

  Rng shuffle_rng(mix_seed(config.seed, 2));
  long t = 0;
  double best = -1.0;
  int wait = 0;
  std::vector<std::size_t> batch;
  for (int epoch = 1; epoch <= mc.epochs; ++epoch) {
    for (std::size_t i = train_rows.size(); i > 1; --i) {
      std::swap(train_rows[i - 1], train_rows[static_cast<std::size_t>(shuffle_rng.below(i))]);
    }
    double loss_sum = 0.0;
    double correct = 0.0;
    for (std::size_t begin = 0; begin < train_rows.size(); begin += mc.batch_size) {
      const std::size_t end = std::min(train_rows.size(), begin + mc.batch_size);
      batch.assign(train_rows.begin() + static_cast<std::ptrdiff_t>(begin),
                   train_rows.begin() + static_cast<std::ptrdiff_t>(end));
      const RowMatrix bx = gather(x, batch);
      const Eigen::VectorXd by = gather_labels(labels, batch);
      const MlpGradient g = backprop(model, bx, by);
      loss_sum += g.loss * static_cast<double>(batch.size());
      ++t;
      const double step = mc.learning_rate * std::sqrt(1.0 - std::pow(mc.beta2, static_cast<double>(t))) /
                          (1.0 - std::pow(mc.beta1, static_cast<double>(t)));
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        adam(model.layers[l].weights, g.weights[l], mw[l], vw[l], step);
        adam(model.layers[l].bias, g.bias[l], mb[l], vb[l], step);
      }
      correct += g.accuracy * static_cast<double>(batch.size());
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / static_cast<double>(train_rows.size());
    entry.accuracy = correct / static_cast<double>(train_rows.size());
    entry.monitor_accuracy = accuracy(forward(model, monitor_x, nullptr, nullptr), monitor_y);
    model.log.push_back(entry);
    model.stopped_epoch = epoch;
    if (entry.monitor_accuracy - mc.min_delta > best) {
      best = entry.monitor_accuracy;
      wait = 0;
    } else if (++wait >= mc.patience) {
      break;
    }
  }
  // stored weights are float32, so keep the in-memory model identical to a reloaded one
  for (auto &l : model.layers) {
    for (auto &w : l.weights) w = static_cast<float>(w);
    for (auto &b : l.bias) b = static_cast<float>(b);
  }
  return model;
}

} // namespace stormcast

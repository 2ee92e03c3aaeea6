#pragma once

// Slow reference implementations the tests compare the library against.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "stormcast/eval.hpp"
#include "stormcast/features.hpp"
#include "stormcast/models.hpp"

namespace oracle {

using namespace stormcast;

/// Mirror an index into [0, n), repeating until it lands.
inline int mirror(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

/// Direct sliding-window evaluation, one full window per output pixel.
inline std::vector<double> filter(const GridFrame &f, const KernelSpec &k) {
  const int w = f.width(), h = f.height(), r = k.size / 2;
  std::vector<double> weights;
  if (k.kind == KernelKind::Gauss) {
    double total = 0.0;
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        weights.push_back(std::exp(-(dx * dx + dy * dy) / (2.0 * k.sigma * k.sigma)));
        total += weights.back();
      }
    }
    for (auto &v : weights) v /= total;
  }
  std::vector<double> out(f.values.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = k.kind == KernelKind::Max   ? -std::numeric_limits<double>::infinity()
                   : k.kind == KernelKind::Min ? std::numeric_limits<double>::infinity()
                                               : 0.0;
      std::size_t i = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx, ++i) {
          const double v = f.at(mirror(x + dx, w), mirror(y + dy, h));
          switch (k.kind) {
          case KernelKind::Max: acc = std::max(acc, v); break;
          case KernelKind::Min: acc = std::min(acc, v); break;
          case KernelKind::Avg: acc += v / (k.size * k.size); break;
          case KernelKind::Gauss: acc += weights[i] * v; break;
          case KernelKind::Identity: acc = v; break;
          }
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

inline double gini_of(double pos, double n) {
  if (n <= 0) return 0.0;
  const double p = pos / n;
  return 1.0 - p * p - (1 - p) * (1 - p);
}

/// Every feature, every midpoint, every row re-counted: O(N^2 F).
inline Split best_split(MatrixView x, const std::vector<std::uint8_t> &y,
                        const std::vector<std::size_t> &rows, const std::vector<std::size_t> &features) {
  double pos = 0;
  for (auto r : rows) pos += y[r];
  const double n = static_cast<double>(rows.size());
  const double parent = gini_of(pos, n);
  Split best;
  bool found = false;
  for (auto f : features) {
    std::set<float> values;
    for (auto r : rows) values.insert(x.at(r, f));
    std::vector<float> v(values.begin(), values.end());
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      const double t = (static_cast<double>(v[i]) + static_cast<double>(v[i + 1])) / 2.0;
      double nl = 0, pl = 0;
      for (auto r : rows) {
        if (x.at(r, f) <= t) {
          ++nl;
          pl += y[r];
        }
      }
      const double dec = parent - nl / n * gini_of(pl, nl) - (n - nl) / n * gini_of(pos - pl, n - nl);
      // strict improvement keeps the lowest feature, then the lowest threshold
      if (!found || dec > best.decrease + 1e-12) {
        best = {f, t, dec};
        found = true;
      }
    }
  }
  return best;
}

/// Probability that a random positive outranks a random negative (ties count half).
inline double pairwise_auc(const std::vector<double> &s, const std::vector<std::uint8_t> &y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

/// Scans every tile's box for the point; the last row/column own their outer edge.
inline TileIndex tile_scan(const GridGeometry &g, double lat, double lon) {
  const double dlat = (g.lat_max - g.lat_min) / g.height;
  const double dlon = (g.lon_max - g.lon_min) / g.width;
  for (int y = 0; y < g.height; ++y) {
    const double north = g.lat_max - y * dlat, south = north - dlat;
    const bool in_y = lat <= north && (lat > south || (y == g.height - 1 && lat >= south));
    if (!in_y) continue;
    for (int x = 0; x < g.width; ++x) {
      const double west = g.lon_min + x * dlon, east = west + dlon;
      if (lon >= west && (lon < east || (x == g.width - 1 && lon <= east))) return {x, y};
    }
  }
  return {-1, -1};
}

/// Node index reached by every row, following explicit child links.
inline std::vector<std::size_t> route(const Tree &t, MatrixView x, std::size_t row) {
  std::vector<std::size_t> path{0};
  while (!t.nodes[path.back()].is_leaf()) {
    const auto &n = t.nodes[path.back()];
    path.push_back(static_cast<std::size_t>(x.at(row, static_cast<std::size_t>(n.feature)) <= n.threshold ? n.left
                                                                                                          : n.right));
  }
  return path;
}

/// Gini importance rebuilt from routed training rows of an unweighted tree.
inline std::vector<double> routed_importance(const Tree &t, MatrixView x, const std::vector<std::uint8_t> &y) {
  std::vector<double> count(t.nodes.size(), 0), pos(t.nodes.size(), 0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (auto k : route(t, x, r)) {
      count[k] += 1;
      pos[k] += y[r];
    }
  }
  std::vector<double> fi(x.cols, 0.0);
  for (std::size_t k = 0; k < t.nodes.size(); ++k) {
    const auto &n = t.nodes[k];
    if (n.is_leaf()) continue;
    const auto l = static_cast<std::size_t>(n.left), r = static_cast<std::size_t>(n.right);
    fi[static_cast<std::size_t>(n.feature)] += count[k] / count[0] *
                                                (gini_of(pos[k], count[k]) - count[l] / count[k] * gini_of(pos[l], count[l]) -
                                                 count[r] / count[k] * gini_of(pos[r], count[r]));
  }
  double sum = 0;
  for (auto v : fi) sum += v;
  if (sum > 0) {
    for (auto &v : fi) v /= sum;
  }
  return fi;
}

/// Separable-ish two-class data: class 1 shifts the first `informative` features.
struct Dataset {
  std::vector<float> x;
  std::vector<std::uint8_t> y;
  std::size_t rows = 0, cols = 0;
  MatrixView view() const { return MatrixView(x.data(), rows, cols); }
};

inline Dataset make_dataset(std::size_t rows, std::size_t cols, std::uint64_t seed, double shift = 1.5,
                            std::size_t informative = 2) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset d;
  d.rows = rows;
  d.cols = cols;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint8_t label = static_cast<std::uint8_t>(gen() & 1);
    d.y.push_back(label);
    for (std::size_t c = 0; c < cols; ++c) {
      double v = noise(gen);
      if (c < informative && label) v += shift;
      d.x.push_back(static_cast<float>(v));
    }
  }
  return d;
}

/// Cloud-like field of gaussian blobs, translated by (dx, dy) tiles.
inline GridFrame textured(int w, int h, double dx, double dy, double contrast = 120.0) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> px(-8.0, w + 8.0), py(-8.0, h + 8.0), sig(2.0, 6.0), amp(0.3, 1.0);
  struct Blob {
    double x, y, s, a;
  };
  std::vector<Blob> blobs;
  const int count = w * h / 60;
  for (int i = 0; i < count; ++i) blobs.push_back({px(gen), py(gen), sig(gen), amp(gen)});
  const GridGeometry g = GridGeometry::index_space(w, h);
  GridFrame f(g, "test", Timestamp{std::chrono::seconds{1527811200}});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      for (const auto &b : blobs) {
        const double ex = x - dx - b.x, ey = y - dy - b.y;
        v += b.a * std::exp(-(ex * ex + ey * ey) / (2 * b.s * b.s));
      }
      f.at(x, y) = static_cast<float>(contrast * std::min(v, 1.5));
    }
  }
  return f;
}

} // namespace oracle

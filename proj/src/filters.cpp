#include <cmath>
#include <deque>

#include "stormcast/features.hpp"

namespace stormcast {

namespace {

/// Sliding extremum over a padded line with a monotonic deque; `better(a, b)`
/// is true when a should evict b (a >= b for max, a <= b for min).
template <typename Better>
void sliding_extremum(const std::vector<float> &padded, int window, std::vector<float> &out,
                      Better better) {
  std::deque<int> dq;
  const int n = static_cast<int>(padded.size());
  int o = 0;
  for (int i = 0; i < n; ++i) {
    while (!dq.empty() && better(padded[static_cast<std::size_t>(i)],
                                 padded[static_cast<std::size_t>(dq.back())])) {
      dq.pop_back();
    }
    dq.push_back(i);
    if (dq.front() <= i - window) {
      dq.pop_front();
    }
    if (i >= window - 1) {
      out[static_cast<std::size_t>(o++)] = padded[static_cast<std::size_t>(dq.front())];
    }
  }
}

GridFrame extremum_filter(const GridFrame &frame, int size, bool take_max) {
  const int w = frame.width();
  const int h = frame.height();
  const int r = size / 2;
  std::vector<float> rows(frame.values.size());
  std::vector<float> padded;
  std::vector<float> line;

  auto run = [&](std::vector<float> &out_line) {
    if (take_max) {
      sliding_extremum(padded, size, out_line, [](float a, float b) { return a >= b; });
    } else {
      sliding_extremum(padded, size, out_line, [](float a, float b) { return a <= b; });
    }
  };

  line.resize(static_cast<std::size_t>(w));
  padded.resize(static_cast<std::size_t>(w + 2 * r));
  for (int y = 0; y < h; ++y) {
    for (int i = -r; i < w + r; ++i) {
      padded[static_cast<std::size_t>(i + r)] = frame.at(reflect_index(i, w), y);
    }
    run(line);
    std::copy(line.begin(), line.end(), rows.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }

  GridFrame out(frame.geometry, frame.tag, frame.timestamp);
  line.resize(static_cast<std::size_t>(h));
  padded.resize(static_cast<std::size_t>(h + 2 * r));
  for (int x = 0; x < w; ++x) {
    for (int i = -r; i < h + r; ++i) {
      padded[static_cast<std::size_t>(i + r)] =
          rows[static_cast<std::size_t>(reflect_index(i, h)) * w + x];
    }
    run(line);
    for (int y = 0; y < h; ++y) {
      out.at(x, y) = line[static_cast<std::size_t>(y)];
    }
  }
  return out;
}

/// Separable weighted sum with reflect padding; taps has odd length.
GridFrame separable_filter(const GridFrame &frame, const std::vector<double> &taps) {
  const int w = frame.width();
  const int h = frame.height();
  const int r = static_cast<int>(taps.size()) / 2;
  std::vector<double> rows(frame.values.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        acc += taps[static_cast<std::size_t>(k + r)] * frame.at(reflect_index(x + k, w), y);
      }
      rows[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  GridFrame out(frame.geometry, frame.tag, frame.timestamp);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        acc += taps[static_cast<std::size_t>(k + r)] *
               rows[static_cast<std::size_t>(reflect_index(y + k, h)) * w + x];
      }
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

/// Box mean from running sums over the padded line.
GridFrame box_filter(const GridFrame &frame, int size) {
  const int w = frame.width();
  const int h = frame.height();
  const int r = size / 2;
  std::vector<double> rows(frame.values.size());
  std::vector<double> prefix;

  prefix.resize(static_cast<std::size_t>(w + 2 * r + 1));
  for (int y = 0; y < h; ++y) {
    prefix[0] = 0.0;
    for (int i = -r; i < w + r; ++i) {
      prefix[static_cast<std::size_t>(i + r + 1)] =
          prefix[static_cast<std::size_t>(i + r)] + frame.at(reflect_index(i, w), y);
    }
    for (int x = 0; x < w; ++x) {
      rows[static_cast<std::size_t>(y) * w + x] =
          prefix[static_cast<std::size_t>(x + size)] - prefix[static_cast<std::size_t>(x)];
    }
  }

  GridFrame out(frame.geometry, frame.tag, frame.timestamp);
  const double norm = 1.0 / (static_cast<double>(size) * size);
  prefix.resize(static_cast<std::size_t>(h + 2 * r + 1));
  for (int x = 0; x < w; ++x) {
    prefix[0] = 0.0;
    for (int i = -r; i < h + r; ++i) {
      prefix[static_cast<std::size_t>(i + r + 1)] =
          prefix[static_cast<std::size_t>(i + r)] +
          rows[static_cast<std::size_t>(reflect_index(i, h)) * w + x];
    }
    for (int y = 0; y < h; ++y) {
      out.at(x, y) = static_cast<float>(
          (prefix[static_cast<std::size_t>(y + size)] - prefix[static_cast<std::size_t>(y)]) * norm);
    }
  }
  return out;
}

} // namespace

std::string_view kernel_kind_name(KernelKind kind) noexcept {
  switch (kind) {
  case KernelKind::Identity: return "id";
  case KernelKind::Max: return "max";
  case KernelKind::Min: return "min";
  case KernelKind::Avg: return "avg";
  case KernelKind::Gauss: return "gauss";
  }
  return "?";
}

void KernelSpec::validate() const {
  if (size < 1 || size % 2 == 0) {
    throw Error(ErrorCode::BadKernel, "kernel size must be odd and >= 1, got " + std::to_string(size));
  }
  if (kind == KernelKind::Gauss && !(sigma > 0.0 && std::isfinite(sigma))) {
    throw Error(ErrorCode::BadKernel, "gaussian kernel needs sigma > 0");
  }
  if (kind == KernelKind::Identity && size != 1) {
    throw Error(ErrorCode::BadKernel, "identity kernel has size 1");
  }
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  KernelSpec{KernelKind::Gauss, size, sigma}.validate();
  const int r = size / 2;
  std::vector<double> k(static_cast<std::size_t>(size) * size);
  const double norm = 1.0 / (2.0 * M_PI * sigma * sigma);
  double sum = 0.0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      const double g = norm * std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k[static_cast<std::size_t>(y + r) * size + (x + r)] = g;
      sum += g;
    }
  }
  for (auto &v : k) {
    v /= sum;
  }
  return k;
}

GridFrame conv_filter(const GridFrame &frame, const KernelSpec &spec) {
  spec.validate();
  frame.validate();
  if (spec.size == 1) {
    return frame;
  }
  switch (spec.kind) {
  case KernelKind::Identity:
    return frame;
  case KernelKind::Max:
    return extremum_filter(frame, spec.size, true);
  case KernelKind::Min:
    return extremum_filter(frame, spec.size, false);
  case KernelKind::Avg:
    return box_filter(frame, spec.size);
  case KernelKind::Gauss: {
    // the normalised 2-D gaussian is the outer product of normalised 1-D taps
    const int r = spec.size / 2;
    std::vector<double> taps(static_cast<std::size_t>(spec.size));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
      taps[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * spec.sigma * spec.sigma));
      sum += taps[static_cast<std::size_t>(i + r)];
    }
    for (auto &t : taps) {
      t /= sum;
    }
    return separable_filter(frame, taps);
  }
  }
  return frame;
}

} // namespace stormcast

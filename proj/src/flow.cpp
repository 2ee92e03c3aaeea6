#include "stormcast/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace stormcast {

namespace {

/// Scratch raster for the solver. Kept separate from GridFrame so the inner
/// loops see plain contiguous storage.
struct Image {
  int w = 0;
  int h = 0;
  std::vector<float> data;

  Image() = default;
  Image(int width, int height, float fill = 0.0f)
      : w(width), h(height), data(static_cast<std::size_t>(width) * height, fill) {}

  float &operator()(int x, int y) noexcept { return data[static_cast<std::size_t>(y) * w + x]; }
  float operator()(int x, int y) const noexcept { return data[static_cast<std::size_t>(y) * w + x]; }
  std::size_t size() const noexcept { return data.size(); }
};

Image from_frame(const GridFrame &f) {
  Image img(f.width(), f.height());
  img.data = f.values;
  return img;
}

/// Per-axis area-averaging weights from n_in samples to n_out samples.
struct AxisWeights {
  std::vector<std::vector<std::pair<int, float>>> taps;
};

AxisWeights area_weights(int n_in, int n_out) {
  AxisWeights aw;
  aw.taps.resize(static_cast<std::size_t>(n_out));
  const double ratio = static_cast<double>(n_in) / n_out;
  for (int o = 0; o < n_out; ++o) {
    const double lo = o * ratio;
    const double hi = (o + 1) * ratio;
    for (int i = static_cast<int>(std::floor(lo)); i < n_in && i < hi; ++i) {
      const double overlap = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
      if (overlap > 1e-12) {
        aw.taps[o].emplace_back(i, static_cast<float>(overlap / ratio));
      }
    }
  }
  return aw;
}

Image area_resize(const Image &src, int w_out, int h_out) {
  const auto wx = area_weights(src.w, w_out);
  const auto wy = area_weights(src.h, h_out);
  Image tmp(w_out, src.h);
  for (int y = 0; y < src.h; ++y) {
    for (int x = 0; x < w_out; ++x) {
      float acc = 0.0f;
      for (auto [i, wgt] : wx.taps[x]) acc += wgt * src(i, y);
      tmp(x, y) = acc;
    }
  }
  Image out(w_out, h_out);
  for (int y = 0; y < h_out; ++y) {
    for (int x = 0; x < w_out; ++x) {
      float acc = 0.0f;
      for (auto [i, wgt] : wy.taps[y]) acc += wgt * tmp(x, i);
      out(x, y) = acc;
    }
  }
  return out;
}

/// Bilinear sample with replicated borders.
inline float sample(const Image &img, float x, float y) noexcept {
  x = std::clamp(x, 0.0f, static_cast<float>(img.w - 1));
  y = std::clamp(y, 0.0f, static_cast<float>(img.h - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, img.w - 1);
  const int y1 = std::min(y0 + 1, img.h - 1);
  const float ax = x - x0;
  const float ay = y - y0;
  const float top = img(x0, y0) + ax * (img(x1, y0) - img(x0, y0));
  const float bottom = img(x0, y1) + ax * (img(x1, y1) - img(x0, y1));
  return top + ay * (bottom - top);
}

/// Bilinear resize (pixel-centre aligned) used to carry flow to a finer level.
Image bilinear_resize(const Image &src, int w_out, int h_out, float gain) {
  Image out(w_out, h_out);
  const float sx = static_cast<float>(src.w) / w_out;
  const float sy = static_cast<float>(src.h) / h_out;
  for (int y = 0; y < h_out; ++y) {
    const float fy = (y + 0.5f) * sy - 0.5f;
    for (int x = 0; x < w_out; ++x) {
      const float fx = (x + 0.5f) * sx - 0.5f;
      out(x, y) = gain * sample(src, fx, fy);
    }
  }
  return out;
}

void centered_gradient(const Image &img, Image &dx, Image &dy) {
  dx = Image(img.w, img.h);
  dy = Image(img.w, img.h);
  for (int y = 0; y < img.h; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, img.h - 1);
    for (int x = 0; x < img.w; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, img.w - 1);
      dx(x, y) = (img(xp, y) - img(xm, y)) / static_cast<float>(std::max(xp - xm, 1));
      dy(x, y) = (img(x, yp) - img(x, ym)) / static_cast<float>(std::max(yp - ym, 1));
    }
  }
}

/// Forward differences, zero on the last column / row.
void forward_gradient(const Image &u, Image &ux, Image &uy) {
  for (int y = 0; y < u.h; ++y) {
    for (int x = 0; x < u.w; ++x) {
      ux(x, y) = x + 1 < u.w ? u(x + 1, y) - u(x, y) : 0.0f;
      uy(x, y) = y + 1 < u.h ? u(x, y + 1) - u(x, y) : 0.0f;
    }
  }
}

/// Backward-difference divergence; the negative adjoint of forward_gradient.
void divergence(const Image &px, const Image &py, Image &div) {
  for (int y = 0; y < px.h; ++y) {
    for (int x = 0; x < px.w; ++x) {
      float d = px(x, y) + py(x, y);
      if (x > 0) d -= px(x - 1, y);
      if (y > 0) d -= py(x, y - 1);
      div(x, y) = d;
    }
  }
}

void median_filter(Image &u, int ksize) {
  const int r = ksize / 2;
  const Image src = u;
  std::vector<float> window(static_cast<std::size_t>(ksize) * ksize);
  for (int y = 0; y < u.h; ++y) {
    for (int x = 0; x < u.w; ++x) {
      std::size_t n = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = std::clamp(y + dy, 0, u.h - 1);
        for (int dx = -r; dx <= r; ++dx) {
          window[n++] = src(std::clamp(x + dx, 0, u.w - 1), yy);
        }
      }
      auto mid = window.begin() + static_cast<std::ptrdiff_t>(n / 2);
      std::nth_element(window.begin(), mid, window.begin() + static_cast<std::ptrdiff_t>(n));
      u(x, y) = *mid;
    }
  }
}

/// One pyramid level of the duality-based TV-L1 solver (u is refined in place).
void solve_level(const Image &I0, const Image &I1, Image &u1, Image &u2, const FlowParams &p) {
  const int w = I0.w;
  const int h = I0.h;
  const std::size_t n = I0.size();
  const float l_t = static_cast<float>(p.lambda * p.theta);
  const float taut = static_cast<float>(p.tau / p.theta);
  const float theta = static_cast<float>(p.theta);
  const float gamma = static_cast<float>(p.gamma);
  const double stop = p.epsilon * p.epsilon;
  const int median = p.median_filtering <= 0 ? 0 : std::max(3, p.median_filtering | 1);

  Image I1x, I1y;
  centered_gradient(I1, I1x, I1y);

  Image I1w(w, h), I1wx(w, h), I1wy(w, h), grad(w, h), rho_c(w, h);
  Image v1(w, h), v2(w, h), div1(w, h), div2(w, h);
  Image u1x(w, h), u1y(w, h), u2x(w, h), u2y(w, h);
  Image p11(w, h), p12(w, h), p21(w, h), p22(w, h);
  // illumination variable and its duals, only touched when gamma > 0
  Image u3(w, h), v3(w, h), div3(w, h), u3x(w, h), u3y(w, h), p31(w, h), p32(w, h);

  for (int warp_it = 0; warp_it < p.warps; ++warp_it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float sx = x + u1(x, y);
        const float sy = y + u2(x, y);
        I1w(x, y) = sample(I1, sx, sy);
        I1wx(x, y) = sample(I1x, sx, sy);
        I1wy(x, y) = sample(I1y, sx, sy);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const float gx = I1wx.data[i];
      const float gy = I1wy.data[i];
      grad.data[i] = gx * gx + gy * gy;
      rho_c.data[i] = I1w.data[i] - gx * u1.data[i] - gy * u2.data[i] - I0.data[i];
    }

    double error = std::numeric_limits<double>::max();
    for (int outer = 0; error > stop && outer < p.outer_iterations; ++outer) {
      if (median > 0) {
        median_filter(u1, median);
        median_filter(u2, median);
      }
      for (int inner = 0; error > stop && inner < p.inner_iterations; ++inner) {
        // thresholding step on the data term
        for (std::size_t i = 0; i < n; ++i) {
          const float gx = I1wx.data[i];
          const float gy = I1wy.data[i];
          const float g = grad.data[i];
          const float rho = rho_c.data[i] + gx * u1.data[i] + gy * u2.data[i] + gamma * u3.data[i];
          float d1 = 0.0f, d2 = 0.0f, d3 = 0.0f;
          if (rho < -l_t * g) {
            d1 = l_t * gx;
            d2 = l_t * gy;
            d3 = l_t * gamma;
          } else if (rho > l_t * g) {
            d1 = -l_t * gx;
            d2 = -l_t * gy;
            d3 = -l_t * gamma;
          } else if (g > 1e-12f) {
            const float fi = -rho / (g + gamma * gamma);
            d1 = fi * gx;
            d2 = fi * gy;
            d3 = fi * gamma;
          }
          v1.data[i] = u1.data[i] + d1;
          v2.data[i] = u2.data[i] + d2;
          v3.data[i] = u3.data[i] + d3;
        }

        divergence(p11, p12, div1);
        divergence(p21, p22, div2);
        if (gamma > 0.0f) {
          divergence(p31, p32, div3);
        }

        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const float a = v1.data[i] + theta * div1.data[i];
          const float b = v2.data[i] + theta * div2.data[i];
          const float da = a - u1.data[i];
          const float db = b - u2.data[i];
          u1.data[i] = a;
          u2.data[i] = b;
          sq += static_cast<double>(da) * da + static_cast<double>(db) * db;
          if (gamma > 0.0f) {
            const float c = v3.data[i] + theta * div3.data[i];
            const float dc = c - u3.data[i];
            u3.data[i] = c;
            sq += static_cast<double>(dc) * dc;
          }
        }
        error = sq / static_cast<double>(n);

        forward_gradient(u1, u1x, u1y);
        forward_gradient(u2, u2x, u2y);
        for (std::size_t i = 0; i < n; ++i) {
          const float ng1 = 1.0f + taut * std::hypot(u1x.data[i], u1y.data[i]);
          const float ng2 = 1.0f + taut * std::hypot(u2x.data[i], u2y.data[i]);
          p11.data[i] = (p11.data[i] + taut * u1x.data[i]) / ng1;
          p12.data[i] = (p12.data[i] + taut * u1y.data[i]) / ng1;
          p21.data[i] = (p21.data[i] + taut * u2x.data[i]) / ng2;
          p22.data[i] = (p22.data[i] + taut * u2y.data[i]) / ng2;
        }
        if (gamma > 0.0f) {
          forward_gradient(u3, u3x, u3y);
          for (std::size_t i = 0; i < n; ++i) {
            const float ng3 = 1.0f + taut * std::hypot(u3x.data[i], u3y.data[i]);
            p31.data[i] = (p31.data[i] + taut * u3x.data[i]) / ng3;
            p32.data[i] = (p32.data[i] + taut * u3y.data[i]) / ng3;
          }
        }
      }
    }
  }
}

void require_same_grid(const GridFrame &a, const GridFrame &b) {
  if (a.geometry != b.geometry || a.values.size() != b.values.size()) {
    throw Error(ErrorCode::GeometryMismatch,
                "frames '" + a.tag + "' and '" + b.tag + "' have different geometry");
  }
}

} // namespace

// ---------------------------------------------------------------------------

void FlowParams::validate() const {
  const bool ok = tau > 0.0 && lambda > 0.0 && theta > 0.0 && epsilon > 0.0 &&
                  outer_iterations > 0 && inner_iterations > 0 && gamma >= 0.0 && nscales >= 1 &&
                  scale_step > 0.0 && scale_step < 1.0 && warps > 0 && median_filtering >= 0 &&
                  (median_filtering <= 1 || median_filtering % 2 == 1);
  if (!ok) {
    throw Error(ErrorCode::BadConfig, "flow parameters out of range");
  }
}

int effective_scales(int width, int height, const FlowParams &params) {
  int scales = std::max(params.nscales, 1);
  const double min_side = std::min(width, height);
  while (scales > 1 && min_side * std::pow(params.scale_step, scales - 1) < 4.0) {
    --scales;
  }
  return scales;
}

FlowField compute_flow(const GridFrame &prev, const GridFrame &next, const FlowParams &params) {
  require_same_grid(prev, next);
  prev.validate();
  next.validate();
  params.validate();

  const int scales = effective_scales(prev.width(), prev.height(), params);
  std::vector<Image> pyr0{from_frame(prev)};
  std::vector<Image> pyr1{from_frame(next)};
  for (int s = 1; s < scales; ++s) {
    const int w = std::max(1, static_cast<int>(std::lround(pyr0.back().w * params.scale_step)));
    const int h = std::max(1, static_cast<int>(std::lround(pyr0.back().h * params.scale_step)));
    pyr0.push_back(area_resize(pyr0.back(), w, h));
    pyr1.push_back(area_resize(pyr1.back(), w, h));
  }

  Image u1(pyr0.back().w, pyr0.back().h);
  Image u2(pyr0.back().w, pyr0.back().h);
  for (int s = scales - 1; s >= 0; --s) {
    solve_level(pyr0[static_cast<std::size_t>(s)], pyr1[static_cast<std::size_t>(s)], u1, u2, params);
    if (s == 0) {
      break;
    }
    const auto &finer = pyr0[static_cast<std::size_t>(s - 1)];
    const float gain = static_cast<float>(1.0 / params.scale_step);
    u1 = bilinear_resize(u1, finer.w, finer.h, gain);
    u2 = bilinear_resize(u2, finer.w, finer.h, gain);
  }

  return FlowField{prev.geometry, std::move(u1.data), std::move(u2.data)};
}

GridFrame warp(const GridFrame &frame, const FlowField &flow) {
  if (frame.geometry != flow.geometry || flow.u.size() != frame.values.size() ||
      flow.v.size() != frame.values.size()) {
    throw Error(ErrorCode::GeometryMismatch, "flow field does not match frame '" + frame.tag + "'");
  }
  const Image src = from_frame(frame);
  GridFrame out(frame.geometry, frame.tag, frame.timestamp);
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * frame.width() + x;
      out.values[i] = sample(src, x - flow.u[i], y - flow.v[i]);
    }
  }
  return out;
}

GridFrame predict_next_with(const GridFrame &t15, const FlowField &flow) {
  auto predicted = warp(t15, flow);
  predicted.timestamp = t15.timestamp + kWindowLength;
  return predicted;
}

GridFrame predict_next(const GridFrame &t30, const GridFrame &t15, const FlowParams &params) {
  if (t15.timestamp - t30.timestamp != kWindowLength) {
    throw Error(ErrorCode::TimestampGap, "frames " + format_timestamp(t30.timestamp) + " and " +
                                             format_timestamp(t15.timestamp) +
                                             " are not 15 minutes apart");
  }
  return predict_next_with(t15, compute_flow(t30, t15, params));
}

GridFrame error_field(const GridFrame &actual, const GridFrame &predicted) {
  require_same_grid(actual, predicted);
  if (actual.timestamp != predicted.timestamp) {
    throw Error(ErrorCode::TimestampMismatch,
                "actual " + format_timestamp(actual.timestamp) + " vs predicted " +
                    format_timestamp(predicted.timestamp));
  }
  GridFrame out(actual.geometry, actual.tag, actual.timestamp);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = std::fabs(actual.values[i] - predicted.values[i]);
  }
  return out;
}

} // namespace stormcast

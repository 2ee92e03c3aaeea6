#pragma once

#include <vector>

#include "stormcast/raster.hpp"

namespace stormcast {

/// TV-L1 duality solver parameters. Defaults are the values the DWD
/// configuration uses for MSG imagery.
struct FlowParams {
  double tau = 0.1;         // dual step
  double lambda = 0.0005;   // data term weight
  double theta = 0.3;       // coupling between u and v
  double epsilon = 0.001;   // stop when the mean squared update drops below epsilon^2
  int outer_iterations = 10;
  int inner_iterations = 30;
  double gamma = 0.0;       // illumination term; 0 disables it
  int nscales = 7;
  double scale_step = 0.5;
  int warps = 5;
  int median_filtering = 1; // 0 = off, 1 = 3x3, k > 1 odd = k x k

  /// Throws BadConfig.
  void validate() const;
  friend bool operator==(const FlowParams &, const FlowParams &) = default;
};

/// Dense displacement field in tiles per step; (u, v) at pixel p of the
/// previous frame points at its position in the next frame.
struct FlowField {
  GridGeometry geometry;
  std::vector<float> u;
  std::vector<float> v;
};

/// Number of pyramid levels actually used for a given frame size: levels are
/// dropped until the coarsest level keeps min(width, height) >= 4.
int effective_scales(int width, int height, const FlowParams &params);

/// Coarse-to-fine TV-L1 optical flow from `prev` to `next`.
/// Throws GeometryMismatch.
FlowField compute_flow(const GridFrame &prev, const GridFrame &next,
                       const FlowParams &params = {});

/// Backward bilinear warp: out(p) = frame(p - flow(p)), clamped at the edges.
GridFrame warp(const GridFrame &frame, const FlowField &flow);

/// Constant-motion extrapolation of the frame following `t15`, using the flow
/// from `t30` to `t15`. Throws TimestampGap unless the frames are 15 min apart.
GridFrame predict_next(const GridFrame &t30, const GridFrame &t15, const FlowParams &params = {});

/// As predict_next, but with a flow field computed elsewhere (e.g. on a
/// reference channel).
GridFrame predict_next_with(const GridFrame &t15, const FlowField &flow);

/// |actual - predicted| per tile. Throws GeometryMismatch, TimestampMismatch.
GridFrame error_field(const GridFrame &actual, const GridFrame &predicted);

} // namespace stormcast

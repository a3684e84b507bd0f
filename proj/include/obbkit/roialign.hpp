#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "obbkit/box.hpp"
#include "obbkit/error.hpp"

namespace obbkit {

/// One pyramid level: a channels x height x width grid plus its stride
/// (image pixels per cell).
///
/// Storage is a channels x (height*width) column-major matrix, so all channels
/// of one cell are contiguous.
template <typename Scalar>
class FeatureMap {
 public:
  using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  FeatureMap(int channels, int height, int width, Scalar stride)
      : FeatureMap(channels, height, width, stride, Grid::Zero(channels, Eigen::Index(height) * width)) {}

  FeatureMap(int channels, int height, int width, Scalar stride, Grid data)
      : channels_(channels), height_(height), width_(width), stride_(stride), data_(std::move(data)) {
    if (channels < 1 || height < 1 || width < 1) throw ValidationError("feature map dimensions must be positive");
    if (!(stride > 0) || !std::isfinite(stride)) throw ValidationError("feature map stride must be positive");
    if (data_.rows() != channels || data_.cols() != Eigen::Index(height) * width) {
      throw ValidationError("feature map data does not match its declared shape");
    }
    if (!data_.allFinite()) throw ValidationError("feature map values must be finite");
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  Scalar stride() const { return stride_; }

  Scalar operator()(int c, int y, int x) const { return data_(c, Eigen::Index(y) * width_ + x); }
  Scalar& operator()(int c, int y, int x) { return data_(c, Eigen::Index(y) * width_ + x); }

  /// All channels of cell (y, x).
  auto cell(int y, int x) const { return data_.col(Eigen::Index(y) * width_ + x); }

  const Grid& data() const { return data_; }

 private:
  int channels_;
  int height_;
  int width_;
  Scalar stride_;
  Grid data_;
};

using FeatureMapd = FeatureMap<double>;

/// Lowest pyramid level present (P2, stride 4).
inline constexpr int kLowestPyramidLevel = 2;

/// Levels P2, P3, ... with strides 4, 8, ... and one shared channel count.
template <typename Scalar>
class FeaturePyramid {
 public:
  explicit FeaturePyramid(std::vector<FeatureMap<Scalar>> levels) : levels_(std::move(levels)) {
    if (levels_.empty()) throw ValidationError("feature pyramid needs at least one level");
    Scalar expected_stride = Scalar(1 << kLowestPyramidLevel);
    for (const auto& level : levels_) {
      if (level.stride() != expected_stride) {
        throw ValidationError("pyramid level strides must be 4, 8, 16, ... in order");
      }
      if (level.channels() != levels_.front().channels()) {
        throw ValidationError("pyramid levels must share one channel count");
      }
      expected_stride *= 2;
    }
  }

  int num_levels() const { return int(levels_.size()); }
  int channels() const { return levels_.front().channels(); }
  const FeatureMap<Scalar>& level(int index) const { return levels_.at(std::size_t(index)); }
  const std::vector<FeatureMap<Scalar>>& levels() const { return levels_; }

 private:
  std::vector<FeatureMap<Scalar>> levels_;
};

using FeaturePyramidd = FeaturePyramid<double>;

namespace detail {

// Corner indices and weights of one bilinear sample; all-zero weights when the
// point falls outside the one-cell border.
template <typename Scalar>
struct BilinearTap {
  int y_low{0}, y_high{0}, x_low{0}, x_high{0};
  Scalar w_ll{0}, w_lh{0}, w_hl{0}, w_hh{0};
  bool valid{false};
};

template <typename Scalar>
BilinearTap<Scalar> bilinear_tap(int height, int width, Scalar x, Scalar y) {
  BilinearTap<Scalar> tap;
  if (!(y >= -1 && y <= height && x >= -1 && x <= width)) return tap;
  y = std::max(y, Scalar(0));
  x = std::max(x, Scalar(0));
  tap.y_low = int(y);
  tap.x_low = int(x);
  if (tap.y_low >= height - 1) {
    tap.y_low = tap.y_high = height - 1;
    y = Scalar(tap.y_low);
  } else {
    tap.y_high = tap.y_low + 1;
  }
  if (tap.x_low >= width - 1) {
    tap.x_low = tap.x_high = width - 1;
    x = Scalar(tap.x_low);
  } else {
    tap.x_high = tap.x_low + 1;
  }
  const Scalar ly = y - tap.y_low;
  const Scalar lx = x - tap.x_low;
  const Scalar hy = 1 - ly;
  const Scalar hx = 1 - lx;
  tap.w_ll = hy * hx;
  tap.w_lh = hy * lx;
  tap.w_hl = ly * hx;
  tap.w_hh = ly * lx;
  tap.valid = true;
  return tap;
}

}  // namespace detail

/// Bilinear interpolation at feature coordinates (x, y), where cell (row i,
/// column j) has its center at (j, i).
///
/// Points up to one cell outside the grid are clamped to the border; points
/// further out read as 0.
template <typename Scalar>
Scalar bilinear_sample(const FeatureMap<Scalar>& map, Scalar x, Scalar y, int channel) {
  const auto tap = detail::bilinear_tap(map.height(), map.width(), x, y);
  if (!tap.valid) return Scalar(0);
  return tap.w_ll * map(channel, tap.y_low, tap.x_low) + tap.w_lh * map(channel, tap.y_low, tap.x_high) +
         tap.w_hl * map(channel, tap.y_high, tap.x_low) + tap.w_hh * map(channel, tap.y_high, tap.x_high);
}

/// Rotated RoIAlign forward pass.
///
/// The box (image pixels) is split into out_h x out_w bins in its own frame:
/// columns run along the w-edge, rows along the h-edge. Each bin averages
/// sampling_ratio^2 bilinear samples at sub-bin offsets (k + 0.5) / sampling_ratio.
/// A sample at image point p reads feature coordinates p / stride - 0.5.
///
/// Returns a channels x (out_h * out_w) matrix; column `iy * out_w + ix` is bin
/// (iy, ix).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> rotated_roi_align(const FeatureMap<Scalar>& map,
                                                                        const OrientedBox<Scalar>& box, int out_h,
                                                                        int out_w, int sampling_ratio = 2) {
  if (out_h < 1 || out_w < 1) throw ValidationError("RoIAlign output size must be positive");
  if (sampling_ratio < 1) throw ValidationError("RoIAlign sampling ratio must be positive");

  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix out = Matrix::Zero(map.channels(), Eigen::Index(out_h) * out_w);

  const Scalar cos_t = std::cos(box.theta);
  const Scalar sin_t = std::sin(box.theta);
  const Scalar bin_w = box.w / out_w;
  const Scalar bin_h = box.h / out_h;
  const Scalar inv_stride = Scalar(1) / map.stride();
  const Scalar norm = Scalar(1) / Scalar(sampling_ratio * sampling_ratio);

  for (int iy = 0; iy < out_h; ++iy) {
    for (int ix = 0; ix < out_w; ++ix) {
      auto bin = out.col(Eigen::Index(iy) * out_w + ix);
      for (int sy = 0; sy < sampling_ratio; ++sy) {
        const Scalar v = -box.h / 2 + (iy + (sy + Scalar(0.5)) / sampling_ratio) * bin_h;
        for (int sx = 0; sx < sampling_ratio; ++sx) {
          const Scalar u = -box.w / 2 + (ix + (sx + Scalar(0.5)) / sampling_ratio) * bin_w;
          const Scalar px = box.cx + u * cos_t - v * sin_t;
          const Scalar py = box.cy + u * sin_t + v * cos_t;
          const auto tap = detail::bilinear_tap(map.height(), map.width(), px * inv_stride - Scalar(0.5),
                                                py * inv_stride - Scalar(0.5));
          if (!tap.valid) continue;
          bin += tap.w_ll * map.cell(tap.y_low, tap.x_low) + tap.w_lh * map.cell(tap.y_low, tap.x_high) +
                 tap.w_hl * map.cell(tap.y_high, tap.x_low) + tap.w_hh * map.cell(tap.y_high, tap.x_high);
        }
      }
      bin *= norm;
    }
  }
  return out;
}

/// Pyramid level index (0 = P2) for a box:
/// floor(canonical_level + log2(sqrt(w*h) / canonical_size)), clamped to the
/// available levels.
template <typename Scalar>
int assign_fpn_level(const OrientedBox<Scalar>& box, int num_levels, int canonical_level = 4,
                     Scalar canonical_size = Scalar(224)) {
  if (num_levels < 1) throw ValidationError("pyramid must have at least one level");
  const Scalar size = std::sqrt(box.w * box.h);
  const auto level = int(std::floor(canonical_level + std::log2(size / canonical_size + Scalar(1e-8))));
  return std::clamp(level - kLowestPyramidLevel, 0, num_levels - 1);
}

}  // namespace obbkit

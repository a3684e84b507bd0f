#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <span>
#include <tuple>
#include <vector>

#include "obbkit/box.hpp"

namespace obbkit {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

/// Convex polygon with counter-clockwise vertices (positive shoelace area in
/// x/y coordinates). Empty means "no region".
template <typename Scalar>
struct ConvexPolygon {
  std::vector<Point2<Scalar>> vertices;

  bool empty() const { return vertices.empty(); }
  std::size_t size() const { return vertices.size(); }
};

using ConvexPolygond = ConvexPolygon<double>;

/// Corners of a box, counter-clockwise, starting at local (-w/2, -h/2).
template <typename Scalar>
ConvexPolygon<Scalar> corners(const OrientedBox<Scalar>& box) {
  const Scalar c = std::cos(box.theta);
  const Scalar s = std::sin(box.theta);
  const Point2<Scalar> center(box.cx, box.cy);
  const Point2<Scalar> half_w(c * box.w / 2, s * box.w / 2);
  const Point2<Scalar> half_h(-s * box.h / 2, c * box.h / 2);
  return {{center - half_w - half_h, center + half_w - half_h, center + half_w + half_h, center - half_w + half_h}};
}

/// Shoelace area; 0 for an empty polygon.
template <typename Scalar>
Scalar polygon_area(const ConvexPolygon<Scalar>& polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return Scalar(0);
  Scalar twice_area = 0;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& p = polygon.vertices[j];
    const auto& q = polygon.vertices[i];
    twice_area += p.x() * q.y() - q.x() * p.y();
  }
  return std::abs(twice_area) / 2;
}

namespace detail {

template <typename Scalar>
Scalar cross(const Point2<Scalar>& a, const Point2<Scalar>& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Intersections below this area (px^2) are slivers from touching boundaries.
inline constexpr double kSliverArea = 1e-12;

}  // namespace detail

/// Intersection of two convex polygons (Sutherland-Hodgman, `clip` as the
/// clip region). Result is counter-clockwise, or empty when the overlap has
/// area below 1e-12 px^2.
template <typename Scalar>
ConvexPolygon<Scalar> polygon_intersection(const ConvexPolygon<Scalar>& subject, const ConvexPolygon<Scalar>& clip) {
  if (subject.size() < 3 || clip.size() < 3) return {};

  std::vector<Point2<Scalar>> output = subject.vertices;
  std::vector<Point2<Scalar>> input;
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !output.empty(); ++e) {
    const Point2<Scalar>& a = clip.vertices[e];
    const Point2<Scalar> edge = clip.vertices[(e + 1) % m] - a;
    input.swap(output);
    output.clear();
    const std::size_t n = input.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2<Scalar>& prev = input[(i + n - 1) % n];
      const Point2<Scalar>& cur = input[i];
      const Scalar d_prev = detail::cross<Scalar>(edge, prev - a);
      const Scalar d_cur = detail::cross<Scalar>(edge, cur - a);
      const bool prev_in = d_prev >= 0;
      const bool cur_in = d_cur >= 0;
      if (prev_in != cur_in) {
        const Scalar t = d_prev / (d_prev - d_cur);
        output.push_back(prev + t * (cur - prev));
      }
      if (cur_in) output.push_back(cur);
    }
  }

  // Drop repeated vertices produced when a vertex lies on a clip edge.
  ConvexPolygon<Scalar> result;
  for (const auto& p : output) {
    if (result.vertices.empty() || (p - result.vertices.back()).squaredNorm() > Scalar(1e-24)) {
      result.vertices.push_back(p);
    }
  }
  while (result.size() > 1 && (result.vertices.front() - result.vertices.back()).squaredNorm() <= Scalar(1e-24)) {
    result.vertices.pop_back();
  }
  if (result.size() < 3 || polygon_area(result) < Scalar(detail::kSliverArea)) return {};
  return result;
}

/// Rotated intersection-over-union in [0, 1].
///
/// The pair is put in a fixed order before clipping, so the result is exactly
/// symmetric in its arguments.
template <typename Scalar>
Scalar rotated_iou(const OrientedBox<Scalar>& a, const OrientedBox<Scalar>& b) {
  if (a == b) return Scalar(1);
  const auto key = [](const OrientedBox<Scalar>& x) { return std::tie(x.cx, x.cy, x.w, x.h, x.theta); };
  const bool swap = key(b) < key(a);
  const OrientedBox<Scalar>& first = swap ? b : a;
  const OrientedBox<Scalar>& second = swap ? a : b;

  // Cheap reject on circumscribed circles.
  const Scalar dx = first.cx - second.cx;
  const Scalar dy = first.cy - second.cy;
  const Scalar reach = std::hypot(first.w, first.h) / 2 + std::hypot(second.w, second.h) / 2;
  if (dx * dx + dy * dy >= reach * reach) return Scalar(0);

  const Scalar inter = polygon_area(polygon_intersection(corners(first), corners(second)));
  if (inter <= 0) return Scalar(0);
  const Scalar uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

/// Entry (i, j) is rotated_iou(as[i], bs[j]).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> iou_matrix(std::span<const OrientedBox<Scalar>> as,
                                                                 std::span<const OrientedBox<Scalar>> bs) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(Eigen::Index(as.size()), Eigen::Index(bs.size()));
  for (std::size_t i = 0; i < as.size(); ++i) {
    for (std::size_t j = 0; j < bs.size(); ++j) out(Eigen::Index(i), Eigen::Index(j)) = rotated_iou(as[i], bs[j]);
  }
  return out;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> iou_matrix(const std::vector<OrientedBox<Scalar>>& as,
                                                                 const std::vector<OrientedBox<Scalar>>& bs) {
  return iou_matrix(std::span<const OrientedBox<Scalar>>(as), std::span<const OrientedBox<Scalar>>(bs));
}

}  // namespace obbkit

#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "obbkit/error.hpp"

namespace obbkit {

/// Reduces an angle to the canonical half-open range (-pi/2, pi/2].
///
/// A rectangle rotated by pi is the same rectangle, so every angle has exactly
/// one representative in that range. Values already in range are returned
/// untouched, which makes the function exactly idempotent.
template <typename Scalar>
Scalar canonicalize_angle(Scalar theta) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  constexpr Scalar half_pi = pi / 2;
  if (!std::isfinite(theta)) throw ValidationError("angle must be finite");
  if (theta > -half_pi && theta <= half_pi) return theta;
  // fmod is exact; the +/- pi corrections below are exact by Sterbenz' lemma.
  Scalar r = std::fmod(theta, pi);
  if (r > half_pi) {
    r -= pi;
  } else if (r <= -half_pi) {
    r += pi;
  }
  return r;
}

/// Oriented rectangle in image pixels.
///
/// `theta` is the rotation of the w-edge away from the +x axis: the w-edge runs
/// along (cos theta, sin theta) and the h-edge along (-sin theta, cos theta),
/// both expressed in image coordinates (y pointing down). Boxes built through
/// `make_box` are validated and carry a canonical angle.
template <typename Scalar>
struct OrientedBox {
  Scalar cx{0};
  Scalar cy{0};
  Scalar w{1};
  Scalar h{1};
  Scalar theta{0};

  Scalar area() const { return w * h; }

  friend bool operator==(const OrientedBox&, const OrientedBox&) = default;
};

using OrientedBoxd = OrientedBox<double>;
using OrientedBoxf = OrientedBox<float>;

/// Validates the box invariants and canonicalizes the angle.
template <typename Scalar>
OrientedBox<Scalar> make_box(Scalar cx, Scalar cy, Scalar w, Scalar h, Scalar theta) {
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) || !std::isfinite(h) ||
      !std::isfinite(theta)) {
    throw ValidationError("box fields must be finite");
  }
  if (!(w > 0) || !(h > 0)) throw ValidationError("box width and height must be positive");
  return {cx, cy, w, h, canonicalize_angle(theta)};
}

template <typename Scalar>
OrientedBox<Scalar> validated(const OrientedBox<Scalar>& b) {
  return make_box(b.cx, b.cy, b.w, b.h, b.theta);
}

enum class Scene { inshore, offshore, unspecified };

std::string_view to_string(Scene scene);
std::optional<Scene> scene_from_string(std::string_view text);

/// One model output. `score` is the foreground probability.
struct Detection {
  OrientedBoxd box;
  double score{0};
  int class_id{0};
  std::string image_id;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruthRecord {
  OrientedBoxd box;
  int class_id{0};
  std::string image_id;
  Scene scene{Scene::unspecified};

  friend bool operator==(const GroundTruthRecord&, const GroundTruthRecord&) = default;
};

}  // namespace obbkit

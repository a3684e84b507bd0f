#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "obbkit/box.hpp"
#include "obbkit/error.hpp"

namespace obbkit {

/// Regression offsets for one box: center offsets in units of the proposal's
/// w/h, log-scale size factors, and an angle increment in radians.
template <typename Scalar>
struct BoxDeltas {
  Scalar dx{0};
  Scalar dy{0};
  Scalar dw{0};
  Scalar dh{0};
  Scalar dtheta{0};

  friend bool operator==(const BoxDeltas&, const BoxDeltas&) = default;
};

using BoxDeltasd = BoxDeltas<double>;

/// |dw| and |dh| are clamped to this before exponentiation.
inline constexpr double kMaxLogScale = 8.0;

/// How the center offset is rotated into image coordinates.
///
/// `paper_literal` uses the map [[cos, sin], [sin, cos]] applied to
/// (dx*w, dy*h), which is not a rotation and is singular at theta = +/-pi/4.
/// `rotation_matrix` uses the proper rotation [[cos, -sin], [sin, cos]].
enum class DecodeVariant { paper_literal, rotation_matrix };

/// Below this |cos 2 theta| the paper_literal center map is treated as singular.
inline constexpr double kSingularCos2Theta = 1e-6;

template <typename Scalar>
OrientedBox<Scalar> decode(const OrientedBox<Scalar>& proposal, const BoxDeltas<Scalar>& d,
                           DecodeVariant variant = DecodeVariant::paper_literal) {
  const Scalar c = std::cos(proposal.theta);
  const Scalar s = std::sin(proposal.theta);
  const Scalar along_w = d.dx * proposal.w;
  const Scalar along_h = d.dy * proposal.h;
  const Scalar max_log = Scalar(kMaxLogScale);

  OrientedBox<Scalar> out;
  if (variant == DecodeVariant::paper_literal) {
    out.cx = proposal.cx + along_w * c + along_h * s;
  } else {
    out.cx = proposal.cx + along_w * c - along_h * s;
  }
  out.cy = proposal.cy + along_w * s + along_h * c;
  out.w = proposal.w * std::exp(std::clamp(d.dw, -max_log, max_log));
  out.h = proposal.h * std::exp(std::clamp(d.dh, -max_log, max_log));
  out.theta = canonicalize_angle(proposal.theta + d.dtheta);
  return out;
}

/// Inverse of `decode`: the deltas that move `proposal` onto `target`.
///
/// The angle delta is the canonical representative of the difference, so the
/// decoded angle matches the target modulo pi. Throws SingularTransformError
/// for paper_literal when |cos 2 theta_p| < 1e-6.
template <typename Scalar>
BoxDeltas<Scalar> encode(const OrientedBox<Scalar>& proposal, const OrientedBox<Scalar>& target,
                         DecodeVariant variant = DecodeVariant::paper_literal) {
  const Scalar c = std::cos(proposal.theta);
  const Scalar s = std::sin(proposal.theta);
  const Scalar ex = target.cx - proposal.cx;
  const Scalar ey = target.cy - proposal.cy;

  Scalar along_w;
  Scalar along_h;
  if (variant == DecodeVariant::paper_literal) {
    const Scalar det = c * c - s * s;
    if (std::abs(det) < Scalar(kSingularCos2Theta)) {
      throw SingularTransformError("paper_literal center map is singular at proposal angle " +
                                   std::to_string(double(proposal.theta)));
    }
    along_w = (c * ex - s * ey) / det;
    along_h = (c * ey - s * ex) / det;
  } else {
    along_w = c * ex + s * ey;
    along_h = -s * ex + c * ey;
  }

  BoxDeltas<Scalar> d;
  d.dx = along_w / proposal.w;
  d.dy = along_h / proposal.h;
  d.dw = std::log(target.w / proposal.w);
  d.dh = std::log(target.h / proposal.h);
  d.dtheta = canonicalize_angle(target.theta - proposal.theta);
  return d;
}

/// Width of the learnable proposal feature vectors.
inline constexpr int kProposalFeatureWidth = 256;

struct ProposalSet {
  std::vector<OrientedBoxd> boxes;
  Eigen::MatrixXd features;  // boxes.size() x 256
};

/// `count` identical proposals centred in the image: w = W/4, h = H/2,
/// theta = -pi/4, zero features.
ProposalSet init_proposals(int count, double image_width, double image_height);

}  // namespace obbkit

#include "obbkit/boxcode.hpp"

namespace obbkit {

ProposalSet init_proposals(int count, double image_width, double image_height) {
  if (count < 1) throw ValidationError("proposal count must be at least 1");
  if (!(image_width > 0) || !(image_height > 0) || !std::isfinite(image_width) || !std::isfinite(image_height)) {
    throw ValidationError("image size must be positive");
  }
  const OrientedBoxd box =
      make_box(image_width / 2, image_height / 2, image_width / 4, image_height / 2, -std::numbers::pi / 4);
  return {std::vector<OrientedBoxd>(std::size_t(count), box), Eigen::MatrixXd::Zero(count, kProposalFeatureWidth)};
}

}  // namespace obbkit

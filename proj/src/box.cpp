#include "obbkit/box.hpp"

namespace obbkit {

std::string_view to_string(Scene scene) {
  switch (scene) {
    case Scene::inshore:
      return "inshore";
    case Scene::offshore:
      return "offshore";
    case Scene::unspecified:
      break;
  }
  return "unspecified";
}

std::optional<Scene> scene_from_string(std::string_view text) {
  if (text == "inshore") return Scene::inshore;
  if (text == "offshore") return Scene::offshore;
  if (text == "unspecified") return Scene::unspecified;
  return std::nullopt;
}

}  // namespace obbkit

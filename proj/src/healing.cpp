#include "tendon/healing.hpp"

#include <stdexcept>

namespace tendon {

std::string plane_name(Plane p) {
  return p == Plane::Sagittal ? "sagittal" : "axial";
}

Plane plane_from_name(const std::string& name) {
  if (name == "sagittal") return Plane::Sagittal;
  if (name == "axial") return Plane::Axial;
  throw std::invalid_argument("unknown plane '" + name +
                              "' (expected sagittal or axial)");
}

int param_index(const std::string& name) {
  for (int i = 0; i < static_cast<int>(kParamNames.size()); ++i)
    if (name == kParamNames[i]) return i;
  throw std::invalid_argument(
      "unknown parameter '" + name +
      "' (expected one of SCT, TT, STE, TE, TU, TisE)");
}

double HealingState::component(int i) const {
  switch (i) {
    case 0: return sct;
    case 1: return tt;
    case 2: return ste;
    case 3: return te;
    case 4: return tu;
    case 5: return tise;
  }
  throw std::out_of_range("healing component index " + std::to_string(i));
}

double& HealingState::component(int i) {
  switch (i) {
    case 0: return sct;
    case 1: return tt;
    case 2: return ste;
    case 3: return te;
    case 4: return tu;
    case 5: return tise;
  }
  throw std::out_of_range("healing component index " + std::to_string(i));
}

double HealingState::component(const std::string& name) const {
  return component(param_index(name));
}

void HealingState::validate() const {
  for (int i = 0; i < 6; ++i) {
    double v = component(i);
    if (!(v >= 1.0 && v <= 7.0))
      throw std::invalid_argument(std::string("healing parameter ") +
                                  kParamNames[i] + " = " + std::to_string(v) +
                                  " outside [1,7]");
  }
}

}  // namespace tendon

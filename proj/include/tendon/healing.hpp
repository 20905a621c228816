#pragma once

#include <array>
#include <string>

namespace tendon {

enum class Plane { Sagittal, Axial };

std::string plane_name(Plane p);
Plane plane_from_name(const std::string& name);

// Six assessment parameters, each on the 1..7 scale (1 = healthy).
inline constexpr std::array<const char*, 6> kParamNames = {
    "SCT", "TT", "STE", "TE", "TU", "TisE"};

struct HealingState {
  double sct = 1.0;
  double tt = 1.0;
  double ste = 1.0;
  double te = 1.0;
  double tu = 1.0;
  double tise = 1.0;

  static HealingState healthy() { return HealingState{}; }

  double component(int i) const;
  double& component(int i);
  double component(const std::string& name) const;
  double mean() const {
    return (sct + tt + ste + te + tu + tise) / 6.0;
  }

  // Throws when any component leaves [1,7].
  void validate() const;
};

// Index of a parameter name in kParamNames; throws on unknown names.
int param_index(const std::string& name);

}  // namespace tendon

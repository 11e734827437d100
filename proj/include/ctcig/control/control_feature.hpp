#pragma once

#include <string>

#include "ctcig/tensor.hpp"

namespace ctcig::control {

enum class ControlStage { raw, firm_refined, cross_normalized };

inline std::string to_string(ControlStage s) {
  switch (s) {
    case ControlStage::raw: return "raw";
    case ControlStage::firm_refined: return "firm_refined";
    case ControlStage::cross_normalized: return "cross_normalized";
  }
  return "?";
}

/// Mask-derived control feature tagged with how far along the
/// controller -> FIRM -> CN chain it is.
struct ControlFeature {
  FeatureMap data;
  ControlStage stage = ControlStage::raw;
};

inline void require_stage(const ControlFeature& f, ControlStage expected, const char* op) {
  if (f.stage != expected)
    throw ValidationError(std::string(op) + " expects a " + to_string(expected) +
                          " control feature, got " + to_string(f.stage));
}

}  // namespace ctcig::control

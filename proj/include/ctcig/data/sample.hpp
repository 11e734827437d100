#pragma once

#include <string>

#include "ctcig/crdm/prompt_pair.hpp"
#include "ctcig/image/image.hpp"

namespace ctcig::data {

enum class SampleOrigin { synthetic, folder };

struct TrainingSample {
  std::string id;
  image::RgbImage image;
  image::BinaryImage mask;
  crdm::PromptPair prompts;
  SampleOrigin origin = SampleOrigin::synthetic;
  /// Prompts were filled from the generic template, not a prompt record.
  bool placeholder_prompts = false;
};

}  // namespace ctcig::data

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctcig/data/sample.hpp"

namespace ctcig::data {

enum class TextureKind { value_noise, stripes, blotch };
enum class ObjectKind { ellipse, metaball };

TextureKind parse_texture_kind(const std::string& s);
ObjectKind parse_object_kind(const std::string& s);
std::string to_string(TextureKind k);
std::string to_string(ObjectKind k);

struct SynthConfig {
  int64_t size = 32;
  TextureKind texture_kind = TextureKind::value_noise;
  ObjectKind object_kind = ObjectKind::ellipse;
  double contrast_delta = 0.1;
  uint64_t seed = 0;

  void validate() const;
};

inline constexpr double kMinMaskFraction = 0.02;
inline constexpr double kMaxMaskFraction = 0.60;

/// A generated sample plus the background texture the object was carved
/// from, for checking the camouflage bound.
struct SyntheticSample {
  TrainingSample sample;
  image::RgbImage background;
};

/// Sample `index` of the stream; a pure function of (cfg, index).
SyntheticSample synth_sample(const SynthConfig& cfg, int64_t index);

std::vector<SyntheticSample> generate(const SynthConfig& cfg, int64_t n);

/// Convenience: generate() without the backgrounds.
std::vector<TrainingSample> generate_samples(const SynthConfig& cfg, int64_t n);

}  // namespace ctcig::data

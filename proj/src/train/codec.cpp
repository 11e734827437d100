#include "ctcig/train/codec.hpp"

namespace ctcig::train {

Codec parse_codec(const std::string& s) {
  if (s == "identity") return Codec::identity;
  if (s == "patchify4") return Codec::patchify4;
  throw ConfigError("codec", "unknown codec '" + s + "'");
}

std::string to_string(Codec c) { return c == Codec::identity ? "identity" : "patchify4"; }

int64_t latent_channels(Codec c) { return c == Codec::identity ? 3 : 48; }
int64_t downsample_factor(Codec c) { return c == Codec::identity ? 1 : 4; }

FeatureMap encode_latent(const torch::Tensor& x, Codec c) {
  require_rank4(x, "image batch");
  if (x.size(1) != 3) throw DimensionError("expected 3 image channels, got " + shape_str(x));
  if (c == Codec::identity) return x;
  if (x.size(2) % 4 != 0 || x.size(3) % 4 != 0)
    throw DimensionError("patchify4 needs height and width divisible by 4, got " + shape_str(x));
  return torch::pixel_unshuffle(x, 4);
}

torch::Tensor decode_latent(const FeatureMap& z, Codec c) {
  require_rank4(z, "latent batch");
  if (z.size(1) != latent_channels(c))
    throw DimensionError("latent has " + std::to_string(z.size(1)) + " channels, codec " + to_string(c) +
                         " expects " + std::to_string(latent_channels(c)));
  if (c == Codec::identity) return z;
  return torch::pixel_shuffle(z, 4);
}

}  // namespace ctcig::train

#pragma once

#include <string>

#include "ctcig/tensor.hpp"

namespace ctcig::train {

/// Lossless stand-ins for the latent autoencoder.
enum class Codec { identity, patchify4 };

Codec parse_codec(const std::string& s);
std::string to_string(Codec c);

int64_t latent_channels(Codec c);
int64_t downsample_factor(Codec c);

/// Images (B,3,H,W) in [-1,1] to latents: identity, or space-to-depth by 4
/// giving (B,48,H/4,W/4).
FeatureMap encode_latent(const torch::Tensor& x, Codec c);
/// Exact inverse of encode_latent.
torch::Tensor decode_latent(const FeatureMap& z, Codec c);

}  // namespace ctcig::train

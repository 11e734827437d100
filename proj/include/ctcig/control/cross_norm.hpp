#pragma once

#include "ctcig/control/control_feature.hpp"

namespace ctcig::control {

inline constexpr double kDefaultEpsGuard = 1e-5;

/// Per-sample, per-channel statistics over spatial positions; population
/// variance. mean/std are (batch, channel).
struct ChannelStats {
  torch::Tensor mean;
  torch::Tensor std;
  double eps_guard = kDefaultEpsGuard;
};

ChannelStats channel_stats(const FeatureMap& x);

/// Re-statisticizes a FIRM-refined control feature to the noisy latent:
/// mu_z + (x - mu_cf) / sqrt(var_cf + eps) * sigma_z, per sample and channel.
ControlFeature cross_normalize(const ControlFeature& ctrl, const FeatureMap& zt,
                               double eps_guard = kDefaultEpsGuard);

}  // namespace ctcig::control

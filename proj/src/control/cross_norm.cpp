#include "ctcig/control/cross_norm.hpp"

namespace ctcig::control {

ChannelStats channel_stats(const FeatureMap& x) {
  require_rank4(x, "channel_stats input");
  if (x.numel() == 0) throw DimensionError("channel_stats on empty feature map");
  ChannelStats s;
  s.mean = x.mean({2, 3});
  s.std = x.var({2, 3}, /*unbiased=*/false).sqrt();
  return s;
}

ControlFeature cross_normalize(const ControlFeature& ctrl, const FeatureMap& zt, double eps_guard) {
  require_stage(ctrl, ControlStage::firm_refined, "cross_normalize");
  require_rank4(ctrl.data, "control feature");
  require_rank4(zt, "z_t");
  if (ctrl.data.size(0) != zt.size(0) || ctrl.data.size(1) != zt.size(1))
    throw DimensionError("cross_normalize batch/channel mismatch: control " + shape_str(ctrl.data) +
                         " vs z_t " + shape_str(zt));
  if (!(eps_guard > 0.0)) throw ConfigError("eps_guard", "must be > 0");

  const auto& x = ctrl.data;
  auto mu_cf = x.mean({2, 3}, true);
  auto var_cf = x.var({2, 3}, false, true);
  auto mu_z = zt.mean({2, 3}, true);
  auto sigma_z = zt.var({2, 3}, false, true).sqrt();
  auto out = mu_z + (x - mu_cf) / (var_cf + eps_guard).sqrt() * sigma_z;
  return {out, ControlStage::cross_normalized};
}

}  // namespace ctcig::control

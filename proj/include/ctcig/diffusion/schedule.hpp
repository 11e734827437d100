#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctcig/tensor.hpp"

namespace ctcig::diffusion {

enum class ScheduleKind { linear_beta, cosine };

ScheduleKind parse_schedule_kind(const std::string& s);
std::string to_string(ScheduleKind k);

/// Per-timestep noise constants. Index t runs over [0, T); alpha_bars[t] is
/// the cumulative product of alphas[0..t]. The virtual step t = -1 has
/// alpha_bar = 1 so the last reverse step lands on a clean prediction.
struct NoiseSchedule {
  int64_t T = 0;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
  ScheduleKind kind = ScheduleKind::linear_beta;

  /// alpha_bar at t, with alpha_bar(-1) == 1.
  double alpha_bar(int64_t t) const;

  /// Builds a schedule directly from per-step alphas (each in (0,1)).
  static NoiseSchedule from_alphas(std::vector<double> alphas,
                                   ScheduleKind kind = ScheduleKind::linear_beta);
};

inline constexpr int64_t kDefaultT = 1000;
inline constexpr std::pair<double, double> kDefaultBetaRange{1e-4, 0.02};

/// linear_beta: betas evenly spaced over beta_range (endpoints included).
/// cosine: Nichol & Dhariwal squared-cosine alpha_bar with offset 0.008,
/// per-step betas clipped to 0.999; beta_range is ignored.
NoiseSchedule make_schedule(ScheduleKind kind, int64_t T,
                            std::pair<double, double> beta_range = kDefaultBetaRange);

/// sqrt(ab_t) x0 + sqrt(1 - ab_t) eps; t = -1 is the clean virtual step.
FeatureMap q_sample(const FeatureMap& x0, int64_t t, const FeatureMap& eps,
                    const NoiseSchedule& sched);

/// Per-sample timesteps (int64 tensor of length batch).
FeatureMap q_sample(const FeatureMap& x0, const torch::Tensor& t, const FeatureMap& eps,
                    const NoiseSchedule& sched);

/// (xt - sqrt(1 - ab_t) eps_pred) / sqrt(ab_t).
FeatureMap predict_x0(const FeatureMap& xt, const FeatureMap& eps_pred, int64_t t,
                      const NoiseSchedule& sched);

FeatureMap predict_x0(const FeatureMap& xt, const FeatureMap& eps_pred, const torch::Tensor& t,
                      const NoiseSchedule& sched);

/// Gathers alpha_bar[t] per sample, shaped (batch,1,1,1) in `like`'s dtype.
torch::Tensor gather_alpha_bar(const NoiseSchedule& sched, const torch::Tensor& t,
                               const torch::Tensor& like);

}  // namespace ctcig::diffusion

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "ctcig/diffusion/schedule.hpp"

namespace ctcig::text {
struct EmbeddingMatrix;
}

namespace ctcig::diffusion {

struct SamplerConfig {
  int64_t num_steps = 20;
  double eta = 0.0;
  uint64_t seed = 0;
};

/// Wall-clock figures for one sample_loop call.
struct TimingReport {
  double latency_s = 0.0;  // seconds per image
  double fps = 0.0;        // images per second
  double sps = 0.0;        // DDIM steps per second
};

nlohmann::json to_json(const TimingReport& r);

/// Evenly spaced descending timesteps of length num_steps, starting at T-1
/// and ending at 0.
std::vector<int64_t> timestep_subsequence(int64_t T, int64_t num_steps);

/// DDIM noise scale for a t -> t_prev jump.
double ddim_sigma(double eta, double alpha_bar_t, double alpha_bar_prev);

/// One DDIM update from t to t_prev (t_prev may be -1). `noise_gen` is only
/// consulted when eta > 0.
FeatureMap ddim_step(const FeatureMap& xt, const FeatureMap& eps_pred, int64_t t, int64_t t_prev,
                     const SamplerConfig& cfg, const NoiseSchedule& sched,
                     std::optional<at::Generator> noise_gen = std::nullopt);

/// Ancestral DDPM update from t to t-1. Test use only.
FeatureMap ddpm_step(const FeatureMap& xt, const FeatureMap& eps_pred, int64_t t,
                     const NoiseSchedule& sched, at::Generator& gen);

/// Maps (z_t, t, condition, control) to an eps prediction of z_t's shape.
using DenoiseFn = std::function<FeatureMap(const FeatureMap& zt, int64_t t,
                                           const text::EmbeddingMatrix* cond,
                                           const FeatureMap& control)>;

struct SampleResult {
  FeatureMap z0;
  TimingReport timing;
};

/// Runs the reverse process from standard-normal noise drawn with cfg.seed.
SampleResult sample_loop(const DenoiseFn& denoiser, at::IntArrayRef shape,
                         const text::EmbeddingMatrix* cond, const FeatureMap& control,
                         const SamplerConfig& cfg, const NoiseSchedule& sched,
                         torch::ScalarType dtype = torch::kFloat);

}  // namespace ctcig::diffusion

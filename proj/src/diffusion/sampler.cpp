#include "ctcig/diffusion/sampler.hpp"

#include <chrono>
#include <cmath>

namespace ctcig::diffusion {

nlohmann::json to_json(const TimingReport& r) {
  return {{"latency_s", r.latency_s}, {"fps", r.fps}, {"sps", r.sps}};
}

std::vector<int64_t> timestep_subsequence(int64_t T, int64_t num_steps) {
  if (num_steps < 1 || num_steps > T)
    throw SamplerConfigError("num_steps " + std::to_string(num_steps) + " not in [1, T=" +
                             std::to_string(T) + "]");
  std::vector<int64_t> ts(static_cast<size_t>(num_steps));
  if (num_steps == 1) {
    ts[0] = T - 1;
    return ts;
  }
  for (int64_t i = 0; i < num_steps; ++i) {
    const double pos = static_cast<double>(T - 1) * static_cast<double>(num_steps - 1 - i) /
                       static_cast<double>(num_steps - 1);
    ts[static_cast<size_t>(i)] = static_cast<int64_t>(std::llround(pos));
  }
  return ts;
}

double ddim_sigma(double eta, double alpha_bar_t, double alpha_bar_prev) {
  return eta * std::sqrt((1.0 - alpha_bar_prev) / (1.0 - alpha_bar_t)) *
         std::sqrt(1.0 - alpha_bar_t / alpha_bar_prev);
}

FeatureMap ddim_step(const FeatureMap& xt, const FeatureMap& eps_pred, int64_t t, int64_t t_prev,
                     const SamplerConfig& cfg, const NoiseSchedule& sched,
                     std::optional<at::Generator> noise_gen) {
  require_same_shape(xt, eps_pred, "ddim_step eps_pred vs xt");
  if (!(t_prev < t)) throw SamplerConfigError("t_prev must be < t");
  if (cfg.eta < 0.0) throw SamplerConfigError("eta must be >= 0");
  const double ab_t = sched.alpha_bar(t);
  const double ab_prev = sched.alpha_bar(t_prev);
  const double sigma = cfg.eta > 0.0 ? ddim_sigma(cfg.eta, ab_t, ab_prev) : 0.0;
  const double dir_var = 1.0 - ab_prev - sigma * sigma;
  if (dir_var < 0.0)
    throw SamplerConfigError("1 - alpha_bar_prev - sigma^2 = " + std::to_string(dir_var) + " < 0");

  auto x0 = predict_x0(xt, eps_pred, t, sched);
  auto out = std::sqrt(ab_prev) * x0 + std::sqrt(dir_var) * eps_pred;
  if (sigma > 0.0) {
    if (!noise_gen) throw SamplerConfigError("eta > 0 requires a noise generator");
    out = out + sigma * torch::randn(xt.sizes(), *noise_gen, xt.options());
  }
  return out;
}

FeatureMap ddpm_step(const FeatureMap& xt, const FeatureMap& eps_pred, int64_t t,
                     const NoiseSchedule& sched, at::Generator& gen) {
  require_same_shape(xt, eps_pred, "ddpm_step eps_pred vs xt");
  const double a = sched.alphas.at(static_cast<size_t>(t));
  const double ab = sched.alpha_bar(t);
  const double ab_prev = sched.alpha_bar(t - 1);
  auto mean = (xt - (1.0 - a) / std::sqrt(1.0 - ab) * eps_pred) / std::sqrt(a);
  if (t == 0) return mean;
  const double var = (1.0 - ab_prev) / (1.0 - ab) * (1.0 - a);
  return mean + std::sqrt(var) * torch::randn(xt.sizes(), gen, xt.options());
}

SampleResult sample_loop(const DenoiseFn& denoiser, at::IntArrayRef shape,
                         const text::EmbeddingMatrix* cond, const FeatureMap& control,
                         const SamplerConfig& cfg, const NoiseSchedule& sched,
                         torch::ScalarType dtype) {
  const auto steps = timestep_subsequence(sched.T, cfg.num_steps);
  torch::NoGradGuard no_grad;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(cfg.seed);
  auto z = torch::randn(shape, gen, torch::TensorOptions().dtype(dtype));

  const auto start = std::chrono::steady_clock::now();
  for (size_t i = 0; i < steps.size(); ++i) {
    const int64_t t = steps[i];
    const int64_t t_prev = i + 1 < steps.size() ? steps[i + 1] : -1;
    auto eps = denoiser(z, t, cond, control);
    if (!eps.sizes().equals(z.sizes()))
      throw DimensionError("denoiser returned " + shape_str(eps) + " for input " + shape_str(z) +
                           " at t=" + std::to_string(t));
    z = ddim_step(z, eps, t, t_prev, cfg, sched, gen);
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  SampleResult r;
  r.z0 = z;
  const double n_images = static_cast<double>(shape[0]);
  const double total = std::max(elapsed, 1e-9);
  r.timing.latency_s = total / n_images;
  r.timing.fps = n_images / total;
  r.timing.sps = static_cast<double>(steps.size()) / r.timing.latency_s;
  return r;
}

}  // namespace ctcig::diffusion

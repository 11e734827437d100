#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctcig/data/sample.hpp"
#include "ctcig/diffusion/sampler.hpp"
#include "ctcig/text/embedder.hpp"
#include "ctcig/train/config.hpp"

namespace ctcig::train {

struct Batch {
  torch::Tensor images;  // (B,3,H,W) in [-1,1]
  torch::Tensor masks;   // (B,1,H,W) 0/1
  std::vector<std::string> prompts;
  std::vector<std::string> ids;
};

/// Stacks samples[idx] using each sample's detailed prompt.
Batch make_batch(const std::vector<data::TrainingSample>& samples, const std::vector<size_t>& idx,
                 torch::ScalarType dtype = torch::kFloat);

struct StepLosses {
  torch::Tensor l_sd;
  torch::Tensor l_lpips;
  torch::Tensor total;
  torch::Tensor t;
};

/// Uniform integer timesteps in [0, T).
torch::Tensor sample_timesteps(at::Generator& gen, int64_t batch, int64_t T);

/// Replaces the model's eps prediction (test stubs): (z_t, t, eps_true).
using EpsOverride = std::function<torch::Tensor(const torch::Tensor&, const torch::Tensor&, const torch::Tensor&)>;

class Trainer {
 public:
  Trainer(TrainConfig cfg, nn::CtcigModel model);

  const TrainConfig& config() const { return cfg_; }
  nn::CtcigModel& model() { return model_; }
  const diffusion::NoiseSchedule& schedule() const { return sched_; }
  const text::TextEmbedder& embedder() const { return embedder_; }

  /// Loss terms for given timesteps and noise; builds the autograd graph.
  StepLosses compute_losses(const Batch& batch, const torch::Tensor& t, const torch::Tensor& eps,
                            const EpsOverride* eps_override = nullptr);

  /// Draws t and eps, back-propagates total and applies one optimizer step.
  /// Non-finite losses raise TrainingError before any parameter changes.
  StepLosses step(const Batch& batch);

  /// {"controller_firm": lr, "cross_attn_projectors": lr[, "frozen": lr]}
  nlohmann::json lr_groups() const;
  int64_t steps_taken() const { return steps_; }

 private:
  TrainConfig cfg_;
  nn::CtcigModel model_;
  diffusion::NoiseSchedule sched_;
  text::TextEmbedder embedder_;
  at::Generator gen_;
  std::unique_ptr<torch::optim::AdamW> opt_;
  std::vector<std::string> group_names_;
  int64_t steps_ = 0;
};

struct LogRecord {
  int64_t step = 0;
  double l_sd = 0.0;
  double l_lpips = 0.0;
  double total = 0.0;
  nlohmann::json lr_groups;
};

nlohmann::json to_json(const LogRecord& r);

struct TrainResult {
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path log_path;
  std::vector<LogRecord> log;
  nn::CtcigModel model{nullptr};
};

using ProgressFn = std::function<void(const LogRecord&)>;

/// Trains on `samples` (all the same size) in a seeded, deterministic order.
/// Writes out_dir/loss_log.jsonl and out_dir/checkpoint_e<NNNN>.ctcg after
/// every epoch. `model` defaults to a fresh model seeded from cfg.seed.
TrainResult train(const TrainConfig& cfg, const std::vector<data::TrainingSample>& samples,
                  const std::filesystem::path& out_dir, nn::CtcigModel model = nullptr,
                  const ProgressFn& progress = nullptr);

/// Exponential moving average s_i = beta s_{i-1} + (1-beta) v_i, s_0 = v_0.
std::vector<double> ema_smooth(const std::vector<double>& values, double beta = 0.9);

struct GeneratedImages {
  torch::Tensor images;  // (B,3,H,W) in [-1,1]
  diffusion::TimingReport timing;
};

/// Reverse diffusion conditioned on masks (B,1,H,W) and prompts (one per
/// mask).
GeneratedImages generate_images(nn::CtcigModel& model, const TrainConfig& cfg, const torch::Tensor& masks,
                                const std::vector<std::string>& prompts, const diffusion::SamplerConfig& sampler);

}  // namespace ctcig::train

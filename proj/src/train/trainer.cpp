#include "ctcig/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "ctcig/train/checkpoint.hpp"

namespace ctcig::train {

Batch make_batch(const std::vector<data::TrainingSample>& samples, const std::vector<size_t>& idx,
                 torch::ScalarType dtype) {
  if (idx.empty()) throw ValidationError("empty batch");
  Batch b;
  std::vector<torch::Tensor> imgs, masks;
  for (auto i : idx) {
    const auto& s = samples.at(i);
    if (s.image.width != s.mask.width || s.image.height != s.mask.height)
      throw DimensionError("image and mask sizes differ for sample " + s.id);
    imgs.push_back(image::to_tensor(s.image, dtype));
    masks.push_back(image::to_tensor(s.mask, dtype));
    b.prompts.push_back(s.prompts.t_detail);
    b.ids.push_back(s.id);
  }
  b.images = torch::stack(imgs);
  b.masks = torch::stack(masks);
  return b;
}

torch::Tensor sample_timesteps(at::Generator& gen, int64_t batch, int64_t T) {
  return torch::randint(0, T, {batch}, gen, torch::TensorOptions().dtype(torch::kLong));
}

Trainer::Trainer(TrainConfig cfg, nn::CtcigModel model)
    : cfg_(std::move(cfg)),
      model_(std::move(model)),
      sched_(diffusion::make_schedule(cfg_.schedule, cfg_.T)),
      gen_(at::make_generator<at::CPUGeneratorImpl>(cfg_.seed ^ 0x7A11'5EEDULL)) {
  cfg_.validate();
  model_->train();

  std::vector<torch::Tensor> cf, proj, backbone;
  for (const auto& tp : model_->tagged_parameters()) {
    const bool trainable = cfg_.policy == nn::ParamPolicy::full || tp.tag != nn::ParamGroupTag::frozen;
    tp.tensor.set_requires_grad(trainable);
    if (!trainable) continue;
    switch (tp.tag) {
      case nn::ParamGroupTag::controller_firm: cf.push_back(tp.tensor); break;
      case nn::ParamGroupTag::cross_attn_projectors: proj.push_back(tp.tensor); break;
      case nn::ParamGroupTag::frozen: backbone.push_back(tp.tensor); break;
    }
  }
  auto options = [this](double lr) {
    return std::make_unique<torch::optim::AdamWOptions>(
        torch::optim::AdamWOptions(lr).betas({0.9, 0.999}).weight_decay(cfg_.weight_decay));
  };
  std::vector<torch::optim::OptimizerParamGroup> groups;
  groups.emplace_back(cf, options(cfg_.lr_controller_firm));
  group_names_.push_back("controller_firm");
  groups.emplace_back(proj, options(cfg_.lr_projectors));
  group_names_.push_back("cross_attn_projectors");
  if (!backbone.empty()) {
    groups.emplace_back(backbone, options(cfg_.lr_backbone));
    group_names_.push_back("frozen");
  }
  opt_ = std::make_unique<torch::optim::AdamW>(groups, torch::optim::AdamWOptions(cfg_.lr_controller_firm));
}

nlohmann::json Trainer::lr_groups() const {
  nlohmann::json j = nlohmann::json::object();
  for (size_t i = 0; i < group_names_.size(); ++i)
    j[group_names_[i]] = static_cast<const torch::optim::AdamWOptions&>(opt_->param_groups()[i].options()).lr();
  return j;
}

StepLosses Trainer::compute_losses(const Batch& batch, const torch::Tensor& t, const torch::Tensor& eps,
                                   const EpsOverride* eps_override) {
  const auto dtype = batch.images.scalar_type();
  auto z0 = encode_latent(batch.images, cfg_.codec);
  require_same_shape(z0, eps, "noise");
  auto zt = diffusion::q_sample(z0, t, eps, sched_);

  torch::Tensor eps_pred;
  if (eps_override) {
    eps_pred = (*eps_override)(zt, t, eps);
  } else {
    const auto text = embedder_.embed(batch.prompts, dtype);
    auto raw = model_->controller()->encode_mask(batch.masks);
    eps_pred = model_->predict_eps(zt, t, &text, &raw);
  }

  StepLosses out;
  out.t = t;
  out.l_sd = torch::mse_loss(eps_pred, eps);
  auto x0_pred = decode_latent(diffusion::predict_x0(zt, eps_pred, t, sched_), cfg_.codec).clamp(-1.0, 1.0);
  out.l_lpips = lpips_loss(x0_pred, batch.images, cfg_.perceptual);
  out.total = out.l_sd + cfg_.lambda_lpips * out.l_lpips;
  return out;
}

StepLosses Trainer::step(const Batch& batch) {
  const auto dtype = batch.images.scalar_type();
  auto t = sample_timesteps(gen_, batch.images.size(0), sched_.T);
  auto z_shape = encode_latent(batch.images, cfg_.codec).sizes();
  auto eps = torch::randn(z_shape, gen_, torch::TensorOptions().dtype(dtype));

  opt_->zero_grad();
  auto losses = compute_losses(batch, t, eps);
  const double l_sd = losses.l_sd.item<double>(), l_lp = losses.l_lpips.item<double>();
  const double total = losses.total.item<double>();
  if (!std::isfinite(l_sd) || !std::isfinite(l_lp) || !std::isfinite(total)) {
    std::ostringstream os;
    os << "non-finite loss at step " << steps_ << ": l_sd=" << l_sd << " l_lpips=" << l_lp << " total=" << total
       << " t=[";
    for (int64_t i = 0; i < t.size(0); ++i) os << (i ? "," : "") << t[i].item<int64_t>();
    os << "] ids=[";
    for (size_t i = 0; i < batch.ids.size(); ++i) os << (i ? "," : "") << batch.ids[i];
    os << "]";
    throw TrainingError(os.str());
  }
  losses.total.backward();
  opt_->step();
  ++steps_;
  return losses;
}

nlohmann::json to_json(const LogRecord& r) {
  return {{"step", r.step}, {"l_sd", r.l_sd}, {"l_lpips", r.l_lpips}, {"total", r.total}, {"lr_groups", r.lr_groups}};
}

std::vector<double> ema_smooth(const std::vector<double>& values, double beta) {
  std::vector<double> out;
  out.reserve(values.size());
  for (size_t i = 0; i < values.size(); ++i)
    out.push_back(i == 0 ? values[0] : beta * out.back() + (1.0 - beta) * values[i]);
  return out;
}

TrainResult train(const TrainConfig& cfg, const std::vector<data::TrainingSample>& samples,
                  const std::filesystem::path& out_dir, nn::CtcigModel model, const ProgressFn& progress) {
  cfg.validate();
  if (samples.empty()) throw ValidationError("no training samples");
  for (const auto& s : samples)
    if (s.image.width != samples[0].image.width || s.image.height != samples[0].image.height)
      throw DimensionError("training samples must share one size; " + s.id + " differs");
  if (!model) {
    torch::manual_seed(cfg.seed);
    model = nn::CtcigModel(model_config_for(cfg));
  }

  std::filesystem::create_directories(out_dir);
  TrainResult result;
  result.log_path = out_dir / "loss_log.jsonl";
  std::ofstream log(result.log_path, std::ios::trunc);
  if (!log) throw Error("cannot write " + result.log_path.string());

  Trainer trainer(cfg, model);
  const auto dtype = model->parameters().front().scalar_type();
  std::vector<size_t> order(samples.size());
  bool done = false;
  for (int64_t epoch = 1; epoch <= cfg.epochs && !done; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < order.size() && !done; start += static_cast<size_t>(cfg.batch_size)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      const auto batch = make_batch(samples, {order.begin() + static_cast<std::ptrdiff_t>(start),
                                              order.begin() + static_cast<std::ptrdiff_t>(stop)}, dtype);
      const auto losses = trainer.step(batch);
      LogRecord rec{trainer.steps_taken(), losses.l_sd.item<double>(), losses.l_lpips.item<double>(),
                    losses.total.item<double>(), trainer.lr_groups()};
      log << to_json(rec).dump() << "\n";
      log.flush();
      result.log.push_back(rec);
      if (progress) progress(rec);
      if (cfg.max_steps > 0 && trainer.steps_taken() >= cfg.max_steps) done = true;
    }
    std::ostringstream name;
    name << "checkpoint_e" << std::setw(4) << std::setfill('0') << epoch << ".ctcg";
    const auto path = out_dir / name.str();
    save_checkpoint(path, model, {{"epoch", epoch}, {"step", trainer.steps_taken()}, {"train", to_json(cfg)}});
    result.checkpoints.push_back(path);
  }
  result.model = model;
  return result;
}

GeneratedImages generate_images(nn::CtcigModel& model, const TrainConfig& cfg, const torch::Tensor& masks,
                                const std::vector<std::string>& prompts, const diffusion::SamplerConfig& sampler) {
  require_rank4(masks, "masks");
  if (static_cast<int64_t>(prompts.size()) != masks.size(0))
    throw ValidationError("need one prompt per mask (" + std::to_string(masks.size(0)) + "), got " +
                          std::to_string(prompts.size()));
  const auto sched = diffusion::make_schedule(cfg.schedule, cfg.T);
  if (sampler.num_steps < 1 || sampler.num_steps > sched.T)
    throw SamplerConfigError("num_steps must be in [1, " + std::to_string(sched.T) + "]");
  torch::NoGradGuard ng;
  model->eval();
  const auto dtype = model->parameters().front().scalar_type();
  const auto m = masks.to(dtype);
  static const text::TextEmbedder embedder;
  const auto text = embedder.embed(prompts, dtype);
  const auto raw = model->controller()->encode_mask(m);

  const int64_t f = downsample_factor(cfg.codec);
  if (m.size(2) % f != 0 || m.size(3) % f != 0)
    throw DimensionError("mask size " + shape_str(m) + " not divisible by codec factor");
  const std::vector<int64_t> shape{m.size(0), latent_channels(cfg.codec), m.size(2) / f, m.size(3) / f};

  diffusion::DenoiseFn fn = [&](const FeatureMap& zt, int64_t t, const text::EmbeddingMatrix* cond,
                                const FeatureMap& control) {
    control::ControlFeature c{control, control::ControlStage::raw};
    auto tt = torch::full({zt.size(0)}, t, torch::TensorOptions().dtype(torch::kLong));
    return model->predict_eps(zt, tt, cond, &c);
  };
  auto res = diffusion::sample_loop(fn, shape, &text, raw.data, sampler, sched, dtype);
  return {decode_latent(res.z0, cfg.codec).clamp(-1.0, 1.0), res.timing};
}

}  // namespace ctcig::train

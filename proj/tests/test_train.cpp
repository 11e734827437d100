#include <gtest/gtest.h>

#include <fstream>
#include <map>

#include "ctcig/data/synth.hpp"
#include "ctcig/train/checkpoint.hpp"
#include "ctcig/train/trainer.hpp"
#include "test_util.hpp"

using namespace ctcig;
using namespace ctcig::train;
using ctcig::testing::max_abs;
using ctcig::testing::TempDir;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.base_channels = 16;
  c.batch_size = 2;
  c.seed = 4;
  return c;
}

nn::CtcigModel small_model(const TrainConfig& c, torch::ScalarType dtype = torch::kFloat) {
  torch::manual_seed(c.seed);
  nn::CtcigModel m(model_config_for(c));
  m->to(dtype);
  return m;
}

std::vector<data::TrainingSample> samples(int64_t n) { return data::generate_samples(data::SynthConfig{}, n); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

/// Rewrites the JSON header of a checkpoint file.
std::string with_header(const std::string& bytes, const std::function<void(nlohmann::json&)>& edit) {
  uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  auto header = nlohmann::json::parse(bytes.substr(16, len));
  edit(header);
  const auto text = header.dump();
  const uint64_t new_len = text.size();
  std::string out = bytes.substr(0, 8);
  out.append(reinterpret_cast<const char*>(&new_len), 8);
  return out + text + bytes.substr(16 + len);
}

}  // namespace

TEST(Codec, RoundTripsAreExact) {
  auto x = torch::rand({2, 3, 32, 32}) * 2 - 1;
  EXPECT_TRUE(torch::equal(decode_latent(encode_latent(x, Codec::identity), Codec::identity), x));
  auto z = encode_latent(x, Codec::patchify4);
  EXPECT_EQ(z.sizes(), (std::vector<int64_t>{2, 48, 8, 8}));
  EXPECT_TRUE(torch::equal(decode_latent(z, Codec::patchify4), x));
  EXPECT_NEAR(z.pow(2).sum().item<double>(), x.pow(2).sum().item<double>(), 1e-3);
  EXPECT_EQ(latent_channels(Codec::patchify4), 48);
  EXPECT_EQ(downsample_factor(Codec::patchify4), 4);
}

TEST(Codec, Errors) {
  EXPECT_THROW(encode_latent(torch::rand({1, 3, 30, 32}), Codec::patchify4), DimensionError);
  try {
    parse_codec("vae");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "codec");
  }
}

TEST(Perceptual, HandExamples) {
  auto pred = torch::tensor({3.0, 4.0}, torch::kDouble).view({1, 2, 1, 1});
  auto ref = torch::zeros({1, 2, 1, 1}, torch::kDouble);
  EXPECT_DOUBLE_EQ(perceptual_distance({pred}, {ref}, {1.0}).item<double>(), 25.0);
  EXPECT_DOUBLE_EQ(perceptual_distance({pred}, {ref}, {2.0}).item<double>(), 100.0);
  auto spatial = torch::tensor({3.0, 4.0}, torch::kDouble).view({1, 1, 2, 1});
  EXPECT_DOUBLE_EQ(perceptual_distance({spatial}, {torch::zeros_like(spatial)}, {1.0}).item<double>(), 12.5);
  auto batch = torch::cat({pred, ref});
  EXPECT_DOUBLE_EQ(perceptual_distance({batch}, {torch::zeros_like(batch)}, {1.0}).item<double>(), 12.5);
  EXPECT_DOUBLE_EQ(perceptual_distance({pred, spatial}, {ref, torch::zeros_like(spatial)}, {1.0, 1.0}).item<double>(),
                   37.5);
  EXPECT_THROW(perceptual_distance({pred}, {ref}, {1.0, 1.0}), DimensionError);
}

TEST(Perceptual, ZeroOnEqualNonNegativeOtherwise) {
  auto x = torch::rand({2, 3, 32, 32}) * 2 - 1;
  EXPECT_EQ(lpips_loss(x, x).item<double>(), 0.0);
  torch::manual_seed(1);
  for (int i = 0; i < 1000; ++i) {
    auto a = torch::rand({1, 3, 8, 8}) * 2 - 1, b = torch::rand({1, 3, 8, 8}) * 2 - 1;
    ASSERT_GE(lpips_loss(a, b).item<double>(), 0.0);
  }
}

TEST(Perceptual, ConfigValidation) {
  PerceptualConfig c;
  c.gammas = {1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = PerceptualConfig{};
  c.layer_ids = {0, 5, 1};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Losses, DecompositionAndLambdaZero) {
  auto cfg = small_config();
  auto data = samples(2);
  auto batch = make_batch(data, {0, 1}, torch::kDouble);
  auto t = torch::tensor({10, 700});
  auto eps = torch::randn({2, 3, 32, 32}, torch::kDouble);
  Trainer tr(cfg, small_model(cfg, torch::kDouble));
  auto l = tr.compute_losses(batch, t, eps);
  EXPECT_NEAR(l.total.item<double>(), l.l_sd.item<double>() + 1e-3 * l.l_lpips.item<double>(), 1e-12);
  EXPECT_GT(l.l_lpips.item<double>(), 0.0);

  cfg.lambda_lpips = 0.0;
  Trainer tr0(cfg, small_model(cfg, torch::kDouble));
  auto l0 = tr0.compute_losses(batch, t, eps);
  EXPECT_EQ(l0.total.item<double>(), l0.l_sd.item<double>());
}

TEST(Losses, OraclePredictionGivesZero) {
  auto cfg = small_config();
  auto data = samples(2);
  auto batch = make_batch(data, {0, 1}, torch::kDouble);
  auto eps = torch::randn({2, 3, 32, 32}, torch::kDouble);
  Trainer tr(cfg, small_model(cfg, torch::kDouble));
  EpsOverride oracle = [](const torch::Tensor&, const torch::Tensor&, const torch::Tensor& e) { return e; };
  auto l = tr.compute_losses(batch, torch::tensor({0, 999}), eps, &oracle);
  EXPECT_EQ(l.l_sd.item<double>(), 0.0);
  EXPECT_LT(l.l_lpips.item<double>(), 1e-12);
}

TEST(Losses, GateGradientMatchesCentralDifference) {
  auto cfg = small_config();
  cfg.lambda_lpips = 0.5;
  auto data = samples(2);
  auto batch = make_batch(data, {0, 1}, torch::kDouble);
  auto t = torch::tensor({50, 300});
  auto eps = torch::randn({2, 3, 32, 32}, torch::kDouble);
  auto model = small_model(cfg, torch::kDouble);
  Trainer tr(cfg, model);
  auto& gate = model->firm()->gate();
  gate.data().fill_(0.4);
  tr.compute_losses(batch, t, eps).total.backward();
  const double analytic = gate.grad().item<double>();
  const double h = 1e-6;
  double up, down;
  {
    torch::NoGradGuard ng;
    gate.fill_(0.4 + h);
    up = tr.compute_losses(batch, t, eps).total.item<double>();
    gate.fill_(0.4 - h);
    down = tr.compute_losses(batch, t, eps).total.item<double>();
  }
  const double numeric = (up - down) / (2 * h);
  EXPECT_NEAR(analytic, numeric, 1e-4 * std::abs(numeric) + 1e-9);
}

TEST(Trainer, PaperPolicyLeavesFrozenBitsUntouched) {
  auto cfg = small_config();
  auto data = samples(4);
  auto model = small_model(cfg);
  std::map<std::string, torch::Tensor> before;
  for (const auto& p : model->tagged_parameters()) before[p.name] = p.tensor.detach().clone();
  Trainer tr(cfg, model);
  EXPECT_EQ(tr.lr_groups().size(), 2u);
  for (int i = 0; i < 3; ++i) tr.step(make_batch(data, {0, 1}));
  int64_t changed_trainable = 0;
  for (const auto& p : model->tagged_parameters()) {
    if (p.tag == nn::ParamGroupTag::frozen) {
      EXPECT_FALSE(p.tensor.requires_grad()) << p.name;
      EXPECT_TRUE(torch::equal(p.tensor, before[p.name])) << p.name;
    } else if (!torch::equal(p.tensor, before[p.name])) {
      ++changed_trainable;
    }
  }
  EXPECT_GT(changed_trainable, 0);
}

TEST(Trainer, FullPolicyAddsBackboneGroup) {
  auto cfg = small_config();
  cfg.policy = nn::ParamPolicy::full;
  cfg.lr_backbone = 3e-5;
  Trainer tr(cfg, small_model(cfg));
  auto g = tr.lr_groups();
  EXPECT_EQ(g.size(), 3u);
  EXPECT_DOUBLE_EQ(g.at("frozen").get<double>(), 3e-5);
  EXPECT_DOUBLE_EQ(g.at("controller_firm").get<double>(), 1e-4);
  EXPECT_DOUBLE_EQ(g.at("cross_attn_projectors").get<double>(), 5e-6);
}

TEST(Trainer, TimestepsUniform) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(123);
  auto t = sample_timesteps(gen, 10000, 1000);
  EXPECT_GE(t.min().item<int64_t>(), 0);
  EXPECT_LT(t.max().item<int64_t>(), 1000);
  auto counts = torch::bincount(t.div(100, "floor"), {}, 10).to(torch::kDouble);
  const double chi2 = ((counts - 1000.0).pow(2) / 1000.0).sum().item<double>();
  EXPECT_LT(chi2, 27.877);  // df = 9, p = 0.001
}

TEST(Trainer, NonFiniteLossRaisesBeforeUpdate) {
  auto cfg = small_config();
  auto data = samples(2);
  auto model = small_model(cfg);
  Trainer tr(cfg, model);
  for (auto& item : model->named_parameters())
    if (item.key() == "denoiser.out_conv.bias") item.value().data().fill_(std::nan(""));
  auto gate_before = model->firm()->gate().detach().clone();
  try {
    tr.step(make_batch(data, {0, 1}));
    FAIL();
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("t=["), std::string::npos);
    EXPECT_NE(msg.find(data[1].id), std::string::npos);
  }
  EXPECT_TRUE(torch::equal(model->firm()->gate(), gate_before));
  EXPECT_EQ(tr.steps_taken(), 0);
}

TEST(Train, DeterministicLogsAndCheckpoints) {
  auto cfg = small_config();
  cfg.max_steps = 3;
  auto data = samples(8);
  TempDir a("train_a"), b("train_b");
  auto ra = train::train(cfg, data, a.path()), rb = train::train(cfg, data, b.path());
  ASSERT_EQ(ra.log.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(ra.log[i].l_sd, rb.log[i].l_sd);
    EXPECT_EQ(ra.log[i].total, rb.log[i].total);
  }
  ASSERT_EQ(ra.checkpoints.size(), 1u);
  EXPECT_EQ(slurp(ra.checkpoints[0]), slurp(rb.checkpoints[0]));
  EXPECT_EQ(ra.checkpoints[0].filename(), "checkpoint_e0001.ctcg");

  std::ifstream log(ra.log_path);
  std::string line;
  int64_t n = 0;
  while (std::getline(log, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("step"), ++n);
    for (const char* k : {"l_sd", "l_lpips", "total", "lr_groups"}) EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(n, 3);
}

TEST(Train, EpochsAndBatchCount) {
  auto cfg = small_config();
  cfg.epochs = 2;
  cfg.batch_size = 3;
  TempDir dir("train_epochs");
  auto r = train::train(cfg, samples(5), dir.path());
  EXPECT_EQ(r.log.size(), 4u);  // ceil(5/3) per epoch
  EXPECT_EQ(r.checkpoints.size(), 2u);
  EXPECT_EQ(read_checkpoint_header(r.checkpoints[1]).at("meta").at("epoch"), 2);
}

TEST(Checkpoint, RoundTripBitExact) {
  auto cfg = small_config();
  cfg.codec = Codec::patchify4;
  auto model = small_model(cfg);
  {
    torch::NoGradGuard ng;
    model->firm()->gate().fill_(0.25);
  }
  TempDir dir("ckpt");
  save_checkpoint(dir / "m.ctcg", model, {{"note", "x"}});
  auto loaded = load_checkpoint(dir / "m.ctcg");
  EXPECT_EQ(loaded.meta.at("note"), "x");
  auto a = model->named_parameters(), b = loaded.model->named_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (const auto& item : a) EXPECT_TRUE(torch::equal(item.value(), b[item.key()])) << item.key();
  EXPECT_EQ(nn::to_json(loaded.model->config()), nn::to_json(model->config()));
}

TEST(Checkpoint, CorruptFilesRejected) {
  auto cfg = small_config();
  auto model = small_model(cfg);
  TempDir dir("ckpt_bad");
  save_checkpoint(dir / "ok.ctcg", model);
  const auto bytes = slurp(dir / "ok.ctcg");

  auto magic = bytes;
  magic[0] = 'X';
  spit(dir / "magic.ctcg", magic);
  EXPECT_THROW(load_checkpoint(dir / "magic.ctcg"), LoadError);

  auto version = bytes;
  version[4] = 9;
  spit(dir / "version.ctcg", version);
  EXPECT_THROW(load_checkpoint(dir / "version.ctcg"), LoadError);

  spit(dir / "short.ctcg", bytes.substr(0, bytes.size() - 7));
  EXPECT_THROW(load_checkpoint(dir / "short.ctcg"), LoadError);
  spit(dir / "long.ctcg", bytes + "xx");
  EXPECT_THROW(load_checkpoint(dir / "long.ctcg"), LoadError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ctcg"), LoadError);

  spit(dir / "nokey.ctcg", with_header(bytes, [](nlohmann::json& h) { h["config"]["denoiser"].erase("heads"); }));
  try {
    load_checkpoint(dir / "nokey.ctcg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "heads");
  }
}

TEST(TrainConfig, JsonRoundTripAndUnknownKeys) {
  auto c = small_config();
  c.codec = Codec::patchify4;
  c.policy = nn::ParamPolicy::full;
  c.perceptual.gammas = {1.0, 0.5, 0.25};
  auto back = train_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  try {
    train_config_from_json({{"learning_rate", 1.0}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "learning_rate");
  }
  EXPECT_THROW(train_config_from_json({{"batch_size", "four"}}), ConfigError);
  TrainConfig bad;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.lr_projectors = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Train, EmaSmoothing) {
  auto s = ema_smooth({1.0, 0.0, 0.0});
  ASSERT_EQ(s.size(), 3u);
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_DOUBLE_EQ(s[1], 0.9);
  EXPECT_DOUBLE_EQ(s[2], 0.81);
}

TEST(Generate, ShapeRangeAndReproducibility) {
  auto cfg = small_config();
  auto model = small_model(cfg);
  auto masks = torch::zeros({2, 1, 32, 32});
  masks.slice(2, 8, 24).slice(3, 8, 24).fill_(1.0);
  diffusion::SamplerConfig s{4, 0.0, 9};
  auto a = generate_images(model, cfg, masks, {"a crab", "a fish"}, s);
  auto b = generate_images(model, cfg, masks, {"a crab", "a fish"}, s);
  EXPECT_EQ(a.images.sizes(), (std::vector<int64_t>{2, 3, 32, 32}));
  EXPECT_LE(a.images.abs().max().item<double>(), 1.0);
  EXPECT_TRUE(torch::equal(a.images, b.images));
  EXPECT_THROW(generate_images(model, cfg, masks, {"one"}, s), ValidationError);
  EXPECT_THROW(generate_images(model, cfg, masks, {"a", "b"}, diffusion::SamplerConfig{0}), SamplerConfigError);
}

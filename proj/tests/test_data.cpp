#include <gtest/gtest.h>

#include <fstream>

#include "ctcig/data/folder.hpp"
#include "ctcig/data/synth.hpp"
#include "ctcig/image/image.hpp"
#include "test_util.hpp"

using namespace ctcig;
using namespace ctcig::data;
using ctcig::testing::TempDir;

namespace {

std::vector<SynthConfig> all_kinds(double delta) {
  std::vector<SynthConfig> out;
  for (auto t : {TextureKind::value_noise, TextureKind::stripes, TextureKind::blotch})
    for (auto o : {ObjectKind::ellipse, ObjectKind::metaball}) {
      SynthConfig c;
      c.texture_kind = t;
      c.object_kind = o;
      c.contrast_delta = delta;
      c.seed = 17;
      out.push_back(c);
    }
  return out;
}

}  // namespace

TEST(Synth, DeterministicPerIndex) {
  SynthConfig c;
  c.seed = 5;
  auto a = synth_sample(c, 12).sample, b = synth_sample(c, 12).sample;
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_EQ(a.prompts, b.prompts);
  EXPECT_NE(synth_sample(c, 13).sample.image, a.image);
  auto batch = generate_samples(c, 13);
  EXPECT_EQ(batch[12].image, a.image);
}

TEST(Synth, ContrastBoundedByDelta) {
  for (double delta : {0.0, 0.05, 0.1, 0.3})
    for (const auto& c : all_kinds(delta))
      for (int64_t i = 0; i < 30; ++i) {
        auto s = synth_sample(c, i);
        const auto& img = s.sample.image;
        for (int ch = 0; ch < 3; ++ch) {
          double sum = 0;
          int64_t n = 0;
          for (int64_t y = 0; y < img.height; ++y)
            for (int64_t x = 0; x < img.width; ++x)
              if (s.sample.mask.at(x, y)) {
                sum += std::abs(img.at(x, y, ch) - s.background.at(x, y, ch)) / 255.0;
                ++n;
              }
          ASSERT_GT(n, 0);
          EXPECT_LE(sum / static_cast<double>(n), delta + 1e-12) << "delta=" << delta << " i=" << i;
        }
        for (int64_t y = 0; y < img.height; ++y)
          for (int64_t x = 0; x < img.width; ++x)
            if (!s.sample.mask.at(x, y))
              for (int ch = 0; ch < 3; ++ch) ASSERT_EQ(img.at(x, y, ch), s.background.at(x, y, ch));
      }
}

TEST(Synth, MaskAreaWithinBounds) {
  for (auto o : {ObjectKind::ellipse, ObjectKind::metaball}) {
    SynthConfig c;
    c.object_kind = o;
    c.seed = 3;
    for (int64_t i = 0; i < 1000; ++i) {
      auto m = synth_sample(c, i).sample.mask;
      const double f = static_cast<double>(m.area()) / static_cast<double>(m.width * m.height);
      ASSERT_GE(f, kMinMaskFraction);
      ASSERT_LE(f, kMaxMaskFraction);
    }
  }
}

TEST(Synth, SizesAndValidation) {
  for (int64_t size : {32, 64, 128}) {
    SynthConfig c;
    c.size = size;
    auto s = synth_sample(c, 0).sample;
    EXPECT_EQ(s.image.width, size);
    EXPECT_EQ(s.mask.height, size);
  }
  SynthConfig bad;
  bad.size = 48;
  EXPECT_THROW(synth_sample(bad, 0), ConfigError);
  bad.size = 32;
  bad.contrast_delta = 0.5;
  EXPECT_THROW(synth_sample(bad, 0), ConfigError);
  EXPECT_THROW(parse_texture_kind("plaid"), ConfigError);
  EXPECT_EQ(parse_object_kind(to_string(ObjectKind::metaball)), ObjectKind::metaball);
}

TEST(Synth, PromptsAreWellFormed) {
  auto s = synth_sample(SynthConfig{}, 4).sample;
  EXPECT_FALSE(s.prompts.t_detail.empty());
  EXPECT_EQ(s.prompts.t_simple.back(), '.');
  EXPECT_EQ(std::count(s.prompts.t_simple.begin(), s.prompts.t_simple.end(), '.'), 1);
}

TEST(Folder, RoundTrip) {
  TempDir dir("data_rt");
  auto samples = generate_samples(SynthConfig{}, 5);
  write_folder(samples, dir.path());
  auto r = ingest_folder(dir / "images", dir / "masks", dir / "prompts.jsonl");
  EXPECT_TRUE(r.skipped.empty());
  ASSERT_EQ(r.samples.size(), 5u);
  std::map<std::string, const TrainingSample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;
  for (const auto& s : r.samples) {
    ASSERT_TRUE(by_id.count(s.id));
    EXPECT_EQ(s.image, by_id[s.id]->image);
    EXPECT_EQ(s.mask, by_id[s.id]->mask);
    EXPECT_EQ(s.prompts.t_simple, by_id[s.id]->prompts.t_simple);
    EXPECT_FALSE(s.placeholder_prompts);
    EXPECT_EQ(s.origin, SampleOrigin::folder);
  }
}

TEST(Folder, OrphansSkippedAndPlaceholders) {
  TempDir dir("data_orphan");
  auto samples = generate_samples(SynthConfig{}, 3);
  write_folder(samples, dir.path());
  std::filesystem::remove(dir / ("masks/" + samples[0].id + ".png"));
  std::filesystem::remove(dir / ("images/" + samples[1].id + ".png"));
  auto r = ingest_folder(dir / "images", dir / "masks", std::nullopt);
  ASSERT_EQ(r.samples.size(), 1u);
  EXPECT_EQ(r.samples[0].id, samples[2].id);
  EXPECT_TRUE(r.samples[0].placeholder_prompts);
  EXPECT_FALSE(r.samples[0].prompts.t_simple.empty());
  ASSERT_EQ(r.skipped.size(), 2u);
}

TEST(Folder, SizeMismatchAndBadInputs) {
  TempDir dir("data_bad");
  auto samples = generate_samples(SynthConfig{}, 1);
  write_folder(samples, dir.path());
  image::write_png(dir / ("masks/" + samples[0].id + ".png"), image::BinaryImage(16, 16));
  EXPECT_THROW(ingest_folder(dir / "images", dir / "masks", std::nullopt), IngestionError);
  EXPECT_THROW(ingest_folder(dir / "nope", dir / "masks", std::nullopt), IngestionError);
  std::ofstream(dir / "bad.jsonl") << "{not json\n";
  EXPECT_THROW(read_prompts_jsonl(dir / "bad.jsonl"), IngestionError);
}

TEST(Image, PngRoundTripAndTensor) {
  auto s = synth_sample(SynthConfig{}, 0).sample;
  EXPECT_EQ(image::decode_png(image::encode_png(s.image)), s.image);
  auto t = image::to_tensor(s.image);
  EXPECT_EQ(t.sizes(), (std::vector<int64_t>{3, 32, 32}));
  EXPECT_GE(t.min().item<double>(), -1.0);
  EXPECT_LE(t.max().item<double>(), 1.0);
  EXPECT_EQ(image::from_tensor(t), s.image);
}

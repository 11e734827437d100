#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <fstream>
#include <random>

#include "ctcig/app/mock_server.hpp"
#include "ctcig/data/synth.hpp"
#include "ctcig/eval/embed.hpp"
#include "ctcig/eval/feature_pyramid.hpp"
#include "ctcig/eval/metrics.hpp"
#include "ctcig/image/image.hpp"
#include "test_util.hpp"

using namespace ctcig;
using namespace ctcig::eval;
using ctcig::testing::TempDir;

namespace {

EmbeddingSet gaussian_set(int64_t n, int64_t d, double shift, double scale, uint64_t seed,
                          const std::string& provider = "test") {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  EmbeddingSet s;
  s.vectors.resize(n, d);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j) s.vectors(i, j) = shift + scale * g(rng);
  s.provider_id = provider;
  return s;
}

EmbeddingSet rows(std::initializer_list<std::vector<double>> r) {
  EmbeddingSet s;
  s.vectors.resize(static_cast<int64_t>(r.size()), static_cast<int64_t>(r.begin()->size()));
  int64_t i = 0;
  for (const auto& row : r) {
    for (size_t j = 0; j < row.size(); ++j) s.vectors(i, static_cast<int64_t>(j)) = row[j];
    s.item_ids.push_back("item" + std::to_string(i));
    ++i;
  }
  s.provider_id = "test";
  return s;
}

double kernel_oracle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double dot = 0;
  for (int64_t i = 0; i < a.size(); ++i) dot += a(i) * b(i);
  const double base = dot / static_cast<double>(a.size()) + 1.0;
  return base * base * base;
}

double mmd_oracle(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const auto m = static_cast<double>(x.rows());
  double kxx = 0, kyy = 0, kxy = 0;
  for (int64_t i = 0; i < x.rows(); ++i)
    for (int64_t j = 0; j < x.rows(); ++j) {
      if (i != j) {
        kxx += kernel_oracle(x.row(i), x.row(j));
        kyy += kernel_oracle(y.row(i), y.row(j));
      }
      kxy += kernel_oracle(x.row(i), y.row(j));
    }
  return kxx / (m * (m - 1)) + kyy / (m * (m - 1)) - 2.0 * kxy / (m * m);
}

Eigen::MatrixXd random_spd(int64_t d, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(d, d);
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = 0; j < d; ++j) a(i, j) = g(rng);
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST(Fid, OneDimensionalClosedForms) {
  Eigen::VectorXd m0(1), m1(1);
  m0 << 0.0;
  m1 << 1.0;
  Eigen::MatrixXd v1(1, 1), v4(1, 1);
  v1 << 1.0;
  v4 << 4.0;
  EXPECT_NEAR(fid_from_moments(m0, v1, m1, v1).value, 1.0, 1e-12);
  EXPECT_NEAR(fid_from_moments(m0, v1, m0, v4).value, 1.0, 1e-12);
}

TEST(Fid, MatchesEigenOfProductOracle) {
  const int64_t d = 6;
  auto s1 = random_spd(d, 1), s2 = random_spd(d, 2);
  Eigen::VectorXd mu1 = Eigen::VectorXd::LinSpaced(d, 0.0, 1.0), mu2 = Eigen::VectorXd::Constant(d, 0.3);
  Eigen::EigenSolver<Eigen::MatrixXd> es(s1 * s2);
  double tr_sqrt = 0;
  for (int64_t i = 0; i < d; ++i) tr_sqrt += std::sqrt(es.eigenvalues()(i).real());
  const double want = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr_sqrt;
  auto got = fid_from_moments(mu1, s1, mu2, s2);
  EXPECT_NEAR(got.value, want, 1e-8 * std::abs(want));
  EXPECT_FALSE(got.warning);
}

TEST(Fid, SelfDistanceZeroAndSymmetric) {
  auto a = gaussian_set(200, 8, 0.0, 1.0, 3), b = gaussian_set(150, 8, 0.5, 2.0, 4);
  EXPECT_NEAR(fid(a, a), 0.0, 1e-6);
  EXPECT_NEAR(fid(a, b), fid(b, a), 1e-8 * fid(a, b));
  EXPECT_GT(fid(a, b), fid(a, gaussian_set(150, 8, 0.0, 1.0, 5)));
}

TEST(Fid, SampleMomentsUseUnbiasedCovariance) {
  auto a = rows({{0.0, 1.0}, {2.0, 3.0}, {4.0, -1.0}});
  auto b = rows({{1.0, 1.0}, {0.0, 0.0}, {2.0, 5.0}});
  auto moments = [](const Eigen::MatrixXd& x) {
    Eigen::VectorXd mu = x.colwise().mean();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(x.cols(), x.cols());
    for (int64_t i = 0; i < x.rows(); ++i) {
      Eigen::VectorXd r = x.row(i).transpose() - mu;
      c += r * r.transpose();
    }
    return std::pair{mu, Eigen::MatrixXd(c / static_cast<double>(x.rows() - 1))};
  };
  auto [ma, ca] = moments(a.vectors);
  auto [mb, cb] = moments(b.vectors);
  EXPECT_NEAR(fid(a, b), fid_from_moments(ma, ca, mb, cb).value, 1e-10);
}

TEST(Fid, ContractErrors) {
  auto a = gaussian_set(10, 4, 0, 1, 1);
  EXPECT_THROW(fid(a, gaussian_set(10, 4, 0, 1, 1, "other")), ValidationError);
  EXPECT_THROW(fid(a, gaussian_set(10, 5, 0, 1, 1)), ValidationError);
  EXPECT_THROW(fid(a, gaussian_set(1, 4, 0, 1, 1)), ValidationError);
  auto bad = a;
  bad.vectors(0, 0) = std::nan("");
  EXPECT_THROW(fid(bad, a), ValidationError);
}

TEST(Kid, KernelAndHandExample) {
  Eigen::VectorXd e1(2), e2(2);
  e1 << 1.0, 0.0;
  e2 << 0.0, 1.0;
  EXPECT_DOUBLE_EQ(polynomial_kernel(e1, e1), 3.375);
  EXPECT_DOUBLE_EQ(polynomial_kernel(e1, e2), 1.0);
  auto x = rows({{1.0, 0.0}, {0.0, 1.0}});
  EXPECT_NEAR(mmd2_unbiased(x.vectors, x.vectors), -2.375, 1e-12);
}

TEST(Kid, IdenticalPointsGiveZero) {
  EmbeddingSet same;
  same.vectors = Eigen::MatrixXd::Constant(12, 3, -0.4);
  same.provider_id = "test";
  EXPECT_NEAR(mmd2_unbiased(same.vectors, same.vectors), 0.0, 1e-12);
  EXPECT_NEAR(kid(same, same, KidOptions{5, 4, 1}), 0.0, 1e-12);
}

TEST(Kid, MatchesBruteForceOracle) {
  auto a = gaussian_set(12, 5, 0.0, 1.0, 8), b = gaussian_set(12, 5, 0.4, 1.3, 9);
  EXPECT_NEAR(mmd2_unbiased(a.vectors, b.vectors), mmd_oracle(a.vectors, b.vectors), 1e-10);
}

TEST(Kid, PermutationInvariant) {
  auto a = gaussian_set(20, 4, 0.0, 1.0, 10), b = gaussian_set(20, 4, 0.2, 1.0, 11);
  Eigen::PermutationMatrix<Eigen::Dynamic> p(20);
  p.setIdentity();
  std::mt19937 rng(0);
  std::shuffle(p.indices().data(), p.indices().data() + 20, rng);
  EXPECT_NEAR(mmd2_unbiased(p * a.vectors, b.vectors), mmd2_unbiased(a.vectors, b.vectors), 1e-10);
}

TEST(Kid, FullSubsetEqualsMmd) {
  auto a = gaussian_set(15, 4, 0.0, 1.0, 12), b = gaussian_set(15, 4, 1.0, 1.0, 13);
  for (uint64_t seed : {0u, 7u}) {
    KidOptions o{15, 3, seed};
    EXPECT_NEAR(kid(a, b, o), mmd2_unbiased(a.vectors, b.vectors), 1e-10);
  }
}

TEST(Kid, FartherClusterScoresHigher) {
  auto a = gaussian_set(100, 8, 0.0, 1.0, 14);
  auto near = gaussian_set(100, 8, 0.2, 1.0, 15), far = gaussian_set(100, 8, 3.0, 1.0, 16);
  auto o = kid_defaults(a, near);
  EXPECT_EQ(o.subset_size, 100);
  EXPECT_LT(kid(a, near, o), kid(a, far, o));
}

TEST(Kid, DefaultsAndErrors) {
  auto a = gaussian_set(30, 4, 0, 1, 1), b = gaussian_set(50, 4, 0, 1, 2);
  EXPECT_EQ(kid_defaults(a, b).subset_size, 30);
  EXPECT_THROW(kid(a, b, KidOptions{31, 2, 0}), ValidationError);
  EXPECT_THROW(kid(a, b, KidOptions{10, 0, 0}), ValidationError);
  EXPECT_THROW(mmd2_unbiased(a.vectors, b.vectors), ValidationError);
}

TEST(ClipScore, HandValues) {
  auto img = rows({{1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}});
  auto txt = rows({{2.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.5, std::sqrt(3.0) / 2.0}});
  // cosines 1, 0, -1, 0.5 -> 2.5, 0, 0, 1.25
  EXPECT_NEAR(clip_score(img, txt), (2.5 + 0.0 + 0.0 + 1.25) / 4.0, 1e-12);
  auto one_img = rows({{1.0, 0.0}}), one_txt = rows({{3.0, 0.0}});
  EXPECT_NEAR(clip_score(one_img, one_txt), 2.5, 1e-12);
}

TEST(ClipScore, RangeOverRandomPairs) {
  auto a = gaussian_set(300, 16, 0, 1, 20), b = gaussian_set(300, 16, 0, 1, 21);
  for (int64_t i = 0; i < 300; ++i) {
    a.item_ids.push_back(std::to_string(i));
    b.item_ids.push_back(std::to_string(i));
  }
  const double s = clip_score(a, b);
  EXPECT_GE(s, 0.0);
  EXPECT_LE(s, 2.5);
}

TEST(ClipScore, MisalignedIdsNamed) {
  auto img = rows({{1.0, 0.0}, {0.0, 1.0}});
  auto txt = rows({{1.0, 0.0}, {0.0, 1.0}});
  txt.item_ids[1] = "other";
  try {
    clip_score(img, txt);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("other"), std::string::npos);
  }
  EXPECT_THROW(clip_score(img, rows({{1.0, 0.0}})), ValidationError);
}

TEST(FeaturePyramid, DeterministicAndShaped) {
  TinyFeaturePyramid a, b;
  auto x = torch::rand({2, 3, 32, 32}) * 2 - 1;
  auto fa = a.features(x), fb = b.features(x);
  ASSERT_EQ(fa.size(), 3u);
  for (size_t l = 0; l < 3; ++l) EXPECT_TRUE(torch::equal(fa[l], fb[l]));
  EXPECT_EQ(fa[1].sizes(), (std::vector<int64_t>{2, 64, 16, 16}));
  EXPECT_EQ(a.embed(x).sizes(), (std::vector<int64_t>{2, 192}));
}

TEST(Embed, TinyProviderDeterministicAndOrientationSensitive) {
  EmbeddingProvider p;
  EXPECT_EQ(p.id(), kTinyFixedId);
  std::vector<image::RgbImage> imgs, rotated;
  std::vector<std::string> ids;
  data::SynthConfig cfg;
  cfg.texture_kind = data::TextureKind::stripes;
  for (int64_t i = 0; i < 20; ++i) {
    auto img = data::synth_sample(cfg, i).sample.image;
    image::RgbImage r(img.width, img.height);
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x)
        for (int c = 0; c < 3; ++c) r.at(x, y, c) = img.at(img.width - 1 - x, img.height - 1 - y, c);
    imgs.push_back(img);
    rotated.push_back(r);
    ids.push_back(std::to_string(i));
  }
  auto e1 = embed_image_list(imgs, ids, p, 1), e2 = embed_image_list(imgs, ids, p, 4);
  EXPECT_EQ(e1.dim(), 192);
  EXPECT_TRUE(e1.vectors == e2.vectors);
  auto er = embed_image_list(rotated, ids, p, 2);
  for (int64_t i = 0; i < 20; ++i) EXPECT_GT((e1.vectors.row(i) - er.vectors.row(i)).norm(), 1e-6) << i;
}

TEST(Embed, DirectoryScanSkipsUnreadable) {
  TempDir dir("embed");
  EmbeddingProvider p;
  EXPECT_THROW(embed_images(dir.path(), p), ValidationError);
  for (int64_t i = 0; i < 3; ++i)
    image::write_png(dir / ("img" + std::to_string(i) + ".png"), data::synth_sample(data::SynthConfig{}, i).sample.image);
  std::ofstream(dir / "broken.png") << "not a png";
  auto r = embed_images(dir.path(), p);
  EXPECT_EQ(r.set.size(), 3);
  EXPECT_EQ(r.set.item_ids, (std::vector<std::string>{"img0", "img1", "img2"}));
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0].first, "broken.png");
}

TEST(Embed, TextSideMatchesImageDim) {
  EmbeddingProvider p;
  auto t = embed_texts({"a crab", "a fish"}, {"a", "b"}, p);
  EXPECT_EQ(t.dim(), 192);
  EXPECT_EQ(t.item_ids, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.provider_id, kTinyFixedId);
}

TEST(Embed, ExternalProviderOverHttp) {
  app::MockVlmServer server(1);
  server.start();
  EmbeddingProvider ext;
  ext.kind = ProviderKind::external;
  ext.endpoint.base_url = server.base_url();
  ext.endpoint.model_name = "embedder-x";
  EXPECT_EQ(ext.id(), "external:embedder-x");
  std::vector<image::RgbImage> imgs = {data::synth_sample(data::SynthConfig{}, 0).sample.image};
  auto remote = embed_image_list(imgs, {"0"}, ext, 1);
  auto local = embed_image_list(imgs, {"0"}, EmbeddingProvider{}, 1);
  EXPECT_EQ(remote.provider_id, "external:embedder-x");
  ASSERT_EQ(remote.dim(), local.dim());
  EXPECT_LT((remote.vectors - local.vectors).cwiseAbs().maxCoeff(), 1e-9);
  auto txt = embed_texts({"a crab"}, {"0"}, ext);
  EXPECT_EQ(txt.dim(), 192);
  server.stop();
  EXPECT_THROW(fid(remote, local), ValidationError);
}

TEST(Embed, WireHelpers) {
  auto body = embeddings_reply("m", {{1.0, 2.0}, {3.0, 4.0}});
  EXPECT_EQ(vectors_from_reply(body), (std::vector<std::vector<double>>{{1.0, 2.0}, {3.0, 4.0}}));
  auto req = embeddings_request("m", {"x"});
  EXPECT_EQ(req.at("input").size(), 1u);
  EXPECT_THROW(parse_provider_kind("inception"), ConfigError);
}

TEST(MetricReport, JsonHasPresentFieldsOnly) {
  MetricReport r;
  r.fid = 1.5;
  r.n_real = 3;
  r.n_fake = 4;
  r.provider_id = kTinyFixedId;
  auto j = to_json(r);
  EXPECT_EQ(j.at("fid"), 1.5);
  EXPECT_EQ(j.at("n_real"), 3);
  EXPECT_EQ(j.at("provider_id"), kTinyFixedId);
  EXPECT_TRUE(!j.contains("kid") || j.at("kid").is_null());
}

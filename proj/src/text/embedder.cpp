#include "ctcig/text/embedder.hpp"

#include <cctype>
#include <cmath>
#include <random>

namespace ctcig::text {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

torch::Tensor seeded_normal(uint64_t seed, int64_t rows, int64_t cols, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto t = torch::empty({rows, cols}, torch::kDouble);
  auto* p = t.data_ptr<double>();
  for (int64_t i = 0; i < rows * cols; ++i) p[i] = nd(rng) * scale;
  return t;
}

}  // namespace

EmbeddingMatrix EmbeddingMatrix::to(torch::ScalarType dtype) const {
  EmbeddingMatrix m = *this;
  m.data = data.to(dtype);
  return m;
}

EmbeddingMatrix EmbeddingMatrix::select(const std::vector<int64_t>& idx) const {
  EmbeddingMatrix m;
  m.data = data.index_select(0, torch::tensor(idx, torch::kLong));
  for (auto i : idx) {
    m.lengths.push_back(lengths.at(static_cast<size_t>(i)));
    m.truncated.push_back(truncated.at(static_cast<size_t>(i)));
    m.empty_prompt.push_back(empty_prompt.at(static_cast<size_t>(i)));
  }
  return m;
}

std::vector<std::string> tokenize(std::string_view prompt) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : prompt) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

uint64_t token_hash(std::string_view token, uint64_t seed) {
  uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&h](unsigned char b) {
    h ^= b;
    h *= 0x100000001B3ULL;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
  for (char c : token) mix(static_cast<unsigned char>(c));
  return h;
}

TextEmbedder::TextEmbedder(TextEmbedderConfig cfg) : cfg_(cfg) {
  if (cfg_.max_tokens < 1) throw ConfigError("max_tokens", "must be >= 1");
  if (cfg_.text_dim < 2 || cfg_.text_dim % 2) throw ConfigError("text_dim", "must be even and >= 2");
  if (cfg_.buckets < 1) throw ConfigError("buckets", "must be >= 1");
  const int64_t d = cfg_.text_dim;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  wq_ = seeded_normal(splitmix64(cfg_.seed ^ 0x71), d, d, s);
  wk_ = seeded_normal(splitmix64(cfg_.seed ^ 0x6B), d, d, s);
  wv_ = seeded_normal(splitmix64(cfg_.seed ^ 0x76), d, d, s);
  wo_ = seeded_normal(splitmix64(cfg_.seed ^ 0x6F), d, d, s);

  positions_ = torch::zeros({cfg_.max_tokens, d}, torch::kDouble);
  auto acc = positions_.accessor<double, 2>();
  for (int64_t p = 0; p < cfg_.max_tokens; ++p) {
    for (int64_t i = 0; i < d / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
      acc[p][2 * i] = std::sin(static_cast<double>(p) * freq);
      acc[p][2 * i + 1] = std::cos(static_cast<double>(p) * freq);
    }
  }
}

torch::Tensor TextEmbedder::bucket_row(uint64_t bucket) const {
  return seeded_normal(splitmix64(cfg_.seed ^ splitmix64(bucket + 1)), 1, cfg_.text_dim, 1.0)
      .view({cfg_.text_dim});
}

EmbeddingMatrix TextEmbedder::embed(const std::vector<std::string>& prompts,
                                    torch::ScalarType dtype) const {
  const auto batch = static_cast<int64_t>(prompts.size());
  const int64_t d = cfg_.text_dim;
  EmbeddingMatrix m;
  auto data = torch::zeros({batch, cfg_.max_tokens, d}, torch::kDouble);
  for (int64_t b = 0; b < batch; ++b) {
    auto tokens = tokenize(prompts[static_cast<size_t>(b)]);
    const bool truncated = static_cast<int64_t>(tokens.size()) > cfg_.max_tokens;
    if (truncated) tokens.resize(static_cast<size_t>(cfg_.max_tokens));
    const auto n = static_cast<int64_t>(tokens.size());
    m.lengths.push_back(n);
    m.truncated.push_back(truncated);
    m.empty_prompt.push_back(n == 0);
    if (n == 0) continue;

    auto x = torch::empty({n, d}, torch::kDouble);
    for (int64_t i = 0; i < n; ++i) {
      const uint64_t bucket = token_hash(tokens[static_cast<size_t>(i)], cfg_.seed) %
                              static_cast<uint64_t>(cfg_.buckets);
      x[i] = bucket_row(bucket);
    }
    x = x + positions_.slice(0, 0, n);
    auto scores = torch::matmul(torch::matmul(x, wq_), torch::matmul(x, wk_).t()) /
                  std::sqrt(static_cast<double>(d));
    auto mixed = torch::matmul(torch::matmul(torch::softmax(scores, -1), torch::matmul(x, wv_)), wo_);
    data[b].slice(0, 0, n).copy_(x + mixed);
  }
  m.data = data.to(dtype);
  return m;
}

torch::Tensor TextEmbedder::pooled(const std::vector<std::string>& prompts, int64_t out_dim) const {
  auto m = embed(prompts, torch::kDouble);
  const auto proj = seeded_normal(splitmix64(cfg_.seed ^ 0x9001 ^ static_cast<uint64_t>(out_dim)),
                                  cfg_.text_dim, out_dim,
                                  1.0 / std::sqrt(static_cast<double>(cfg_.text_dim)));
  auto out = torch::zeros({m.batch(), out_dim}, torch::kDouble);
  for (int64_t b = 0; b < m.batch(); ++b) {
    const auto n = m.lengths[static_cast<size_t>(b)];
    if (n == 0) continue;
    out[b] = torch::matmul(m.data[b].slice(0, 0, n).mean(0), proj);
  }
  return out;
}

}  // namespace ctcig::text

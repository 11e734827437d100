#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ctcig/tensor.hpp"

namespace ctcig::text {

/// Cross-attention conditioning c. Rows at or beyond lengths[b] are zero.
/// An item with length 0 means "no prompt": the denoiser substitutes its
/// learned null row.
struct EmbeddingMatrix {
  torch::Tensor data;  // (batch, max_tokens, text_dim)
  std::vector<int64_t> lengths;
  std::vector<bool> truncated;
  std::vector<bool> empty_prompt;

  int64_t batch() const { return data.size(0); }
  EmbeddingMatrix to(torch::ScalarType dtype) const;
  /// Rows `idx` of this batch, in order.
  EmbeddingMatrix select(const std::vector<int64_t>& idx) const;
};

struct TextEmbedderConfig {
  int64_t max_tokens = 77;
  int64_t text_dim = 128;
  int64_t buckets = 1 << 16;
  uint64_t seed = 0x5EED7E47ULL;
};

/// Lowercased alphanumeric runs; everything else separates tokens.
std::vector<std::string> tokenize(std::string_view prompt);

/// FNV-1a over the seed bytes followed by the token bytes.
uint64_t token_hash(std::string_view token, uint64_t seed);

/// Deterministic stand-in for a frozen text encoder: hashed vocabulary rows,
/// sinusoidal positional offsets, one fixed self-attention mixing layer.
class TextEmbedder {
 public:
  explicit TextEmbedder(TextEmbedderConfig cfg = {});

  const TextEmbedderConfig& config() const { return cfg_; }

  EmbeddingMatrix embed(const std::vector<std::string>& prompts,
                        torch::ScalarType dtype = torch::kFloat) const;

  /// Mean of the valid rows projected to `out_dim` by a fixed seeded matrix;
  /// one row per prompt. Used as the text side of CLIPScore.
  torch::Tensor pooled(const std::vector<std::string>& prompts, int64_t out_dim) const;

  /// Vocabulary row for a bucket (generated from the seed on demand).
  torch::Tensor bucket_row(uint64_t bucket) const;

 private:
  TextEmbedderConfig cfg_;
  torch::Tensor wq_, wk_, wv_, wo_;  // (text_dim, text_dim), double
  torch::Tensor positions_;          // (max_tokens, text_dim), double
};

}  // namespace ctcig::text

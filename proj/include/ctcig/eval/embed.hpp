#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ctcig/crdm/transport.hpp"
#include "ctcig/eval/metrics.hpp"
#include "ctcig/image/image.hpp"

namespace ctcig::eval {

enum class ProviderKind { tiny_fixed, external };

ProviderKind parse_provider_kind(const std::string& s);
std::string to_string(ProviderKind k);

inline constexpr const char* kTinyFixedId = "tiny_fixed/v1";

struct EmbeddingProvider {
  ProviderKind kind = ProviderKind::tiny_fixed;
  /// Used when kind == external; POSTs to {base_url}/embeddings.
  crdm::VlmEndpoint endpoint;

  std::string id() const;
};

struct EmbedReport {
  EmbeddingSet set;
  /// (file name, reason)
  std::vector<std::pair<std::string, std::string>> skipped;
};

/// Embeds every *.png in `dir` (sorted by name); item ids are file stems.
/// Unreadable images are skipped and reported.
EmbedReport embed_images(const std::filesystem::path& dir, const EmbeddingProvider& provider, int jobs = 0);

EmbeddingSet embed_image_list(const std::vector<image::RgbImage>& images, const std::vector<std::string>& ids,
                              const EmbeddingProvider& provider, int jobs = 0);

/// Text side for CLIPScore; tiny_fixed uses the hashed text embedder pooled
/// to 192 dims.
EmbeddingSet embed_texts(const std::vector<std::string>& prompts, const std::vector<std::string>& ids,
                         const EmbeddingProvider& provider);

/// Embeddings request body: {"model", "input": [strings]}; images are
/// passed as PNG data URLs.
nlohmann::json embeddings_request(const std::string& model, const std::vector<std::string>& inputs);
nlohmann::json embeddings_reply(const std::string& model, const std::vector<std::vector<double>>& vectors);
std::vector<std::vector<double>> vectors_from_reply(const nlohmann::json& body);

inline constexpr const char* kPngDataUrlPrefix = "data:image/png;base64,";

}  // namespace ctcig::eval

#include "ctcig/eval/embed.hpp"

#include <algorithm>
#include <thread>

#include <httplib.h>

#include "ctcig/errors.hpp"
#include "ctcig/eval/feature_pyramid.hpp"
#include "ctcig/text/embedder.hpp"

namespace ctcig::eval {

ProviderKind parse_provider_kind(const std::string& s) {
  if (s == "tiny_fixed" || s == "tiny") return ProviderKind::tiny_fixed;
  if (s == "external") return ProviderKind::external;
  throw ConfigError("provider", "unknown embedding provider '" + s + "'");
}

std::string to_string(ProviderKind k) { return k == ProviderKind::tiny_fixed ? "tiny_fixed" : "external"; }

std::string EmbeddingProvider::id() const {
  return kind == ProviderKind::tiny_fixed ? kTinyFixedId : "external:" + endpoint.model_name;
}

nlohmann::json embeddings_request(const std::string& model, const std::vector<std::string>& inputs) {
  return {{"model", model}, {"input", inputs}};
}

nlohmann::json embeddings_reply(const std::string& model, const std::vector<std::vector<double>>& vectors) {
  nlohmann::json data = nlohmann::json::array();
  for (size_t i = 0; i < vectors.size(); ++i)
    data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", vectors[i]}});
  return {{"object", "list"}, {"model", model}, {"data", data}};
}

std::vector<std::vector<double>> vectors_from_reply(const nlohmann::json& body) {
  try {
    const auto& data = body.at("data");
    std::vector<std::vector<double>> out(data.size());
    for (const auto& item : data) {
      const size_t idx = item.contains("index") ? item.at("index").get<size_t>() : 0;
      if (idx >= out.size()) throw ProtocolError("embedding index out of range");
      out[idx] = item.at("embedding").get<std::vector<double>>();
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed embeddings reply: ") + e.what());
  }
}

namespace {

std::vector<std::vector<double>> post_embeddings(const crdm::VlmEndpoint& ep, const std::vector<std::string>& inputs) {
  ep.validate();
  const auto [host, prefix] = crdm::split_base_url(ep.base_url);
  httplib::Client cli(host);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(ep.timeout).count();
  cli.set_connection_timeout(secs, 0);
  cli.set_read_timeout(secs, 0);
  auto res = cli.Post(prefix + "/embeddings", embeddings_request(ep.model_name, inputs).dump(), "application/json");
  if (!res) throw EndpointError(0, "embedding request failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw EndpointError(0, "embedding endpoint returned HTTP " + std::to_string(res->status));
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("embedding reply is not JSON: ") + e.what());
  }
  auto vecs = vectors_from_reply(body);
  if (vecs.size() != inputs.size()) throw ProtocolError("embedding reply count differs from request");
  return vecs;
}

EmbeddingSet from_rows(const std::vector<std::vector<double>>& rows, std::string provider,
                       std::vector<std::string> ids) {
  EmbeddingSet set;
  set.provider_id = std::move(provider);
  set.item_ids = std::move(ids);
  const Eigen::Index d = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
  set.vectors.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != d) throw ProtocolError("embedding rows differ in length");
    for (Eigen::Index j = 0; j < d; ++j) set.vectors(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<size_t>(j)];
  }
  return set;
}

int resolve_jobs(int jobs, size_t n) {
  int j = jobs > 0 ? jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::max(1, std::min(j, static_cast<int>(n)));
}

}  // namespace

EmbeddingSet embed_image_list(const std::vector<image::RgbImage>& images, const std::vector<std::string>& ids,
                              const EmbeddingProvider& provider, int jobs) {
  if (images.size() != ids.size()) throw ValidationError("image/id counts differ");
  if (images.empty()) throw ValidationError("no images to embed");

  if (provider.kind == ProviderKind::external) {
    std::vector<std::string> inputs;
    for (const auto& img : images) inputs.push_back(kPngDataUrlPrefix + crdm::base64_encode(image::encode_png(img)));
    return from_rows(post_embeddings(provider.endpoint, inputs), provider.id(), ids);
  }

  const auto& pyramid = TinyFeaturePyramid::shared();
  std::vector<std::vector<double>> rows(images.size());
  const int n_jobs = resolve_jobs(jobs, images.size());
  auto work = [&](int worker) {
    torch::NoGradGuard ng;
    for (size_t i = static_cast<size_t>(worker); i < images.size(); i += static_cast<size_t>(n_jobs)) {
      auto x = image::to_tensor(images[i], torch::kDouble).unsqueeze(0);
      auto e = pyramid.embed(x).squeeze(0).contiguous();
      rows[i].assign(e.data_ptr<double>(), e.data_ptr<double>() + e.numel());
    }
  };
  if (n_jobs == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_jobs; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  return from_rows(rows, provider.id(), ids);
}

EmbedReport embed_images(const std::filesystem::path& dir, const EmbeddingProvider& provider, int jobs) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ValidationError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());

  EmbedReport report;
  std::vector<image::RgbImage> images;
  std::vector<std::string> ids;
  for (const auto& f : files) {
    try {
      images.push_back(image::read_png_rgb(f));
      ids.push_back(f.stem().string());
    } catch (const std::exception& e) {
      report.skipped.emplace_back(f.filename().string(), e.what());
    }
  }
  if (images.empty()) throw ValidationError("no readable PNG images in " + dir.string());
  report.set = embed_image_list(images, ids, provider, jobs);
  return report;
}

EmbeddingSet embed_texts(const std::vector<std::string>& prompts, const std::vector<std::string>& ids,
                         const EmbeddingProvider& provider) {
  if (prompts.size() != ids.size()) throw ValidationError("prompt/id counts differ");
  if (prompts.empty()) throw ValidationError("no prompts to embed");
  if (provider.kind == ProviderKind::external)
    return from_rows(post_embeddings(provider.endpoint, prompts), provider.id(), ids);

  static const text::TextEmbedder embedder;
  auto pooled = embedder.pooled(prompts, TinyFeaturePyramid::kEmbeddingDim).to(torch::kDouble).contiguous();
  std::vector<std::vector<double>> rows;
  for (int64_t i = 0; i < pooled.size(0); ++i) {
    auto r = pooled[i];
    rows.emplace_back(r.data_ptr<double>(), r.data_ptr<double>() + r.numel());
  }
  return from_rows(rows, provider.id(), ids);
}

}  // namespace ctcig::eval

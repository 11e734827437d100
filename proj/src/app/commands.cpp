#include "ctcig/app/commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <set>
#include <ostream>
#include <sstream>
#include <thread>

#include "ctcig/crdm/dialogue.hpp"
#include "ctcig/crdm/mock_vlm.hpp"
#include "ctcig/crdm/outline.hpp"
#include "ctcig/data/folder.hpp"
#include "ctcig/train/checkpoint.hpp"

namespace ctcig::app {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

namespace {

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

uint64_t stem_seed(uint64_t seed, const std::string& stem) {
  uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : stem) h = (h ^ c) * 1099511628211ULL;
  return h;
}

std::map<std::string, crdm::PromptPair> prompts_by_stem(const fs::path& file) {
  std::map<std::string, crdm::PromptPair> out;
  for (auto& p : data::read_prompts_jsonl(file)) out[fs::path(p.source_image).stem().string()] = p;
  return out;
}

}  // namespace

nlohmann::json synth_cmd(const SynthOptions& opt) {
  if (opt.out.empty()) throw ConfigError("out", "missing required key 'out'");
  if (opt.count < 1) throw ConfigError("count", "count must be >= 1");
  opt.synth.validate();
  const auto samples = data::generate_samples(opt.synth, opt.count);
  data::write_folder(samples, opt.out);
  return {{"out", opt.out.string()}, {"count", opt.count}, {"size", opt.synth.size},
          {"texture", data::to_string(opt.synth.texture_kind)}, {"object", data::to_string(opt.synth.object_kind)}};
}

AnnotateResult annotate_cmd(const AnnotateOptions& opt) {
  if (opt.out.empty()) throw ConfigError("out", "missing required key 'out'");
  if (opt.policy != crdm::OutlinePolicy::none && !opt.masks)
    throw ConfigError("masks", "outline policy " + crdm::to_string(opt.policy) + " needs a masks directory");
  if (opt.outline_width < 1) throw ConfigError("outline_width", "outline width must be >= 1");
  if (!(opt.outline_alpha > 0.0 && opt.outline_alpha <= 1.0))
    throw ConfigError("outline_alpha", "outline alpha must be in (0, 1]");
  if (opt.jobs < 1) throw ConfigError("jobs", "jobs must be >= 1");

  crdm::VlmEndpoint ep;
  if (!opt.endpoint.empty()) {
    ep.base_url = opt.endpoint;
    ep.model_name = opt.model;
    ep.temperature = opt.temperature;
    ep.max_retries = opt.max_retries;
    ep.timeout = std::chrono::milliseconds(static_cast<int64_t>(opt.timeout_s * 1000.0));
    ep.validate();
  }

  const auto files = list_pngs(opt.images);
  if (files.empty()) throw ValidationError("no PNG images in " + opt.images.string());
  std::vector<std::optional<crdm::PromptPair>> results(files.size());
  std::vector<std::string> errors(files.size());

  auto run_one = [&](size_t i) {
    const auto& file = files[i];
    const auto stem = file.stem().string();
    try {
      auto img = image::read_png_rgb(file);
      if (opt.policy != crdm::OutlinePolicy::none) {
        const auto mask_path = *opt.masks / file.filename();
        if (!fs::exists(mask_path)) throw ValidationError("no mask " + mask_path.string());
        const auto mask = image::read_png_mask(mask_path);
        img = crdm::annotate_outline(img, mask, opt.outline_width, opt.outline_alpha, stem_seed(opt.seed, stem));
      }
      std::unique_ptr<crdm::ChatTransport> transport;
      if (opt.endpoint.empty())
        transport = std::make_unique<crdm::MockVlmTransport>(opt.seed);
      else
        transport = std::make_unique<crdm::HttpChatTransport>(ep);
      crdm::DialogueOptions dopt;
      dopt.max_retries = opt.max_retries;
      dopt.temperature = opt.temperature;
      dopt.source_image = file.filename().string();
      auto tr = crdm::run_dialogue(img, opt.mode, *transport, opt.policy, dopt);
      results[i] = crdm::extract_prompts(tr, transport.get(), dopt);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };

  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < files.size(); i = next++) run_one(i);
  };
  const int n_threads = std::min<int>(opt.jobs, static_cast<int>(files.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_threads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  AnnotateResult out;
  for (size_t i = 0; i < files.size(); ++i) {
    if (results[i])
      out.pairs.push_back(*results[i]);
    else
      out.failures.emplace_back(files[i].filename().string(), errors[i]);
  }
  if (opt.out.has_parent_path()) fs::create_directories(opt.out.parent_path());
  data::write_prompts_jsonl(opt.out, out.pairs);
  return out;
}

train::TrainResult train_cmd(const TrainOptions& opt, std::ostream* progress) {
  if (opt.out.empty()) throw ConfigError("out", "missing required key 'out'");
  std::vector<data::TrainingSample> samples;
  if (opt.data.empty()) {
    samples = data::generate_samples(opt.synth, opt.synth_count);
  } else {
    const auto prompts = opt.data / "prompts.jsonl";
    auto ingested = data::ingest_folder(opt.data / "images", opt.data / "masks",
                                        fs::exists(prompts) ? std::optional<fs::path>(prompts) : std::nullopt);
    if (progress)
      for (const auto& s : ingested.skipped) *progress << "skipped " << s.path << ": " << s.reason << "\n";
    samples = std::move(ingested.samples);
  }
  train::ProgressFn fn;
  if (progress)
    fn = [progress](const train::LogRecord& r) {
      *progress << "step " << r.step << " l_sd=" << r.l_sd << " l_lpips=" << r.l_lpips << " total=" << r.total
                << "\n";
    };
  return train::train(opt.config, samples, opt.out, nullptr, fn);
}

SampleReport sample_cmd(const SampleOptions& opt) {
  if (opt.checkpoint.empty()) throw ConfigError("checkpoint", "missing required key 'checkpoint'");
  if (opt.out.empty()) throw ConfigError("out", "missing required key 'out'");
  if (opt.masks.empty()) throw ConfigError("masks", "missing required key 'masks'");

  auto ckpt = train::load_checkpoint(opt.checkpoint);
  train::TrainConfig cfg;
  if (ckpt.meta.contains("train")) cfg = train::train_config_from_json(ckpt.meta.at("train"));

  std::vector<fs::path> mask_files =
      fs::is_directory(opt.masks) ? list_pngs(opt.masks) : std::vector<fs::path>{opt.masks};
  if (mask_files.empty()) throw ValidationError("no mask PNGs in " + opt.masks.string());

  std::map<std::string, crdm::PromptPair> by_stem;
  if (opt.prompts_file) by_stem = prompts_by_stem(*opt.prompts_file);

  std::vector<torch::Tensor> masks;
  std::vector<std::string> prompts;
  for (const auto& f : mask_files) {
    const auto m = image::read_png_mask(f);
    if (!masks.empty() && (m.width != masks[0].size(2) || m.height != masks[0].size(1)))
      throw DimensionError("masks must share one size; " + f.filename().string() + " differs");
    masks.push_back(image::to_tensor(m));
    const auto it = by_stem.find(f.stem().string());
    prompts.push_back(it != by_stem.end() ? it->second.t_simple : opt.prompt);
  }

  auto gen = train::generate_images(ckpt.model, cfg, torch::stack(masks), prompts, opt.sampler);
  fs::create_directories(opt.out);
  SampleReport rep;
  rep.timing = gen.timing;
  for (size_t i = 0; i < mask_files.size(); ++i) {
    const auto path = opt.out / (mask_files[i].stem().string() + ".png");
    image::write_png(path, image::from_tensor(gen.images[static_cast<int64_t>(i)]));
    rep.images.push_back(path);
  }
  rep.timing_path = opt.out / "timing.json";
  std::ofstream(rep.timing_path) << diffusion::to_json(rep.timing).dump(2) << "\n";
  return rep;
}

eval::MetricReport eval_cmd(const EvalOptions& opt) {
  eval::EmbeddingProvider provider;
  provider.kind = opt.provider;
  if (opt.provider == eval::ProviderKind::external) {
    if (opt.endpoint.empty()) throw ConfigError("endpoint", "external provider needs an endpoint URL");
    provider.endpoint.base_url = opt.endpoint;
    provider.endpoint.model_name = opt.model;
  }
  const std::set<std::string> known{"fid", "kid", "clip"};
  for (const auto& m : opt.metrics)
    if (!known.count(m)) throw ConfigError("metrics", "unknown metric '" + m + "'");
  auto wants = [&](const char* m) { return std::find(opt.metrics.begin(), opt.metrics.end(), m) != opt.metrics.end(); };

  eval::MetricReport rep;
  rep.provider_id = provider.id();
  if (opt.fake.empty()) throw ConfigError("fake", "missing required key 'fake'");
  const auto fake = eval::embed_images(opt.fake, provider);
  for (const auto& [f, why] : fake.skipped) rep.warnings.push_back("skipped fake " + f + ": " + why);
  rep.n_fake = fake.set.size();

  if (wants("fid") || wants("kid")) {
    if (opt.real.empty()) throw ConfigError("real", "fid/kid need a real image directory");
    const auto real = eval::embed_images(opt.real, provider);
    for (const auto& [f, why] : real.skipped) rep.warnings.push_back("skipped real " + f + ": " + why);
    rep.n_real = real.set.size();
    if (wants("fid")) {
      const auto r = eval::fid_detailed(real.set, fake.set);
      rep.fid = r.value;
      if (r.warning)
        rep.warnings.push_back("sqrtm clamped a negative eigenvalue of magnitude " +
                               std::to_string(-r.clamped_eigenvalue));
    }
    if (wants("kid")) {
      auto k = eval::kid_defaults(real.set, fake.set);
      if (opt.kid_subset_size > 0) k.subset_size = opt.kid_subset_size;
      k.n_subsets = opt.kid_subsets;
      k.seed = opt.kid_seed;
      rep.kid = eval::kid(real.set, fake.set, k);
    }
  }
  if (wants("clip")) {
    if (!opt.prompts_file) throw ConfigError("prompts", "clip needs a prompts file");
    const auto by_stem = prompts_by_stem(*opt.prompts_file);
    std::vector<int64_t> rows;
    std::vector<std::string> ids, texts;
    for (size_t i = 0; i < fake.set.item_ids.size(); ++i) {
      const auto it = by_stem.find(fake.set.item_ids[i]);
      if (it == by_stem.end()) {
        rep.warnings.push_back("no prompt for " + fake.set.item_ids[i]);
        continue;
      }
      rows.push_back(static_cast<int64_t>(i));
      ids.push_back(fake.set.item_ids[i]);
      texts.push_back(it->second.t_simple);
    }
    if (rows.empty()) throw ValidationError("no generated image has a prompt record");
    eval::EmbeddingSet imgs;
    imgs.provider_id = fake.set.provider_id;
    imgs.item_ids = ids;
    imgs.vectors.resize(static_cast<Eigen::Index>(rows.size()), fake.set.dim());
    for (size_t i = 0; i < rows.size(); ++i) imgs.vectors.row(static_cast<Eigen::Index>(i)) = fake.set.vectors.row(rows[i]);
    rep.clip_score = eval::clip_score(imgs, eval::embed_texts(texts, ids, provider));
  }
  if (opt.out) {
    if (opt.out->has_parent_path()) fs::create_directories(opt.out->parent_path());
    std::ofstream(*opt.out) << eval::to_json(rep).dump(2) << "\n";
  }
  return rep;
}

}  // namespace ctcig::app

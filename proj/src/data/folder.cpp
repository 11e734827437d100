#include "ctcig/data/folder.hpp"

#include <fstream>
#include <map>

namespace ctcig::data {

namespace fs = std::filesystem;

namespace {

std::map<std::string, fs::path> pngs_by_stem(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IngestionError("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out[e.path().stem().string()] = e.path();
  return out;
}

crdm::PromptPair placeholder_prompts(const std::string& source) {
  crdm::PromptPair p;
  p.t_detail = "A camouflaged object concealed in its surroundings, sharing the color and texture "
               "of the background so that it blends into the scene.";
  p.t_simple = "A camouflaged object hidden in its surroundings.";
  p.source_image = source;
  p.outline_policy = crdm::OutlinePolicy::none;
  p.vlm_id = "placeholder";
  return p;
}

}  // namespace

std::vector<crdm::PromptPair> read_prompts_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open prompts file " + path.string());
  std::vector<crdm::PromptPair> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(crdm::prompt_pair_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_prompts_jsonl(const fs::path& path, const std::vector<crdm::PromptPair>& pairs) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& p : pairs) out << crdm::to_json(p).dump() << '\n';
}

IngestResult ingest_folder(const fs::path& images_dir, const fs::path& masks_dir,
                           const std::optional<fs::path>& prompts_file) {
  const auto images = pngs_by_stem(images_dir);
  const auto masks = pngs_by_stem(masks_dir);
  std::map<std::string, crdm::PromptPair> prompts;
  if (prompts_file)
    for (auto& p : read_prompts_jsonl(*prompts_file))
      prompts[fs::path(p.source_image).stem().string()] = std::move(p);

  IngestResult r;
  for (const auto& [stem, path] : images) {
    auto m = masks.find(stem);
    if (m == masks.end()) {
      r.skipped.push_back({path.string(), "no mask with matching stem"});
      continue;
    }
    TrainingSample s;
    s.id = stem;
    s.origin = SampleOrigin::folder;
    s.image = image::read_png_rgb(path);
    s.mask = image::read_png_mask(m->second);
    if (s.image.width != s.mask.width || s.image.height != s.mask.height)
      throw IngestionError("image/mask size mismatch for '" + stem + "'");
    if (auto p = prompts.find(stem); p != prompts.end()) {
      s.prompts = p->second;
    } else {
      s.prompts = placeholder_prompts(path.filename().string());
      s.placeholder_prompts = true;
    }
    r.samples.push_back(std::move(s));
  }
  for (const auto& [stem, path] : masks)
    if (!images.count(stem)) r.skipped.push_back({path.string(), "no image with matching stem"});
  return r;
}

void write_folder(const std::vector<TrainingSample>& samples, const fs::path& root) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  std::vector<crdm::PromptPair> prompts;
  for (const auto& s : samples) {
    image::write_png(root / "images" / (s.id + ".png"), s.image);
    image::write_png(root / "masks" / (s.id + ".png"), s.mask);
    auto p = s.prompts;
    p.source_image = "images/" + s.id + ".png";
    prompts.push_back(std::move(p));
  }
  write_prompts_jsonl(root / "prompts.jsonl", prompts);
}

}  // namespace ctcig::data

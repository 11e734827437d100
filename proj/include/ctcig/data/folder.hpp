#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctcig/data/sample.hpp"

namespace ctcig::data {

struct SkippedItem {
  std::string path;
  std::string reason;
};

struct IngestResult {
  std::vector<TrainingSample> samples;
  std::vector<SkippedItem> skipped;
};

/// Pairs images/<stem>.png with masks/<stem>.png. Prompt records are joined
/// by the stem of their source_image; samples without one get placeholder
/// prompts and placeholder_prompts = true.
IngestResult ingest_folder(const std::filesystem::path& images_dir,
                           const std::filesystem::path& masks_dir,
                           const std::optional<std::filesystem::path>& prompts_file);

/// Writes root/images/<id>.png, root/masks/<id>.png and root/prompts.jsonl.
void write_folder(const std::vector<TrainingSample>& samples, const std::filesystem::path& root);

std::vector<crdm::PromptPair> read_prompts_jsonl(const std::filesystem::path& path);
void write_prompts_jsonl(const std::filesystem::path& path, const std::vector<crdm::PromptPair>& pairs);

}  // namespace ctcig::data

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctcig/crdm/prompt_pair.hpp"
#include "ctcig/data/synth.hpp"
#include "ctcig/diffusion/sampler.hpp"
#include "ctcig/eval/embed.hpp"
#include "ctcig/train/trainer.hpp"

namespace ctcig::app {

namespace fs = std::filesystem;

struct SynthOptions {
  fs::path out;
  int64_t count = 64;
  data::SynthConfig synth;
};

/// Writes out/images, out/masks and out/prompts.jsonl.
nlohmann::json synth_cmd(const SynthOptions& opt);

struct AnnotateOptions {
  fs::path images;
  std::optional<fs::path> masks;
  fs::path out;
  crdm::DialogueMode mode = crdm::DialogueMode::camouflage;
  crdm::OutlinePolicy policy = crdm::OutlinePolicy::silent;
  /// Chat endpoint base URL; empty selects the built-in mock VLM.
  std::string endpoint;
  std::string model = "qwen2.5-vl";
  double temperature = 0.2;
  int max_retries = 2;
  double timeout_s = 60.0;
  /// Dialogues in flight at once.
  int jobs = 4;
  int64_t outline_width = 2;
  double outline_alpha = 0.6;
  uint64_t seed = 0;
};

struct AnnotateResult {
  std::vector<crdm::PromptPair> pairs;
  /// (image file, error)
  std::vector<std::pair<std::string, std::string>> failures;
};

/// Runs the dialogue for every image (sorted by name) and writes successful
/// prompt pairs to `out` as JSON lines, in image order.
AnnotateResult annotate_cmd(const AnnotateOptions& opt);

struct TrainOptions {
  /// Folder with images/, masks/ and optionally prompts.jsonl. Empty means
  /// synthesize `synth_count` samples from `synth`.
  fs::path data;
  int64_t synth_count = 64;
  data::SynthConfig synth;
  fs::path out;
  train::TrainConfig config;
};

train::TrainResult train_cmd(const TrainOptions& opt, std::ostream* progress = nullptr);

struct SampleOptions {
  fs::path checkpoint;
  /// A mask PNG or a directory of them.
  fs::path masks;
  /// Used for every mask unless a prompts file supplies one by stem.
  std::string prompt;
  std::optional<fs::path> prompts_file;
  fs::path out;
  diffusion::SamplerConfig sampler;
};

struct SampleReport {
  std::vector<fs::path> images;
  diffusion::TimingReport timing;
  fs::path timing_path;
};

/// Writes out/<mask stem>.png and out/timing.json.
SampleReport sample_cmd(const SampleOptions& opt);

struct EvalOptions {
  fs::path real;
  fs::path fake;
  std::vector<std::string> metrics{"fid", "kid"};
  std::optional<fs::path> prompts_file;
  eval::ProviderKind provider = eval::ProviderKind::tiny_fixed;
  std::string endpoint;
  std::string model = "embed";
  int64_t kid_subset_size = 0;  // 0 = min(n, 100)
  int64_t kid_subsets = 10;
  uint64_t kid_seed = 0;
  std::optional<fs::path> out;
};

eval::MetricReport eval_cmd(const EvalOptions& opt);

/// Splits "a,b,c" and trims blanks.
std::vector<std::string> split_list(const std::string& s);

}  // namespace ctcig::app

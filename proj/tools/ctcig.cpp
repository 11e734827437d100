#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "ctcig/app/commands.hpp"
#include "ctcig/app/json_config.hpp"
#include "ctcig/app/mock_server.hpp"

using namespace ctcig;

namespace {

template <typename Enum, typename Parse>
void enum_option(CLI::App* app, const std::string& flag, Enum& target, Parse parse, const std::string& help) {
  app->add_option_function<std::string>(flag, [&target, parse](const std::string& s) { target = parse(s); }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Controllable text-guided camouflage image generation"};
  cli.config_formatter(std::make_shared<app::JsonConfig>());
  cli.set_config("--config", "", "JSON config file; command-line flags take precedence");
  cli.require_subcommand(1);
  int threads = 0;
  cli.add_option("--threads", threads, "Intra-op threads for tensor math (0 = library default)");

  app::SynthOptions synth;
  auto* s = cli.add_subcommand("synth", "Generate a procedural camouflage dataset");
  s->add_option("--out", synth.out, "Output folder")->required();
  s->add_option("--count", synth.count, "Number of samples")->capture_default_str();
  s->add_option("--size", synth.synth.size, "Image side (32, 64 or 128)")->capture_default_str();
  enum_option(s, "--texture", synth.synth.texture_kind, data::parse_texture_kind, "value_noise|stripes|blotch");
  enum_option(s, "--object", synth.synth.object_kind, data::parse_object_kind, "ellipse|metaball");
  s->add_option("--contrast-delta", synth.synth.contrast_delta, "Object/background divergence bound")
      ->capture_default_str();
  s->add_option("--seed", synth.synth.seed, "Seed")->capture_default_str();

  app::AnnotateOptions ann;
  std::string masks_dir;
  auto* a = cli.add_subcommand("annotate", "Run the prompt dialogue over an image folder");
  a->add_option("--images", ann.images, "Image folder")->required();
  a->add_option("--masks", masks_dir, "Mask folder (needed unless --outline none)");
  a->add_option("--out", ann.out, "Output prompts.jsonl")->required();
  enum_option(a, "--mode", ann.mode, crdm::parse_dialogue_mode, "camouflage|non_camouflage");
  enum_option(a, "--outline", ann.policy, crdm::parse_outline_policy, "silent|mentioned|none");
  a->add_option("--endpoint", ann.endpoint, "Chat endpoint base URL, e.g. http://host:8000/v1 (default: built-in mock)");
  a->add_option("--model", ann.model, "Model name sent to the endpoint")->capture_default_str();
  a->add_option("--temperature", ann.temperature)->capture_default_str();
  a->add_option("--max-retries", ann.max_retries)->capture_default_str();
  a->add_option("--timeout", ann.timeout_s, "Request timeout in seconds")->capture_default_str();
  a->add_option("--jobs", ann.jobs, "Dialogues in flight")->capture_default_str();
  a->add_option("--outline-width", ann.outline_width)->capture_default_str();
  a->add_option("--outline-alpha", ann.outline_alpha)->capture_default_str();
  a->add_option("--seed", ann.seed, "Outline color and mock seed")->capture_default_str();

  app::TrainOptions tr;
  auto& tc = tr.config;
  auto* t = cli.add_subcommand("train", "Train the controller, FIRM and cross-attention projectors");
  t->add_option("--data", tr.data, "Dataset folder (images/, masks/, prompts.jsonl); default synthesizes one");
  t->add_option("--synth-count", tr.synth_count, "Synthetic samples when --data is absent")->capture_default_str();
  t->add_option("--synth-size", tr.synth.size)->capture_default_str();
  t->add_option("--synth-seed", tr.synth.seed)->capture_default_str();
  t->add_option("--out", tr.out, "Run folder for checkpoints and loss_log.jsonl")->required();
  t->add_option("--lr-controller-firm", tc.lr_controller_firm)->capture_default_str();
  t->add_option("--lr-projectors", tc.lr_projectors)->capture_default_str();
  t->add_option("--lr-backbone", tc.lr_backbone, "Backbone rate under --policy full")->capture_default_str();
  t->add_option("--weight-decay", tc.weight_decay)->capture_default_str();
  t->add_option("--lambda-lpips", tc.lambda_lpips)->capture_default_str();
  t->add_option("--batch-size", tc.batch_size)->capture_default_str();
  t->add_option("--control-scale", tc.control_scale)->capture_default_str();
  t->add_option("--epochs", tc.epochs)->capture_default_str();
  t->add_option("--max-steps", tc.max_steps, "Stop after this many steps (0 = no limit)")->capture_default_str();
  t->add_option("--seed", tc.seed)->capture_default_str();
  t->add_option("--T", tc.T, "Diffusion steps")->capture_default_str();
  t->add_option("--base-channels", tc.base_channels)->capture_default_str();
  enum_option(t, "--codec", tc.codec, train::parse_codec, "identity|patchify4");
  enum_option(t, "--policy", tc.policy, nn::parse_param_policy, "paper_policy|full");
  enum_option(t, "--schedule", tc.schedule, diffusion::parse_schedule_kind, "linear_beta|cosine");
  t->add_option("--gammas", tc.perceptual.gammas, "Perceptual per-layer scales");
  t->add_option("--layer-ids", tc.perceptual.layer_ids, "Perceptual feature levels");
  bool quiet = false;
  t->add_flag("--quiet", quiet, "No per-step output");

  app::SampleOptions smp;
  std::string prompts_file;
  auto* sm = cli.add_subcommand("sample", "Generate images from masks with a trained checkpoint");
  sm->add_option("--checkpoint", smp.checkpoint)->required();
  sm->add_option("--masks", smp.masks, "Mask PNG or folder")->required();
  sm->add_option("--prompt", smp.prompt, "Prompt for every mask");
  sm->add_option("--prompts", prompts_file, "prompts.jsonl; t_simple joined by mask stem");
  sm->add_option("--out", smp.out)->required();
  sm->add_option("--steps", smp.sampler.num_steps, "DDIM steps")->capture_default_str();
  sm->add_option("--eta", smp.sampler.eta)->capture_default_str();
  sm->add_option("--seed", smp.sampler.seed)->capture_default_str();

  app::EvalOptions ev;
  std::string metrics = "fid,kid", eval_prompts, eval_out;
  auto* e = cli.add_subcommand("eval", "FID / KID / CLIPScore between image folders");
  e->add_option("--real", ev.real);
  e->add_option("--fake", ev.fake)->required();
  e->add_option("--metrics", metrics, "Comma list of fid,kid,clip")->capture_default_str();
  e->add_option("--prompts", eval_prompts, "prompts.jsonl for clip");
  enum_option(e, "--provider", ev.provider, eval::parse_provider_kind, "tiny|external");
  e->add_option("--endpoint", ev.endpoint, "Embedding endpoint base URL");
  e->add_option("--model", ev.model)->capture_default_str();
  e->add_option("--kid-subset-size", ev.kid_subset_size, "0 = min(n, 100)")->capture_default_str();
  e->add_option("--kid-subsets", ev.kid_subsets)->capture_default_str();
  e->add_option("--kid-seed", ev.kid_seed)->capture_default_str();
  e->add_option("--out", eval_out, "Also write the report here");

  std::string mock_host = "127.0.0.1";
  int mock_port = 8000;
  uint64_t mock_seed = 0;
  auto* ms = cli.add_subcommand("mock-server", "Serve the deterministic mock VLM over HTTP");
  ms->add_option("--host", mock_host)->capture_default_str();
  ms->add_option("--port", mock_port)->capture_default_str();
  ms->add_option("--seed", mock_seed)->capture_default_str();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return cli.exit(err);
  } catch (const ConfigError& err) {
    std::cerr << "config error [" << err.field() << "]: " << err.what() << "\n";
    return 2;
  }

  try {
    if (threads > 0) torch::set_num_threads(threads);
    if (*s) {
      std::cout << app::synth_cmd(synth).dump() << "\n";
    } else if (*a) {
      if (!masks_dir.empty()) ann.masks = masks_dir;
      const auto res = app::annotate_cmd(ann);
      for (const auto& [file, why] : res.failures) std::cerr << "failed " << file << ": " << why << "\n";
      std::cout << nlohmann::json{{"out", ann.out.string()}, {"written", res.pairs.size()},
                                  {"failed", res.failures.size()}}
                       .dump()
                << "\n";
      return res.failures.empty() ? 0 : 3;
    } else if (*t) {
      const auto res = app::train_cmd(tr, quiet ? nullptr : &std::cerr);
      std::cout << nlohmann::json{{"checkpoint", res.checkpoints.back().string()},
                                  {"log", res.log_path.string()},
                                  {"steps", res.log.size()}}
                       .dump()
                << "\n";
    } else if (*sm) {
      if (!prompts_file.empty()) smp.prompts_file = prompts_file;
      const auto rep = app::sample_cmd(smp);
      std::cout << diffusion::to_json(rep.timing).dump() << "\n";
    } else if (*e) {
      ev.metrics = app::split_list(metrics);
      if (!eval_prompts.empty()) ev.prompts_file = eval_prompts;
      if (!eval_out.empty()) ev.out = eval_out;
      std::cout << eval::to_json(app::eval_cmd(ev)).dump(2) << "\n";
    } else if (*ms) {
      app::MockVlmServer server(mock_seed);
      std::cerr << "mock VLM on http://" << mock_host << ":" << mock_port << "/v1\n";
      server.run(mock_host, mock_port);
    }
  } catch (const ConfigError& err) {
    std::cerr << "config error [" << err.field() << "]: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

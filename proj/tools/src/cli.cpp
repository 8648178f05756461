// Copyright 2026 The midstate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "midstate/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "midstate/analysis.hpp"
#include "midstate/checkpoint.hpp"
#include "midstate/config.hpp"
#include "midstate/corpus.hpp"
#include "midstate/errors.hpp"
#include "midstate/metrics.hpp"
#include "midstate/pipeline.hpp"
#include "midstate/report.hpp"

namespace midstate::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kOutputRootEnv = "MIDSTATE_OUTPUT_ROOT";

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Run config file (dotted key = value lines)");
  app->add_option("--set", c.sets, "Override one config key, key=value (repeatable)");
  app->add_option("--seed", c.seed, "Master seed (overrides run.seed)");
  app->add_option("--out", c.out, "Output directory (overrides run.output)");
}

void require_path(const std::string& p, const std::string& what) {
  if (p.empty()) throw InputError(what + " path is required");
  if (!fs::exists(p)) throw InputError(what + " path does not exist: " + p);
}

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (!c.config.empty()) {
    require_path(c.config, "config");
    cfg = RunConfig::load(c.config);
  }
  for (const auto& s : c.sets) apply_override(cfg, s);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output = c.out;
  cfg.validate();
  return cfg;
}

fs::path output_dir(const RunConfig& cfg) {
  fs::path p = cfg.output;
  const char* root = std::getenv(kOutputRootEnv);
  if (p.is_relative() && root && *root) p = fs::path(root) / p;
  fs::create_directories(p);
  cfg.save(p / "config.txt");
  return p;
}

void log_line(const std::string& s) { std::cerr << s << std::endl; }

std::vector<fs::path> list_pngs(const fs::path& input) {
  std::vector<fs::path> out;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input))
      if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
    std::sort(out.begin(), out.end());
  } else {
    out.push_back(input);
  }
  if (out.empty()) throw InputError("no PNG images under " + input.string());
  return out;
}

PairSet dataset(const RunConfig& cfg, const std::string& data, const char* split, int size) {
  if (!data.empty()) {
    require_path(data, "data");
    return read_corpus(data);
  }
  return make_pairs(size, cfg.resolution, Rng(cfg.seed).child(split));
}

nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : RunConfig::keys()) j[k] = cfg.get(k);
  return j;
}

nlohmann::json checksums(const ModelStack& s) {
  nlohmann::json j = {{"autoencoder", hex64(module_checksum(*s.autoencoder))},
                      {"visual_features", hex64(module_checksum(*s.visual_features))},
                      {"perceptual_features", hex64(module_checksum(*s.perceptual_features))},
                      {"teacher", hex64(module_checksum(*s.teacher))}};
  if (s.distilled()) j["consistency"] = hex64(module_checksum(*s.consistency));
  return j;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

CsvTable feature_table(const torch::Tensor& f) {
  std::vector<std::string> cols;
  for (int64_t k = 0; k < f.size(1); ++k) cols.push_back("f" + std::to_string(k));
  CsvTable t(cols);
  const auto a = f.contiguous().to(torch::kDouble);
  for (int64_t i = 0; i < a.size(0); ++i) {
    CsvTable::Row row;
    for (int64_t k = 0; k < a.size(1); ++k) row[cols[k]] = CsvTable::cell(a[i][k].item<double>());
    t.add_row(row);
  }
  return t;
}

int cmd_toygen(const Common& c, int n, std::optional<int> resolution) {
  auto cfg = resolve(c);
  if (resolution) cfg.resolution = *resolution;
  cfg.validate();
  if (n < 1) throw ConfigError("--n must be positive");
  const auto out = output_dir(cfg);
  write_corpus(out, make_pairs(n, cfg.resolution, Rng(cfg.seed).child("toygen")));
  log_line("wrote " + std::to_string(n) + " faces to " + out.string());
  return 0;
}

int cmd_degrade(const Common& c, const std::string& input, std::optional<double> sigma, std::optional<int> scale,
                std::optional<double> delta, std::optional<int> quality) {
  require_path(input, "input");
  const auto cfg = resolve(c);
  const auto out = output_dir(cfg);
  Rng rng = Rng(cfg.seed).child("degrade");
  std::string records;
  for (const auto& path : list_pngs(input)) {
    const auto hq = read_png(path);
    auto d = sample_degradation(rng);
    if (sigma) d.sigma = *sigma;
    if (scale) d.scale = *scale;
    if (delta) d.delta = *delta;
    if (quality) d.quality = *quality;
    d.validate();
    write_png(out / path.filename(), degrade(hq, d, rng));
    records += nlohmann::json{{"file", path.filename().string()}, {"degradation", d}}.dump() + "\n";
  }
  write_text(out / "degradations.jsonl", records);
  return 0;
}

int cmd_train_teacher(const Common& c, const std::string& data) {
  const auto cfg = resolve(c);
  const auto out = output_dir(cfg);
  const auto train = dataset(cfg, data, "train", cfg.train_size);
  const auto stack = train_base(train, cfg, log_line);
  save_stack(out / "teacher.ckpt", stack);
  write_json(out / "train-teacher.json", {{"lineage", stack.lineage}, {"config", config_json(cfg)}});
  return 0;
}

int cmd_distill(const Common& c, const std::string& stack_path, const std::string& data) {
  require_path(stack_path, "stack");
  const auto cfg = resolve(c);
  const auto out = output_dir(cfg);
  auto stack = load_stack(stack_path);
  const auto train = dataset(cfg, data, "train", cfg.train_size);
  distill_stack(stack, train, cfg, log_line);
  save_stack(out / "consistency.ckpt", stack);
  write_json(out / "distill.json", {{"lineage", stack.lineage}, {"config", config_json(cfg)}});
  return 0;
}

int cmd_train_restorer(const Common& c, const std::string& stack_path, const std::string& data,
                       const std::string& name) {
  require_path(stack_path, "stack");
  const auto cfg = resolve(c);
  const auto out = output_dir(cfg);
  auto stack = load_stack(stack_path);
  const auto train = dataset(cfg, data, "train", cfg.train_size);
  Restorer restorer(make_restorer_modules(stack, cfg.seed), cfg.resolved_restorer());
  const auto stats = train_restorer(restorer, train, cfg, log_line);
  save_restorer(out / (name + ".ckpt"), stack, restorer);
  write_json(out / (name + ".json"),
             {{"training", stats}, {"restorer", restorer.config()}, {"config", config_json(cfg)}});
  return 0;
}

int cmd_restore(const Common& c, const std::string& checkpoint, const std::string& input) {
  require_path(input, "input");
  require_path(checkpoint, "checkpoint");
  const auto cfg = resolve(c);
  const auto out = output_dir(cfg);
  auto bundle = load_restorer(checkpoint);
  const Rng root = Rng(cfg.seed).child("restore");
  const auto files = list_pngs(input);
  for (size_t i = 0; i < files.size(); ++i) {
    Rng r = root.child(static_cast<uint64_t>(i));
    write_png(out / files[i].filename(), bundle.restorer->restore(read_png(files[i]), r));
  }
  log_line("restored " + std::to_string(files.size()) + " images into " + out.string());
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint, const std::string& data, int grid_rows) {
  require_path(checkpoint, "checkpoint");
  const auto cfg = resolve(c);
  const auto out = output_dir(cfg);
  auto bundle = load_restorer(checkpoint);
  const auto test = dataset(cfg, data, "test", cfg.eval_size);
  if (test.lq.empty()) throw InputError("evaluation corpus has no LQ images");
  const auto summary = evaluate(*bundle.restorer, bundle.stack, test, Rng(cfg.seed));
  eval_table(summary).write(out / "eval.csv");
  write_json(out / "summary.json", {{"metrics", summary_json(summary)},
                                    {"restorer", bundle.restorer->config()},
                                    {"checksums", checksums(bundle.stack)},
                                    {"config", config_json(cfg)}});
  std::vector<std::vector<Image>> grid;
  for (int i = 0; i < std::min<int>(grid_rows, static_cast<int>(test.size())); ++i)
    grid.push_back({test.lq[i], summary.restored[i], test.hq[i]});
  if (!grid.empty()) write_grid(out / "grid.png", grid);
  std::cout << summary_json(summary).dump(2) << std::endl;
  return 0;
}

int cmd_start_step(const Common& c, const std::string& stack_path, const std::string& data) {
  require_path(stack_path, "stack");
  const auto cfg = resolve(c);
  const auto out = output_dir(cfg);
  auto stack = load_stack(stack_path);
  const auto test = dataset(cfg, data, "analysis", cfg.analysis_images);
  if (test.lq.empty()) throw InputError("start-step analysis needs LQ images");
  const auto astack = analysis_stack(stack);
  Rng rng = Rng(cfg.seed).child("start-step");
  const auto report = select_start_step(test.lq, astack, rng);
  CsvTable table({"candidate", "timestep", "toy_fid", "selected"});
  for (size_t i = 0; i < report.candidates.size(); ++i) {
    table.add_row({{"candidate", std::to_string(report.candidates[i])},
                   {"timestep", std::to_string(report.timesteps[i])},
                   {"toy_fid", CsvTable::cell(report.distances[i])},
                   {"selected", report.candidates[i] == report.selected ? "1" : "0"}});
    feature_table(report.lq_features[i]).write(out / ("features_lq_" + std::to_string(i + 1) + ".csv"));
    feature_table(report.model_features[i]).write(out / ("features_model_" + std::to_string(i + 1) + ".csv"));
  }
  table.write(out / "start_step.csv");
  write_json(out / "start_step.json", {{"selected", report.selected},
                                       {"distances", report.distances},
                                       {"images", report.images},
                                       {"checksums", checksums(stack)},
                                       {"config", config_json(cfg)}});
  std::cout << "selected candidate " << report.selected << " (timestep " << report.timesteps[report.selected - 1]
            << ")" << std::endl;
  return 0;
}

int cmd_consistency(const Common& c, const std::string& stack_path) {
  require_path(stack_path, "stack");
  const auto cfg = resolve(c);
  const auto out = output_dir(cfg);
  auto stack = load_stack(stack_path);
  const auto astack = analysis_stack(stack);
  auto classifier = stack.visual_features;
  const IdentityFn identity = [classifier](const Image& a, const Image& b) mutable {
    return identity_distance(classifier, a, b);
  };
  const auto report =
      semantic_consistency_report(consistency_step_sampler(astack), ddpm_step_sampler(epsilon_fn(stack.teacher), astack, cfg.ddpm_steps),
                                  identity, cfg.analysis_seeds, Rng(cfg.seed));
  CsvTable table({"sampler", "steps", "pairwise_ssim", "pairwise_hdist", "pairwise_identity_proxy"});
  auto add = [&](const std::string& name, const SamplerStats& s) {
    table.add_row({{"sampler", name},
                   {"steps", std::to_string(s.steps)},
                   {"pairwise_ssim", CsvTable::cell(s.ssim)},
                   {"pairwise_hdist", CsvTable::cell(s.hdist)},
                   {"pairwise_identity_proxy", CsvTable::cell(s.identity)}});
  };
  add("consistency", report.consistency);
  add("ddpm-x0", report.reference);
  table.write(out / "semantic.csv");
  write_json(out / "semantic.json", {{"n_seeds", report.n_seeds},
                                     {"seed", report.seed},
                                     {"ssim_diff", report.ssim_diff()},
                                     {"hdist_diff", report.hdist_diff()},
                                     {"identity_proxy_diff", report.identity_diff()},
                                     {"ddpm_steps", cfg.ddpm_steps},
                                     {"sequence", stack.sequence.taus},
                                     {"checksums", checksums(stack)},
                                     {"config", config_json(cfg)}});
  // Step-major grid of a few samples from each sampler.
  torch::NoGradGuard guard;
  std::vector<std::vector<Image>> grid;
  for (const auto& sampler : {consistency_step_sampler(astack), ddpm_step_sampler(epsilon_fn(stack.teacher), astack, cfg.ddpm_steps)}) {
    Rng r = Rng(cfg.seed).child("grid");
    const auto steps = sampler(4, r);
    for (const auto& s : steps) grid.push_back(unstack_images(s));
  }
  write_grid(out / "steps.png", grid);
  std::cout << table.to_string();
  return 0;
}

int cmd_x0_gap(const Common& c, const std::string& stack_path, std::vector<int> t_list) {
  require_path(stack_path, "stack");
  const auto cfg = resolve(c);
  const auto out = output_dir(cfg);
  auto stack = load_stack(stack_path);
  const auto astack = analysis_stack(stack);
  if (t_list.empty()) {
    const auto grid = ddpm_grid(stack.schedule.steps(), cfg.ddpm_steps);
    for (size_t i = 0; i < grid.size(); i += std::max<size_t>(1, grid.size() / 8)) t_list.push_back(grid[i]);
    t_list.push_back(grid.back());
  }
  const auto rows = x0_gap_report(epsilon_fn(stack.teacher), astack, cfg.ddpm_steps, t_list, cfg.analysis_seeds,
                                  Rng(cfg.seed));
  CsvTable table({"t", "psnr_to_final"});
  for (const auto& r : rows) table.add_row({{"t", std::to_string(r.t)}, {"psnr_to_final", CsvTable::cell(r.psnr)}});
  table.write(out / "x0_gap.csv");
  std::vector<int> ts;
  for (const auto& r : rows) ts.push_back(r.t);
  write_json(out / "x0_gap.json", {{"t_list", join_ints(ts)},
                                   {"n_seeds", cfg.analysis_seeds},
                                   {"checksums", checksums(stack)},
                                   {"config", config_json(cfg)}});
  std::cout << table.to_string();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"midstate: toy blind face restoration with a consistency sampler started from an intermediate state"};
  app.name("midstate");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Common common;
  int n = 100;
  std::optional<int> resolution;
  std::string input, data, stack_path, checkpoint, name = "restorer";
  std::optional<double> sigma, delta;
  std::optional<int> scale, quality;
  int grid_rows = 8;
  std::vector<int> t_list;

  auto* toygen = app.add_subcommand("toygen", "Render a toy face corpus with LQ counterparts");
  add_common(toygen, common);
  toygen->add_option("--n", n, "Number of faces")->check(CLI::PositiveNumber);
  toygen->add_option("--resolution", resolution, "Image side in pixels");

  auto* degrade_cmd = app.add_subcommand("degrade", "Degrade PNG images");
  add_common(degrade_cmd, common);
  degrade_cmd->add_option("--input", input, "PNG file or directory")->required();
  degrade_cmd->add_option("--sigma", sigma, "Blur sigma (sampled when omitted)");
  degrade_cmd->add_option("--scale", scale, "Downsampling factor");
  degrade_cmd->add_option("--delta", delta, "Noise std in 8-bit units");
  degrade_cmd->add_option("--quality", quality, "JPEG quality");

  auto* teacher = app.add_subcommand("train-teacher", "Train autoencoder, feature extractors and teacher");
  add_common(teacher, common);
  teacher->add_option("--data", data, "Corpus directory from toygen (generated from the seed when omitted)");

  auto* distill = app.add_subcommand("distill", "Distill the consistency backbone from a teacher checkpoint");
  add_common(distill, common);
  distill->add_option("--stack", stack_path, "teacher.ckpt")->required();
  distill->add_option("--data", data, "Corpus directory");

  auto* restorer = app.add_subcommand("train-restorer", "Train the visual and spatial encoders");
  add_common(restorer, common);
  restorer->add_option("--stack", stack_path, "consistency.ckpt")->required();
  restorer->add_option("--data", data, "Corpus directory");
  restorer->add_option("--name", name, "Checkpoint base name");

  auto* restore = app.add_subcommand("restore", "Restore PNG images with a restorer checkpoint");
  add_common(restore, common);
  // Checked after --input so a missing input path is reported first.
  restore->add_option("--checkpoint", checkpoint, "Restorer checkpoint (required)");
  restore->add_option("--input", input, "PNG file or directory")->required();

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a restorer on held-out pairs");
  add_common(evaluate_cmd, common);
  evaluate_cmd->add_option("--checkpoint", checkpoint, "Restorer checkpoint")->required();
  evaluate_cmd->add_option("--data", data, "Corpus directory with LQ images");
  evaluate_cmd->add_option("--grid-rows", grid_rows, "Rows in grid.png");

  auto* analyze = app.add_subcommand("analyze", "Analysis procedures");
  analyze->require_subcommand(1);
  auto* start_step = analyze->add_subcommand("start-step", "Choose the insertion point by toy-FID");
  add_common(start_step, common);
  start_step->add_option("--stack", stack_path, "consistency.ckpt")->required();
  start_step->add_option("--data", data, "Corpus directory with LQ images");
  auto* consistency = analyze->add_subcommand("consistency", "Inter-step agreement of both samplers");
  add_common(consistency, common);
  consistency->add_option("--stack", stack_path, "consistency.ckpt")->required();
  auto* x0_gap = analyze->add_subcommand("x0-gap", "PSNR between mid-chain x0 estimates and the final sample");
  add_common(x0_gap, common);
  x0_gap->add_option("--stack", stack_path, "consistency.ckpt")->required();
  x0_gap->add_option("--t", t_list, "Timesteps on the DDPM grid")->delimiter(',');

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (*toygen) return cmd_toygen(common, n, resolution);
    if (*degrade_cmd) return cmd_degrade(common, input, sigma, scale, delta, quality);
    if (*teacher) return cmd_train_teacher(common, data);
    if (*distill) return cmd_distill(common, stack_path, data);
    if (*restorer) return cmd_train_restorer(common, stack_path, data, name);
    if (*restore) {
      require_path(input, "input");
      if (checkpoint.empty()) {
        std::cerr << "error: --checkpoint is required\n\n" << restore->help() << std::flush;
        return 2;
      }
      return cmd_restore(common, checkpoint, input);
    }
    if (*evaluate_cmd) return cmd_evaluate(common, checkpoint, data, grid_rows);
    if (*start_step) return cmd_start_step(common, stack_path, data);
    if (*consistency) return cmd_consistency(common, stack_path);
    if (*x0_gap) return cmd_x0_gap(common, stack_path, t_list);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}

}  // namespace midstate::cli

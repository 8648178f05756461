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

#include "midstate/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "midstate/checkpoint.hpp"
#include "midstate/errors.hpp"
#include "midstate/metrics.hpp"

namespace midstate {

namespace {

constexpr int kHintChannels = 16;
constexpr int kDiscChannels = 16;

void progress(const Log& log, const std::string& stage, int iter, int total, double loss) {
  static thread_local std::chrono::steady_clock::time_point start;
  if (iter == 1) start = std::chrono::steady_clock::now();
  if (!log) return;
  if (iter != 1 && iter != total && iter % std::max(1, total / 10) != 0) return;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s %d/%d loss %.5f (%.1fs)", stage.c_str(), iter, total, loss, secs);
  log(buf);
}

torch::Tensor attributes_of(const std::vector<FaceParams>& params, const std::vector<int64_t>& index) {
  auto out = torch::empty({static_cast<int64_t>(index.size()), FaceParams::kAttributeCount});
  auto acc = out.accessor<float, 2>();
  for (size_t i = 0; i < index.size(); ++i) {
    const auto a = params[index[i]].attributes();
    for (int k = 0; k < FaceParams::kAttributeCount; ++k) acc[i][k] = a[k];
  }
  return out;
}

std::vector<int64_t> to_index(const torch::Tensor& t) {
  const auto c = t.contiguous();
  return {c.data_ptr<int64_t>(), c.data_ptr<int64_t>() + c.numel()};
}

std::vector<int64_t> range(int64_t n) {
  std::vector<int64_t> out(n);
  for (int64_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

torch::Tensor encode_all(Autoencoder& ae, const std::vector<Image>& images) {
  torch::NoGradGuard guard;
  std::vector<torch::Tensor> parts;
  for (size_t i = 0; i < images.size(); i += 100) {
    const auto n = std::min<size_t>(100, images.size() - i);
    std::vector<int64_t> idx(n);
    for (size_t k = 0; k < n; ++k) idx[k] = static_cast<int64_t>(i + k);
    parts.push_back(ae->encode(batch_tensor(images, idx)));
  }
  return torch::cat(parts);
}

// Rows selected by `drop` see the all-zero context.
torch::Tensor apply_dropout(const torch::Tensor& ctx, double rate, Rng& rng) {
  if (rate <= 0) return ctx;
  const auto keep = (rng.rand({ctx.size(0)}) >= rate).to(ctx.scalar_type()).view({-1, 1, 1});
  return ctx * keep;
}

nlohmann::json boundary_json(const BoundaryParams& b) {
  return {{"sigma_data", b.sigma_data}, {"timestep_scaling", b.timestep_scaling}, {"min_timestep", b.min_timestep}};
}

BoundaryParams boundary_from(const nlohmann::json& j) {
  BoundaryParams b;
  j.at("sigma_data").get_to(b.sigma_data);
  j.at("timestep_scaling").get_to(b.timestep_scaling);
  j.at("min_timestep").get_to(b.min_timestep);
  return b;
}

Checkpoint stack_checkpoint(const ModelStack& stack) {
  Checkpoint ckpt;
  const auto table = stack.schedule.table();
  ckpt.manifest = {{"kind", "stack"},
                   {"resolution", stack.resolution},
                   {"schedule", {{"alpha_bar", std::vector<double>(table.begin(), table.end())}}},
                   {"autoencoder", stack.ae_config},
                   {"classifier", stack.classifier_config},
                   {"unet", stack.unet_config},
                   {"sequence", stack.sequence.taus},
                   {"boundary", boundary_json(stack.boundary)},
                   {"grid_stride", stack.grid_stride},
                   {"distilled", stack.distilled()},
                   {"lineage", stack.lineage}};
  put_module(ckpt, "autoencoder", *stack.autoencoder);
  put_module(ckpt, "visual_features", *stack.visual_features);
  put_module(ckpt, "perceptual_features", *stack.perceptual_features);
  put_module(ckpt, "embedder", *stack.embedder);
  put_module(ckpt, "teacher", *stack.teacher);
  if (stack.distilled()) put_module(ckpt, "consistency", *stack.consistency);
  return ckpt;
}

ModelStack stack_from(const Checkpoint& ckpt) {
  ModelStack s;
  try {
    const auto& m = ckpt.manifest;
    s.resolution = m.at("resolution").get<int>();
    s.schedule = NoiseSchedule::from_table(m.at("schedule").at("alpha_bar").get<std::vector<double>>());
    s.ae_config = m.at("autoencoder").get<AutoencoderConfig>();
    s.classifier_config = m.at("classifier").get<ClassifierConfig>();
    s.unet_config = m.at("unet").get<UNetConfig>();
    s.sequence.taus = m.at("sequence").get<std::vector<int>>();
    s.boundary = boundary_from(m.at("boundary"));
    s.grid_stride = m.at("grid_stride").get<int>();
    s.lineage = m.at("lineage");
    s.autoencoder = Autoencoder(s.ae_config);
    s.visual_features = AttributeClassifier(s.classifier_config);
    s.perceptual_features = AttributeClassifier(s.classifier_config);
    s.embedder = AttributeEmbedder(FaceParams::kAttributeCount, s.unet_config.context_dim);
    s.teacher = UNet(s.unet_config);
    get_module(ckpt, "autoencoder", *s.autoencoder);
    get_module(ckpt, "visual_features", *s.visual_features);
    get_module(ckpt, "perceptual_features", *s.perceptual_features);
    get_module(ckpt, "embedder", *s.embedder);
    get_module(ckpt, "teacher", *s.teacher);
    if (m.at("distilled").get<bool>()) {
      s.consistency = UNet(s.unet_config);
      get_module(ckpt, "consistency", *s.consistency);
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint manifest lacks a field: ") + e.what());
  }
  return s;
}

void freeze(torch::nn::Module& m) {
  set_requires_grad(m, false);
  m.eval();
}

}  // namespace

torch::Tensor batch_tensor(const std::vector<Image>& images, const std::vector<int64_t>& index) {
  std::vector<Image> picked;
  picked.reserve(index.size());
  for (auto i : index) picked.push_back(images.at(static_cast<size_t>(i)));
  return stack_images(picked);
}

torch::Tensor ModelStack::attribute_context(const std::vector<FaceParams>& params) {
  return embedder->forward(attributes_of(params, range(static_cast<int64_t>(params.size()))));
}

TimestepSequence sequence_from(const RunConfig& config, const NoiseSchedule& schedule) {
  if (config.sampler_taus.empty())
    return TimestepSequence::uniform_alpha_bar(schedule, config.sampler_steps, config.grid_stride);
  TimestepSequence seq;
  std::stringstream in(config.sampler_taus);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      seq.taus.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("sampler.taus entry '" + item + "' is not an integer");
    }
  }
  if (seq.steps() != config.sampler_steps) throw ConfigError("sampler.taus length differs from sampler.steps");
  seq.validate(schedule);
  return seq;
}

ModelStack make_stack(const RunConfig& config) {
  config.validate();
  torch::manual_seed(mix64(config.seed ^ 0x5eedULL));
  ModelStack s;
  s.resolution = config.resolution;
  s.schedule = NoiseSchedule::linear(config.schedule_steps, config.beta_start, config.beta_end);
  s.ae_config = {3, config.ae_channels, 4};
  s.classifier_config = {config.classifier_channels, FaceParams::kAttributeCount};
  s.unet_config.base_channels = config.unet_channels;
  s.unet_config.validate();
  s.autoencoder = Autoencoder(s.ae_config);
  s.visual_features = AttributeClassifier(s.classifier_config);
  s.perceptual_features = AttributeClassifier(s.classifier_config);
  s.embedder = AttributeEmbedder(FaceParams::kAttributeCount, s.unet_config.context_dim);
  s.teacher = UNet(s.unet_config);
  s.grid_stride = config.grid_stride;
  s.sequence = sequence_from(config, s.schedule);
  s.lineage = {{"seed", config.seed}};
  return s;
}

void train_autoencoder(ModelStack& stack, const PairSet& data, const RunConfig& config, Rng& rng, const Log& log) {
  auto& ae = stack.autoencoder;
  ae->train();
  set_requires_grad(*ae, true);
  torch::optim::Adam opt(ae->parameters(), torch::optim::AdamOptions(config.autoencoder.lr));
  const auto n = static_cast<int64_t>(data.size());
  const bool with_lq = !data.lq.empty();
  for (int it = 1; it <= config.autoencoder.iters; ++it) {
    const auto idx = to_index(rng.randint(0, with_lq ? 2 * n : n, {config.autoencoder.batch}));
    std::vector<Image> batch;
    for (auto i : idx) batch.push_back(i < n ? data.hq[i] : data.lq[i - n]);
    const auto x = stack_images(batch);
    opt.zero_grad();
    auto loss = (ae->decode(ae->encode(x)) - x).abs().mean();
    loss.backward();
    opt.step();
    progress(log, "autoencoder", it, config.autoencoder.iters, loss.item<double>());
  }
  torch::NoGradGuard guard;
  const auto m = std::min<int64_t>(n, 256);
  const auto z = ae->encode_unscaled(batch_tensor(data.hq, range(m)));
  ae->set_latent_scale(1.0 / z.std().item<double>());
  freeze(*ae);
}

void train_classifier(AttributeClassifier& classifier, const PairSet& data, const StageBudget& budget, Rng& rng,
                      const Log& log, const std::string& name) {
  classifier->train();
  set_requires_grad(*classifier, true);
  torch::optim::Adam opt(classifier->parameters(), torch::optim::AdamOptions(budget.lr));
  const auto n = static_cast<int64_t>(data.size());
  const bool with_lq = !data.lq.empty();
  for (int it = 1; it <= budget.iters; ++it) {
    const auto idx = to_index(rng.randint(0, with_lq ? 2 * n : n, {budget.batch}));
    std::vector<Image> batch;
    std::vector<int64_t> labels;
    for (auto i : idx) {
      batch.push_back(i < n ? data.hq[i] : data.lq[i - n]);
      labels.push_back(i % n);
    }
    opt.zero_grad();
    auto loss = (classifier->forward(stack_images(batch)) - attributes_of(data.params, labels)).pow(2).mean();
    loss.backward();
    opt.step();
    progress(log, name, it, budget.iters, loss.item<double>());
  }
  freeze(*classifier);
}

TeacherStats train_teacher(ModelStack& stack, const PairSet& data, const RunConfig& config, Rng& rng,
                           const Log& log) {
  const auto z = encode_all(stack.autoencoder, data.hq);
  const auto attrs = attributes_of(data.params, range(static_cast<int64_t>(data.size())));
  const auto n = z.size(0);
  auto& teacher = stack.teacher;
  auto& embedder = stack.embedder;
  teacher->train();
  set_requires_grad(*teacher, true);
  set_requires_grad(*embedder, true);
  auto params = teacher->parameters();
  for (auto& p : embedder->parameters()) params.push_back(p);
  torch::optim::Adam opt(params, torch::optim::AdamOptions(config.teacher.lr));

  const auto nv = std::min<int64_t>(n, 512);
  const auto vz = z.slice(0, 0, nv);
  const auto va = attrs.slice(0, 0, nv);
  auto validation = [&] {
    torch::NoGradGuard guard;
    Rng vr(mix64(config.seed ^ 0x7a11dULL));
    return teacher_loss(epsilon_fn(teacher), stack.schedule, vz, embedder->forward(va), vr).loss.item<double>();
  };
  TeacherStats stats;
  stats.validation_before = validation();
  for (int it = 1; it <= config.teacher.iters; ++it) {
    const auto idx = rng.randint(0, n, {config.teacher.batch});
    const auto ctx = apply_dropout(embedder->forward(attrs.index_select(0, idx)), config.cond_dropout, rng);
    opt.zero_grad();
    auto out = teacher_loss(epsilon_fn(teacher), stack.schedule, z.index_select(0, idx), ctx, rng);
    out.loss.backward();
    opt.step();
    progress(log, "teacher", it, config.teacher.iters, out.loss.item<double>());
  }
  stats.validation_after = validation();
  freeze(*teacher);
  freeze(*embedder);
  return stats;
}

ModelStack train_base(const PairSet& data, const RunConfig& config, const Log& log) {
  auto stack = make_stack(config);
  const Rng root(config.seed);
  const auto t0 = std::chrono::steady_clock::now();
  Rng ae_rng = root.child("autoencoder");
  train_autoencoder(stack, data, config, ae_rng, log);
  Rng vf_rng = root.child("visual-features");
  train_classifier(stack.visual_features, data, config.classifier, vf_rng, log, "visual-features");
  Rng pf_rng = root.child("perceptual-features");
  train_classifier(stack.perceptual_features, data, config.classifier, pf_rng, log, "perceptual-features");
  Rng teacher_rng = root.child("teacher");
  const auto stats = train_teacher(stack, data, config, teacher_rng, log);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  stack.lineage["base"] = {{"train_size", data.size()},
                           {"teacher_validation_before", stats.validation_before},
                           {"teacher_validation_after", stats.validation_after},
                           {"seconds", secs}};
  return stack;
}

DistillStats distill_stack(ModelStack& stack, const PairSet& data, const RunConfig& config, const Log& log) {
  const auto z = encode_all(stack.autoencoder, data.hq);
  torch::Tensor attr_ctx;
  {
    torch::NoGradGuard guard;
    attr_ctx = stack.attribute_context(data.params);
  }
  torch::manual_seed(mix64(config.seed ^ 0xd157ULL));
  UNet student(stack.unet_config), target(stack.unet_config);
  copy_module_state(*student, *stack.teacher);
  copy_module_state(*target, *stack.teacher);
  DistillConfig dc;
  dc.grid_stride = config.grid_stride;
  dc.ema_decay = config.ema_decay;
  dc.learning_rate = config.distill.lr;
  dc.boundary = stack.boundary;
  ConsistencyDistiller distiller(stack.teacher, student, target, stack.schedule, dc);

  const auto nv = std::min<int64_t>(z.size(0), 256);
  auto self_consistency = [&] {
    Rng r(mix64(config.seed ^ 0xc0de5ULL));
    return distiller.self_consistency_error(z.slice(0, 0, nv), attr_ctx.slice(0, 0, nv), r);
  };
  DistillStats stats;
  stats.consistency_before = self_consistency();
  Rng rng = Rng(config.seed).child("distill");
  for (int it = 1; it <= config.distill.iters; ++it) {
    const auto idx = rng.randint(0, z.size(0), {config.distill.batch});
    const auto ctx = apply_dropout(attr_ctx.index_select(0, idx), config.cond_dropout, rng);
    stats.final_loss = distiller.step(z.index_select(0, idx), ctx, rng);
    progress(log, "distill", it, config.distill.iters, stats.final_loss);
  }
  stats.consistency_after = self_consistency();
  stack.consistency = distiller.student();
  freeze(*stack.consistency);
  stack.sequence = sequence_from(config, stack.schedule);
  stack.grid_stride = config.grid_stride;
  stack.lineage["distill"] = {{"self_consistency_before", stats.consistency_before},
                              {"self_consistency_after", stats.consistency_after},
                              {"iters", config.distill.iters}};
  return stats;
}

RestorerModules make_restorer_modules(ModelStack& stack, uint64_t seed) {
  if (!stack.distilled()) throw ConfigError("restorer needs a distilled consistency backbone");
  torch::manual_seed(mix64(seed ^ 0x2e57ULL));
  RestorerModules m;
  m.resolution = stack.resolution;
  m.schedule = stack.schedule;
  m.boundary = stack.boundary;
  m.sequence = stack.sequence;
  m.autoencoder = stack.autoencoder;
  m.backbone = stack.consistency;
  m.visual_features = stack.visual_features;
  m.perceptual_features = stack.perceptual_features;
  m.attribute_embedder = stack.embedder;
  const int side = stack.resolution / 16;
  m.visual_encoder = VisualEncoder(VisualEncoderConfig{stack.classifier_config.feature_channels(),
                                                       stack.unet_config.context_dim, side * side, 2});
  m.spatial_encoder = SpatialEncoder(stack.unet_config, 3, kHintChannels, stack.sequence.taus.at(1));
  m.spatial_encoder->initialize_from(stack.consistency);
  m.discriminator = Discriminator(kDiscChannels);
  return m;
}

nlohmann::json train_restorer(Restorer& restorer, const PairSet& data, const RunConfig& config, const Log& log) {
  RestorerTrainer trainer(restorer);
  Rng rng = Rng(config.seed).child("restorer");
  const auto n = static_cast<int64_t>(data.size());
  const bool naive = restorer.config().loss_mode == LossMode::kNaiveDiffusion;
  const auto t0 = std::chrono::steady_clock::now();
  double first = 0, last = 0;
  const int window = std::max(1, config.restorer.iters / 10);
  for (int it = 1; it <= config.restorer.iters; ++it) {
    const auto idx = to_index(rng.randint(0, n, {config.restorer.batch}));
    std::vector<const Image*> hq;
    for (auto i : idx) hq.push_back(&data.hq[i]);
    const auto lq = degrade_batch(hq, rng);
    const auto x_h = batch_tensor(data.hq, idx);
    const auto x_l = stack_images(lq);
    const double loss =
        naive ? trainer.naive_controlnet_step(x_h, x_l, rng) : trainer.training_step(x_h, x_l, rng).total;
    if (it <= window) first += loss / window;
    if (it > config.restorer.iters - window) last += loss / window;
    progress(log, naive ? "restorer(naive)" : "restorer", it, config.restorer.iters, loss);
  }
  set_requires_grad(*restorer.modules().visual_encoder, false);
  set_requires_grad(*restorer.modules().spatial_encoder, false);
  set_requires_grad(*restorer.modules().discriminator, false);
  return {{"iters", config.restorer.iters},
          {"loss_first_window", first},
          {"loss_last_window", last},
          {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
}

void save_restorer(const std::filesystem::path& path, const ModelStack& stack, Restorer& restorer) {
  auto ckpt = stack_checkpoint(stack);
  auto& m = restorer.modules();
  ckpt.manifest["kind"] = "restorer";
  ckpt.manifest["restorer"] = restorer.config();
  ckpt.manifest["visual_encoder"] = m.visual_encoder->config();
  ckpt.manifest["reference_timestep"] = m.spatial_encoder->reference_timestep();
  ckpt.manifest["hint_channels"] = kHintChannels;
  ckpt.manifest["discriminator_channels"] = kDiscChannels;
  put_module(ckpt, "visual_encoder", *m.visual_encoder);
  put_module(ckpt, "spatial_encoder", *m.spatial_encoder);
  put_module(ckpt, "discriminator", *m.discriminator);
  save_checkpoint(path, ckpt);
}

RestorerBundle load_restorer(const std::filesystem::path& path) {
  const auto ckpt = load_checkpoint(path);
  if (ckpt.manifest.value("kind", "") != "restorer")
    throw LoadError(path.string() + " is not a restorer checkpoint");
  RestorerBundle out;
  out.stack = stack_from(ckpt);
  if (!out.stack.distilled()) throw LoadError(path.string() + " lacks the consistency backbone");
  RestorerModules m;
  RestorerConfig config;
  try {
    config = ckpt.manifest.at("restorer").get<RestorerConfig>();
    m.visual_encoder = VisualEncoder(ckpt.manifest.at("visual_encoder").get<VisualEncoderConfig>());
    m.spatial_encoder = SpatialEncoder(out.stack.unet_config, 3, ckpt.manifest.at("hint_channels").get<int>(),
                                       ckpt.manifest.at("reference_timestep").get<int>());
    m.discriminator = Discriminator(ckpt.manifest.at("discriminator_channels").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("restorer manifest lacks a field: ") + e.what());
  }
  get_module(ckpt, "visual_encoder", *m.visual_encoder);
  get_module(ckpt, "spatial_encoder", *m.spatial_encoder);
  get_module(ckpt, "discriminator", *m.discriminator);
  auto& s = out.stack;
  m.resolution = s.resolution;
  m.schedule = s.schedule;
  m.boundary = s.boundary;
  m.sequence = s.sequence;
  m.autoencoder = s.autoencoder;
  m.backbone = s.consistency;
  m.visual_features = s.visual_features;
  m.perceptual_features = s.perceptual_features;
  m.attribute_embedder = s.embedder;
  for (torch::nn::Module* mod : std::initializer_list<torch::nn::Module*>{
           m.visual_encoder.get(), m.spatial_encoder.get(), m.discriminator.get()})
    freeze(*mod);
  out.restorer = std::make_unique<Restorer>(std::move(m), config);
  return out;
}

void save_stack(const std::filesystem::path& path, const ModelStack& stack) {
  save_checkpoint(path, stack_checkpoint(stack));
}

ModelStack load_stack(const std::filesystem::path& path) {
  const auto ckpt = load_checkpoint(path);
  auto stack = stack_from(ckpt);
  for (torch::nn::Module* m : std::initializer_list<torch::nn::Module*>{
           stack.autoencoder.get(), stack.visual_features.get(), stack.perceptual_features.get(),
           stack.embedder.get(), stack.teacher.get()})
    freeze(*m);
  if (stack.distilled()) freeze(*stack.consistency);
  return stack;
}

EvalSummary evaluate(Restorer& restorer, ModelStack& stack, const PairSet& test, const Rng& rng, int batch) {
  torch::NoGradGuard guard;
  EvalSummary s;
  Rng r = rng.child("evaluate");
  const auto n = static_cast<int64_t>(test.size());
  if (n == 0) throw InputError("evaluation set is empty");
  for (int64_t start = 0; start < n; start += batch) {
    const auto count = std::min<int64_t>(batch, n - start);
    std::vector<int64_t> idx(count);
    for (int64_t k = 0; k < count; ++k) idx[k] = start + k;
    const auto rec = unstack_images(restorer.restore(batch_tensor(test.lq, idx), r).image);
    for (int64_t k = 0; k < count; ++k) s.restored.push_back(rec[k]);
  }
  for (int64_t i = 0; i < n; ++i) {
    const auto& hq = test.hq[i];
    const auto& lq = test.lq[i];
    const auto& rec = s.restored[i];
    EvalRow row;
    row.index = static_cast<int>(i);
    row.psnr_lq = psnr(lq, hq);
    row.psnr_rec = psnr(rec, hq);
    row.ssim_lq = ssim(lq, hq);
    row.ssim_rec = ssim(rec, hq);
    row.feature_lq = feature_distance(stack.perceptual_features, lq, hq);
    row.feature_rec = feature_distance(stack.perceptual_features, rec, hq);
    row.identity_lq = identity_distance(stack.visual_features, lq, hq);
    row.identity_rec = identity_distance(stack.visual_features, rec, hq);
    s.psnr_lq += row.psnr_lq / n;
    s.psnr_rec += row.psnr_rec / n;
    s.ssim_lq += row.ssim_lq / n;
    s.ssim_rec += row.ssim_rec / n;
    s.feature_lq += row.feature_lq / n;
    s.feature_rec += row.feature_rec / n;
    s.identity_lq += row.identity_lq / n;
    s.identity_rec += row.identity_rec / n;
    s.rows.push_back(row);
  }
  const auto f_hq = extract_features(stack.visual_features, test.hq);
  s.fid_lq = frechet_distance(extract_features(stack.visual_features, test.lq), f_hq);
  s.fid_rec = frechet_distance(extract_features(stack.visual_features, s.restored), f_hq);
  return s;
}

nlohmann::json summary_json(const EvalSummary& s) {
  return {{"images", s.rows.size()},
          {"psnr_lq", s.psnr_lq},
          {"psnr_restored", s.psnr_rec},
          {"ssim_lq", s.ssim_lq},
          {"ssim_restored", s.ssim_rec},
          {"feature_distance_lq", s.feature_lq},
          {"feature_distance_restored", s.feature_rec},
          {"identity_proxy_lq", s.identity_lq},
          {"identity_proxy_restored", s.identity_rec},
          {"toy_fid_lq", s.fid_lq},
          {"toy_fid_restored", s.fid_rec}};
}

CsvTable eval_table(const EvalSummary& s) {
  CsvTable table({"index", "psnr_lq", "psnr_restored", "ssim_lq", "ssim_restored", "feature_distance_lq",
                  "feature_distance_restored", "identity_proxy_lq", "identity_proxy_restored"});
  for (const auto& r : s.rows)
    table.add_row({{"index", std::to_string(r.index)},
                   {"psnr_lq", CsvTable::cell(r.psnr_lq)},
                   {"psnr_restored", CsvTable::cell(r.psnr_rec)},
                   {"ssim_lq", CsvTable::cell(r.ssim_lq)},
                   {"ssim_restored", CsvTable::cell(r.ssim_rec)},
                   {"feature_distance_lq", CsvTable::cell(r.feature_lq)},
                   {"feature_distance_restored", CsvTable::cell(r.feature_rec)},
                   {"identity_proxy_lq", CsvTable::cell(r.identity_lq)},
                   {"identity_proxy_restored", CsvTable::cell(r.identity_rec)}});
  return table;
}

AnalysisStack analysis_stack(ModelStack& stack, int batch) {
  if (!stack.distilled()) throw ConfigError("analysis needs a distilled consistency backbone");
  AnalysisStack a;
  a.schedule = stack.schedule;
  a.sequence = stack.sequence;
  a.origin = ConsistencyFunction(epsilon_fn(stack.consistency), stack.schedule, stack.boundary).as_origin_fn();
  auto ae = stack.autoencoder;
  a.encode = [ae](const torch::Tensor& x) mutable { return ae->encode(x); };
  a.decode = [ae](const torch::Tensor& z) mutable { return ae->decode(z); };
  auto vf = stack.visual_features;
  a.features = [vf](const torch::Tensor& x) mutable { return vf->pooled(x); };
  a.null_context = null_context(1, FaceParams::kAttributeCount, stack.unet_config.context_dim);
  a.latent_shape = {stack.ae_config.latent_channels, stack.resolution / 4, stack.resolution / 4};
  a.batch = batch;
  return a;
}

}  // namespace midstate

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

#include "midstate/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "midstate/errors.hpp"
#include "midstate/face.hpp"

#include "fs_util.hpp"

namespace midstate {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
std::string format(int v) { return std::to_string(v); }
std::string format(uint64_t v) { return std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const std::string& v) { return v; }

void parse(const std::string& key, const std::string& s, double& out) {
  size_t pos = 0;
  try {
    out = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw ConfigError("'" + key + "' expects a number, got '" + s + "'");
}
void parse(const std::string& key, const std::string& s, int& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty())
    throw ConfigError("'" + key + "' expects an integer, got '" + s + "'");
}
void parse(const std::string& key, const std::string& s, uint64_t& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty())
    throw ConfigError("'" + key + "' expects an unsigned integer, got '" + s + "'");
}
void parse(const std::string& key, const std::string& s, bool& out) {
  if (s == "true" || s == "1") out = true;
  else if (s == "false" || s == "0") out = false;
  else throw ConfigError("'" + key + "' expects true or false, got '" + s + "'");
}
void parse(const std::string&, const std::string& s, std::string& out) { out = s; }

struct Binding {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Binding bind_field(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& v) { parse("", v, c.*member); },
          [member](const RunConfig& c) { return format(c.*member); }};
}

template <class T>
Binding bind_nested(StageBudget RunConfig::*stage, T StageBudget::*field) {
  return {[=](RunConfig& c, const std::string& v) { parse("", v, (c.*stage).*field); },
          [=](const RunConfig& c) { return format((c.*stage).*field); }};
}

template <class T>
Binding bind_restorer(T RestorerConfig::*field) {
  return {[=](RunConfig& c, const std::string& v) { parse("", v, c.restorer_config.*field); },
          [=](const RunConfig& c) { return format(c.restorer_config.*field); }};
}

void add_stage(std::vector<std::pair<std::string, Binding>>& out, const std::string& name,
               StageBudget RunConfig::*stage) {
  out.emplace_back(name + ".iters", bind_nested(stage, &StageBudget::iters));
  out.emplace_back(name + ".batch", bind_nested(stage, &StageBudget::batch));
  out.emplace_back(name + ".lr", bind_nested(stage, &StageBudget::lr));
}

const std::vector<std::pair<std::string, Binding>>& bindings() {
  static const auto table = [] {
    std::vector<std::pair<std::string, Binding>> t;
    t.emplace_back("run.seed", bind_field(&RunConfig::seed));
    t.emplace_back("run.output", bind_field(&RunConfig::output));
    t.emplace_back("data.resolution", bind_field(&RunConfig::resolution));
    t.emplace_back("data.train_size", bind_field(&RunConfig::train_size));
    t.emplace_back("data.test_size", bind_field(&RunConfig::test_size));
    t.emplace_back("schedule.steps", bind_field(&RunConfig::schedule_steps));
    t.emplace_back("schedule.beta_start", bind_field(&RunConfig::beta_start));
    t.emplace_back("schedule.beta_end", bind_field(&RunConfig::beta_end));
    t.emplace_back("sampler.steps", bind_field(&RunConfig::sampler_steps));
    t.emplace_back("sampler.grid_stride", bind_field(&RunConfig::grid_stride));
    t.emplace_back("sampler.taus", bind_field(&RunConfig::sampler_taus));
    t.emplace_back("autoencoder.channels", bind_field(&RunConfig::ae_channels));
    add_stage(t, "autoencoder", &RunConfig::autoencoder);
    t.emplace_back("classifier.channels", bind_field(&RunConfig::classifier_channels));
    add_stage(t, "classifier", &RunConfig::classifier);
    t.emplace_back("teacher.channels", bind_field(&RunConfig::unet_channels));
    add_stage(t, "teacher", &RunConfig::teacher);
    t.emplace_back("teacher.cond_dropout", bind_field(&RunConfig::cond_dropout));
    add_stage(t, "distill", &RunConfig::distill);
    t.emplace_back("distill.ema_decay", bind_field(&RunConfig::ema_decay));
    add_stage(t, "restorer", &RunConfig::restorer);
    t.emplace_back("restorer.disc_lr", bind_field(&RunConfig::disc_lr));
    t.emplace_back("restorer.start_step", bind_restorer(&RestorerConfig::start_step));
    t.emplace_back("restorer.conditioning",
                   Binding{[](RunConfig& c, const std::string& v) {
                             c.restorer_config.conditioning = parse_conditioning(v);
                           },
                           [](const RunConfig& c) { return to_string(c.restorer_config.conditioning); }});
    t.emplace_back("restorer.spatial_injection", bind_restorer(&RestorerConfig::spatial_injection));
    t.emplace_back("restorer.loss_mode",
                   Binding{[](RunConfig& c, const std::string& v) { c.restorer_config.loss_mode = parse_loss_mode(v); },
                           [](const RunConfig& c) { return to_string(c.restorer_config.loss_mode); }});
    t.emplace_back("restorer.lambda_adv", bind_restorer(&RestorerConfig::lambda_adv));
    t.emplace_back("restorer.perceptual", bind_restorer(&RestorerConfig::perceptual));
    t.emplace_back("restorer.adversarial", bind_restorer(&RestorerConfig::adversarial));
    t.emplace_back("eval.size", bind_field(&RunConfig::eval_size));
    t.emplace_back("analysis.seeds", bind_field(&RunConfig::analysis_seeds));
    t.emplace_back("analysis.images", bind_field(&RunConfig::analysis_images));
    t.emplace_back("analysis.ddpm_steps", bind_field(&RunConfig::ddpm_steps));
    return t;
  }();
  return table;
}

const Binding& find(const std::string& key) {
  for (const auto& [k, b] : bindings())
    if (k == key) return b;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& b = find(key);
  try {
    b.set(*this, value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::string RunConfig::get(const std::string& key) const { return find(key).get(*this); }

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, b] : bindings()) out.push_back(k);
  return out;
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const auto& [k, b] : bindings()) out << k << " = " << b.get(*this) << "\n";
  return out.str();
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    try {
      config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return from_text(text.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
  detail::ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_text();
}

RestorerConfig RunConfig::resolved_restorer() const {
  RestorerConfig c = restorer_config;
  c.learning_rate = restorer.lr;
  c.disc_learning_rate = disc_lr;
  return c;
}

void RunConfig::validate() const {
  if (resolution < kMinResolution) throw ConfigError("data.resolution must be at least " + std::to_string(kMinResolution));
  if (resolution % 16 != 0) throw ConfigError("data.resolution must be a multiple of 16");
  if (train_size < 1 || test_size < 0) throw ConfigError("dataset sizes must be positive");
  if (sampler_steps < 1) throw ConfigError("sampler.steps must be positive");
  for (const auto* s : {&autoencoder, &classifier, &teacher, &distill, &restorer})
    if (s->iters < 0 || s->batch < 1 || s->lr <= 0) throw ConfigError("stage budgets need iters >= 0, batch >= 1, lr > 0");
  if (cond_dropout < 0 || cond_dropout > 1) throw ConfigError("teacher.cond_dropout must lie in [0, 1]");
  if (ema_decay < 0 || ema_decay >= 1) throw ConfigError("distill.ema_decay must lie in [0, 1)");
  resolved_restorer().validate(sampler_steps);
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  config.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

}  // namespace midstate

#pragma once

// Experiment configuration: sectioned key = value text, parsed strictly
// (unknown keys are errors), serialized in one canonical order so the config
// hash recorded in reports is stable across load/save cycles.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "did/classifier.hpp"
#include "did/ensemble.hpp"
#include "did/reconstruction.hpp"
#include "did/textio.hpp"

namespace did {

enum class OperatorKind { Analytic, Ddim };
enum class ThresholdMode { Analytic, Percentile, Fixed };

inline std::string operator_name(OperatorKind k) {
  return k == OperatorKind::Analytic ? "analytic" : "ddim";
}

inline std::string threshold_mode_name(ThresholdMode m) {
  switch (m) {
    case ThresholdMode::Analytic: return "analytic";
    case ThresholdMode::Percentile: return "percentile";
    case ThresholdMode::Fixed: return "fixed";
  }
  throw std::logic_error("threshold_mode_name: bad enum");
}

struct ExperimentConfig {
  // manifold
  std::size_t ambient_dim = 16;
  std::size_t tangent_dim = 8;
  bool rotated = true;       // false: chart = leading basis vectors (exact arithmetic)
  std::uint64_t chart_seed = 0;  // 0: derive the chart from each cell seed
  Vec offset;                    // empty: origin

  // reconstruction operator
  OperatorKind op = OperatorKind::Analytic;
  BiasKind bias_kind = BiasKind::Sinusoidal;
  double bias_norm = 1.0;
  double tangent_noise = 0.05;  // expected total fresh-noise norm in the chart
  double normal_leak = 0.0;     // expected total leak norm in the complement
  double frequency = 1.0;
  int steps = 20;
  double sigma0 = 0.05;
  std::size_t components = 8;

  // data
  std::size_t train_per_class = 2000;
  std::size_t test_per_class = 2000;
  double signal = 0.1;
  std::vector<double> signal_grid = {1.0, 0.5, 0.2, 0.1, 0.05};
  std::size_t seeds = 5;
  NormalDirection normal_direction = NormalDirection::FirstBasis;

  // detector
  TrainHyper hyper;
  ThresholdMode threshold_mode = ThresholdMode::Percentile;
  double threshold_value = 95.0;  // analytic: target; percentile: percent; fixed: c
  Fusion fusion = Fusion::AndReal;

  // output
  std::string out_dir = "out";
  std::size_t image_rows = 0;  // 0: square layout inferred from ambient_dim
  std::size_t image_cols = 0;

  // run
  std::uint64_t master_seed = 1;
};

inline std::string config_to_text(const ExperimentConfig& c) {
  std::string t;
  auto kv = [&](const char* k, const std::string& v) {
    t += k;
    t += " = ";
    t += v;
    t += "\n";
  };
  auto list = [&](const std::vector<double>& vs) {
    std::string s;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      if (i) s += ",";
      s += format_double(vs[i]);
    }
    return s;
  };
  t += "[manifold]\n";
  kv("ambient_dim", std::to_string(c.ambient_dim));
  kv("tangent_dim", std::to_string(c.tangent_dim));
  kv("rotated", c.rotated ? "true" : "false");
  kv("chart_seed", std::to_string(c.chart_seed));
  kv("offset", list(c.offset));
  t += "[operator]\n";
  kv("kind", operator_name(c.op));
  kv("bias_kind", c.bias_kind == BiasKind::Constant ? "constant" : "sinusoidal");
  kv("bias_norm", format_double(c.bias_norm));
  kv("tangent_noise", format_double(c.tangent_noise));
  kv("normal_leak", format_double(c.normal_leak));
  kv("frequency", format_double(c.frequency));
  kv("steps", std::to_string(c.steps));
  kv("sigma0", format_double(c.sigma0));
  kv("components", std::to_string(c.components));
  t += "[data]\n";
  kv("train_per_class", std::to_string(c.train_per_class));
  kv("test_per_class", std::to_string(c.test_per_class));
  kv("signal", format_double(c.signal));
  kv("signal_grid", list(c.signal_grid));
  kv("seeds", std::to_string(c.seeds));
  kv("normal_direction",
     c.normal_direction == NormalDirection::FirstBasis ? "first" : "isotropic");
  t += "[detector]\n";
  kv("learning_rate", format_double(c.hyper.learning_rate));
  kv("iterations", std::to_string(c.hyper.iterations));
  kv("l2", format_double(c.hyper.l2));
  kv("threshold_mode", threshold_mode_name(c.threshold_mode));
  kv("threshold_value", format_double(c.threshold_value));
  kv("fusion", fusion_name(c.fusion));
  t += "[output]\n";
  kv("dir", c.out_dir);
  kv("image_rows", std::to_string(c.image_rows));
  kv("image_cols", std::to_string(c.image_cols));
  t += "[run]\n";
  kv("master_seed", std::to_string(c.master_seed));
  return t;
}

// section.key -> raw value
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::string section;
  for (const std::string& raw : split(text, '\n')) {
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config: malformed section '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw std::invalid_argument("config: empty section name");
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    if (key.empty() || section.empty())
      throw std::invalid_argument("config: key outside section or empty key");
    std::string full = section + "." + key;
    if (out.count(full)) throw std::invalid_argument("config: duplicate key " + full);
    out[full] = trim(line.substr(eq + 1));
  }
  return out;
}

inline std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> vs;
  if (trim(text).empty()) return vs;
  for (const std::string& part : split(text, ',')) vs.push_back(parse_double(trim(part)));
  return vs;
}

inline void validate_config(const ExperimentConfig& c) {
  if (c.tangent_dim < 1 || c.tangent_dim >= c.ambient_dim)
    throw std::invalid_argument("config: need ambient_dim > tangent_dim >= 1");
  if (c.train_per_class == 0 || c.test_per_class == 0)
    throw std::invalid_argument("config: per-class counts must be positive");
  if (c.signal_grid.empty()) throw std::invalid_argument("config: empty signal grid");
  if (c.seeds == 0) throw std::invalid_argument("config: seeds must be positive");
  if (!c.offset.empty() && c.offset.size() != c.ambient_dim)
    throw std::invalid_argument("config: offset length must equal ambient_dim");
  if (c.bias_norm < 0 || c.tangent_noise < 0 || c.normal_leak < 0)
    throw std::invalid_argument("config: negative perturbation scale");
  if (c.steps < 1 || c.steps > 1000)
    throw std::invalid_argument("config: steps outside [1,1000]");
  if (c.sigma0 <= 0) throw std::invalid_argument("config: sigma0 must be positive");
  if (c.components < 2) throw std::invalid_argument("config: need >= 2 components");
  if (c.signal < 0) throw std::invalid_argument("config: negative signal");
  switch (c.threshold_mode) {
    case ThresholdMode::Analytic:
      if (!(c.threshold_value > 0 && c.threshold_value < 1))
        throw std::invalid_argument("config: analytic target outside (0,1)");
      break;
    case ThresholdMode::Percentile:
      if (!(c.threshold_value >= 0 && c.threshold_value <= 100))
        throw std::invalid_argument("config: percentile outside [0,100]");
      break;
    case ThresholdMode::Fixed:
      if (!(c.threshold_value > 0 && c.threshold_value < 1))
        throw std::invalid_argument("config: fixed threshold outside (0,1)");
      break;
  }
}

inline ExperimentConfig experiment_from_text(const std::string& text) {
  std::map<std::string, std::string> kv = parse_config_text(text);
  ExperimentConfig c;
  auto take = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::string();
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto set_u = [&](const char* key, std::size_t& slot) {
    std::string v = take(key);
    if (v.empty()) return;
    long long n = parse_int(v);
    if (n < 0) throw std::invalid_argument(std::string("config: negative ") + key);
    slot = static_cast<std::size_t>(n);
  };
  auto set_d = [&](const char* key, double& slot) {
    std::string v = take(key);
    if (!v.empty()) slot = parse_double(v);
  };

  set_u("manifold.ambient_dim", c.ambient_dim);
  set_u("manifold.tangent_dim", c.tangent_dim);
  if (std::string v = take("manifold.rotated"); !v.empty()) {
    if (v == "true" || v == "1") c.rotated = true;
    else if (v == "false" || v == "0") c.rotated = false;
    else throw std::invalid_argument("config: bad boolean '" + v + "'");
  }
  if (std::string v = take("manifold.chart_seed"); !v.empty())
    c.chart_seed = static_cast<std::uint64_t>(parse_int(v));
  if (std::string v = take("manifold.offset"); !v.empty()) c.offset = parse_double_list(v);

  if (std::string v = take("operator.kind"); !v.empty()) {
    if (v == "analytic") c.op = OperatorKind::Analytic;
    else if (v == "ddim") c.op = OperatorKind::Ddim;
    else throw std::invalid_argument("config: unknown operator '" + v + "'");
  }
  if (std::string v = take("operator.bias_kind"); !v.empty()) {
    if (v == "constant") c.bias_kind = BiasKind::Constant;
    else if (v == "sinusoidal") c.bias_kind = BiasKind::Sinusoidal;
    else throw std::invalid_argument("config: unknown bias kind '" + v + "'");
  }
  set_d("operator.bias_norm", c.bias_norm);
  set_d("operator.tangent_noise", c.tangent_noise);
  set_d("operator.normal_leak", c.normal_leak);
  set_d("operator.frequency", c.frequency);
  if (std::string v = take("operator.steps"); !v.empty())
    c.steps = static_cast<int>(parse_int(v));
  set_d("operator.sigma0", c.sigma0);
  set_u("operator.components", c.components);

  set_u("data.train_per_class", c.train_per_class);
  set_u("data.test_per_class", c.test_per_class);
  set_d("data.signal", c.signal);
  if (std::string v = take("data.signal_grid"); !v.empty()) c.signal_grid = parse_double_list(v);
  set_u("data.seeds", c.seeds);
  if (std::string v = take("data.normal_direction"); !v.empty()) {
    if (v == "first") c.normal_direction = NormalDirection::FirstBasis;
    else if (v == "isotropic") c.normal_direction = NormalDirection::Isotropic;
    else throw std::invalid_argument("config: unknown normal direction '" + v + "'");
  }

  set_d("detector.learning_rate", c.hyper.learning_rate);
  if (std::string v = take("detector.iterations"); !v.empty())
    c.hyper.iterations = static_cast<int>(parse_int(v));
  set_d("detector.l2", c.hyper.l2);
  if (std::string v = take("detector.threshold_mode"); !v.empty()) {
    if (v == "analytic") c.threshold_mode = ThresholdMode::Analytic;
    else if (v == "percentile") c.threshold_mode = ThresholdMode::Percentile;
    else if (v == "fixed") c.threshold_mode = ThresholdMode::Fixed;
    else throw std::invalid_argument("config: unknown threshold mode '" + v + "'");
  }
  set_d("detector.threshold_value", c.threshold_value);
  if (std::string v = take("detector.fusion"); !v.empty()) c.fusion = fusion_from_name(v);

  if (std::string v = take("output.dir"); !v.empty()) c.out_dir = v;
  set_u("output.image_rows", c.image_rows);
  set_u("output.image_cols", c.image_cols);

  if (std::string v = take("run.master_seed"); !v.empty())
    c.master_seed = static_cast<std::uint64_t>(parse_int(v));

  if (!kv.empty())
    throw std::invalid_argument("config: unknown key " + kv.begin()->first);
  validate_config(c);
  return c;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  return experiment_from_text(read_text_file(path));
}

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t config_hash(const ExperimentConfig& c) {
  return fnv1a64(config_to_text(c));
}

}  // namespace did

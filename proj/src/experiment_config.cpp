#include "psc/experiment_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "psc/errors.hpp"
#include "psc/format.hpp"

namespace psc {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                    std::string(expected));
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : ",") + p;
  return out;
}

// One binding per key: parse into the config, print from it.
struct Binding {
  std::function<void(ExperimentConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Binding size_field(T ExperimentConfig::*section, std::size_t T::*field) {
  return {[=](ExperimentConfig& c, std::string_view k, std::string_view v) {
            (c.*section).*field = static_cast<std::size_t>(parse_uint(k, v));
          },
          [=](const ExperimentConfig& c) { return std::to_string((c.*section).*field); }};
}

template <typename T>
Binding double_field(T ExperimentConfig::*section, double T::*field) {
  return {[=](ExperimentConfig& c, std::string_view k, std::string_view v) { (c.*section).*field = parse_double(k, v); },
          [=](const ExperimentConfig& c) { return format_number((c.*section).*field); }};
}

Binding top_size(std::size_t ExperimentConfig::*field) {
  return {[=](ExperimentConfig& c, std::string_view k, std::string_view v) {
            c.*field = static_cast<std::size_t>(parse_uint(k, v));
          },
          [=](const ExperimentConfig& c) { return std::to_string(c.*field); }};
}

Binding top_double(double ExperimentConfig::*field) {
  return {[=](ExperimentConfig& c, std::string_view k, std::string_view v) { c.*field = parse_double(k, v); },
          [=](const ExperimentConfig& c) { return format_number(c.*field); }};
}

Binding psc_size(std::size_t PscConfig::*field) {
  return {[=](ExperimentConfig& c, std::string_view k, std::string_view v) {
            c.detector.psc.*field = static_cast<std::size_t>(parse_uint(k, v));
          },
          [=](const ExperimentConfig& c) { return std::to_string(c.detector.psc.*field); }};
}

Binding psc_bool(bool PscConfig::*field) {
  return {[=](ExperimentConfig& c, std::string_view k, std::string_view v) { c.detector.psc.*field = parse_bool(k, v); },
          [=](const ExperimentConfig& c) { return std::string(c.detector.psc.*field ? "true" : "false"); }};
}

// Ordered key table; to_text() follows this order.
const std::vector<std::pair<std::string, Binding>>& bindings() {
  using E = ExperimentConfig;
  static const std::vector<std::pair<std::string, Binding>> table = {
      {"seed",
       {[](E& c, std::string_view k, std::string_view v) { c.seed = parse_uint(k, v); },
        [](const E& c) { return std::to_string(c.seed); }}},
      {"data.train_images", top_size(&E::train_images)},
      {"data.test_images", top_size(&E::test_images)},
      {"scene.image_height", size_field(&E::scene, &SceneConfig::image_height)},
      {"scene.image_width", size_field(&E::scene, &SceneConfig::image_width)},
      {"scene.min_pedestrians", size_field(&E::scene, &SceneConfig::min_pedestrians)},
      {"scene.max_pedestrians", size_field(&E::scene, &SceneConfig::max_pedestrians)},
      {"scene.min_height", double_field(&E::scene, &SceneConfig::min_height)},
      {"scene.max_height", double_field(&E::scene, &SceneConfig::max_height)},
      {"scene.aspect_ratio", double_field(&E::scene, &SceneConfig::aspect_ratio)},
      {"scene.min_occluders", size_field(&E::scene, &SceneConfig::min_occluders)},
      {"scene.max_occluders", size_field(&E::scene, &SceneConfig::max_occluders)},
      {"scene.min_visibility", double_field(&E::scene, &SceneConfig::min_visibility)},
      {"scene.max_visibility", double_field(&E::scene, &SceneConfig::max_visibility)},
      {"scene.background_noise", double_field(&E::scene, &SceneConfig::background_noise)},
      {"scene.texture_noise", double_field(&E::scene, &SceneConfig::texture_noise)},
      {"scene.clutter", size_field(&E::scene, &SceneConfig::clutter)},
      {"scene.decoys", size_field(&E::scene, &SceneConfig::decoys)},
      {"model.pooled", psc_size(&PscConfig::pooled)},
      {"model.feature_channels", psc_size(&PscConfig::feature_channels)},
      {"model.part_channels", psc_size(&PscConfig::part_channels)},
      {"model.full_channels", psc_size(&PscConfig::full_channels)},
      {"model.embed_dim", psc_size(&PscConfig::embed_dim)},
      {"model.use_intra", psc_bool(&PscConfig::use_intra)},
      {"model.use_inter", psc_bool(&PscConfig::use_inter)},
      {"model.smoothing_sign",
       {[](E& c, std::string_view, std::string_view v) { c.detector.psc.smoothing = smoothing_sign_from_string(v); },
        [](const E& c) { return std::string(to_string(c.detector.psc.smoothing)); }}},
      {"model.backbone_channels",
       {[](E& c, std::string_view k, std::string_view v) {
          const auto parts = split_list(v);
          if (parts.size() != c.detector.backbone_channels.size()) bad_value(k, v, "four comma-separated widths");
          for (std::size_t i = 0; i < parts.size(); ++i) {
            c.detector.backbone_channels[i] = static_cast<std::size_t>(parse_uint(k, parts[i]));
          }
        },
        [](const E& c) {
          std::vector<std::string> p;
          for (auto w : c.detector.backbone_channels) p.push_back(std::to_string(w));
          return join(p);
        }}},
      {"model.anchor_heights",
       {[](E& c, std::string_view k, std::string_view v) {
          c.detector.anchor_heights.clear();
          for (auto p : split_list(v)) c.detector.anchor_heights.push_back(parse_double(k, p));
        },
        [](const E& c) {
          std::vector<std::string> p;
          for (double h : c.detector.anchor_heights) p.push_back(format_number(h));
          return join(p);
        }}},
      {"model.anchor_aspect", double_field(&E::detector, &DetectorConfig::anchor_aspect)},
      {"model.rpn_batch", size_field(&E::detector, &DetectorConfig::rpn_batch)},
      {"model.rpn_top_n", size_field(&E::detector, &DetectorConfig::rpn_top_n)},
      {"model.rpn_nms", double_field(&E::detector, &DetectorConfig::rpn_nms)},
      {"model.proposal_mode",
       {[](E& c, std::string_view, std::string_view v) { c.detector.mode = proposal_mode_from_string(v); },
        [](const E& c) { return std::string(to_string(c.detector.mode)); }}},
      {"model.jitter_per_gt", size_field(&E::detector, &DetectorConfig::jitter_per_gt)},
      {"model.random_negatives", size_field(&E::detector, &DetectorConfig::random_negatives)},
      {"model.hard_negatives", size_field(&E::detector, &DetectorConfig::hard_negatives)},
      {"model.decoy_proposals", size_field(&E::detector, &DetectorConfig::decoy_proposals)},
      {"model.center_jitter", double_field(&E::detector, &DetectorConfig::center_jitter)},
      {"model.scale_min", double_field(&E::detector, &DetectorConfig::scale_min)},
      {"model.scale_max", double_field(&E::detector, &DetectorConfig::scale_max)},
      {"model.pos_iou", double_field(&E::detector, &DetectorConfig::pos_iou)},
      {"model.neg_iou", double_field(&E::detector, &DetectorConfig::neg_iou)},
      {"train.epochs", size_field(&E::train, &TrainConfig::epochs)},
      {"train.lr", double_field(&E::train, &TrainConfig::lr)},
      {"train.decay_fraction", double_field(&E::train, &TrainConfig::decay_fraction)},
      {"train.decay_factor", double_field(&E::train, &TrainConfig::decay_factor)},
      {"train.batch_images", size_field(&E::train, &TrainConfig::batch_images)},
      {"eval.iou_thresh", top_double(&E::iou_thresh)},
      {"eval.nms_iou", top_double(&E::nms_iou)},
      {"eval.score_thresh", top_double(&E::score_thresh)},
      {"eval.subsets",
       {[](E& c, std::string_view, std::string_view v) {
          c.subsets.clear();
          for (auto p : split_list(v)) c.subsets.push_back(parse_subset(p));
        },
        [](const E& c) {
          std::vector<std::string> p;
          for (auto s : c.subsets) p.emplace_back(subset_name(s));
          return join(p);
        }}},
  };
  return table;
}

}  // namespace

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  for (const auto& [name, b] : bindings()) {
    if (name == key) {
      b.set(*this, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void ExperimentConfig::finalize() {
  scene.seed = seed;
  train.seed = seed;
  scene.validate();
  detector.validate();
  train.validate();
  if (train_images == 0 || test_images == 0) throw ConfigError("data.train_images and data.test_images must be positive");
  if (!(iou_thresh > 0.0 && iou_thresh <= 1.0)) throw ConfigError("eval.iou_thresh must be in (0, 1]");
  if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw ConfigError("eval.nms_iou must be in (0, 1]");
  if (subsets.empty()) throw ConfigError("eval.subsets must name at least one subset");
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& [name, b] : bindings()) out += name + " = " + b.get(*this) + "\n";
  return out;
}

ExperimentConfig parse_experiment_config(std::string_view text) {
  ExperimentConfig c;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_experiment_config(ss.str());
}

}  // namespace psc

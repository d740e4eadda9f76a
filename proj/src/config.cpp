#include "h3d/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <type_traits>
#include <sstream>

#include <fmt/format.h>

namespace h3d {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

struct Entry {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Get>
Entry real(const char* key, Get ref) {
  return {key, [ref](RunConfig& c, const std::string& v) { ref(c) = parse_double(v); },
          [ref](const RunConfig& c) {
            RunConfig copy = c;
            return fmt_double(ref(copy));
          }};
}

template <class T, class Get>
Entry integer(const char* key, Get ref) {
  return {key,
          [ref, key](RunConfig& c, const std::string& v) {
            const long long x = parse_int(v);
            if constexpr (std::is_unsigned_v<T>) {
              if (x < 0) throw ConfigError(fmt::format("{} must be non-negative", key));
            }
            if (x < static_cast<long long>(std::numeric_limits<T>::min()) ||
                static_cast<unsigned long long>(x) > static_cast<unsigned long long>(std::numeric_limits<T>::max())) {
              throw ConfigError(fmt::format("{} out of range", key));
            }
            ref(c) = static_cast<T>(x);
          },
          [ref](const RunConfig& c) {
            RunConfig copy = c;
            return fmt::format("{}", ref(copy));
          }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      real("loss.alpha", [](RunConfig& c) -> double& { return c.train.loss.alpha; }),
      real("loss.gamma", [](RunConfig& c) -> double& { return c.train.loss.gamma; }),
      real("loss.beta_dir", [](RunConfig& c) -> double& { return c.train.loss.beta_dir; }),
      {"loss.smoothl1_form",
       [](RunConfig& c, const std::string& v) { c.train.loss.smoothl1_form = parse_smoothl1_form(v); },
       [](const RunConfig& c) { return std::string(to_string(c.train.loss.smoothl1_form)); }},
      real("loss.prob_floor", [](RunConfig& c) -> double& { return c.train.loss.prob_floor; }),

      real("scene.extent_x", [](RunConfig& c) -> double& { return c.scene.extent_x; }),
      real("scene.extent_y", [](RunConfig& c) -> double& { return c.scene.extent_y; }),
      real("scene.anchor_stride", [](RunConfig& c) -> double& { return c.scene.anchor_stride; }),
      integer<int>("scene.min_objects", [](RunConfig& c) -> int& { return c.scene.min_objects; }),
      integer<int>("scene.max_objects", [](RunConfig& c) -> int& { return c.scene.max_objects; }),
      real("scene.length_min", [](RunConfig& c) -> double& { return c.scene.length.lo; }),
      real("scene.length_max", [](RunConfig& c) -> double& { return c.scene.length.hi; }),
      real("scene.width_min", [](RunConfig& c) -> double& { return c.scene.width.lo; }),
      real("scene.width_max", [](RunConfig& c) -> double& { return c.scene.width.hi; }),
      real("scene.height_min", [](RunConfig& c) -> double& { return c.scene.height.lo; }),
      real("scene.height_max", [](RunConfig& c) -> double& { return c.scene.height.hi; }),
      real("scene.yaw_min", [](RunConfig& c) -> double& { return c.scene.yaw.lo; }),
      real("scene.yaw_max", [](RunConfig& c) -> double& { return c.scene.yaw.hi; }),
      real("scene.noise_sigma", [](RunConfig& c) -> double& { return c.scene.noise_sigma; }),
      real("scene.clutter_fraction", [](RunConfig& c) -> double& { return c.scene.clutter_fraction; }),
      integer<std::uint64_t>("scene.seed", [](RunConfig& c) -> std::uint64_t& { return c.scene.seed; }),
      real("scene.anchor_l", [](RunConfig& c) -> double& { return c.scene.anchor_l; }),
      real("scene.anchor_w", [](RunConfig& c) -> double& { return c.scene.anchor_w; }),
      real("scene.anchor_h", [](RunConfig& c) -> double& { return c.scene.anchor_h; }),
      real("scene.anchor_z", [](RunConfig& c) -> double& { return c.scene.anchor_z; }),

      {"train.loss_kind", [](RunConfig& c, const std::string& v) { c.train.loss_kind = parse_loss_kind(v); },
       [](const RunConfig& c) { return std::string(to_string(c.train.loss_kind)); }},
      integer<int>("train.epochs", [](RunConfig& c) -> int& { return c.train.epochs; }),
      real("train.lr", [](RunConfig& c) -> double& { return c.train.lr; }),
      real("train.momentum", [](RunConfig& c) -> double& { return c.train.momentum; }),
      integer<int>("train.batch_size", [](RunConfig& c) -> int& { return c.train.batch_size; }),
      integer<int>("train.train_scenes", [](RunConfig& c) -> int& { return c.train.train_scenes; }),
      integer<int>("train.val_scenes", [](RunConfig& c) -> int& { return c.train.val_scenes; }),
      real("train.pos_iou", [](RunConfig& c) -> double& { return c.train.pos_iou; }),
      real("train.neg_iou", [](RunConfig& c) -> double& { return c.train.neg_iou; }),
      integer<int>("train.hidden", [](RunConfig& c) -> int& { return c.train.hidden; }),
      integer<std::uint64_t>("train.seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }),
      real("train.score_thr", [](RunConfig& c) -> double& { return c.train.score_thr; }),
      real("train.nms_iou", [](RunConfig& c) -> double& { return c.train.nms_iou; }),

      {"eval.thresholds", [](RunConfig& c, const std::string& v) { c.eval.thresholds = parse_double_list(v); },
       [](const RunConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.eval.thresholds.size(); ++i) {
           out += (i ? "," : "") + fmt_double(c.eval.thresholds[i]);
         }
         return out;
       }},
      {"eval.iou_kind", [](RunConfig& c, const std::string& v) { c.eval.iou_kind = parse_iou_kind(v); },
       [](const RunConfig& c) { return std::string(to_string(c.eval.iou_kind)); }},

      {"output.dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
       [](const RunConfig& c) { return c.output_dir; }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  scene.validate();
  train.validate();
  if (eval.thresholds.empty()) throw std::invalid_argument("eval.thresholds must not be empty");
  for (double t : eval.thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("eval.thresholds must lie in [0, 1]");
  }
  if (output_dir.empty()) throw std::invalid_argument("output.dir must not be empty");
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (t.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) throw ConfigError("not a number: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s) {
  const std::string t = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError("not an integer: '" + s + "'");
  return v;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item));
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (key != e.key) continue;
    try {
      e.set(cfg, trim(value));
    } catch (const ConfigError& err) {
      throw ConfigError(fmt::format("{}: {}", key, err.what()));
    } catch (const std::invalid_argument& err) {
      throw ConfigError(fmt::format("{}: {}", key, err.what()));
    }
    return;
  }
  throw ConfigError(fmt::format("unknown config key '{}'", key));
}

void apply_assignment(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(fmt::format("expected key=value, got '{}'", assignment));
  set_config_value(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    try {
      apply_assignment(cfg, line);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", source, lineno, e.what()));
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path);
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& e : entries()) out += fmt::format("{} = {}\n", e.key, e.get(cfg));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.emplace_back(e.key);
  return out;
}

RunConfig resolve_config(const std::string& file, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!file.empty()) apply_config_file(cfg, file);
  for (const auto& o : overrides) apply_assignment(cfg, o);
  return cfg;
}

}  // namespace h3d

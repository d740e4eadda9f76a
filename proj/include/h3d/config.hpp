#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "h3d/eval.hpp"
#include "h3d/scene.hpp"
#include "h3d/train.hpp"

namespace h3d {

struct EvalConfig {
  std::vector<double> thresholds{0.7, 0.5};
  IouKind iou_kind = IouKind::Bev;
};

/// Everything a command can be configured with. Loss settings live in
/// train.loss.
struct RunConfig {
  SceneSpec scene{};
  TrainConfig train{};
  EvalConfig eval{};
  std::string output_dir = "out";

  /// Throws std::invalid_argument.
  void validate() const;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sets one dotted key (e.g. "train.lr") from its text form. Throws
/// ConfigError for unknown keys and malformed values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Applies a "key=value" assignment.
void apply_assignment(RunConfig& cfg, const std::string& assignment);

/// Flat "key = value" lines; '#' starts a comment, blank lines are skipped.
/// Errors carry `source` and the line number.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source = "<config>");
void apply_config_file(RunConfig& cfg, const std::string& path);

/// Every key with its current value, one "key = value" line each, in a
/// fixed order. Feeding the output back through apply_config_text is the
/// identity.
std::string dump_config(const RunConfig& cfg);

std::vector<std::string> config_keys();

/// Defaults, then the optional file, then each "key=value" override in order.
RunConfig resolve_config(const std::string& file, const std::vector<std::string>& overrides);

/// Locale-independent strict number parsing; the whole string must be used.
double parse_double(const std::string& s);
long long parse_int(const std::string& s);
std::vector<double> parse_double_list(const std::string& s);

}  // namespace h3d
